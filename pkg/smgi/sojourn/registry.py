# Copyright Amazon.com, Inc. or its affiliates. All Rights Reserved.
# SPDX-License-Identifier: Apache-2.0
"""Sojourn-time law registration."""

SOJOURN_LAWS = {}


def register_sojourn_law(kind):
    """Register a sojourn-time law family under its spec-file kind."""

    def decorator(law_cls):
        if kind in SOJOURN_LAWS:
            raise ValueError(f"Sojourn law {kind} already registered")
        SOJOURN_LAWS[kind] = law_cls
        law_cls.kind = kind
        return law_cls

    return decorator


def get_all_sojourn_laws():
    """Get all registered sojourn-time law families."""
    return SOJOURN_LAWS


def get_sojourn_law_cls(kind):
    """Get the sojourn-time law class of a kind."""
    if kind not in SOJOURN_LAWS:
        raise ValueError(
            f"Sojourn law {kind} not registered. Only support {sorted(SOJOURN_LAWS)}"
        )
    return SOJOURN_LAWS[kind]
