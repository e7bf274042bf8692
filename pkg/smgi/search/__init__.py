# Copyright Amazon.com, Inc. or its affiliates. All Rights Reserved.
# SPDX-License-Identifier: Apache-2.0

from .tune import Symbol, Space, Database, SearchResult, grid_search, coordinate_descent
