# Copyright Amazon.com, Inc. or its affiliates. All Rights Reserved.
# SPDX-License-Identifier: Apache-2.0
"""Plot V*(p, i) against p[0] for two-type games.

Usage: python3 plot/value_function.py <table.csv> [<out.png>]
where table.csv comes from `smgi solve --format csv`.
"""

import sys

import matplotlib.pyplot as plt
import pandas as pd


def load_table(file_name):
    df = pd.read_csv(file_name)
    beliefs = df["belief"].str.split(";", expand=True).astype(float)
    if beliefs.shape[1] != 2:
        raise ValueError(f"Only two-type games can be plotted, got {beliefs.shape[1]} types")
    df["p0"] = beliefs[0]
    return {
        state: group.sort_values("p0")[["p0", "value"]].to_numpy()
        for state, group in df.groupby("state")
    }


def plot(file_name, fig_name=None):
    curves = load_table(file_name)
    fig, ax = plt.subplots(1, 1, figsize=(5, 3.5))
    markers = ["o", "s", "^", "v", "D", "x"]
    for idx, (state, points) in enumerate(sorted(curves.items())):
        ax.plot(
            points[:, 0],
            points[:, 1],
            marker=markers[idx % len(markers)],
            markersize=3,
            label=f"state {state}",
        )
    ax.set_xlabel("P(type 0)")
    ax.set_ylabel("Value")
    ax.set_axisbelow(True)
    ax.grid(axis="y")
    ax.legend(loc="best")
    fig.tight_layout()
    fig_name = fig_name or file_name.rsplit(".", 1)[0] + ".png"
    fig.savefig(fig_name, format="png", dpi=200)
    print(f"Result saved to {fig_name}")


if __name__ == "__main__":
    assert len(sys.argv) in (2, 3)
    plot(*sys.argv[1:])
