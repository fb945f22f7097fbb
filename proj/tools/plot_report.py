#!/usr/bin/env python3
"""Plot the tables written by `poiact evaluate`.

Writes error_density_<zone>.png (kernel density of the three Hellinger errors)
and category_pd.png (mean percentage difference per category and zone).
"""
import argparse
from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt
import pandas as pd
from scipy.stats import gaussian_kde
import numpy as np

ERRORS = {
    "hellinger_local": "local",
    "hellinger_poi_norm": "POI normalized",
    "hellinger_pos_norm": "POS normalized",
}


def plot_error_densities(errors: pd.DataFrame, out_dir: Path) -> None:
    xs = np.linspace(0.0, 1.0, 400)
    for zone, rows in errors.groupby("zone"):
        fig, ax = plt.subplots(figsize=(6, 4))
        for column, label in ERRORS.items():
            values = rows[column].to_numpy()
            if len(values) < 2 or np.ptp(values) == 0.0:
                continue
            ax.plot(xs, gaussian_kde(values, bw_method="silverman")(xs), label=label)
        ax.set_xlabel("Hellinger distance")
        ax.set_ylabel("density")
        ax.set_title(f"{zone} ({len(rows)} locations)")
        ax.legend()
        fig.tight_layout()
        fig.savefig(out_dir / f"error_density_{zone}.png", dpi=120)
        plt.close(fig)


def plot_category_pd(pd_table: pd.DataFrame, out_dir: Path) -> None:
    pivot = pd_table.pivot(index="activity", columns="zone", values="mean_percentage_difference").fillna(0.0)
    fig, ax = plt.subplots(figsize=(max(6, 0.5 * len(pivot)), 4))
    pivot.plot.bar(ax=ax)
    ax.set_ylabel("mean percentage difference")
    fig.tight_layout()
    fig.savefig(out_dir / "category_pd.png", dpi=120)
    plt.close(fig)


def main() -> None:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("report_dir", type=Path, help="--out-dir of poiact evaluate")
    parser.add_argument("--out", type=Path, help="directory for the PNGs (default: report_dir)")
    args = parser.parse_args()
    out_dir = args.out or args.report_dir
    out_dir.mkdir(parents=True, exist_ok=True)

    errors = pd.read_csv(args.report_dir / "location_errors.csv", comment="#")
    plot_error_densities(errors, out_dir)
    pd_table = pd.read_csv(args.report_dir / "category_pd.csv", comment="#")
    if not pd_table.empty:
        plot_category_pd(pd_table, out_dir)


if __name__ == "__main__":
    main()
