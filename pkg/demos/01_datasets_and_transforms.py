"""Datasets and transforms: typed columns, windowing, exploding, standardizing.

Run with: python demos/01_datasets_and_transforms.py
"""

import tempfile
from pathlib import Path

from cpslearn import Dataset, Explode, Select, SlidingWindow, Standardize, TransformChain, load_csv, write_csv


def show(title, dataset):
    print(f"\n--- {title} ---")
    print(dataset)
    names = dataset.column_names
    print(" | ".join(f"{n:>6}" for n in names))
    for i in range(dataset.row_count):
        print(" | ".join(f"{dataset.column(n)[i]:>6}" for n in names))


def main():
    # A tiny two-signal time series: inflow V and level x over five steps.
    series = Dataset({"V": [1.0, 2.0, 3.0, 4.0, 5.0], "x": [10.0, 20.0, 30.0, 40.0, 50.0]})
    show("source series", series)

    # Datasets round-trip through CSV without losing a single bit.
    with tempfile.TemporaryDirectory() as tmp:
        path = Path(tmp) / "series.csv"
        write_csv(series, path)
        print("\nCSV round-trip equal:", load_csv(path) == series)

    # Pivot three consecutive steps into one row: bounded history as features.
    windowed = SlidingWindow(3).apply(series)
    show("after a 3-step sliding window", windowed)

    # Chains compose; selection picks model inputs from the windowed columns.
    chain = TransformChain([SlidingWindow(3), Select(["V_0", "x_0", "V_1", "x_1", "V_2"])])
    show("window + select chain", chain.apply(series))

    # Trace columns hold one array per row; explode unnests them.
    traces = Dataset({"run": [1, 2], "signal": [[0.1, 0.2, 0.3], [0.7, 0.8]]})
    show("exploded traces", Explode(["signal"]).apply(traces))

    # Standardize is adaptive: it must be fitted before it can be applied.
    scaler = Standardize(["x"]).fit(series)
    mean, std, _ = scaler.fitted_stats["x"]
    print(f"\nfitted standardization for x: mean={mean}, std={std:.4f}")
    show("standardized level column", scaler.apply(series))


if __name__ == "__main__":
    main()
