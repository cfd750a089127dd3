"""Toy dataset generators and CSV ingestion.

Regression toy: g(z) = z sin(z) observed with unit Gaussian noise at points
equidistant on [0, 10]. Classification toy: inputs uniform on (0, 5), labels
Bernoulli with probability sigma(2 sin(x pi / 2)) — the squashing through the
logistic link is a modeling choice recorded in experiment manifests.

CSV format: header x1,...,xd,y; one row per observation.
"""

from __future__ import annotations

import csv
from pathlib import Path

import numpy as np
from scipy.special import expit

from ..gpr import Dataset
from ..kernels import as_points
from ..laplace import BinaryDataset


def regression_truth(x: np.ndarray) -> np.ndarray:
    return x * np.sin(x)


def classification_latent_truth(x: np.ndarray) -> np.ndarray:
    return 2.0 * np.sin(x * np.pi / 2.0)


def gen_regression_toy(seed: int, n: int = 10, noiseless: bool = False) -> Dataset:
    """n samples of z sin(z) on an equidistant grid over [0, 10], unit noise."""
    xs = np.linspace(0.0, 10.0, n)
    ys = regression_truth(xs)
    if not noiseless:
        rng = np.random.default_rng(seed)
        ys = ys + rng.standard_normal(n)
    return Dataset(xs=xs, ys=ys)


def gen_classification_toy(seed: int, n: int = 30) -> BinaryDataset:
    """n binary labels with P(y=1 | x) = sigma(2 sin(x pi / 2)), x ~ U(0, 5)."""
    if n < 1:
        raise ValueError(f"n must be >= 1, got {n}")
    rng = np.random.default_rng(seed)
    xs = rng.uniform(0.0, 5.0, size=n)
    probs = expit(classification_latent_truth(xs))
    ys = (rng.uniform(size=n) < probs).astype(float)
    return BinaryDataset(xs=xs, ys=ys)


def format_float(v) -> str:
    """Locale-independent decimal formatting with 17 significant digits."""
    return format(float(v), ".17g")


def write_dataset_csv(path, xs, ys) -> None:
    pts = as_points(xs)
    ys = np.asarray(ys, dtype=float).ravel()
    header = [f"x{i + 1}" for i in range(pts.shape[1])] + ["y"]
    with open(path, "w", newline="") as handle:
        writer = csv.writer(handle)
        writer.writerow(header)
        for row, y in zip(pts, ys):
            writer.writerow([format_float(v) for v in row] + [format_float(y)])


def _read_xy(path) -> tuple[np.ndarray, np.ndarray]:
    path = Path(path)
    with open(path, newline="") as handle:
        reader = csv.reader(handle)
        try:
            header = next(reader)
        except StopIteration:
            raise ValueError(f"{path}: empty CSV") from None
        expected = [f"x{i + 1}" for i in range(len(header) - 1)] + ["y"]
        if [h.strip() for h in header] != expected:
            raise ValueError(f"{path}: expected header {','.join(expected)}, got {','.join(header)}")
        rows = [[float(v) for v in row] for row in reader if row]
    if not rows:
        raise ValueError(f"{path}: no data rows")
    data = np.asarray(rows, dtype=float)
    return data[:, :-1], data[:, -1]


def load_regression_csv(path) -> Dataset:
    xs, ys = _read_xy(path)
    return Dataset(xs=xs, ys=ys)


def load_classification_csv(path) -> BinaryDataset:
    xs, ys = _read_xy(path)
    return BinaryDataset(xs=xs, ys=ys)
