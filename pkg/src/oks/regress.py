"""Kernel least squares over dictionary features.

A fitted model is linear in the features psi(x) = (k(x, d_1), ...,
k(x, d_m)) given by raw kernel evaluations against the dictionary members.
The least-squares problem is solved through an orthogonal factorization of
the (optionally ridge-augmented) design, never through normal equations.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from typing import IO, Sequence, Union

import numpy as np

from .kernels import gram_cross
from .sparsifier import Dictionary

__all__ = [
    "RegressionModel",
    "features",
    "fit",
    "read_labeled_csv",
    "write_labeled_csv",
]


def features(dictionary: Dictionary, xs) -> np.ndarray:
    """Design matrix of kernel evaluations against the dictionary members."""
    xs = np.asarray(xs, dtype=float)
    if xs.ndim != 2:
        raise ValueError("expected an (n, d) array of points")
    return gram_cross(dictionary.kernel, xs, dictionary.members)


@dataclass(frozen=True)
class RegressionModel:
    """Immutable fitted model: dictionary, weights, and the ridge used."""

    dictionary: Dictionary
    weights: np.ndarray
    ridge: float

    def __post_init__(self) -> None:
        w = np.asarray(self.weights, dtype=float)
        if w.ndim != 1 or w.size != len(self.dictionary):
            raise ValueError("weights length must equal dictionary size")
        if not np.all(np.isfinite(w)):
            raise ValueError("weights must be finite")
        w = w.copy()
        w.setflags(write=False)
        object.__setattr__(self, "weights", w)

    def predict(self, x):
        """psi(x) . weights; accepts one point (d,) or a batch (n, d)."""
        x = np.asarray(x, dtype=float)
        if x.ndim == 1:
            return float(features(self.dictionary, x[None, :])[0] @ self.weights)
        return features(self.dictionary, x) @ self.weights

    def evaluate(self, xs, ys) -> float:
        """Mean squared prediction error."""
        ys = np.asarray(ys, dtype=float)
        xs = np.asarray(xs, dtype=float)
        if ys.ndim != 1 or xs.shape[0] != ys.size or ys.size < 1:
            raise ValueError("need equally many points and labels, at least one")
        resid = self.predict(xs) - ys
        return float(np.mean(resid * resid))


def fit(dictionary: Dictionary, xs, ys, ridge: float = 0.0) -> RegressionModel:
    """Least-squares weights over dictionary features.

    With ridge > 0 the design is augmented with sqrt(ridge) * I, which keeps
    the solve a single orthogonal factorization.  A rank-deficient design
    with ridge = 0 is reported as an error (resolvable by any ridge > 0).
    """
    if len(dictionary) < 1:
        raise ValueError("dictionary must be nonempty")
    if ridge < 0:
        raise ValueError("ridge must be nonnegative")
    xs = np.asarray(xs, dtype=float)
    ys = np.asarray(ys, dtype=float)
    if xs.ndim != 2 or ys.ndim != 1 or xs.shape[0] != ys.size or ys.size < 1:
        raise ValueError("need equally many points and labels, at least one")
    psi = features(dictionary, xs)
    m = psi.shape[1]
    if ridge > 0:
        design = np.vstack([psi, np.sqrt(ridge) * np.eye(m)])
        target = np.concatenate([ys, np.zeros(m)])
    else:
        design, target = psi, ys
    weights, _, rank, _ = np.linalg.lstsq(design, target, rcond=None)
    if ridge == 0 and rank < m:
        raise np.linalg.LinAlgError(
            f"design has rank {rank} < {m}; refit with ridge > 0"
        )
    return RegressionModel(dictionary, weights, float(ridge))


def read_labeled_csv(source: Union[str, IO[str]]) -> tuple[np.ndarray, np.ndarray]:
    """Read labeled data: feature columns then a final ``y`` column.

    The header row is required; its last entry must be ``y``.
    """
    if isinstance(source, str):
        with open(source, "r", newline="") as fh:
            return read_labeled_csv(fh)
    reader = csv.reader(source)
    try:
        header = next(reader)
    except StopIteration:
        raise ValueError("labeled CSV is empty; a header row is required") from None
    if len(header) < 2 or header[-1].strip() != "y":
        raise ValueError("labeled CSV header must end with a 'y' column")
    rows = [[float(v) for v in row] for row in reader if row]
    if not rows:
        raise ValueError("labeled CSV contains no data rows")
    data = np.array(rows)
    if data.shape[1] != len(header):
        raise ValueError("labeled CSV rows disagree with header width")
    return data[:, :-1], data[:, -1]


def write_labeled_csv(
    target: Union[str, IO[str]],
    xs,
    ys,
    feature_names: Sequence[str] | None = None,
) -> None:
    if isinstance(target, str):
        with open(target, "w", newline="") as fh:
            write_labeled_csv(fh, xs, ys, feature_names)
        return
    xs = np.asarray(xs, dtype=float)
    ys = np.asarray(ys, dtype=float)
    if feature_names is None:
        feature_names = [f"x{i}" for i in range(xs.shape[1])]
    target.write(",".join([*feature_names, "y"]) + "\n")
    for row, y in zip(xs, ys):
        target.write(",".join(f"{float(v)!r}" for v in row) + f",{float(y)!r}\n")
