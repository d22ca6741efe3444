"""Streaming dictionary construction by approximate linear dependence.

A point is admitted when its squared projection residual onto the span of
the current dictionary exceeds the threshold ``alpha``.  The residual equals
the ratio of consecutive Gram determinants, so after every admission
``log det G_D > |D| * log(alpha)`` holds strictly.

Instead of the explicit Gram inverse, the dictionary maintains a growing
lower-triangular factor L with ``G_D = L @ L.T``: admission cost stays
O(|D|^2) per offered point while the factorization is numerically better
behaved.  Brute-force oracles (:func:`kstar_oracle`,
:func:`check_alpha_compatible`) recompute everything from dense Gram
matrices and serve as independent references for tests.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from itertools import combinations
from typing import IO, NamedTuple, Sequence, Union

import numpy as np
from scipy.linalg import solve_triangular

from .kernels import (
    DEFAULT_PIVOT_TOL,
    KernelSpec,
    eval_kernel,
    gram,
    gram_cross,
    log_det_psd,
    logdet_psd_stack,
)
from .logvalue import LogValue

__all__ = [
    "Admission",
    "Dictionary",
    "GrowthTrace",
    "NumericalConsistencyError",
    "run_stream",
    "check_alpha_compatible",
    "kstar_oracle",
    "save_dictionary",
    "load_dictionary",
]

# residuals in [-RESIDUAL_CLAMP * max(1, k(x,x)), 0) are rounding noise;
# anything lower is a bug (the scale factor keeps the window meaningful for
# kernels whose diagonal is far from 1)
RESIDUAL_CLAMP = 1e-12


class NumericalConsistencyError(np.linalg.LinAlgError):
    """Incremental state disagrees with an exact-arithmetic guarantee beyond tolerance."""


class Admission(NamedTuple):
    admitted: bool
    residual: float


class Dictionary:
    """Ordered admitted points plus the triangular factor of their Gram matrix.

    Single-writer: :meth:`offer` requires exclusive access; residual queries
    and property reads are safe between mutations.
    """

    def __init__(self, kernel: KernelSpec, alpha: float):
        if not alpha > 0:
            raise ValueError("alpha must be positive")
        self.kernel = kernel
        self.alpha = float(alpha)
        self.log_det: LogValue = 0.0  # order-0 Gram has determinant 1
        self._n = 0
        self._dim: int | None = None
        self._pts: np.ndarray | None = None
        self._fac: np.ndarray | None = None

    def __len__(self) -> int:
        return self._n

    @property
    def members(self) -> np.ndarray:
        """Admitted points, in admission order, as an (n, d) array (copy)."""
        if self._n == 0:
            return np.zeros((0, self._dim or 0))
        return self._pts[: self._n].copy()

    @property
    def factor(self) -> np.ndarray:
        """Lower-triangular L with gram(kernel, members) == L @ L.T (copy)."""
        if self._n == 0:
            return np.zeros((0, 0))
        return np.tril(self._fac[: self._n, : self._n])

    def residual(self, x) -> float:
        """Squared distance of x's feature image to the span of the dictionary.

        Solves one triangular system against the factor: O(|D|^2).
        """
        delta, _, _ = self._project(np.asarray(x, dtype=float))
        return delta

    def offer(self, x) -> Admission:
        """Admit x when its residual strictly exceeds alpha; ties reject.

        On admission the factor gains one row with diagonal sqrt(residual)
        and the log-determinant grows by exactly log(residual).
        """
        x = np.asarray(x, dtype=float)
        delta, w, _ = self._project(x)
        if not delta > self.alpha:
            return Admission(False, delta)
        n = self._n
        self._ensure_capacity(n + 1, x.shape[0])
        if w is not None:
            self._fac[n, :n] = w
        self._fac[n, n] = math.sqrt(delta)
        self._pts[n] = x
        self._n = n + 1
        self._dim = x.shape[0]
        self.log_det += math.log(delta)
        return Admission(True, delta)

    def _project(self, x: np.ndarray):
        if x.ndim != 1:
            raise ValueError("a point must be a 1-D coordinate array")
        if not np.all(np.isfinite(x)):
            raise ValueError("point contains non-finite coordinates")
        if self._n and x.shape[0] != self._dim:
            raise ValueError(f"dimension mismatch: point has {x.shape[0]}, members have {self._dim}")
        kxx = eval_kernel(self.kernel, x, x)
        if self._n == 0:
            return kxx, None, kxx
        g = gram_cross(self.kernel, x[None, :], self._pts[: self._n])[0]
        w = solve_triangular(
            self._fac[: self._n, : self._n], g, lower=True, check_finite=False
        )
        delta = kxx - float(w @ w)
        if delta < 0:
            clamp = RESIDUAL_CLAMP * max(1.0, kxx)
            if delta < -clamp:
                raise NumericalConsistencyError(
                    f"projection residual {delta} fell below -{clamp}"
                )
            delta = 0.0
        return delta, w, kxx

    def _ensure_capacity(self, n: int, dim: int) -> None:
        if self._pts is None:
            cap = 8
            self._pts = np.zeros((cap, dim))
            self._fac = np.zeros((cap, cap))
            return
        cap = self._pts.shape[0]
        if n <= cap:
            return
        new_cap = max(2 * cap, n)
        pts = np.zeros((new_cap, self._pts.shape[1]))
        fac = np.zeros((new_cap, new_cap))
        pts[:cap] = self._pts
        fac[:cap, :cap] = self._fac
        self._pts, self._fac = pts, fac


@dataclass(frozen=True)
class GrowthTrace:
    """Per-checkpoint record (samples seen, dictionary size, log det) of a run."""

    samples: np.ndarray
    dict_size: np.ndarray
    log_det: np.ndarray

    def __post_init__(self) -> None:
        n = np.asarray(self.samples, dtype=int)
        size = np.asarray(self.dict_size, dtype=int)
        ld = np.asarray(self.log_det, dtype=float)
        if not (n.ndim == size.ndim == ld.ndim == 1 and n.size == size.size == ld.size):
            raise ValueError("trace columns must be 1-D and equally long")
        if np.any(size[1:] < size[:-1]):
            raise ValueError("dictionary size must be nondecreasing")
        if np.any(size > n):
            raise ValueError("dictionary size cannot exceed samples seen")
        for name, arr in (("samples", n), ("dict_size", size), ("log_det", ld)):
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)

    def __len__(self) -> int:
        return int(self.samples.size)

    @classmethod
    def from_records(cls, records: Sequence[tuple]) -> "GrowthTrace":
        if not records:
            raise ValueError("a trace needs at least one record")
        n, size, ld = zip(*records)
        return cls(np.array(n), np.array(size), np.array(ld))

    def to_csv(self, target: Union[str, IO[str]]) -> None:
        if isinstance(target, str):
            with open(target, "w", newline="") as fh:
                self.to_csv(fh)
            return
        target.write("n,dict_size,log_det\n")
        for n, size, ld in zip(self.samples, self.dict_size, self.log_det):
            target.write(f"{int(n)},{int(size)},{float(ld)!r}\n")

    @classmethod
    def from_csv(cls, source: Union[str, IO[str]]) -> "GrowthTrace":
        if isinstance(source, str):
            with open(source, "r", newline="") as fh:
                return cls.from_csv(fh)
        header = source.readline().strip()
        if header != "n,dict_size,log_det":
            raise ValueError(f"unexpected trace header {header!r}")
        records = []
        for line in source:
            line = line.strip()
            if not line:
                continue
            n, size, ld = line.split(",")
            records.append((int(n), int(size), float(ld)))
        return cls.from_records(records)


def run_stream(
    kernel: KernelSpec,
    alpha: float,
    points,
    trace_every: int = 0,
) -> tuple[Dictionary, GrowthTrace]:
    """Offer points in order; record (n, |D|, log det) every ``trace_every``
    samples (0 records only the final state) and always at the end."""
    pts = np.asarray(points, dtype=float)
    if pts.ndim != 2 or pts.shape[0] < 1:
        raise ValueError("expected a nonempty (n, d) stream of points")
    if trace_every < 0:
        raise ValueError("trace_every must be >= 0")
    d = Dictionary(kernel, alpha)
    records = []
    total = pts.shape[0]
    for i in range(total):
        d.offer(pts[i])
        seen = i + 1
        if trace_every and seen % trace_every == 0:
            records.append((seen, len(d), d.log_det))
    if not records or records[-1][0] != total:
        records.append((total, len(d), d.log_det))
    return d, GrowthTrace.from_records(records)


def check_alpha_compatible(kernel: KernelSpec, alpha: float, seq) -> bool:
    """True iff every prefix determinant ratio of the sequence exceeds alpha.

    Each ratio is computed from dense log-determinants of the prefix Gram
    matrices, independently of any incremental factor.
    """
    if not alpha > 0:
        raise ValueError("alpha must be positive")
    pts = np.asarray(seq, dtype=float)
    if pts.size == 0:
        return True
    if pts.ndim != 2:
        raise ValueError("expected an (n, d) sequence of points")
    if pts.shape[0] > 500:
        raise ValueError("dense compatibility check limited to 500 points")
    g = gram(kernel, pts)
    log_alpha = math.log(alpha)
    prev = 0.0
    for j in range(1, pts.shape[0] + 1):
        ld = log_det_psd(g[:j, :j])
        if not ld - prev > log_alpha:
            return False
        prev = ld
    return True


def kstar_oracle(kernel: KernelSpec, alpha: float, points) -> int:
    """Largest k such that some k-subset A has log det G(A) > k log(alpha).

    Exhaustive subset enumeration (sizes scanned from largest down), limited
    to 14 points.  Returns 0 when no subset of any size passes.
    """
    if not alpha > 0:
        raise ValueError("alpha must be positive")
    pts = np.asarray(points, dtype=float)
    if pts.size == 0:
        return 0
    if pts.ndim != 2:
        raise ValueError("expected an (n, d) sequence of points")
    n = pts.shape[0]
    if n > 14:
        raise ValueError("subset enumeration limited to 14 points")
    g = gram(kernel, pts)
    log_alpha = math.log(alpha)
    for j in range(n, 0, -1):
        idx = np.array(list(combinations(range(n), j)), dtype=np.intp)
        subs = g[idx[:, :, None], idx[:, None, :]]
        ld = logdet_psd_stack(subs, DEFAULT_PIVOT_TOL)
        if np.any(ld > j * log_alpha):
            return j
    return 0


def save_dictionary(d: Dictionary, csv_path: str, json_path: str | None = None) -> None:
    """Snapshot: member coordinates as CSV plus a JSON sidecar with the
    kernel spec, alpha, and log-determinant."""
    if json_path is None:
        json_path = csv_path + ".json"
    members = d.members
    dim = members.shape[1]
    with open(csv_path, "w", newline="") as fh:
        fh.write(",".join(f"x{i}" for i in range(dim)) + "\n")
        for row in members:
            fh.write(",".join(f"{float(v)!r}" for v in row) + "\n")
    sidecar = {
        "kernel": d.kernel.to_text(),
        "alpha": d.alpha,
        "size": len(d),
        "log_det": d.log_det,
    }
    with open(json_path, "w") as fh:
        json.dump(sidecar, fh, indent=2, sort_keys=True)
        fh.write("\n")


def load_dictionary(csv_path: str, json_path: str | None = None) -> Dictionary:
    """Rebuild a dictionary from a snapshot by replaying the admissions.

    Every stored member must re-admit (the member sequence is
    alpha-compatible by construction); a failure indicates a corrupt
    snapshot.
    """
    if json_path is None:
        json_path = csv_path + ".json"
    with open(json_path) as fh:
        sidecar = json.load(fh)
    kernel = KernelSpec.from_text(sidecar["kernel"])
    d = Dictionary(kernel, float(sidecar["alpha"]))
    with open(csv_path, newline="") as fh:
        header = fh.readline()
        if not header.startswith("x0"):
            raise ValueError("dictionary snapshot is missing its header row")
        for line in fh:
            line = line.strip()
            if not line:
                continue
            point = np.array([float(v) for v in line.split(",")])
            if not d.offer(point).admitted:
                raise ValueError("snapshot member failed to re-admit; file is corrupt")
    if len(d) != int(sidecar["size"]):
        raise ValueError("snapshot size disagrees with sidecar")
    return d
