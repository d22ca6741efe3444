"""Kernel specifications, Gram matrices, and PSD log-determinants.

A kernel is a declarative value (:class:`KernelSpec`); evaluation is
vectorized over trailing point axes, so single pairs, point sets ``(n, d)``
and stacked batches of point sets ``(b, n, d)`` all share one code path.
Points are plain 1-D float arrays.

Determinant arithmetic never leaves log domain: :func:`log_det_psd` performs
its own symmetric triangular factorization so that a pivot inside the
relative tolerance band is reported as an exact zero (singular matrix) while
a decisively negative pivot raises :class:`NotPsdError`.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from .logvalue import LOG_ZERO, LogValue

__all__ = [
    "KernelSpec",
    "NotPsdError",
    "linear",
    "rbf",
    "polynomial",
    "power",
    "eval_kernel",
    "kernel_diag",
    "gram",
    "gram_cross",
    "log_det_psd",
    "logdet_psd_stack",
    "DEFAULT_PIVOT_TOL",
]

DEFAULT_PIVOT_TOL = 1e-12


class NotPsdError(np.linalg.LinAlgError):
    """A matrix required to be positive semi-definite has a decisively negative pivot."""


@dataclass(frozen=True)
class KernelSpec:
    """Declarative kernel description.

    ``kind`` is one of ``linear``, ``rbf``, ``poly``, ``pow``; use the module
    factories (:func:`linear`, :func:`rbf`, :func:`polynomial`,
    :func:`power`) rather than the raw constructor.  The RBF kernel is
    ``exp(-||x - y||^2 / (2 * bandwidth^2))``, the polynomial kernel
    ``(scale * <x, y> + offset) ** degree``, and ``pow`` the entrywise m-th
    power of its base kernel.  Specs are immutable and safe to share between
    threads; all evaluation functions are pure.
    """

    kind: str
    bandwidth: float = 0.0
    degree: int = 0
    offset: float = 0.0
    scale: float = 1.0
    exponent: int = 1
    base: Optional["KernelSpec"] = None

    def __post_init__(self) -> None:
        if self.kind == "linear":
            pass
        elif self.kind == "rbf":
            if not self.bandwidth > 0:
                raise ValueError("rbf bandwidth must be positive")
        elif self.kind == "poly":
            if self.degree < 1:
                raise ValueError("polynomial degree must be a positive integer")
            if self.offset < 0:
                raise ValueError("polynomial offset must be nonnegative")
            if not self.scale > 0:
                raise ValueError("polynomial scale must be positive")
        elif self.kind == "pow":
            if self.base is None:
                raise ValueError("power kernel requires a base kernel")
            if self.exponent < 1:
                raise ValueError("power exponent must be >= 1")
        else:
            raise ValueError(f"unknown kernel kind {self.kind!r}")

    def to_text(self) -> str:
        """Text form: ``linear``, ``rbf:<bw>``, ``poly:<deg>:<off>:<scale>``, ``pow:<m>:<base>``."""
        if self.kind == "linear":
            return "linear"
        if self.kind == "rbf":
            return f"rbf:{float(self.bandwidth)!r}"
        if self.kind == "poly":
            return f"poly:{self.degree}:{float(self.offset)!r}:{float(self.scale)!r}"
        return f"pow:{self.exponent}:{self.base.to_text()}"

    @classmethod
    def from_text(cls, text: str) -> "KernelSpec":
        """Parse the text form produced by :meth:`to_text`."""
        t = text.strip()
        if t == "linear":
            return linear()
        head, _, rest = t.partition(":")
        try:
            if head == "rbf" and rest:
                return rbf(float(rest))
            if head == "poly":
                deg, off, sc = rest.split(":")
                return polynomial(int(deg), float(off), float(sc))
            if head == "pow":
                m, sep, base = rest.partition(":")
                if sep:
                    return power(cls.from_text(base), int(m))
        except ValueError as exc:
            raise ValueError(f"cannot parse kernel {text!r}: {exc}") from None
        raise ValueError(f"cannot parse kernel {text!r}")


def linear() -> KernelSpec:
    return KernelSpec("linear")


def rbf(bandwidth: float) -> KernelSpec:
    return KernelSpec("rbf", bandwidth=float(bandwidth))


def polynomial(degree: int, offset: float = 0.0, scale: float = 1.0) -> KernelSpec:
    return KernelSpec("poly", degree=int(degree), offset=float(offset), scale=float(scale))


def power(base: KernelSpec, m: int) -> KernelSpec:
    return KernelSpec("pow", exponent=int(m), base=base)


def _check_points(a: np.ndarray, min_ndim: int) -> np.ndarray:
    a = np.asarray(a, dtype=float)
    if a.ndim < min_ndim:
        raise ValueError(f"expected at least {min_ndim} array dimensions, got {a.ndim}")
    if a.shape[-1] < 1:
        raise ValueError("points must have dimension >= 1")
    if not np.all(np.isfinite(a)):
        raise ValueError("points contain non-finite coordinates")
    return a


def eval_kernel(spec: KernelSpec, x, y) -> float:
    """Evaluate k(x, y) for two points of equal dimension."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if x.ndim != 1 or y.ndim != 1:
        raise ValueError("points must be 1-D coordinate arrays")
    if x.shape != y.shape:
        raise ValueError(f"dimension mismatch: {x.shape[0]} vs {y.shape[0]}")
    if not (np.all(np.isfinite(x)) and np.all(np.isfinite(y))):
        raise ValueError("points contain non-finite coordinates")
    return float(_eval_pair(spec, x, y))


def _eval_pair(spec: KernelSpec, x: np.ndarray, y: np.ndarray) -> float:
    if spec.kind == "linear":
        return float(x @ y)
    if spec.kind == "rbf":
        d = x - y
        return float(np.exp(-(d @ d) / (2.0 * spec.bandwidth**2)))
    if spec.kind == "poly":
        return float((spec.scale * (x @ y) + spec.offset) ** spec.degree)
    return _eval_pair(spec.base, x, y) ** spec.exponent


def kernel_diag(spec: KernelSpec, points) -> np.ndarray:
    """k(x, x) for each point row, computed directly (exact for RBF)."""
    pts = _check_points(points, 2)
    if spec.kind == "linear":
        return np.sum(pts * pts, axis=-1)
    if spec.kind == "rbf":
        return np.ones(pts.shape[:-1])
    if spec.kind == "poly":
        return (spec.scale * np.sum(pts * pts, axis=-1) + spec.offset) ** spec.degree
    return kernel_diag(spec.base, pts) ** spec.exponent


def gram_cross(spec: KernelSpec, xs, ys) -> np.ndarray:
    """Rectangular kernel matrix between the rows of ``xs`` and ``ys``.

    Accepts leading batch axes: ``(..., n, d)`` and ``(..., m, d)`` produce
    ``(..., n, m)``.
    """
    xs = _check_points(xs, 2)
    ys = _check_points(ys, 2)
    if xs.shape[-1] != ys.shape[-1]:
        raise ValueError(f"dimension mismatch: {xs.shape[-1]} vs {ys.shape[-1]}")
    return _cross(spec, xs, ys)


def _cross(spec: KernelSpec, xs: np.ndarray, ys: np.ndarray) -> np.ndarray:
    if spec.kind == "linear":
        return xs @ ys.swapaxes(-1, -2)
    if spec.kind == "rbf":
        sq = (
            np.sum(xs * xs, axis=-1)[..., :, None]
            + np.sum(ys * ys, axis=-1)[..., None, :]
            - 2.0 * (xs @ ys.swapaxes(-1, -2))
        )
        np.maximum(sq, 0.0, out=sq)
        return np.exp(-sq / (2.0 * spec.bandwidth**2))
    if spec.kind == "poly":
        return (spec.scale * (xs @ ys.swapaxes(-1, -2)) + spec.offset) ** spec.degree
    return _cross(spec.base, xs, ys) ** spec.exponent


def gram(spec: KernelSpec, points) -> np.ndarray:
    """Gram matrix of a point set; symmetric with an exactly evaluated diagonal.

    ``points`` may be empty (order-0 matrix) or carry leading batch axes.
    """
    pts = np.asarray(points, dtype=float)
    if pts.size == 0 and pts.ndim <= 2:
        return np.zeros((0, 0))
    pts = _check_points(pts, 2)
    k = _cross(spec, pts, pts)
    k = 0.5 * (k + k.swapaxes(-1, -2))
    idx = np.arange(pts.shape[-2])
    k[..., idx, idx] = kernel_diag(spec, pts)
    return k


def logdet_psd_stack(mats, tol: float = DEFAULT_PIVOT_TOL) -> np.ndarray:
    """Log-determinants of a stack of PSD matrices ``(..., n, n)``.

    Symmetric elimination with diagonal pivoting (largest remaining diagonal
    first), which leaves determinants unchanged and is rank revealing.  A
    pivot within ``tol * max(diagonal)`` of zero marks that matrix singular
    (zero state); a pivot below ``-tol * max(diagonal)`` raises
    :class:`NotPsdError`, since under this pivot order it means every
    remaining diagonal entry is decisively negative.
    """
    a = np.array(mats, dtype=float)
    if a.ndim < 2 or a.shape[-1] != a.shape[-2]:
        raise ValueError("expected square matrices")
    if not tol > 0:
        raise ValueError("tol must be positive")
    n = a.shape[-1]
    batch = a.shape[:-2]
    if n == 0:
        return np.zeros(batch)
    a = a.reshape(-1, n, n)
    nb = a.shape[0]
    bi = np.arange(nb)
    thr = tol * np.maximum(np.diagonal(a, axis1=-2, axis2=-1).max(axis=-1), 0.0)
    out = np.zeros(nb)
    zero = np.zeros(nb, dtype=bool)
    with np.errstate(divide="ignore"):
        for j in range(n):
            m = j + np.argmax(np.diagonal(a[:, j:, j:], axis1=-2, axis2=-1), axis=-1)
            if np.any(m != j):
                row_j = a[bi, j, :].copy()
                a[bi, j, :] = a[bi, m, :]
                a[bi, m, :] = row_j
                col_j = a[bi, :, j].copy()
                a[bi, :, j] = a[bi, :, m]
                a[bi, :, m] = col_j
            p = a[:, j, j]
            live = ~zero
            if np.any((p < -thr) & live):
                raise NotPsdError(
                    "pivot below -tol * max(diagonal): matrix is not positive semi-definite"
                )
            zero = zero | ((p <= thr) & live)
            live = ~zero
            psafe = np.where(live, p, 1.0)
            out = out + np.where(live, np.log(psafe), 0.0)
            if j + 1 < n:
                col = np.where(live[:, None], a[:, j + 1 :, j] / psafe[:, None], 0.0)
                a[:, j + 1 :, j + 1 :] -= col[:, :, None] * a[:, j : j + 1, j + 1 :]
    return np.where(zero, LOG_ZERO, out).reshape(batch)


def log_det_psd(m, tol: float = DEFAULT_PIVOT_TOL) -> LogValue:
    """Log-determinant of one symmetric PSD matrix.

    Returns the zero state (``-inf``) for singular input; an order-0 matrix
    has determinant 1, hence log-determinant 0.
    """
    a = np.asarray(m, dtype=float)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise ValueError("expected a square matrix")
    if a.shape[0] == 0:
        return 0.0
    if not np.all(np.isfinite(a)):
        raise ValueError("matrix contains non-finite entries")
    if not np.array_equal(a, a.T):
        raise ValueError("matrix is not symmetric")
    return float(logdet_psd_stack(a, tol))
