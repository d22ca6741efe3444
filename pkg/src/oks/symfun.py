"""Elementary symmetric polynomials over eigenvalue spectra, in log domain.

The scaled convention is used throughout:

    nu(n, k) = k! * sum over k-subsets of {1..n} of products of eigenvalues,

i.e. the plain elementary symmetric polynomial times k!.  These quantities
decay super-exponentially in k, so every routine here carries them as logs
(``LOG_ZERO`` for an exact zero).  Zero eigenvalues are permitted and
propagate as exact zeros through the recursion.

A truncated spectrum may declare an upper bound on the discarded tail mass;
:func:`tail_sum` folds it in so decay bounds computed from a truncation stay
valid upper bounds.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from itertools import combinations
from typing import IO, Iterable, Union

import numpy as np
from scipy.special import logsumexp

from .logvalue import LOG_ZERO, LogValue, is_log_zero, log_binomial, log_factorial

__all__ = [
    "Spectrum",
    "EspTable",
    "esp_table",
    "esp_brute",
    "log_nu",
    "tail_sum",
    "decay_bound",
    "nu_geometric",
]


@dataclass(frozen=True)
class Spectrum:
    """Descending nonnegative eigenvalue sequence with declared tail mass.

    ``declared_tail`` is an upper bound on the mass of the truncated part
    (0 for a genuinely finite spectrum).
    """

    values: np.ndarray
    declared_tail: float = 0.0

    def __post_init__(self) -> None:
        v = np.asarray(self.values, dtype=float)
        if v.ndim != 1:
            raise ValueError("spectrum values must be a 1-D sequence")
        if not np.all(np.isfinite(v)):
            raise ValueError("spectrum values must be finite")
        if v.size and v[-1] < 0:
            raise ValueError("spectrum values must be nonnegative")
        if np.any(v[:-1] < v[1:]):
            raise ValueError("spectrum values must be sorted descending")
        tail = float(self.declared_tail)
        if not (math.isfinite(tail) and tail >= 0):
            raise ValueError("declared_tail must be finite and nonnegative")
        v = v.copy()
        v.setflags(write=False)
        object.__setattr__(self, "values", v)
        object.__setattr__(self, "declared_tail", tail)

    @property
    def size(self) -> int:
        return int(self.values.size)

    @property
    def mass(self) -> float:
        """Total mass: sum of retained values plus the declared tail."""
        return float(self.values.sum() + self.declared_tail)

    def to_csv(self, target: Union[str, IO[str]]) -> None:
        """One eigenvalue per row, descending, with a ``# tail=`` header when nonzero."""
        if isinstance(target, str):
            with open(target, "w", newline="") as fh:
                self.to_csv(fh)
            return
        if self.declared_tail:
            target.write(f"# tail={self.declared_tail!r}\n")
        for v in self.values:
            target.write(f"{float(v)!r}\n")

    @classmethod
    def from_csv(cls, source: Union[str, IO[str]]) -> "Spectrum":
        if isinstance(source, str):
            with open(source, "r", newline="") as fh:
                return cls.from_csv(fh)
        tail = 0.0
        vals = []
        for raw in source:
            line = raw.strip()
            if not line:
                continue
            if line.startswith("#"):
                body = line[1:].strip()
                key, sep, value = body.partition("=")
                if key.strip() != "tail" or not sep:
                    raise ValueError(f"unrecognized spectrum header {line!r}")
                tail = float(value)
                continue
            vals.append(float(line))
        return cls(np.array(vals, dtype=float), tail)


@dataclass(frozen=True)
class EspTable:
    """Dynamic-programming table of log nu(n, k).

    ``log_values[n, k]`` holds log nu over the first n eigenvalues; column 0
    is log 1 = 0 and entries with k > n are the zero state.  The final row
    (n = spectrum length) approximates the infinite-spectrum value.
    """

    log_values: np.ndarray

    def __post_init__(self) -> None:
        a = np.asarray(self.log_values, dtype=float)
        if a.ndim != 2:
            raise ValueError("table must be 2-D")
        a = a.copy()
        a.setflags(write=False)
        object.__setattr__(self, "log_values", a)

    @property
    def n_max(self) -> int:
        return self.log_values.shape[0] - 1

    @property
    def k_max(self) -> int:
        return self.log_values.shape[1] - 1

    def value(self, n: int, k: int) -> LogValue:
        """log nu(n, k)."""
        if not (0 <= n <= self.n_max and 0 <= k <= self.k_max):
            raise IndexError(f"(n={n}, k={k}) outside table")
        return float(self.log_values[n, k])

    def final(self, k: int) -> LogValue:
        """log nu(k) over the full retained spectrum."""
        return self.value(self.n_max, k)


def esp_table(spec: Spectrum, k_max: int) -> EspTable:
    """Fill the log-domain recursion nu(n,k) = k*lam_n*nu(n-1,k-1) + nu(n-1,k).

    O(N * k_max) work; each step is an exact two-term log-sum.
    """
    if k_max < 0:
        raise ValueError("k_max must be >= 0")
    n_len = spec.size
    if k_max > n_len:
        raise ValueError(f"k_max={k_max} exceeds spectrum length {n_len}")
    with np.errstate(divide="ignore"):
        loglam = np.log(spec.values)
    table = np.full((n_len + 1, k_max + 1), LOG_ZERO)
    table[:, 0] = 0.0
    if k_max > 0:
        logk = np.log(np.arange(1, k_max + 1, dtype=float))
        for n in range(1, n_len + 1):
            prev = table[n - 1]
            table[n, 1:] = np.logaddexp(prev[1:], logk + loglam[n - 1] + prev[:-1])
    return EspTable(table)


def log_nu(spec: Spectrum, k: int) -> LogValue:
    """log nu(k) over the retained values of ``spec`` (tail excluded)."""
    return esp_table(spec, min(k, spec.size)).final(k) if k <= spec.size else LOG_ZERO


def esp_brute(spec: Spectrum, k: int) -> LogValue:
    """Subset-enumeration oracle for log nu(k); independent of the recursion.

    Limited to spectra of length <= 22.
    """
    n_len = spec.size
    if n_len > 22:
        raise ValueError("brute-force enumeration limited to spectra of length <= 22")
    if k < 0:
        raise ValueError("k must be >= 0")
    if k > n_len:
        return LOG_ZERO
    with np.errstate(divide="ignore"):
        logs = np.log(spec.values)
    terms = [logs[list(c)].sum() for c in combinations(range(n_len), k)]
    return float(log_factorial(k) + logsumexp(np.array(terms)))


def tail_sum(spec: Spectrum, k: int) -> float:
    """Mass beyond index k: sum of values[k:] plus the declared tail."""
    if not 0 <= k <= spec.size:
        raise ValueError(f"k={k} outside [0, {spec.size}]")
    return float(spec.values[k:].sum() + spec.declared_tail)


def decay_bound(log_nu_k: LogValue, k: int, s: int, lambda_tail_k: float) -> LogValue:
    """Upper bound on log nu(k+s) from log nu(k) and the tail mass beyond k.

        bound = log nu(k) + s * log(tail) + log C(k+s, k)

    A zero tail with s >= 1 forces nu(k+s) = 0 exactly.
    """
    if k < 0 or s < 0:
        raise ValueError("k and s must be nonnegative integers")
    if not (math.isfinite(lambda_tail_k) and lambda_tail_k >= 0):
        raise ValueError("lambda_tail_k must be finite and nonnegative")
    if s == 0:
        return float(log_nu_k)
    if lambda_tail_k == 0 or is_log_zero(log_nu_k):
        return LOG_ZERO
    return float(log_nu_k + s * math.log(lambda_tail_k) + log_binomial(k + s, k))


def nu_geometric(sigma: float, k: int) -> LogValue:
    """log nu(k) for the exact infinite geometric spectrum lam_i = sigma**-i, i >= 1.

    Closed form: log k! - sum_{i=1..k} log(sigma**i - 1).  Note the indexing
    convention: with the leading eigenvalue sigma**-1 (i starting at 1) the
    subset-enumeration oracle reproduces exactly this value; a convention
    starting at i = 0 would multiply nu(k) by sigma**k.  Both share the
    asymptotic -(k^2/2) log sigma + log k! + O(k).
    """
    if not sigma > 1:
        raise ValueError("sigma must exceed 1")
    if k < 1:
        raise ValueError("k must be >= 1")
    i = np.arange(1, k + 1, dtype=float)
    # log(sigma**i - 1) = i*log(sigma) + log(1 - sigma**-i), overflow-free
    log_terms = i * math.log(sigma) + np.log1p(-np.power(sigma, -i))
    return float(log_factorial(k) - log_terms.sum())
