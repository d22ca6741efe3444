"""Closed-form tail bounds, sample thresholds, and growth-rate predictions.

Probability bounds are returned raw in log domain (possibly above log 1);
clamping into [0, 1] is a display concern, because the raw values are what
monotonicity checks and vacuous-regime detection need.
"""

from __future__ import annotations

import math

from .logvalue import LogValue, is_log_zero, log_binomial
from .spectrum import synthetic_spectrum
from .symfun import Spectrum, esp_table, log_nu

__all__ = [
    "dict_tail_bound",
    "sample_threshold",
    "growth_prediction",
    "moment_bound",
]

_SCAN_LIMIT = 100_000


def dict_tail_bound(n: int, k: int, alpha: float, spec: Spectrum) -> LogValue:
    """Raw log bound on P[dictionary size >= k] after n samples:

        log C(n, k) + log nu(k) - k * log(alpha).
    """
    if not 1 <= k <= n:
        raise ValueError(f"need 1 <= k <= n, got k={k}, n={n}")
    if k > spec.size:
        raise ValueError(f"k={k} exceeds spectrum length {spec.size}")
    if not alpha > 0:
        raise ValueError("alpha must be positive")
    return float(log_binomial(n, k) + log_nu(spec, k) - k * math.log(alpha))


def sample_threshold(k: int, alpha: float, delta: float, spec: Spectrum) -> float:
    """Sample count below which P[dictionary size > k] < delta is certified:

        (alpha * k / e) * (delta / nu(k)) ** (1/k).

    Returns ``inf`` (unbounded) when nu(k) is exactly zero: no sample count
    can produce more than k dictionary members.
    """
    if k < 1:
        raise ValueError("k must be >= 1")
    if not alpha > 0:
        raise ValueError("alpha must be positive")
    if not 0 < delta < 1:
        raise ValueError("delta must lie in (0, 1)")
    if k > spec.size:
        raise ValueError(f"k={k} exceeds spectrum length {spec.size}")
    return _threshold_from_log_nu(k, alpha, delta, log_nu(spec, k))


def _threshold_from_log_nu(k: int, alpha: float, delta: float, lnu: LogValue) -> float:
    if is_log_zero(lnu):
        return math.inf
    return float(alpha * k / math.e * math.exp((math.log(delta) - lnu) / k))


def _exact_threshold(kind: str, param: float, k: int, alpha: float, delta: float) -> float:
    spec = synthetic_spectrum(kind, param, max(4 * k, 64))
    return sample_threshold(k, alpha, delta, spec)


def growth_prediction(kind: str, param: float, n: int, alpha: float, delta: float) -> int:
    """Smallest k whose sample threshold exceeds n under the given decay law.

    Semantics: the threshold at each k is evaluated on the matching synthetic
    spectrum truncated at max(4k, 64) terms.  A unit-step scan is exact but
    O(k^3) overall, so a coarse pass first locates the crossing with one
    shared long-truncation table per doubling of the search window (longer
    truncations only lower thresholds, so the coarse crossing upper-bounds
    the exact one), and the answer is then settled with exact per-k
    evaluations around it.
    """
    if n < 1:
        raise ValueError("n must be >= 1")
    if kind not in ("geometric", "polynomial"):
        raise ValueError(f"unsupported decay kind {kind!r}")
    window = 64
    candidate = None
    while candidate is None:
        if window > _SCAN_LIMIT:
            raise RuntimeError("growth prediction scan did not terminate")
        table = esp_table(synthetic_spectrum(kind, param, 4 * window), window)
        for k in range(1, window + 1):
            if _threshold_from_log_nu(k, alpha, delta, table.final(k)) > n:
                candidate = k
                break
        window *= 2
    k = candidate
    while k > 1 and _exact_threshold(kind, param, k - 1, alpha, delta) > n:
        k -= 1
    while not _exact_threshold(kind, param, k, alpha, delta) > n:
        k += 1
        if k > _SCAN_LIMIT:
            raise RuntimeError("growth prediction scan did not terminate")
    return k


def moment_bound(power_spec: Spectrum, k: int) -> LogValue:
    """log nu(k) over the spectrum of the power kernel.

    With the spectrum of the entrywise m-th power kernel this upper-bounds
    log E[(det G_k)^m]; m = 1 reduces to the base spectrum's log nu(k).
    """
    if not 0 <= k <= power_spec.size:
        raise ValueError(f"k={k} outside [0, {power_spec.size}]")
    return log_nu(power_spec, k)
