"""The DP table is checked against subset enumeration throughout: the
enumeration oracle is the ground truth for every frozen value here."""

import io
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from oks.logvalue import LOG_ZERO, is_log_zero, log_binomial
from oks.symfun import (
    Spectrum,
    decay_bound,
    esp_brute,
    esp_table,
    log_nu,
    nu_geometric,
    tail_sum,
)


def spectrum(*values, tail=0.0):
    return Spectrum(np.array(values, dtype=float), tail)


def close_log(a, b, tol=1e-12):
    if is_log_zero(a) or is_log_zero(b):
        return is_log_zero(a) and is_log_zero(b)
    return abs(a - b) <= tol * max(1.0, abs(a), abs(b))


# --- Spectrum ----------------------------------------------------------------

def test_spectrum_validation():
    with pytest.raises(ValueError):
        spectrum(1.0, 2.0)  # ascending
    with pytest.raises(ValueError):
        spectrum(1.0, -0.5)
    with pytest.raises(ValueError):
        spectrum(1.0, tail=-1.0)
    with pytest.raises(ValueError):
        Spectrum(np.array([np.inf]))
    assert spectrum().size == 0


def test_spectrum_csv_round_trip(tmp_path):
    for spec in (spectrum(3.0, 2.0, 1.0), spectrum(1.0, 0.5, tail=0.125)):
        path = str(tmp_path / "spec.csv")
        spec.to_csv(path)
        back = Spectrum.from_csv(path)
        assert np.array_equal(back.values, spec.values)
        assert back.declared_tail == spec.declared_tail


def test_spectrum_csv_header_line():
    buf = io.StringIO()
    spectrum(1.0, 0.5, tail=0.25).to_csv(buf)
    assert buf.getvalue().splitlines()[0] == "# tail=0.25"


# --- esp_table ---------------------------------------------------------------

def test_esp_table_example():
    # 2! * (3*2 + 3*1 + 2*1) = 22, by direct enumeration of the 2-subsets
    t = esp_table(spectrum(3.0, 2.0, 1.0), 2)
    assert t.value(3, 2) == pytest.approx(math.log(22.0), rel=1e-13)


def test_esp_table_k0_column():
    t = esp_table(spectrum(2.0, 1.0, 0.5), 3)
    for n in range(4):
        assert t.value(n, 0) == 0.0


def test_esp_table_k1_is_trace():
    s = spectrum(2.0, 1.0, 0.25)
    t = esp_table(s, 1)
    assert t.final(1) == pytest.approx(math.log(3.25), rel=1e-13)


def test_esp_table_zero_propagation():
    # r nonzero values: every (r+1)-subset contains a zero
    t = esp_table(spectrum(2.0, 1.0, 0.0, 0.0), 3)
    assert is_log_zero(t.final(3))
    assert not is_log_zero(t.final(2))


def test_esp_table_k_exceeds_length():
    with pytest.raises(ValueError):
        esp_table(spectrum(1.0), 2)


def test_esp_table_monotone_in_n():
    rng = np.random.default_rng(4)
    for _ in range(25):
        n = int(rng.integers(1, 10))
        vals = np.sort(rng.uniform(0, 3, n))[::-1]
        t = esp_table(Spectrum(vals), n)
        lv = t.log_values
        assert np.all(lv[1:] >= lv[:-1] - 1e-12)


# --- esp_brute ---------------------------------------------------------------

def test_esp_brute_examples():
    assert esp_brute(spectrum(3.0, 2.0, 1.0), 3) == pytest.approx(math.log(36.0), rel=1e-13)
    assert esp_brute(spectrum(1.0), 1) == pytest.approx(0.0, abs=1e-15)
    assert esp_brute(spectrum(0.5, 0.25), 2) == pytest.approx(math.log(0.25), rel=1e-13)


def test_esp_brute_size_cap():
    with pytest.raises(ValueError):
        esp_brute(Spectrum(np.linspace(23, 1, 23)), 2)


def test_esp_brute_permutation_invariance():
    rng = np.random.default_rng(8)
    vals = rng.uniform(0, 2, 6)
    ref = esp_brute(Spectrum(np.sort(vals)[::-1]), 3)
    for _ in range(5):
        rng.shuffle(vals)
        assert close_log(esp_brute(Spectrum(np.sort(vals)[::-1]), 3), ref)


@settings(max_examples=80, deadline=None)
@given(
    st.lists(st.floats(0, 10, allow_nan=False), min_size=1, max_size=10),
    st.integers(0, 10),
)
def test_dp_matches_enumeration(values, k):
    vals = np.sort(np.array(values))[::-1]
    k = min(k, len(vals))
    s = Spectrum(vals)
    assert close_log(esp_table(s, k).final(k), esp_brute(s, k))


@settings(max_examples=40, deadline=None)
@given(st.lists(st.floats(0.01, 5, allow_nan=False), min_size=2, max_size=10), st.floats(0.1, 10))
def test_scaling_shifts_log_by_k_log_c(values, c):
    vals = np.sort(np.array(values))[::-1]
    k = len(vals) // 2 + 1
    base = esp_table(Spectrum(vals), k).final(k)
    scaled = esp_table(Spectrum(vals * c), k).final(k)
    assert scaled == pytest.approx(base + k * math.log(c), rel=1e-10, abs=1e-10)


# --- Newton / Maclaurin ------------------------------------------------------

def test_newton_and_maclaurin_random_spectra():
    rng = np.random.default_rng(12)
    for _ in range(100):
        n = int(rng.integers(3, 12))
        vals = np.sort(rng.uniform(0.05, 3.0, n))[::-1]
        t = esp_table(Spectrum(vals), n)
        nus = [t.final(k) for k in range(n + 1)]
        for k in range(1, n):
            assert 2 * nus[k] >= nus[k - 1] + nus[k + 1] - 1e-10
            assert nus[k] / k >= nus[k + 1] / (k + 1) - 1e-10


# --- tail_sum / decay_bound --------------------------------------------------

def test_tail_sum_examples():
    assert tail_sum(spectrum(1.0, 0.5, 0.25), 0) == 1.75
    assert tail_sum(spectrum(1.0, 0.5, 0.25), 3) == 0.0
    assert tail_sum(spectrum(1.0, 0.5, tail=0.1), 1) == pytest.approx(0.6, rel=1e-15)
    with pytest.raises(ValueError):
        tail_sum(spectrum(1.0), 2)


def test_decay_bound_example():
    s = spectrum(1.0, 0.5, 0.25)
    t = esp_table(s, 2)
    bound = decay_bound(t.final(1), 1, 1, tail_sum(s, 1))
    # 1.75 * 0.75 * C(2,1) = 2.625, all three factors by direct evaluation
    assert bound == pytest.approx(math.log(2.625), rel=1e-13)
    assert t.final(2) <= bound  # true nu_2 = 1.75


def test_decay_bound_empty_tail():
    assert is_log_zero(decay_bound(math.log(2.0), 3, 1, 0.0))


def test_decay_bound_s_zero_is_identity():
    assert decay_bound(-1.234, 5, 0, 0.7) == -1.234
    assert decay_bound(-1.234, 5, 0, 0.0) == -1.234


def test_decay_bound_dominates_table():
    s = spectrum(2.0, 1.0, 0.5, 0.25, 0.125)
    t = esp_table(s, 5)
    for k in range(0, 4):
        for sdx in range(1, 5 - k + 1):
            b = decay_bound(t.final(k), k, sdx, tail_sum(s, k))
            assert t.final(k + sdx) <= b + 1e-12


# --- nu_geometric ------------------------------------------------------------

def test_nu_geometric_frozen_values():
    assert nu_geometric(2.0, 1) == pytest.approx(0.0, abs=1e-14)  # trace = 1
    assert nu_geometric(2.0, 2) == pytest.approx(math.log(2.0 / 3.0), rel=1e-13)
    assert nu_geometric(10.0, 1) == pytest.approx(math.log(1.0 / 9.0), rel=1e-13)
    with pytest.raises(ValueError):
        nu_geometric(1.0, 1)
    with pytest.raises(ValueError):
        nu_geometric(2.0, 0)


def test_nu_geometric_validated_against_truncated_table():
    # closed form vs the DP on a 60-term truncation of lam_i = sigma**-i
    for sigma in (2.0, 3.0):
        vals = np.power(sigma, -np.arange(1, 61, dtype=float))
        t = esp_table(Spectrum(vals), 12)
        for k in range(1, 13):
            assert nu_geometric(sigma, k) == pytest.approx(t.final(k), rel=1e-10, abs=1e-10)


def test_super_exponential_decay_geometric():
    # log nu_k - k log alpha eventually strictly decreases (sigma=2, alpha=0.5)
    vals = np.power(2.0, -np.arange(1, 81, dtype=float))
    t = esp_table(Spectrum(vals), 40)
    seq = np.array([t.final(k) - k * math.log(0.5) for k in range(1, 41)])
    diffs = np.diff(seq)
    decreasing = np.where(diffs < 0)[0]
    assert decreasing.size > 0
    k0 = int(decreasing[0])
    assert k0 <= 5
    assert np.all(diffs[k0:] < 0)


def test_log_nu_beyond_length_is_zero_state():
    assert is_log_zero(log_nu(spectrum(1.0, 0.5), 3))
