"""Shared statistical assertion helpers for the test suite."""

import math

import numpy as np


def assert_pmf_close(emp_pmf, ref_pmf, m, min_expected=10.0, sigmas=4.0, label=""):
    """Per-bin comparison of an empirical pmf against a reference.

    Bins whose expected count is below `min_expected` are lumped into one
    tail event (the normal approximation is invalid there); the lump gets a
    +3/m count slack on top of its own binomial band.
    """
    size = max(len(emp_pmf), len(ref_pmf))
    emp = np.zeros(size)
    ref = np.zeros(size)
    emp[: len(emp_pmf)] = emp_pmf
    ref[: len(ref_pmf)] = ref_pmf
    lump_emp = 0.0
    lump_ref = 0.0
    for w in range(size):
        if ref[w] * m >= min_expected:
            se = math.sqrt(ref[w] * (1 - ref[w]) / m)
            assert abs(emp[w] - ref[w]) <= sigmas * se + 1e-12, (
                f"{label} bin {w}: emp={emp[w]:.6g} ref={ref[w]:.6g} se={se:.3g}"
            )
        else:
            lump_emp += emp[w]
            lump_ref += ref[w]
    se = math.sqrt(max(lump_ref * (1 - lump_ref), 0.0) / m)
    assert abs(lump_emp - lump_ref) <= sigmas * se + 3.0 / m, (
        f"{label} lumped tail: emp={lump_emp:.6g} ref={lump_ref:.6g}"
    )
