"""Compound-Poisson pmf/sampler, Stein solver, bound constants, TV metric."""

import math

import numpy as np
import pytest

from amenpois import compound_poisson as cp
from amenpois.errors import DomainError
from amenpois.rng import substream
from helpers import assert_pmf_close


def oracle_pmf(rates: dict, k_max: int, n_cap: int | None = None) -> np.ndarray:
    """Brute-force cluster-count representation: Poisson number of clusters,
    i.i.d. cluster sizes, law assembled by explicit convolution powers."""
    total = sum(rates.values())
    out = np.zeros(k_max + 1)
    if total == 0:
        out[0] = 1.0
        return out
    K = max(rates)
    cluster = np.zeros(K + 1)
    for k, v in rates.items():
        cluster[k] = v / total
    if n_cap is None:
        n_cap = max(30, int(math.ceil(3 * total)) + 25)
    cur = np.zeros(1)
    cur[0] = 1.0
    log_total = math.log(total)
    out[0] += math.exp(-total)
    for j in range(1, n_cap + 1):
        cur = np.convolve(cur, cluster)[: k_max + 1]
        weight = math.exp(-total + j * log_total - math.lgamma(j + 1))
        out[: cur.size] += weight * cur
    return out


def rate_family():
    """Every rate vector on {0, 0.5, 1}^4 (support <= 4, total <= 4) plus a
    few irrational ones."""
    fam = []
    levels = (0.0, 0.5, 1.0)
    for a in levels:
        for b in levels:
            for c in levels:
                for d in levels:
                    fam.append({1: a, 2: b, 3: c, 4: d})
    fam.append({1: math.pi / 4, 3: 0.3})
    fam.append({2: 1.2345, 4: 0.4567})
    fam.append({1: 0.01})
    return [{k: v for k, v in r.items() if v > 0} for r in fam]


class TestPmf:
    def test_pure_poisson(self):
        lam = cp.ParamVector.from_dict({1: 0.7})
        dist = cp.cp_pmf(lam, 25)
        ref = cp.poisson_dist(0.7, 25)
        assert np.allclose(dist.pmf, ref.pmf, atol=1e-12)
        assert dist.pmf[0] == pytest.approx(math.exp(-0.7), abs=1e-15)

    def test_parity_support(self):
        dist = cp.cp_pmf(cp.ParamVector.from_dict({2: 0.5}), 10)
        assert dist.pmf[1] == 0.0
        assert dist.pmf[3] == 0.0
        assert dist.pmf[2] > 0

    def test_mixed_rates_frozen_values(self):
        # oracle-computed: pmf(w) = c_w * exp(-0.75) with c_0..c_3 below
        lam = cp.ParamVector.from_dict({1: 0.5, 2: 0.25})
        dist = cp.cp_pmf(lam, 20)
        base = math.exp(-0.75)
        assert dist.pmf[0] == pytest.approx(base, abs=1e-14)
        assert dist.pmf[1] == pytest.approx(0.5 * base, abs=1e-14)
        assert dist.pmf[2] == pytest.approx(0.375 * base, abs=1e-14)
        assert dist.pmf[3] == pytest.approx((0.5 * 0.375 + 0.5 * 0.5) / 3 * base + 0, abs=1e-13)
        oracle = oracle_pmf({1: 0.5, 2: 0.25}, 20)
        assert np.max(np.abs(dist.pmf - oracle)) < 1e-12

    def test_oracle_equivalence_family(self):
        for rates in rate_family():
            if not rates:
                continue
            lam = cp.ParamVector.from_dict(rates)
            dist = cp.cp_pmf(lam, 40)
            oracle = oracle_pmf(rates, 40)
            assert np.max(np.abs(dist.pmf - oracle)) < 1e-12, rates

    def test_negative_rate_rejected(self):
        with pytest.raises(DomainError):
            cp.ParamVector.from_dict({1: -0.1})

    def test_mass_and_total(self):
        lam = cp.ParamVector.from_dict({1: 0.5, 2: 0.25})
        assert lam.total == pytest.approx(0.75)
        assert lam.mass == pytest.approx(1.0)
        assert lam.k_support == 2


class TestSampler:
    def test_zero_rates(self):
        lam = cp.ParamVector.from_dict({})
        rng = substream(0, 7, 0)
        assert cp.cp_sample(lam, rng) == 0
        assert np.all(cp.cp_sample_batch(lam, 100, rng) == 0)

    def test_poisson_mean(self):
        lam = cp.ParamVector.from_dict({1: 2.0})
        rng = substream(1, 7, 0)
        draws = cp.cp_sample_batch(lam, 100_000, rng)
        assert abs(draws.mean() - 2.0) < 0.02

    def test_wald_identity(self):
        lam = cp.ParamVector.from_dict({1: 0.5, 2: 0.25})
        rng = substream(2, 7, 0)
        draws = cp.cp_sample_batch(lam, 100_000, rng)
        se = draws.std() / math.sqrt(draws.size)
        assert abs(draws.mean() - 1.0) < 4 * se

    def test_empirical_matches_pmf(self):
        lam = cp.ParamVector.from_dict({1: 0.6, 2: 0.3, 3: 0.1})
        rng = substream(3, 7, 0)
        draws = cp.cp_sample_batch(lam, 1_000_000, rng)
        emp = cp.histogram_dist(draws)
        ref = cp.cp_pmf(lam, emp.k_max)
        assert_pmf_close(emp.pmf, ref.pmf, draws.size, label="sampler vs pmf")


class TestSteinSolver:
    def test_constant_h_gives_zero(self):
        lam = cp.ParamVector.from_dict({1: 0.5, 2: 0.25})
        sol = cp.stein_solve(lam, None)
        assert np.all(sol.values == 0.0)

    def test_poisson_first_value(self):
        lam = cp.ParamVector.from_dict({1: 1.0})
        sol = cp.stein_solve(lam, {0})
        assert sol.values[1] == pytest.approx(math.exp(-1) - 1, abs=1e-12)
        assert sol.values[0] == sol.values[1]
        assert sol.max_abs_residual < 1e-10

    def test_residuals_small(self):
        lam = cp.ParamVector.from_dict({1: 0.5, 2: 0.25})
        sol = cp.stein_solve(lam, {0, 1})
        assert sol.max_abs_residual < 1e-10

    def test_w_max_too_small(self):
        lam = cp.ParamVector.from_dict({1: 0.5, 4: 0.2})
        with pytest.raises(DomainError):
            cp.stein_solve(lam, {0}, w_max=6)

    def test_stein_identity_under_solution(self):
        # taking expectations of the defining equation at the law of Z gives 0
        lam = cp.ParamVector.from_dict({1: 0.8, 2: 0.3, 3: 0.1})
        dist = cp.cp_pmf_to_tail(lam, 1e-10)
        ks = [k for k, v in lam.rates]
        for h_set in ({0}, {1, 4}, {2, 3, 7}):
            sol = cp.stein_solve(lam, h_set)
            f = np.zeros(max(dist.k_max + max(ks) + 2, sol.values.size))
            f[: sol.values.size] = sol.values
            w = np.arange(dist.k_max + 1)
            lhs = float((dist.pmf * w * f[: dist.k_max + 1]).sum())
            rhs = sum(k * lam.rate(k) * float((dist.pmf * f[k : dist.k_max + 1 + k]).sum()) for k in ks)
            assert abs(lhs - rhs) < 1e-8

    def test_bound_domination_random_family(self):
        rng = np.random.default_rng(42)
        for trial in range(200):
            k_sup = int(rng.integers(1, 5))
            raw = rng.uniform(0.05, 1.2, size=k_sup)
            total_target = rng.uniform(0.2, 4.0)
            raw *= total_target / raw.sum()
            if rng.random() < 0.15 and k_sup > 1:
                raw[0] = 0.0  # exercise the lambda(1) = 0 branch
            rates = {k + 1: float(v) for k, v in enumerate(raw) if v > 0}
            if not rates:
                continue
            lam = cp.ParamVector.from_dict(rates)
            h_set = {int(w) for w in np.flatnonzero(rng.random(26) < 0.3)}
            sol = cp.stein_solve(lam, h_set)
            h0, h1 = cp.h_bounds_analytic(lam)
            assert sol.max_abs_residual < 1e-10, (trial, rates)
            assert sol.sup_abs() <= h0 + 1e-9, (trial, rates)
            assert sol.sup_abs_delta() <= h1 + 1e-9, (trial, rates)


class TestHBounds:
    def test_unit_poisson(self):
        h0, h1 = cp.h_bounds_analytic(cp.ParamVector.from_dict({1: 1.0}))
        assert h0 == pytest.approx(math.e)
        assert h1 <= math.e + 1e-15

    def test_difference_refinement(self):
        h0, h1 = cp.h_bounds_analytic(cp.ParamVector.from_dict({1: 2.0, 2: 0.5}))
        assert h0 == pytest.approx(0.5 * math.exp(2.5))
        assert h1 == pytest.approx(min(0.25 + math.log(2.0), 1.0))

    def test_zero_rates(self):
        h0, h1 = cp.h_bounds_analytic(cp.ParamVector.from_dict({}))
        assert h0 == 1.0 and h1 == 1.0

    def test_zero_lambda1_finite(self):
        h0, h1 = cp.h_bounds_analytic(cp.ParamVector.from_dict({2: 0.5}))
        assert h0 == pytest.approx(math.exp(0.5))
        assert math.isfinite(h1)


class TestTotalVariation:
    def test_identical(self):
        d = cp.poisson_dist(1.5, 15)
        assert cp.tv_distance(d, d) == 0.0

    def test_disjoint_point_masses(self):
        assert cp.tv_distance(cp.point_mass(0, 3), cp.point_mass(1, 3)) == 1.0

    def test_bernoulli_vs_point(self):
        bern = cp.DiscreteDist(pmf=np.array([0.5, 0.5]))
        assert cp.tv_distance(bern, cp.point_mass(0, 1)) == pytest.approx(0.5)

    def test_metric_axioms_random(self):
        rng = np.random.default_rng(9)
        for _ in range(50):
            raw = rng.random((3, 8))
            dists = [cp.DiscreteDist(pmf=row / row.sum()) for row in raw]
            p, q, r = dists
            assert cp.tv_distance(p, q) == pytest.approx(cp.tv_distance(q, p))
            assert cp.tv_distance(p, r) <= cp.tv_distance(p, q) + cp.tv_distance(q, r) + 1e-12
            assert 0.0 <= cp.tv_distance(p, q) <= 1.0

    def test_unnormalized_rejected(self):
        with pytest.raises(DomainError):
            cp.DiscreteDist(pmf=np.array([0.5, 0.2]))

    def test_binomial_dist_exact(self):
        d = cp.binomial_dist(4, 0.5)
        assert np.allclose(d.pmf, [1, 4, 6, 4, 1] / np.float64(16))
