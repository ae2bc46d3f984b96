"""Mixing estimators, analytic envelopes, residue sums."""

import math

import numpy as np
import pytest

from amenpois import groups as G
from amenpois import mixing as M
from amenpois.errors import DomainError, EstimationError
from amenpois.simulators import SimulatorSpec

IID = SimulatorSpec(variant="iid_field", m=1, p=0.3)
MDEP = SimulatorSpec(variant="mdep_field", m=1, window_w=2, tau=0.55)
EXCH = SimulatorSpec(
    variant="exch_seq", mixture=((1.0, 0.5), (3.0, 0.5)), seq_len=60
)


class TestAnalyticEnvelope:
    def test_basic_powers(self):
        assert M.analytic_markov_psi(0.5, 3) == pytest.approx(0.125)
        assert M.analytic_markov_psi(0.7, 0) == 1.0
        assert M.analytic_markov_psi(0.9, 20) == pytest.approx(0.12157665459056931)

    def test_domain(self):
        with pytest.raises(DomainError):
            M.analytic_markov_psi(1.0, 2)
        with pytest.raises(DomainError):
            M.analytic_markov_psi(0.5, -1)


class TestResidueSum:
    def test_geometric_closed_form(self):
        shells = G.shell_table(G.grid_group(1), 45)
        res = M.residue_sum(shells, lambda i: 0.5**i, b=1, start_multiplier=1, cutoff=40)
        assert res.value == pytest.approx(2.0 - 2.0**-39, rel=1e-12)
        assert res.last_term == pytest.approx(2.0 * 0.5**40)

    def test_zero_coefficient(self):
        shells = G.shell_table(G.grid_group(2), 10)
        res = M.residue_sum(shells, lambda i: 0.0, b=2, start_multiplier=2, cutoff=9)
        assert res.value == 0.0

    def test_refined_mode_against_direct_loop(self):
        shells = G.shell_table(G.grid_group(2), 30)
        res = M.residue_sum(shells, lambda i: 0.9**i, b=2, start_multiplier=2, cutoff=25)
        direct = sum(
            ((2 * i + 3) ** 2 - (2 * i + 1) ** 2) * 0.9**i for i in range(4, 26)
        )
        assert res.value == pytest.approx(direct, rel=1e-12)
        assert res.start == 4

    def test_cutoff_beyond_table(self):
        shells = G.shell_table(G.grid_group(1), 10)
        with pytest.raises(DomainError):
            M.residue_sum(shells, lambda i: 1.0, b=1, start_multiplier=1, cutoff=10)

    def test_nonincreasing_in_b(self):
        shells = G.shell_table(G.grid_group(1), 40)
        vals = [
            M.residue_sum(shells, lambda i: 0.8**i, b, 1, 35).value for b in (1, 2, 4, 8)
        ]
        assert all(a >= b for a, b in zip(vals, vals[1:]))


class TestPlainEstimator:
    def test_iid_null(self):
        est = M.estimate_psi(IID, t=2, m_reps=6000, seed=11)
        assert est.value <= 4 * est.mc_stderr

    def test_one_dependent_null_beyond_range(self):
        est = M.estimate_psi(MDEP, t=3, m_reps=6000, seed=12)
        assert est.value <= 4 * est.mc_stderr

    def test_dictionary_monotonicity_shared_samples(self):
        small = M.EventDictionary(
            a_events=(M.AEvent("origin_one"),),
            b_events=(M.BEvent("window_sum", 0),),
            w_cap=3,
        )
        big = M.default_dictionary("plain")
        v_small = M.estimate_psi(IID, t=2, dct=small, m_reps=4000, seed=13).value
        v_big = M.estimate_psi(IID, t=2, dct=big, m_reps=4000, seed=13).value
        assert v_big >= v_small

    def test_estimation_error_when_every_a_event_empty(self):
        dead = SimulatorSpec(variant="iid_field", m=1, p=0.0)
        only_one = M.EventDictionary(
            a_events=(M.AEvent("origin_one"),),
            b_events=(M.BEvent("window_sum", 0),),
            w_cap=2,
        )
        with pytest.raises(EstimationError):
            M.estimate_psi(dead, t=2, dct=only_one, m_reps=500, seed=1)

    def test_separation_requires_positive(self):
        with pytest.raises(DomainError):
            M.estimate_psi(IID, t=0, m_reps=500, seed=1)


class TestRefinedEstimator:
    def test_iid_null(self):
        est = M.estimate_xi(IID, b=1, t=3, m_reps=6000, seed=14)
        assert est.value <= 4 * est.mc_stderr

    def test_one_dependent_null(self):
        est = M.estimate_xi(MDEP, b=1, t=3, m_reps=6000, seed=15)
        assert est.value <= 4 * est.mc_stderr

    def test_exchangeable_conditional_null(self):
        est = M.estimate_xi(EXCH, b=2, t=5, m_reps=4000, seed=16)
        assert est.value <= 4 * est.mc_stderr

    def test_separation_convention(self):
        with pytest.raises(DomainError):
            M.estimate_xi(IID, b=2, t=3, m_reps=500, seed=1)


def _ising_spec(beta: float):
    from amenpois.simulators import ising_external_field

    return SimulatorSpec(
        variant="ising_field", m=2, beta=beta, ext=ising_external_field(beta, 2, 0.05)
    )


class TestMarkovField:
    BETA = 0.15
    RHO = 4 * math.tanh(BETA)  # contraction constant for m = 2

    @pytest.fixture()
    def ising(self):
        return _ising_spec(self.BETA)

    def test_envelope_dominates_at_t2(self, ising):
        est = M.estimate_psi(ising, t=2, m_reps=3000, seed=17)
        assert est.value <= self.RHO**2 + 4 * est.mc_stderr

    def test_separation_monotone_within_noise(self, ising):
        e1 = M.estimate_psi(ising, t=1, m_reps=3000, seed=18)
        e3 = M.estimate_psi(ising, t=3, m_reps=3000, seed=18)
        combined = math.sqrt(e1.mc_stderr**2 + e3.mc_stderr**2)
        assert e3.value <= e1.value + 4 * combined

    def test_exchangeable_conditional_psi_null(self):
        est = M.estimate_psi(EXCH, t=4, m_reps=4000, seed=19, p_norm=math.inf)
        assert est.value <= 4 * est.mc_stderr


class TestEstimateShape:
    def test_fields_present(self):
        est = M.estimate_psi(IID, t=2, m_reps=2000, seed=20)
        assert est.n_samples == 2000
        assert est.n_pairs > 0
        assert est.best_pair is not None
        assert 0.0 <= est.value <= 1.0 + 3 * est.mc_stderr
