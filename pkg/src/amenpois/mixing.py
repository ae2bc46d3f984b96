"""Empirical dependence coefficients and analytic mixing inputs.

The empirical estimators bound from below the supremum-type coefficients

    sup |P(B | A) - P(B)|

over finite dictionaries of origin events A and far-window events B at a
given separation.  They are diagnostics; convergence experiments feed the
bound engine analytic inputs (zero for independent/m-dependent structures,
a geometric envelope for Markov fields in the contraction regime).

The reported ``mc_stderr`` is selection aware: the estimate is a maximum
over the dictionary, so the argmax pair's binomial standard error is
inflated by sqrt(1 + 2 ln(#pairs)), the scale of a maximum of that many
centred comparisons.  Plain per-pair errors would understate the spread of
the maximum under independence.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from amenpois.errors import DomainError, EstimationError
from amenpois.groups import ShellTable
from amenpois.rng import PHASE_MIXING, substream
from amenpois.simulators import SimulatorSpec, batch_grid_values, with_params


@dataclass(frozen=True)
class AEvent:
    """Origin event: measurable from the origin value (and the ball-b sum
    for the refined coefficient)."""

    kind: str  # "origin_one" | "origin_zero" | "origin_one_ballsum"
    k: int | None = None

    def label(self) -> str:
        if self.kind == "origin_one_ballsum":
            return f"value=1,ballsum={self.k}"
        return {"origin_one": "value=1", "origin_zero": "value=0"}[self.kind]


@dataclass(frozen=True)
class BEvent:
    """Far-window event over a ball of radius w_cap at the given separation."""

    kind: str  # "far_center_one" | "window_sum"
    j: int | None = None

    def label(self) -> str:
        if self.kind == "window_sum":
            return f"window_sum={self.j}"
        return "far_value=1"


@dataclass(frozen=True)
class EventDictionary:
    a_events: tuple[AEvent, ...]
    b_events: tuple[BEvent, ...]
    w_cap: int = 3

    @property
    def n_pairs(self) -> int:
        return len(self.a_events) * len(self.b_events)


def default_dictionary(mode: str, k_cap: int = 6, w_cap: int = 3) -> EventDictionary:
    """Standard templates; `mode` "plain" uses origin-value events only,
    "refined" adds the origin (value, ball-sum) events."""
    a = [AEvent("origin_one"), AEvent("origin_zero")]
    if mode == "refined":
        a += [AEvent("origin_one_ballsum", k) for k in range(1, k_cap + 1)]
    elif mode != "plain":
        raise DomainError("mode must be 'plain' or 'refined'")
    b = [BEvent("far_center_one")] + [BEvent("window_sum", j) for j in range(0, k_cap + 1)]
    return EventDictionary(a_events=tuple(a), b_events=tuple(b), w_cap=w_cap)


@dataclass
class MixingEstimate:
    t: int
    value: float
    mc_stderr: float
    n_samples: int
    best_pair: tuple[str, str] | None = None
    n_pairs: int = 0


# ---------------------------------------------------------------------------
# Sampling origin / far-window statistics
# ---------------------------------------------------------------------------


def _grid_mixing_stats(
    spec: SimulatorSpec, t: int, b: int, w_cap: int, m_reps: int, rng
) -> dict:
    """Per-replicate origin value, origin ball-b sum, far-window centre value
    and far-window sum, with the far window at distance exactly t."""
    m = spec.m
    R = t + 2 * w_cap + max(b, 4)
    vals = batch_grid_values(spec, R, m_reps, rng)
    wrap = spec.variant == "ising_field"
    center = R
    far = R + t + w_cap  # centre of the far ball; nearest point is at distance t

    def box_sum(centre_idx, half):
        lo = [c - half for c in centre_idx]
        hi = [c + half + 1 for c in centre_idx]
        if wrap:
            idx_axes = [np.arange(l, h) % vals.shape[ax + 1] for ax, (l, h) in enumerate(zip(lo, hi))]
        else:
            idx_axes = [np.arange(l, h) for l, h in zip(lo, hi)]
        block = vals
        for ax, idx in enumerate(idx_axes):
            block = np.take(block, idx, axis=ax + 1)
        return block.reshape(m_reps, -1).sum(axis=1)

    origin_idx = (center,) * m
    far_idx = (far,) + (center,) * (m - 1)
    f_e = vals[(slice(None),) + origin_idx].astype(np.int64)
    ball_sum = box_sum(origin_idx, b) if b > 0 else f_e.copy()
    far_center = vals[(slice(None),) + far_idx].astype(np.int64)
    far_sum = box_sum(far_idx, w_cap)
    return {"f_e": f_e, "ball_sum": ball_sum, "far_center": far_center, "far_sum": far_sum}


def _exch_mixing_stats(
    spec: SimulatorSpec, theta: float, t: int, b: int, w_cap: int, m_reps: int, rng
) -> dict:
    """Sequence specialization: origin index 1, far block beyond separation t."""
    n = spec.seq_len
    need = t + 2 * w_cap + 2
    if need > n:
        raise DomainError(f"sequence length {n} too short for separation {t}")
    prob = min(max(theta / n, 0.0), 1.0)
    vals = (rng.random((m_reps, need)) < prob).astype(np.int64)
    f_e = vals[:, 0]
    ball_sum = vals[:, : b + 1].sum(axis=1) if b > 0 else f_e.copy()
    far = vals[:, t : t + 2 * w_cap + 1]
    return {
        "f_e": f_e,
        "ball_sum": ball_sum,
        "far_center": far[:, w_cap],
        "far_sum": far.sum(axis=1),
    }


def _event_masks(stats: dict, dct: EventDictionary):
    a_masks = []
    for a in dct.a_events:
        if a.kind == "origin_one":
            mask = stats["f_e"] == 1
        elif a.kind == "origin_zero":
            mask = stats["f_e"] == 0
        else:
            mask = (stats["f_e"] == 1) & (stats["ball_sum"] == a.k)
        a_masks.append((a.label(), mask))
    b_masks = []
    for bev in dct.b_events:
        if bev.kind == "far_center_one":
            mask = stats["far_center"] == 1
        else:
            mask = stats["far_sum"] == bev.j
        b_masks.append((bev.label(), mask))
    return a_masks, b_masks


def _bern_var(p: float, n: int) -> float:
    # Laplace-smoothed variance floor keeps the stderr positive at p in {0,1}
    ps = (p * n + 1.0) / (n + 2.0)
    return max(p * (1.0 - p), ps * (1.0 - ps)) / n


def _max_conditional_gap(stats: dict, dct: EventDictionary, t: int) -> MixingEstimate:
    a_masks, b_masks = _event_masks(stats, dct)
    m = stats["f_e"].size
    best = None
    evaluated = 0
    usable_a = 0
    for a_label, a_mask in a_masks:
        n_a = int(a_mask.sum())
        if n_a == 0:
            continue
        usable_a += 1
        n_ac = m - n_a
        p_a = n_a / m
        for b_label, b_mask in b_masks:
            evaluated += 1
            pb_a = float(b_mask[a_mask].mean())
            pb = float(b_mask.mean())
            diff = abs(pb_a - pb)
            if n_ac == 0:
                var = _bern_var(pb, m)
            else:
                pb_ac = float(b_mask[~a_mask].mean())
                var = (1.0 - p_a) ** 2 * (_bern_var(pb_a, n_a) + _bern_var(pb_ac, n_ac))
            se = math.sqrt(var)
            if best is None or diff > best[0]:
                best = (diff, se, (a_label, b_label))
    if usable_a == 0:
        raise EstimationError("every origin event was empty; conditionals undefined")
    diff, se, pair = best
    inflation = math.sqrt(1.0 + 2.0 * math.log(max(evaluated, 2)))
    return MixingEstimate(
        t=t,
        value=diff,
        mc_stderr=se * inflation,
        n_samples=m,
        best_pair=pair,
        n_pairs=evaluated,
    )


def _combine_latent(estimates, weights, p_norm, t, m_total) -> MixingEstimate:
    values = np.array([e.value for e in estimates])
    errs = np.array([e.mc_stderr for e in estimates])
    w = np.asarray(weights, dtype=float)
    w = w / w.sum()
    if p_norm == math.inf:
        i = int(np.argmax(values))
        return MixingEstimate(t=t, value=float(values[i]), mc_stderr=float(errs[i]), n_samples=m_total)
    value = float((w @ values**p_norm) ** (1.0 / p_norm))
    err = float((w @ errs**p_norm) ** (1.0 / p_norm))
    return MixingEstimate(t=t, value=value, mc_stderr=err, n_samples=m_total)


def _estimate(spec, t, b, dct, m_reps, seed, p_norm):
    if t < 1:
        raise DomainError("separation t must be >= 1")
    if m_reps < 2:
        raise DomainError("m_reps must be >= 2")
    if spec.variant in ("iid_field", "mdep_field", "ising_field"):
        rng = seed if isinstance(seed, np.random.Generator) else substream(int(seed), PHASE_MIXING, 0)
        stats = _grid_mixing_stats(spec, t, b, dct.w_cap, m_reps, rng)
        return _max_conditional_gap(stats, dct, t)
    if spec.variant == "exch_seq":
        # conditional coefficients: estimate per latent atom, then combine in L_p
        atoms = spec.mixture
        per_atom = []
        for i, (theta, _w) in enumerate(atoms):
            rng = substream(int(seed), PHASE_MIXING, i + 1)
            stats = _exch_mixing_stats(spec, theta, t, b, dct.w_cap, m_reps, rng)
            per_atom.append(_max_conditional_gap(stats, dct, t))
        weights = [w for _, w in atoms]
        return _combine_latent(per_atom, weights, p_norm, t, m_reps * len(atoms))
    raise DomainError(f"mixing estimation is not defined for variant {spec.variant!r}")


def estimate_psi(
    spec: SimulatorSpec,
    t: int,
    dct: EventDictionary | None = None,
    m_reps: int = 10_000,
    seed=0,
    p_norm: float = 1.0,
) -> MixingEstimate:
    """Largest conditional-probability gap between origin-value events and
    far-window events at separation t (a lower bound of the supremum form).

    Ergodic simulators are estimated directly; the exchangeable mixture is
    handled by conditioning on its latent atom and combining atom estimates
    with an empirical L_p norm (p_norm = inf takes the maximum).
    """
    spec = spec.checked()
    if spec.variant == "exch_seq" and spec.mixture is None:
        raise DomainError("non-ergodic input without an exposed latent is rejected")
    dct = dct or default_dictionary("plain")
    return _estimate(spec, t, 0, dct, m_reps, seed, p_norm)


def estimate_xi(
    spec: SimulatorSpec,
    b: int,
    t: int,
    dct: EventDictionary | None = None,
    m_reps: int = 10_000,
    seed=0,
    p_norm: float = 1.0,
) -> MixingEstimate:
    """Refined coefficient: origin events may also read the ball-b sum.
    Requires t >= 2b, matching the residue convention for this coefficient."""
    spec = spec.checked()
    if b < 1:
        raise DomainError("ball radius b must be >= 1")
    if t < 2 * b:
        raise DomainError(f"separation t={t} must be at least 2b={2 * b}")
    dct = dct or default_dictionary("refined")
    return _estimate(spec, t, b, dct, m_reps, seed, p_norm)


def analytic_markov_psi(rho: float, t: int) -> float:
    """Geometric envelope rho^t for contraction-regime Markov fields."""
    if not 0.0 < rho < 1.0:
        raise DomainError("rho must lie in (0, 1)")
    if t < 0:
        raise DomainError("t must be >= 0")
    return rho**t


# ---------------------------------------------------------------------------
# Residue sums
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class ResidueSum:
    value: float
    last_term: float
    start: int
    cutoff: int


def residue_sum(
    shells: ShellTable,
    coeff,
    b: int,
    start_multiplier: int,
    cutoff: int,
) -> ResidueSum:
    """Truncated weighted tail sum_{i >= start_multiplier*b} shell(i) * coeff(i).

    `start_multiplier` is 1 for the plain coefficient and 2 for the refined
    one.  The last term is reported as a truncation-quality indicator.
    """
    if start_multiplier not in (1, 2):
        raise DomainError("start_multiplier must be 1 or 2")
    if b < 0:
        raise DomainError("b must be >= 0")
    start = start_multiplier * b
    if cutoff < start:
        raise DomainError("cutoff must be >= the start index")
    if cutoff > shells.r_max - 1:
        raise DomainError(
            f"cutoff {cutoff} exceeds the shell table (shells up to {shells.r_max - 1})"
        )
    total = 0.0
    last = 0.0
    for i in range(start, cutoff + 1):
        last = shells.shell(i) * float(coeff(i))
        total += last
    return ResidueSum(value=total, last_term=last, start=start, cutoff=cutoff)
