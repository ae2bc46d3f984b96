"""Window sums, cluster-rate estimators, and explicit total-variation bounds.

This module hosts the quantitative core: Monte-Carlo estimates of the
cluster rates lambda(k) that parametrize the approximating compound
Poisson law, the moment/boundary/residue terms entering the deterministic
window bound, the randomized (subsampled) pipeline with its noise scale and
decorrelation radius, and the assembled bound reports.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field as dc_field

import numpy as np

from amenpois import groups, simulators
from amenpois.compound_poisson import (
    DiscreteDist,
    ParamVector,
    cp_pmf,
    counts_dist,
    empirical_tv,
    h_bounds_analytic,
    poisson_dist,
)
from amenpois.errors import DomainError, ResourceBudgetError
from amenpois.groups import FolnerWindow, MetricGroup, ShellTable
from amenpois.mixing import residue_sum
from amenpois.rng import PHASE_RANDOMIZED, PHASE_WINDOW, batch_sizes, substream
from amenpois.simulators import (
    SimulatorSpec,
    batch_exch_values,
    batch_grid_values,
    cayley_layout,
    eval_f,
    induced_subgraph_edges,
)

# ---------------------------------------------------------------------------
# Elementary sums
# ---------------------------------------------------------------------------


def w_sum(sample: simulators.FieldSample, window) -> int:
    """Exact count of window elements whose statistic evaluates to 1.

    `window` may be a FolnerWindow, an iterable of group elements, or an
    integer n (sequence windows: indices 1..n).
    """
    if isinstance(window, FolnerWindow):
        elems = window.elements
    elif isinstance(window, int):
        elems = range(1, window + 1)
    else:
        elems = window
    return sum(eval_f(sample, phi) for phi in elems)


# ---------------------------------------------------------------------------
# Cluster-rate estimates
# ---------------------------------------------------------------------------


@dataclass
class LambdaEstimate:
    """Monte-Carlo estimate of the cluster rates lambda(k), k = 1..k_max."""

    rates: np.ndarray  # index k, [0] unused
    stderr: np.ndarray
    b: int
    n: int
    window_size: int
    m_reps: int
    qhat: float = 0.0  # mean site rate estimate
    qhat_stderr: float = 0.0
    display: np.ndarray | None = None  # randomized route: k * rates[k]

    def param_vector(self) -> ParamVector:
        return ParamVector.from_array(self.rates)

    @property
    def mass(self) -> float:
        return float(sum(k * self.rates[k] for k in range(1, len(self.rates))))


def _box1d(a: np.ndarray, width: int, ax: int) -> np.ndarray:
    """Sliding-window sums of length `width` along `ax` (output shorter)."""
    c = np.cumsum(a, axis=ax, dtype=np.int64)
    zshape = list(c.shape)
    zshape[ax] = 1
    cz = np.concatenate([np.zeros(zshape, dtype=np.int64), c], axis=ax)
    upper = np.take(cz, np.arange(width, cz.shape[ax]), axis=ax)
    lower = np.take(cz, np.arange(0, cz.shape[ax] - width), axis=ax)
    return upper - lower


def _grid_window_batch(spec: SimulatorSpec, n: int, b: int, k_cap: int, size: int, rng) -> dict:
    """Shared-sample statistics for one batch of grid-field windows.

    Returns the window-sum histogram, per-k sums and squared sums of the
    spatially averaged cluster statistic, origin-only counts, and the count
    of ones, all as plain arrays so partials combine exactly.
    """
    m_dim = spec.m
    width = 2 * b + 1
    vals = batch_grid_values(spec, n + b, size, rng)
    wrap = spec.variant == "ising_field"
    axes = tuple(range(1, m_dim + 1))
    if wrap:
        pad = [(0, 0)] + [(b, b)] * m_dim
        arr = np.pad(vals, pad, mode="wrap")
        box = arr.astype(np.int64)
        for ax in axes:
            box = _box1d(box, width, ax)
        win_slice = (slice(None),) + (slice(0, 2 * n + 1),) * m_dim
        box = box[win_slice]
        win = vals[win_slice]
    else:
        box = vals.astype(np.int64)
        for ax in axes:
            box = _box1d(box, width, ax)
        win_slice = (slice(None),) + (slice(b, b + 2 * n + 1),) * m_dim
        win = vals[win_slice]

    flat_win = win.reshape(size, -1)
    flat_box = box.reshape(size, -1)
    w_vals = flat_win.sum(axis=1)
    w_counts = np.bincount(w_vals)

    ones = flat_win.astype(bool)
    t_sum = np.zeros(k_cap + 1)
    t_sumsq = np.zeros(k_cap + 1)
    for k in range(1, k_cap + 1):
        t_k = ((flat_box == k) & ones).sum(axis=1)
        t_sum[k] = t_k.sum()
        t_sumsq[k] = (t_k.astype(np.float64) ** 2).sum()

    center = flat_win.shape[1] // 2
    o_val = flat_win[:, center]
    o_box = flat_box[:, center]
    o_counts = np.zeros(k_cap + 1, dtype=np.int64)
    for k in range(1, k_cap + 1):
        o_counts[k] = int(((o_box == k) & (o_val == 1)).sum())

    return {
        "w_counts": w_counts,
        "t_sum": t_sum,
        "t_sumsq": t_sumsq,
        "o_counts": o_counts,
        "ones": int(flat_win.sum()),
        "ones_sq": float((w_vals.astype(np.float64) ** 2).sum()),
        "m": size,
    }


def _merge_hist(acc: np.ndarray | None, inc: np.ndarray) -> np.ndarray:
    if acc is None:
        return inc.astype(np.int64)
    if inc.size > acc.size:
        acc = np.pad(acc, (0, inc.size - acc.size))
    acc[: inc.size] += inc
    return acc


@dataclass
class WindowStats:
    """Shared-sample summary of one (scenario, n) cell."""

    n: int
    window_size: int
    b: int
    m_reps: int
    w_counts: np.ndarray
    lambda_est: LambdaEstimate
    lambda_origin: LambdaEstimate
    qhat: float
    qhat_stderr: float

    def w_dist(self) -> DiscreteDist:
        return counts_dist(self.w_counts, self.m_reps)


def grid_window_worker(args):
    """Top-level batch worker (picklable for process pools)."""
    spec, n, b, k_cap, seed, phase, batch_index, size = args
    rng = substream(seed, phase, batch_index)
    return batch_index, _grid_window_batch(spec, n, b, k_cap, size, rng)


def window_stats(
    spec: SimulatorSpec,
    n: int,
    b: int,
    k_max: int,
    m_reps: int,
    seed: int,
    batch_size: int = 20_000,
    map_fn=map,
    phase: int = PHASE_WINDOW,
) -> WindowStats:
    """Estimate the window-sum law and the cluster rates from shared samples."""
    spec = spec.checked()
    if spec.variant not in ("iid_field", "mdep_field", "ising_field"):
        raise DomainError("window_stats covers grid fields; see the exchangeable helpers")
    if b < 1:
        raise DomainError("ball radius b must be >= 1")
    window_size = (2 * n + 1) ** spec.m
    ball_size = (2 * b + 1) ** spec.m
    k_cap = min(k_max, ball_size)

    tasks = [
        (spec, n, b, k_cap, seed, phase, i, size)
        for i, size in enumerate(batch_sizes(m_reps, batch_size))
    ]
    partials = sorted(map_fn(grid_window_worker, tasks), key=lambda kv: kv[0])

    w_counts = None
    t_sum = np.zeros(k_cap + 1)
    t_sumsq = np.zeros(k_cap + 1)
    o_counts = np.zeros(k_cap + 1, dtype=np.int64)
    ones = 0
    total = 0
    for _, part in partials:
        w_counts = _merge_hist(w_counts, part["w_counts"])
        t_sum += part["t_sum"]
        t_sumsq += part["t_sumsq"]
        o_counts += part["o_counts"]
        ones += part["ones"]
        total += part["m"]

    rates = np.zeros(k_max + 1)
    errs = np.zeros(k_max + 1)
    o_rates = np.zeros(k_max + 1)
    o_errs = np.zeros(k_max + 1)
    for k in range(1, k_cap + 1):
        mean = t_sum[k] / total
        var = max(t_sumsq[k] / total - mean**2, 0.0)
        rates[k] = mean / k
        errs[k] = math.sqrt(var / total) / k
        p_o = o_counts[k] / total
        o_rates[k] = window_size * p_o / k
        o_errs[k] = window_size * math.sqrt(max(p_o * (1 - p_o), 1.0 / total) / total) / k

    qhat = ones / (total * window_size)
    q_se = math.sqrt(max(qhat * (1 - qhat), 1.0 / total) / (total * window_size))
    common = dict(b=b, n=n, window_size=window_size, m_reps=total, qhat=qhat, qhat_stderr=q_se)
    lam = LambdaEstimate(rates=rates, stderr=errs, **common)
    lam_o = LambdaEstimate(rates=o_rates, stderr=o_errs, **common)
    return WindowStats(
        n=n,
        window_size=window_size,
        b=b,
        m_reps=total,
        w_counts=w_counts,
        lambda_est=lam,
        lambda_origin=lam_o,
        qhat=qhat,
        qhat_stderr=q_se,
    )


def lambda_hat_ergodic(
    spec: SimulatorSpec,
    n: int,
    b: int,
    k_max: int,
    m_reps: int,
    seed: int,
    origin_only: bool = False,
    batch_size: int = 20_000,
    map_fn=map,
) -> LambdaEstimate:
    """Cluster rates for an ergodic simulator.

    The default averages the per-position empirical frequencies over the
    whole window (identical in expectation to the origin form by
    invariance, with a much smaller standard error); origin_only=True keeps
    the single-position shortcut |A_n|/k * P(origin value 1, ball sum k).
    """
    if not spec.is_ergodic:
        raise DomainError("simulator is not ergodic; condition on the latent instead")
    stats = window_stats(spec, n, b, k_max, m_reps, seed, batch_size=batch_size, map_fn=map_fn)
    return stats.lambda_origin if origin_only else stats.lambda_est


@dataclass
class ExchangeableRates:
    """Per-atom limiting Poisson rates with empirical convergence diagnostics."""

    atoms: list  # (theta, weight, n_phat, n_phat_stderr)
    n: int
    m_reps: int

    def rate_for(self, theta: float) -> float:
        return float(theta)

    @property
    def mean_rate(self) -> float:
        return float(sum(t * w for t, w, _, _ in self.atoms))


def lambda_hat_exchangeable(spec: SimulatorSpec, n: int, m_reps: int, seed: int) -> ExchangeableRates:
    """Conditional limit rates for the exchangeable mixture: each latent atom
    theta is its own Poisson rate; n*P(entry=1 | atom) is reported alongside."""
    spec = spec.checked()
    if spec.variant != "exch_seq":
        raise DomainError("lambda_hat_exchangeable requires an exch_seq spec")
    spec = simulators.with_params(spec, seq_len=n)
    rng = substream(int(seed), PHASE_WINDOW, 0)
    vals, theta = batch_exch_values(spec, m_reps, rng)
    out = []
    for t_atom, w_atom in spec.mixture:
        mask = theta == t_atom
        if mask.sum() == 0:
            out.append((t_atom, w_atom, float("nan"), float("nan")))
            continue
        sub = vals[mask]
        phat = float(sub.mean())
        se = math.sqrt(max(phat * (1 - phat), 1.0 / sub.size) / sub.size)
        out.append((t_atom, w_atom, n * phat, n * se))
    return ExchangeableRates(atoms=out, n=n, m_reps=m_reps)


# ---------------------------------------------------------------------------
# Moment terms and the deterministic-window bound
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class MomentTerms:
    """Aggregate moment, variation, and interaction terms (ergodic forms)."""

    mu: float
    eta: float
    gamma: float
    p: float
    ergodic: bool = True

    def __post_init__(self):
        if min(self.mu, self.eta, self.gamma) < 0:
            raise DomainError("moment terms must be nonnegative")


def moment_terms_ergodic(q_origin: float, window_size: int, p: float) -> MomentTerms:
    """mu = |A_n| q, eta = q, gamma = (|A_n| q)^2 for a constant site rate q."""
    if not 0.0 <= q_origin <= 1.0:
        raise DomainError(f"site rate must lie in [0, 1], got {q_origin}")
    if p < 1.0:
        raise DomainError("the moment index p must be >= 1")
    return MomentTerms(
        mu=window_size * q_origin,
        eta=q_origin,
        gamma=(window_size * q_origin) ** 2,
        p=p,
    )


@dataclass
class BoundReport:
    """Evaluated right-hand side of an explicit total-variation bound.

    The four term buckets always sum exactly to `total`:
      * term_boundary: window-boundary / sampling-noise contributions,
      * term_gamma: pair-interaction (ball-volume) contribution,
      * term_psi: plain-coefficient residue contributions,
      * term_xi: refined-coefficient residue contributions.
    """

    variant: str  # "window" | "randomized"
    term_boundary: float
    term_gamma: float
    term_psi: float
    term_xi: float
    h0: float
    h1: float
    extras: dict = dc_field(default_factory=dict)

    @property
    def total(self) -> float:
        return self.term_boundary + self.term_gamma + self.term_psi + self.term_xi


def window_tv_bound(
    moments: MomentTerms,
    window_size: int,
    shells: ShellTable,
    psi,
    xi,
    b_n: int,
    defect: float,
    h0: float,
    h1: float,
    cutoff: int,
) -> BoundReport:
    """Assemble the deterministic-window bound

        h0 * eta * defect^((p-1)/p)
        + h1 * ( 2 |B_{2b}|/|A_n| * gamma + mu * R_psi(b) + 2 mu * R_xi(b) )

    at the caller-fixed moment index p (any p >= 1 yields a valid bound)."""
    if b_n < 1:
        raise DomainError("b_n must be >= 1")
    if not 0.0 <= defect:
        raise DomainError("defect must be >= 0")
    if 2 * b_n > shells.r_max:
        raise DomainError("shell table too short for |B_{2b}|")
    r_psi = residue_sum(shells, psi, b_n, 1, cutoff)
    r_xi = residue_sum(shells, xi, b_n, 2, cutoff)
    exponent = (moments.p - 1.0) / moments.p
    boundary = h0 * moments.eta * defect**exponent
    gamma_term = h1 * 2.0 * shells.ball(2 * b_n) / window_size * moments.gamma
    psi_term = h1 * moments.mu * r_psi.value
    xi_term = 2.0 * h1 * moments.mu * r_xi.value
    return BoundReport(
        variant="window",
        term_boundary=boundary,
        term_gamma=gamma_term,
        term_psi=psi_term,
        term_xi=xi_term,
        h0=h0,
        h1=h1,
        extras={"defect": defect, "residue_psi": r_psi.value, "residue_xi": r_xi.value},
    )


# ---------------------------------------------------------------------------
# Randomized (subsampled) sums
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class JDist:
    """Law of the number of sampled locations: fixed or Poisson."""

    kind: str  # "fixed" | "poisson"
    value: float
    times_window: bool = False

    def validate(self) -> list[tuple[str, str]]:
        errs = []
        if self.kind not in ("fixed", "poisson"):
            errs.append(("kind", f"unknown kind {self.kind!r}"))
        if self.value < 0:
            errs.append(("value", "value must be >= 0"))
        return errs

    def resolve(self, window_size: int) -> float:
        v = self.value * window_size if self.times_window else self.value
        return float(round(v)) if self.kind == "fixed" else float(v)


@dataclass(frozen=True)
class JMoments:
    mean: float
    l1: float
    l2sq: float
    l3cu: float
    var: float

    @property
    def l2(self) -> float:
        return math.sqrt(self.l2sq)


def j_moments(jd: JDist, window_size: int) -> JMoments:
    v = jd.resolve(window_size)
    if jd.kind == "fixed":
        return JMoments(mean=v, l1=v, l2sq=v**2, l3cu=v**3, var=0.0)
    return JMoments(mean=v, l1=v, l2sq=v**2 + v, l3cu=v**3 + 3 * v**2 + v, var=v)


@dataclass(frozen=True)
class RandomizedSpec:
    """Subsampling scheme: location count law, ball radius, tuning exponents.

    Only the uniform sampling measure is supported; it is well spread with
    constant 1 (annulus mass is exactly the uniform annulus mass)."""

    j_dist: JDist
    b_n: int
    alpha: float = 0.5
    beta: float = 0.5
    nu: str = "uniform"
    spread_const: float = 1.0

    def validate(self) -> list[tuple[str, str]]:
        errs = [(f"j_dist.{f}", m) for f, m in self.j_dist.validate()]
        if self.b_n < 1:
            errs.append(("b_n", "b_n must be >= 1"))
        if not 0.0 < self.alpha < 1.0:
            errs.append(("alpha", "alpha must lie in (0, 1)"))
        if not 0.0 < self.beta < 1.0:
            errs.append(("beta", "beta must lie in (0, 1)"))
        if self.nu != "uniform":
            errs.append(("nu", "only the uniform sampling measure is supported"))
        if self.spread_const < 1.0:
            errs.append(("spread_const", "spread constant must be >= 1"))
        return errs

    def checked(self) -> "RandomizedSpec":
        errs = self.validate()
        if errs:
            raise DomainError("; ".join(f"{f}: {m}" for f, m in errs))
        return self


def randomized_sum(spec: SimulatorSpec, window: FolnerWindow, rspec: RandomizedSpec, seed) -> int:
    """One subsampled window sum: draw the location count, then i.i.d.
    uniform locations (with replacement) and add up the evaluations."""
    rspec = rspec.checked()
    rng = seed if isinstance(seed, np.random.Generator) else substream(int(seed), PHASE_RANDOMIZED, 0)
    elems = sorted(window.elements)
    j = rspec.j_dist.resolve(len(elems))
    count = int(j) if rspec.j_dist.kind == "fixed" else int(rng.poisson(j))
    if count == 0:
        return 0
    sample = simulators.sample_window(spec, window.index, rng)
    idx = rng.integers(0, len(elems), size=count)
    return int(sum(eval_f(sample, elems[i]) for i in idx))


def _randomized_batch(spec: SimulatorSpec, n: int, rspec: RandomizedSpec, k_cap: int, size: int, rng) -> dict:
    """Occupancy-based batch statistics for the randomized pipeline.

    For Poisson location counts the per-site occupancies are i.i.d. Poisson
    (exact splitting of the uniform multinomial); fixed counts use a
    vectorized multinomial.
    """
    m_dim = spec.m
    side = 2 * n + 1
    cells = side**m_dim
    j = rspec.j_dist.resolve(cells)
    if rspec.j_dist.kind == "fixed":
        counts = rng.multinomial(int(j), np.full(cells, 1.0 / cells), size=size)
    else:
        counts = rng.poisson(j / cells, size=(size, cells))
    vals = (rng.random((size, cells)) < spec.p).astype(np.int64)
    hits = counts * vals
    w_vals = hits.sum(axis=1)
    w_counts = np.bincount(w_vals)

    grid_shape = (size,) + (side,) * m_dim
    padded = np.pad(
        hits.reshape(grid_shape),
        [(0, 0)] + [(rspec.b_n, rspec.b_n)] * m_dim,
        mode="constant",
    )
    box = padded
    for ax in range(1, m_dim + 1):
        box = _box1d(box, 2 * rspec.b_n + 1, ax)
    box = box.reshape(size, cells)

    d_sum = np.zeros(k_cap + 1)
    d_sumsq = np.zeros(k_cap + 1)
    for k in range(1, k_cap + 1):
        d_k = (hits * (box == k)).sum(axis=1)
        d_sum[k] = d_k.sum()
        d_sumsq[k] = (d_k.astype(np.float64) ** 2).sum()
    return {"w_counts": w_counts, "d_sum": d_sum, "d_sumsq": d_sumsq, "m": size}


def randomized_worker(args):
    spec, n, rspec, k_cap, seed, batch_index, size = args
    rng = substream(seed, PHASE_RANDOMIZED, batch_index)
    return batch_index, _randomized_batch(spec, n, rspec, k_cap, size, rng)


@dataclass
class RandomizedStats:
    n: int
    window_size: int
    rspec: RandomizedSpec
    m_reps: int
    w_counts: np.ndarray
    lambda_est: LambdaEstimate

    def w_dist(self) -> DiscreteDist:
        return counts_dist(self.w_counts, self.m_reps)


def randomized_stats(
    spec: SimulatorSpec,
    n: int,
    rspec: RandomizedSpec,
    k_max: int,
    m_reps: int,
    seed: int,
    batch_size: int = 10_000,
    map_fn=map,
) -> RandomizedStats:
    """Shared-sample law of the subsampled sum and its cluster rates."""
    spec = spec.checked()
    rspec = rspec.checked()
    if spec.variant != "iid_field":
        raise DomainError("the batched randomized pipeline supports iid grid fields")
    window_size = (2 * n + 1) ** spec.m
    tasks = [
        (spec, n, rspec, k_max, seed, i, size)
        for i, size in enumerate(batch_sizes(m_reps, batch_size))
    ]
    partials = sorted(map_fn(randomized_worker, tasks), key=lambda kv: kv[0])
    w_counts = None
    d_sum = np.zeros(k_max + 1)
    d_sumsq = np.zeros(k_max + 1)
    total = 0
    for _, part in partials:
        w_counts = _merge_hist(w_counts, part["w_counts"])
        d_sum += part["d_sum"]
        d_sumsq += part["d_sumsq"]
        total += part["m"]
    rates = np.zeros(k_max + 1)
    errs = np.zeros(k_max + 1)
    display = np.zeros(k_max + 1)
    for k in range(1, k_max + 1):
        mean = d_sum[k] / total
        var = max(d_sumsq[k] / total - mean**2, 0.0)
        display[k] = mean
        rates[k] = mean / k
        errs[k] = math.sqrt(var / total) / k
    lam = LambdaEstimate(
        rates=rates,
        stderr=errs,
        b=rspec.b_n,
        n=n,
        window_size=window_size,
        m_reps=total,
        display=display,
    )
    return RandomizedStats(
        n=n, window_size=window_size, rspec=rspec, m_reps=total, w_counts=w_counts, lambda_est=lam
    )


def lambda_hat_randomized(
    spec: SimulatorSpec,
    n: int,
    rspec: RandomizedSpec,
    k_max: int,
    m_reps: int,
    seed: int,
    batch_size: int = 10_000,
    map_fn=map,
) -> LambdaEstimate:
    """Cluster rates of the subsampled sum.

    The per-k displayed expectation (number of sampled hits whose sampled
    ball sum equals k) is estimated by Monte Carlo and divided by k to give
    the compound-Poisson rate; the undivided values are kept in `display`.
    """
    return randomized_stats(spec, n, rspec, k_max, m_reps, seed, batch_size, map_fn).lambda_est


def randomized_noise_scale(
    rspec: RandomizedSpec, window_size: int, ball_size: int, q1: float, q2: float
) -> float:
    """Sampling-noise scale of the subsampled pipeline:

        2 * ( 2 S^2 ||J||_3^3 |B_b|^2 / |A|^2 * q1^2
              + (||J||_1 + 4 S ||J||_2^2 |B_b| / |A|) * q2^2 )^(1/2)

    with q1 = sup ||Q||_1 and q2^2 = sup ||Q||_2^2 supplied by the caller."""
    if min(q1, q2) < 0:
        raise DomainError("q1 and q2 must be >= 0")
    S = rspec.spread_const
    mom = j_moments(rspec.j_dist, window_size)
    inner = (
        2.0 * S**2 * mom.l3cu * ball_size**2 / window_size**2 * q1**2
        + (mom.l1 + 4.0 * S * mom.l2sq * ball_size / window_size) * q2**2
    )
    return 2.0 * math.sqrt(inner)


def decorrelation_radius(
    epsilon: float, alpha: float, beta: float, shells: ShellTable
) -> tuple[int, bool]:
    """Largest tabulated radius whose ball fits under floor(eps^(alpha-1))^(1-beta).

    Returns (radius, warning); the warning flags a threshold below |B_0| = 1
    (possible when eps >= 1), in which case the radius degenerates to 0."""
    if epsilon <= 0:
        raise DomainError("epsilon must be > 0")
    if not (0 < alpha < 1 and 0 < beta < 1):
        raise DomainError("alpha and beta must lie in (0, 1)")
    k_n = math.floor(epsilon ** (alpha - 1.0))
    threshold = float(k_n) ** (1.0 - beta) if k_n > 0 else 0.0
    if threshold < 1.0:
        return 0, True
    c = 0
    for r in range(shells.r_max + 1):
        if shells.ball(r) <= threshold:
            c = r
        else:
            break
    return c, False


def randomized_tv_bound(
    shells: ShellTable,
    rspec: RandomizedSpec,
    window_size: int,
    q1: float,
    q2: float,
    psi,
    xi,
    h0: float,
    h1: float,
    cutoff: int,
) -> BoundReport:
    """Assemble the explicit subsampled-sum bound with all constants explicit.

    Bucket mapping: the refined/plain residues keep their own buckets (the
    plain bucket also absorbs the decorrelation-radius coefficient term);
    the interaction bucket carries the ball-volume piece; everything driven
    by sampling noise, location-count variance, or the truncation radius
    lands in the boundary bucket.  If the integer level floor(eps^(alpha-1))
    is zero the bound degenerates to +inf (still a valid upper bound)."""
    rspec = rspec.checked()
    b = rspec.b_n
    if 2 * b > shells.r_max:
        raise DomainError("shell table too short for |B_{2b}|")
    S = rspec.spread_const
    mom = j_moments(rspec.j_dist, window_size)
    ball_b = shells.ball(b)
    eps = randomized_noise_scale(rspec, window_size, ball_b, q1, q2)
    k_n = math.floor(eps ** (rspec.alpha - 1.0))
    c_n, warn = decorrelation_radius(eps, rspec.alpha, rspec.beta, shells)

    r_psi = residue_sum(shells, psi, b, 1, cutoff)
    r_xi = residue_sum(shells, xi, b, 2, cutoff)
    front = S * mom.l2sq / window_size

    gamma_term = h1 * front * q2**2 * (shells.ball(2 * b) + (shells.ball(2 * b) - ball_b))
    psi_term = h1 * front * q2 * r_psi.value + h0 * 2.0 * mom.mean * psi(c_n) * q2
    xi_term = h1 * front * 2.0 * q2 * r_xi.value

    if k_n >= 1:
        level_term = 2.0 * S * shells.ball(c_n) / k_n * mom.l2sq
    else:
        level_term = math.inf
    var_piece = (
        S * ball_b * math.sqrt(2.0 * mom.var) * mom.l2 + window_size * math.sqrt(2.0 * mom.var)
    )
    boundary = h0 * (
        eps**rspec.alpha
        + 2.0 * S * mom.l2sq * (ball_b - shells.ball(c_n)) / window_size * q2**2
        + q1 / window_size * (level_term + var_piece)
    )
    return BoundReport(
        variant="randomized",
        term_boundary=boundary,
        term_gamma=gamma_term,
        term_psi=psi_term,
        term_xi=xi_term,
        h0=h0,
        h1=h1,
        extras={
            "epsilon": eps,
            "k_n": k_n,
            "c_n": c_n,
            "c_n_warning": warn,
            "residue_psi": r_psi.value,
            "residue_xi": r_xi.value,
        },
    )


def simplified_bound_constants(
    rspec: RandomizedSpec, window_size: int, q2: float, j3_over_a: float | None = None
) -> dict:
    """Order-of-magnitude constants of the simplified subsampled bound
    (diagnostics only; the explicit assembled bound is authoritative)."""
    mom = j_moments(rspec.j_dist, window_size)
    S = rspec.spread_const
    tau1 = max(1.0, (mom.l3cu ** (1.0 / 3.0)) / window_size if j3_over_a is None else j3_over_a)
    tau2 = max(1.0, window_size * q2)
    sigma1 = 4.0 * math.sqrt(tau1) * tau2 * max(1.0, 2.0 * tau1 * S)
    kappa1 = S * tau1**2 * tau2**2
    kappa2 = max(
        sigma1**rspec.alpha,
        2.0 * S * tau1**2 * tau2**2,
        2.0 * tau1 * tau2,
        2.0 ** (rspec.beta + 1.0) * tau1**2 * tau2 * S * min(sigma1 ** ((1 - rspec.alpha) * rspec.beta), 1.0),
        math.sqrt(2.0) * tau1 * tau2 * S,
        math.sqrt(2.0) * tau2,
    )
    return {"tau1": tau1, "tau2": tau2, "sigma1": sigma1, "kappa1": kappa1, "kappa2": kappa2}


# ---------------------------------------------------------------------------
# Cayley clique statistics
# ---------------------------------------------------------------------------


def clique_radius(group: MetricGroup, p: float, window_size: int, shells: ShellTable) -> int:
    """Smallest k whose induced-clique edge count lower bound
    (|S| |B_k| - (|S|-1) |B_k \\ B_{k-1}|) / 2 reaches log|A_n| / log(1/p)."""
    if not 0.0 < p < 1.0:
        raise DomainError("p must lie in (0, 1)")
    if group.kind != "fin_gen":
        raise DomainError("clique radii require a finitely generated group")
    if window_size < 1:
        raise DomainError("window_size must be >= 1")
    rhs = -math.log(window_size) / math.log(p)
    n_gen = len(group.generators)
    for k in range(1, shells.r_max + 1):
        lhs = 0.5 * (n_gen * shells.ball(k) - (n_gen - 1) * (shells.ball(k) - shells.ball(k - 1)))
        if lhs >= rhs:
            return k
    raise ResourceBudgetError("no radius within the shell table satisfies the threshold")


def clique_survival_rate(p: float, edges: int) -> float:
    """Probability that every edge of an `edges`-edge clique is retained."""
    if not 0.0 < p <= 1.0:
        raise DomainError("p must lie in (0, 1]")
    if edges < 0:
        raise DomainError("edge count must be >= 0")
    return float(p**edges)


def cayley_worker(args):
    spec, n, seed, batch_index, size = args
    rng = substream(seed, PHASE_WINDOW, batch_index)
    layout = cayley_layout(spec, n)
    w = simulators.batch_cayley_w(layout, spec.p, size, rng)
    return batch_index, np.bincount(w)


# ---------------------------------------------------------------------------
# Empirical window-sum laws
# ---------------------------------------------------------------------------


def empirical_w_dist(
    spec: SimulatorSpec,
    n: int,
    m_reps: int,
    seed: int,
    mode: str = "deterministic",
    rspec: RandomizedSpec | None = None,
    batch_size: int = 20_000,
    map_fn=map,
) -> DiscreteDist:
    """Normalized histogram of the window sum over independent replicates."""
    spec = spec.checked()
    if mode == "randomized":
        if rspec is None:
            raise DomainError("randomized mode needs a RandomizedSpec")
        return randomized_stats(spec, n, rspec, 1, m_reps, seed, batch_size, map_fn).w_dist()
    if mode != "deterministic":
        raise DomainError("mode must be 'deterministic' or 'randomized'")
    if spec.variant in ("iid_field", "mdep_field", "ising_field"):
        return window_stats(spec, n, 1, 1, m_reps, seed, batch_size, map_fn).w_dist()
    if spec.variant == "exch_seq":
        spec = simulators.with_params(spec, seq_len=n)
        rng = substream(int(seed), PHASE_WINDOW, 0)
        w_counts = None
        for i, size in enumerate(batch_sizes(m_reps, batch_size)):
            rng_b = substream(int(seed), PHASE_WINDOW, i)
            vals, _ = batch_exch_values(spec, size, rng_b)
            w_counts = _merge_hist(w_counts, np.bincount(vals.sum(axis=1)))
        return counts_dist(w_counts, m_reps)
    if spec.variant == "cayley_perc":
        tasks = [(spec, n, seed, i, size) for i, size in enumerate(batch_sizes(m_reps, batch_size))]
        w_counts = None
        for _, part in sorted(map_fn(cayley_worker, tasks), key=lambda kv: kv[0]):
            w_counts = _merge_hist(w_counts, part)
        return counts_dist(w_counts, m_reps)
    raise DomainError(f"no deterministic window sum for variant {spec.variant!r}")


def exch_conditional_w_dists(
    spec: SimulatorSpec, n: int, m_reps: int, seed: int, batch_size: int = 50_000
) -> dict:
    """Conditional window-sum histograms per latent atom."""
    spec = simulators.with_params(spec.checked(), seq_len=n)
    hists: dict = {}
    counts: dict = {}
    for i, size in enumerate(batch_sizes(m_reps, batch_size)):
        rng = substream(int(seed), PHASE_WINDOW, i)
        vals, theta = batch_exch_values(spec, size, rng)
        w = vals.sum(axis=1)
        for t_atom, _ in spec.mixture:
            mask = theta == t_atom
            if mask.any():
                hists[t_atom] = _merge_hist(hists.get(t_atom), np.bincount(w[mask]))
                counts[t_atom] = counts.get(t_atom, 0) + int(mask.sum())
    return {t: counts_dist(h, counts[t]) for t, h in hists.items()}


def tv_against(emp: DiscreteDist, lam: ParamVector) -> tuple[float, float]:
    """TV of an empirical window-sum law against the compound law Z(lam)."""
    k_ref = max(emp.k_max + 5, 20)
    ref = cp_pmf(lam, k_ref)
    while ref.tail > 1e-10 and k_ref < 10_000:
        k_ref *= 2
        ref = cp_pmf(lam, k_ref)
    return empirical_tv(emp, ref)


def tv_against_poisson(emp: DiscreteDist, mean: float) -> tuple[float, float]:
    k_ref = max(emp.k_max + 5, int(mean + 12 * math.sqrt(mean + 1.0)))
    return empirical_tv(emp, poisson_dist(mean, k_ref))


# ---------------------------------------------------------------------------
# Convergence curves
# ---------------------------------------------------------------------------


@dataclass
class ResultRow:
    n: int
    window_size: int
    b_n: int
    lambda_rates: list
    lambda_stderr: list
    tv: float
    tv_stderr: float
    bound: BoundReport | None = None
    extra: dict = dc_field(default_factory=dict)
    wall_time: float = 0.0


@dataclass
class ExperimentResult:
    scenario: str
    master_seed: int
    config_hash: str
    rows: list
    incomplete: bool = False
    total_wall_time: float = 0.0


def zero_mixing(t: float) -> float:
    """Coefficient of an independent structure: 0 at any positive separation."""
    return 0.0 if t >= 1 else 1.0


def range_mixing(dependence_range: int):
    """Coefficient vanishing beyond a finite dependence range."""

    def coeff(t: float) -> float:
        return 0.0 if t >= dependence_range else 1.0

    return coeff


def geometric_mixing(rho: float):
    """Geometric envelope rho^t (contraction-regime Markov fields)."""

    def coeff(t: float) -> float:
        return float(rho) ** max(t, 0)

    return coeff


def _shells_for(config, group: MetricGroup, need: int) -> ShellTable:
    cutoff = int(config.bound.get("cutoff", 40))
    return groups.shell_table(group, max(cutoff + 1, need))


def _grid_row(config, n: int, b: int, seed: int, map_fn) -> ResultRow:
    spec = config.spec_for(n)
    stats = window_stats(
        spec, n, b, config.k_max, config.m_reps, seed,
        batch_size=config.batch_size, map_fn=map_fn,
    )
    lam = stats.lambda_est
    tv, tv_se = tv_against(stats.w_dist(), lam.param_vector())
    row = ResultRow(
        n=n,
        window_size=stats.window_size,
        b_n=b,
        lambda_rates=lam.rates.tolist(),
        lambda_stderr=lam.stderr.tolist(),
        tv=tv,
        tv_stderr=tv_se,
        extra={"qhat": stats.qhat, "qhat_stderr": stats.qhat_stderr, "mass": lam.mass},
    )
    if config.bound.get("enabled"):
        group = groups.grid_group(spec.m)
        shells = _shells_for(config, group, 2 * b)
        coeff = config.mixing_coefficient()
        h0, h1 = h_bounds_analytic(lam.param_vector())
        moments = moment_terms_ergodic(stats.qhat, stats.window_size, float(config.bound.get("p", 2.0)))
        defect = groups.boundary_defect(group, n, b)
        row.bound = window_tv_bound(
            moments, stats.window_size, shells, coeff, coeff, b, defect, h0, h1,
            int(config.bound.get("cutoff", 40)),
        )
        row.extra["h_envelope"] = math.exp(lam.mass)
    return row


def _exch_row(config, n: int, b: int, seed: int) -> ResultRow:
    spec = config.spec_for(n)
    rates = lambda_hat_exchangeable(spec, n, config.m_reps, seed)
    dists = exch_conditional_w_dists(spec, n, config.m_reps, seed, batch_size=config.batch_size)
    atoms = []
    tv_avg = 0.0
    tv_var = 0.0
    for theta, weight, n_phat, n_phat_se in rates.atoms:
        emp = dists.get(theta)
        if emp is None:
            continue
        tv_j, se_j = tv_against_poisson(emp, theta)
        atoms.append(
            {
                "theta": theta,
                "weight": weight,
                "n_phat": n_phat,
                "n_phat_stderr": n_phat_se,
                "tv": tv_j,
                "tv_stderr": se_j,
                "m_reps": emp.n_samples,
            }
        )
        tv_avg += weight * tv_j
        tv_var += (weight * se_j) ** 2
    lam_rates = [0.0, rates.mean_rate]
    return ResultRow(
        n=n,
        window_size=n,
        b_n=b,
        lambda_rates=lam_rates,
        lambda_stderr=[0.0, 0.0],
        tv=tv_avg,
        tv_stderr=math.sqrt(tv_var),
        extra={"atoms": atoms, "latent_averaged": True},
    )


def _cayley_row(config, n: int, seed: int, map_fn) -> ResultRow:
    spec = config.spec_for(n)
    group = groups.fin_gen_group(spec.generators)
    window_size = groups.window_size(group, n)
    if spec.d is None:
        shells = _shells_for(config, group, 4)
        d = clique_radius(group, spec.p, window_size, shells)
        spec = simulators.with_params(spec, d=d)
    else:
        d = spec.d
    edges = induced_subgraph_edges(group, d)
    rate = clique_survival_rate(spec.p, edges)
    emp = empirical_w_dist(
        spec, n, config.m_reps, seed, batch_size=config.batch_size, map_fn=map_fn
    )
    tv, tv_se = tv_against_poisson(emp, rate)
    return ResultRow(
        n=n,
        window_size=window_size,
        b_n=d + 1,
        lambda_rates=[0.0, rate],
        lambda_stderr=[0.0, 0.0],
        tv=tv,
        tv_stderr=tv_se,
        extra={
            "d": d,
            "clique_edges": edges,
            "survival_rate": rate,
            "rarity_ok": rate <= 1.0 / window_size,
        },
    )


def _randomized_row(config, n: int, seed: int, map_fn) -> ResultRow:
    spec = config.spec_for(n)
    rspec = config.randomized
    stats = randomized_stats(
        spec, n, rspec, config.k_max, config.m_reps, seed,
        batch_size=config.batch_size, map_fn=map_fn,
    )
    lam = stats.lambda_est
    tv, tv_se = tv_against(stats.w_dist(), lam.param_vector())
    row = ResultRow(
        n=n,
        window_size=stats.window_size,
        b_n=rspec.b_n,
        lambda_rates=lam.rates.tolist(),
        lambda_stderr=lam.stderr.tolist(),
        tv=tv,
        tv_stderr=tv_se,
        extra={"display": lam.display.tolist(), "j": rspec.j_dist.resolve(stats.window_size)},
    )
    if config.bound.get("enabled"):
        group = groups.grid_group(spec.m)
        shells = _shells_for(config, group, 2 * rspec.b_n)
        coeff = config.mixing_coefficient()
        h0, h1 = h_bounds_analytic(lam.param_vector())
        q = spec.p
        row.bound = randomized_tv_bound(
            shells, rspec, stats.window_size, q, q, coeff, coeff, h0, h1,
            int(config.bound.get("cutoff", 40)),
        )
        row.extra.update(
            epsilon=row.bound.extras["epsilon"],
            c_n=row.bound.extras["c_n"],
            k_n=row.bound.extras["k_n"],
        )
    return row


def convergence_curve(config, map_fn=map, on_row=None) -> ExperimentResult:
    """Per window index: cluster rates, the TV distance between the empirical
    window-sum law and its fitted compound law, and (where enabled) the
    assembled bound.  `config` is a parsed ExperimentConfig; `on_row` is
    called after each completed row so partial results can be flushed."""
    import time

    variant = config.simulator["variant"]
    rows = []
    start_total = time.perf_counter()
    for i, n in enumerate(config.n_grid):
        started = time.perf_counter()
        seed = config.master_seed
        b = config.b_for(i)
        if config.mode == "randomized":
            row = _randomized_row(config, n, seed + 1000 * i, map_fn)
        elif variant in ("iid_field", "mdep_field", "ising_field"):
            row = _grid_row(config, n, b, seed + 1000 * i, map_fn)
        elif variant == "exch_seq":
            row = _exch_row(config, n, b, seed + 1000 * i)
        elif variant == "cayley_perc":
            row = _cayley_row(config, n, seed + 1000 * i, map_fn)
        else:
            raise DomainError(f"no curve for simulator variant {variant!r}")
        row.wall_time = time.perf_counter() - started
        rows.append(row)
        if on_row is not None:
            on_row(row)
    return ExperimentResult(
        scenario=config.scenario,
        master_seed=config.master_seed,
        config_hash=config.hash,
        rows=rows,
        total_wall_time=time.perf_counter() - start_total,
    )
