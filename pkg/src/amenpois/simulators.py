"""Samplers for binary random structures over groups.

Variants:

* ``iid_field(m, p)``: independent Bernoulli(p) sites on Z^m.
* ``mdep_field(m, w, tau)``: site value 1 iff all w consecutive underlying
  uniforms (along the first axis) exceed tau; stationary and (w-1)-dependent.
* ``ising_field(m, beta, ext)``: +/- spin Gibbs field sampled on a torus by
  checkerboard sweeps (burn-in 200 full sweeps); the binary value is the
  indicator of a +1 spin.  The contraction constant 2m*tanh(beta) < 1 marks
  the regime where the geometric mixing envelope applies.
* ``exch_seq(mixture, n)``: draw a latent rate theta from a finite mixture,
  then n conditionally i.i.d. Bernoulli(theta/n) entries.
* ``cayley_perc(generators, p, d)``: independent bond percolation on the
  Cayley graph of a finitely generated group; the evaluated statistic is the
  indicator that the radius-d clique translated to phi survives inside the
  window.
* ``planar_poisson(intensity, delta, kappa)``: a Poisson point sample on
  [0, side]^2 plus an independent rare-center thinning function.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np

from amenpois import groups
from amenpois.errors import DomainError, RegionError
from amenpois.rng import PHASE_WINDOW, substream

VARIANTS = ("iid_field", "mdep_field", "ising_field", "exch_seq", "cayley_perc", "planar_poisson")

ISING_BURN_IN = 200


@dataclass(frozen=True)
class SimulatorSpec:
    """Concrete parameters of one random-structure generator."""

    variant: str
    m: int = 1
    p: float | None = None
    window_w: int | None = None
    tau: float | None = None
    beta: float | None = None
    ext: float | None = None
    mixture: tuple[tuple[float, float], ...] | None = None
    seq_len: int | None = None
    generators: tuple[tuple[int, ...], ...] | None = None
    d: int | None = None
    intensity: float | None = None
    delta: float | None = None
    kappa: float | None = None

    @property
    def is_ergodic(self) -> bool:
        """Latent-free variants; the exchangeable mixture is the exception."""
        if self.variant != "exch_seq":
            return True
        return self.mixture is not None and len(self.mixture) == 1

    def validate(self) -> list[tuple[str, str]]:
        """Return (field, message) pairs for every invalid parameter."""
        errs = []
        if self.variant not in VARIANTS:
            return [("variant", f"unknown variant {self.variant!r}")]
        if self.variant in ("iid_field", "mdep_field", "ising_field"):
            if self.m < 1:
                errs.append(("m", "grid dimension must be >= 1"))
        if self.variant == "iid_field":
            if self.p is None or not 0.0 <= self.p <= 1.0:
                errs.append(("p", f"site probability must lie in [0, 1], got {self.p!r}"))
        elif self.variant == "mdep_field":
            if self.window_w is None or self.window_w < 1:
                errs.append(("window_w", "moving-window length must be >= 1"))
            if self.tau is None or not 0.0 <= self.tau <= 1.0:
                errs.append(("tau", f"threshold must lie in [0, 1], got {self.tau!r}"))
        elif self.variant == "ising_field":
            if self.beta is None or self.beta < 0:
                errs.append(("beta", "coupling must be >= 0"))
            if self.ext is None:
                errs.append(("ext", "external field is required"))
        elif self.variant == "exch_seq":
            if not self.mixture:
                errs.append(("mixture", "mixture of (theta, weight) atoms is required"))
            else:
                if any(t < 0 for t, _ in self.mixture):
                    errs.append(("mixture", "latent rates must be >= 0"))
                wsum = sum(w for _, w in self.mixture)
                if any(w < 0 for _, w in self.mixture) or abs(wsum - 1.0) > 1e-9:
                    errs.append(("mixture", f"weights must be >= 0 and sum to 1, got {wsum}"))
            if self.seq_len is None or self.seq_len < 1:
                errs.append(("seq_len", "sequence length must be >= 1"))
        elif self.variant == "cayley_perc":
            if not self.generators:
                errs.append(("generators", "generator set is required"))
            if self.p is None or not 0.0 < self.p <= 1.0:
                errs.append(("p", f"edge retention must lie in (0, 1], got {self.p!r}"))
            if self.d is not None and self.d < 0:
                errs.append(("d", "clique radius must be >= 0"))
        elif self.variant == "planar_poisson":
            if self.intensity is None or self.intensity <= 0:
                errs.append(("intensity", "sampling intensity must be > 0"))
            if self.delta is None or self.delta <= 0:
                errs.append(("delta", "thinning radius must be > 0"))
            if self.kappa is None or self.kappa < 0:
                errs.append(("kappa", "center rate must be >= 0"))
        return errs

    def checked(self) -> "SimulatorSpec":
        errs = self.validate()
        if errs:
            raise DomainError("; ".join(f"{f}: {m}" for f, m in errs))
        return self

    def dobrushin_contraction(self) -> float | None:
        """2m tanh(beta) for the Markov field; None for other variants."""
        if self.variant != "ising_field":
            return None
        return 2.0 * self.m * math.tanh(self.beta)

    def site_prob(self) -> float | None:
        """Closed-form stationary P(value = 1) where one exists."""
        if self.variant == "iid_field":
            return self.p
        if self.variant == "mdep_field":
            return (1.0 - self.tau) ** self.window_w
        return None


def ising_external_field(beta: float, m: int, target_prob: float) -> float:
    """External field making P(+1) roughly `target_prob` when +1 sites are
    rare (all-neighbors-down heuristic)."""
    if not 0.0 < target_prob < 1.0:
        raise DomainError("target probability must lie in (0, 1)")
    return 2.0 * m * beta + 0.5 * math.log(target_prob / (1.0 - target_prob))


@dataclass
class FieldSample:
    """One realization over a finite region.

    ``values`` is the site array for grid fields (index = coordinate +
    region_radius) and the entry array for sequences.  Percolation samples
    carry the retained-edge geometry instead; planar samples carry point and
    center coordinates.
    """

    spec: SimulatorSpec
    region_radius: int
    seed_record: tuple
    values: np.ndarray | None = None
    latent_value: float | None = None
    layout: "CayleyLayout | None" = field(default=None, repr=False)
    edge_mask: np.ndarray | None = field(default=None, repr=False)
    window_index: int | None = None
    points: np.ndarray | None = field(default=None, repr=False)
    centers: np.ndarray | None = field(default=None, repr=False)
    side: float | None = None


def _as_rng(seed) -> tuple[np.random.Generator, tuple]:
    if isinstance(seed, np.random.Generator):
        return seed, ("generator",)
    rec = ("seed", int(seed))
    return substream(int(seed), PHASE_WINDOW, 0), rec


# ---------------------------------------------------------------------------
# Batched raw-value samplers (shared by the single-sample API and the engine)
# ---------------------------------------------------------------------------


def batch_grid_values(spec: SimulatorSpec, radius: int, batch: int, rng) -> np.ndarray:
    """uint8 site values for grid variants, shape (batch, side, [side, ...]).

    iid/mdep fields are exact on a free-boundary box; the Gibbs field is
    sampled on a torus (side even), so its law is exactly translation
    invariant, and ball sums may wrap.
    """
    spec.checked()
    if radius < 0:
        raise DomainError("radius must be >= 0")
    side = 2 * radius + 1
    if spec.variant == "iid_field":
        shape = (batch,) + (side,) * spec.m
        return (rng.random(shape) < spec.p).astype(np.uint8)
    if spec.variant == "mdep_field":
        w = spec.window_w
        shape = (batch, side + w - 1) + (side,) * (spec.m - 1)
        a = rng.random(shape) > spec.tau
        out = a[:, 0:side]
        for j in range(1, w):
            out = np.logical_and(out, a[:, j : j + side])
        return out.astype(np.uint8)
    if spec.variant == "ising_field":
        return _batch_ising(spec, radius, batch, rng)
    raise DomainError(f"{spec.variant} is not a grid field")


def _ising_tables(m: int, side: int):
    """Checkerboard site indices and per-site torus neighbor tables."""
    shape = (side,) * m
    coords = np.indices(shape).reshape(m, -1)
    parity = coords.sum(axis=0) % 2
    n_sites = side**m
    strides = [side ** (m - 1 - ax) for ax in range(m)]
    nbr = np.empty((n_sites, 2 * m), dtype=np.int64)
    flat = (coords * np.array(strides)[:, None]).sum(axis=0)
    for ax in range(m):
        for sgn, col in ((1, 2 * ax), (-1, 2 * ax + 1)):
            shifted = coords.copy()
            shifted[ax] = (coords[ax] + sgn) % side
            nbr[:, col] = (shifted * np.array(strides)[:, None]).sum(axis=0)
    assert np.array_equal(flat, np.arange(n_sites))
    idxs = [np.flatnonzero(parity == 0), np.flatnonzero(parity == 1)]
    return idxs, [nbr[idx] for idx in idxs]


def _batch_ising(spec: SimulatorSpec, radius: int, batch: int, rng) -> np.ndarray:
    m = spec.m
    side = 2 * radius + 2  # even side keeps the checkerboard consistent on the torus
    n_sites = side**m
    # Conditional P(x=1 | s neighbours up) depends only on s in 0..2m.
    s_vals = np.arange(2 * m + 1)
    ptab = (1.0 / (1.0 + np.exp(-2.0 * (spec.beta * (2.0 * s_vals - 2.0 * m) + spec.ext)))).astype(
        np.float32
    )
    idxs, nbrs = _ising_tables(m, side)

    p_init = 1.0 / (1.0 + math.exp(-2.0 * (spec.ext - 2.0 * m * spec.beta)))
    x = (rng.random((batch, n_sites)) < p_init).astype(np.uint8)
    for _ in range(ISING_BURN_IN):
        for idx, nb in zip(idxs, nbrs):
            s = x[:, nb[:, 0]].astype(np.uint8)
            for col in range(1, 2 * m):
                s += x[:, nb[:, col]]
            u = rng.random((batch, idx.size), dtype=np.float32)
            x[:, idx] = u < ptab[s]
    # Full torus array (side 2*radius + 2); its law is exactly translation
    # invariant, so windows may be anchored anywhere and ball sums wrap.
    return x.reshape((batch,) + (side,) * m)


def batch_exch_values(spec: SimulatorSpec, batch: int, rng) -> tuple[np.ndarray, np.ndarray]:
    """(values (batch, n) uint8, latent theta (batch,)) for the exchangeable mixture."""
    spec.checked()
    if spec.variant != "exch_seq":
        raise DomainError("batch_exch_values requires an exch_seq spec")
    thetas = np.array([t for t, _ in spec.mixture])
    weights = np.array([w for _, w in spec.mixture])
    idx = rng.choice(len(thetas), size=batch, p=weights / weights.sum())
    theta = thetas[idx]
    probs = np.clip(theta / spec.seq_len, 0.0, 1.0)
    vals = (rng.random((batch, spec.seq_len)) < probs[:, None]).astype(np.uint8)
    return vals, theta


# ---------------------------------------------------------------------------
# Cayley percolation geometry
# ---------------------------------------------------------------------------


@dataclass
class CayleyLayout:
    """Precomputed geometry for the clique-count statistic at one window."""

    group: groups.MetricGroup
    window_index: int
    d: int
    region_radius: int
    vertices: list
    vertex_index: dict
    edges: list  # canonical (v, u) pairs with both endpoints in the region
    clique_offsets: list  # edges of the radius-d clique, as offset pairs from e
    positions: list  # phi in A_n with B(phi, d) inside A_n
    pos_edge_idx: np.ndarray  # (P, |clique_offsets|) indices into `edges`


def _positive_generators(gens):
    return [g for g in gens if g > tuple(-c for c in g)]


def cayley_layout(spec: SimulatorSpec, n: int) -> CayleyLayout:
    spec.checked()
    if spec.variant != "cayley_perc":
        raise DomainError("cayley_layout requires a cayley_perc spec")
    if spec.d is None:
        raise DomainError("clique radius d must be set on the spec")
    group = groups.fin_gen_group(spec.generators)
    d = int(spec.d)
    radius = n + d
    e = groups.identity(group)
    region = sorted(groups.ball(group, e, radius))
    vindex = {v: i for i, v in enumerate(region)}
    gens_pos = _positive_generators(group.generators)

    edges = []
    eindex = {}
    for v in region:
        for g in gens_pos:
            u = tuple(a + b for a, b in zip(v, g))
            if u in vindex:
                eindex[(v, u)] = len(edges)
                edges.append((v, u))

    ball_d = sorted(groups.ball(group, e, d))
    clique_offsets = []
    for a in ball_d:
        for g in gens_pos:
            bvert = tuple(x + y for x, y in zip(a, g))
            if bvert in set(ball_d):
                clique_offsets.append((a, bvert))

    norms = {v: groups.distance(group, e, v) for v in region}
    window = [v for v in region if norms[v] <= n]
    positions = [
        phi
        for phi in window
        if all(norms[tuple(a + b for a, b in zip(phi, delta))] <= n for delta in ball_d)
    ]

    pos_edge_idx = np.empty((len(positions), len(clique_offsets)), dtype=np.int64)
    for i, phi in enumerate(positions):
        for j, (a, bvert) in enumerate(clique_offsets):
            va = tuple(x + y for x, y in zip(phi, a))
            vb = tuple(x + y for x, y in zip(phi, bvert))
            pos_edge_idx[i, j] = eindex[(va, vb)]
    return CayleyLayout(
        group=group,
        window_index=n,
        d=d,
        region_radius=radius,
        vertices=region,
        vertex_index=vindex,
        edges=edges,
        clique_offsets=clique_offsets,
        positions=positions,
        pos_edge_idx=pos_edge_idx,
    )


def batch_cayley_w(layout: CayleyLayout, p: float, batch: int, rng) -> np.ndarray:
    """Clique-count totals W for `batch` independent percolation draws."""
    mask = rng.random((batch, len(layout.edges))) < p
    if layout.pos_edge_idx.size == 0:
        alive = np.ones((batch, len(layout.positions)), dtype=bool)
    else:
        alive = mask[:, layout.pos_edge_idx].all(axis=2)
    return alive.sum(axis=1).astype(np.int64)


def induced_subgraph_edges(group: groups.MetricGroup, d: int) -> int:
    """Number of Cayley edges with both endpoints in the radius-d ball."""
    if group.kind != "fin_gen":
        raise DomainError("induced subgraphs require a finitely generated group")
    if d < 0:
        raise DomainError("d must be >= 0")
    ball_d = groups.ball(group, groups.identity(group), d)
    count = 0
    for v in ball_d:
        for g in _positive_generators(group.generators):
            if tuple(a + b for a, b in zip(v, g)) in ball_d:
                count += 1
    return count


# ---------------------------------------------------------------------------
# Single-sample API
# ---------------------------------------------------------------------------


def sample_window(spec: SimulatorSpec, radius: int, seed, window_index: int | None = None) -> FieldSample:
    """One realization covering the radius-`radius` region.

    For percolation, `radius` must equal window_index + d (the window padded
    by the clique radius); `window_index` defaults to radius - d.
    """
    spec = spec.checked()
    rng, record = _as_rng(seed)
    if spec.variant in ("iid_field", "mdep_field", "ising_field"):
        vals = batch_grid_values(spec, radius, 1, rng)[0]
        return FieldSample(spec=spec, region_radius=radius, seed_record=record, values=vals)
    if spec.variant == "exch_seq":
        vals, theta = batch_exch_values(spec, 1, rng)
        return FieldSample(
            spec=spec,
            region_radius=spec.seq_len,
            seed_record=record,
            values=vals[0],
            latent_value=float(theta[0]),
        )
    if spec.variant == "cayley_perc":
        if spec.d is None:
            raise DomainError("clique radius d must be set on the spec")
        n = radius - spec.d if window_index is None else int(window_index)
        if n < 1 or n + spec.d > radius:
            raise DomainError("radius must cover the window expanded by d")
        layout = cayley_layout(spec, n)
        mask = rng.random(len(layout.edges)) < spec.p
        return FieldSample(
            spec=spec,
            region_radius=radius,
            seed_record=record,
            layout=layout,
            edge_mask=mask,
            window_index=n,
        )
    # planar_poisson: points on [0, side]^2 with side = radius
    side = float(radius)
    n_points = rng.poisson(spec.intensity * side * side)
    points = rng.random((n_points, 2)) * side
    n_centers = rng.poisson(spec.kappa)
    centers = rng.random((n_centers, 2)) * side
    return FieldSample(
        spec=spec,
        region_radius=radius,
        seed_record=record,
        points=points,
        centers=centers,
        side=side,
    )


def eval_f(sample: FieldSample, phi) -> int:
    """Evaluate the binary statistic at one group element (or index/point)."""
    spec = sample.spec
    if spec.variant in ("iid_field", "mdep_field", "ising_field"):
        if np.isscalar(phi):
            phi = (int(phi),)
        phi = tuple(int(c) for c in phi)
        if len(phi) != spec.m:
            raise RegionError(f"expected a length-{spec.m} coordinate, got {phi!r}")
        R = sample.region_radius
        if any(abs(c) > R for c in phi):
            raise RegionError(f"{phi!r} lies outside the sampled radius {R}")
        idx = tuple(c + R for c in phi)
        return int(sample.values[idx])
    if spec.variant == "exch_seq":
        t = int(phi)
        if not 1 <= t <= spec.seq_len:
            raise RegionError(f"index {t} outside 1..{spec.seq_len}")
        return int(sample.values[t - 1])
    if spec.variant == "cayley_perc":
        layout = sample.layout
        phi = tuple(int(c) for c in phi)
        e = groups.identity(layout.group)
        norms = layout.vertex_index
        # region check: every clique vertex must be inside the sampled region
        for a, bvert in layout.clique_offsets:
            for off in (a, bvert):
                v = tuple(x + y for x, y in zip(phi, off))
                if v not in norms:
                    raise RegionError(f"{phi!r} needs vertices outside the sampled region")
        n = sample.window_index
        ball_d = groups.ball(layout.group, e, layout.d)
        for off in ball_d:
            v = tuple(x + y for x, y in zip(phi, off))
            if groups.distance(layout.group, e, v) > n:
                return 0  # the d-ball around phi leaves the window
        edge_index = _edge_cache(sample)
        for a, bvert in layout.clique_offsets:
            va = tuple(x + y for x, y in zip(phi, a))
            vb = tuple(x + y for x, y in zip(phi, bvert))
            if not sample.edge_mask[edge_index[(va, vb)]]:
                return 0
        return 1
    # planar
    x = np.asarray(phi, dtype=float)
    if x.shape != (2,) or np.any(x < 0) or np.any(x > sample.side):
        raise RegionError(f"point {phi!r} outside [0, {sample.side}]^2")
    if sample.centers.size == 0:
        return 0
    dists = np.sqrt(((sample.centers - x[None, :]) ** 2).sum(axis=1))
    return int(dists.min() <= spec.delta)


def _edge_cache(sample: FieldSample) -> dict:
    cache = getattr(sample, "_edge_index_cache", None)
    if cache is None:
        cache = {edge: i for i, edge in enumerate(sample.layout.edges)}
        sample._edge_index_cache = cache
    return cache


def latent(sample: FieldSample) -> float | None:
    """The realized latent mixture parameter, if the variant has one."""
    return sample.latent_value


def with_params(spec: SimulatorSpec, **kwargs) -> SimulatorSpec:
    return replace(spec, **kwargs)
