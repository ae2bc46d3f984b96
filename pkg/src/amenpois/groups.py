"""Discrete metric groups, balls, shells, and averaging windows.

Three families are supported:

* ``grid(r)``: the lattice Z^r under addition with the sup metric; balls are
  hypercubes ``{-t, ..., t}^r``.
* ``fin_gen``: a finitely generated subgroup of Z^r given by a symmetric set
  of integer generators, with the word metric (Cayley-graph distance,
  computed by breadth-first search under a node budget).
* ``sym(n_max)``: permutations of ``{1..n_max}`` with the inverse-prefix
  metric.  This family is enumerable up to n_max = 8.

Elements are canonical tuples: an integer vector for grid/fin_gen, the image
tuple ``(g(1), ..., g(n_max))`` for sym.  Two elements are equal iff their
tuples are equal.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass, field
from itertools import permutations, product
from math import floor, factorial

from amenpois.errors import DomainError, ResourceBudgetError

Element = tuple  # canonical form; see module docstring

DEFAULT_NODE_BUDGET = 10**6


@dataclass(frozen=True)
class MetricGroup:
    """A discrete group together with an invariant metric.

    The sup and word metrics are left-invariant; the inverse-prefix metric on
    the symmetric family is right-invariant (both are the metrics the theory
    uses for these families).
    """

    kind: str  # "grid" | "fin_gen" | "sym"
    r: int = 0
    generators: tuple[Element, ...] = ()
    n_max: int = 0
    metric: str = "sup"
    node_budget: int = DEFAULT_NODE_BUDGET

    def __post_init__(self):
        if self.kind not in ("grid", "fin_gen", "sym"):
            raise DomainError(f"unknown group kind {self.kind!r}")

    @property
    def is_left_invariant_metric(self) -> bool:
        return self.kind in ("grid", "fin_gen")


def grid_group(r: int) -> MetricGroup:
    """Z^r with componentwise addition and the sup metric."""
    if r < 1:
        raise DomainError("grid dimension must be >= 1")
    return MetricGroup(kind="grid", r=int(r), metric="sup")


def fin_gen_group(generators, node_budget: int = DEFAULT_NODE_BUDGET) -> MetricGroup:
    """Subgroup of Z^r generated by a symmetric set of integer vectors."""
    gens = tuple(sorted({tuple(int(c) for c in g) for g in generators}))
    if not gens:
        raise DomainError("generator set must be nonempty")
    r = len(gens[0])
    for g in gens:
        if len(g) != r:
            raise DomainError("generators must share one dimension")
        if all(c == 0 for c in g):
            raise DomainError("identity must not be a generator")
        if tuple(-c for c in g) not in gens:
            raise DomainError(f"generating set is not symmetric: missing inverse of {g}")
    return MetricGroup(
        kind="fin_gen", r=r, generators=gens, metric="word", node_budget=int(node_budget)
    )


def sym_group(n_max: int) -> MetricGroup:
    """Permutations of {1..n_max} with the inverse-prefix metric (n_max <= 8)."""
    if not 1 <= n_max <= 8:
        raise DomainError("sym family is supported for 1 <= n_max <= 8")
    return MetricGroup(kind="sym", n_max=int(n_max), metric="inverse_prefix")


def identity(group: MetricGroup) -> Element:
    if group.kind == "sym":
        return tuple(range(1, group.n_max + 1))
    return (0,) * group.r


def _check_member(group: MetricGroup, g) -> Element:
    g = tuple(g)
    if group.kind == "sym":
        if sorted(g) != list(range(1, group.n_max + 1)):
            raise DomainError(f"{g!r} is not a permutation of 1..{group.n_max}")
        return g
    if len(g) != group.r or not all(isinstance(c, (int,)) or float(c).is_integer() for c in g):
        raise DomainError(f"{g!r} is not an integer vector of length {group.r}")
    return tuple(int(c) for c in g)


def compose(group: MetricGroup, g: Element, h: Element) -> Element:
    """Group operation g·h in canonical form."""
    g = _check_member(group, g)
    h = _check_member(group, h)
    if group.kind == "sym":
        # (g·h)(i) = g(h(i))
        return tuple(g[h[i] - 1] for i in range(group.n_max))
    return tuple(a + b for a, b in zip(g, h))


def inverse(group: MetricGroup, g: Element) -> Element:
    g = _check_member(group, g)
    if group.kind == "sym":
        inv = [0] * group.n_max
        for i, gi in enumerate(g, start=1):
            inv[gi - 1] = i
        return tuple(inv)
    return tuple(-c for c in g)


# ---------------------------------------------------------------------------
# Metrics and balls
# ---------------------------------------------------------------------------

_word_layer_cache: dict = {}


def _word_layers(group: MetricGroup, radius: int) -> list[set]:
    """BFS layers of the Cayley graph from the identity, layers[i] = sphere of radius i."""
    key = (group.generators, group.r, group.node_budget)
    layers, seen = _word_layer_cache.get(key, (None, None))
    if layers is None:
        e = (0,) * group.r
        layers, seen = [{e}], {e}
        _word_layer_cache[key] = (layers, seen)
    while len(layers) <= radius:
        frontier = set()
        for v in layers[-1]:
            for g in group.generators:
                u = tuple(a + b for a, b in zip(v, g))
                if u not in seen:
                    seen.add(u)
                    frontier.add(u)
                    if len(seen) > group.node_budget:
                        raise ResourceBudgetError(
                            f"word-metric BFS exceeded node budget {group.node_budget}"
                        )
        if not frontier:
            break  # finite group generated; nothing beyond this radius
        layers.append(frontier)
    return layers


def _word_distance(group: MetricGroup, delta: Element) -> int:
    """Word length of `delta`, by expanding BFS layers until it is found."""
    if all(c == 0 for c in delta):
        return 0
    radius = 1
    while True:
        layers = _word_layers(group, radius)
        if radius < len(layers) and delta in layers[radius]:
            return radius
        if radius >= len(layers):  # graph exhausted without reaching delta
            raise ResourceBudgetError(f"{delta!r} not reachable from the generators")
        radius += 1


def distance(group: MetricGroup, g: Element, h: Element) -> float:
    """Invariant metric d(g, h)."""
    g = _check_member(group, g)
    h = _check_member(group, h)
    if group.kind == "grid":
        return float(max(abs(a - b) for a, b in zip(g, h)))
    if group.kind == "fin_gen":
        delta = tuple(b - a for a, b in zip(g, h))
        return float(_word_distance(group, delta))
    # inverse-prefix: largest point on which g^-1 and h^-1 disagree
    gi = inverse(group, g)
    hi = inverse(group, h)
    worst = 0
    for i in range(group.n_max, 0, -1):
        if gi[i - 1] != hi[i - 1]:
            worst = i
            break
    return float(worst)


def ball(group: MetricGroup, center: Element, t: float) -> frozenset:
    """Closed metric ball B_t(center); radii are floored for integer metrics."""
    if t < 0:
        raise DomainError("radius must be nonnegative")
    center = _check_member(group, center)
    rad = int(floor(t))
    if group.kind == "grid":
        ranges = [range(c - rad, c + rad + 1) for c in center]
        return frozenset(product(*ranges))
    if group.kind == "fin_gen":
        if (2 * rad + 1) ** group.r > group.node_budget * 4:
            raise ResourceBudgetError("ball radius exceeds enumeration budget")
        layers = _word_layers(group, rad)
        # B_t(c) = c · B_t(e): left translation of the identity ball.
        out = set()
        for layer in layers[: rad + 1]:
            for v in layer:
                out.add(tuple(a + b for a, b in zip(center, v)))
        return frozenset(out)
    # sym: enumerate the whole truncation and filter
    elements = [tuple(p) for p in permutations(range(1, group.n_max + 1))]
    return frozenset(x for x in elements if distance(group, center, x) <= rad)


@dataclass(frozen=True)
class ShellTable:
    """Ball cardinalities |B_i| and shell cardinalities |B_{i+1} \\ B_i|."""

    r_max: int
    ball_sizes: tuple[int, ...]  # |B_i| for i = 0..r_max
    shell_sizes: tuple[int, ...]  # |B_{i+1}| - |B_i| for i = 0..r_max-1

    def __post_init__(self):
        if len(self.ball_sizes) != self.r_max + 1:
            raise DomainError("ball_sizes must have r_max + 1 entries")
        if len(self.shell_sizes) != self.r_max:
            raise DomainError("shell_sizes must have r_max entries")
        if any(s < 0 for s in self.shell_sizes):
            raise DomainError("shell sizes must be nonnegative")

    def ball(self, i: int) -> int:
        if not 0 <= i <= self.r_max:
            raise DomainError(f"ball size |B_{i}| not tabulated (r_max={self.r_max})")
        return self.ball_sizes[i]

    def shell(self, i: int) -> int:
        if not 0 <= i < self.r_max:
            raise DomainError(f"shell size at {i} not tabulated (r_max={self.r_max})")
        return self.shell_sizes[i]


def shell_table(group: MetricGroup, r_max: int) -> ShellTable:
    """Tabulate |B_i| for i <= r_max and the shell sizes between them."""
    if r_max < 1:
        raise DomainError("r_max must be >= 1")
    if group.kind == "grid":
        balls = [(2 * i + 1) ** group.r for i in range(r_max + 1)]
    elif group.kind == "fin_gen":
        layers = _word_layers(group, r_max)
        sizes = [len(layer) for layer in layers]
        sizes += [0] * (r_max + 1 - len(sizes))
        balls, acc = [], 0
        for s in sizes[: r_max + 1]:
            acc += s
            balls.append(acc)
    else:
        balls = [len(ball(group, identity(group), i)) for i in range(r_max + 1)]
    shells = tuple(balls[i + 1] - balls[i] for i in range(r_max))
    return ShellTable(r_max=r_max, ball_sizes=tuple(balls), shell_sizes=shells)


# ---------------------------------------------------------------------------
# Averaging windows
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class FolnerWindow:
    """One finite averaging window A_n (always contains the identity)."""

    index: int
    elements: frozenset = field(repr=False)
    size: int

    def __post_init__(self):
        if self.size != len(self.elements):
            raise DomainError("window size must equal the element count")


def folner_set(group: MetricGroup, n: int) -> FolnerWindow:
    """The n-th averaging window: metric ball B_n for grid/fin_gen, the
    permutations of {1..n} for the symmetric family."""
    if n < 1:
        raise DomainError("window index must be >= 1")
    if group.kind in ("grid", "fin_gen"):
        elems = ball(group, identity(group), n)
    else:
        if n > group.n_max:
            raise DomainError(f"window index exceeds n_max={group.n_max}")
        if factorial(n) > group.node_budget:
            raise ResourceBudgetError("window exceeds enumeration budget")
        fixed = tuple(range(n + 1, group.n_max + 1))
        elems = frozenset(tuple(p) + fixed for p in permutations(range(1, n + 1)))
    return FolnerWindow(index=int(n), elements=elems, size=len(elems))


def window_size(group: MetricGroup, n: int) -> int:
    """|A_n| without materializing the window (closed forms where available)."""
    if n < 1:
        raise DomainError("window index must be >= 1")
    if group.kind == "grid":
        return (2 * n + 1) ** group.r
    if group.kind == "sym":
        return factorial(min(n, group.n_max))
    return shell_table(group, n).ball(n)


def boundary_defect(group: MetricGroup, n: int, b: int) -> float:
    """Relative boundary mass |A_n B_b \\ A_n| + |A_n \\ A_n B_b| over |A_n|,
    computed by exact set enumeration."""
    if n < 1 or b < 0:
        raise DomainError("need n >= 1 and b >= 0")
    if b == 0:
        return 0.0
    window = folner_set(group, n).elements
    unit_ball = ball(group, identity(group), b)
    if len(window) * len(unit_ball) > group.node_budget * 10:
        raise ResourceBudgetError("set product exceeds enumeration budget")
    prod = set()
    for a in window:
        for g in unit_ball:
            prod.add(compose(group, a, g))
    sym_diff = prod.symmetric_difference(window)
    return len(sym_diff) / len(window)
