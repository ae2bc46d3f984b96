"""Experiment configuration: JSON schema, validation, canonical hashing.

A configuration is one JSON document.  Site-rate parameters may be given
either as plain numbers or as ``{"kind": "rate_over_window", "value": c}``,
which resolves to c / |A_n| per window (the rare-event scaling the limit
theory assumes).
"""

from __future__ import annotations

import hashlib
import json
import math
from dataclasses import dataclass, field

from amenpois.engine import JDist, RandomizedSpec
from amenpois.errors import ConfigError
from amenpois.simulators import SimulatorSpec, ising_external_field, with_params

MODES = ("deterministic", "randomized")
MIXING_KINDS = ("zero", "range", "geometric")


def canonical_json(obj) -> str:
    return json.dumps(obj, sort_keys=True, separators=(",", ":"))


def config_hash(raw: dict) -> str:
    return hashlib.sha256(canonical_json(raw).encode()).hexdigest()[:16]


def _is_rate_rule(v) -> bool:
    return isinstance(v, dict) and v.get("kind") == "rate_over_window"


@dataclass
class ExperimentConfig:
    raw: dict
    scenario: str
    simulator: dict
    n_grid: list[int]
    b_n: list[int]  # resolved per n
    m_reps: int
    k_max: int
    master_seed: int
    mode: str
    mixing: dict
    bound: dict
    batch_size: int
    randomized: RandomizedSpec | None = None
    group_spec: dict = field(default_factory=dict)

    @property
    def hash(self) -> str:
        return config_hash(self.raw)

    def b_for(self, n_index: int) -> int:
        return self.b_n[n_index]

    def window_size(self, n: int) -> int:
        variant = self.simulator["variant"]
        if variant in ("iid_field", "mdep_field", "ising_field"):
            return (2 * n + 1) ** int(self.simulator.get("m", 1))
        if variant == "exch_seq":
            return n
        if variant == "cayley_perc":
            from amenpois import groups

            g = groups.fin_gen_group(self.simulator["generators"])
            return groups.window_size(g, n)
        raise ConfigError([("simulator.variant", f"no window size for {variant!r}")])

    def spec_for(self, n: int) -> SimulatorSpec:
        """Concrete simulator parameters at window index n."""
        sim = dict(self.simulator)
        variant = sim["variant"]
        a_n = self.window_size(n)
        if variant == "iid_field":
            p = sim["p"]
            if _is_rate_rule(p):
                p = p["value"] / a_n
            return SimulatorSpec(variant=variant, m=int(sim.get("m", 1)), p=float(p))
        if variant == "mdep_field":
            w = int(sim["window_w"])
            tau = sim.get("tau")
            if tau is None:
                rate = sim["rate"]
                target = (rate["value"] if _is_rate_rule(rate) else float(rate)) / a_n
                tau = 1.0 - target ** (1.0 / w)
            return SimulatorSpec(
                variant=variant, m=int(sim.get("m", 1)), window_w=w, tau=float(tau)
            )
        if variant == "ising_field":
            m = int(sim.get("m", 1))
            beta = float(sim["beta"])
            ext = sim.get("ext")
            if ext is None:
                rate = sim["rate"]
                target = (rate["value"] if _is_rate_rule(rate) else float(rate)) / a_n
                ext = ising_external_field(beta, m, target)
            return SimulatorSpec(variant=variant, m=m, beta=beta, ext=float(ext))
        if variant == "exch_seq":
            mixture = tuple((float(t), float(w)) for t, w in sim["mixture"])
            return SimulatorSpec(variant=variant, mixture=mixture, seq_len=int(n))
        if variant == "cayley_perc":
            gens = tuple(tuple(int(c) for c in g) for g in sim["generators"])
            d = sim.get("d")
            return SimulatorSpec(
                variant=variant,
                generators=gens,
                p=float(sim["p"]),
                d=None if d is None else int(d),
            )
        raise ConfigError([("simulator.variant", f"unsupported variant {variant!r}")])

    def mixing_coefficient(self):
        from amenpois.engine import geometric_mixing, range_mixing, zero_mixing

        kind = self.mixing.get("kind", "zero")
        if kind == "zero":
            return zero_mixing
        if kind == "range":
            return range_mixing(int(self.mixing["range"]))
        return geometric_mixing(float(self.mixing["rho"]))


def _validate_simulator(sim, n_grid, errors):
    if not isinstance(sim, dict) or "variant" not in sim:
        errors.append(("simulator", "must be an object with a 'variant'"))
        return
    variant = sim.get("variant")
    concrete = dict(sim)
    # resolve rate rules against the smallest window so bad magnitudes surface
    n_min = min(n_grid) if n_grid else 1
    try:
        probe = ExperimentConfig(
            raw={},
            scenario="probe",
            simulator=sim,
            n_grid=n_grid or [1],
            b_n=[1],
            m_reps=100,
            k_max=1,
            master_seed=0,
            mode="deterministic",
            mixing={"kind": "zero"},
            bound={"enabled": False},
            batch_size=1,
        )
        spec = probe.spec_for(n_min)
    except ConfigError as exc:
        errors.extend(exc.errors)
        return
    except (KeyError, TypeError, ValueError) as exc:
        errors.append(("simulator", f"cannot resolve parameters: {exc}"))
        return
    for fld, msg in spec.validate():
        errors.append((f"simulator.{fld}", msg))
    if variant == "exch_seq" and n_grid and min(n_grid) < 1:
        errors.append(("n_grid", "sequence lengths must be >= 1"))
    del concrete


def parse_config(raw: dict) -> ExperimentConfig:
    """Validate a raw JSON document, collecting every offending field."""
    errors: list[tuple[str, str]] = []
    if not isinstance(raw, dict):
        raise ConfigError([("", "configuration must be a JSON object")])

    scenario = raw.get("scenario")
    if not isinstance(scenario, str) or not scenario:
        errors.append(("scenario", "must be a nonempty string"))
        scenario = "unnamed"

    n_grid = raw.get("n_grid")
    if (
        not isinstance(n_grid, list)
        or not n_grid
        or not all(isinstance(n, int) and n >= 1 for n in n_grid)
        or any(b <= a for a, b in zip(n_grid, n_grid[1:]))
    ):
        errors.append(("n_grid", "must be a strictly increasing list of positive integers"))
        n_grid = [int(n) for n in n_grid or [1] if isinstance(n, int) and n >= 1] or [1]

    m_reps = raw.get("m_reps")
    if not isinstance(m_reps, int) or m_reps < 100:
        errors.append(("m_reps", "must be an integer >= 100"))
        m_reps = max(int(m_reps or 0), 100)

    k_max = raw.get("k_max", 6)
    if not isinstance(k_max, int) or k_max < 1:
        errors.append(("k_max", "must be an integer >= 1"))
        k_max = 1

    master_seed = raw.get("master_seed")
    if not isinstance(master_seed, int):
        errors.append(("master_seed", "must be an integer"))
        master_seed = 0

    mode = raw.get("mode", "deterministic")
    if mode not in MODES:
        errors.append(("mode", f"must be one of {MODES}"))
        mode = "deterministic"

    b_raw = raw.get("b_n", 1)
    if isinstance(b_raw, int):
        b_list = [b_raw] * len(n_grid)
    elif isinstance(b_raw, list) and len(b_raw) == len(n_grid):
        b_list = [int(x) for x in b_raw]
    else:
        errors.append(("b_n", "must be an integer or a list matching n_grid"))
        b_list = [1] * len(n_grid)
    if any(b < 1 for b in b_list):
        errors.append(("b_n", "ball radii must be >= 1"))
        b_list = [max(b, 1) for b in b_list]

    mixing = raw.get("mixing", {"kind": "zero"})
    if not isinstance(mixing, dict) or mixing.get("kind", "zero") not in MIXING_KINDS:
        errors.append(("mixing.kind", f"must be one of {MIXING_KINDS}"))
        mixing = {"kind": "zero"}
    elif mixing.get("kind") == "range" and not isinstance(mixing.get("range"), int):
        errors.append(("mixing.range", "must be an integer dependence range"))
        mixing = {"kind": "zero"}
    elif mixing.get("kind") == "geometric":
        rho = mixing.get("rho")
        if not isinstance(rho, (int, float)) or not 0.0 < rho < 1.0:
            errors.append(("mixing.rho", "must be a number in (0, 1)"))
            mixing = {"kind": "zero"}

    bound = raw.get("bound", {"enabled": False})
    if not isinstance(bound, dict):
        errors.append(("bound", "must be an object"))
        bound = {"enabled": False}
    else:
        p_idx = bound.get("p", 2.0)
        if bound.get("enabled") and (not isinstance(p_idx, (int, float)) or p_idx < 1.0):
            errors.append(("bound.p", "moment index must be >= 1"))
        cutoff = bound.get("cutoff", 40)
        if bound.get("enabled") and (not isinstance(cutoff, int) or cutoff < 1):
            errors.append(("bound.cutoff", "must be a positive integer"))

    batch_size = raw.get("batch_size", 20_000)
    if not isinstance(batch_size, int) or batch_size < 1:
        errors.append(("batch_size", "must be a positive integer"))
        batch_size = 20_000

    randomized = None
    if mode == "randomized":
        rnd = raw.get("randomized")
        if not isinstance(rnd, dict):
            errors.append(("randomized", "randomized mode requires a 'randomized' object"))
        else:
            jd = rnd.get("j_dist", {})
            try:
                randomized = RandomizedSpec(
                    j_dist=JDist(
                        kind=jd.get("kind", "fixed"),
                        value=float(jd.get("value", 1.0)),
                        times_window=bool(jd.get("times_window", False)),
                    ),
                    b_n=int(rnd.get("b_n", b_list[0])),
                    alpha=float(rnd.get("alpha", 0.5)),
                    beta=float(rnd.get("beta", 0.5)),
                    nu=rnd.get("nu", "uniform"),
                    spread_const=float(rnd.get("spread_const", 1.0)),
                )
            except (TypeError, ValueError) as exc:
                errors.append(("randomized", f"cannot parse: {exc}"))
            if randomized is not None:
                for fld, msg in randomized.validate():
                    errors.append((f"randomized.{fld}", msg))

    sim = raw.get("simulator")
    _validate_simulator(sim if isinstance(sim, dict) else {}, n_grid, errors)

    if errors:
        raise ConfigError(errors)

    return ExperimentConfig(
        raw=raw,
        scenario=scenario,
        simulator=dict(sim),
        n_grid=list(n_grid),
        b_n=b_list,
        m_reps=m_reps,
        k_max=k_max,
        master_seed=master_seed,
        mode=mode,
        mixing=dict(mixing),
        bound=dict(bound),
        batch_size=batch_size,
        randomized=randomized,
    )


def load_config(path, seed_override: int | None = None) -> ExperimentConfig:
    with open(path, "r", encoding="utf-8") as fh:
        raw = json.load(fh)
    if seed_override is not None:
        raw = dict(raw)
        raw["master_seed"] = int(seed_override)
    return parse_config(raw)
