"""Experiment configuration: a single JSON document, validated strictly."""

import json
import math
from dataclasses import asdict, dataclass, field

from . import lds


class ConfigError(ValueError):
    """Schema or range violation; ``field`` names the offending key."""

    def __init__(self, field, message):
        self.field = field
        super().__init__(f"{field}: {message}")


_TOP_KEYS = {
    "dims", "kappa", "gamma", "k", "T", "T0", "H", "eta", "delta", "W", "G",
    "disturbance", "cost", "seed", "explore_scale", "kappa_c", "comparator",
    "sweep", "verify",
}
_COMPARATOR_KEYS = {"restarts", "max_sweeps"}
_SWEEP_KEYS = {"T", "T0", "seeds"}
_VERIFY_KEYS = {"instances", "seeds", "T", "T0_grid"}


@dataclass
class ExperimentConfig:
    d_x: int
    d_u: int
    kappa: float
    gamma: float
    k: int
    T: int
    T0: int
    H: int
    eta: float
    delta: float
    W: float
    G: float
    seed: int
    explore_scale: float
    kappa_c: float
    disturbance: dict = field(default_factory=lambda: {"kind": "sinusoid"})
    cost: dict = field(default_factory=lambda: {"kind": "quadratic"})
    comparator: dict = field(default_factory=lambda: {"restarts": 20, "max_sweeps": 20})
    sweep: dict = field(default_factory=dict)
    verify: dict = field(default_factory=dict)
    auto: dict = field(default_factory=dict)

    def echo(self):
        return asdict(self)

    def make_disturbance(self):
        params = {k: v for k, v in self.disturbance.items() if k != "kind"}
        return lds.make_disturbance(self.disturbance["kind"], self.W, self.d_x, params, self.seed)

    def make_costs(self):
        params = {k: v for k, v in self.cost.items() if k != "kind"}
        return lds.make_costs(self.cost["kind"], self.d_x, self.d_u, params)

    def make_instance(self):
        return lds.synth_stable_instance(self.d_x, self.d_u, self.kappa, self.gamma,
                                         self.seed, k=self.k, kappa_c=self.kappa_c)

    def with_T(self, T, seed=None, T0=None):
        """A copy at horizon ``T`` with auto-resolved fields recomputed."""
        raw = dict(self.raw_overrides())
        raw["T"] = T
        if seed is not None:
            raw["seed"] = seed
        if T0 is not None:
            raw["T0"] = T0
        return from_dict(raw)

    def raw_overrides(self):
        out = {
            "dims": [self.d_x, self.d_u], "kappa": self.kappa, "gamma": self.gamma,
            "k": self.k, "T": self.T, "delta": self.delta, "W": self.W, "G": self.G,
            "seed": self.seed, "kappa_c": self.kappa_c,
            "explore_scale": "W" if self.auto.get("explore_scale") == "W" else self.explore_scale,
            "disturbance": dict(self.disturbance), "cost": dict(self.cost),
            "comparator": dict(self.comparator), "sweep": dict(self.sweep),
            "verify": dict(self.verify),
        }
        for key in ("T0", "H", "eta"):
            out[key] = "auto" if key in self.auto else getattr(self, key)
        return out


def auto_T0(T, delta, k):
    return max(math.ceil(T ** (2.0 / 3.0) * math.log(1.0 / delta)), k + 10)


def _number(raw, key, default=None, kind=float, lo=None, hi=None, lo_open=False, hi_open=False):
    if key not in raw:
        if default is None:
            raise ConfigError(key, "required field missing")
        return default
    val = raw[key]
    if isinstance(val, bool) or not isinstance(val, (int, float)):
        raise ConfigError(key, f"expected a number, got {val!r}")
    if kind is int and int(val) != val:
        raise ConfigError(key, f"expected an integer, got {val!r}")
    val = kind(val)
    if not math.isfinite(val):
        raise ConfigError(key, "must be finite")
    if lo is not None and (val < lo or (lo_open and val == lo)):
        raise ConfigError(key, f"must be {'>' if lo_open else '>='} {lo}, got {val}")
    if hi is not None and (val > hi or (hi_open and val == hi)):
        raise ConfigError(key, f"must be {'<' if hi_open else '<='} {hi}, got {val}")
    return val


def _section(raw, key, allowed, default):
    sec = raw.get(key, default)
    if not isinstance(sec, dict):
        raise ConfigError(key, "expected an object")
    unknown = set(sec) - allowed
    if unknown:
        raise ConfigError(f"{key}.{sorted(unknown)[0]}", "unknown key")
    return dict(sec)


def from_dict(raw):
    """Validate a raw mapping and resolve the ``"auto"`` rules."""
    if not isinstance(raw, dict):
        raise ConfigError("<root>", "config must be a JSON object")
    unknown = set(raw) - _TOP_KEYS
    if unknown:
        raise ConfigError(sorted(unknown)[0], "unknown key")

    dims = raw.get("dims")
    if (not isinstance(dims, list) or len(dims) != 2
            or not all(isinstance(d, int) and not isinstance(d, bool) and d >= 1 for d in dims)):
        raise ConfigError("dims", "expected [d_x, d_u] with positive integers")
    d_x, d_u = dims
    kappa = _number(raw, "kappa", lo=1.0)
    gamma = _number(raw, "gamma", lo=0.0, hi=1.0, lo_open=True, hi_open=True)
    k = _number(raw, "k", d_x, int, lo=1)
    T = _number(raw, "T", kind=int, lo=2)
    delta = _number(raw, "delta", 0.1, lo=0.0, hi=1.0, lo_open=True, hi_open=True)
    W = _number(raw, "W", 1.0, lo=0.0)
    seed = _number(raw, "seed", 0, int, lo=0)
    kappa_c = _number(raw, "kappa_c", kappa, lo=0.0, lo_open=True)

    disturbance = _section(raw, "disturbance", {"kind", "period", "direction", "sigma"},
                           {"kind": "sinusoid"})
    if disturbance.get("kind") not in lds.DISTURBANCE_KINDS:
        raise ConfigError("disturbance.kind", f"must be one of {lds.DISTURBANCE_KINDS}")
    cost = _section(raw, "cost", {"kind", "Q", "R", "period", "amplitude", "x_ref", "u_ref", "D"},
                    {"kind": "quadratic"})
    if cost.get("kind") not in lds.COST_KINDS:
        raise ConfigError("cost.kind", f"must be one of {lds.COST_KINDS}")
    try:
        costs = lds.make_costs(cost["kind"], d_x, d_u,
                               {k_: v for k_, v in cost.items() if k_ != "kind"})
    except (ValueError, TypeError) as exc:
        raise ConfigError("cost", str(exc)) from None
    try:
        lds.make_disturbance(disturbance["kind"], W, d_x,
                             {k_: v for k_, v in disturbance.items() if k_ != "kind"})
    except (ValueError, TypeError) as exc:
        raise ConfigError("disturbance", str(exc)) from None
    G = _number(raw, "G", max(costs.G, 1.0), lo=1.0)
    if costs.G > G * (1 + 1e-12):
        raise ConfigError("G", f"cost gradient constant {costs.G:.6g} exceeds G={G}")

    auto = {}
    if raw.get("T0", "auto") == "auto":
        T0 = auto_T0(T, delta, k)
        auto["T0"] = "ceil(T^(2/3) ln(1/delta)), clamped to >= k+10"
    else:
        T0 = _number(raw, "T0", kind=int, lo=1)
    if not T0 > k:
        raise ConfigError("T0", f"must exceed k={k}, got {T0}")
    if not T > T0 + 1:
        raise ConfigError("T", f"must exceed T0+1={T0 + 1}, got {T}")
    if raw.get("H", "auto") == "auto":
        H = max(1, math.ceil(math.log(kappa**2 * T) / gamma))
        auto["H"] = "ceil(ln(kappa^2 T) / gamma)"
    else:
        H = _number(raw, "H", kind=int, lo=1)
    Wn = max(W, 1.0)
    if raw.get("eta", "auto") == "auto":
        eta = gamma / (kappa**3 * G * Wn * math.sqrt(T))
        auto["eta"] = "gamma / (kappa^3 G max(W,1) sqrt(T))"
    else:
        eta = _number(raw, "eta", lo=0.0)

    scale_raw = raw.get("explore_scale", 1)
    if scale_raw == "W":
        explore_scale = Wn
        auto["explore_scale"] = "W"
    elif scale_raw in (1, 1.0) and not isinstance(scale_raw, bool):
        explore_scale = 1.0
    else:
        raise ConfigError("explore_scale", "must be 1 or \"W\"")

    comparator = _section(raw, "comparator", _COMPARATOR_KEYS, {})
    comparator = {"restarts": int(comparator.get("restarts", 20)),
                  "max_sweeps": int(comparator.get("max_sweeps", 20))}
    if comparator["restarts"] < 1 or comparator["max_sweeps"] < 0:
        raise ConfigError("comparator", "restarts must be >= 1 and max_sweeps >= 0")
    sweep = _section(raw, "sweep", _SWEEP_KEYS, {})
    for key in ("T", "T0", "seeds"):
        if key in sweep and (not isinstance(sweep[key], list)
                             or not all(isinstance(v, int) and not isinstance(v, bool) and v >= 0
                                        for v in sweep[key])):
            raise ConfigError(f"sweep.{key}", "expected a list of nonnegative integers")
    verify = _section(raw, "verify", _VERIFY_KEYS, {})

    return ExperimentConfig(
        d_x=d_x, d_u=d_u, kappa=kappa, gamma=gamma, k=k, T=T, T0=T0, H=H, eta=eta,
        delta=delta, W=W, G=G, seed=seed, explore_scale=explore_scale, kappa_c=kappa_c,
        disturbance=disturbance, cost=cost, comparator=comparator, sweep=sweep,
        verify=verify, auto=auto)


def parse_config(path):
    try:
        with open(path, encoding="utf-8") as fh:
            raw = json.load(fh)
    except OSError as exc:
        raise ConfigError("--config", f"cannot read {path}: {exc.strerror}") from None
    except json.JSONDecodeError as exc:
        raise ConfigError("--config", f"invalid JSON: {exc.msg} at line {exc.lineno}") from None
    return from_dict(raw)
