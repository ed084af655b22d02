"""Scenario files: hand-editable TOML describing one experiment."""
from __future__ import annotations

import math
import re
from dataclasses import dataclass, field, replace
from importlib import resources
from pathlib import Path

try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib

from .engine import Empirical, EpidemicParams, Exponential, Fixed, Gamma
from .reduced import ReducedParams
from .size_dist import DistributionError, SizeDistribution, default_household, default_workplace


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class Scenario:
    name: str
    K: int = 10000
    pi_H: SizeDistribution = field(default_factory=default_household)
    pi_W: SizeDistribution = field(default_factory=default_workplace)
    beta_G: float = 0.125
    lambda_H: float = 1.5
    lambda_W: float = 0.00115
    gamma: float = 0.125
    nu: object = None
    eps: float = 0.005
    single_seed: bool = False
    T: float | None = None  # None: derived from the reduced model
    replicates: int = 1
    seed: int = 0
    labels: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.nu is None:
            object.__setattr__(self, "nu", Exponential(self.gamma))

    @property
    def epidemic_params(self) -> EpidemicParams:
        return EpidemicParams(self.beta_G, self.lambda_H, self.lambda_W, self.nu)

    @property
    def reduced_params(self) -> ReducedParams:
        if not isinstance(self.nu, Exponential):
            raise ConfigError(
                "the reduced model requires an exponential infectious period "
                f"(got {type(self.nu).__name__})")
        return ReducedParams(self.beta_G, self.lambda_H, self.lambda_W, self.nu.rate,
                             self.pi_H, self.pi_W)

    def with_(self, **kw) -> "Scenario":
        return replace(self, **kw)


def _line_of(text: str, key: str) -> int | None:
    pat = re.compile(rf"^\s*{re.escape(key)}\s*=")
    for n, line in enumerate(text.splitlines(), start=1):
        if pat.match(line):
            return n
    return None


def _fail(text, key, msg):
    line = _line_of(text, key)
    where = f"line {line}: " if line else ""
    raise ConfigError(f"{where}{key}: {msg}")


def _dist(text, key, raw, default):
    if raw is None:
        return default()
    if isinstance(raw, str):
        if raw == "default":
            return default()
        _fail(text, key, f"unknown distribution {raw!r}")
    if not isinstance(raw, dict):
        _fail(text, key, "expected a table of size = probability pairs")
    try:
        if raw.get("default") is True:
            d = default()
            if "n_max" in raw:
                d = d.truncate(int(raw["n_max"]))
            return d
        return SizeDistribution.from_mapping({int(k): float(v) for k, v in raw.items()})
    except (ValueError, DistributionError) as exc:
        line = None
        for n, l in enumerate(text.splitlines(), start=1):
            if l.strip() == f"[{key}]":
                line = n
        raise ConfigError(f"line {line}: [{key}]: {exc}" if line else f"[{key}]: {exc}") from None


def _nu(text, raw, gamma):
    if raw is None or raw == "exponential":
        return Exponential(gamma)
    if not isinstance(raw, dict) or "kind" not in raw:
        _fail(text, "nu", "expected 'exponential' or a table with a 'kind' key")
    kind = raw["kind"]
    try:
        if kind == "exponential":
            return Exponential(float(raw.get("rate", gamma)))
        if kind == "fixed":
            return Fixed(float(raw["duration"]))
        if kind == "gamma":
            return Gamma(float(raw["shape"]), float(raw["scale"]))
        if kind == "empirical":
            return Empirical(tuple(float(x) for x in raw["samples"]))
    except (KeyError, ValueError) as exc:
        _fail(text, "kind", f"bad infectious-period parameters: {exc}")
    _fail(text, "kind", f"unknown infectious-period kind {kind!r}")


def parse_scenario(text: str, name: str = "scenario") -> Scenario:
    try:
        doc = tomllib.loads(text)
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError(str(exc)) from None
    known = {"name", "K", "pi_H", "pi_W", "beta_G", "lambda_H", "lambda_W", "gamma", "nu",
             "epsilon", "single_seed", "T", "replicates", "seed", "labels"}
    for key in doc:
        if key not in known:
            _fail(text, key, "unknown key")

    def num(key, default, kind=float, lo=None):
        v = doc.get(key, default)
        if isinstance(v, bool) or not isinstance(v, (int, float)):
            _fail(text, key, f"expected a number, got {v!r}")
        v = kind(v)
        if lo is not None and v < lo:
            _fail(text, key, f"must be >= {lo}")
        return v

    gamma = num("gamma", 0.125)
    if not gamma > 0:
        _fail(text, "gamma", "must be positive")
    eps = num("epsilon", 0.005)
    if not 0 <= eps <= 1:
        _fail(text, "epsilon", "must lie in [0, 1]")
    T = doc.get("T", "auto")
    if T == "auto":
        T = None
    elif isinstance(T, (int, float)) and not isinstance(T, bool) and T >= 0:
        T = float(T)
    else:
        _fail(text, "T", "expected a non-negative number or \"auto\"")
    return Scenario(
        name=str(doc.get("name", name)),
        K=num("K", 10000, int, 1),
        pi_H=_dist(text, "pi_H", doc.get("pi_H"), default_household),
        pi_W=_dist(text, "pi_W", doc.get("pi_W"), default_workplace),
        beta_G=num("beta_G", 0.125, lo=0),
        lambda_H=num("lambda_H", 1.5, lo=0),
        lambda_W=num("lambda_W", 0.00115, lo=0),
        gamma=gamma,
        nu=_nu(text, doc.get("nu"), gamma),
        eps=eps,
        single_seed=bool(doc.get("single_seed", False)),
        T=T,
        replicates=num("replicates", 1, int, 1),
        seed=num("seed", 0, int, 0),
        labels=dict(doc.get("labels", {})),
    )


def load_scenario(path) -> Scenario:
    path = Path(path)
    return parse_scenario(path.read_text(), name=path.stem)


def shipped_scenarios() -> list[Scenario]:
    """The ten contact-rate scenarios bundled with the package, in ladder order."""
    files = sorted(p for p in resources.files("hwsir.scenarios").iterdir()
                   if p.name.endswith(".toml"))
    return [parse_scenario(p.read_text(), name=p.name[:-5]) for p in files]


def shipped_scenario(name: str) -> Scenario:
    for sc in shipped_scenarios():
        if sc.name == name:
            return sc
    raise KeyError(name)


def round_down_to_five(t: float) -> float:
    return 5.0 * math.floor(t / 5.0)
