"""Run configuration: TOML ingestion, defaults and validation."""
from __future__ import annotations

import hashlib
import json
import re
import sys
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

from ..plasma import PlasmaParams, PressureLaw

MODELS = ("emtf", "eslm", "xmhd", "paired")
RECIPES = ("prepared-random", "irrotational", "single-mode", "from-file")


class ConfigError(ValueError):
    """Parse or validation failure; ``problems`` lists every violation found."""

    def __init__(self, problems, line=None):
        if isinstance(problems, str):
            problems = [problems]
        self.problems = list(problems)
        self.line = line
        where = f" (line {line})" if line is not None else ""
        super().__init__(f"invalid configuration{where}: " + "; ".join(self.problems))


@dataclass(frozen=True)
class InitialData:
    recipe: str = "prepared-random"
    seed: int = 0
    kmax: int = 4
    amplitude: float = 1.0
    nbar0: float = 0.0
    mode: tuple = (1, 0, 0)
    file: str = ""


@dataclass(frozen=True)
class RunConfig:
    grid: int = 16
    model: str = "emtf"
    T: float = 0.1
    epsilon: float = 0.1
    epsilon_ladder: tuple = ()
    dt: float | None = None
    cfl: float = 0.5
    fast_factor: float = 0.5
    snapshots: int = 10
    sigma: float = 1.0
    dealias_fraction: float = 2.0 / 3.0
    spectral_filter: bool = False
    save_snapshots: bool = True
    plasma: PlasmaParams = field(default_factory=PlasmaParams)
    initial: InitialData = field(default_factory=InitialData)

    def to_dict(self) -> dict:
        d = asdict(self)
        d["plasma"] = self.plasma.to_dict()
        d["epsilon_ladder"] = list(self.epsilon_ladder)
        d["initial"]["mode"] = list(self.initial.mode)
        return d

    def digest(self) -> str:
        blob = json.dumps(self.to_dict(), sort_keys=True).encode()
        return hashlib.sha256(blob).hexdigest()[:16]

    def plan(self) -> list:
        """The epsilon values this config runs (one per EMTF trajectory)."""
        return list(self.epsilon_ladder) if self.epsilon_ladder else [self.epsilon]

    def with_epsilon(self, eps) -> "RunConfig":
        return replace(self, epsilon=eps, epsilon_ladder=())


_TOP = {f for f in RunConfig.__dataclass_fields__ if f not in ("plasma", "initial")}
_INITIAL = set(InitialData.__dataclass_fields__)
_PLASMA = {"m_e", "m_i", "n_bar", "pressure_e", "pressure_i"}
_PRESSURE = {"K", "gamma"}


def _line_of(exc) -> int | None:
    m = re.search(r"line (\d+)", str(exc))
    return int(m.group(1)) if m else None


def parse_value(text: str):
    """Parse a command-line override value as a TOML value, else keep the string."""
    try:
        return tomllib.loads(f"v = {text}")["v"]
    except tomllib.TOMLDecodeError:
        return text


def apply_overrides(raw: dict, overrides) -> dict:
    raw = json.loads(json.dumps(raw))
    for item in overrides or ():
        if "=" not in item:
            raise ConfigError(f"override {item!r} is not of the form key=value")
        key, val = item.split("=", 1)
        parts = key.strip().split(".")
        node = raw
        for p in parts[:-1]:
            node = node.setdefault(p, {})
            if not isinstance(node, dict):
                raise ConfigError(f"override {key!r} descends into a non-table")
        node[parts[-1]] = parse_value(val.strip())
    return raw


def _num(problems, name, v, positive=True, allow_zero=False):
    if isinstance(v, bool) or not isinstance(v, (int, float)):
        problems.append(f"{name} must be a number, got {v!r}")
        return False
    if positive and (v < 0 or (v == 0 and not allow_zero)):
        problems.append(f"{name} must be {'non-negative' if allow_zero else 'positive'}, got {v}")
        return False
    return True


def build_config(raw: dict) -> RunConfig:
    """Validate a raw mapping and apply defaults, reporting every violation at once."""
    problems = []
    unknown = sorted(set(raw) - _TOP - {"plasma", "initial"})
    problems += [f"unknown key {k!r}" for k in unknown]
    top = {k: v for k, v in raw.items() if k in _TOP}

    n = top.get("grid", RunConfig.grid)
    if isinstance(n, bool) or not isinstance(n, int):
        problems.append(f"grid must be an integer, got {n!r}")
    elif n < 8 or n % 2:
        problems.append(f"grid must be even and >= 8, got {n}")
    model = top.get("model", RunConfig.model)
    if model not in MODELS:
        problems.append(f"model must be one of {MODELS}, got {model!r}")
    _num(problems, "T", top.get("T", RunConfig.T), allow_zero=True)
    eps = top.get("epsilon", RunConfig.epsilon)
    if _num(problems, "epsilon", eps) and eps > 1:
        problems.append(f"epsilon must lie in (0, 1], got {eps}")
    ladder = top.get("epsilon_ladder", ())
    if not isinstance(ladder, (list, tuple)):
        problems.append("epsilon_ladder must be a list")
        ladder = ()
    for i, e in enumerate(ladder):
        if _num(problems, f"epsilon_ladder[{i}]", e) and e > 1:
            problems.append(f"epsilon_ladder[{i}] must lie in (0, 1], got {e}")
    top["epsilon_ladder"] = tuple(ladder)
    if top.get("dt") is not None:
        _num(problems, "dt", top["dt"])
    for key in ("cfl", "fast_factor"):
        if key in top:
            _num(problems, key, top[key])
    s = top.get("snapshots", RunConfig.snapshots)
    if isinstance(s, bool) or not isinstance(s, int) or s < 1:
        problems.append(f"snapshots must be a positive integer, got {s!r}")
    if "sigma" in top:
        _num(problems, "sigma", top["sigma"], positive=False)
    if "dealias_fraction" in top:
        f = top["dealias_fraction"]
        if _num(problems, "dealias_fraction", f) and f > 1:
            problems.append("dealias_fraction must lie in (0, 1]")
    for key in ("spectral_filter", "save_snapshots"):
        if key in top and not isinstance(top[key], bool):
            problems.append(f"{key} must be a boolean")

    plasma = PlasmaParams()
    praw = raw.get("plasma", {})
    if not isinstance(praw, dict):
        problems.append("[plasma] must be a table")
        praw = {}
    problems += [f"unknown key 'plasma.{k}'" for k in sorted(set(praw) - _PLASMA)]
    pkw = {}
    for k in ("m_e", "m_i", "n_bar"):
        if k in praw and _num(problems, f"plasma.{k}", praw[k]):
            pkw[k] = float(praw[k])
    for k in ("pressure_e", "pressure_i"):
        if k not in praw:
            continue
        sub = praw[k]
        if not isinstance(sub, dict):
            problems.append(f"plasma.{k} must be a table")
            continue
        problems += [f"unknown key 'plasma.{k}.{x}'" for x in sorted(set(sub) - _PRESSURE)]
        base = getattr(plasma, k)
        K, gamma = sub.get("K", base.K), sub.get("gamma", base.gamma)
        ok = _num(problems, f"plasma.{k}.K", K) & _num(problems, f"plasma.{k}.gamma", gamma)
        if ok and gamma < 1:
            problems.append(f"plasma.{k}.gamma must be >= 1, got {gamma}")
        elif ok:
            pkw[k] = PressureLaw(float(K), float(gamma))

    iraw = raw.get("initial", {})
    if not isinstance(iraw, dict):
        problems.append("[initial] must be a table")
        iraw = {}
    problems += [f"unknown key 'initial.{k}'" for k in sorted(set(iraw) - _INITIAL)]
    ikw = {k: v for k, v in iraw.items() if k in _INITIAL}
    recipe = ikw.get("recipe", InitialData.recipe)
    if recipe not in RECIPES:
        problems.append(f"initial.recipe must be one of {RECIPES}, got {recipe!r}")
    if recipe == "from-file" and not ikw.get("file"):
        problems.append("initial.file is required for the from-file recipe")
    if "kmax" in ikw and (not isinstance(ikw["kmax"], int) or ikw["kmax"] < 1):
        problems.append("initial.kmax must be a positive integer")
    if "seed" in ikw and (isinstance(ikw["seed"], bool) or not isinstance(ikw["seed"], int)):
        problems.append("initial.seed must be an integer")
    if "amplitude" in ikw:
        _num(problems, "initial.amplitude", ikw["amplitude"], allow_zero=True)
    if "nbar0" in ikw:
        _num(problems, "initial.nbar0", ikw["nbar0"], positive=False)
    if "mode" in ikw:
        m = ikw["mode"]
        if not (isinstance(m, list) and len(m) == 3 and all(isinstance(x, int) for x in m)) or not any(m):
            problems.append("initial.mode must be a nonzero list of three integers")
        else:
            ikw["mode"] = tuple(m)
    if problems:
        raise ConfigError(problems)
    try:
        plasma = PlasmaParams(**pkw)
    except ValueError as exc:
        raise ConfigError([str(exc)]) from None
    return RunConfig(plasma=plasma, initial=InitialData(**ikw), **top)


def load_config(path, overrides=None) -> RunConfig:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read {path}: {exc}") from None
    try:
        raw = tomllib.loads(text)
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError(f"parse error: {exc}", line=_line_of(exc)) from None
    return build_config(apply_overrides(raw, overrides))


def epsilon_ladder(config: RunConfig) -> list:
    return config.plan()
