"""Run configuration: flat ``key = value`` text with ``[section]`` headers.

Keys before the first header belong to ``[params]``.  Unknown sections or keys are
errors.  Numbers may be written as multiples of pi (``2*pi``, ``pi/2``, ``4pi``).

Point lists use ``;`` between points and whitespace or commas inside a point
(``x y z t``); point sets are separated by ``|``.
"""

from __future__ import annotations

import configparser
import difflib
import math
import re
from dataclasses import dataclass, field
from pathlib import Path

from .analytic import SpacetimePoint
from .lattice import PhysicalParams
from .rng import RngPolicy
from .sim import EnsembleConfig, EnsembleError, FIELD_NORMALIZATIONS, SCHEMES

__all__ = ["ConfigError", "RunConfig", "parse_config", "parse_config_text"]


class ConfigError(ValueError):
    """Malformed or invalid configuration."""


DEFAULT_LAGS = (0.0, 0.25, 0.5, 1.0)
DEFAULT_CORRELATORS = (
    (SpacetimePoint((1, 0, 0), 0.0), SpacetimePoint((0, 0, 0), 0.0)),
    (SpacetimePoint((1, 0, 0), 0.5), SpacetimePoint((0, 0, 0), 0.0)),
    (SpacetimePoint((1, 0, 0), 1.0), SpacetimePoint((0, 0, 0), 0.0)),
    (SpacetimePoint((0, 0, 0), 0.0), SpacetimePoint((1, 0, 0), 0.25),
     SpacetimePoint((0, 1, 0), 0.5), SpacetimePoint((0, 0, 1), 0.75)),
)
DEFAULT_R_GRID = (0.5, 1.0, 2.0)
DEFAULT_SEPARATIONS = (
    SpacetimePoint((0.5, 0, 0), 0.0),
    SpacetimePoint((1, 0, 0), 0.0),
    SpacetimePoint((2, 0, 0), 0.0),
    SpacetimePoint((1, 0, 0), 0.5),
    SpacetimePoint((0, 0, 0), 1.0),
)

_SCHEMA = {
    "params": ("m", "L", "lambda_cut", "nu", "hbar"),
    "ensemble": ("n_trajectories", "grid_dt", "grid_len", "scheme"),
    "rng": ("master_seed",),
    "gates": ("z", "residual", "equal_time"),
    "output": ("normalization", "dump_trajectories"),
    "simulate": ("modes", "lags", "component", "correlators"),
    "analytic": ("r_grid", "sets"),
    "propagate": ("separations", "boost_pairs", "conjugation"),
    "wick": ("n", "max_n"),
}


@dataclass(frozen=True)
class Gates:
    z: float = 3.0
    residual: float = 1e-4
    equal_time: float = 1e-6


@dataclass(frozen=True)
class SimulateBlock:
    modes: tuple[tuple[int, int, int], ...] = ((1, 0, 0),)
    lags: tuple[float, ...] = DEFAULT_LAGS
    component: str = "r"
    correlators: tuple[tuple[SpacetimePoint, ...], ...] = DEFAULT_CORRELATORS


@dataclass(frozen=True)
class AnalyticBlock:
    r_grid: tuple[float, ...] = DEFAULT_R_GRID
    sets: tuple[tuple[SpacetimePoint, ...], ...] = ()


@dataclass(frozen=True)
class PropagateBlock:
    separations: tuple[SpacetimePoint, ...] = DEFAULT_SEPARATIONS
    boost_pairs: tuple[tuple[SpacetimePoint, SpacetimePoint], ...] | None = None  # None: standard set
    conjugation: tuple[SpacetimePoint, ...] = (
        SpacetimePoint((0.3, 0, 0), 1.0), SpacetimePoint((1, 0, 0), 0.5))


@dataclass(frozen=True)
class RunConfig:
    params: PhysicalParams
    ensemble: EnsembleConfig
    policy: RngPolicy
    gates: Gates = Gates()
    normalization: str = "schwinger"
    dump_trajectories: bool = False
    simulate: SimulateBlock = SimulateBlock()
    analytic: AnalyticBlock = AnalyticBlock()
    propagate: PropagateBlock = PropagateBlock()
    wick_n: int | None = None
    wick_max_n: int = 12
    raw: dict = field(default_factory=dict, compare=False)

    def echo(self) -> dict:
        """The configuration as parsed text, section by section."""
        return {sec: dict(vals) for sec, vals in sorted(self.raw.items())}


_PI = re.compile(r"^\s*([+-]?(?:\d+\.?\d*|\.\d+)(?:[eE][+-]?\d+)?)?\s*\*?\s*pi\s*(?:/\s*((?:\d+\.?\d*|\.\d+)(?:[eE][+-]?\d+)?))?\s*$")


def parse_number(text: str, key: str = "value") -> float:
    text = text.strip()
    try:
        value = float(text)
    except ValueError:
        m = _PI.match(text)
        if not m:
            raise ConfigError(f"{key}: cannot parse {text!r} as a number") from None
        value = (float(m.group(1)) if m.group(1) else 1.0) * math.pi / (float(m.group(2)) if m.group(2) else 1.0)
    if not math.isfinite(value):
        raise ConfigError(f"{key}: {text!r} is not finite")
    return value


def _parse_int(text: str, key: str) -> int:
    try:
        return int(text.strip())
    except ValueError:
        raise ConfigError(f"{key}: expected an integer, got {text!r}") from None


def _parse_bool(text: str, key: str) -> bool:
    t = text.strip().lower()
    if t in ("1", "true", "yes", "on"):
        return True
    if t in ("0", "false", "no", "off"):
        return False
    raise ConfigError(f"{key}: expected true/false, got {text!r}")


def _split(text: str, sep: str) -> list[str]:
    return [p for p in (s.strip() for s in text.split(sep)) if p]


def _numbers(text: str, key: str) -> list[float]:
    return [parse_number(t, key) for t in re.split(r"[,\s]+", text.strip()) if t]


def parse_point(text: str, key: str) -> SpacetimePoint:
    vals = _numbers(text, key)
    if len(vals) not in (3, 4):
        raise ConfigError(f"{key}: a point needs 'x y z t' (or 'x y z'), got {text!r}")
    return SpacetimePoint(tuple(vals[:3]), vals[3] if len(vals) == 4 else 0.0)


def parse_points(text: str, key: str) -> tuple[SpacetimePoint, ...]:
    return tuple(parse_point(p, key) for p in _split(text, ";"))


def parse_point_sets(text: str, key: str) -> tuple[tuple[SpacetimePoint, ...], ...]:
    return tuple(parse_points(s, key) for s in _split(text, "|"))


def _parse_modes(text: str, key: str) -> tuple[tuple[int, int, int], ...]:
    out = []
    for chunk in _split(text, ";"):
        parts = [t for t in re.split(r"[,\s]+", chunk) if t]
        if len(parts) != 3:
            raise ConfigError(f"{key}: a mode needs three integers, got {chunk!r}")
        out.append(tuple(_parse_int(p, key) for p in parts))
    return tuple(out)


def _parse_pairs(text: str, key: str):
    if text.strip().lower() == "standard":
        return None
    pairs = []
    for chunk in _split(text, ";"):
        if ">" not in chunk:
            raise ConfigError(f"{key}: boost pairs are written 'x y z t > x y z t', got {chunk!r}")
        a, b = chunk.split(">", 1)
        pairs.append((parse_point(a, key), parse_point(b, key)))
    return tuple(pairs)


def _read_sections(text: str, source: str) -> dict[str, dict[str, str]]:
    parser = configparser.ConfigParser(
        interpolation=None, inline_comment_prefixes=("#",), comment_prefixes=("#",),
        default_section="__defaults__",
    )
    parser.optionxform = str
    body = text if re.match(r"^\s*\[", text) else "[params]\n" + text
    offset = 0 if body is text else 1
    try:
        parser.read_string(body, source=source)
    except configparser.MissingSectionHeaderError:
        raise ConfigError(f"{source}: missing section header") from None
    except configparser.DuplicateOptionError as exc:
        raise ConfigError(f"{source}, line {exc.lineno - offset}: duplicate key {exc.option!r} in [{exc.section}]") from None
    except configparser.DuplicateSectionError as exc:
        raise ConfigError(f"{source}, line {exc.lineno - offset}: duplicate section [{exc.section}]") from None
    except configparser.ParsingError as exc:
        lines = ", ".join(f"line {ln - offset}: {raw.strip()}" for ln, raw in exc.errors)
        raise ConfigError(f"{source}: cannot parse {lines}") from None
    sections = {}
    for sec in parser.sections():
        if sec not in _SCHEMA:
            hint = difflib.get_close_matches(sec, _SCHEMA, n=1)
            raise ConfigError(f"unknown section [{sec}]" + (f"; did you mean [{hint[0]}]?" if hint else ""))
        items = dict(parser.items(sec, raw=True))
        for key in items:
            if key not in _SCHEMA[sec]:
                hint = difflib.get_close_matches(key, _SCHEMA[sec], n=1, cutoff=0.0)
                raise ConfigError(f"unknown key {key!r} in [{sec}]" + (f"; did you mean {hint[0]!r}?" if hint else ""))
        sections[sec] = items
    return sections


def parse_config_text(text: str, source: str = "<config>", seed: int | None = None) -> RunConfig:
    """Parse and fully validate a configuration; ``seed`` overrides ``[rng] master_seed``."""
    raw = _read_sections(text, source)
    get = lambda sec: raw.get(sec, {})  # noqa: E731

    p = get("params")
    for key in ("m", "L", "lambda_cut", "nu"):
        if key not in p:
            raise ConfigError(f"missing required key {key!r} in [params]")
    values = {k: parse_number(v, k) for k, v in p.items()}
    if values["nu"] < 0:
        raise ConfigError("nu: simulation requires a real diffusion parameter nu >= 0")
    try:
        params = PhysicalParams(**values)
    except ValueError as exc:
        raise ConfigError(str(exc)) from None

    e = get("ensemble")
    try:
        ensemble = EnsembleConfig(
            n_trajectories=_parse_int(e.get("n_trajectories", "64"), "n_trajectories"),
            grid_dt=parse_number(e.get("grid_dt", "0.05"), "grid_dt"),
            grid_len=_parse_int(e.get("grid_len", "512"), "grid_len"),
            scheme=e.get("scheme", "exact").strip(),
        )
    except EnsembleError as exc:
        raise ConfigError(str(exc)) from None

    master_seed = seed if seed is not None else _parse_int(get("rng").get("master_seed", "0"), "master_seed")
    try:
        policy = RngPolicy(master_seed)
    except ValueError as exc:
        raise ConfigError(str(exc)) from None

    g = get("gates")
    gates = Gates(**{k: parse_number(v, k) for k, v in g.items()})
    for k in ("z", "residual", "equal_time"):
        if not getattr(gates, k) > 0:
            raise ConfigError(f"gate {k!r} must be positive")

    o = get("output")
    normalization = o.get("normalization", "schwinger").strip()
    if normalization not in FIELD_NORMALIZATIONS:
        raise ConfigError(f"normalization must be one of {FIELD_NORMALIZATIONS}")
    dump = _parse_bool(o.get("dump_trajectories", "false"), "dump_trajectories")

    s = get("simulate")
    simulate = SimulateBlock(
        modes=_parse_modes(s["modes"], "modes") if "modes" in s else SimulateBlock.modes,
        lags=tuple(_numbers(s["lags"], "lags")) if "lags" in s else DEFAULT_LAGS,
        component=s.get("component", "r").strip(),
        correlators=parse_point_sets(s["correlators"], "correlators") if "correlators" in s else DEFAULT_CORRELATORS,
    )
    if simulate.component not in ("r", "i", "both"):
        raise ConfigError("component must be r, i or both")
    for n in simulate.modes:
        if n == (0, 0, 0) and simulate.component != "r":
            raise ConfigError("the zero mode has no I component; use component = r")

    a = get("analytic")
    analytic = AnalyticBlock(
        r_grid=tuple(_numbers(a["r_grid"], "r_grid")) if "r_grid" in a else DEFAULT_R_GRID,
        sets=parse_point_sets(a["sets"], "sets") if "sets" in a else (),
    )
    if any(r <= 0 for r in analytic.r_grid):
        raise ConfigError("r_grid: separations must be positive (coincident points diverge)")

    pr = get("propagate")
    propagate = PropagateBlock(
        separations=parse_points(pr["separations"], "separations") if "separations" in pr else DEFAULT_SEPARATIONS,
        boost_pairs=_parse_pairs(pr["boost_pairs"], "boost_pairs") if "boost_pairs" in pr else None,
        conjugation=parse_points(pr["conjugation"], "conjugation") if "conjugation" in pr else PropagateBlock.conjugation,
    )

    w = get("wick")
    wick_n = _parse_int(w["n"], "n") if "n" in w else None
    wick_max = _parse_int(w.get("max_n", "12"), "max_n")

    echo = {sec: dict(v) for sec, v in raw.items()}
    echo.setdefault("rng", {})["master_seed"] = str(master_seed)
    return RunConfig(params, ensemble, policy, gates, normalization, dump, simulate, analytic,
                     propagate, wick_n, wick_max, echo)


def parse_config(path, seed: int | None = None) -> RunConfig:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read {path}: {exc.strerror}") from None
    return parse_config_text(text, str(path), seed)
