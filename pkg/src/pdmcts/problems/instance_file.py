"""Plain-text instance files.

Grammar: one ``key = value`` per line; ``#`` starts a comment; blank lines ignored.
``problem`` selects the family (``rideshare``, ``example1`` or ``random``).

rideshare keys: ``tag`` (D5/D10/D15), ``desk_scale``, ``seed`` and any
RideShareConfig field (``rows``, ``cols``, ``horizon``, ``r_max``, ``w_base``,
``w_dist``, ``move_cost``, ``pool_size``, ``pool_seed``, ``request_rate``,
``max_trip_distance``, ``hotspots``, ``start``, ``literal_status``).
example1 keys: ``cost_model`` (normal/two_point), ``sigma``.
random keys: ``sizes`` (``S,A,W,T``), ``seed``.
"""

from __future__ import annotations

from dataclasses import fields
from pathlib import Path

from ..errors import ConfigurationError
from ..mdp import ProblemDefinition
from .random_mdp import generate_random_mdp
from .rideshare import RideShareConfig, build_instance
from .shortest_path import build_example1_graph

_BOOL = {"true": True, "yes": True, "1": True, "false": False, "no": False, "0": False}


def parse_instance(text: str) -> dict:
    out = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        key, sep, value = line.partition("=")
        if not sep or not key.strip():
            raise ConfigurationError(f"line {lineno}: expected 'key = value'")
        out[key.strip()] = value.strip()
    return out


def _coerce(name: str, value: str, kind):
    try:
        if kind is bool:
            return _BOOL[value.lower()]
        if value.lower() == "none":
            return None
        return kind(value)
    except (KeyError, ValueError) as exc:
        raise ConfigurationError(f"bad value for {name}: {value!r}") from exc


def instance_from_mapping(spec: dict) -> ProblemDefinition:
    spec = dict(spec)
    family = spec.pop("problem", "rideshare")
    if family == "example1":
        sigma = _coerce("sigma", spec.pop("sigma", "0.25"), float)
        model = spec.pop("cost_model", "normal")
        _reject_extra(spec)
        return build_example1_graph(sigma).to_problem(model)
    if family == "random":
        sizes = tuple(_coerce("sizes", v, int) for v in spec.pop("sizes", "4,2,2,3").split(","))
        seed = _coerce("seed", spec.pop("seed", "0"), int)
        _reject_extra(spec)
        return generate_random_mdp(sizes, seed)
    if family != "rideshare":
        raise ConfigurationError(f"unknown problem family {family!r}")
    tag = spec.pop("tag", "D5")
    desk = _coerce("desk_scale", spec.pop("desk_scale", "true"), bool)
    seed = _coerce("seed", spec.pop("seed", "0"), int)
    kinds = {"rows": int, "cols": int, "horizon": int, "r_max": int, "w_base": float,
             "w_dist": float, "move_cost": float, "pool_size": int, "pool_seed": int,
             "request_rate": float, "max_trip_distance": int, "hotspots": int, "start": int,
             "literal_status": bool}
    known = {f.name for f in fields(RideShareConfig)}
    overrides = {}
    for key in list(spec):
        if key not in kinds or key not in known:
            raise ConfigurationError(f"unknown instance key {key!r}")
        overrides[key] = _coerce(key, spec.pop(key), kinds[key])
    return build_instance(tag, desk_scale=desk, seed=seed, **overrides)[0]


def _reject_extra(spec: dict) -> None:
    if spec:
        raise ConfigurationError(f"unknown instance keys {sorted(spec)}")


def load_instance(path) -> ProblemDefinition:
    return instance_from_mapping(parse_instance(Path(path).read_text(encoding="utf-8")))
