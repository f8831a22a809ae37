"""Benchmark problems and the problem-reference resolver used by the harness."""

from __future__ import annotations

from pathlib import Path

from ..errors import ConfigurationError
from ..mdp import ProblemDefinition
from .random_mdp import generate_random_mdp
from .rideshare import RideShareConfig, build_instance
from .shortest_path import build_example1_graph

__all__ = ["build_example1_graph", "build_instance", "generate_random_mdp", "resolve_problem",
           "RideShareConfig"]


def resolve_problem(ref: str) -> ProblemDefinition:
    """Build a problem from a short reference.

    ``example1`` / ``example1-two-point``; ``D5`` / ``D10`` / ``D15`` (desk scale) or
    ``D5-full``; ``random:S,A,W,T:seed``; or a path to an instance file.
    """
    if ref == "example1":
        return build_example1_graph().to_problem("normal")
    if ref == "example1-two-point":
        return build_example1_graph().to_problem("two_point")
    if ref.startswith("random:"):
        try:
            _, sizes, seed = ref.split(":")
            return generate_random_mdp(tuple(int(v) for v in sizes.split(",")), int(seed))
        except ValueError as exc:
            raise ConfigurationError(f"bad random problem reference {ref!r}") from exc
    tag, _, scale = ref.partition("-")
    if tag in ("D5", "D10", "D15") and scale in ("", "desk", "full"):
        return build_instance(tag, desk_scale=scale != "full")[0]
    path = Path(ref)
    if path.is_file():
        from .instance_file import load_instance

        return load_instance(path)
    raise ConfigurationError(f"unknown problem reference {ref!r}")
