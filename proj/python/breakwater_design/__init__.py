"""Surrogate-assisted evolutionary generative design of coastal breakwaters.

Thin python facade over the C++ core: domain setup, the wave oracle,
breakwater geometry utilities, Pareto metrics, and the full three-stage
optimizer.
"""

from ._core import (
    Domain,
    check_constraints,
    cost,
    dominates,
    encode,
    hypervolume,
    load_domain,
    optimize,
    rasterize,
    simulate,
    synthetic_case,
    wave_height_at_targets,
)

__all__ = [
    "Domain",
    "check_constraints",
    "cost",
    "dominates",
    "encode",
    "hypervolume",
    "load_domain",
    "optimize",
    "rasterize",
    "simulate",
    "synthetic_case",
    "wave_height_at_targets",
]
