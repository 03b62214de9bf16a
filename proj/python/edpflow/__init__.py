"""Python interface to the edpflow C++ library."""

from ._edpflow import (
    ConfigError,
    DomainError,
    IntegrationError,
    Params,
    ShapeError,
    Tilt,
    Trajectory,
    boltzmann,
    coarse_params,
    cosh_dual,
    cosh_primal,
    default_config,
    dissipation,
    edb_residual,
    effective_dissipation,
    energy,
    reconstruct,
    run_experiment,
    solve,
    solve_effective,
    stationary_measure,
    validate_generator,
)

__all__ = [
    "ConfigError",
    "DomainError",
    "IntegrationError",
    "Params",
    "ShapeError",
    "Tilt",
    "Trajectory",
    "boltzmann",
    "coarse_params",
    "cosh_dual",
    "cosh_primal",
    "default_config",
    "dissipation",
    "edb_residual",
    "effective_dissipation",
    "energy",
    "reconstruct",
    "run_experiment",
    "solve",
    "solve_effective",
    "stationary_measure",
    "validate_generator",
]
