"""Photonic band structures of 2D periodic dielectric media."""

from ._core import (
    BandSurface,
    BlochParameter,
    ConfigError,
    ConstantPermittivity,
    ContractError,
    DiscPermittivity,
    GridHierarchy,
    PointResult,
    ScanOptions,
    SolverOptions,
    SubspaceMode,
    UnitCell,
    band_scan,
    build_hierarchy,
    dense_eigenvalues,
    level_operators,
    parse_permittivity,
    scan_dependencies,
    selftest,
    solve_single,
)

__all__ = [
    "BandSurface",
    "BlochParameter",
    "ConfigError",
    "ConstantPermittivity",
    "ContractError",
    "DiscPermittivity",
    "GridHierarchy",
    "PointResult",
    "ScanOptions",
    "SolverOptions",
    "SubspaceMode",
    "UnitCell",
    "band_scan",
    "build_hierarchy",
    "dense_eigenvalues",
    "level_operators",
    "parse_permittivity",
    "scan_dependencies",
    "selftest",
    "solve_single",
]
