"""Hybrid Raviart-Thomas mixed DG solver for the 2D Helmholtz equation."""

import json as _json

from ._core import (
    SCHEMA_VERSION,
    ConfigError,
    HrtmdgError,
    Mesh,
    MeshParseError,
    convergence,
    convergence_rate,
    csv_header,
    nearest_dirichlet_eigenvalue,
    solve,
)
from ._core import verify as _verify


def verify(seed=42, inject_sign_error=False):
    """Run the probe suite and return the parsed report."""
    return _json.loads(_verify(seed, inject_sign_error))


__all__ = [
    "SCHEMA_VERSION",
    "ConfigError",
    "HrtmdgError",
    "Mesh",
    "MeshParseError",
    "convergence",
    "convergence_rate",
    "csv_header",
    "nearest_dirichlet_eigenvalue",
    "solve",
    "verify",
]
