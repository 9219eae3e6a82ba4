"""Benchmark inverse problems with synthetic-data constructors."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class SyntheticProblem:
    """A forward model bundled with the ground truth used to make its data."""

    model: object
    u_true: np.ndarray
    v_true: np.ndarray
    d_true: np.ndarray
    sigma: float


from .diffusion import DiffusionModel, diffusion_problem  # noqa: E402
from .elliptic import EllipticModel, elliptic_problem  # noqa: E402

__all__ = [
    "SyntheticProblem",
    "DiffusionModel",
    "diffusion_problem",
    "EllipticModel",
    "elliptic_problem",
]
