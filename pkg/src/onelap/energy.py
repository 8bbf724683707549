"""Regularized penalized energy and its first variation.

The functional minimized at every continuation stage is

    E(u) = h^2 sum[(|grad u|^2 + delta^2)^((1+eps)/2) - delta^(1+eps)]
           + n (h^2 sum u^(1+eps) - 1)^2

for nonnegative ``u``.  With ``eps = delta = 0`` it reduces to the total
variation plus the mass penalty ``n (int u - 1)^2``.  The smoothing
``delta`` keeps the first variation finite where the gradient vanishes.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Tuple

import numpy as np

from .grid import ScalarField, VectorField, div_arrays, grad_arrays

__all__ = [
    "PenaltyParams",
    "MASS_FLOOR",
    "energy",
    "energy_gradient",
    "sigma_field",
    "energy_and_gradient_arrays",
]

# floor added to u before raising it to the power eps in the penalty derivative
MASS_FLOOR = 1e-12


@dataclass(frozen=True)
class PenaltyParams:
    eps: float
    n: float
    delta: float = 0.0

    def __post_init__(self):
        if not 0.0 <= self.eps <= 1.0:
            raise ValueError(f"eps must lie in [0, 1], got {self.eps}")
        if not self.n > 0:
            raise ValueError(f"penalty weight n must be positive, got {self.n}")
        if not self.delta >= 0:
            raise ValueError(f"smoothing delta must be non-negative, got {self.delta}")

    @property
    def singular(self) -> bool:
        return self.delta == 0.0 and self.eps < 1.0


def _require_nonnegative(u: np.ndarray):
    if u.min() < 0:
        raise ValueError(f"energy is defined for nonnegative fields (min = {u.min():.3e})")


def _require_smooth(p: PenaltyParams):
    if p.singular:
        raise ValueError(f"delta = 0 with eps = {p.eps} < 1 gives a singular first variation")


def _energy_value(u, gx, gy, h, p: PenaltyParams) -> Tuple[float, float]:
    q = 1.0 + p.eps
    g2 = gx * gx + gy * gy
    if p.eps == 0.0:
        dens = np.sqrt(g2 + p.delta**2) - p.delta
        mass = h * h * float(np.sum(u))
    else:
        dens = (g2 + p.delta**2) ** (0.5 * q) - p.delta**q
        mass = h * h * float(np.sum(u**q))
    return h * h * float(np.sum(dens)) + p.n * (mass - 1.0) ** 2, mass


def energy(u: ScalarField, p: PenaltyParams) -> float:
    _require_nonnegative(u.values)
    gx, gy = grad_arrays(u.values, u.domain.h)
    return _energy_value(u.values, gx, gy, u.domain.h, p)[0]


def _sigma_arrays(gx, gy, p: PenaltyParams):
    if p.eps == 1.0 and p.delta == 0.0:
        return gx, gy
    if p.eps == 0.0:
        w = 1.0 / np.sqrt(gx * gx + gy * gy + p.delta**2)
    else:
        w = (gx * gx + gy * gy + p.delta**2) ** (0.5 * (p.eps - 1.0))
    return w * gx, w * gy


def energy_and_gradient_arrays(u: np.ndarray, mask: np.ndarray, h: float, p: PenaltyParams):
    """Energy, first variation and mass ``int u^(1+eps)`` on raw arrays.

    The first variation is the L2 gradient of the energy divided by
    ``1 + eps``, matching the Euler-Lagrange operator
    ``-div sigma + 2 n (int u^(1+eps) - 1) u^eps``.
    """
    gx, gy = grad_arrays(u, h)
    value, mass = _energy_value(u, gx, gy, h, p)
    sx, sy = _sigma_arrays(gx, gy, p)
    g = -div_arrays(sx, sy, h)
    coef = 2.0 * p.n * (mass - 1.0)
    if p.eps == 0.0:
        g += coef
    else:
        g += coef * (u + MASS_FLOOR) ** p.eps
    g[~mask] = 0.0
    return value, g, mass


def energy_gradient(u: ScalarField, p: PenaltyParams) -> ScalarField:
    _require_nonnegative(u.values)
    _require_smooth(p)
    _, g, _ = energy_and_gradient_arrays(u.values, u.domain.mask, u.domain.h, p)
    return ScalarField(u.domain, g)


def sigma_field(u: ScalarField, p: PenaltyParams) -> VectorField:
    """Flux ``(|grad u|^2 + delta^2)^((eps-1)/2) grad u``."""
    _require_smooth(p)
    gx, gy = grad_arrays(u.values, u.domain.h)
    sx, sy = _sigma_arrays(gx, gy, p)
    return VectorField(u.domain, sx, sy)
