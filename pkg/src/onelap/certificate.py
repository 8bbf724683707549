"""A posteriori optimality diagnostics for a computed (u, sigma, n) triple.

A minimizer of ``TV(u) + n (int u - 1)^2`` over nonnegative fields comes
with a flux ``sigma`` satisfying

* ``|sigma| <= 1`` everywhere,
* ``sigma . grad u = |grad u|`` (boundary jump included through the zero
  extension), and
* ``-div sigma + 2 n (int u - 1) = 0`` wherever ``u > 0``.

:func:`build_certificate` measures how far a numerical solution is from
each of these relations and collects the three eigenvalue estimators.
"""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass
from typing import Optional

import numpy as np

from .grid import ScalarField, VectorField, divergence, gradient, inner, integrate, total_variation
from .solver import multiplier_estimate

__all__ = [
    "Certificate",
    "DegenerateFieldError",
    "dual_feasibility",
    "extremality_gap",
    "pde_residual",
    "rayleigh_quotient",
    "default_threshold",
    "build_certificate",
]

TAU_FRACTION = 1e-3


class DegenerateFieldError(ValueError):
    """The field has no mass or no variation, so no eigenvalue can be read off."""


@dataclass(frozen=True)
class Certificate:
    sup_sigma: float
    extremality_gap: float
    pde_residual: float
    mass: float
    multiplier: float
    rayleigh: float
    energy: float
    tau: float
    n: float

    def estimator_spread(self) -> float:
        """Largest pairwise relative spread of the three eigenvalue estimates."""
        vals = [self.multiplier, self.rayleigh, self.energy]
        spread = 0.0
        for i in range(3):
            for j in range(i + 1, 3):
                scale = max(abs(vals[i]), abs(vals[j]))
                if scale > 0:
                    spread = max(spread, abs(vals[i] - vals[j]) / scale)
        return spread

    def passes(
        self,
        sigma_tol: float = 1.05,
        gap_tol: float = 0.05,
        residual_tol: float = 0.1,
        spread_tol: float = 0.10,
    ) -> bool:
        return (
            self.sup_sigma <= sigma_tol
            and self.extremality_gap <= gap_tol
            and self.pde_residual <= residual_tol
            and self.estimator_spread() <= spread_tol
        )

    def to_dict(self) -> dict:
        d = asdict(self)
        d["estimator_spread"] = self.estimator_spread()
        return d

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)


def dual_feasibility(s: VectorField) -> float:
    return float(np.max(s.magnitude()))


def extremality_gap(s: VectorField, u: ScalarField) -> float:
    """Relative mismatch ``|<s, grad u> - TV(u)| / TV(u)``."""
    tv = total_variation(u)
    if tv <= 0:
        raise DegenerateFieldError("total variation vanishes; the field is degenerate")
    return abs(inner(s, gradient(u)) - tv) / tv


def pde_residual(u: ScalarField, s: VectorField, n: float, tau: float) -> float:
    """Scaled L2 norm of ``-div s + 2n(int u - 1)`` on ``{u > tau}``."""
    if not tau > 0:
        raise ValueError(f"sign threshold must be positive, got {tau}")
    lam = multiplier_estimate(u, n)
    active = u.values > tau
    r = -divergence(s).values - lam
    r = np.where(active, r, 0.0)
    return float(np.linalg.norm(r)) * u.domain.h / max(1.0, abs(lam))


def rayleigh_quotient(u: ScalarField) -> float:
    mass = u.domain.h**2 * float(np.abs(u.values).sum())
    if mass <= 0:
        raise DegenerateFieldError("rayleigh quotient of a zero field")
    return total_variation(u) / mass


def default_threshold(u: ScalarField) -> float:
    return TAU_FRACTION * float(np.abs(u.values).max())


def build_certificate(
    u: ScalarField, s: VectorField, n: float, tau: Optional[float] = None
) -> Certificate:
    if not np.any(u.values != 0):
        raise DegenerateFieldError("cannot certify an identically zero field")
    if tau is None:
        tau = default_threshold(u)
    mass = integrate(u)
    tv = total_variation(u)
    return Certificate(
        sup_sigma=dual_feasibility(s),
        extremality_gap=extremality_gap(s, u),
        pde_residual=pde_residual(u, s, n, tau),
        mass=mass,
        multiplier=multiplier_estimate(u, n),
        rayleigh=rayleigh_quotient(u),
        energy=tv + n * (mass - 1.0) ** 2,
        tau=float(tau),
        n=float(n),
    )
