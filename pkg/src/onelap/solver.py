"""Bound-constrained descent with warm-started continuation over (eps, n, delta).

Each stage minimizes the regularized penalized energy over nonnegative
fields.  Stages are run in order, each warm-started from the previous
result: first eps is driven to zero at the smallest penalty weight, then
the penalty weight grows at eps = 0.
"""

from __future__ import annotations

import functools
import logging
import math
import time
from dataclasses import dataclass, field
from typing import Callable, List, Optional, Tuple

import numpy as np
from scipy import ndimage
from scipy.optimize import Bounds, minimize

from .energy import PenaltyParams, energy_and_gradient_arrays, sigma_field
from .grid import GridDomain, ScalarField, VectorField, integrate, total_variation

__all__ = [
    "Stage",
    "ContinuationSchedule",
    "StageReport",
    "SolveReport",
    "SolverError",
    "default_schedule",
    "schedule_for",
    "delta_rule",
    "field_scale",
    "initial_field",
    "minimize_stage",
    "continuation_solve",
    "multiplier_estimate",
]

log = logging.getLogger(__name__)

ARMIJO_C = 1e-4
MAX_BACKTRACKS = 60
JITTER = 1e-3
LBFGS_MEMORY = 5
# below this mass the penalty has lost the field: 2n is within 1% of the eigenvalue or under it
COLLAPSE_MASS = 1e-2


class SolverError(RuntimeError):
    """Raised when a stage produces a non-finite energy.

    ``state`` holds the last finite iterate (a ScalarField) and ``reports``
    the stage reports completed so far.
    """

    def __init__(self, message, state=None, reports=None):
        super().__init__(message)
        self.state = state
        self.reports = list(reports or [])


@dataclass(frozen=True)
class Stage:
    eps: float
    n: float
    delta: float
    cap: int = 5000
    tol: float = 1e-6

    def __post_init__(self):
        PenaltyParams(self.eps, self.n, self.delta)
        if self.cap < 0 or not self.tol > 0:
            raise ValueError("stage iteration cap must be >= 0 and tolerance > 0")

    @property
    def params(self) -> PenaltyParams:
        return PenaltyParams(self.eps, self.n, self.delta)


@dataclass(frozen=True)
class ContinuationSchedule:
    stages: Tuple[Stage, ...]

    def __post_init__(self):
        stages = tuple(self.stages)
        if not stages:
            raise ValueError("a schedule needs at least one stage")
        for a, b in zip(stages, stages[1:]):
            if b.eps > a.eps:
                raise ValueError("eps must be non-increasing across stages")
            if b.n < a.n:
                raise ValueError("n must be non-decreasing across stages")
            if b.delta > a.delta:
                raise ValueError("delta must be non-increasing across stages")
        for s in stages:
            if s.eps < 1 and not s.delta > 0:
                raise ValueError("delta must be positive on every stage with eps < 1")
        object.__setattr__(self, "stages", stages)

    def __len__(self):
        return len(self.stages)

    def __iter__(self):
        return iter(self.stages)

    @property
    def penalty_levels(self) -> List[float]:
        """Distinct n values reached at eps = 0, in schedule order."""
        out = []
        for s in self.stages:
            if s.eps == 0 and (not out or out[-1] != s.n):
                out.append(s.n)
        return out


def delta_rule(eps: float, scale: float = 1.0) -> float:
    """Smoothing tied to the eps stage, in units of the gradient scale."""
    return (1e-2 * eps + 1e-4) * scale


def field_scale(dom: GridDomain) -> float:
    """Boundary jump ``1 / (|Omega| h)`` of the unit-mass indicator of the domain.

    This is the largest gradient magnitude a unit-mass eigenfunction
    typically reaches, and sets the unit in which delta is measured.
    """
    return 1.0 / (dom.area * dom.h)


def default_schedule(
    eps_start: float = 0.5,
    eps_factor: float = 0.5,
    eps_floor: float = 0.05,
    n_start: float = 8.0,
    n_factor: float = 4.0,
    n_stages: int = 4,
    cap: int = 5000,
    tol: float = 1e-6,
    delta: Optional[Callable[[float], float]] = None,
    scale: float = 1.0,
) -> ContinuationSchedule:
    """Geometric eps decay at ``n_start``, then geometric growth of n at eps = 0.

    Positive eps values run from ``eps_start`` down while they stay at or
    above ``eps_floor``; every penalty level ``n_start * n_factor**k`` is
    then solved at eps = 0.  Unless ``delta`` is given, the smoothing of
    each stage is ``delta_rule(eps, scale)``; pass ``field_scale(domain)``
    as ``scale`` to make the schedule resolution-independent.
    """
    if delta is None:
        def delta(eps):
            return delta_rule(eps, scale)
    if not (0 < eps_factor < 1) or n_factor < 1 or n_stages < 1:
        raise ValueError("need 0 < eps_factor < 1, n_factor >= 1 and n_stages >= 1")
    stages = []
    eps = eps_start
    while eps >= eps_floor and eps > 0:
        stages.append(Stage(eps, n_start, delta(eps), cap, tol))
        eps *= eps_factor
    for k in range(n_stages):
        stages.append(Stage(0.0, n_start * n_factor**k, delta(0.0), cap, tol))
    return ContinuationSchedule(tuple(stages))


def schedule_for(dom: GridDomain, **kwargs) -> ContinuationSchedule:
    """:func:`default_schedule` with delta measured in the domain's field scale."""
    return default_schedule(scale=field_scale(dom), **kwargs)


@dataclass
class StageReport:
    eps: float
    n: float
    delta: float
    energy: float
    multiplier: float
    iterations: int
    grad_norm: float
    mass: float
    converged: bool
    seconds: float = 0.0


@dataclass
class SolveReport:
    stages: List[StageReport]
    u: ScalarField
    sigma: VectorField
    multiplier: float
    rayleigh: float
    energy: float
    history: List[Tuple[int, ScalarField]] = field(default_factory=list, repr=False)

    @property
    def stage_seconds(self) -> List[float]:
        return [s.seconds for s in self.stages]


def multiplier_estimate(u: ScalarField, n: float) -> float:
    """Lagrange multiplier estimate ``-2 n (int u - 1)``."""
    return -2.0 * n * (integrate(u) - 1.0)


def _pg_norm(u, g, h):
    return h * float(np.linalg.norm(u - np.maximum(u - g, 0.0)))


def _stage_report(u, p, e, it, gnorm, mass, converged, t0):
    return StageReport(
        eps=p.eps,
        n=p.n,
        delta=p.delta,
        energy=e,
        multiplier=multiplier_estimate(u, p.n),
        iterations=it,
        grad_norm=gnorm,
        mass=mass,
        converged=converged,
        seconds=time.perf_counter() - t0,
    )


def minimize_stage(
    u0: ScalarField,
    p: PenaltyParams,
    cap: int = 5000,
    tol: float = 1e-6,
    callback: Optional[Callable[[int, float, float, float], None]] = None,
    method: str = "lbfgsb",
) -> Tuple[ScalarField, StageReport]:
    """Minimize the stage energy over nonnegative fields, starting at ``u0``.

    Stops when the projected-gradient norm falls to ``tol * max(1, E)``, when
    no further decrease is possible, or after ``cap`` iterations.  Accepted
    energies never increase and every iterate is exactly nonnegative.
    ``callback(iteration, energy, grad_norm, mass)`` is called once per
    accepted iterate, including the starting point.

    ``method="lbfgsb"`` takes bound-constrained quasi-Newton steps;
    ``method="bb"`` takes projected gradient steps with a Barzilai-Borwein
    proposal and Armijo backtracking.
    """
    if u0.min() < 0:
        raise ValueError("initial field must be nonnegative")
    if u0.max() <= 0:
        raise ValueError("initial field must not vanish identically")
    if p.singular:
        raise ValueError("stage needs delta > 0 when eps < 1")
    if method == "lbfgsb":
        return _minimize_lbfgsb(u0, p, cap, tol, callback)
    if method == "bb":
        return _minimize_bb(u0, p, cap, tol, callback)
    raise ValueError(f"unknown descent method {method!r}")


def _minimize_lbfgsb(u0, p, cap, tol, callback):
    dom = u0.domain
    mask, h = dom.mask, dom.h
    scale = (1.0 + p.eps) * h * h
    t0 = time.perf_counter()
    work = np.zeros(dom.shape)
    last = {}

    def fun(x):
        work[mask] = x
        e, g, mass = energy_and_gradient_arrays(work, mask, h, p)
        if not math.isfinite(e):
            raise SolverError(
                f"non-finite energy (eps={p.eps}, n={p.n})",
                state=ScalarField(dom, last.get("u", u0.values)),
            )
        last.update(x=x.copy(), u=work.copy(), e=e, g=g, mass=mass)
        return e, scale * g[mask]

    x0 = u0.values[mask].copy()
    e, _ = fun(x0)
    state = dict(it=0, e=e, u=last["u"], g=last["g"], mass=last["mass"])
    state["gnorm"] = _pg_norm(state["u"], state["g"], h)
    state["converged"] = state["gnorm"] <= tol * max(1.0, e)
    if callback:
        callback(0, e, state["gnorm"], state["mass"])
    if state["converged"] or cap == 0:
        return u0, _stage_report(u0, p, e, 0, state["gnorm"], state["mass"], state["converged"], t0)

    def on_iter(intermediate_result):
        x = intermediate_result.x
        if not np.array_equal(x, last["x"]):
            fun(x)
        if last["e"] > state["e"]:
            # keep the last accepted iterate rather than an uphill one
            log.warning("line search returned an uphill point; stopping stage early")
            raise StopIteration
        state["it"] += 1
        state.update(e=last["e"], u=last["u"], g=last["g"], mass=last["mass"])
        state["gnorm"] = _pg_norm(state["u"], state["g"], h)
        if callback:
            callback(state["it"], state["e"], state["gnorm"], state["mass"])
        if state["gnorm"] <= tol * max(1.0, state["e"]):
            state["converged"] = True
            raise StopIteration

    minimize(
        fun,
        x0,
        jac=True,
        method="L-BFGS-B",
        bounds=Bounds(np.zeros_like(x0), np.full_like(x0, np.inf)),
        callback=on_iter,
        options=dict(maxiter=cap, maxcor=LBFGS_MEMORY, ftol=1e-15, gtol=0.0, maxfun=50 * cap),
    )
    u = ScalarField(dom, state["u"])
    return u, _stage_report(
        u, p, state["e"], state["it"], state["gnorm"], state["mass"], state["converged"], t0
    )


def _minimize_bb(u0, p, cap, tol, callback):
    dom = u0.domain
    mask, h = dom.mask, dom.h
    q = 1.0 + p.eps
    t0 = time.perf_counter()

    u = u0.values.copy()
    e, g, mass = energy_and_gradient_arrays(u, mask, h, p)
    if not math.isfinite(e):
        raise SolverError("non-finite energy at the starting point", state=u0)
    gnorm = _pg_norm(u, g, h)
    if callback:
        callback(0, e, gnorm, mass)
    it = 0
    converged = gnorm <= tol * max(1.0, e)
    gmax = float(np.abs(g).max())
    alpha = min(1.0, u.max() / gmax) if gmax > 0 else 1.0
    while not converged and it < cap:
        for _ in range(MAX_BACKTRACKS):
            trial = np.maximum(u - alpha * g, 0.0)
            step = trial - u
            # directional derivative of E along the projected step
            slope = q * h * h * float(np.sum(g * step))
            e_new, g_new, mass_new = energy_and_gradient_arrays(trial, mask, h, p)
            if not math.isfinite(e_new):
                raise SolverError(
                    f"non-finite energy at iteration {it + 1} (eps={p.eps}, n={p.n})",
                    state=ScalarField(dom, u),
                )
            if e_new <= e + ARMIJO_C * slope:
                break
            alpha *= 0.5
        else:
            log.debug("backtracking stalled at iteration %d", it)
            break
        it += 1
        y = g_new - g
        sy = float(np.sum(step * y))
        ss = float(np.sum(step * step))
        u, e, g, mass = trial, e_new, g_new, mass_new
        gnorm = _pg_norm(u, g, h)
        if callback:
            callback(it, e, gnorm, mass)
        converged = gnorm <= tol * max(1.0, e)
        alpha = ss / sy if sy > 0 else 1e3 * alpha
        alpha = min(max(alpha, 1e-14), 1e14)

    u_out = ScalarField(dom, u)
    return u_out, _stage_report(u_out, p, e, it, gnorm, mass, converged, t0)


def _log_row(sink, stage, n, it, e, gn, mass):
    sink(stage, it, e, gn, mass, -2.0 * n * (mass - 1.0))


def initial_field(dom: GridDomain, seed: int = 0) -> ScalarField:
    """Distance-to-boundary bump with unit integral and a small seeded jitter."""
    dist = ndimage.distance_transform_edt(dom.mask) * dom.h
    rng = np.random.default_rng(seed)
    u = dist * (1.0 + JITTER * rng.uniform(-1.0, 1.0, size=dist.shape))
    u = np.where(dom.mask, np.maximum(u, 0.0), 0.0)
    u /= dom.h**2 * u.sum()
    return ScalarField(dom, u)


def continuation_solve(
    dom: GridDomain,
    sched: ContinuationSchedule,
    seed: int = 0,
    u0: Optional[ScalarField] = None,
    iteration_log: Optional[Callable[..., None]] = None,
    method: str = "lbfgsb",
) -> SolveReport:
    """Run every stage of ``sched`` in order, warm-starting each.

    ``iteration_log(stage, iteration, energy, grad_norm, mass, multiplier)``
    receives one call per accepted iterate.  The returned report carries
    the field at the end of each eps = 0 stage in ``history``.
    """
    u = initial_field(dom, seed) if u0 is None else u0
    reports: List[StageReport] = []
    history = []
    for k, st in enumerate(sched):
        cb = None
        if iteration_log is not None:
            # at eps > 0 the mass is int u^(1+eps), matching that stage's penalty
            cb = functools.partial(_log_row, iteration_log, k, st.n)

        try:
            u, rep = minimize_stage(u, st.params, st.cap, st.tol, callback=cb, method=method)
        except SolverError as err:
            err.reports = reports
            raise
        log.info(
            "stage %d eps=%g n=%g delta=%g: E=%.8g mult=%.6g iters=%d |pg|=%.2e",
            k, st.eps, st.n, st.delta, rep.energy, rep.multiplier, rep.iterations, rep.grad_norm,
        )
        reports.append(rep)
        if st.eps == 0:
            history.append((st.n, u))
        if integrate(u) <= COLLAPSE_MASS:
            # the penalty is too weak to keep any mass; later stages cannot recover
            raise SolverError(
                f"field collapsed at stage {k} (n={st.n}, int u={integrate(u):.3g})",
                state=u, reports=reports,
            )
    last = sched.stages[-1]
    sigma = sigma_field(u, last.params)
    mass = integrate(u)
    final_energy = total_variation(u) + last.n * (mass - 1.0) ** 2
    return SolveReport(
        stages=reports,
        u=u,
        sigma=sigma,
        multiplier=multiplier_estimate(u, last.n),
        rayleigh=total_variation(u) / mass,
        energy=final_energy,
        history=history,
    )
