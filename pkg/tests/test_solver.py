import math

import numpy as np
import pytest
from oracles import discrete_optimum

from onelap.energy import PenaltyParams, energy
from onelap.grid import Disk, Rectangle, integrate, rasterize
from onelap.solver import (
    ContinuationSchedule,
    SolverError,
    Stage,
    continuation_solve,
    default_schedule,
    delta_rule,
    field_scale,
    initial_field,
    minimize_stage,
    multiplier_estimate,
    schedule_for,
)


@pytest.fixture(scope="module")
def disk8():
    return rasterize(Disk(1.0), 8)


@pytest.fixture(scope="module")
def square8():
    return rasterize(Rectangle(1, 1), 8)


def recorded_stage(u0, p, **kw):
    seen = []
    u, rep = minimize_stage(u0, p, callback=lambda it, e, gn, mass: seen.append((it, e)), **kw)
    return u, rep, seen


# -- schedule ------------------------------------------------------------------


def test_stage_and_schedule_validation():
    with pytest.raises(ValueError):
        ContinuationSchedule((Stage(0.5, 8.0, 0.0),))  # singular smoothing
    with pytest.raises(ValueError):
        Stage(0.5, -1.0, 1e-3)
    with pytest.raises(ValueError):
        ContinuationSchedule((Stage(0.1, 8, 1e-3), Stage(0.2, 8, 1e-3)))  # eps increases
    with pytest.raises(ValueError):
        ContinuationSchedule((Stage(0.0, 32, 1e-3), Stage(0.0, 8, 1e-3)))  # n decreases
    with pytest.raises(ValueError):
        ContinuationSchedule(())


def test_default_schedule_shape():
    s = default_schedule()
    eps = [st.eps for st in s]
    ns = [st.n for st in s]
    assert eps == [0.5, 0.25, 0.125, 0.0625, 0, 0, 0, 0]
    assert ns == [8, 8, 8, 8, 8, 32, 128, 512]
    assert all(a >= b for a, b in zip(eps, eps[1:]))
    assert all(a <= b for a, b in zip(ns, ns[1:]))
    # eps reaches zero before the penalty grows
    assert ns[eps.index(0)] == ns[0]
    assert s.penalty_levels == [8, 32, 128, 512]


def test_delta_rule_scales_with_field():
    dom = rasterize(Rectangle(1, 1), 16)
    assert field_scale(dom) == pytest.approx(16.0)
    assert delta_rule(0.0) == pytest.approx(1e-4)
    assert delta_rule(0.5, 10.0) == pytest.approx(10 * (5e-3 + 1e-4))
    assert schedule_for(dom).stages[-1].delta == pytest.approx(16e-4)


def test_multiplier_estimate_arithmetic(square8):
    u = square8.indicator() * 0.999
    assert integrate(u) == pytest.approx(0.999)
    assert multiplier_estimate(u, 1000.0) == pytest.approx(2.0, rel=1e-9)


def test_initial_field_has_unit_mass_and_is_seeded(disk8):
    a, b, c = initial_field(disk8, 0), initial_field(disk8, 0), initial_field(disk8, 1)
    assert integrate(a) == pytest.approx(1.0, rel=1e-12)
    assert a.min() >= 0
    assert np.array_equal(a.values, b.values)
    assert not np.array_equal(a.values, c.values)


# -- single stage ------------------------------------------------------------------


@pytest.mark.parametrize("method", ["lbfgsb", "bb"])
def test_stage_strict_descent_and_nonnegativity(disk8, method):
    p = PenaltyParams(0.5, 4.0, 1e-2)
    u0 = initial_field(disk8, 0)
    u, rep, seen = recorded_stage(u0, p, cap=300, method=method)
    es = [e for _, e in seen]
    assert all(b <= a for a, b in zip(es, es[1:]))
    assert rep.energy < energy(u0, p)
    assert rep.energy == pytest.approx(energy(u, p), rel=1e-12)
    assert u.min() >= 0.0
    assert not u.values[~disk8.mask].any()


def test_stage_large_penalty_pins_the_mass(disk8):
    p = PenaltyParams(0.5, 1e6, 1e-2)
    u, rep = minimize_stage(initial_field(disk8, 0), p, cap=2000)
    m = disk8.h**2 * float(np.sum(u.values**1.5))
    assert 0.99 <= m <= 1.01


def test_zero_cap_is_a_no_op(disk8):
    u0 = initial_field(disk8, 0)
    u, rep = minimize_stage(u0, PenaltyParams(0.5, 4.0, 1e-2), cap=0)
    assert np.array_equal(u.values, u0.values)
    assert rep.iterations == 0


def test_stage_input_validation(disk8):
    p = PenaltyParams(0.5, 4.0, 1e-2)
    with pytest.raises(ValueError):
        minimize_stage(disk8.zeros(), p)
    with pytest.raises(ValueError):
        minimize_stage(initial_field(disk8), PenaltyParams(0.5, 4.0, 0.0))
    with pytest.raises(ValueError, match="method"):
        minimize_stage(initial_field(disk8), p, method="newton")


# -- continuation ------------------------------------------------------------------


@pytest.fixture(scope="module")
def square8_run(square8):
    return continuation_solve(square8, schedule_for(square8))


def test_multiplier_matches_conic_optimum(square8, square8_run):
    _, _, lam = discrete_optimum(square8, 512.0)
    assert square8_run.multiplier == pytest.approx(lam, rel=2e-3)
    assert square8_run.rayleigh == pytest.approx(lam, rel=1e-2)


def test_penalty_ladder_follows_scalar_reduction(square8, square8_run):
    # at the eps = 0 optimum of penalty n: int u = 1 - lam/(2n), energy = lam - lam^2/(4n)
    _, _, lam = discrete_optimum(square8, 512.0)
    assert len(square8_run.history) == 4
    for (n, u), rep in zip(square8_run.history, square8_run.stages[-4:]):
        assert integrate(u) == pytest.approx(1 - lam / (2 * n), abs=2e-3)
        assert rep.energy == pytest.approx(lam - lam * lam / (4 * n), rel=2e-3)
        assert multiplier_estimate(u, n) == pytest.approx(lam, rel=2e-3)


def test_weak_penalty_collapses_with_state(square8):
    # with 2n below the eigenvalue the optimum of the scalar reduction is zero
    sched = ContinuationSchedule((Stage(0.0, 0.5, 1e-2, cap=2000),))
    with pytest.raises(SolverError) as info:
        continuation_solve(square8, sched)
    assert info.value.state is not None
    assert integrate(info.value.state) <= 1e-2
    assert len(info.value.reports) == 1


def test_two_seeds_agree(disk8):
    sched = schedule_for(disk8)
    a = continuation_solve(disk8, sched, seed=1)
    b = continuation_solve(disk8, sched, seed=2)
    l1 = float(np.abs(a.u.values - b.u.values).sum())
    assert l1 <= 1e-2 * float(np.abs(a.u.values).sum())
    assert a.multiplier == pytest.approx(b.multiplier, rel=1e-3)


def test_iteration_log_rows(disk8):
    rows = []
    sched = default_schedule(eps_start=0.5, eps_floor=0.5, n_stages=1, cap=50,
                             scale=field_scale(disk8))
    continuation_solve(disk8, sched, iteration_log=lambda *r: rows.append(r))
    stages = {r[0] for r in rows}
    assert stages == {0, 1}
    for stage, it, e, gn, mass, mult in rows:
        assert math.isfinite(e) and gn >= 0
        assert mult == pytest.approx(-2 * 8.0 * (mass - 1))


def test_eps_limit_consistency(disk8):
    rep = continuation_solve(disk8, schedule_for(disk8))
    # exact eps = 0, delta = 0 energy of the final iterate against the last stage's energy
    assert rep.energy == pytest.approx(rep.stages[-1].energy, rel=0.05)
    # at the starting penalty the eps stages approach the eps = 0 energy, gap shrinking with eps
    at_start = [s for s in rep.stages if s.n == rep.stages[0].n]
    limit = at_start[-1].energy
    gaps = [s.energy - limit for s in at_start[:-1]]
    assert all(g > 0 for g in gaps)
    assert all(b < 0.7 * a for a, b in zip(gaps, gaps[1:]))


def test_mass_between_the_two_thresholds(square8):
    # lam/2 < n < lam: a nonzero solution with int u = 1 - lam/(2n), so 2n > lam is the sharp threshold
    _, _, lam = discrete_optimum(square8, 512.0)
    n = 2.5
    assert lam / 2 < n < lam
    st = Stage(0.0, n, delta_rule(0.0, field_scale(square8)), cap=5000)
    rep = continuation_solve(square8, ContinuationSchedule((st,)))
    assert integrate(rep.u) == pytest.approx(1 - lam / (2 * n), abs=5e-3)


@pytest.mark.slow
def test_disk_default_schedule_64_grid():
    dom = rasterize(Disk(1.0), 32)  # 64 x 64 cells across the disk
    rep = continuation_solve(dom, schedule_for(dom))
    assert 1.85 <= rep.multiplier <= 2.15
