import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from onelap.cheeger import ConvexPolygon
from onelap.grid import (
    Disk,
    GridDomain,
    Rectangle,
    ScalarField,
    VectorField,
    divergence,
    gradient,
    inner,
    integrate,
    rasterize,
    shift,
    total_variation,
)


def spike_domain():
    dom = GridDomain.from_mask(np.ones((3, 3), bool), 1.0)
    u = np.zeros(dom.shape)
    u[2, 2] = 1.0
    return dom, ScalarField(dom, u)


def random_domain(rng, n=8, fill=0.7):
    """Random 4-connected mask: largest component of a random blob."""
    from scipy import ndimage

    while True:
        m = rng.random((n, n)) < fill
        lab, k = ndimage.label(m)
        if k == 0:
            continue
        sizes = ndimage.sum(m, lab, range(1, k + 1))
        m = lab == (1 + int(np.argmax(sizes)))
        return GridDomain.from_mask(m, float(rng.uniform(0.05, 1.0)))


# -- rasterize ---------------------------------------------------------------


def test_disk_cell_count_matches_center_enumeration():
    dom = rasterize(Disk(1.0), 64)
    # independent count of cell centers strictly inside the unit circle
    h = 1 / 64
    count = 0
    for i in range(128):
        x = -1 + (i + 0.5) * h
        for j in range(128):
            y = -1 + (j + 0.5) * h
            if x * x + y * y < 1:
                count += 1
    assert dom.cell_count == count
    assert abs(count - math.pi * 64**2) <= 0.02 * math.pi * 64**2


def test_unit_square_fills_grid():
    dom = rasterize(Rectangle(1, 1), 16)
    assert dom.cell_count == 256
    assert dom.mask[1:-1, 1:-1].all()
    assert dom.shape == (18, 18)
    assert dom.h == pytest.approx(1 / 16)


def test_polygon_rasterization_matches_rectangle():
    a = rasterize(Rectangle(2, 1), 10)
    b = rasterize(ConvexPolygon.rectangle(2, 1), 10)
    assert np.array_equal(a.mask, b.mask)


def test_degenerate_polygon_rejected():
    with pytest.raises(ValueError, match="degenerate|convex"):
        rasterize(ConvexPolygon([(0, 0), (1, 1), (2, 2)]), 16)


def test_empty_rasterization_rejected():
    sliver = ConvexPolygon([(0, 0), (1, 0), (0, 0.01)])
    with pytest.raises(ValueError, match="empty rasterization"):
        rasterize(sliver, 8)


def test_disconnected_mask_rejected():
    m = np.zeros((5, 5), bool)
    m[1, 1] = m[3, 3] = True
    with pytest.raises(ValueError, match="4-connected"):
        GridDomain(m, 1.0)
    # diagonal contact is not a 4-neighbour
    m[2, 2] = True
    with pytest.raises(ValueError, match="4-connected"):
        GridDomain(m, 1.0)


def test_domain_invariants():
    with pytest.raises(ValueError):
        GridDomain(np.zeros((4, 4), bool), 1.0)
    with pytest.raises(ValueError, match="border"):
        GridDomain(np.ones((4, 4), bool), 1.0)
    with pytest.raises(ValueError):
        GridDomain.from_mask(np.ones((2, 2), bool), 0.0)
    dom = rasterize(Disk(1.0), 16)
    b = dom.boundary_cells
    assert np.all(dom.mask[b])
    # boundary cells are exactly the mask cells with an exterior 4-neighbour
    m = dom.mask
    ext = np.zeros_like(m)
    ext[1:-1, 1:-1] = ~(m[2:, 1:-1] & m[:-2, 1:-1] & m[1:-1, 2:] & m[1:-1, :-2])
    assert np.array_equal(b, m & ext)


def test_scalar_field_invariants():
    dom = rasterize(Rectangle(1, 1), 4)
    with pytest.raises(ValueError, match="vanish"):
        ScalarField(dom, np.ones(dom.shape))
    bad = np.zeros(dom.shape)
    bad[2, 2] = np.nan
    with pytest.raises(ValueError, match="non-finite"):
        ScalarField(dom, bad)
    with pytest.raises(ValueError, match="non-finite"):
        VectorField(dom, bad, np.zeros(dom.shape))


# -- gradient / divergence ------------------------------------------------------


def test_gradient_of_constant():
    dom = GridDomain.from_mask(np.ones((4, 4), bool), 1.0)
    c = 2.5
    g = gradient(dom.indicator() * c)
    inner_cells = np.zeros(dom.shape, bool)
    inner_cells[1:4, 1:4] = True
    assert np.all(g.vx[inner_cells] == 0) and np.all(g.vy[inner_cells] == 0)
    assert np.all(g.vx[4, 1:5] == -c)
    assert np.all(g.vy[1:5, 4] == -c)
    # cells left of / below the mask see the jump into it
    assert np.all(g.vx[0, 1:5] == c) and np.all(g.vy[1:5, 0] == c)


def test_gradient_center_spike():
    dom, u = spike_domain()
    mag = gradient(u).magnitude()
    expected = np.zeros(dom.shape)
    expected[2, 2] = math.sqrt(2)
    expected[1, 2] = 1.0  # left neighbour
    expected[2, 1] = 1.0  # bottom neighbour
    np.testing.assert_allclose(mag, expected, rtol=0, atol=0)


def test_gradient_of_zero():
    dom = rasterize(Disk(1.0), 8)
    g = gradient(dom.zeros())
    assert not g.vx.any() and not g.vy.any()


def test_divergence_examples():
    dom, u = spike_domain()
    z = VectorField(dom, np.zeros(dom.shape), np.zeros(dom.shape))
    assert not divergence(z).values.any()
    assert divergence(gradient(u)).values[2, 2] == -4.0


def test_adjointness_fixed_random():
    rng = np.random.default_rng(1)
    dom = GridDomain.from_mask(np.ones((8, 8), bool), 1.0 / 8)
    u = dom.field(rng.normal(size=dom.shape))
    s = VectorField(dom, rng.normal(size=dom.shape), rng.normal(size=dom.shape))
    defect = inner(gradient(u), s) + inner(u, divergence(s))
    nu = math.sqrt(inner(u, u))
    ns = math.sqrt(inner(s, s))
    assert abs(defect) <= 1e-12 * nu * ns


@settings(max_examples=60, deadline=None)
@given(seed=st.integers(0, 2**32 - 1), n=st.integers(2, 12), fill=st.floats(0.3, 1.0))
def test_adjointness_property(seed, n, fill):
    rng = np.random.default_rng(seed)
    dom = random_domain(rng, n, fill)
    u = dom.field(rng.normal(size=dom.shape) * 10 ** rng.uniform(-3, 3))
    s = VectorField(dom, rng.normal(size=dom.shape), rng.normal(size=dom.shape))
    defect = inner(gradient(u), s) + inner(u, divergence(s))
    scale = max(1.0, math.sqrt(inner(u, u) * inner(s, s)))
    assert abs(defect) <= 1e-12 * scale


# -- integrate / total variation ---------------------------------------------


def test_integrate_examples():
    dom = rasterize(Rectangle(1, 1), 16)
    assert integrate(dom.indicator()) == 1.0
    assert integrate(dom.zeros()) == 0.0
    half = np.zeros(dom.shape, bool)
    half[1:9, 1:17] = True
    assert integrate(2 * dom.indicator(half)) == 1.0


def test_total_variation_spike():
    _, u = spike_domain()
    assert total_variation(u) == pytest.approx(2 + math.sqrt(2), abs=1e-14)


def test_total_variation_of_zero():
    assert total_variation(rasterize(Disk(1.0), 8).zeros()) == 0.0


def test_total_variation_unit_square_is_boundary_term():
    h = 1 / 16
    tv = total_variation(rasterize(Rectangle(1, 1), 16).indicator())
    # 62 rim cells carry a unit jump; the top-right corner cell carries (-1, -1)
    assert tv == pytest.approx(h * (62 + math.sqrt(2)), rel=1e-14)
    assert tv == pytest.approx(4.0, rel=2 * h * (2 - math.sqrt(2)))


def test_zero_extension_boundary_term_positive():
    for shape in (Disk(1.0), Rectangle(2, 1), ConvexPolygon.regular(5)):
        dom = rasterize(shape, 12)
        assert total_variation(dom.indicator()) > 0


@settings(max_examples=40, deadline=None)
@given(seed=st.integers(0, 2**32 - 1), t=st.floats(0, 1e3))
def test_total_variation_homogeneous(seed, t):
    rng = np.random.default_rng(seed)
    dom = random_domain(rng)
    u = dom.field(rng.normal(size=dom.shape))
    assert total_variation(u * t) == pytest.approx(t * total_variation(u), rel=1e-12, abs=1e-300)


@settings(max_examples=40, deadline=None)
@given(seed=st.integers(0, 2**32 - 1), di=st.integers(0, 5), dj=st.integers(0, 5))
def test_translation_invariance(seed, di, dj):
    rng = np.random.default_rng(seed)
    dom = random_domain(rng)
    u = dom.field(rng.normal(size=dom.shape))
    v = shift(u, di, dj)
    assert integrate(v) == integrate(u)
    assert total_variation(v) == total_variation(u)
