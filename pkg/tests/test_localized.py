import math

import numpy as np
import pytest
import scipy.integrate
from hypothesis import given, settings
from hypothesis import strategies as st

from elastomono.errors import DomainError
from elastomono.farfield import (
    DirectionGrid,
    HerglotzDensity,
    channel_weights,
    herglotz,
    herglotz_incidence,
    inner,
)
from elastomono.forward import eval_field, solve_disk
from elastomono.localized import (
    RegionSamples,
    localization_curve,
    localize,
    restriction_matrix,
    write_curve_csv,
)
from elastomono.medium import Background, Disk, MaterialField, Rect, disk_field

BG = Background(2.0, 1.0, 1.0, 2.0)
EMPTY = MaterialField(BG)
B_DISK = Disk((-1.5, 0.0), 0.5)
D_DISK = Disk((1.5, 0.0), 0.5)


def _density(N, seed):
    rng = np.random.default_rng(seed)
    return HerglotzDensity(rng.normal(size=N) + 1j * rng.normal(size=N),
                           rng.normal(size=N) + 1j * rng.normal(size=N))


@pytest.mark.parametrize("shape", [Disk((0.3, -0.2), 0.5), Rect((0, 0), (1.0, 0.4)), Disk((0, 0), 1.3)])
def test_region_area_and_interior(shape):
    r = RegionSamples.build(shape)
    lo, hi = shape.bbox()
    area = math.pi * shape.radius**2 if isinstance(shape, Disk) else np.prod(np.subtract(hi, lo))
    assert r.area == pytest.approx(area, rel=0.01)
    assert shape.contains(r.points).all()


def test_region_rejects_bad_variant():
    with pytest.raises(DomainError):
        RegionSamples.build(B_DISK, variant=7)


def test_zero_density_maps_to_zero():
    L = restriction_matrix(EMPTY, RegionSamples.build(B_DISK), DirectionGrid(16))
    assert not np.any(L @ np.zeros(32))


def test_divergence_of_shear_density_vanishes():
    grid = DirectionGrid(16)
    L = restriction_matrix(EMPTY, RegionSamples.build(B_DISK, variant=2), grid)
    g = _density(16, 0)
    v = np.concatenate([np.zeros(16), g.gs])
    assert np.linalg.norm(L @ v) <= 1e-10


def test_field_norm_vs_adaptive_quadrature():
    grid = DirectionGrid(16)
    g = _density(16, 1)
    region = RegionSamples.build(B_DISK, cells=60)
    L = restriction_matrix(EMPTY, region, grid)
    approx = np.linalg.norm(L @ g.vector) ** 2

    def integrand(r, t):
        x = B_DISK.center + r * np.array([math.cos(t), math.sin(t)])
        u, _ = herglotz(g, grid, BG, x[None])
        return float(np.sum(np.abs(u) ** 2)) * r

    exact, _ = scipy.integrate.dblquad(integrand, 0, 2 * math.pi, 0, B_DISK.radius, epsrel=1e-7)
    assert approx == pytest.approx(exact, rel=0.01)


def test_variant0_stacks_field_and_gradient():
    grid = DirectionGrid(16)
    r = RegionSamples.build(B_DISK, cells=20)
    L0 = restriction_matrix(EMPTY, r.with_variant(0), grid)
    L1 = restriction_matrix(EMPTY, r.with_variant(1), grid)
    np.testing.assert_array_equal(L0[:L1.shape[0]], L1)
    assert L0.shape[0] == 3 * L1.shape[0]


def test_quadrature_refinement_dominance():
    grid = DirectionGrid(16)
    g = _density(16, 2).vector
    norms = [np.linalg.norm(restriction_matrix(EMPTY, RegionSamples.build(B_DISK, cells=c), grid) @ g)
             ** 2 for c in (40, 80)]
    assert abs(norms[1] - norms[0]) <= 0.01 * norms[1]


def test_single_disk_medium_matches_series_field():
    grid = DirectionGrid(16)
    f = disk_field(BG, (0.0, 0.0), 0.6, psi_rho=0.3)
    region = RegionSamples.build(Disk((0.1, 0.0), 0.3), cells=8)
    g = _density(16, 3)
    L = restriction_matrix(f, region, grid)
    u = eval_field(solve_disk(BG, f, herglotz_incidence(g, grid, BG)), region.points).u
    expect = (u * np.sqrt(region.weights)[:, None]).T.ravel()
    np.testing.assert_allclose(L @ g.vector, expect, atol=1e-12)


# -- localization


@pytest.fixture(scope="module")
def mats():
    grid = DirectionGrid(32)
    LB = restriction_matrix(EMPTY, RegionSamples.build(B_DISK), grid)
    LD = restriction_matrix(EMPTY, RegionSamples.build(D_DISK), grid)
    return grid, LB, LD


def test_localize_normalization(mats):
    grid, LB, LD = mats
    r = localize(LB, LD, 1e-4, channel_weights(grid, BG))
    assert inner(r.g, r.g, grid, BG).real == pytest.approx(1.0, abs=1e-10)
    assert r.ratio >= 0


@settings(max_examples=8, deadline=None)
@given(delta=st.floats(1e-8, 1.0))
def test_identical_regions_cannot_blow_up(mats, delta):
    grid, LB, _ = mats
    r = localize(LB, LB, delta, channel_weights(grid, BG))
    assert r.eigenvalue <= 1 + 1e-8
    assert r.ratio == pytest.approx(1.0, rel=1e-8)


def test_localize_rejects_nonpositive_delta(mats):
    grid, LB, LD = mats
    with pytest.raises(DomainError):
        localize(LB, LD, 0.0, channel_weights(grid, BG))


def test_disjoint_regions_ratio_grows(mats):
    grid, LB, LD = mats
    w = channel_weights(grid, BG)
    hi, lo = localize(LB, LD, 1e-2, w), localize(LB, LD, 1e-6, w)
    assert lo.ratio >= 10 * hi.ratio


def test_curve_increasing_and_blow_up():
    curve = localization_curve(RegionSamples.build(B_DISK), RegionSamples.build(D_DISK), EMPTY,
                               DirectionGrid(32), [1e-2, 1e-4, 1e-6, 1e-8], variant=1)
    ratios = [p.ratio for p in curve]
    nD = [p.norm_D for p in curve]
    assert all(b > a for a, b in zip(ratios, ratios[1:]))
    assert all(b < a for a, b in zip(nD, nD[1:]))
    assert max(ratios) > 1e2


def test_subset_region_ratio_bounded():
    grid = DirectionGrid(16)
    D = RegionSamples.build(Disk((0, 0), 0.8))
    sel = np.hypot(*D.points.T) < 0.4
    B = RegionSamples(Disk((0, 0), 0.4), D.points[sel], D.weights[sel])
    for p in localization_curve(B, D, EMPTY, grid, [1e-2, 1e-4, 1e-6]):
        assert p.ratio <= 1 + 1e-10


def test_swapping_regions_swaps_growth():
    grid = DirectionGrid(32)
    B, D = RegionSamples.build(B_DISK), RegionSamples.build(D_DISK)
    LB, LD = restriction_matrix(EMPTY, B, grid), restriction_matrix(EMPTY, D, grid)
    w = channel_weights(grid, BG)
    g1 = localize(LB, LD, 1e-6, w).g.vector
    g2 = localize(LD, LB, 1e-6, w).g.vector
    assert np.linalg.norm(LB @ g1) > 100 * np.linalg.norm(LD @ g1)
    assert np.linalg.norm(LD @ g2) > 100 * np.linalg.norm(LB @ g2)


@pytest.mark.parametrize("variant", [0, 2, 3])
def test_other_variants_localize(variant):
    curve = localization_curve(RegionSamples.build(B_DISK, cells=20), RegionSamples.build(D_DISK, cells=20),
                               EMPTY, DirectionGrid(32), [1e-2, 1e-6], variant=variant)
    assert curve[1].ratio > curve[0].ratio > 1


def test_curve_csv(tmp_path):
    curve = localization_curve(RegionSamples.build(B_DISK, cells=10), RegionSamples.build(D_DISK, cells=10),
                               EMPTY, DirectionGrid(16), [1e-2, 1e-4])
    write_curve_csv(curve, tmp_path / "c.csv")
    lines = (tmp_path / "c.csv").read_text().splitlines()
    assert lines[0] == "delta,ratio,norm_B,norm_D"
    assert float(lines[1].split(",")[0]) == 1e-2 and len(lines) == 3
