import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import integrate
from scipy.special import h1vp, hankel1

from elastomono.errors import (
    DomainError,
    TransmissionEigenvalueError,
    TruncationError,
    UnderResolvedError,
)
from elastomono.forward import (
    FarFieldPattern,
    Incidence,
    PlaneWave,
    eval_field,
    far_field,
    solve_disk,
    solve_grid,
    stress_trace,
    write_far_field_csv,
)
from elastomono.forward import kernels, series
from elastomono.forward.series import _region_fields
from elastomono.medium import Background, Disk, Inclusion, MaterialField, disk_field

BG = Background(2.0, 1.0, 1.0, 2.0)  # kp0 = 1, ks0 = 2
TH256 = np.linspace(0, 2 * np.pi, 256, endpoint=False)


def _traction(g, lam, mu, nu):
    div = g[:, 0, 0] + g[:, 1, 1]
    return lam * div[:, None] * nu + mu * np.einsum("nij,nj->ni", g + np.swapaxes(g, 1, 2), nu)


def _ff_vec(sol, th):
    p = far_field(sol, th)
    return np.concatenate([p.up, p.us])


# -- disk series


def test_zero_contrast_series():
    f = disk_field(BG, (0, 0), 1.0)
    sol = solve_disk(BG, f, PlaneWave("P", 0.3))
    assert not np.any(sol.A) and not np.any(sol.B)
    p = far_field(sol, 16)
    assert not np.any(p.up) and not np.any(p.us)
    fv = eval_field(sol, np.array([[2.0, 0.5], [0.1, 0.1]]), part="scattered")
    assert not np.any(fv.u)


@pytest.mark.parametrize("mode", ["P", "S"])
@pytest.mark.parametrize("psi", [(0, 0, 0.3), (1.0, 0.5, 0.2), (0.0, 2.0, 0.0)])
def test_transmission_residual(mode, psi):
    a = 1.0
    sol = solve_disk(BG, Inclusion(Disk((0, 0), a), *psi), PlaneWave(mode, 0.7))
    r = np.full(TH256.size, a)
    nu = np.stack([np.cos(TH256), np.sin(TH256)], -1)
    uo, go = _region_fields("h", BG.kp, BG.ks, sol.A, sol.B, r, TH256)
    ui, gi = sol.incident.fields(BG, a * nu)
    uo, go = uo + ui, go + gi
    uin, gin = _region_fields("j", sol.k_int.kp, sol.k_int.ks, sol.C, sol.D, r, TH256)
    lam1, mu1, _ = sol.interior
    scale = np.abs(ui).max()
    assert np.abs(uo - uin).max() <= 1e-8 * scale
    To = _traction(go, BG.lambda0, BG.mu0, nu)
    Ti = _traction(gin, lam1, mu1, nu)
    assert np.abs(To - Ti).max() <= 1e-8 * np.abs(To).max()
    assert sol.residual <= 1e-10


@pytest.mark.parametrize("radius", [0.5, 1.0, 2.0, 4.0])  # ks0 a = 1 .. 8
@pytest.mark.parametrize("mode", ["P", "S"])
def test_truncation_self_convergence(radius, mode):
    inc = Inclusion(Disk((0, 0), radius), 0.5, 0.3, 0.4)
    th = np.linspace(0, 2 * np.pi, 64, endpoint=False)
    s1 = solve_disk(BG, inc, PlaneWave(mode, 1.1))
    s2 = solve_disk(BG, inc, PlaneWave(mode, 1.1), M=s1.M + 8)
    assert s1.M == series.default_truncation(BG.ks * radius)
    a, b = _ff_vec(s1, th), _ff_vec(s2, th)
    assert np.linalg.norm(a - b) <= 1e-8 * np.linalg.norm(b)


def test_truncation_error_when_M_too_small():
    with pytest.raises(TruncationError):
        solve_disk(BG, Inclusion(Disk((0, 0), 2.0), psi_rho=0.5), PlaneWave("P", 0.0), M=3)


def test_singular_mode_reported(monkeypatch):
    monkeypatch.setattr(series, "COND_LIMIT", 1.0)
    with pytest.raises(TransmissionEigenvalueError) as err:
        solve_disk(BG, Inclusion(Disk((0, 0), 1.0), psi_rho=0.5), PlaneWave("P", 0.0))
    assert isinstance(err.value.mode, int)


@settings(max_examples=25, deadline=None)
@given(alpha=st.floats(0, 2 * np.pi), beta=st.floats(-np.pi, np.pi), mode=st.sampled_from("PS"))
def test_rotational_covariance(alpha, beta, mode):
    inc = Inclusion(Disk((0, 0), 1.0), 0.7, 0.2, 0.3)
    th = np.linspace(0, 2 * np.pi, 16, endpoint=False)
    a = _ff_vec(solve_disk(BG, inc, PlaneWave(mode, alpha)), th)
    b = _ff_vec(solve_disk(BG, inc, PlaneWave(mode, alpha + beta)), th + beta)
    assert np.abs(a - b).max() <= 1e-10 * np.abs(a).max()


@settings(max_examples=15, deadline=None)
@given(
    c=st.lists(st.complex_numbers(max_magnitude=3, allow_nan=False, allow_infinity=False),
               min_size=3, max_size=3),
)
def test_superposition_linearity(c):
    inc = Inclusion(Disk((0, 0), 1.0), psi_rho=0.4)
    waves = [PlaneWave("P", 0.2), PlaneWave("S", 2.0), PlaneWave("P", 4.0)]
    comb = Incidence.superpose([w.mode for w in waves], [w.angle for w in waves], c)
    th = np.linspace(0, 2 * np.pi, 8, endpoint=False)
    lhs = _ff_vec(solve_disk(BG, inc, comb), th)
    rhs = sum(ci * _ff_vec(solve_disk(BG, inc, w), th) for ci, w in zip(c, waves))
    assert np.abs(lhs - rhs).max() <= 1e-12 * (1 + np.abs(rhs).max())


@pytest.mark.parametrize("mode", ["P", "S"])
def test_near_to_far(mode):
    # oracle: scipy Hankel functions on the modal coefficients at 200 P wavelengths
    sol = solve_disk(BG, disk_field(BG, (0, 0), 1.0, 0.5, 0.3, 0.3), PlaneWave(mode, 0.4))
    th = np.linspace(0, 2 * np.pi, 16, endpoint=False)
    r = 200 * 2 * np.pi / BG.kp
    n = sol.orders
    E = np.exp(1j * np.outer(th, n))
    ur = E @ (sol.A * BG.kp * h1vp(n, BG.kp * r)) + E @ (sol.B * 1j * n / r * hankel1(n, BG.ks * r))
    ut = E @ (sol.A * 1j * n / r * hankel1(n, BG.kp * r)) - E @ (sol.B * BG.ks * h1vp(n, BG.ks * r))
    direct = np.concatenate([ur * np.sqrt(r) * np.exp(-1j * BG.kp * r),
                             ut * np.sqrt(r) * np.exp(-1j * BG.ks * r)])
    ref = _ff_vec(sol, th)
    assert np.linalg.norm(direct - ref) <= 1e-3 * np.linalg.norm(ref)


def test_off_centre_disk_matches_translated_phase():
    inc0 = Inclusion(Disk((0, 0), 1.0), psi_rho=0.3)
    z = np.array([0.5, -0.25])
    inc1 = Inclusion(Disk(tuple(z), 1.0), psi_rho=0.3)
    th = np.linspace(0, 2 * np.pi, 32, endpoint=False)
    w = PlaneWave("S", 0.9)
    p0 = far_field(solve_disk(BG, inc0, w), th)
    p1 = far_field(solve_disk(BG, inc1, w), th)
    xz = z[0] * np.cos(th) + z[1] * np.sin(th)
    ph_in = np.exp(1j * BG.ks * (w.direction @ z))
    np.testing.assert_allclose(p1.up, np.exp(-1j * BG.kp * xz) * p0.up * ph_in, atol=1e-13)
    np.testing.assert_allclose(p1.us, np.exp(-1j * BG.ks * xz) * p0.us * ph_in, atol=1e-13)


# -- field evaluation


def _fd_grad(sol, pts, h=1e-5):
    g = np.empty((len(pts), 2, 2), dtype=complex)
    for j in range(2):
        e = np.zeros(2)
        e[j] = h
        g[:, :, j] = (eval_field(sol, pts + e).u - eval_field(sol, pts - e).u) / (2 * h)
    return g


@pytest.mark.parametrize("mode", ["P", "S"])
def test_gradient_vs_finite_difference(mode):
    rng = np.random.default_rng(7)
    sol = solve_disk(BG, Inclusion(Disk((0.2, 0.1), 1.0), 1.0, 0.5, 0.3), PlaneWave(mode, 0.5))
    r = np.concatenate([rng.uniform(0.05, 0.9, 5), rng.uniform(1.1, 3.0, 5)])
    t = rng.uniform(0, 2 * np.pi, 10)
    pts = np.asarray(sol.center) + np.stack([r * np.cos(t), r * np.sin(t)], -1)
    g = eval_field(sol, pts).grad
    fd = _fd_grad(sol, pts)
    rel = np.abs(g - fd).max(axis=(1, 2)) / np.abs(g).max(axis=(1, 2))
    assert rel.max() <= 1e-6


def test_boundary_annulus_rejected():
    sol = solve_disk(BG, Inclusion(Disk((0, 0), 1.0), psi_rho=0.3), PlaneWave("P", 0.0))
    with pytest.raises(DomainError):
        eval_field(sol, np.array([[1.0 + 1e-10, 0.0]]))


def test_plane_wave_identities():
    rng = np.random.default_rng(1)
    pts = rng.uniform(-3, 3, (20, 2))
    d = np.array([math.cos(0.6), math.sin(0.6)])
    u, g = Incidence.of(PlaneWave("P", 0.6)).fields(BG, pts)
    ph = np.exp(1j * BG.kp * pts @ d)
    np.testing.assert_allclose(g[:, 0, 0] + g[:, 1, 1], 1j * BG.kp * ph, rtol=1e-14)
    np.testing.assert_allclose(g[:, 1, 0] - g[:, 0, 1], 0, atol=1e-14)
    _, gs = Incidence.of(PlaneWave("S", 0.6)).fields(BG, pts)
    np.testing.assert_allclose(gs[:, 0, 0] + gs[:, 1, 1], 0, atol=1e-14)


def test_herglotz_s_part_divergence_free():
    th = np.linspace(0, 2 * np.pi, 12, endpoint=False)
    inc = Incidence.superpose(["S"] * 12, th, np.exp(1j * np.arange(12)))
    sol = solve_disk(BG, MaterialField(BG), inc)
    fv = eval_field(sol, np.random.default_rng(3).uniform(-2, 2, (15, 2)))
    assert np.abs(fv.div).max() <= 1e-13


# -- stress traces


def test_stress_trace_plane_wave_formula():
    sol = solve_disk(BG, MaterialField(BG), PlaneWave("P", 0.6))
    st_ = stress_trace(sol, 2.5, 32)
    d = np.array([math.cos(0.6), math.sin(0.6)])
    x = st_.nodes
    nu = x / 2.5
    ph = np.exp(1j * BG.kp * x @ d)
    expect = (2 * BG.mu0 * 1j * BG.kp * (nu @ d)[:, None] * d[None] * ph[:, None]
              + BG.lambda0 * nu * 1j * BG.kp * ph[:, None])
    np.testing.assert_allclose(st_.traction, expect, atol=1e-13)


def test_rigid_displacement_has_no_traction():
    from elastomono.forward import traction

    g = np.zeros((5, 2, 2), dtype=complex)
    nu = np.stack([np.cos(np.arange(5)), np.sin(np.arange(5))], -1)
    assert not np.any(traction(BG, g, nu))


def test_stress_trace_vs_finite_difference():
    sol = solve_disk(BG, Inclusion(Disk((0, 0), 1.0), 0.5, 0.5, 0.2), PlaneWave("S", 0.3))
    R = 1.7
    st_ = stress_trace(sol, R, 16)
    fd = _traction(_fd_grad(sol, st_.nodes), BG.lambda0, BG.mu0, st_.nodes / R)
    assert np.abs(st_.traction - fd).max() <= 1e-6 * np.abs(fd).max()
    with pytest.raises(DomainError):
        stress_trace(sol, 0.9, 16)


@pytest.mark.parametrize("mode", ["P", "S"])
def test_radiation_flux_outgoing(mode):
    sol = solve_disk(BG, Inclusion(Disk((0, 0), 1.0), 0.4, 0.1, 0.5), PlaneWave(mode, 0.0))
    st_ = stress_trace(sol, 2.0, 128, part="scattered")
    flux = np.sum(np.conj(st_.displacement) * st_.traction) * 2 * np.pi * 2.0 / 128
    assert flux.imag > 0


# -- kernels


def test_gamma_solves_navier_equation():
    rng = np.random.default_rng(11)
    pts = rng.uniform(0.5, 2.0, (6, 2)) * rng.choice([-1, 1], (6, 2))
    h = 1e-3
    e = np.eye(2) * h

    def G(x):
        return kernels.gamma(BG, x)

    for x in pts:
        lap = sum(G(x + e[k]) - 2 * G(x) + G(x - e[k]) for k in range(2)) / h**2
        # grad div of each column: [d_i d_k Gamma_kj]
        gd = np.zeros((2, 2), dtype=complex)
        for i in range(2):
            for k in range(2):
                if i == k:
                    dd = (G(x + e[i]) - 2 * G(x) + G(x - e[i])) / h**2
                else:
                    dd = (G(x + e[i] + e[k]) - G(x + e[i] - e[k])
                          - G(x - e[i] + e[k]) + G(x - e[i] - e[k])) / (4 * h * h)
                gd[i] += dd[k]
        res = BG.mu0 * lap + (BG.lambda0 + BG.mu0) * gd + BG.rho0 * BG.omega**2 * G(x)
        assert np.abs(res).max() <= 1e-4 * np.abs(G(x)).max()


def test_gamma_gradient_vs_finite_difference():
    x = np.array([0.7, -1.3])
    h = 1e-6
    dG = kernels.gamma_grad(BG, x)
    for k in range(2):
        e = np.zeros(2)
        e[k] = h
        fd = (kernels.gamma(BG, x + e) - kernels.gamma(BG, x - e)) / (2 * h)
        np.testing.assert_allclose(dG[..., k], fd, atol=1e-8)


def test_self_cell_integral_vs_quadrature():
    h = 0.05
    R = h / math.sqrt(math.pi)
    kp, ks = BG.kp, BG.ks
    c = 1 / (4 * BG.rho0 * BG.omega**2)

    def trace_half(r):  # (A + B/2) with scipy Hankel functions, times 2 pi r
        hs = [hankel1(n, ks * r) for n in range(3)]
        hp = [hankel1(n, kp * r) for n in range(3)]
        A = 1j / (4 * BG.mu0) * hs[0] + 1j * c * (-ks * hs[1] + kp * hp[1]) / r
        B = 1j * c * (ks**2 * hs[2] - kp**2 * hp[2])
        return 2 * math.pi * r * (A + B / 2)

    re = integrate.quad(lambda r: trace_half(r).real, 0, R, limit=200, epsabs=0, epsrel=1e-13)[0]
    im = integrate.quad(lambda r: trace_half(r).imag, 0, R, limit=200, epsabs=0, epsrel=1e-13)[0]
    assert kernels.self_cell_integral(BG, h) == pytest.approx(complex(re, im), rel=1e-8)


# -- grid solver


def test_grid_zero_contrast():
    f = disk_field(BG, (0, 0), 1.0)
    sol = solve_grid(f, PlaneWave("S", 0.4), 1 / 16)
    assert sol.iterations == 0
    p = far_field(sol, 16)
    assert not np.any(p.up) and not np.any(p.us)
    pts = np.array([[0.1, 0.2], [3.0, 0.0]])
    u_in, _ = Incidence.of(PlaneWave("S", 0.4)).fields(BG, pts)
    np.testing.assert_array_equal(eval_field(sol, pts).u, u_in)


def test_grid_under_resolved():
    with pytest.raises(UnderResolvedError):
        solve_grid(disk_field(BG, (0, 0), 1.0, psi_rho=0.3), PlaneWave("P", 0), 0.5)


@pytest.mark.parametrize("mode", ["P", "S"])
def test_grid_vs_series_density(mode):
    f = disk_field(BG, (0, 0), 1.0, psi_rho=0.3)
    th = np.linspace(0, 2 * np.pi, 64, endpoint=False)
    w = PlaneWave(mode, 0.3)
    ref = _ff_vec(solve_disk(BG, f, w), th)
    e32 = np.linalg.norm(_ff_vec(solve_grid(f, w, 1 / 32), th) - ref) / np.linalg.norm(ref)
    e64 = np.linalg.norm(_ff_vec(solve_grid(f, w, 1 / 64), th) - ref) / np.linalg.norm(ref)
    assert e32 <= 0.02
    assert e32 / e64 >= 1.5


@pytest.mark.parametrize("psi", [(1.0, 0.0, 0.0), (0.5, 0.3, 0.2)])
def test_grid_vs_series_lame(psi):
    f = disk_field(BG, (0, 0), 1.0, *psi)
    th = np.linspace(0, 2 * np.pi, 64, endpoint=False)
    w = PlaneWave("P", 0.3)
    ref = _ff_vec(solve_disk(BG, f, w), th)
    got = _ff_vec(solve_grid(f, w, 1 / 32), th)
    assert np.linalg.norm(got - ref) <= 0.05 * np.linalg.norm(ref)


def test_grid_box_enlargement_invariance():
    f = disk_field(BG, (0.3, 0), 0.5, psi_rho=0.3)
    th = np.linspace(0, 2 * np.pi, 16, endpoint=False)
    a = _ff_vec(solve_grid(f, PlaneWave("P", 1.0), 1 / 16, pad=1), th)
    b = _ff_vec(solve_grid(f, PlaneWave("P", 1.0), 1 / 16, pad=5), th)
    assert np.abs(a - b).max() <= 1e-8 * np.abs(a).max()


def test_grid_fields_match_series_outside():
    f = disk_field(BG, (0, 0), 0.5, psi_rho=0.3)
    w = PlaneWave("P", 0.2)
    g = solve_grid(f, w, 1 / 32)
    s = solve_disk(BG, f, w)
    pts = np.array([[1.2, 0.0], [0.0, -1.5], [-0.3, 0.3], [2.0, 2.0]])
    a = eval_field(g, pts, part="scattered")
    b = eval_field(s, pts, part="scattered")
    assert np.abs(a.u - b.u).max() <= 0.02 * np.abs(b.u).max()
    assert np.abs(a.grad - b.grad).max() <= 0.05 * np.abs(b.grad).max()


# -- types and output


def test_far_field_pattern_invariants():
    with pytest.raises(DomainError):
        FarFieldPattern(np.zeros(6), np.zeros(6), np.zeros(6))
    with pytest.raises(DomainError):
        FarFieldPattern(np.zeros(9), np.zeros(9), np.zeros(9))
    with pytest.raises(DomainError):
        FarFieldPattern(np.zeros(8), np.full(8, np.nan), np.zeros(8))


def test_far_field_csv(tmp_path):
    sol = solve_disk(BG, Inclusion(Disk((0, 0), 1.0), psi_rho=0.3), PlaneWave("P", 0.0))
    p = far_field(sol, 8)
    write_far_field_csv(p, tmp_path / "ff.csv")
    data = np.loadtxt(tmp_path / "ff.csv", delimiter=",", skiprows=1)
    assert (tmp_path / "ff.csv").read_text().splitlines()[0] == "angle,re_up,im_up,re_us,im_us"
    np.testing.assert_array_equal(data[:, 1] + 1j * data[:, 2], p.up)
