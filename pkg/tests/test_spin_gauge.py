import numpy as np
import pytest

from madelung_gauge.diagnostics import quantum_potential
from madelung_gauge.errors import ReferenceInvalid, SpinNotOrthogonal
from madelung_gauge.grid import Grid, gradient
from madelung_gauge.propagator import PhysicalConstants
from madelung_gauge.spin_gauge import (
    SpinConfig,
    compton_speed,
    gauge_phase_from_amplitude,
    gauge_transform_action,
    log_gauge_phase,
    quantum_potential_from_theta,
    spin_vector_field,
    spin_velocity_field,
    spin_velocity_from_density,
    verify_gauge_condition,
)
from madelung_gauge.wavefield import polar_decompose


def test_exponential_amplitude_gives_linear_phase():
    g = Grid.line(1024, -1.0, 1.0)
    gp = gauge_phase_from_amplitude(g, np.exp(1.5 * g.x), reference=0.0)
    assert gp.region.all()
    assert np.max(np.abs(gp.theta - 1.5 * (g.x - gp.reference))) < 1e-4


def test_branches_are_exact_negatives():
    g = Grid.line(300, -1.0, 1.0)
    a = np.cosh(2 * g.x)
    plus = gauge_phase_from_amplitude(g, a, "plus", 0.3)
    minus = gauge_phase_from_amplitude(g, a, "minus", 0.3)
    assert np.array_equal(minus.theta, -plus.theta, equal_nan=True)


def test_gaussian_amplitude_is_invalid_near_center():
    g = Grid.line(401, -4.0, 4.0)
    a = np.exp(-g.x**2 / 2)
    with pytest.raises(ReferenceInvalid):
        gauge_phase_from_amplitude(g, a, reference=0.0)
    gp = gauge_phase_from_amplitude(g, a, reference=2.0)
    x_in = g.x[gp.region]
    assert x_in.min() >= 1.0 - 1e-9
    assert np.all(np.isnan(gp.theta[~gp.region]))


def test_gauge_phase_input_checks():
    with pytest.raises(ValueError):
        gauge_phase_from_amplitude(Grid.square(16, 0, 1), np.ones((16, 16)))
    g = Grid.line(16, 0.0, 1.0)
    with pytest.raises(ValueError):
        gauge_phase_from_amplitude(g, np.ones(16), sign="up")
    with pytest.raises(ValueError):
        gauge_phase_from_amplitude(g, -np.ones(16))


def test_gauge_condition_residual_shrinks_at_second_order():
    norms = []
    for n in (101, 201, 401):
        g = Grid.line(n, -1.0, 1.0)
        a = np.exp(g.x**2 / 2)  # lap(A)/A = 1 + x^2 > 0 everywhere
        gp = gauge_phase_from_amplitude(g, a)
        norms.append(verify_gauge_condition(g, a, gp.theta, gp.region).l2)
    assert np.log2(norms[0] / norms[1]) == pytest.approx(2.0, abs=0.3)
    assert np.log2(norms[1] / norms[2]) == pytest.approx(2.0, abs=0.3)


def test_action_split_removes_gauge_part():
    g = Grid.line(512, -1.0, 1.0)
    a = np.exp(1.5 * g.x)
    gp = gauge_phase_from_amplitude(g, a)
    psi = a * np.exp(1j * (gp.theta + 0.4))
    split = gauge_transform_action(polar_decompose(g, psi), gp)
    assert np.allclose(split.S, split.S[0], atol=1e-12)
    assert abs(split.orthogonality) < 1e-10
    assert np.allclose(split.S_tilde - split.S, gp.theta, atol=1e-12)


def test_spin_config_validation():
    with pytest.raises(ValueError):
        SpinConfig(alpha=0.0)
    with pytest.raises(ValueError):
        SpinConfig(r0=-1.0)
    with pytest.raises(ValueError):
        SpinConfig(direction=(0.0, 0.0, 2.0))


def test_log_phase_fields():
    g = Grid.square(64, -2.0, 2.0)
    cfg = SpinConfig(alpha=0.5, r0=1.0)
    f = log_gauge_phase(g, cfg)
    assert f.exclusion_radius == pytest.approx(2 * g.spacing[0])
    assert np.all(np.isnan(f.theta[f.mask]))
    ok = ~f.mask
    assert np.allclose(f.theta[ok], 0.5 * np.log(f.radius[ok]))
    num = gradient(g, np.where(f.mask, 0.0, f.theta))
    far = ok & (f.radius > 0.5) & g.interior(2)
    assert np.max(np.abs(num - f.grad_theta)[:, far]) < 1e-2
    with pytest.raises(ValueError):
        log_gauge_phase(Grid.line(16, 0, 1), cfg)


@pytest.mark.parametrize("alpha", [0.5, 1.0, 1.5])
def test_spin_vector_magnitude_is_alpha_hbar(alpha):
    g = Grid.square(64, -2.0, 2.0)
    c = PhysicalConstants(hbar=1.0)
    cfg = SpinConfig(alpha=alpha)
    f = log_gauge_phase(g, cfg)
    rep = spin_vector_field(f, cfg, c)
    assert rep.magnitude == pytest.approx(alpha, abs=1e-12)
    assert rep.deviation < 1e-10
    assert f.velocity is not None and f.spin_vector is not None


def test_spin_velocity_is_azimuthal():
    g = Grid.square(32, -1.0, 1.0)
    cfg = SpinConfig()
    f = log_gauge_phase(g, cfg)
    v = spin_velocity_field(f.grad_theta, cfg)
    x, y = g.coords
    ok = ~f.mask
    assert np.allclose((x * v[0] + y * v[1])[ok], 0.0, atol=1e-12)
    assert np.allclose(np.hypot(*v)[ok], 0.5 / f.radius[ok])


def test_in_plane_spin_rejected():
    g = Grid.square(16, -1.0, 1.0)
    cfg = SpinConfig(direction=(1.0, 0.0, 0.0))
    f = log_gauge_phase(g, SpinConfig())
    with pytest.raises(SpinNotOrthogonal):
        spin_velocity_field(f.grad_theta, cfg)
    with pytest.raises(SpinNotOrthogonal):
        spin_velocity_from_density(g, np.ones((16, 16)), (1.0, 0.0, 0.0))


def test_spin_velocity_from_density_matches_closed_form():
    g = Grid.square(128, -2.0, 2.0)
    x, y = g.coords
    r2 = x**2 + y**2
    rho = r2**0.5  # rho = r^(2 alpha) with alpha = 1/2
    v = spin_velocity_from_density(g, rho, (0.0, 0.0, 0.5))
    exact = np.stack([y / r2, -x / r2]) * 0.5
    far = (np.sqrt(r2) > 0.5) & g.interior(2)
    assert np.max(np.abs(v - exact)[:, far]) < 1e-2


def test_compton_speed():
    for alpha in (0.5, 1.0, 1.5):
        assert compton_speed(SpinConfig(alpha=alpha)) == alpha * PhysicalConstants().light_speed


def test_quantum_potential_routes_agree():
    g = Grid.square(128, -2.0, 2.0)
    cfg = SpinConfig()
    f = log_gauge_phase(g, cfg)
    a = np.sqrt(f.radius)
    q_amp = quantum_potential(g, a, a <= 0)
    q_theta = quantum_potential_from_theta(f.grad_theta)
    far = (f.radius > 0.5) & g.interior(2)
    assert np.max(np.abs(q_amp - q_theta)[far]) < 1e-2
    assert np.allclose(q_theta[far], -0.125 / f.radius[far] ** 2)
