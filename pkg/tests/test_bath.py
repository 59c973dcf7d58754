import numpy as np
import pytest

from spinboson import (
    ParameterError,
    DomainError,
    SpectralDensity,
    discretize_linear,
    discretize_log,
    spectral_density,
)
from spinboson.bath import MeshSpec, _interval_moments


def total_integral(sd, lo):
    """Closed-form integral of J over [lo, omega_c]."""
    p = sd.s + 1.0
    return 2.0 * sd.alpha * sd.omega_c ** (1.0 - sd.s) * (sd.omega_c**p - lo**p) / p


def first_moment(sd, lo):
    q = sd.s + 2.0
    return 2.0 * sd.alpha * sd.omega_c ** (1.0 - sd.s) * (sd.omega_c**q - lo**q) / q


def test_spectral_density_values():
    assert spectral_density(1.0, SpectralDensity(0.5, 1.0, 1.0)) == 1.0
    assert spectral_density(2.0, SpectralDensity(0.5, 1.0, 1.0)) == 0.0
    assert spectral_density(0.25, SpectralDensity(1.0, 0.5, 1.0)) == pytest.approx(1.0, abs=1e-15)


def test_spectral_density_negative_omega_rejected():
    with pytest.raises(DomainError):
        spectral_density(-0.1, SpectralDensity(0.5))


def test_spectral_density_parameter_validation():
    with pytest.raises(ParameterError):
        SpectralDensity(alpha=-0.1)
    with pytest.raises(ParameterError):
        SpectralDensity(alpha=1.0, s=0.0)
    with pytest.raises(ParameterError):
        SpectralDensity(alpha=1.0, omega_c=0.0)


def test_log_mesh_two_modes_closed_form(mesh22):
    # intervals [1/4, 1/2] and [1/2, 1] at alpha = 0.5, s = 1:
    # lambda_k^2 = alpha (b^2 - a^2), omega_k = (2/3)(b^3 - a^3)/(b^2 - a^2)
    assert mesh22.couplings**2 == pytest.approx([3.0 / 32.0, 3.0 / 8.0], rel=1e-14)
    assert mesh22.omegas == pytest.approx([7.0 / 18.0, 7.0 / 9.0], rel=1e-14)
    assert mesh22.omega_min == pytest.approx(0.25, rel=1e-15)
    assert mesh22.scheme == "log"


def test_log_mesh_paper_scale_low_cutoff():
    bath = discretize_log(SpectralDensity(alpha=1.0, s=1.0), ratio=1.01, n_modes=1000)
    # 1.01**-1000 ~ 4.8e-5, i.e. a low-energy cutoff around 5e-5 omega_c
    assert 4.7e-5 < bath.omega_min < 4.9e-5
    assert bath.n_modes == 1000


def test_zero_coupling_gives_zero_lambdas():
    bath = discretize_log(SpectralDensity(alpha=0.0, s=1.0), ratio=2.0, n_modes=5)
    assert np.all(bath.couplings == 0.0)
    # frequencies stay well defined (alpha cancels from the moment ratio)
    assert np.all(np.isfinite(bath.omegas))
    bath_lin = discretize_linear(SpectralDensity(alpha=0.0, s=1.0), n_modes=4)
    assert np.all(bath_lin.couplings == 0.0)


def test_linear_mesh_closed_forms():
    one = discretize_linear(SpectralDensity(alpha=1.0, s=1.0), n_modes=1)
    assert one.couplings**2 == pytest.approx([1.0], rel=1e-15)
    assert one.omegas == pytest.approx([2.0 / 3.0], rel=1e-15)

    two = discretize_linear(SpectralDensity(alpha=1.0, s=1.0), n_modes=2)
    assert two.couplings**2 == pytest.approx([0.25, 0.75], rel=1e-14)
    assert two.omegas == pytest.approx([1.0 / 3.0, 7.0 / 9.0], rel=1e-14)
    assert two.omega_min == pytest.approx(0.5)
    assert two.edges_lo[0] == 0.0  # both abscissa candidates stay available


@pytest.mark.parametrize("s", [0.5, 1.0, 2.0])
@pytest.mark.parametrize("scheme,param,n", [
    ("log", 2.0, 1), ("log", 2.0, 7), ("log", 1.05, 40), ("log", 1.01, 1000),
    ("linear", None, 1), ("linear", None, 7), ("linear", None, 64),
])
def test_moment_exactness(s, scheme, param, n):
    sd = SpectralDensity(alpha=0.7, s=s)
    bath = discretize_log(sd, param, n) if scheme == "log" else discretize_linear(sd, n)
    lo = bath.edges_lo[0]
    assert bath.total_weight() == pytest.approx(total_integral(sd, lo), rel=1e-12)
    assert float(np.sum(bath.couplings**2 * bath.omegas)) == pytest.approx(
        first_moment(sd, lo), rel=1e-12)
    # each representative frequency sits strictly inside its interval
    assert np.all(bath.edges_lo < bath.omegas)
    assert np.all(bath.omegas < bath.edges_hi)
    assert np.all(np.diff(bath.omegas) > 0.0)


def test_linear_refinement_leaves_moments_invariant():
    sd = SpectralDensity(alpha=0.9, s=1.0)
    coarse = discretize_linear(sd, 16)
    fine = discretize_linear(sd, 32)
    assert fine.total_weight() == pytest.approx(coarse.total_weight(), rel=1e-12)
    m1c = float(np.sum(coarse.couplings**2 * coarse.omegas))
    m1f = float(np.sum(fine.couplings**2 * fine.omegas))
    assert m1f == pytest.approx(m1c, rel=1e-12)


def test_log_omega_min_strictly_decreasing_in_modes():
    sd = SpectralDensity(alpha=0.5, s=1.0)
    mins = [discretize_log(sd, 1.05, n).omega_min for n in (10, 20, 40, 80)]
    assert all(b < a for a, b in zip(mins, mins[1:]))


def test_discretize_parameter_errors():
    sd = SpectralDensity(alpha=0.5, s=1.0)
    with pytest.raises(ParameterError):
        discretize_log(sd, 1.0, 10)
    with pytest.raises(ParameterError):
        discretize_log(sd, 2.0, 0)
    with pytest.raises(ParameterError):
        discretize_linear(sd, 0)


def test_mesh_spec_build_and_validation():
    spec = MeshSpec(scheme="log", n_modes=4, ratio=2.0)
    bath = spec.build(0.5)
    assert bath.n_modes == 4 and bath.scheme == "log"
    with pytest.raises(ParameterError):
        MeshSpec(scheme="log", n_modes=4, ratio=None)
    with pytest.raises(ParameterError):
        MeshSpec(scheme="wiggly", n_modes=4)


def test_fingerprint_distinguishes_meshes(mesh22):
    other = discretize_log(SpectralDensity(alpha=0.5, s=1.0), ratio=2.0, n_modes=3)
    same = discretize_log(SpectralDensity(alpha=0.5, s=1.0), ratio=2.0, n_modes=2)
    assert mesh22.fingerprint() == same.fingerprint()
    assert mesh22.fingerprint() != other.fingerprint()


def test_interval_moments_alpha_independent_frequency():
    sd1 = SpectralDensity(alpha=0.2, s=1.3)
    sd2 = SpectralDensity(alpha=1.7, s=1.3)
    _, c1 = _interval_moments(sd1, 0.125, 0.5)
    _, c2 = _interval_moments(sd2, 0.125, 0.5)
    assert c1 == c2
