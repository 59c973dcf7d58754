import json

import numpy as np
import pytest

from spinboson import (
    DegenerateStateError,
    ModelParams,
    VariationalState,
    apply_parity,
    energy,
    energy_and_gradient,
    load_state,
    norm,
    normalized,
    overlap_kernels,
    random_state,
    save_state,
)
from conftest import make_state


def test_overlap_kernel_values():
    state = make_state([1.0, 1.0], [1.0, 1.0],
                       [[1.0, 0.0], [0.0, 0.0]], [[1.0, 0.0], [0.0, 0.0]])
    k = overlap_kernels(state)
    assert k.up[0, 0] == 1.0 and k.up[1, 1] == 1.0
    assert k.up[0, 1] == pytest.approx(np.exp(-0.5))
    assert np.array_equal(k.up, k.up.T)
    # identical up/down rows -> cross overlap has unit entries on the match
    assert k.cross[0, 0] == pytest.approx(1.0)
    assert np.all(k.up > 0.0) and np.all(k.up <= 1.0)


def test_norm_closed_forms():
    st = make_state([1.0], [0.0], [[0.3, -0.2]], [[0.0, 0.0]])
    assert norm(st) == pytest.approx(1.0)
    st = make_state([1.0], [1.0], [[0.3, -0.2]], [[0.5, 0.1]])
    assert norm(st) == pytest.approx(2.0)
    st = make_state([1.0, 1.0], [0.0, 0.0], [[0.2, 0.1], [0.2, 0.1]], np.zeros((2, 2)))
    assert norm(st) == pytest.approx(4.0)


def test_norm_degenerate_states():
    st = make_state([0.0], [0.0], [[0.0]], [[0.0]])
    with pytest.raises(DegenerateStateError):
        norm(st)
    # exact cancellation between identical rows
    st = make_state([1.0, -1.0], [0.0, 0.0], [[0.1], [0.1]], [[0.0], [0.0]])
    with pytest.raises(DegenerateStateError):
        norm(st)


def test_energy_free_spin(mesh22_free):
    st = make_state([1.0], [1.0], np.zeros((1, 2)), np.zeros((1, 2)))
    assert energy(st, ModelParams(0.0, 0.3), mesh22_free) == pytest.approx(-0.15, abs=1e-15)


def test_energy_classical_displacement(mesh22):
    shift = mesh22.classical_shifts()
    st = make_state([1.0], [0.0], [-shift], np.zeros((1, 2)))
    expected = -float(np.sum(mesh22.couplings**2 / (4.0 * mesh22.omegas)))
    assert expected == pytest.approx(-0.18080357142857142, rel=1e-12)
    assert energy(st, ModelParams(0.0, 0.0), mesh22) == pytest.approx(expected, abs=1e-14)


def test_energy_scale_invariance(mesh22):
    params = ModelParams(0.1, 0.4)
    st = random_state(3, mesh22, seed=5, spread=1.0)
    e0 = energy(st, params, mesh22)
    scaled = make_state(7.5 * st.weights_up, 7.5 * st.weights_down, st.disp_up, st.disp_down)
    assert energy(scaled, params, mesh22) == pytest.approx(e0, rel=1e-12)


@pytest.mark.parametrize("seed", range(5))
def test_gradient_matches_finite_differences(mesh22, seed):
    params = ModelParams(bias=0.07, tunneling=0.35)
    st = random_state(2, mesh22, seed=seed, spread=1.3)
    e, grad = energy_and_gradient(st, params, mesh22)
    x = st.pack()
    h = 1e-6
    fd = np.empty_like(x)
    for i in range(x.size):
        xp, xm = x.copy(), x.copy()
        xp[i] += h
        xm[i] -= h
        fd[i] = (
            energy(VariationalState.unpack(xp, 2, 2), params, mesh22)
            - energy(VariationalState.unpack(xm, 2, 2), params, mesh22)
        ) / (2.0 * h)
    scale = max(1.0, float(np.max(np.abs(grad))))
    assert np.max(np.abs(grad - fd)) / scale < 1e-6


def test_gradient_zero_at_free_spin_ground(mesh22_free):
    c = 1.0 / np.sqrt(2.0)
    st = make_state([c], [c], np.zeros((1, 2)), np.zeros((1, 2)))
    _, grad = energy_and_gradient(st, ModelParams(0.0, 0.2), mesh22_free)
    assert np.max(np.abs(grad)) < 1e-15


def test_random_state_determinism_and_spread(mesh22):
    a = random_state(3, mesh22, seed=42, spread=1.0)
    b = random_state(3, mesh22, seed=42, spread=1.0)
    assert np.array_equal(a.pack(), b.pack())
    zero = random_state(3, mesh22, seed=42, spread=0.0)
    assert np.all(zero.disp_up == 0.0) and np.all(zero.disp_down == 0.0)
    # displacements respect the classical-shift envelope
    env = mesh22.classical_shifts()
    wide = random_state(4, mesh22, seed=1, spread=2.0)
    assert np.all(np.abs(wide.disp_up) <= 2.0 * env[None, :])


def test_random_state_norm_positive_over_many_seeds(mesh22):
    for seed in range(10_000):
        st = random_state(2, mesh22, seed=seed, spread=1.0)
        assert norm(st) > 0.0


def test_parity_involution_and_energy(mesh22):
    params = ModelParams(0.0, 0.3)
    st = random_state(2, mesh22, seed=9, spread=1.0)
    twice = apply_parity(apply_parity(st))
    assert np.array_equal(twice.pack(), st.pack())
    # parity commutes with the Hamiltonian at zero bias
    e0, e1 = energy(st, params, mesh22), energy(apply_parity(st), params, mesh22)
    assert abs(e1 - e0) <= 1e-10 * abs(e0)


def test_parity_symmetric_state_energy_unchanged(mesh22):
    fu = np.array([[0.3, -0.4], [0.1, 0.2]])
    st = make_state([0.6, 0.8], [0.6, 0.8], fu, -fu)
    params = ModelParams(0.0, 0.25)
    assert energy(apply_parity(st), params, mesh22) == pytest.approx(
        energy(st, params, mesh22), rel=1e-14)


def test_parity_flips_localized_branch(mesh22):
    shift = mesh22.classical_shifts()
    up = make_state([1.0], [0.0], [-shift], np.zeros((1, 2)))
    down = apply_parity(up)
    assert down.weights_up[0] == 0.0 and down.weights_down[0] == 1.0
    assert np.allclose(down.disp_down, shift)
    params = ModelParams(0.0, 0.0)
    assert energy(down, params, mesh22) == pytest.approx(energy(up, params, mesh22), abs=1e-15)


def test_normalized_state(mesh22):
    st = random_state(3, mesh22, seed=12, spread=0.8)
    assert norm(normalized(st)) == pytest.approx(1.0, rel=1e-12)


def test_state_json_round_trip(tmp_path, mesh22):
    st = random_state(2, mesh22, seed=3, spread=1.0)
    path = tmp_path / "state.json"
    save_state(path, st, seed=3, mesh_fingerprint=mesh22.fingerprint())
    loaded, doc = load_state(path)
    assert np.array_equal(loaded.pack(), st.pack())  # exact float round trip
    assert doc["N"] == 2 and doc["M"] == 2
    assert doc["seed"] == 3 and doc["mesh_fingerprint"] == mesh22.fingerprint()
    raw = json.loads(path.read_text())
    assert set(raw) == {"N", "M", "A", "D", "f", "g", "seed", "mesh_fingerprint"}
