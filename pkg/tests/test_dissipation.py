import math

import numpy as np
import pytest
import scipy.linalg
from hypothesis import given, settings
from hypothesis import strategies as st

from nvpol import dissipation as ds
from nvpol import model as nv
from nvpol.dissipation import ControlSettings, MwDrive, RelaxationParams
from nvpol.linalg import devectorize, vectorize

NONE = RelaxationParams.none()

TABLE = {
    "1": (77.0, 1.5 / 77.0, 0.0, 30.0, 30.0, 3.3, 0.0, 0.0),
    "2": (62.7, 0.01, 12.97, 80.0, 80.0, 3.45, 1.08, 1.08),
    "3": (63.2, 0.0, 10.8, 60.7, 60.7, 0.8, 0.4, 0.4),
    "4": (67.4, 0.0, 9.9, 91.6, 91.6, 4.83, 1.055, 1.055),
}
KEYS = ("gamma", "e", "k0S", "k+S", "k-S", "kS0", "kS+", "kS-")


def mixed(n):
    return np.eye(n, dtype=complex) / n


def random_state(rng, n):
    b = rng.normal(size=(n, n)) + 1j * rng.normal(size=(n, n))
    rho = b @ b.conj().T
    return rho / np.trace(rho)


@pytest.mark.parametrize("label", sorted(TABLE))
def test_models_match_table(label):
    got = ds.get_model(label).mhz()
    assert [got[k] for k in KEYS] == pytest.approx(TABLE[label], abs=1e-12)


def test_rate_model_validation():
    with pytest.raises(ValueError):
        ds.RateModel.from_mhz(1, 1.5, 0, 0, 0, 0, 0, 0)
    with pytest.raises(ValueError):
        ds.RateModel.from_mhz(-1, 0, 0, 0, 0, 0, 0, 0)
    with pytest.raises(KeyError):
        ds.get_model("9")
    with pytest.raises(ValueError):
        ControlSettings(k=-1.0)
    with pytest.raises(ValueError):
        RelaxationParams(t1_n=0.0)
    with pytest.raises(ValueError):
        MwDrive(1.0, ((0, "down"), (0, "up")))


def test_model3_dark_has_only_decay():
    chans = ds.channels(ds.MODELS["3"], NONE, ControlSettings(0.0), 2)
    names = [c.name for c in chans]
    assert not any(n.startswith("pump") for n in names)
    decay = [c for c in chans if c.name == "decay e+0->g+0"][0]
    amp = decay.op[nv.G_0 * 2, nv.E_0 * 2]
    assert abs(amp) ** 2 == pytest.approx(63.2)


def test_model1_singlet_returns_only_to_m0():
    names = [c.name for c in ds.channels(ds.MODELS["1"], NONE, ControlSettings(4.0), 2)]
    assert "isc S->g+0" in names
    assert "isc S->g+1" not in names and "isc S->g-1" not in names


@pytest.mark.parametrize("label", sorted(TABLE))
def test_out_rates_bookkeeping(label):
    m = ds.MODELS[label]
    k = 7.0
    chans = ds.channels(m, NONE, ControlSettings(k), 1)
    out = np.zeros(7)
    for c in chans:
        out += np.sum(np.abs(c.op) ** 2, axis=0).real
    for ms in (-1, 0, 1):
        assert out[nv.level_index("ground", ms)] == pytest.approx(k)
        assert out[nv.level_index("excited", ms)] == pytest.approx(m.gamma + m.k_xs[ms])
    assert out[nv.SINGLET] == pytest.approx(sum(m.k_sx.values()))


def test_two_level_decay():
    h = np.zeros((2, 2))
    op = np.array([[0, 1.0], [0, 0]]) * math.sqrt(3.0)
    sup = ds.liouvillian(h, [op])
    rho = np.diag([0.0, 1.0]).astype(complex)
    out = ds.evolve(rho, sup, 0.4, cache=False)
    assert out[1, 1].real == pytest.approx(math.exp(-1.2), rel=1e-12)


def test_ground_dephasing_rate():
    relax = RelaxationParams(t2_el_ground=2.0, t2_el_excited=None, t1_el=None, t2_n=None, t1_n=None)
    jumps = ds.jump_operators(ds.MODELS["4"], relax, ControlSettings(0.0), 1)
    sup = ds.liouvillian(np.zeros((7, 7)), jumps)
    psi = np.zeros(7)
    psi[[nv.G_0, nv.G_P1]] = 1 / math.sqrt(2)
    rho = np.outer(psi, psi).astype(complex)
    out = ds.evolve(rho, sup, 1.5, cache=False)
    assert abs(out[nv.G_0, nv.G_P1]) == pytest.approx(0.5 * math.exp(-1.5 / (4 * 2.0)), rel=1e-10)


def test_pure_state_stays_pure_without_jumps():
    rng = np.random.default_rng(3)
    a = rng.normal(size=(14, 14))
    h = a + a.T
    psi = rng.normal(size=14) + 1j * rng.normal(size=14)
    psi /= np.linalg.norm(psi)
    out = ds.evolve(np.outer(psi, psi.conj()), ds.liouvillian(h, []), 2.0, cache=False)
    assert np.trace(out @ out).real == pytest.approx(1.0, abs=1e-10)


@pytest.mark.parametrize("label", sorted(TABLE))
def test_populations_follow_rate_equations(label):
    k = 5.0
    chans = ds.channels(ds.MODELS[label], NONE, ControlSettings(k), 1)
    sup = ds.liouvillian(np.zeros((7, 7)), [c.op for c in chans])
    w = np.zeros((7, 7))
    for c in chans:
        w += np.abs(c.op) ** 2  # w[dst, src]
    rate = w - np.diag(w.sum(axis=0))
    p0 = np.array([1, 1, 1, 0, 0, 0, 0]) / 3
    for t in (0.05, 0.5, 3.0):
        pop = np.diag(ds.evolve(np.diag(p0).astype(complex), sup, t, cache=False)).real
        assert np.abs(pop - scipy.linalg.expm(rate * t) @ p0).max() < 1e-8


@settings(max_examples=25, deadline=None)
@given(st.floats(0.0, 70.0), st.floats(0.0, 20.0), st.sampled_from(sorted(TABLE)),
       st.integers(0, 2**31 - 1))
def test_trace_preserved(k, t, label, seed):
    rng = np.random.default_rng(seed)
    a = rng.normal(size=(14, 14))
    jumps = ds.jump_operators(ds.MODELS[label], RelaxationParams(), ControlSettings(k), 2)
    sup = ds.liouvillian(a + a.T, jumps)
    out = ds.evolve(random_state(rng, 14), sup, t, cache=False)
    assert abs(np.trace(out) - 1) < 1e-9
    assert np.linalg.eigvalsh(0.5 * (out + out.conj().T))[0] > -1e-9


def test_liouvillian_matches_matrix_form():
    rng = np.random.default_rng(5)
    n = 4
    a = rng.normal(size=(n, n)) + 1j * rng.normal(size=(n, n))
    h = a + a.conj().T
    ls = [rng.normal(size=(n, n)) + 1j * rng.normal(size=(n, n)) for _ in range(2)]
    rho = random_state(rng, n)
    want = -1j * (h @ rho - rho @ h)
    for l in ls:
        ld = l.conj().T
        want += l @ rho @ ld - 0.5 * (ld @ l @ rho + rho @ ld @ l)
    got = devectorize(ds.liouvillian(h, ls) @ vectorize(rho), n)
    assert np.allclose(got, want, atol=1e-12)


def test_liouvillian_shape_errors():
    with pytest.raises(ds.DimensionError):
        ds.liouvillian(np.zeros((3, 3)), [np.zeros((2, 2))])


def test_microwave_term_structure():
    z = nv.HyperfineTensor.zero
    p = nv.SystemParams.for_species("15N", b=(0, 0, 20.0))
    h = nv.build_hamiltonian(p, z("ground"), z("excited"), "secular")
    mw = MwDrive(rabi=0.6, transition=((0, "down"), (1, "down")))
    term = ds.microwave_term(ControlSettings(0.0, mw), h, 2)
    assert np.allclose(term, term.conj().T)
    assert term[nv.G_0 * 2, nv.G_P1 * 2] == pytest.approx(0.3)
    tot = h + term
    # rotating frame: the driven pair is degenerate
    assert tot[nv.G_P1 * 2 + 1, nv.G_P1 * 2 + 1] == pytest.approx(tot[nv.G_0 * 2 + 1, nv.G_0 * 2 + 1])
    det = ds.microwave_term(ControlSettings(0.0, MwDrive(0.6, mw.transition, detuning=0.2)), h, 2)
    assert (det - term)[nv.G_P1 * 2, nv.G_P1 * 2] == pytest.approx(0.2)
    with pytest.raises(ValueError):
        ds.microwave_term(ControlSettings(0.0), h, 2)


def test_evolve_zero_time_and_validation():
    rho = mixed(14)
    sup = ds.liouvillian(np.zeros((14, 14)), [])
    assert np.array_equal(ds.evolve(rho, sup, 0.0), rho)
    with pytest.raises(ValueError):
        ds.evolve(rho, sup, -1.0)
    with pytest.raises(ds.InvalidStateError):
        ds.evolve(2 * rho, sup, 1.0)
    bad = np.diag([1.5, -0.5]).astype(complex)
    with pytest.raises(ds.InvalidStateError):
        ds.evolve(bad, ds.liouvillian(np.zeros((2, 2)), []), 1.0)


def test_evolve_sampled_grid_and_consistency():
    rng = np.random.default_rng(2)
    a = rng.normal(size=(4, 4))
    sup = ds.liouvillian(a + a.T, [np.diag([0, 1.0, 0, 0])])
    rho = random_state(rng, 4)
    times, states = ds.evolve_sampled(rho, sup, 1.05, 0.1, cache=False)
    assert len(times) == 12 and times[-1] == 1.05
    assert np.allclose(times[:11], np.arange(11) * 0.1)
    assert np.allclose(states[-1], ds.evolve(rho, sup, 1.05, cache=False), atol=1e-12)
    times, states = ds.evolve_sampled(rho, sup, 0.0, 0.1)
    assert list(times) == [0.0] and np.array_equal(states[0], rho)


def test_trace_drift_is_reported():
    sup = -np.eye(4, dtype=complex)  # not trace preserving
    with pytest.raises(ds.NumericalFailure):
        ds.evolve(mixed(2), sup, 1.0, cache=False)


def test_propagator_cache_reuse():
    cache = ds.PropagatorCache(maxsize=2)
    sup = ds.liouvillian(np.diag([0.0, 1.0]), [])
    a = ds.evolve(mixed(2), sup, 0.3, cache=cache)
    b = ds.evolve(mixed(2), sup, 0.3, cache=cache)
    assert cache.hits == 1 and np.array_equal(a, b)
    for t in (0.1, 0.2, 0.4):
        ds.evolve(mixed(2), sup, t, cache=cache)
    assert len(cache._data) == 2


def test_long_runs_keep_trace_at_rounding_level():
    rng = np.random.default_rng(4)
    a = rng.normal(size=(14, 14)) * 2000.0  # large |L dt|
    jumps = ds.jump_operators(ds.MODELS["4"], RelaxationParams(), ControlSettings(4.0), 2)
    sup = ds.liouvillian(a + a.T, jumps)
    _, states = ds.evolve_sampled(mixed(14), sup, 500.0, 0.5, cache=False)
    assert np.abs(np.trace(states, axis1=1, axis2=2) - 1).max() < 1e-12
