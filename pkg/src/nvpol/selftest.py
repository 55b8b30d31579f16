"""Quick invariant suite run by ``nvpol selftest``."""

from __future__ import annotations

import time

import numpy as np

from . import hyperfine as hfm
from .dissipation import MODELS, evolve, liouvillian
from .linalg import devectorize, vectorize
from .sequences import (
    initial_state,
    make_protocol,
    run,
    three_level_comparison,
)

TABLE = {
    "1": (77.0, 1.5 / 77.0, 0.0, 30.0, 30.0, 3.3, 0.0, 0.0),
    "2": (62.7, 0.01, 12.97, 80.0, 80.0, 3.45, 1.08, 1.08),
    "3": (63.2, 0.0, 10.8, 60.7, 60.7, 0.8, 0.4, 0.4),
    "4": (67.4, 0.0, 9.9, 91.6, 91.6, 4.83, 1.055, 1.055),
}


def random_lindblad(rng, n=6, n_jumps=3):
    a = rng.normal(size=(n, n)) + 1j * rng.normal(size=(n, n))
    h = 0.5 * (a + a.conj().T)
    jumps = [0.5 * (rng.normal(size=(n, n)) + 1j * rng.normal(size=(n, n))) for _ in range(n_jumps)]
    b = rng.normal(size=(n, n)) + 1j * rng.normal(size=(n, n))
    rho = b @ b.conj().T
    return h, jumps, rho / np.trace(rho)


def rk4_reference(h, jumps, rho, t, steps=4000):
    """Direct fine-step integration of the master equation in matrix form."""

    def rhs(r):
        out = -1j * (h @ r - r @ h)
        for l in jumps:
            ld = l.conj().T
            out += l @ r @ ld - 0.5 * (ld @ l @ r + r @ ld @ l)
        return out

    dt = t / steps
    r = rho.astype(complex)
    for _ in range(steps):
        k1 = rhs(r)
        k2 = rhs(r + 0.5 * dt * k1)
        k3 = rhs(r + 0.5 * dt * k2)
        k4 = rhs(r + dt * k3)
        r = r + dt / 6 * (k1 + 2 * k2 + 2 * k3 + k4)
    return r


def check_models():
    worst = 0.0
    for label, row in TABLE.items():
        got = MODELS[label].mhz()
        vals = (got["gamma"], got["e"], got["k0S"], got["k+S"], got["k-S"],
                got["kS0"], got["kS+"], got["kS-"])
        worst = max(worst, max(abs(a - b) for a, b in zip(vals, row)))
    return worst < 1e-12, f"max deviation {worst:.2e}"


def check_engine(seeds=10):
    worst = 0.0
    for seed in range(seeds):
        rng = np.random.default_rng(seed)
        h, jumps, rho = random_lindblad(rng)
        got = evolve(rho, liouvillian(h, jumps), 0.7)
        ref = rk4_reference(h, jumps, rho, 0.7)
        worst = max(worst, float(np.abs(got - ref).max()))
    return worst < 1e-7, f"max |expm - rk4| = {worst:.2e} over {seeds} seeds"


def check_protocol_states():
    worst_tr, worst_eig = 0.0, 0.0
    for name, fam in (("eslac", "15N"), ("ms0", "C"), ("ms1", "H")):
        f = hfm.get_family(fam)
        kw = {"t_laser": 20.0} if name == "eslac" else {}
        res = run(make_protocol(name, f, **kw), "4", f, 4.0, keep_states=True)
        tr = np.abs(np.trace(res.states, axis1=1, axis2=2) - 1).max()
        eig = min(np.linalg.eigvalsh(0.5 * (s + s.conj().T)).min() for s in res.states[::10])
        worst_tr = max(worst_tr, float(tr))
        worst_eig = min(worst_eig, float(eig))
    ok = worst_tr < 1e-9 and worst_eig > -1e-9
    return ok, f"trace drift {worst_tr:.1e}, min eigenvalue {worst_eig:.1e}"


def check_three_level():
    worst = 0.0
    for name, fam in (("ms0", "15N"), ("ms1", "H")):
        f = hfm.get_family(fam)
        p = make_protocol(name, f)
        t_mw = p.segments[2].duration
        sim, ana = three_level_comparison(p, f, np.linspace(0, 2 * t_mw, 201))
        worst = max(worst, float(np.abs(sim - ana).max()))
    return worst < 0.02, f"max population deviation {worst:.4f}"


def check_zero_duration():
    f = hfm.get_family("C")
    p = make_protocol("ms0", f, t_laser=0.0, t_wait=0.0, t_mw=0.0, t_laser2=0.0, t_wait2=0.0)
    res = run(p, "4", f, 4.0)
    dev = float(np.abs(res.final_state - initial_state(2)).max())
    return dev == 0.0, f"max deviation {dev:.1e}"


def check_ceiling():
    worst = -1.0
    for name, fam in (("ms0", "C"), ("ms1", "H")):
        f = hfm.get_family(fam)
        p = make_protocol(name, f)
        for m in MODELS:
            for k in (4.0, 70.0):
                r = run(p, m, f, k).readouts
                worst = max(worst, r["nuclear_mw"] - r["electron_wait"])
    return worst <= 0.02, f"max P_n(after MW) - P_e(after wait) = {worst:.4f}"


def check_vectorize():
    rng = np.random.default_rng(1)
    m = rng.normal(size=(5, 5)) + 1j * rng.normal(size=(5, 5))
    ok = np.array_equal(devectorize(vectorize(m)), m)
    return ok, "round trip"


def check_eslac():
    f = hfm.get_family("15N")
    pn = run(make_protocol("eslac", f), "4", f, 4.0).readouts["nuclear_end"]
    return abs(pn - 0.95) <= 0.03, f"model 4 15N P_n = {pn:.4f}"


CHECKS = (
    ("rate models match the table", check_models),
    ("vectorize/devectorize round trip", check_vectorize),
    ("expm propagation vs fine-step RK4", check_engine),
    ("trace and positivity over protocols", check_protocol_states),
    ("zero-duration sequence is identity", check_zero_duration),
    ("three-level analytic oracle", check_three_level),
    ("precession ceiling", check_ceiling),
    ("ESLAC steady-state polarization", check_eslac),
)


def run_selftest(out):
    failures = 0
    start = time.perf_counter()
    for name, fn in CHECKS:
        try:
            ok, detail = fn()
        except Exception as exc:  # a crashing check is a failing check
            ok, detail = False, f"{type(exc).__name__}: {exc}"
        failures += not ok
        out.write(f"{'PASS' if ok else 'FAIL'}  {name}: {detail}\n")
    out.write(f"{len(CHECKS) - failures}/{len(CHECKS)} checks passed "
              f"in {time.perf_counter() - start:.1f} s\n")
    return failures == 0
