"""Acceptance criteria 1-9. Each test prints one PASS/FAIL line, then asserts."""

import time

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from conftest import random_hermitian, random_operator, random_slh, random_unitary
from fockwave.experiments import (analytic_excitation, excitation_max, fit_scaling, run_optimum_sweep,
                                  run_rabi_rect, scatter_point)
from fockwave.fock import FieldCombination, build_engine, equation_count, hierarchy_rhs, simulate, state_from_vector
from fockwave.fock import FockHierarchyState, canonical_levels
from fockwave.integrator import IntegratorConfig, integrate
from fockwave.npacket import NPhotonSpec, npacket_hierarchy_rhs
from fockwave.operators import GROUND, SLH, MultiModeSLH, dag, lindblad_dissipator, two_level_slh
from fockwave.oracle import TimeBinConfig, run_oracle, trace_distance
from fockwave.simulate import max_step_schedule
from fockwave.twomode import build_engine as build_twomode_engine
from fockwave.twomode import scattering_preset
from fockwave.wavepackets import GaussianPacket


@pytest.fixture
def report(capsys):
    def emit(number, ok, detail):
        with capsys.disabled():
            print(f"\nCRITERION {number} {'PASS' if ok else 'FAIL'}: {detail}")
        return ok
    return emit


def _timed(fn, *args, **kw):
    t0 = time.perf_counter()
    out = fn(*args, **kw)
    return out, time.perf_counter() - t0


# 1 ---------------------------------------------------------------------------------

def test_criterion_1_golden_excitation(report):
    (p1, _), dt1 = _timed(excitation_max, 1, 1.46)
    (p2, _), dt2 = _timed(excitation_max, 2, 1.46)
    ok = abs(p1 - 0.801) <= 0.005 and abs(p2 - 0.805) <= 0.005 and dt1 < 1 and dt2 < 1
    assert report(1, ok, f"P_max N=1 {p1:.6f} ({dt1:.2f}s), N=2 {p2:.6f} ({dt2:.2f}s)")


# 2 ---------------------------------------------------------------------------------

def test_criterion_2_analytic_single_photon(report):
    t0 = time.perf_counter()
    worst = {}
    for omega in (0.5, 1.0, 2.0, 3.5, 5.0):
        pkt = GaussianPacket(omega)
        run = simulate(two_level_slh(), pkt, 1, outputs=False, sample_points=201)
        worst[omega] = float(np.max(np.abs(run["P_e"] - analytic_excitation(pkt, run.times))))
    elapsed = time.perf_counter() - t0
    ok = max(worst.values()) <= 1e-4 and elapsed < 5
    assert report(2, ok, f"max sup-norm {max(worst.values()):.2e} over {sorted(worst)} in {elapsed:.2f}s")


# 3 ---------------------------------------------------------------------------------

def test_criterion_3_flux_bookkeeping(report):
    combos = {"N=1": FieldCombination.fock(1), "sup": FieldCombination.superposition({1: 2 ** -0.5, 2: 2 ** -0.5}),
              "N=2": FieldCombination.fock(2)}
    run, elapsed = _timed(simulate, two_level_slh(), GaussianPacket(1.46), combos, sample_points=201)
    ends = {k: float(run[f"flux1_integrated[{k}]"][-1]) for k in combos}
    targets = {"N=1": 1.0, "sup": 1.5, "N=2": 2.0}
    ok = all(abs(ends[k] - targets[k]) <= 0.01 for k in targets) and elapsed < 5
    assert report(3, ok, ", ".join(f"{k} -> {v:.5f}" for k, v in ends.items()) + f" in {elapsed:.2f}s")


# 4 ---------------------------------------------------------------------------------

def test_criterion_4_scaling_fits(report):
    rows, elapsed = _timed(run_optimum_sweep, range(10, 41))
    p_fit, o_fit = fit_scaling(rows)
    pa, pb = p_fit.params.get("a", np.nan), p_fit.params.get("b", np.nan)
    oa, ob = o_fit.params.get("a", np.nan), o_fit.params.get("b", np.nan)
    ok = (abs(pa - 0.269) <= 0.02 and abs(pb - 0.973) <= 0.02 and abs(oa - 1.45) <= 0.05
          and abs(ob - 0.987) <= 0.01 and elapsed <= 1800)
    assert report(4, ok, f"P fit a={pa:.5f} b={pb:.5f} (R2 {p_fit.r2:.6f}); "
                         f"omega fit a={oa:.5f} b={ob:.5f} (R2 {o_fit.r2:.6f}); {elapsed:.0f}s")


# 5 ---------------------------------------------------------------------------------

def test_criterion_5_large_bandwidth(report):
    t0 = time.perf_counter()
    ratios = {}
    for omega in (1e3, 1e4, 1e5):
        for n in (1, 5, 10):
            ratios[(omega, n)] = excitation_max(n, omega)[0] / (5 * n / omega)
    elapsed = time.perf_counter() - t0
    worst = max(abs(r - 1) for r in ratios.values())
    ok = worst <= 0.1 and elapsed < 120
    assert report(5, ok, f"P_max/(5N/omega) in [{min(ratios.values()):.4f}, {max(ratios.values()):.4f}] "
                         f"in {elapsed:.1f}s")


# 6 ---------------------------------------------------------------------------------

def test_criterion_6_rabi_frequency(report):
    res, elapsed = _timed(run_rabi_rect, 50, 0.02)
    rel = abs(res.frequency - res.predicted) / res.predicted if res.frequency else np.inf
    ok = rel <= 0.05 and elapsed < 60
    assert report(6, ok, f"omega_R {res.frequency:.3f} vs predicted {res.predicted:.3f} "
                         f"(rel {rel:.2e}, method {res.method}) in {elapsed:.1f}s")


# 7 ---------------------------------------------------------------------------------

def test_criterion_7_scattering(report):
    t0 = time.perf_counter()
    grid = np.logspace(np.log10(0.05), 2, 12)
    rows = [scatter_point(float(o), n) for n in (1, 2, 3) for o in grid]
    worst_sum = max(abs(r["total"] - 1) for r in rows)
    low = scatter_point(0.05, 1)["reflection"]
    high = scatter_point(100.0, 1)["transmission"]
    t1, t5 = scatter_point(3.0, 1)["transmission"], scatter_point(3.0, 5)["transmission"]
    elapsed = time.perf_counter() - t0
    ok = low > 0.95 and high > 0.95 and worst_sum <= 1e-3 and t5 > t1 and elapsed < 600
    assert report(7, ok, f"R(0.05)={low:.4f}, T(100)={high:.4f}, max|T+R-1|={worst_sum:.1e} over "
                         f"{len(rows)} points, T(3) N=5 {t5:.4f} > N=1 {t1:.4f}; {elapsed:.1f}s")


# 8 ---------------------------------------------------------------------------------

def _hierarchy_states(n, pkt, window, samples):
    eng = build_engine(two_level_slh(), pkt, n)
    combo = FieldCombination.fock(n).pairs()
    out = []
    integrate(eng.rhs, eng.initial_vector(GROUND), IntegratorConfig(window=window, sample_points=samples),
              observers=[lambda t, y: out.append(eng.total_state(y, combo)) or {}],
              max_step=max_step_schedule([pkt], 1.0), breakpoints=eng.breakpoints())
    return out


def test_criterion_8_oracle_equivalence(report):
    t0 = time.perf_counter()
    pkt = GaussianPacket(1.46)
    window = pkt.support()
    sample_bins = np.linspace(0, 2000, 11).round().astype(int)[1:]
    details, ok = [], True
    for n in (1, 2):
        ref = _hierarchy_states(n, pkt, window, 11)[1:]
        errs = {}
        for bins in (1000, 2000):
            run = run_oracle(two_level_slh(), (pkt, n), TimeBinConfig(bins=bins, window=window),
                             sample_bins=sample_bins * bins // 2000)
            errs[bins] = max(trace_distance(a, b) for a, b in zip(run.states, ref))
        ratio = errs[1000] / errs[2000]
        ok &= errs[2000] <= 1e-3 and 1.5 <= ratio <= 3
        details.append(f"N={n} trace distance {errs[2000]:.2e} at B=2000, ratio {ratio:.2f}")
    elapsed = time.perf_counter() - t0
    ok &= elapsed <= 600
    assert report(8, ok, "; ".join(details) + f"; {elapsed:.1f}s")


# 9 ---------------------------------------------------------------------------------

@settings(max_examples=40, deadline=None)
@given(st.integers(0, 2**32 - 1), st.integers(1, 5))
def _lindblad_properties(seed, d):
    rng = np.random.default_rng(seed)
    l, r1, r2 = random_operator(rng, d), random_operator(rng, d), random_operator(rng, d)
    rho = random_hermitian(rng, d)
    a, b = complex(*rng.normal(size=2)), complex(*rng.normal(size=2))
    scale = max(1.0, np.abs(l).max() ** 2 * max(np.abs(r1).max(), np.abs(r2).max(), np.abs(rho).max()) * d)
    assert abs(np.trace(lindblad_dissipator(l, rho))) <= 1e-12 * scale
    lhs = lindblad_dissipator(l, a * r1 + b * r2)
    rhs = a * lindblad_dissipator(l, r1) + b * lindblad_dissipator(l, r2)
    assert np.max(np.abs(lhs - rhs)) <= 1e-12 * scale * max(abs(a), abs(b), 1)


def _hierarchy_invariants():
    pkt = GaussianPacket(2.0)
    eng = build_engine(two_level_slh(), pkt, 3, redundant=True)
    snaps = []
    integrate(eng.rhs, eng.initial_vector(GROUND), IntegratorConfig(window=(-4.0, 8.0), sample_points=41),
              observers=[lambda t, y: snaps.append(state_from_vector(eng, y)) or {}],
              max_step=max_step_schedule([pkt], 1.0), breakpoints=eng.breakpoints())
    worst = {"trace": 0.0, "offdiag": 0.0, "adjoint": 0.0, "positivity": 0.0}
    for s in snaps:
        for (m, n), r in s.matrices.items():
            if m == n:
                worst["trace"] = max(worst["trace"], abs(np.trace(r) - 1))
                worst["positivity"] = min(worst["positivity"], np.linalg.eigvalsh(r).min())
            else:
                worst["offdiag"] = max(worst["offdiag"], abs(np.trace(r)))
            worst["adjoint"] = max(worst["adjoint"], np.max(np.abs(r - dag(s.matrices[(n, m)]))))
    return worst


def _slh_checks(rng):
    d = 3
    SLH(random_unitary(rng, d), random_operator(rng, d), random_hermitian(rng, d))
    for bad in (lambda: SLH(np.eye(d), np.zeros((d, d)), random_operator(rng, d)),
                lambda: SLH(2 * np.eye(d), np.zeros((d, d)), np.zeros((d, d))),
                lambda: MultiModeSLH(((np.eye(2), np.eye(2)), (np.zeros((2, 2)), np.eye(2))),
                                     (np.zeros((2, 2)),) * 2, np.zeros((2, 2)))):
        try:
            bad()
        except ValueError:
            continue
        return False
    return True


def _degeneration(rng):
    slh = random_slh(rng, 2)
    pkt = GaussianPacket(1.3, detuning=0.4)
    mats = {k: random_operator(rng, 2) for k in canonical_levels(3)}
    ours = npacket_hierarchy_rhs(slh, NPhotonSpec.fock(pkt, 3), {((m,), (n,)): v for (m, n), v in mats.items()},
                                 0.37)
    ref = hierarchy_rhs(slh, pkt, FockHierarchyState(3, mats), 0.37)
    return max(np.max(np.abs(ours[((m,), (n,))] - ref[(m, n)])) for (m, n) in mats)


def test_criterion_9_invariant_suite(report, rng):
    t0 = time.perf_counter()
    checks = {}
    try:
        _lindblad_properties()
        checks["lindblad trace/linearity"] = True
    except AssertionError:
        checks["lindblad trace/linearity"] = False
    worst = _hierarchy_invariants()
    checks["trace conservation"] = worst["trace"] <= 1e-8
    checks["off-diagonal trace"] = worst["offdiag"] <= 1e-8
    checks["adjoint symmetry"] = worst["adjoint"] <= 1e-9
    checks["positivity"] = worst["positivity"] >= -1e-7
    checks["SLH constraints"] = _slh_checks(rng)
    checks["single-mode count"] = all(
        equation_count(n) == (n + 1) * (n + 2) // 2 == len(build_engine(two_level_slh(), GaussianPacket(1.0), n).pairs)
        for n in range(8))
    two_mode = {(n, q): len(build_twomode_engine(scattering_preset(), GaussianPacket(1.0), GaussianPacket(1.0),
                                                 n, q).pairs)
                for n, q in ((1, 0), (1, 1), (2, 2))}
    checks["two-mode count"] = all(v == (n + 1) * (n + 2) * (q + 1) * (q + 2) // 4 for (n, q), v in two_mode.items())
    checks["npacket degeneration"] = _degeneration(rng) <= 1e-12
    elapsed = time.perf_counter() - t0
    failed = [k for k, v in checks.items() if not v]
    ok = not failed and elapsed < 120
    detail = (f"{len(checks) - len(failed)}/{len(checks)} checks in {elapsed:.1f}s"
              + (f"; failed: {', '.join(failed)}" if failed else ""))
    if not checks["two-mode count"]:
        detail += (f" (stored independent pairs {two_mode}, expected quarter-product "
                   f"{ {k: (k[0] + 1) * (k[0] + 2) * (k[1] + 1) * (k[1] + 2) // 4 for k in two_mode} })")
    assert report(9, ok, detail)
