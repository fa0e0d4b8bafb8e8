import json
import math

import numpy as np
import pytest

from conftest import random_operator, random_slh
from fockwave.fock import FockHierarchyState, canonical_levels, hierarchy_rhs
from fockwave.npacket import (NPhotonSpec, assemble_total, build_engine, initial_states, npacket_hierarchy_rhs,
                              reachable_labels, simulate_npacket, symmetrize)
from fockwave.operators import dag, two_level_slh
from fockwave.oracle import TimeBinConfig, run_oracle, trace_distance
from fockwave.wavepackets import BasisSet, GaussianPacket, WavePacket


class HermiteGauss1(WavePacket):
    """First Hermite-Gauss mode: orthogonal to the Gaussian of the same width."""

    def __init__(self, omega):
        self.base = GaussianPacket(omega)
        self.omega = omega

    def envelope(self, t):
        return self.omega * (t - self.base.t_a) * self.base.envelope(t)

    def support(self):
        lo, hi = self.base.support()
        return lo - 1 / self.omega, hi + 1 / self.omega

    def scale(self):
        return self.base.scale()


class Combination(WavePacket):
    def __init__(self, coeffs, packets):
        self.coeffs, self.packets = coeffs, packets

    def envelope(self, t):
        return sum(c * np.asarray(p(t)) for c, p in zip(self.coeffs, self.packets))

    def support(self):
        return min(p.support()[0] for p in self.packets), max(p.support()[1] for p in self.packets)

    def scale(self):
        return min(p.scale() for p in self.packets)


class Phased(WavePacket):
    def __init__(self, packet, phase):
        self.packet, self.phase = packet, phase

    def envelope(self, t):
        return np.exp(1j * self.phase) * self.packet(t)

    def support(self):
        return self.packet.support()

    def scale(self):
        return self.packet.scale()


def _two_gaussians(separation=7.0, omega=2.0):
    return BasisSet([GaussianPacket(omega, 0.0), GaussianPacket(omega, separation)])


# symmetrization ----------------------------------------------------------------------

def test_symmetrize_single_photon():
    spec = symmetrize({(0,): 1.0}, [GaussianPacket(1.0)])
    assert spec.amplitudes == {(0,): 1.0}


def test_symmetrize_factorizable_pair_matches_direct_expansion():
    # (a0 B0^dag + a1 B1^dag)^2 |0> / sqrt2 = a0^2 |2,0> + sqrt2 a0 a1 |1,1> + a1^2 |0,2>
    a = np.array([0.6, 0.8j])
    raw = {(i, j): a[i] * a[j] / math.sqrt(2) for i in range(2) for j in range(2)}
    spec = symmetrize(raw, _two_gaussians())
    assert spec.amplitudes[(0, 0)] == pytest.approx(a[0] ** 2)
    assert spec.amplitudes[(0, 1)] == pytest.approx(math.sqrt(2) * a[0] * a[1])
    assert spec.amplitudes[(1, 1)] == pytest.approx(a[1] ** 2)
    equal = symmetrize({(i, j): 0.5 / math.sqrt(2) for i in range(2) for j in range(2)}, _two_gaussians())
    assert [equal.amplitudes[k] for k in ((0, 0), (0, 1), (1, 1))] == pytest.approx([0.5, 2 ** -0.5, 0.5])


def test_symmetrize_asymmetric_pair_sums_permutations():
    spec = symmetrize({(0, 1): 0.3, (1, 0): 0.5}, _two_gaussians(), renormalize=True)
    assert spec.amplitudes == {(0, 1): pytest.approx(1.0)}
    raw = symmetrize({(0, 1): 0.3, (1, 0): 0.5 + 0.6j}, _two_gaussians(), renormalize=True)
    assert raw.amplitudes[(0, 1)] == pytest.approx((0.8 + 0.6j) / 1.0)


def test_symmetrize_rejects_mixed_lengths():
    with pytest.raises(ValueError):
        symmetrize({(0,): 1.0, (0, 1): 1.0}, _two_gaussians())


def test_spec_validation():
    with pytest.raises(ValueError, match="norm"):
        NPhotonSpec(_two_gaussians(), {(0, 1): 0.5})
    with pytest.raises(ValueError, match="outside"):
        NPhotonSpec(_two_gaussians(), {(0, 2): 1.0})
    with pytest.raises(ValueError, match="orthonormal"):
        NPhotonSpec([GaussianPacket(1.0), GaussianPacket(1.0, 0.5)], {(0, 1): 1.0})


# reachable labels --------------------------------------------------------------------

def test_reachable_label_counts():
    assert len(reachable_labels(NPhotonSpec.fock(GaussianPacket(1.0), 2))) == 6
    both = NPhotonSpec(_two_gaussians(), {(0,): 2 ** -0.5, (1,): 2 ** -0.5})
    pairs = reachable_labels(both)
    assert {a for a, _ in pairs} | {b for _, b in pairs} == {(1, 0), (0, 1), (0, 0)}
    assert len(pairs) == 6
    assert len(reachable_labels(NPhotonSpec(BasisSet([GaussianPacket(1.0)]), {(): 1.0}))) == 1


def test_negligible_amplitudes_are_pruned():
    spec = NPhotonSpec(_two_gaussians(), {(0, 0): 1.0, (1, 1): 1e-16})
    labels = {a for a, _ in reachable_labels(spec)}
    assert (0, 2) not in labels and (0, 1) not in labels


def test_missing_label_is_an_error():
    spec = NPhotonSpec.fock(GaussianPacket(1.0), 2)
    states = initial_states(spec, np.diag([1.0, 0.0]))
    del states[((1,), (0,))]
    with pytest.raises(KeyError):
        npacket_hierarchy_rhs(two_level_slh(), spec, states, 0.0)


# right-hand side ---------------------------------------------------------------------

def test_single_basis_packet_reduces_to_single_mode(rng):
    slh = random_slh(rng, 3)
    pkt = GaussianPacket(1.2, detuning=0.3)
    spec = NPhotonSpec.fock(pkt, 3)
    mats = {}
    for m, n in canonical_levels(3):
        mats[(m, n)] = random_operator(rng, 3)
    fock_state = FockHierarchyState(3, mats)
    states = {((m,), (n,)): v for (m, n), v in mats.items()}
    for t in rng.uniform(-2, 2, size=5):
        ours = npacket_hierarchy_rhs(slh, spec, states, t)
        ref = hierarchy_rhs(slh, pkt, fock_state, t)
        for (m, n) in mats:
            assert np.max(np.abs(ours[((m,), (n,))] - ref[(m, n)])) <= 1e-12


def test_engine_matches_reference_rhs(rng):
    slh = random_slh(rng, 2)
    basis = BasisSet([GaussianPacket(1.0), HermiteGauss1(1.0)])
    spec = NPhotonSpec(basis, {(0, 0): 0.6, (0, 1): 0.48j, (1, 1): 0.64})
    eng = build_engine(slh, spec)
    states = {key: random_operator(rng, 2) for key in reachable_labels(spec)}
    y = eng.pack(states)
    for t in (-0.8, 0.1, 1.3):
        dy = eng.rhs(t, y)
        ref = npacket_hierarchy_rhs(slh, spec, states, t)
        for key, val in ref.items():
            assert np.max(np.abs(eng.unpack(dy, key) - val)) <= 1e-12


def test_hermite_gauss_basis_is_orthonormal():
    assert BasisSet([GaussianPacket(1.3), HermiteGauss1(1.3)]).is_orthonormal()


# simulations -------------------------------------------------------------------------

def _factorizable_pair(basis, a):
    raw = {(i, j): a[i] * a[j] / math.sqrt(2) for i in range(2) for j in range(2)}
    return symmetrize(raw, basis)


def test_basis_invariance():
    g, h = GaussianPacket(1.5), HermiteGauss1(1.5)
    a = np.array([math.cos(0.4), math.sin(0.4) * np.exp(0.7j)])
    rot = BasisSet([Combination([2 ** -0.5, 2 ** -0.5], [g, h]), Combination([2 ** -0.5, -2 ** -0.5], [g, h])])
    b = np.array([(a[0] + a[1]), (a[0] - a[1])]) / math.sqrt(2)
    window = (-6.0, 10.0)
    r1 = simulate_npacket(two_level_slh(), _factorizable_pair(BasisSet([g, h]), a), window=window,
                          sample_points=161, outputs=False)
    r2 = simulate_npacket(two_level_slh(), _factorizable_pair(rot, b), window=window,
                          sample_points=161, outputs=False)
    assert np.max(np.abs(r1["P_e"] - r2["P_e"])) <= 1e-6


def test_factorizable_pair_equals_two_photon_fock_state():
    """A factorizable pair is |2> in the packet a0 g + a1 h, so the single-mode run must agree."""
    from fockwave.fock import simulate
    g, h = GaussianPacket(1.5), HermiteGauss1(1.5)
    a = np.array([0.6, 0.8j])
    window = (-6.0, 10.0)
    r1 = simulate_npacket(two_level_slh(), _factorizable_pair(BasisSet([g, h]), a), window=window,
                          sample_points=81, outputs=False)
    r2 = simulate(two_level_slh(), Combination(a, [g, h]), 2, window=window, sample_points=81, outputs=False)
    assert np.max(np.abs(r1["P_e"] - r2["P_e"])) <= 1e-6


def test_second_peak_independent_of_first_packet_phase():
    # leftover coherence from the first packet decays like exp(-separation / 2)
    window = (-5.0, 26.0)
    peaks = []
    for phase in (0.0, 1.9):
        basis = BasisSet([Phased(GaussianPacket(1.5, 0.0), phase), GaussianPacket(1.5, 20.0)])
        spec = NPhotonSpec(basis, {(0, 0): 0.5, (0, 1): 0.6, (1, 1): math.sqrt(1 - 0.25 - 0.36)})
        run = simulate_npacket(two_level_slh(), spec, window=window, sample_points=311, outputs=False)
        late = run.times > 15.0
        peaks.append(run["P_e"][late].max())
    assert abs(peaks[0] - peaks[1]) <= 1e-4


def test_trace_and_hermiticity_invariants():
    basis = BasisSet([GaussianPacket(1.5), HermiteGauss1(1.5)])
    spec = NPhotonSpec(basis, {(0, 0): 0.6, (0, 1): 0.48j, (1, 1): 0.64})
    snaps = []
    eng = build_engine(two_level_slh(), spec, redundant=True)
    from fockwave.integrator import IntegratorConfig, integrate
    cfg = IntegratorConfig(window=(-6.0, 10.0), sample_points=31)
    integrate(eng.rhs, eng.initial_vector(np.diag([1.0, 0.0])), cfg,
              observers=[lambda t, y: snaps.append(y) or {}], max_step=0.05)
    labels = sorted({a for a, _ in reachable_labels(spec)})
    for y in snaps:
        for a in labels:
            for b in labels:
                r = eng.unpack(y, (a, b))
                assert abs(np.trace(r) - (1.0 if a == b else 0.0)) <= 1e-8
                assert np.max(np.abs(r - dag(eng.unpack(y, (b, a))))) <= 1e-9


def test_assemble_total_for_single_label():
    spec = NPhotonSpec.fock(GaussianPacket(1.0), 2)
    states = initial_states(spec, np.diag([0.25, 0.75]))
    assert np.allclose(assemble_total(states, spec), np.diag([0.25, 0.75]))


def test_two_packet_pair_agrees_with_time_bin_oracle():
    basis = _two_gaussians()
    spec = NPhotonSpec(basis, {(0, 0): 0.5, (0, 1): 0.6j, (1, 1): math.sqrt(1 - 0.25 - 0.36)})
    cfg = TimeBinConfig(bins=1500, window=(-4.0, 11.0))
    samples = np.linspace(0, cfg.bins, 11).round().astype(int)
    oracle = run_oracle(two_level_slh(), spec, cfg, sample_bins=samples)
    run = simulate_npacket(two_level_slh(), spec, window=cfg.window, sample_points=11, outputs=False)
    eng = run.engine
    combo = spec.combination()
    from fockwave.integrator import IntegratorConfig, integrate
    states = []
    integrate(eng.rhs, eng.initial_vector(np.diag([1.0, 0.0])),
              IntegratorConfig(window=cfg.window, sample_points=11),
              observers=[lambda t, y: states.append(eng.total_state(y, combo)) or {}],
              max_step=0.02, breakpoints=eng.breakpoints())
    assert np.allclose(oracle.times, run.times)
    worst = max(trace_distance(a, b) for a, b in zip(oracle.states, states))
    assert worst <= 1e-3


def test_json_round_trip(tmp_path):
    spec = NPhotonSpec(_two_gaussians(), {(0, 0): 0.6, (0, 1): 0.8j})
    back = NPhotonSpec.from_json(json.dumps(spec.to_json()))
    assert back.amplitudes == spec.amplitudes
    path = tmp_path / "spec.json"
    doc = spec.to_json()
    doc["symmetrize"] = True
    doc["amplitudes"] = [{"indices": [0, 1], "re": 1.0}, {"indices": [1, 0], "re": 1.0}]
    path.write_text(json.dumps(doc))
    sym = NPhotonSpec.from_json(path)
    assert sym.amplitudes == {(0, 1): pytest.approx(1.0)}
