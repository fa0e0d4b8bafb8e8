"""Two-mode Fock hierarchy ``rho_{m,n;p,q}``: packet ``xi`` in mode 1, ``eta`` in mode 2.

Index order follows ``(m, n; p, q)``: ``m, n`` belong to mode 1 and ``p, q``
to mode 2. Engine labels are ``a = (m, p)`` and ``b = (n, q)``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .engine import Channel, Flux, HierarchyEngine, Quadrature
from .fock import COMBO_TOL
from .integrator import IntegratorConfig
from .operators import (EXCITED, MultiModeSLH, check_density_matrix, commutator, dag, expectation,
                        lindblad_dissipator, waveguide_atom_slh)
from .simulate import Run, decay_rate, resolve_config, run_engine
from .wavepackets import WavePacket


def redundant_count(n_max: int, q_max: int) -> int:
    return (n_max + 1) ** 2 * (q_max + 1) ** 2


def product_symmetry_count(n_max: int, q_max: int) -> int:
    """Size of ``{m >= n} x {p >= q}``: ``(N+1)(N+2)(Q+1)(Q+2)/4``.

    This set does not determine the hierarchy when ``N, Q >= 1``: adjoint
    symmetry flips both index pairs at once, so mixed entries such as
    ``rho_{1,0;0,1}`` are not recoverable from it.
    """
    return (n_max + 1) * (n_max + 2) * (q_max + 1) * (q_max + 2) // 4


def independent_count(n_max: int, q_max: int) -> int:
    """Pairs stored under the full adjoint symmetry ``rho_{n,m;q,p} = rho_{m,n;p,q}^dag``."""
    d = (n_max + 1) * (q_max + 1)
    return d * (d + 1) // 2


def scattering_preset(gamma_forward=0.5, gamma_backward=0.5) -> MultiModeSLH:
    """Two-level atom side-coupled to a waveguide with ``S`` the identity."""
    return waveguide_atom_slh(gamma_forward, gamma_backward)


@dataclass
class TwoModeHierarchyState:
    n_max: int
    q_max: int
    matrices: dict
    time: float = 0.0

    def __getitem__(self, key):
        m, n, p, q = key
        if not (0 <= m <= self.n_max and 0 <= n <= self.n_max
                and 0 <= p <= self.q_max and 0 <= q <= self.q_max):
            raise KeyError(f"level {key} out of range")
        if key in self.matrices:
            return self.matrices[key]
        return dag(self.matrices[(n, m, q, p)])

    def get(self, m, n, p, q):
        if min(m, n, p, q) < 0:
            return np.zeros_like(next(iter(self.matrices.values())))
        return self[(m, n, p, q)]

    @property
    def dim(self):
        return next(iter(self.matrices.values())).shape[0]


@dataclass
class TwoModeCombination:
    """Field state ``sum c_{m,n;p,q} |n><m| (x) |q><p|``."""

    coeffs: dict
    check: bool = True
    n_max: int = field(init=False)
    q_max: int = field(init=False)

    def __post_init__(self):
        self.coeffs = {tuple(k): complex(v) for k, v in self.coeffs.items()}
        if any(len(k) != 4 or min(k) < 0 for k in self.coeffs):
            raise ValueError("keys must be non-negative (m, n, p, q)")
        self.n_max = max((max(k[0], k[1]) for k in self.coeffs), default=0)
        self.q_max = max((max(k[2], k[3]) for k in self.coeffs), default=0)
        if self.check:
            c = self.matrix()
            if np.max(np.abs(c - dag(c)), initial=0) > COMBO_TOL:
                raise ValueError("combination is not Hermitian")
            if abs(np.trace(c) - 1) > 1e-12:
                raise ValueError("combination diagonal does not sum to 1")
            if np.linalg.eigvalsh(0.5 * (c + dag(c))).min() < -COMBO_TOL:
                raise ValueError("combination matrix is not positive semidefinite")

    def _index(self, m, p):
        return m * (self.q_max + 1) + p

    def matrix(self):
        size = (self.n_max + 1) * (self.q_max + 1)
        c = np.zeros((size, size), dtype=complex)
        for (m, n, p, q), v in self.coeffs.items():
            c[self._index(m, p), self._index(n, q)] = v
        return c

    @classmethod
    def fock(cls, n, q=0):
        return cls({(n, n, q, q): 1.0})

    @classmethod
    def superposition(cls, amplitudes: dict):
        """Pure state ``sum psi_{n,q} |n>|q>`` given as ``{(n, q): psi}``."""
        return cls({(m, n, p, q): np.conj(am) * an
                    for (m, p), am in amplitudes.items() for (n, q), an in amplitudes.items()
                    if am and an})

    @classmethod
    def noon_one_photon(cls):
        return cls.superposition({(1, 0): 2 ** -0.5, (0, 1): 2 ** -0.5})

    def pairs(self):
        return {((m, p), (n, q)): c for (m, n, p, q), c in self.coeffs.items()}


def initial_state(rho_sys, n_max, q_max, redundant=False) -> TwoModeHierarchyState:
    rho = check_density_matrix(rho_sys)
    labels = [(m, p) for m in range(n_max + 1) for p in range(q_max + 1)]
    mats = {}
    for i, (m, p) in enumerate(labels):
        for j, (n, q) in enumerate(labels):
            if redundant or i >= j:
                mats[(m, n, p, q)] = rho.copy() if (m == n and p == q) else np.zeros_like(rho)
    return TwoModeHierarchyState(n_max, q_max, mats)


def _coeffs(xi, eta, t):
    x = complex(xi(t)) if xi is not None else 0j
    e = complex(eta(t)) if eta is not None else 0j
    return x, e


def twomode_rhs(slh2: MultiModeSLH, xi: WavePacket, eta: WavePacket, state: TwoModeHierarchyState,
                t: float) -> TwoModeHierarchyState:
    """Derivative of every stored ``rho_{m,n;p,q}``, written term by term."""
    if slh2.modes != 2:
        raise ValueError("two-mode hierarchy needs exactly two field modes")
    if state.dim != slh2.dim:
        raise ValueError("state and system dimensions differ")
    s, l, h = slh2.s, slh2.l, slh2.h
    x, e = _coeffs(xi, eta, t)
    g = state.get
    out = {}
    for (m, n, p, q) in state.matrices:
        rho = state[(m, n, p, q)]
        d = -1j * commutator(h, rho) + lindblad_dissipator(l[0], rho) + lindblad_dissipator(l[1], rho)
        for i in range(2):
            li, ldi = l[i], dag(l[i])
            s1, s2 = s[i][0], s[i][1]
            if m:
                d += math.sqrt(m) * x * commutator(s1 @ g(m - 1, n, p, q), ldi)
            if p:
                d += math.sqrt(p) * e * commutator(s2 @ g(m, n, p - 1, q), ldi)
            if n:
                d += math.sqrt(n) * np.conj(x) * commutator(li, g(m, n - 1, p, q) @ dag(s1))
            if q:
                d += math.sqrt(q) * np.conj(e) * commutator(li, g(m, n, p, q - 1) @ dag(s2))
            if m and n:
                d += math.sqrt(m * n) * abs(x) ** 2 * (s1 @ g(m - 1, n - 1, p, q) @ dag(s1))
            if p and q:
                d += math.sqrt(p * q) * abs(e) ** 2 * (s2 @ g(m, n, p - 1, q - 1) @ dag(s2))
            if m and q:
                d += math.sqrt(m * q) * x * np.conj(e) * (s1 @ g(m - 1, n, p, q - 1) @ dag(s2))
            if n and p:
                d += math.sqrt(n * p) * np.conj(x) * e * (s2 @ g(m, n - 1, p - 1, q) @ dag(s1))
        if m and n:
            d -= math.sqrt(m * n) * abs(x) ** 2 * g(m - 1, n - 1, p, q)
        if p and q:
            d -= math.sqrt(p * q) * abs(e) ** 2 * g(m, n, p - 1, q - 1)
        out[(m, n, p, q)] = d
    return TwoModeHierarchyState(state.n_max, state.q_max, out, t)


def _e(state, key, x):
    if min(key) < 0:
        return 0j
    return expectation(state[key], x)


def twomode_flux_rhs(slh2, xi, eta, state, t, mode: int, into: int | None = None) -> dict:
    """Rate of ``E_{m,n;p,q}[Lambda_ij]`` for output modes ``i = mode``, ``j = into``.

    Modes are 1-based. Written for general ``S``; every scattering term
    keeps the operator product ``S_{ik}^dag S_{jl}`` of the two lowered modes.
    """
    i = mode - 1
    j = i if into is None else into - 1
    s, l = slh2.s, slh2.l
    x, e = _coeffs(xi, eta, t)
    amp = (x, e)
    out = {}
    for (m, n, p, q) in state.matrices:
        bra = ((m, (m - 1, n, p, q)), (p, (m, n, p - 1, q)))
        ket = ((n, (m, n - 1, p, q)), (q, (m, n, p, q - 1)))
        r = _e(state, (m, n, p, q), dag(l[i]) @ l[j])
        for k in range(2):
            cnt, key = ket[k]
            if cnt:
                r += math.sqrt(cnt) * amp[k] * _e(state, key, dag(l[i]) @ s[j][k])
            cnt, key = bra[k]
            if cnt:
                r += math.sqrt(cnt) * np.conj(amp[k]) * _e(state, key, dag(s[i][k]) @ l[j])
        for k in range(2):
            for kk in range(2):
                ca, cb = bra[k][0], ket[kk][0]
                if ca and cb:
                    key = [m, n, p, q]
                    key[2 * k] -= 1
                    key[2 * kk + 1] -= 1
                    r += (math.sqrt(ca * cb) * np.conj(amp[k]) * amp[kk]
                          * _e(state, tuple(key), dag(s[i][k]) @ s[j][kk]))
        out[(m, n, p, q)] = r
    return out


def twomode_quadrature_rhs(slh2, xi, eta, state, t, mode: int, phi: float) -> dict:
    """Rate of ``E_{m,n;p,q}[Z_i]`` for output mode ``i = mode`` (1-based).

    Phase placement matches the single-mode quadrature: ``e^{i phi}`` goes
    with the ket-lowering terms ``sqrt(n) xi`` and ``sqrt(q) eta``.
    """
    i = mode - 1
    s, l = slh2.s, slh2.l
    x, e = _coeffs(xi, eta, t)
    ph = np.exp(1j * phi)
    out = {}
    for (m, n, p, q) in state.matrices:
        r = _e(state, (m, n, p, q), ph * l[i] + np.conj(ph) * dag(l[i]))
        if n:
            r += ph * math.sqrt(n) * x * _e(state, (m, n - 1, p, q), s[i][0])
        if q:
            r += ph * math.sqrt(q) * e * _e(state, (m, n, p, q - 1), s[i][1])
        if m:
            r += np.conj(ph) * math.sqrt(m) * np.conj(x) * _e(state, (m - 1, n, p, q), dag(s[i][0]))
        if p:
            r += np.conj(ph) * math.sqrt(p) * np.conj(e) * _e(state, (m, n, p - 1, q), dag(s[i][1]))
        out[(m, n, p, q)] = r
    return out


def assemble_total_twomode(state: TwoModeHierarchyState, combo: TwoModeCombination) -> np.ndarray:
    if combo.n_max > state.n_max or combo.q_max > state.q_max:
        raise ValueError("combination references levels beyond the hierarchy")
    tot = np.zeros((state.dim, state.dim), dtype=complex)
    for key, c in combo.coeffs.items():
        if c:
            tot += np.conj(c) * state[key]
    return tot


# engine-backed simulation --------------------------------------------------------

def build_engine(slh2: MultiModeSLH, xi, eta, n_max, q_max, observables=(), redundant=False):
    if slh2.modes != 2:
        raise ValueError("two-mode hierarchy needs exactly two field modes")
    chans = [Channel(xi, 0), Channel(eta, 1)]
    labels = [(m, p) for m in range(n_max + 1) for p in range(q_max + 1)]
    return HierarchyEngine(slh2, chans, labels, observables, redundant)


def state_from_vector(engine, y, t=0.0) -> TwoModeHierarchyState:
    mats = {(a[0], b[0], a[1], b[1]): engine.unpack(y, (a, b)) for a, b in engine.pairs}
    n_max = max(a[0] for a in engine.labels)
    q_max = max(a[1] for a in engine.labels)
    return TwoModeHierarchyState(n_max, q_max, mats, t)


class _Silent:
    """Zero packet used when a mode carries vacuum."""

    def __init__(self, like):
        self._like = like

    def __call__(self, t):
        return 0j if np.ndim(t) == 0 else np.zeros(np.shape(t), dtype=complex)

    def support(self):
        return self._like.support()

    def scale(self):
        return self._like.scale()


def simulate_twomode(slh2: MultiModeSLH, xi: WavePacket, eta: WavePacket | None, combos,
                     rho_sys=None, cfg: IntegratorConfig | None = None, phi: float = 0.0,
                     projector=EXCITED, cross_flux=False, redundant=False, **cfg_overrides) -> Run:
    """Evolve the two-mode hierarchy.

    Columns per mode ``i``: ``flux{i}_rate``, ``flux{i}_integrated``,
    ``quad{i}_rate``, ``quad{i}_integrated``; ``flux12_*`` when
    ``cross_flux`` is set. ``eta=None`` means mode 2 carries vacuum.
    """
    if isinstance(combos, TwoModeCombination):
        combos = {"field": combos}
    n_max = max(c.n_max for c in combos.values())
    q_max = max(c.q_max for c in combos.values())
    if eta is None:
        if q_max:
            raise ValueError("mode 2 photons need a packet")
        eta = _Silent(xi)
    if rho_sys is None:
        rho_sys = np.diag([1.0] + [0.0] * (slh2.dim - 1))
    rho_sys = check_density_matrix(rho_sys)
    obs = [Flux(0), Flux(1), Quadrature(0, phi), Quadrature(1, phi)]
    if cross_flux:
        obs.append(Flux(0, 1))
    eng = build_engine(slh2, xi, eta, n_max, q_max, obs, redundant)
    packets = [xi] if isinstance(eta, _Silent) else [xi, eta]
    gamma = decay_rate(slh2)
    cfg = resolve_config(cfg, packets, gamma, **cfg_overrides)
    return run_engine(eng, rho_sys, cfg, {k: c.pairs() for k, c in combos.items()},
                      projector, obs, gamma)
