"""Brute-force time-bin (collision model) simulation of system plus field.

The field is a chain of bins, each holding one bosonic mode per field mode
("site"). The joint state with ``n`` photons is stored as a symmetric tensor

    |Psi> = sum_n sum_s sum_{i1..in} f_n[s, i1, ..., in] |s> b^dag_{i1}...b^dag_{in}|0> / sqrt(n!)

so that ``sum |f_n|^2`` is the norm. Bin ``k`` meets the system once and is
evolved exactly with ``exp(sqrt(dt) sum_mu (L_mu b_mu^dag - L_mu^dag b_mu) - i H dt)``,
restricted to excitation-conserving blocks. Only ``S = I`` couplings are
supported, and the cost grows like ``bins^(n_max)``, so this is a validation
tool for ``N <= 3``.
"""

from __future__ import annotations

import itertools
import logging
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import expm

from .operators import SLH, MultiModeSLH, dag
from .wavepackets import WavePacket

log = logging.getLogger(__name__)

GRID_NORM_TOL = 1e-6
MAX_PHOTONS = 3


class UnsupportedConfiguration(ValueError):
    pass


@dataclass
class TimeBinConfig:
    bins: int
    window: tuple
    n_total_max: int | None = None

    def __post_init__(self):
        if self.bins < 1:
            raise ValueError("need at least one bin")
        if not self.window[0] < self.window[1]:
            raise ValueError("window must be increasing")

    @property
    def dt_bin(self) -> float:
        return (self.window[1] - self.window[0]) / self.bins

    @property
    def bin_midpoints(self):
        return self.window[0] + self.dt_bin * (np.arange(self.bins) + 0.5)

    def time_of(self, k: int) -> float:
        """Time after ``k`` bins have interacted."""
        return self.window[0] + k * self.dt_bin


def _as_multimode(slh) -> MultiModeSLH:
    return MultiModeSLH.from_single(slh) if isinstance(slh, SLH) else slh


def _check_slh(slh: MultiModeSLH, excitations):
    d = slh.dim
    eye = np.eye(d)
    for i, row in enumerate(slh.s):
        for j, s in enumerate(row):
            if np.max(np.abs(s - (eye if i == j else 0 * eye))) > 1e-12:
                raise UnsupportedConfiguration("oracle supports only S = identity")
    exc = np.diag(np.asarray(excitations, dtype=float))
    for l in slh.l:
        if np.max(np.abs(exc @ l - l @ exc + l)) > 1e-12:
            raise UnsupportedConfiguration("every L must lower the excitation number by one")
    if np.max(np.abs(exc @ slh.h - slh.h @ exc)) > 1e-12:
        raise UnsupportedConfiguration("H must conserve the excitation number")


def _local_basis(n_sites: int, o_max: int):
    """Occupation vectors over the local sites with total at most ``o_max``."""
    return [w for w in itertools.product(range(o_max + 1), repeat=n_sites) if sum(w) <= o_max]


def _local_unitary(slh: MultiModeSLH, dt: float, o_max: int):
    """Bin unitary on ``system (x) local modes`` truncated to ``o_max`` quanta."""
    basis = _local_basis(slh.modes, o_max)
    pos = {w: i for i, w in enumerate(basis)}
    nb = len(basis)
    d = slh.dim
    gen = np.kron(-1j * dt * slh.h, np.eye(nb))
    for mu, l in enumerate(slh.l):
        create = np.zeros((nb, nb))
        for w, i in pos.items():
            up = list(w)
            up[mu] += 1
            j = pos.get(tuple(up))
            if j is not None:
                create[j, i] = math.sqrt(up[mu])
        gen = gen + math.sqrt(dt) * (np.kron(l, create) - np.kron(dag(l), create.T))
    return basis, expm(gen)


@dataclass
class OracleState:
    """Sector tensors ``f[n]`` with system axis restricted to ``allowed[n]``."""

    f: dict
    allowed: dict
    n_sites: int
    bins: int
    dim: int
    excitations: np.ndarray
    bins_done: int = 0
    _cache: dict = field(default_factory=dict, repr=False)

    @property
    def n_max(self):
        return max(self.f)

    def norm(self) -> float:
        return float(math.sqrt(sum(np.vdot(x, x).real for x in self.f.values())))

    def site(self, mode: int, k: int) -> int:
        return mode * self.bins + k


def _sym_product(vectors):
    """Symmetrized outer product of a list of vectors."""
    n = len(vectors)
    if n == 0:
        return np.array(1.0 + 0j)
    out = 0
    for p in itertools.permutations(range(n)):
        t = vectors[p[0]]
        for i in p[1:]:
            t = np.multiply.outer(t, vectors[i])
        out = out + t
    return out / math.factorial(n)


def _grid_amplitudes(packet: WavePacket, cfg: TimeBinConfig):
    u = np.asarray(packet(cfg.bin_midpoints), dtype=complex) * math.sqrt(cfg.dt_bin)
    w = np.vdot(u, u).real
    if abs(w - 1) > GRID_NORM_TOL:
        raise ValueError(f"packet weight on the bin grid is {w:.8f}; refine bins or widen window")
    return u / math.sqrt(w)


def build_input_state(cfg: TimeBinConfig, field_spec, system_state=None, excitations=None,
                      n_modes: int = 1) -> OracleState:
    """Discretize an input field onto the bin grid.

    ``field_spec`` is ``(packet, N)`` for a single-mode Fock state, an
    ``NPhotonSpec``, or ``[(mode, packet, N), ...]`` for Fock states in
    several modes. ``system_state`` is a pure state vector (ground by default).
    """
    from .npacket import NPhotonSpec, indices_of

    B = cfg.bins
    components = []  # (amplitude, list of site-vectors)

    def site_vec(mode, packet):
        v = np.zeros(n_modes * B, dtype=complex)
        v[mode * B:(mode + 1) * B] = _grid_amplitudes(packet, cfg)
        return v

    if isinstance(field_spec, NPhotonSpec):
        vecs = [site_vec(0, p) for p in field_spec.basis]
        for label, lam in field_spec.label_amplitudes().items():
            n = sum(label)
            w = math.sqrt(math.factorial(n) / math.prod(math.factorial(a) for a in label))
            components.append((lam * w, [vecs[k] for k in indices_of(label)]))
    else:
        if isinstance(field_spec, tuple) and isinstance(field_spec[0], WavePacket):
            field_spec = [(0, *field_spec)]
        vecs, counts = [], []
        for mode, packet, n in field_spec:
            vecs += [site_vec(mode, packet)] * n
            counts.append(n)
        w = math.sqrt(math.factorial(len(vecs)) / math.prod(math.factorial(c) for c in counts))
        components.append((w, vecs))
    n_photons = {len(v) for _, v in components}
    if len(n_photons) != 1:
        raise ValueError("all field components must share the photon number")
    n_ph = n_photons.pop()
    if n_ph > MAX_PHOTONS:
        raise UnsupportedConfiguration(f"oracle supports at most {MAX_PHOTONS} photons")

    # vectors of different packets are orthogonal, so the component norms add up
    f_field = sum(a * _sym_product(v) for a, v in components)
    norm = math.sqrt(np.vdot(f_field, f_field).real)
    if abs(norm - 1) > GRID_NORM_TOL:
        log.info("renormalizing discretized field (norm %.3g)", norm)
    f_field = f_field / norm

    sys_vec = np.zeros(2, dtype=complex) if system_state is None else np.asarray(system_state, dtype=complex)
    if system_state is None:
        sys_vec[0] = 1.0
    sys_vec = sys_vec / np.linalg.norm(sys_vec)
    d = sys_vec.size
    exc = np.arange(d) if excitations is None else np.asarray(excitations)
    if excitations is None and d != 2:
        raise ValueError("excitation labels are required beyond the two-level atom")
    totals = {int(exc[s]) + n_ph for s in np.nonzero(np.abs(sys_vec) > 0)[0]}
    n_max = max(totals) if cfg.n_total_max is None else cfg.n_total_max
    if n_max < n_ph:
        raise ValueError("n_total_max is below the input photon number")
    if n_max > MAX_PHOTONS:
        raise UnsupportedConfiguration(f"oracle supports at most {MAX_PHOTONS} field excitations")
    allowed, f = {}, {}
    for n in range(n_max + 1):
        allowed[n] = np.array([s for s in range(d) if int(exc[s]) + n in totals], dtype=int)
        f[n] = np.zeros((allowed[n].size,) + (n_modes * B,) * n, dtype=complex)
    pos = {s: i for i, s in enumerate(allowed[n_ph])}
    for s in np.nonzero(np.abs(sys_vec) > 0)[0]:
        f[n_ph][pos[s]] = sys_vec[s] * f_field
    return OracleState(f, allowed, n_modes, B, d, exc)


def _blocks(state: OracleState, slh: MultiModeSLH, dt: float):
    key = (id(slh), dt)
    if key not in state._cache:
        blocks = []
        n_max = state.n_max
        for r in range(n_max + 1):
            basis, u = _local_unitary(slh, dt, n_max - r)
            nb = len(basis)
            rows, entries = [], []
            for s in range(state.dim):
                for iw, w in enumerate(basis):
                    n = sum(w) + r
                    if n <= n_max and s in state.allowed[n]:
                        rows.append(s * nb + iw)
                        entries.append((s, w, n))
            sub = u[np.ix_(rows, rows)]
            skip = np.allclose(sub, np.eye(len(rows)), atol=1e-15, rtol=0)
            blocks.append((r, entries, sub, skip))
        state._cache.clear()
        state._cache[key] = blocks
    return state._cache[key]


def _arrangements(local_sites, w):
    """Distinct orderings of the local-site multiset described by occupation ``w``."""
    seq = [site for site, c in zip(local_sites, w) for _ in range(c)]
    return sorted(set(itertools.permutations(seq)))


def step_collision(state: OracleState, k: int, slh, dt_bin: float) -> OracleState:
    """Let bin ``k`` interact with the system (in place; also returned)."""
    slh = _as_multimode(slh)
    if slh.modes != state.n_sites:
        raise ValueError("SLH mode count does not match the oracle state")
    if not 0 <= k < state.bins:
        raise IndexError(f"bin {k} outside 0..{state.bins - 1}")
    if "checked" not in state._cache or state._cache["checked"] is not slh:
        _check_slh(slh, state.excitations)
    blocks = _blocks(state, slh, dt_bin)
    state._cache["checked"] = slh
    local = [state.site(mu, k) for mu in range(state.n_sites)]
    mask = np.ones(state.n_sites * state.bins, dtype=bool)
    mask[local] = False
    others = np.nonzero(mask)[0]
    for r, entries, sub, skip in blocks:
        if skip or not entries:
            continue
        # open mesh over the bins that do not take part in this collision
        rest = [others.reshape((1,) * i + (-1,) + (1,) * (r - 1 - i)) for i in range(r)]
        shape = (others.size,) * r
        vals = np.zeros((len(entries),) + shape, dtype=complex)
        for row, (s, w, n) in enumerate(entries):
            si = int(np.searchsorted(state.allowed[n], s))
            seq = _arrangements(local, w)[0]
            scale = math.sqrt(math.factorial(n) / (math.prod(math.factorial(x) for x in w)
                                                   * math.factorial(r)))
            vals[row] = scale * state.f[n][(si, *seq, *rest)]
        new = np.tensordot(sub, vals, axes=(1, 0))
        for row, (s, w, n) in enumerate(entries):
            si = int(np.searchsorted(state.allowed[n], s))
            scale = math.sqrt(math.factorial(n) / (math.prod(math.factorial(x) for x in w)
                                                   * math.factorial(r)))
            value = new[row] / scale
            o = sum(w)
            for seq in _arrangements(local, w):
                # every placement of the local sites among the n tensor axes
                for slots in itertools.combinations(range(n), o):
                    idx = [None] * n
                    it_local = iter(seq)
                    for p in slots:
                        idx[p] = next(it_local)
                    it_rest = iter(rest)
                    for p in range(n):
                        if idx[p] is None:
                            idx[p] = next(it_rest)
                    state.f[n][(si, *idx)] = value
    state.bins_done = k + 1
    return state


def reduced_system_state(state: OracleState) -> np.ndarray:
    rho = np.zeros((state.dim, state.dim), dtype=complex)
    for n, f in state.f.items():
        idx = state.allowed[n]
        if idx.size == 0:
            continue
        flat = f.reshape(idx.size, -1)
        rho[np.ix_(idx, idx)] += flat @ flat.conj().T
    return rho


def photons_emitted(state: OracleState, mode: int = 0) -> float:
    """Mean number of photons in bins of ``mode`` that have already interacted."""
    lo = mode * state.bins
    past = np.zeros(state.n_sites * state.bins)
    past[lo:lo + state.bins_done] = 1.0
    total = 0.0
    for n, f in state.f.items():
        if n == 0:
            continue
        p = np.abs(f) ** 2
        for ax in range(1, n + 1):
            shape = [1] * (n + 1)
            shape[ax] = -1
            total += float(np.sum(p * past.reshape(shape)))
    return total


def occupation_amplitudes(state: OracleState, s: int = 0) -> dict:
    """Amplitudes on normalized bin-occupation states for system state ``s``."""
    out = {}
    for n, f in state.f.items():
        if s not in state.allowed[n]:
            continue
        t = f[int(np.searchsorted(state.allowed[n], s))]
        for idx in itertools.combinations_with_replacement(range(t.shape[0] if n else 0), n):
            v = t[idx] if n else complex(t)
            if abs(v) > 0:
                occ = np.bincount(idx, minlength=1) if n else np.zeros(0)
                w = math.sqrt(math.factorial(n) / math.prod(math.factorial(int(x)) for x in occ))
                out[tuple(idx)] = w * v
    return out


@dataclass
class OracleRun:
    times: np.ndarray
    states: list
    flux: dict
    norms: np.ndarray

    def excitation(self, level=1):
        return np.array([r[level, level].real for r in self.states])


def run_oracle(slh, field_spec, cfg: TimeBinConfig, sample_bins=None, system_state=None,
               excitations=None) -> OracleRun:
    """Sweep all bins, recording system state and emitted photons at ``sample_bins``."""
    mm = _as_multimode(slh)
    state = build_input_state(cfg, field_spec, system_state, excitations, n_modes=mm.modes)
    if sample_bins is None:
        sample_bins = np.linspace(0, cfg.bins, 11).round().astype(int)
    sample_bins = sorted(set(int(b) for b in sample_bins))
    times, states, norms = [], [], []
    flux = {mu: [] for mu in range(mm.modes)}

    def record():
        times.append(cfg.time_of(state.bins_done))
        states.append(reduced_system_state(state))
        norms.append(state.norm())
        for mu in range(mm.modes):
            flux[mu].append(photons_emitted(state, mu))

    if 0 in sample_bins:
        record()
    for k in range(cfg.bins):
        step_collision(state, k, mm, cfg.dt_bin)
        if k + 1 in sample_bins:
            record()
    return OracleRun(np.array(times), states, {mu: np.array(v) for mu, v in flux.items()},
                     np.array(norms))


def trace_distance(a, b) -> float:
    return 0.5 * float(np.abs(np.linalg.eigvalsh(0.5 * ((a - b) + dag(a - b)))).sum())
