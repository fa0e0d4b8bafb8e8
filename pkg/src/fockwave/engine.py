"""Sparse real-valued generator shared by every hierarchy flavour.

A hierarchy is indexed by pairs ``(a, b)`` of occupation vectors over a list
of *channels*, where a channel is one wave packet travelling in one field
mode. The single-mode Fock hierarchy is one channel, the two-mode hierarchy
is two channels in different modes, and a general N-photon state is K
channels (basis packets) in the same mode.

The generator is linear in the state with coefficients ``1``, ``xi_k(t)``,
``conj(xi_k(t))`` and ``xi_k(t) conj(xi_l(t))``. Each coefficient gets a real
sparse matrix acting on the flattened state ``[re, im, re, im, ...]``, and the
matrices are stacked so one RHS evaluation is a single sparse product.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from .operators import MultiModeSLH, dag, lindblad_superop, hamiltonian_superop, spre, spost, sprepost
from .wavepackets import WavePacket


@dataclass(frozen=True)
class Channel:
    packet: WavePacket
    mode: int = 0


@dataclass(frozen=True)
class Flux:
    """Output photon flux ``Lambda_ij``; ``i == j`` is the number flux of mode ``i``."""

    out: int = 0
    into: int | None = None

    @property
    def pair(self):
        return (self.out, self.out if self.into is None else self.into)

    def adjoint(self):
        i, j = self.pair
        return Flux(j, i)

    @property
    def name(self):
        i, j = self.pair
        return f"flux{i + 1}" if i == j else f"flux{i + 1}{j + 1}"


@dataclass(frozen=True)
class Quadrature:
    """Homodyne quadrature ``e^{i phi} b_out + h.c.`` of one output mode."""

    out: int = 0
    phi: float = 0.0

    def adjoint(self):
        return self

    @property
    def name(self):
        return f"quad{self.out + 1}"


def unit(k: int, size: int) -> tuple:
    return tuple(1 if i == k else 0 for i in range(size))


def lower(label: tuple, k: int) -> tuple | None:
    if label[k] == 0:
        return None
    return label[:k] + (label[k] - 1,) + label[k + 1:]


def downward_closure(labels) -> list:
    """All occupation vectors reachable by removing photons, sorted."""
    seen = set()
    stack = [tuple(x) for x in labels]
    while stack:
        lab = stack.pop()
        if lab in seen:
            continue
        seen.add(lab)
        stack.extend(l for k in range(len(lab)) if (l := lower(lab, k)) is not None)
    return sorted(seen)


class _Builder:
    """Collects realified COO triplets per coefficient channel."""

    def __init__(self, n_channels):
        self.rows = [[] for _ in range(n_channels)]
        self.cols = [[] for _ in range(n_channels)]
        self.vals = [[] for _ in range(n_channels)]

    def add(self, ch, mat, roff, coff, conj_src):
        r, c = np.nonzero(np.abs(mat) > 0)
        if r.size == 0:
            return
        a = mat[r, c]
        ar, ai = a.real, a.imag
        rr = 2 * (roff + r)
        cc = 2 * (coff + c)
        if conj_src:
            blocks = ((0, 0, ar), (0, 1, ai), (1, 0, ai), (1, 1, -ar))
        else:
            blocks = ((0, 0, ar), (0, 1, -ai), (1, 0, ai), (1, 1, ar))
        for dr, dc, v in blocks:
            self.rows[ch].append(rr + dr)
            self.cols[ch].append(cc + dc)
            self.vals[ch].append(v)

    def matrix(self, ch, n):
        if not self.rows[ch]:
            return sp.csr_matrix((n, n))
        m = sp.coo_matrix((np.concatenate(self.vals[ch]),
                           (np.concatenate(self.rows[ch]), np.concatenate(self.cols[ch]))),
                          shape=(n, n)).tocsr()
        m.eliminate_zeros()
        return m


class HierarchyEngine:
    """Linear ODE for generalized density operators and output accumulators.

    ``labels`` must be closed under single-photon removal. In canonical mode
    only pairs with ``index(a) >= index(b)`` are stored and the rest are
    reconstructed as adjoints; ``redundant=True`` stores every pair.
    """

    def __init__(self, slh: MultiModeSLH, channels, labels, observables=(), redundant=False):
        self.slh = slh
        self.channels = tuple(channels)
        self.n_channels = len(self.channels)
        for ch in self.channels:
            if not 0 <= ch.mode < slh.modes:
                raise ValueError(f"channel mode {ch.mode} outside 0..{slh.modes - 1}")
        self.labels = sorted(tuple(x) for x in labels)
        if any(len(x) != self.n_channels for x in self.labels):
            raise ValueError("label length must equal the number of channels")
        if downward_closure(self.labels) != self.labels:
            raise ValueError("labels are not closed under photon removal")
        self.label_index = {lab: i for i, lab in enumerate(self.labels)}
        self.redundant = redundant
        self.pairs = [(a, b) for a in self.labels for b in self.labels
                      if redundant or self.label_index[a] >= self.label_index[b]]
        self.pair_slot = {p: i for i, p in enumerate(self.pairs)}
        obs = list(observables)
        if not redundant:
            for o in list(obs):
                if o.adjoint() not in obs:
                    obs.append(o.adjoint())
        self.observables = obs
        self.dim = d = slh.dim
        self.block = d * d
        self.n_levels = len(self.pairs)
        self.level_size = self.n_levels * self.block
        self.acc_index = {(o, p): self.level_size + io * self.n_levels + ip
                          for io, o in enumerate(obs) for ip, p in enumerate(self.pairs)}
        self.size = self.level_size + len(obs) * self.n_levels
        self._tperm = np.array([(c % d) * d + c // d for c in range(self.block)])
        self._pair_list = [(k, l) for k in range(self.n_channels) for l in range(self.n_channels)]
        self._build()

    # ---- storage ----------------------------------------------------------

    def _locate(self, pair):
        """Return (complex offset, is_adjoint) of a pair, or None when absent."""
        a, b = pair
        if a is None or b is None:
            return None
        if pair in self.pair_slot:
            return self.pair_slot[pair] * self.block, False
        if (b, a) in self.pair_slot:
            return self.pair_slot[(b, a)] * self.block, True
        return None

    def unpack(self, y, pair) -> np.ndarray:
        loc = self._locate(pair)
        if loc is None:
            raise KeyError(f"pair {pair} not in hierarchy")
        off, adj = loc
        seg = y[2 * off: 2 * (off + self.block)]
        m = (seg[0::2] + 1j * seg[1::2]).reshape(self.dim, self.dim)
        return dag(m) if adj else m

    def levels(self, y) -> dict:
        return {p: self.unpack(y, p) for p in self.pairs}

    def accumulator(self, y, obs, pair) -> complex:
        a, b = pair
        if (obs, pair) in self.acc_index:
            i = self.acc_index[(obs, pair)]
            return complex(y[2 * i], y[2 * i + 1])
        if (obs.adjoint(), (b, a)) in self.acc_index:
            i = self.acc_index[(obs.adjoint(), (b, a))]
            return complex(y[2 * i], -y[2 * i + 1])
        raise KeyError(f"{obs} at {pair} not tracked")

    def pack(self, levels: dict, accumulators: dict | None = None) -> np.ndarray:
        y = np.zeros(2 * self.size)
        for p, m in levels.items():
            off = self.pair_slot[p] * self.block
            flat = np.asarray(m, dtype=complex).ravel()
            y[2 * off: 2 * (off + self.block): 2] = flat.real
            y[2 * off + 1: 2 * (off + self.block): 2] = flat.imag
        for key, v in (accumulators or {}).items():
            i = self.acc_index[key]
            y[2 * i], y[2 * i + 1] = v.real, v.imag
        return y

    def initial_vector(self, rho_sys) -> np.ndarray:
        rho = np.asarray(rho_sys, dtype=complex)
        return self.pack({(a, a): rho for a in self.labels})

    # ---- coefficients -------------------------------------------------------

    def _xi_channel(self, k):
        return 1 + 2 * k

    def _pair_channel(self, k, l):
        return 1 + 2 * self.n_channels + 2 * self._pair_list.index((k, l))

    @property
    def n_coeff(self):
        return 1 + 2 * self.n_channels + 2 * len(self._pair_list)

    def coefficients(self, t) -> np.ndarray:
        xi = np.array([ch.packet(t) for ch in self.channels], dtype=complex)
        prod = np.array([xi[k] * np.conj(xi[l]) for k, l in self._pair_list])
        out = np.empty(self.n_coeff)
        out[0] = 1.0
        out[1:1 + 2 * self.n_channels:2] = xi.real
        out[2:1 + 2 * self.n_channels:2] = xi.imag
        out[1 + 2 * self.n_channels::2] = prod.real
        out[2 + 2 * self.n_channels::2] = prod.imag
        return out

    # ---- assembly ---------------------------------------------------------

    def _add(self, bld, kind, target, src_pair, mat, functional=False):
        """Add ``coeff * mat @ source`` to ``target`` (complex offset).

        ``kind`` is ``'const'``, ``('xi', k)``, ``('xic', k)`` or
        ``('pair', k, l)`` for ``xi_k conj(xi_l)``. ``functional`` marks
        rows that act on the conjugated source, as ``Tr[rho^dag X]`` does.
        """
        loc = self._locate(src_pair)
        if loc is None:
            return
        off, adj = loc
        conj = functional
        if adj:
            mat = mat[:, self._tperm]
            conj = not functional
        if kind == "const":
            bld.add(0, mat, target, off, conj)
            return
        if kind[0] in ("xi", "xic"):
            re = self._xi_channel(kind[1])
            sign = 1 if kind[0] == "xi" else -1
        else:
            re = self._pair_channel(kind[1], kind[2])
            sign = 1
        bld.add(re, mat, target, off, conj)
        if kind[0] != "pair" or kind[1] != kind[2]:
            bld.add(re + 1, sign * 1j * mat, target, off, conj)

    def _build(self):
        slh, d = self.slh, self.dim
        s, l = slh.s, slh.l
        modes = slh.modes
        eye = np.eye(d)
        bld = _Builder(self.n_coeff)
        gen0 = hamiltonian_superop(slh.h) + sum(lindblad_superop(li) for li in l)
        ket_sup, bra_sup, jump_sup = {}, {}, {}
        for mu in range(modes):
            ket_sup[mu] = sum(sprepost(s[i][mu], dag(l[i])) - spre(dag(l[i]) @ s[i][mu])
                              for i in range(modes))
            bra_sup[mu] = sum(sprepost(l[i], dag(s[i][mu])) - spost(dag(s[i][mu]) @ l[i])
                              for i in range(modes))
            for nu in range(modes):
                jump = sum(sprepost(s[i][mu], dag(s[i][nu])) for i in range(modes))
                if mu == nu:
                    jump = jump - np.eye(d * d)
                jump_sup[mu, nu] = jump
        chans = range(self.n_channels)
        for (a, b), slot in self.pair_slot.items():
            tgt = slot * self.block
            self._add(bld, "const", tgt, (a, b), gen0)
            for k in chans:
                mu = self.channels[k].mode
                if a[k]:
                    self._add(bld, ("xi", k), tgt, (lower(a, k), b), math.sqrt(a[k]) * ket_sup[mu])
                if b[k]:
                    self._add(bld, ("xic", k), tgt, (a, lower(b, k)), math.sqrt(b[k]) * bra_sup[mu])
            for k, kk in itertools.product(chans, chans):
                if a[k] and b[kk]:
                    mu, nu = self.channels[k].mode, self.channels[kk].mode
                    self._add(bld, ("pair", k, kk), tgt, (lower(a, k), lower(b, kk)),
                              math.sqrt(a[k] * b[kk]) * jump_sup[mu, nu])
        for (obs, (a, b)), idx in self.acc_index.items():
            self._add_observable(bld, obs, idx, a, b, eye)
        n = 2 * self.size
        self.const_matrix = bld.matrix(0, n)
        drive = [bld.matrix(c, n) for c in range(1, self.n_coeff)]
        self.drive_matrix = sp.vstack(drive).tocsr() if drive else sp.csr_matrix((0, n))

    def _add_observable(self, bld, obs, idx, a, b, eye):
        s, l = self.slh.s, self.slh.l
        row = lambda x: np.asarray(x, dtype=complex).reshape(1, -1)
        chans = range(self.n_channels)
        if isinstance(obs, Flux):
            i, j = obs.pair
            self._add(bld, "const", idx, (a, b), row(dag(l[i]) @ l[j]), True)
            for k in chans:
                mu = self.channels[k].mode
                if b[k]:
                    self._add(bld, ("xi", k), idx, (a, lower(b, k)),
                              math.sqrt(b[k]) * row(dag(l[i]) @ s[j][mu]), True)
                if a[k]:
                    self._add(bld, ("xic", k), idx, (lower(a, k), b),
                              math.sqrt(a[k]) * row(dag(s[i][mu]) @ l[j]), True)
            for k, kk in itertools.product(chans, chans):
                if a[k] and b[kk]:
                    mu, nu = self.channels[k].mode, self.channels[kk].mode
                    self._add(bld, ("pair", kk, k), idx, (lower(a, k), lower(b, kk)),
                              math.sqrt(a[k] * b[kk]) * row(dag(s[i][mu]) @ s[j][nu]), True)
        elif isinstance(obs, Quadrature):
            i, ph = obs.out, np.exp(1j * obs.phi)
            self._add(bld, "const", idx, (a, b), row(ph * l[i] + np.conj(ph) * dag(l[i])), True)
            for k in chans:
                mu = self.channels[k].mode
                if b[k]:
                    self._add(bld, ("xi", k), idx, (a, lower(b, k)),
                              ph * math.sqrt(b[k]) * row(s[i][mu]), True)
                if a[k]:
                    self._add(bld, ("xic", k), idx, (lower(a, k), b),
                              np.conj(ph) * math.sqrt(a[k]) * row(dag(s[i][mu])), True)
        else:
            raise TypeError(f"unsupported observable {obs!r}")

    # ---- evaluation ---------------------------------------------------------

    def rhs(self, t, y) -> np.ndarray:
        out = self.const_matrix @ y
        c = self.coefficients(t)[1:]
        if np.any(c):
            z = (self.drive_matrix @ y).reshape(c.size, -1)
            out += c @ z
        return out

    def support(self):
        lo = min(ch.packet.support()[0] for ch in self.channels) if self.channels else 0.0
        hi = max(ch.packet.support()[1] for ch in self.channels) if self.channels else 0.0
        return lo, hi

    def breakpoints(self):
        pts = []
        for ch in self.channels:
            pts.extend(ch.packet.support())
        return sorted(set(pts))

    # ---- combinations -----------------------------------------------------

    def total_state(self, y, combo: dict) -> np.ndarray:
        """``sum conj(c_ab) rho_ab``."""
        tot = np.zeros((self.dim, self.dim), dtype=complex)
        for pair, c in combo.items():
            if c:
                tot += np.conj(c) * self.unpack(y, pair)
        return tot

    def total_expectation(self, y, obs, combo: dict) -> complex:
        """``sum c_ab E_ab[obs]`` (coefficients not conjugated)."""
        return sum((c * self.accumulator(y, obs, pair) for pair, c in combo.items() if c), 0j)

    def total_rate(self, t, y, obs, combo: dict) -> complex:
        dy = self.rhs(t, y)
        return self.total_expectation(dy, obs, combo)
