"""Output-field expectations: photon flux and homodyne quadrature."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .engine import Flux, Quadrature
from .fock import FieldCombination, FockHierarchyState
from .operators import SLH, dag, expectation
from .wavepackets import WavePacket

IMAG_TOL = 1e-8


def _e(state, m, n, x):
    if m < 0 or n < 0:
        return 0j
    return expectation(state[(m, n)], x)


def flux_rhs(slh: SLH, xi: WavePacket, state: FockHierarchyState, t: float) -> dict:
    """Rate of ``E_{m,n}[Lambda_out]`` for every stored level.

    The constant ``|xi|^2`` piece carries ``E_{m-1,n-1}[S^dag S]`` so that it
    vanishes on off-diagonal levels, where that trace is zero.
    """
    s, l = slh.s, slh.l
    x = complex(xi(t)) if xi is not None else 0j
    ldl, sdl, lds, sds = dag(l) @ l, dag(s) @ l, dag(l) @ s, dag(s) @ s
    out = {}
    for (m, n) in state.matrices:
        r = _e(state, m, n, ldl)
        if m > 0:
            r += math.sqrt(m) * np.conj(x) * _e(state, m - 1, n, sdl)
        if n > 0:
            r += math.sqrt(n) * x * _e(state, m, n - 1, lds)
        if m > 0 and n > 0:
            r += math.sqrt(m * n) * abs(x) ** 2 * _e(state, m - 1, n - 1, sds)
        out[(m, n)] = r
    return out


def quadrature_rhs(slh: SLH, xi: WavePacket, state: FockHierarchyState, t: float, phi: float) -> dict:
    """Rate of ``E_{m,n}[Z_out]`` (mean homodyne current) for every stored level."""
    s, l = slh.s, slh.l
    x = complex(xi(t)) if xi is not None else 0j
    ph = np.exp(1j * phi)
    z = ph * l + np.conj(ph) * dag(l)
    out = {}
    for (m, n) in state.matrices:
        r = _e(state, m, n, z)
        if n > 0:
            r += ph * math.sqrt(n) * x * _e(state, m, n - 1, s)
        if m > 0:
            r += np.conj(ph) * math.sqrt(m) * np.conj(x) * _e(state, m - 1, n, dag(s))
        out[(m, n)] = r
    return out


@dataclass
class OutputAccumulator:
    """Integrated ``E_{m,n}[Lambda_out]`` and ``E_{m,n}[Z_out]`` per level."""

    flux: dict = field(default_factory=dict)
    quad: dict = field(default_factory=dict)
    phi: float = 0.0

    def value(self, table, key):
        if key in table:
            return table[key]
        m, n = key
        return np.conj(table[(n, m)])

    @classmethod
    def zeros(cls, n_max, phi=0.0):
        keys = [(m, n) for m in range(n_max + 1) for n in range(m + 1)]
        return cls({k: 0j for k in keys}, {k: 0j for k in keys}, phi)

    @classmethod
    def from_run(cls, run, y=None) -> "OutputAccumulator":
        """Read accumulators out of an engine-backed single-mode run."""
        eng = run.engine
        y = run.final_state if y is None else y
        quad = next((o for o in eng.observables if isinstance(o, Quadrature)), None)
        acc = cls(phi=quad.phi if quad else 0.0)
        for a, b in eng.pairs:
            acc.flux[(a[0], b[0])] = eng.accumulator(y, Flux(0), (a, b))
            if quad is not None:
                acc.quad[(a[0], b[0])] = eng.accumulator(y, quad, (a, b))
        return acc


def combine_outputs(acc: OutputAccumulator, combo: FieldCombination) -> tuple[float, float]:
    """``sum c_{m,n} E_{m,n}[.]`` for flux and quadrature; coefficients are not conjugated."""
    tot = []
    for table in (acc.flux, acc.quad):
        v = 0j
        for key, c in combo.coeffs.items():
            if not c:
                continue
            try:
                v += c * acc.value(table, key)
            except KeyError:
                if table:
                    raise ValueError(f"combination level {key} not tracked") from None
        if abs(v.imag) > IMAG_TOL * max(1.0, abs(v.real)):
            raise ValueError(f"combined output has imaginary part {v.imag:.3g}")
        tot.append(v.real)
    return tot[0], tot[1]
