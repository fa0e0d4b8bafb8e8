"""Single-mode Fock-state hierarchy for ``rho_{m,n}``, ``0 <= m, n <= N``."""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np

from .engine import Channel, Flux, HierarchyEngine, Quadrature
from .integrator import IntegratorConfig
from .operators import (EXCITED, SLH, MultiModeSLH, as_operator, check_density_matrix, commutator,
                        dag, lindblad_dissipator, operator_from_json, operator_to_json)
from .simulate import Run, decay_rate, resolve_config, run_engine
from .wavepackets import WavePacket

COMBO_TOL = 1e-10


def equation_count(n_max: int) -> int:
    return (n_max + 1) * (n_max + 2) // 2


def canonical_levels(n_max: int):
    """``(m, n)`` with ``m >= n``, ordered by ``m`` then ``n``."""
    return [(m, n) for m in range(n_max + 1) for n in range(m + 1)]


@dataclass
class FockHierarchyState:
    """Generalized density operators at one time.

    ``matrices`` holds the lower triangle ``m >= n``; other entries are the
    adjoints. A redundant state (every ``(m, n)`` stored) is accepted as is.
    """

    n_max: int
    matrices: dict
    time: float = 0.0

    def __getitem__(self, key) -> np.ndarray:
        m, n = key
        if not (0 <= m <= self.n_max and 0 <= n <= self.n_max):
            raise KeyError(f"level {key} outside 0..{self.n_max}")
        if key in self.matrices:
            return self.matrices[key]
        return dag(self.matrices[(n, m)])

    def get(self, m, n):
        """``rho_{m,n}``, zero for negative indices."""
        if m < 0 or n < 0:
            return np.zeros_like(self.matrices[(0, 0)])
        return self[(m, n)]

    @property
    def dim(self):
        return self.matrices[(0, 0)].shape[0]

    def to_json(self) -> dict:
        return {"time": self.time,
                "levels": [{"m": m, "n": n, "matrix": operator_to_json(x)}
                           for (m, n), x in sorted(self.matrices.items())]}

    def dumps(self) -> str:
        return json.dumps(self.to_json())

    @classmethod
    def from_json(cls, obj) -> "FockHierarchyState":
        if isinstance(obj, str):
            obj = json.loads(obj)
        mats = {(lv["m"], lv["n"]): operator_from_json(lv["matrix"]) for lv in obj["levels"]}
        n_max = max(max(k) for k in mats)
        return cls(n_max, mats, float(obj["time"]))


@dataclass
class FieldCombination:
    """Field density operator ``sum c_{m,n} |n><m|``.

    ``check`` validates Hermiticity, unit trace and positivity of the
    coefficient matrix; disable it for linear combinations such as zero.
    """

    coeffs: dict
    check: bool = True
    n_max: int = field(init=False)

    def __post_init__(self):
        self.coeffs = {tuple(k): complex(v) for k, v in self.coeffs.items()}
        idx = [i for k in self.coeffs for i in k]
        if any(i < 0 for i in idx):
            raise ValueError("photon numbers must be non-negative")
        self.n_max = max(idx, default=0)
        if self.check:
            c = self.matrix()
            if np.max(np.abs(c - dag(c)), initial=0) > COMBO_TOL:
                raise ValueError("combination is not Hermitian: c_{m,n} != conj(c_{n,m})")
            if abs(np.trace(c) - 1) > 1e-12:
                raise ValueError("combination diagonal does not sum to 1")
            if np.linalg.eigvalsh(0.5 * (c + dag(c))).min() < -COMBO_TOL:
                raise ValueError("combination matrix is not positive semidefinite")

    def matrix(self) -> np.ndarray:
        c = np.zeros((self.n_max + 1, self.n_max + 1), dtype=complex)
        for (m, n), v in self.coeffs.items():
            c[m, n] = v
        return c

    @classmethod
    def fock(cls, n: int) -> "FieldCombination":
        return cls({(n, n): 1.0})

    @classmethod
    def superposition(cls, amplitudes) -> "FieldCombination":
        """Pure state ``sum_n psi_n |n>`` given as ``{n: psi_n}`` or a sequence."""
        amps = dict(amplitudes) if isinstance(amplitudes, dict) else dict(enumerate(amplitudes))
        return cls({(m, n): np.conj(am) * an for m, am in amps.items() for n, an in amps.items()
                    if am and an})

    @classmethod
    def mixture(cls, probs) -> "FieldCombination":
        probs = dict(probs) if isinstance(probs, dict) else dict(enumerate(probs))
        return cls({(n, n): p for n, p in probs.items() if p})

    def pairs(self) -> dict:
        """Coefficients keyed by engine label pairs."""
        return {((m,), (n,)): c for (m, n), c in self.coeffs.items()}


# direct reference implementation -----------------------------------------------

def hierarchy_rhs(slh: SLH, xi: WavePacket, state: FockHierarchyState, t: float) -> FockHierarchyState:
    """Time derivative of every stored level, written term by term."""
    if state.dim != slh.dim:
        raise ValueError(f"state dim {state.dim} does not match system dim {slh.dim}")
    s, l, h = slh.s, slh.l, slh.h
    ld, sd = dag(l), dag(s)
    x = complex(xi(t)) if xi is not None else 0j
    out = {}
    for (m, n) in state.matrices:
        rho = state[(m, n)]
        d = -1j * commutator(h, rho) + lindblad_dissipator(l, rho)
        if m > 0:
            d += math.sqrt(m) * x * commutator(s @ state.get(m - 1, n), ld)
        if n > 0:
            d += math.sqrt(n) * np.conj(x) * commutator(l, state.get(m, n - 1) @ sd)
        if m > 0 and n > 0:
            r = state.get(m - 1, n - 1)
            d += math.sqrt(m * n) * abs(x) ** 2 * (s @ r @ sd - r)
        out[(m, n)] = d
    return FockHierarchyState(state.n_max, out, t)


def initial_state(rho_sys, n_max: int, redundant=False) -> FockHierarchyState:
    rho = check_density_matrix(rho_sys)
    if n_max < 0:
        raise ValueError("photon number must be non-negative")
    levels = [(m, n) for m in range(n_max + 1) for n in range(n_max + 1)] if redundant \
        else canonical_levels(n_max)
    mats = {(m, n): rho.copy() if m == n else np.zeros_like(rho) for (m, n) in levels}
    return FockHierarchyState(n_max, mats, 0.0)


def assemble_total(state: FockHierarchyState, combo: FieldCombination) -> np.ndarray:
    """``sum conj(c_{m,n}) rho_{m,n}``."""
    if combo.n_max > state.n_max:
        raise ValueError(f"combination needs N={combo.n_max}, hierarchy has N={state.n_max}")
    tot = np.zeros((state.dim, state.dim), dtype=complex)
    for (m, n), c in combo.coeffs.items():
        if c:
            tot += np.conj(c) * state[(m, n)]
    return tot


def excitation_probability(total, projector=EXCITED, clamp=True) -> float:
    total = as_operator(total)
    p = float(np.real(np.trace(total @ projector)))
    return min(1.0, max(0.0, p)) if clamp else p


# engine-backed simulation --------------------------------------------------------

def build_engine(slh: SLH, xi: WavePacket, n_max: int, observables=(), redundant=False) -> HierarchyEngine:
    mm = MultiModeSLH.from_single(slh) if isinstance(slh, SLH) else slh
    return HierarchyEngine(mm, [Channel(xi, 0)], [(n,) for n in range(n_max + 1)],
                           observables, redundant)


def state_from_vector(engine: HierarchyEngine, y, t=0.0) -> FockHierarchyState:
    n_max = max(a[0] for a in engine.labels)
    mats = {(a[0], b[0]): engine.unpack(y, (a, b)) for (a, b) in engine.pairs}
    return FockHierarchyState(n_max, mats, t)


def simulate(slh: SLH, xi: WavePacket, combos, rho_sys=None, cfg: IntegratorConfig | None = None,
             phi: float = 0.0, projector=EXCITED, outputs=True, redundant=False,
             n_max: int | None = None, **cfg_overrides) -> Run:
    """Evolve the hierarchy for one packet and sample each combination.

    ``combos`` is a ``FieldCombination``, a photon number, or a dict of
    named combinations. Columns: ``P_e``, ``flux1_rate``,
    ``flux1_integrated``, ``quad1_rate``, ``quad1_integrated``.
    """
    if isinstance(combos, (int, np.integer)):
        combos = {f"N={combos}": FieldCombination.fock(int(combos))}
    elif isinstance(combos, FieldCombination):
        combos = {"field": combos}
    n_max = max([c.n_max for c in combos.values()] + ([n_max] if n_max is not None else []))
    if rho_sys is None:
        rho_sys = np.diag([1.0] + [0.0] * (slh.dim - 1))
    rho_sys = check_density_matrix(rho_sys)
    obs = [Flux(0), Quadrature(0, phi)] if outputs else []
    eng = build_engine(slh, xi, n_max, obs, redundant)
    cfg = resolve_config(cfg, [xi], decay_rate(eng.slh), **cfg_overrides)
    return run_engine(eng, rho_sys, cfg, {k: c.pairs() for k, c in combos.items()},
                      projector, obs, decay_rate(eng.slh))
