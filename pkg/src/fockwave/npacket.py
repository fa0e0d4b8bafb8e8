"""General N-photon states in the occupation-number representation.

The state is ``sum_a lambda_a |a>`` where ``a`` is an occupation vector over
an orthonormal packet basis and ``|a>`` the normalized product of Fock
states. Each basis packet is one hierarchy channel in the same field mode.
"""

from __future__ import annotations

import json
import logging
import math
from collections import Counter
from dataclasses import dataclass
from itertools import permutations
from pathlib import Path

import numpy as np

from .engine import Channel, Flux, HierarchyEngine, Quadrature, downward_closure, lower
from .integrator import IntegratorConfig
from .operators import EXCITED, SLH, MultiModeSLH, check_density_matrix, commutator, dag, lindblad_dissipator
from .simulate import Run, decay_rate, resolve_config, run_engine
from .wavepackets import BasisSet, packet_from_config

log = logging.getLogger(__name__)

NORM_TOL = 1e-10
PRUNE_TOL = 1e-14


def occupation(indices, n_basis: int) -> tuple:
    c = Counter(indices)
    return tuple(c.get(k, 0) for k in range(n_basis))


def indices_of(label) -> tuple:
    return tuple(k for k, n in enumerate(label) for _ in range(n))


@dataclass
class NPhotonSpec:
    """Basis packets plus amplitudes keyed by sorted index tuples ``(i1 <= ... <= iN)``."""

    basis: BasisSet
    amplitudes: dict

    def __post_init__(self):
        self.basis = BasisSet(self.basis)
        if not self.basis.is_orthonormal():
            raise ValueError("basis packets are not orthonormal")
        amps = {}
        for idx, v in self.amplitudes.items():
            idx = tuple(sorted(idx))
            if any(not 0 <= i < len(self.basis) for i in idx):
                raise ValueError(f"index in {idx} outside basis of size {len(self.basis)}")
            amps[idx] = amps.get(idx, 0j) + complex(v)
        lengths = {len(k) for k in amps}
        if len(lengths) > 1:
            raise ValueError("all amplitude index tuples must have the same length")
        norm = sum(abs(v) ** 2 for v in amps.values())
        if abs(norm - 1) > NORM_TOL:
            raise ValueError(f"amplitudes have squared norm {norm:.12g}, expected 1")
        self.amplitudes = amps

    @property
    def n_photons(self) -> int:
        return len(next(iter(self.amplitudes)))

    @property
    def n_basis(self) -> int:
        return len(self.basis)

    def label_amplitudes(self, prune=PRUNE_TOL) -> dict:
        """``{occupation vector: lambda}`` without negligible amplitudes."""
        return {occupation(k, self.n_basis): v for k, v in self.amplitudes.items() if abs(v) >= prune}

    def combination(self) -> dict:
        """Engine pair coefficients ``c_ab = conj(lambda_a) lambda_b``."""
        lam = self.label_amplitudes()
        return {(a, b): np.conj(la) * lb for a, la in lam.items() for b, lb in lam.items()}

    @classmethod
    def fock(cls, packet, n: int) -> "NPhotonSpec":
        return cls(BasisSet([packet]), {(0,) * n: 1.0})

    @classmethod
    def from_json(cls, obj, base_dir=".") -> "NPhotonSpec":
        if isinstance(obj, (str, Path)) and Path(obj).exists():
            base_dir = Path(obj).parent
            obj = json.loads(Path(obj).read_text())
        elif isinstance(obj, str):
            obj = json.loads(obj)
        basis = BasisSet(packet_from_config(p, base_dir) for p in obj["basis"])
        raw = {tuple(a["indices"]): complex(a.get("re", 0.0), a.get("im", 0.0))
               for a in obj["amplitudes"]}
        if obj.get("symmetrize", False):
            return symmetrize(raw, basis, renormalize=obj.get("renormalize", True))
        return cls(basis, raw)

    def to_json(self) -> dict:
        return {"basis": [p.to_json() for p in self.basis],
                "amplitudes": [{"indices": list(k), "re": v.real, "im": v.imag}
                               for k, v in sorted(self.amplitudes.items())]}


def symmetrize(raw: dict, basis, renormalize=False) -> NPhotonSpec:
    """Map expansion coefficients ``lambda'`` of ``sum lambda' B^dag_{i1}...B^dag_{iN}|0>``
    to occupation-basis amplitudes.

    Each sorted multiset receives ``sqrt(prod n_k!)`` times the sum of
    ``lambda'`` over its distinct index rearrangements.
    """
    basis = BasisSet(basis)
    lengths = {len(k) for k in raw}
    if len(lengths) != 1:
        raise ValueError("inconsistent index tuple lengths")
    amps: dict = {}
    for idx in {tuple(sorted(k)) for k in raw}:
        total = sum(raw.get(p, 0) for p in set(permutations(idx)))
        weight = math.sqrt(math.prod(math.factorial(n) for n in Counter(idx).values()))
        amps[idx] = weight * total
    if renormalize:
        norm = math.sqrt(sum(abs(v) ** 2 for v in amps.values()))
        if norm == 0:
            raise ValueError("all amplitudes vanish")
        amps = {k: v / norm for k, v in amps.items()}
    return NPhotonSpec(basis, amps)


def reachable_label_set(spec: NPhotonSpec) -> list:
    return downward_closure(spec.label_amplitudes().keys())


def reachable_labels(spec: NPhotonSpec) -> set:
    """Canonical ``(bra, ket)`` pairs, ``bra >= ket`` lexicographically."""
    labels = reachable_label_set(spec)
    return {(a, b) for a in labels for b in labels if a >= b}


def _get(states, a, b):
    if a is None or b is None:
        return None
    if (a, b) in states:
        return states[(a, b)]
    if (b, a) in states:
        return dag(states[(b, a)])
    raise KeyError(f"missing reachable label pair {(a, b)}")


def npacket_hierarchy_rhs(slh: SLH, spec: NPhotonSpec, states: dict, t: float) -> dict:
    """Derivative of every ``rho_{a,b}`` in ``states``, written term by term."""
    s, l, h = slh.s, slh.l, slh.h
    ld, sd = dag(l), dag(s)
    xi = np.array([complex(p(t)) for p in spec.basis])
    kk = range(spec.n_basis)
    out = {}
    for (a, b), rho in states.items():
        d = -1j * commutator(h, rho) + lindblad_dissipator(l, rho)
        for k in kk:
            r = _get(states, lower(a, k), b)
            if r is not None:
                d += math.sqrt(a[k]) * xi[k] * commutator(s @ r, ld)
            r = _get(states, a, lower(b, k))
            if r is not None:
                d += math.sqrt(b[k]) * np.conj(xi[k]) * commutator(l, r @ sd)
        for k in kk:
            for k2 in kk:
                r = _get(states, lower(a, k), lower(b, k2))
                if r is not None:
                    d += math.sqrt(a[k] * b[k2]) * xi[k] * np.conj(xi[k2]) * (s @ r @ sd - r)
        out[(a, b)] = d
    return out


def initial_states(spec: NPhotonSpec, rho_sys) -> dict:
    rho = check_density_matrix(rho_sys)
    return {(a, b): rho.copy() if a == b else np.zeros_like(rho) for a, b in reachable_labels(spec)}


def assemble_total(states: dict, spec: NPhotonSpec) -> np.ndarray:
    """``sum lambda_a conj(lambda_b) rho_{a,b}``."""
    lam = spec.label_amplitudes()
    tot = None
    for a, la in lam.items():
        for b, lb in lam.items():
            term = la * np.conj(lb) * _get(states, a, b)
            tot = term if tot is None else tot + term
    return tot


def build_engine(slh, spec: NPhotonSpec, observables=(), redundant=False) -> HierarchyEngine:
    mm = MultiModeSLH.from_single(slh) if isinstance(slh, SLH) else slh
    chans = [Channel(p, 0) for p in spec.basis]
    return HierarchyEngine(mm, chans, reachable_label_set(spec), observables, redundant)


def simulate_npacket(slh, spec: NPhotonSpec, rho_sys=None, cfg: IntegratorConfig | None = None,
                     phi=0.0, projector=EXCITED, outputs=True, redundant=False,
                     extra_combos=None, **cfg_overrides) -> Run:
    """Evolve the N-photon hierarchy for ``spec``.

    Flux and quadrature columns follow the single-mode output equations
    channel by channel; they are marked as extrapolated on the run.
    """
    if rho_sys is None:
        rho_sys = np.diag([1.0] + [0.0] * (slh.dim - 1))
    rho_sys = check_density_matrix(rho_sys)
    obs = [Flux(0), Quadrature(0, phi)] if outputs else []
    eng = build_engine(slh, spec, obs, redundant)
    gamma = decay_rate(eng.slh)
    cfg = resolve_config(cfg, list(spec.basis), gamma, **cfg_overrides)
    combos = {"field": spec.combination(), **(extra_combos or {})}
    run = run_engine(eng, rho_sys, cfg, combos, projector, obs, gamma)
    run.extrapolated_outputs = bool(outputs)
    if outputs:
        log.info("npacket flux/quadrature use extrapolated output equations")
    return run
