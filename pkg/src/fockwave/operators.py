"""Dense operator algebra on a finite system Hilbert space.

Operators are plain ``numpy`` complex arrays of shape ``(d, d)``. Basis
convention for the two-level atom: index 0 is ``|g>``, index 1 is ``|e>``
and the lowering operator is ``|g><e|``.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

HERMITIAN_TOL = 1e-12
UNITARY_TOL = 1e-12


def as_operator(x, dim=None) -> np.ndarray:
    op = np.asarray(x, dtype=complex)
    if op.ndim != 2 or op.shape[0] != op.shape[1]:
        raise ValueError(f"operator must be square, got shape {op.shape}")
    if dim is not None and op.shape[0] != dim:
        raise ValueError(f"operator has dim {op.shape[0]}, expected {dim}")
    return op


def dag(a: np.ndarray) -> np.ndarray:
    return a.conj().T


def _check_dims(a, b):
    if a.shape != b.shape:
        raise ValueError(f"dimension mismatch: {a.shape} vs {b.shape}")


def commutator(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    _check_dims(a, b)
    return a @ b - b @ a


def lindblad_dissipator(l: np.ndarray, rho: np.ndarray) -> np.ndarray:
    """Return ``L rho L^dag - (L^dag L rho + rho L^dag L) / 2``."""
    _check_dims(l, rho)
    ld = dag(l)
    ldl = ld @ l
    return l @ rho @ ld - 0.5 * (ldl @ rho + rho @ ldl)


def expectation(rho: np.ndarray, x: np.ndarray) -> complex:
    """Hilbert-Schmidt pairing ``Tr[rho^dag x]``.

    The adjoint only matters for the non-Hermitian generalized density
    operators; for a physical state this is the usual ``Tr[rho x]``.
    """
    _check_dims(rho, x)
    return complex(np.vdot(rho, x))


def vacuum_generator(h: np.ndarray, l: np.ndarray, rho: np.ndarray) -> np.ndarray:
    return -1j * commutator(h, rho) + lindblad_dissipator(l, rho)


# two-level atom helpers --------------------------------------------------

def basis_projector(d: int, k: int) -> np.ndarray:
    p = np.zeros((d, d), dtype=complex)
    p[k, k] = 1.0
    return p


def sigma_minus() -> np.ndarray:
    return np.array([[0, 1], [0, 0]], dtype=complex)


def sigma_plus() -> np.ndarray:
    return dag(sigma_minus())


GROUND = basis_projector(2, 0)
EXCITED = basis_projector(2, 1)


# superoperators in row-major vectorization --------------------------------
# vec(A X B) = kron(A, B.T) vec(X) when vec flattens in C order.

def spre(a: np.ndarray) -> np.ndarray:
    return np.kron(a, np.eye(a.shape[0]))


def spost(b: np.ndarray) -> np.ndarray:
    return np.kron(np.eye(b.shape[0]), b.T)


def sprepost(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    return np.kron(a, b.T)


def lindblad_superop(l: np.ndarray) -> np.ndarray:
    ldl = dag(l) @ l
    return sprepost(l, dag(l)) - 0.5 * (spre(ldl) + spost(ldl))


def hamiltonian_superop(h: np.ndarray) -> np.ndarray:
    return -1j * (spre(h) - spost(h))


# SLH data ---------------------------------------------------------------

def _max_abs(x) -> float:
    return float(np.max(np.abs(x))) if np.size(x) else 0.0


@dataclass(frozen=True)
class SLH:
    """Scattering, coupling and Hamiltonian operators for one field mode."""

    s: np.ndarray
    l: np.ndarray
    h: np.ndarray

    def __post_init__(self):
        s = as_operator(self.s)
        d = s.shape[0]
        l = as_operator(self.l, d)
        h = as_operator(self.h, d)
        if _max_abs(h - dag(h)) > HERMITIAN_TOL:
            raise ValueError("H is not Hermitian")
        if _max_abs(dag(s) @ s - np.eye(d)) > UNITARY_TOL:
            raise ValueError("S is not unitary")
        for name, val in (("s", s), ("l", l), ("h", h)):
            val.setflags(write=False)
            object.__setattr__(self, name, val)

    @property
    def dim(self) -> int:
        return self.s.shape[0]

    def vacuum_rhs(self, rho):
        return vacuum_generator(self.h, self.l, rho)

    def to_json(self) -> dict:
        return {"s": operator_to_json(self.s), "l": operator_to_json(self.l),
                "h": operator_to_json(self.h)}

    @classmethod
    def from_json(cls, obj) -> "SLH":
        return cls(operator_from_json(obj["s"]), operator_from_json(obj["l"]),
                   operator_from_json(obj["h"]))


@dataclass(frozen=True)
class MultiModeSLH:
    """SLH data for several field modes.

    ``s[i][j]`` is the system operator scattering mode ``j`` into mode ``i``
    and ``l[i]`` couples the system to mode ``i``.
    """

    s: tuple
    l: tuple
    h: np.ndarray
    modes: int = field(init=False)

    def __post_init__(self):
        h = as_operator(self.h)
        d = h.shape[0]
        l = tuple(as_operator(x, d) for x in self.l)
        m = len(l)
        if len(self.s) != m or any(len(row) != m for row in self.s):
            raise ValueError("S must be an m x m array of operators")
        s = tuple(tuple(as_operator(x, d) for x in row) for row in self.s)
        if _max_abs(h - dag(h)) > HERMITIAN_TOL:
            raise ValueError("H is not Hermitian")
        eye = np.eye(d)
        for i in range(m):
            for j in range(m):
                rows = sum(s[i][k] @ dag(s[j][k]) for k in range(m))
                cols = sum(dag(s[k][i]) @ s[k][j] for k in range(m))
                target = eye if i == j else 0 * eye
                if _max_abs(rows - target) > UNITARY_TOL or _max_abs(cols - target) > UNITARY_TOL:
                    raise ValueError(f"scattering matrix violates unitarity at ({i}, {j})")
        object.__setattr__(self, "s", s)
        object.__setattr__(self, "l", l)
        object.__setattr__(self, "h", h)
        object.__setattr__(self, "modes", m)

    @property
    def dim(self) -> int:
        return self.h.shape[0]

    @classmethod
    def from_single(cls, slh: SLH) -> "MultiModeSLH":
        return cls(((slh.s,),), (slh.l,), slh.h)

    def to_json(self) -> dict:
        return {"s": [[operator_to_json(x) for x in row] for row in self.s],
                "l": [operator_to_json(x) for x in self.l],
                "h": operator_to_json(self.h)}

    @classmethod
    def from_json(cls, obj) -> "MultiModeSLH":
        return cls([[operator_from_json(x) for x in row] for row in obj["s"]],
                   [operator_from_json(x) for x in obj["l"]],
                   operator_from_json(obj["h"]))


def two_level_slh(gamma: float = 1.0) -> SLH:
    """Dipole-coupled two-level atom with no drive: ``H=0, L=sqrt(gamma)|g><e|, S=I``."""
    return SLH(np.eye(2), np.sqrt(gamma) * sigma_minus(), np.zeros((2, 2)))


def waveguide_atom_slh(gamma_forward: float = 0.5, gamma_backward: float = 0.5) -> MultiModeSLH:
    """Two-level atom side-coupled to forward and backward waveguide modes."""
    eye, zero = np.eye(2), np.zeros((2, 2))
    return MultiModeSLH(((eye, zero), (zero, eye)),
                        (np.sqrt(gamma_forward) * sigma_minus(),
                         np.sqrt(gamma_backward) * sigma_minus()),
                        zero)


# JSON ----------------------------------------------------------------------

def operator_to_json(op) -> dict:
    op = as_operator(op)
    return {"dim": op.shape[0],
            "entries": [[float(z.real), float(z.imag)] for z in op.ravel()]}


def operator_from_json(obj) -> np.ndarray:
    if isinstance(obj, str):
        obj = json.loads(obj)
    dim = int(obj["dim"])
    entries = obj["entries"]
    if len(entries) != dim * dim:
        raise ValueError(f"expected {dim * dim} entries, got {len(entries)}")
    flat = np.array([complex(re, im) for re, im in entries])
    return flat.reshape(dim, dim)


def check_density_matrix(rho, tol=1e-10) -> np.ndarray:
    rho = as_operator(rho)
    if _max_abs(rho - dag(rho)) > tol:
        raise ValueError("density matrix is not Hermitian")
    if abs(np.trace(rho) - 1) > tol:
        raise ValueError("density matrix does not have unit trace")
    if np.linalg.eigvalsh(0.5 * (rho + dag(rho))).min() < -tol:
        raise ValueError("density matrix is not positive semidefinite")
    return rho
