"""Square-normalized temporal envelopes for continuous-mode photons."""

from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path

import numpy as np

# |xi|^2 mass beyond 8 widths of a Gaussian is ~1e-15.
GAUSSIAN_HALF_WIDTH = 8.0
_POINTS_PER_WIDTH = 48
_GAUSS_NODES = 8


class WavePacket:
    """Base class. Subclasses implement ``envelope`` and ``support``."""

    detuning: float = 0.0

    def envelope(self, t):
        raise NotImplementedError

    def support(self) -> tuple[float, float]:
        raise NotImplementedError

    def scale(self) -> float:
        """Shortest time scale over which the envelope changes."""
        raise NotImplementedError

    def breakpoints(self):
        return list(self.support())

    def __call__(self, t):
        t = np.asarray(t, dtype=float)
        val = self.envelope(t)
        if self.detuning:
            val = val * np.exp(-1j * self.detuning * t)
        return val if val.ndim else complex(val)

    def norm_check(self) -> float:
        """Return the integral of ``|xi(t)|^2`` over the packet support."""
        return float(overlap(self, self).real)

    def to_json(self) -> dict:
        raise NotImplementedError


@dataclass(frozen=True)
class GaussianPacket(WavePacket):
    """``(omega^2 / 2pi)^(1/4) exp(-omega^2 (t - t_a)^2 / 4)``.

    ``omega`` is the bandwidth; the variance of ``|xi|^2`` is ``1/omega^2``.
    """

    omega: float
    t_a: float = 0.0
    detuning: float = 0.0

    def __post_init__(self):
        if not self.omega > 0:
            raise ValueError("bandwidth must be positive")

    def envelope(self, t):
        amp = (self.omega ** 2 / (2 * np.pi)) ** 0.25
        return amp * np.exp(-self.omega ** 2 * (t - self.t_a) ** 2 / 4) + 0j

    def support(self):
        w = GAUSSIAN_HALF_WIDTH / self.omega
        return (self.t_a - w, self.t_a + w)

    def scale(self):
        return 1.0 / self.omega

    def peak(self) -> float:
        return (self.omega ** 2 / (2 * np.pi)) ** 0.25

    def to_json(self):
        return {"kind": "gaussian", "omega": self.omega, "t_a": self.t_a,
                "detuning": self.detuning}


@dataclass(frozen=True)
class RectangularPacket(WavePacket):
    """Flat envelope ``1/sqrt(t_max)`` on ``[t0, t0 + t_max)``."""

    t_max: float
    t0: float = 0.0
    detuning: float = 0.0

    def __post_init__(self):
        if not self.t_max > 0:
            raise ValueError("duration must be positive")

    def envelope(self, t):
        inside = (t >= self.t0) & (t < self.t0 + self.t_max)
        return np.where(inside, 1.0 / np.sqrt(self.t_max), 0.0) + 0j

    def support(self):
        return (self.t0, self.t0 + self.t_max)

    def scale(self):
        return self.t_max

    def peak(self) -> float:
        return 1.0 / np.sqrt(self.t_max)

    def to_json(self):
        return {"kind": "rectangular", "t0": self.t0, "t_max": self.t_max,
                "detuning": self.detuning}


@dataclass(frozen=True, eq=False)
class SampledPacket(WavePacket):
    """Envelope given on a uniform grid, linearly interpolated, zero outside."""

    values: np.ndarray
    dt: float
    t0: float = 0.0
    detuning: float = 0.0

    def __post_init__(self):
        vals = np.asarray(self.values, dtype=complex).copy()
        if vals.ndim != 1 or vals.size < 2:
            raise ValueError("need at least two samples")
        if not self.dt > 0:
            raise ValueError("grid spacing must be positive")
        vals.setflags(write=False)
        object.__setattr__(self, "values", vals)

    @property
    def times(self):
        return self.t0 + self.dt * np.arange(self.values.size)

    def envelope(self, t):
        t = np.asarray(t, dtype=float)
        grid = self.times
        re = np.interp(t, grid, self.values.real, left=0.0, right=0.0)
        im = np.interp(t, grid, self.values.imag, left=0.0, right=0.0)
        return re + 1j * im

    def support(self):
        return (self.t0, self.t0 + self.dt * (self.values.size - 1))

    def scale(self):
        """Envelope time scale ``1 / (2 sqrt(int |xi'|^2 dt))``, never below the grid step.

        For a Gaussian this equals ``1/omega``.
        """
        grad = np.diff(self.values) / self.dt
        rough = float(np.sum(np.abs(grad) ** 2) * self.dt)
        if rough == 0:
            return self.dt * (self.values.size - 1)
        norm = float(np.sum(np.abs(self.values) ** 2) * self.dt)
        return max(self.dt, 0.5 * np.sqrt(norm / rough))

    def breakpoints(self):
        return list(self.times)

    def peak(self) -> float:
        return float(np.abs(self.values).max())

    def to_json(self):
        return {"kind": "sampled", "t0": self.t0, "dt": self.dt,
                "re": self.values.real.tolist(), "im": self.values.imag.tolist(),
                "detuning": self.detuning}

    @classmethod
    def from_function(cls, fn, t_start, t_end, n, detuning=0.0, normalize=True):
        t = np.linspace(t_start, t_end, n)
        vals = np.asarray(fn(t), dtype=complex)
        pkt = cls(vals, t[1] - t[0], t_start, detuning)
        if normalize:
            pkt = cls(vals / np.sqrt(pkt.norm_check()), t[1] - t[0], t_start, detuning)
        return pkt


def load_csv(path, detuning=0.0) -> SampledPacket:
    """Read a ``time, re[, im]`` CSV. Lines starting with ``#`` are skipped."""
    rows = []
    with open(Path(path), newline="") as fh:
        for row in csv.reader(fh):
            if not row or row[0].lstrip().startswith("#"):
                continue
            try:
                rows.append([float(x) for x in row])
            except ValueError:
                continue  # header line
    data = np.array(rows)
    if data.ndim != 2 or data.shape[1] not in (2, 3):
        raise ValueError(f"{path}: expected 2 or 3 numeric columns")
    t = data[:, 0]
    steps = np.diff(t)
    if np.any(steps <= 0) or np.ptp(steps) > 1e-9 * max(1.0, abs(steps[0])):
        raise ValueError(f"{path}: time grid must be uniform and increasing")
    vals = data[:, 1] + (1j * data[:, 2] if data.shape[1] == 3 else 0)
    return SampledPacket(vals, float(steps.mean()), float(t[0]), detuning)


def packet_from_config(cfg: dict, base_dir=".") -> WavePacket:
    kind = cfg.get("kind", "gaussian")
    det = float(cfg.get("detuning", 0.0))
    if kind == "gaussian":
        return GaussianPacket(float(cfg["omega"]), float(cfg.get("t_a", 0.0)), det)
    if kind == "rectangular":
        return RectangularPacket(float(cfg["t_max"]), float(cfg.get("t0", 0.0)), det)
    if kind == "sampled":
        if "file" in cfg:
            return load_csv(Path(base_dir) / cfg["file"], det)
        vals = np.asarray(cfg["re"], dtype=float) + 1j * np.asarray(cfg.get("im", 0.0))
        return SampledPacket(vals, float(cfg["dt"]), float(cfg.get("t0", 0.0)), det)
    raise ValueError(f"unknown packet kind {kind!r}")


# quadrature ------------------------------------------------------------------

def quadrature_grid(packets, t_range=None):
    """Composite Gauss-Legendre nodes and weights resolving every packet.

    Packet breakpoints become panel edges, and the open rule never samples
    an edge, so jumps (rectangular edges, interpolation knots) do not spoil
    the rule.
    """
    packets = list(packets)
    edges = sorted({float(b) for p in packets for b in p.breakpoints()})
    if t_range is not None:
        lo, hi = t_range
        edges = sorted({lo, hi, *[e for e in edges if lo < e < hi]})
    width = _GAUSS_NODES * min(p.scale() for p in packets) / _POINTS_PER_WIDTH
    ref_x, ref_w = np.polynomial.legendre.leggauss(_GAUSS_NODES)
    nodes, weights = [], []
    for a, b in zip(edges[:-1], edges[1:]):
        if b <= a:
            continue
        k = max(1, int(np.ceil((b - a) / width)))
        cuts = np.linspace(a, b, k + 1)
        mid, half = 0.5 * (cuts[1:] + cuts[:-1]), 0.5 * np.diff(cuts)
        nodes.append((mid[:, None] + half[:, None] * ref_x).ravel())
        weights.append((half[:, None] * ref_w).ravel())
    return np.concatenate(nodes), np.concatenate(weights)


def overlap(a: WavePacket, b: WavePacket) -> complex:
    """``integral conj(a(t)) b(t) dt``."""
    x, w = quadrature_grid([a, b])
    return complex(np.sum(w * np.conj(a(x)) * b(x)))


class BasisSet(tuple):
    """Ordered collection of packets expected to be orthonormal."""

    def __new__(cls, packets):
        packets = tuple(packets)
        if not packets:
            raise ValueError("basis must contain at least one packet")
        return super().__new__(cls, packets)

    def gram_matrix(self) -> np.ndarray:
        return gram_matrix(self)

    def is_orthonormal(self, tol=1e-8) -> bool:
        g = self.gram_matrix()
        return bool(np.max(np.abs(g - np.eye(len(self)))) <= tol)


def gram_matrix(basis) -> np.ndarray:
    """Overlap matrix ``G[i, j] = integral conj(xi_i) xi_j dt``."""
    basis = list(basis)
    if not basis:
        raise ValueError("empty basis")
    x, w = quadrature_grid(basis)
    vals = np.array([p(x) for p in basis])
    return (vals.conj() * w) @ vals.T
