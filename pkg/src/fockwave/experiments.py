"""Two-level-atom studies: excitation sweeps, scaling fits, Rabi pulses, scattering."""

from __future__ import annotations

import logging
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np
from scipy import integrate as quadrature, optimize, stats

from .engine import Channel, HierarchyEngine
from .integrator import IntegrationError, IntegratorConfig, integrate
from .operators import GROUND, MultiModeSLH, two_level_slh
from .simulate import max_step_schedule, peak_quadratic
from .twomode import TwoModeCombination, scattering_preset, simulate_twomode
from .wavepackets import GaussianPacket, RectangularPacket, WavePacket, quadrature_grid

log = logging.getLogger(__name__)

SWEEP_SAMPLES = 801
RECURSION_MAX_BANDWIDTH = 0.05
OPT_GUESS_SLOPE = 1.46


class SweepError(RuntimeError):
    """Integrator failure tagged with the sweep coordinate."""

    def __init__(self, coord: dict, cause: Exception):
        super().__init__(f"integration failed at {coord}: {cause}")
        self.coord = coord
        self.cause = cause


# single excitation maximum ---------------------------------------------------------

def excitation_window(packet: WavePacket) -> tuple[float, float]:
    """Packet support only.

    With no drive the atom just decays once the packet has passed, so the
    maximum of ``P_e`` always lies inside the support.
    """
    return packet.support()


def fock_excitation_trace(n_photons: int, packet: WavePacket, gamma=1.0, cfg: IntegratorConfig | None = None,
                          sample_points=SWEEP_SAMPLES):
    """``(times, P_e)`` for an ``n_photons`` Fock state driving a ground-state atom."""
    slh = MultiModeSLH.from_single(two_level_slh(gamma))
    eng = HierarchyEngine(slh, [Channel(packet)], [(n,) for n in range(n_photons + 1)])
    top = ((n_photons,), (n_photons,))
    idx = 2 * (eng.pair_slot[top] * eng.block + 3)  # real part of rho[e, e]
    if cfg is None:
        cfg = IntegratorConfig(window=excitation_window(packet), sample_points=sample_points)
    rec = integrate(eng.rhs, eng.initial_vector(GROUND), cfg,
                    observers=[lambda t, y: {"P_e": y[idx]}],
                    max_step=max_step_schedule([packet], gamma), breakpoints=eng.breakpoints())
    return rec.times, rec["P_e"]


def excitation_max(n_photons: int, omega: float, gamma=1.0, t_a=0.0, cfg=None,
                   sample_points=SWEEP_SAMPLES) -> tuple[float, float]:
    """``(P_e^max, t_max)`` for a Gaussian Fock-state pulse of bandwidth ``omega``."""
    times, pe = fock_excitation_trace(n_photons, GaussianPacket(omega, t_a), gamma, cfg, sample_points)
    t_max, p_max = peak_quadratic(times, pe)
    return p_max, t_max


def analytic_excitation(packet: WavePacket, times, gamma=1.0) -> np.ndarray:
    """Single-photon ``P_e(t) = gamma |int_{t0}^t xi(s) exp(-gamma (t - s)/2) ds|^2`` by adaptive quadrature.

    ``t0`` is the start of the packet support; the atom starts in the ground state.
    """
    t0, t1 = packet.support()
    out = []
    for t in np.atleast_1d(times):
        hi = min(t, t1)
        if hi <= t0:
            out.append(0.0)
            continue
        pts = [b for b in packet.breakpoints() if t0 < b < hi][:50]
        re = quadrature.quad(lambda s: (packet(s) * math.exp(-gamma * (t - s) / 2)).real, t0, hi,
                            points=pts or None, epsabs=1e-13, epsrel=1e-11, limit=400)[0]
        im = quadrature.quad(lambda s: (packet(s) * math.exp(-gamma * (t - s) / 2)).imag, t0, hi,
                            points=pts or None, epsabs=1e-13, epsrel=1e-11, limit=400)[0]
        out.append(gamma * (re * re + im * im))
    return np.array(out)


def recursive_estimate(n_photons: int, packet: WavePacket, gamma=1.0) -> float:
    """Small-bandwidth recursion ``P_N = N P_1 (1 - 2 P_{N-1})`` with ``P_1 = 4 max|xi|^2 / gamma``."""
    if hasattr(packet, "peak"):
        peak = packet.peak()
    else:
        x, _ = quadrature_grid([packet])
        peak = float(np.max(np.abs(packet(x))))
    p1 = 4 * peak ** 2 / gamma
    p = 0.0
    for n in range(1, n_photons + 1):
        p = n * p1 * (1 - 2 * p)
    return p


def _sweep_point(args):
    omega, n, gamma = args
    try:
        p, t = excitation_max(n, omega, gamma)
    except IntegrationError as exc:
        raise SweepError({"omega": omega, "N": n}, exc) from exc
    row = {"omega": omega, "N": n, "P_max": p, "t_max": t}
    if omega <= RECURSION_MAX_BANDWIDTH:
        row["P_recursive"] = recursive_estimate(n, GaussianPacket(omega), gamma)
    return row


def _map(fn, items, workers):
    if workers and workers > 1:
        with ProcessPoolExecutor(workers) as pool:
            return list(pool.map(fn, items))
    return [fn(x) for x in items]


def run_excite_sweep(bandwidths, photons, gamma=1.0, workers=1) -> list[dict]:
    """``P_e^max`` on the grid ``bandwidths x photons``, sorted by ``(N, omega)``."""
    grid = [(float(o), int(n), gamma) for n in photons for o in bandwidths]
    for o, n, _ in grid:
        if not (o > 0 and n >= 1):
            raise ValueError("bandwidths must be positive and photon numbers >= 1")
    rows = _map(_sweep_point, grid, workers)
    return sorted(rows, key=lambda r: (r["N"], r["omega"]))


# per-N bandwidth optimization -------------------------------------------------------

def optimal_bandwidth(n_photons: int, gamma=1.0, grid_factors=(0.6, 0.8, 1.0, 1.25, 1.6),
                      xtol=1e-5) -> dict:
    """Bandwidth maximizing ``P_e^max``: log grid around ``1.46 N``, then bounded Brent refinement."""
    guess = OPT_GUESS_SLOPE * n_photons
    cache = {}

    def neg(log_omega):
        if log_omega not in cache:
            cache[log_omega] = -excitation_max(n_photons, math.exp(log_omega), gamma)[0]
        return cache[log_omega]

    logs = [math.log(guess * f) for f in grid_factors]
    vals = [neg(x) for x in logs]
    i = int(np.argmin(vals))
    while i in (0, len(logs) - 1):
        # expand the bracket towards the better edge
        step = logs[1] - logs[0] if i == 0 else logs[-1] - logs[-2]
        new = logs[0] - step if i == 0 else logs[-1] + step
        if i == 0:
            logs.insert(0, new)
            vals.insert(0, neg(new))
        else:
            logs.append(new)
            vals.append(neg(new))
        i = int(np.argmin(vals))
    res = optimize.minimize_scalar(neg, bounds=(logs[i - 1], logs[i + 1]), method="bounded",
                                   options={"xatol": xtol})
    return {"N": n_photons, "omega_opt": math.exp(res.x), "P_max": float(-res.fun),
            "evaluations": len(cache), "converged": bool(res.success)}


def _opt_point(args):
    n, gamma = args
    return optimal_bandwidth(n, gamma)


def run_optimum_sweep(photons, gamma=1.0, workers=1) -> list[dict]:
    rows = _map(_opt_point, [(int(n), gamma) for n in photons], workers)
    return sorted(rows, key=lambda r: r["N"])


# fits -------------------------------------------------------------------------------

@dataclass
class FitResult:
    model: str
    params: dict
    ci95: dict
    r2: float
    converged: bool = True
    message: str = ""

    def to_json(self):
        return {"model": self.model, "params": self.params,
                "ci95": {k: list(v) for k, v in self.ci95.items()}, "r2": self.r2,
                "converged": self.converged, "message": self.message}


def _fit(model_id, fn, x, y, p0) -> FitResult:
    x, y = np.asarray(x, float), np.asarray(y, float)
    try:
        popt, pcov = optimize.curve_fit(fn, x, y, p0=p0, maxfev=20000)
    except (RuntimeError, ValueError) as exc:
        return FitResult(model_id, {}, {}, 0.0, False, str(exc))
    resid = y - fn(x, *popt)
    ss_tot = float(np.sum((y - y.mean()) ** 2))
    r2 = 1.0 - float(np.sum(resid ** 2)) / ss_tot if ss_tot > 0 else 1.0
    dof = max(1, x.size - len(popt))
    tq = stats.t.ppf(0.975, dof)
    err = np.sqrt(np.clip(np.diag(pcov), 0, None)) if np.all(np.isfinite(pcov)) else np.full(len(popt), np.nan)
    names = ("a", "b")
    return FitResult(model_id, {k: float(v) for k, v in zip(names, popt)},
                     {k: (float(v - tq * e), float(v + tq * e)) for k, v, e in zip(names, popt, err)},
                     min(1.0, max(0.0, r2)))


def saturation_model(n, a, b):
    return 1.0 - a * n ** (-b)


def power_model(n, a, b):
    return a * n ** b


def fit_scaling(table) -> tuple[FitResult, FitResult]:
    """Fit ``P_max = 1 - a N^-b`` and ``omega_opt = a N^b`` to per-N optima."""
    n = [r["N"] for r in table]
    return (_fit("P_max = 1 - a N^-b", saturation_model, n, [r["P_max"] for r in table], (0.27, 1.0)),
            _fit("omega_opt = a N^b", power_model, n, [r["omega_opt"] for r in table], (1.45, 1.0)))


# strong coupling ---------------------------------------------------------------------

def strong_coupling_map(packet: WavePacket, n_photons: int, t_centers, tau=None, gamma=1.0,
                        gamma_guided=1.0) -> np.ndarray:
    """Windowed coupling ``sqrt(N gamma_g) / (gamma tau) * int_{t_s - tau/2}^{t_s + tau/2} |xi| dt``."""
    tau = 1.0 / gamma if tau is None else tau
    if not tau > 0:
        raise ValueError("window length must be positive")
    pref = math.sqrt(n_photons * gamma_guided) / (gamma * tau)
    out = []
    for ts in np.atleast_1d(t_centers):
        x, w = quadrature_grid([packet], (ts - tau / 2, ts + tau / 2))
        out.append(pref * float(np.sum(w * np.abs(packet(x)))))
    return np.array(out)


# Rabi oscillations ------------------------------------------------------------------

@dataclass
class RabiResult:
    times: np.ndarray
    p_e: np.ndarray
    predicted: float
    frequency: float | None
    method: str
    extrema: int
    amplitude: float | None = None
    details: dict = field(default_factory=dict)

    @property
    def full_oscillation(self) -> bool:
        """A complete cycle inside the pulse needs a maximum and a later minimum."""
        return self.extrema >= 2


def _interior_extrema(y):
    d = np.diff(y)
    return int(np.sum(np.sign(d[1:]) * np.sign(d[:-1]) < 0))


def run_rabi_rect(n_photons: int, t_max: float, gamma=1.0, gamma_guided=None, samples=2001) -> RabiResult:
    """Drive a ground-state atom with an ``N``-photon rectangular pulse.

    The frequency comes from peak-to-peak timing when ``P_e`` has at least
    two extrema inside the pulse. Otherwise ``A (1 - cos w t)/2`` is fitted
    over the pulse, which also works when the pulse is shorter than one
    period.
    """
    gamma_guided = gamma if gamma_guided is None else gamma_guided
    pkt = RectangularPacket(t_max)
    cfg = IntegratorConfig(window=(0.0, t_max), sample_points=samples)
    times, pe = fock_excitation_trace(n_photons, pkt, gamma, cfg)
    predicted = 2 * pkt.peak() * math.sqrt(gamma_guided * n_photons)
    n_ext = _interior_extrema(pe)
    if n_ext >= 2:
        d = np.diff(pe)
        idx = np.nonzero(np.sign(d[1:]) * np.sign(d[:-1]) < 0)[0] + 1
        peaks = [peak_quadratic(times[i - 1:i + 2], pe[i - 1:i + 2] * (1 if d[i - 1] > 0 else -1))[0]
                 for i in idx]
        half_periods = np.diff(peaks)
        freq = math.pi / float(np.mean(half_periods))
        return RabiResult(times, pe, predicted, freq, "peak_timing", n_ext)

    def model(t, amp, w):
        return amp * (1 - np.cos(w * t)) / 2

    try:
        (amp, w), _ = optimize.curve_fit(model, times, pe, p0=(1.0, predicted), maxfev=20000)
    except RuntimeError as exc:
        log.warning("Rabi fit failed: %s", exc)
        return RabiResult(times, pe, predicted, None, "unreported", n_ext)
    return RabiResult(times, pe, predicted, abs(float(w)), "cosine_fit", n_ext, float(amp))


# scattering ---------------------------------------------------------------------------

def scatter_point(omega: float, n_photons: int, gamma_forward=0.5, gamma_backward=0.5) -> dict:
    slh2 = scattering_preset(gamma_forward, gamma_backward)
    run = simulate_twomode(slh2, GaussianPacket(omega), None, TwoModeCombination.fock(n_photons, 0))
    t = run["flux1_integrated"][-1] / n_photons
    r = run["flux2_integrated"][-1] / n_photons
    return {"omega": omega, "N": n_photons, "transmission": float(t), "reflection": float(r),
            "total": float(t + r)}


def _scatter_args(args):
    omega, n = args
    try:
        return scatter_point(omega, n)
    except IntegrationError as exc:
        raise SweepError({"omega": omega, "N": n}, exc) from exc


def run_scatter_sweep(bandwidths, photons, workers=1) -> list[dict]:
    """Long-time transmitted and reflected fractions for the side-coupled atom."""
    grid = [(float(o), int(n)) for n in photons for o in bandwidths]
    rows = _map(_scatter_args, grid, workers)
    return sorted(rows, key=lambda r: (r["N"], r["omega"]))
