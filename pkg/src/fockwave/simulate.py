"""Driving a hierarchy engine through the integrator with standard observers."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .engine import Flux, HierarchyEngine, Quadrature
from .integrator import IntegratorConfig, TimeSeriesRecord, integrate
from .operators import dag

STEP_FRACTION = 0.05
TAIL_DECAY_TIMES = 12.0


def decay_rate(slh) -> float:
    """Largest eigenvalue of ``sum_i L_i^dag L_i``; 1 for the bare atom."""
    tot = sum(dag(l) @ l for l in slh.l)
    return float(np.linalg.eigvalsh(tot).max())


def default_window(packets, gamma: float) -> tuple[float, float]:
    """Packet support, with the end pushed to at least 12 decay times past the
    centre of the last packet."""
    lo = min(p.support()[0] for p in packets)
    hi = max(p.support()[1] for p in packets)
    last = max(packets, key=lambda p: p.support()[1]).support()
    tail = TAIL_DECAY_TIMES / gamma if gamma > 0 else 0.0
    return lo, max(hi, 0.5 * (last[0] + last[1]) + tail)


def max_step_schedule(packets, gamma: float):
    """Step cap ``0.05 min(1/gamma, packet scale)`` inside any packet support.

    Outside every support only the decay scale matters.
    """
    decay = 1.0 / gamma if gamma > 0 else math.inf
    spans = [(p.support(), min(decay, p.scale())) for p in packets]
    outside = STEP_FRACTION * decay

    def cap(t):
        c = outside
        for (lo, hi), sc in spans:
            if lo <= t < hi:
                c = min(c, STEP_FRACTION * sc)
        return c

    return cap


def resolve_config(cfg: IntegratorConfig | None, packets, gamma, **overrides) -> IntegratorConfig:
    if cfg is None:
        win = overrides.pop("window", None) or default_window(packets, gamma)
        return IntegratorConfig(window=win, **overrides)
    return cfg.replace(**overrides) if overrides else cfg


@dataclass
class Run:
    """Finished simulation: sampled record plus the engine that produced it."""

    engine: HierarchyEngine
    record: TimeSeriesRecord
    combos: dict

    @property
    def times(self):
        return self.record.times

    def __getitem__(self, key):
        return self.record[key]

    @property
    def final_state(self):
        return self.record.final_state


def run_engine(engine: HierarchyEngine, rho_sys, cfg: IntegratorConfig, combos: dict,
               projector=None, observables=(), gamma=1.0, extra_observers=()) -> Run:
    """Integrate ``engine`` and sample per-combination observables.

    Columns are ``P_e``, and for each observable ``<name>_rate`` and
    ``<name>_integrated``; with more than one combination every column is
    suffixed with ``[combo name]``.
    """
    packets = [c.packet for c in engine.channels]
    cap = max_step_schedule(packets, gamma) if packets else None
    multi = len(combos) > 1

    def col(base, name):
        return f"{base}[{name}]" if multi else base

    def observe(t, y):
        out = {}
        dy = engine.rhs(t, y) if observables else None
        for name, combo in combos.items():
            if projector is not None:
                tot = engine.total_state(y, combo)
                out[col("P_e", name)] = float(np.real(np.trace(tot @ projector)))
            for obs in observables:
                rate = engine.total_expectation(dy, obs, combo)
                acc = engine.total_expectation(y, obs, combo)
                out[col(f"{obs.name}_rate", name)] = rate.real
                out[col(f"{obs.name}_integrated", name)] = acc.real
        return out

    rec = integrate(engine.rhs, engine.initial_vector(rho_sys), cfg,
                    observers=[observe, *extra_observers], max_step=cap,
                    breakpoints=engine.breakpoints())
    return Run(engine, rec, combos)


def peak_quadratic(times, values) -> tuple[float, float]:
    """Grid maximum refined by a parabola through the top three samples."""
    values = np.asarray(values)
    i = int(np.argmax(values))
    if i == 0 or i == len(values) - 1:
        return float(times[i]), float(values[i])
    t3 = np.asarray(times[i - 1:i + 2])
    v3 = values[i - 1:i + 2]
    coef = np.polyfit(t3 - t3[1], v3, 2)
    if coef[0] >= 0:
        return float(times[i]), float(values[i])
    ts = -coef[1] / (2 * coef[0])
    return float(t3[1] + ts), float(np.polyval(coef, ts))


__all__ = ["Flux", "Quadrature", "Run", "run_engine", "default_window", "max_step_schedule",
           "decay_rate", "peak_quadratic", "resolve_config"]
