"""Explicit Runge-Kutta time stepping for flattened real ODE systems."""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field

import numpy as np

log = logging.getLogger(__name__)

# Dormand-Prince 5(4) tableau
_C = np.array([0, 1 / 5, 3 / 10, 4 / 5, 8 / 9, 1, 1])
_A = [
    [],
    [1 / 5],
    [3 / 40, 9 / 40],
    [44 / 45, -56 / 15, 32 / 9],
    [19372 / 6561, -25360 / 2187, 64448 / 6561, -212 / 729],
    [9017 / 3168, -355 / 33, 46732 / 5247, 49 / 176, -5103 / 18656],
    [35 / 384, 0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84],
]
_B = np.array([35 / 384, 0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84, 0])
_B_LOW = np.array([5179 / 57600, 0, 7571 / 16695, 393 / 640, -92097 / 339200,
                   187 / 2100, 1 / 40])
_E = _B - _B_LOW


class IntegrationError(RuntimeError):
    """Raised on step-size underflow or a non-finite state."""

    def __init__(self, msg, t=None):
        super().__init__(msg if t is None else f"{msg} (t={t:.6g})")
        self.t = t


@dataclass
class IntegratorConfig:
    method: str = "rk45_adaptive"
    rtol: float = 1e-8
    atol: float = 1e-10
    dt_init: float | None = None
    dt_max: float = math.inf
    dt_min: float = 1e-13
    window: tuple[float, float] = (0.0, 1.0)
    sample_points: int = 201

    def __post_init__(self):
        if self.method not in ("rk45_adaptive", "rk4_fixed"):
            raise ValueError(f"unknown method {self.method!r}")
        t0, t1 = self.window
        if not t0 < t1:
            raise ValueError("window must satisfy t_start < t_end")
        if not (self.rtol > 0 and self.atol > 0):
            raise ValueError("tolerances must be positive")
        if self.sample_points < 2:
            raise ValueError("need at least two sample points")
        dt_init = self.dt_init if self.dt_init is not None else min(self.dt_max, (t1 - t0) / 100)
        if not 0 < self.dt_min <= dt_init <= self.dt_max:
            raise ValueError("need 0 < dt_min <= dt_init <= dt_max")
        self.dt_init = dt_init

    @property
    def sample_times(self):
        return np.linspace(*self.window, self.sample_points)

    def replace(self, **kw) -> "IntegratorConfig":
        d = dict(self.__dict__)
        if "dt_max" in kw or "window" in kw:
            d.pop("dt_init")
        d.update(kw)
        return IntegratorConfig(**d)


@dataclass
class TimeSeriesRecord:
    times: np.ndarray
    columns: dict = field(default_factory=dict)
    final_state: np.ndarray | None = None
    steps: int = 0
    rejected: int = 0
    rhs_calls: int = 0

    def __getitem__(self, key):
        return self.columns[key]

    def to_csv(self, path, header_lines=()):
        names = list(self.columns)
        with open(path, "w") as fh:
            for line in header_lines:
                fh.write(f"# {line}\n")
            fh.write(",".join(["t", *names]) + "\n")
            for i, t in enumerate(self.times):
                vals = [repr(float(np.real(self.columns[n][i]))) for n in names]
                fh.write(",".join([repr(float(t)), *vals]) + "\n")


def _record(observers, t, y, out):
    for obs in observers:
        for k, v in obs(t, y).items():
            out.setdefault(k, []).append(v)


def integrate(rhs, y0, cfg: IntegratorConfig, observers=(), max_step=None,
              breakpoints=()) -> TimeSeriesRecord:
    """Integrate ``dy/dt = rhs(t, y)`` over ``cfg.window``.

    Each observer is called as ``obs(t, y) -> dict`` at the uniformly spaced
    sample times, which the stepper lands on exactly. ``max_step`` is a
    number or a callable ``t -> cap`` that tightens ``cfg.dt_max`` locally; steps are
    also clipped so they never jump over a ``breakpoint``.
    """
    y = np.array(y0, dtype=float)
    if not np.all(np.isfinite(y)):
        raise IntegrationError("non-finite initial state")
    samples = cfg.sample_times
    t_end = samples[-1]
    inner = [float(b) for b in breakpoints if samples[0] < b < t_end]
    stops = np.unique(np.concatenate([samples, inner]))
    sample_set = set(samples.tolist())
    kinks = set(inner)
    cols: dict = {}
    t = float(samples[0])
    _record(observers, t, y, cols)
    rec = TimeSeriesRecord(samples)

    def cap(t):
        c = cfg.dt_max
        if max_step is not None:
            c = min(c, max_step(t) if callable(max_step) else max_step)
        return c

    if cfg.method == "rk4_fixed":
        stepper = _rk4_run
    else:
        stepper = _dp45_run
    stepper(rhs, t, y, stops, sample_set, kinks, cfg, cap, observers, cols, rec)
    rec.columns = {k: np.array(v) for k, v in cols.items()}
    return rec


def _end_time(t, h, stop, landing):
    """Stage time at the end of a step; left limit when landing on a stop.

    Packets may jump at their support edges, and a step that ends on an
    edge must see the envelope from inside its own interval.
    """
    return float(np.nextafter(stop, -np.inf)) if landing else t + h


def _rk4_run(rhs, t, y, stops, sample_set, kinks, cfg, cap, observers, cols, rec):
    h_fixed = cfg.dt_init
    for stop in stops[1:]:
        while t < stop:
            h = min(h_fixed, cap(t), stop - t)
            if stop - (t + h) < 1e-12 * max(1.0, abs(stop)):
                h = stop - t
            k1 = rhs(t, y)
            k2 = rhs(t + h / 2, y + h / 2 * k1)
            k3 = rhs(t + h / 2, y + h / 2 * k2)
            k4 = rhs(_end_time(t, h, stop, h == stop - t), y + h * k3)
            y = y + h / 6 * (k1 + 2 * k2 + 2 * k3 + k4)
            rec.rhs_calls += 4
            rec.steps += 1
            t = stop if h == stop - t else t + h
            if not np.all(np.isfinite(y)):
                raise IntegrationError("non-finite state", t)
        if stop in kinks:
            k1 = rhs(t, y)  # right limit; the stored stage holds the left one
            rec.rhs_calls += 1
        if stop in sample_set:
            _record(observers, t, y, cols)
    rec.final_state = y


def _dp45_run(rhs, t, y, stops, sample_set, kinks, cfg, cap, observers, cols, rec):
    h = min(cfg.dt_init, cap(t))
    k1 = rhs(t, y)
    rec.rhs_calls += 1
    ks = np.empty((7, y.size))
    for stop in stops[1:]:
        while t < stop:
            h = min(h, cap(t))
            last = False
            if t + h >= stop - 1e-12 * max(1.0, abs(stop)):
                h = stop - t
                last = True
            if h < cfg.dt_min and not last:
                raise IntegrationError(f"step size {h:.3g} below dt_min", t)
            ks[0] = k1
            for i in range(1, 7):
                yi = y + h * (np.asarray(_A[i]) @ ks[:i])
                ti = _end_time(t, h, stop, last) if _C[i] == 1 else t + _C[i] * h
                ks[i] = rhs(ti, yi)
            rec.rhs_calls += 6
            y_new = y + h * (_B[:6] @ ks[:6])
            err_vec = h * (_E @ ks)
            scale = cfg.atol + cfg.rtol * np.maximum(np.abs(y), np.abs(y_new))
            err = float(np.max(np.abs(err_vec) / scale))
            if not np.isfinite(err):
                raise IntegrationError("non-finite state", t)
            if err <= 1.0:
                t = stop if last else t + h
                y = y_new
                k1 = ks[6].copy()
                rec.steps += 1
                fac = 5.0 if err == 0 else min(5.0, max(0.2, 0.9 * err ** -0.2))
                if not last:
                    h *= fac
                else:
                    h = max(h, h * fac)
            else:
                rec.rejected += 1
                h *= max(0.2, 0.9 * err ** -0.2)
                if h < cfg.dt_min:
                    raise IntegrationError(f"step size {h:.3g} below dt_min", t)
        if stop in kinks:
            k1 = rhs(t, y)  # right limit; the stored stage holds the left one
            rec.rhs_calls += 1
        if stop in sample_set:
            _record(observers, t, y, cols)
    rec.final_state = y
