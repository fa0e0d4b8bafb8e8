"""Rabi oscillations driven by a rectangular 50-photon pulse, short and long compared with the decay time."""

from fockwave.experiments import run_rabi_rect

for t_max in (0.02, 1.0):
    res = run_rabi_rect(50, t_max)
    print(f"t_max={t_max}: omega_R={res.frequency:.3f} (predicted {res.predicted:.3f}, {res.method}), "
          f"extrema={res.extrema}, max P_e={res.p_e.max():.4f}")

res = run_rabi_rect(1, 2.0)
print(f"single photon: full oscillation detected = {res.full_oscillation}, max P_e={res.p_e.max():.4f}")
