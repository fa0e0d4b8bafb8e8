"""Best bandwidth and peak excitation for growing photon number, with power-law fits."""

import sys

from fockwave.experiments import fit_scaling, run_optimum_sweep

photons = [int(a) for a in sys.argv[1:]] or [1, 2, 4, 8, 12, 16]
rows = run_optimum_sweep(photons)
print(f"{'N':>3}  {'omega_opt':>9}  {'P_max':>8}")
for r in rows:
    print(f"{r['N']:3d}  {r['omega_opt']:9.4f}  {r['P_max']:8.5f}")

if len(rows) >= 3:
    p_fit, o_fit = fit_scaling(rows)
    for fit in (p_fit, o_fit):
        ci = ", ".join(f"{k}={v:.4f} [{fit.ci95[k][0]:.4f}, {fit.ci95[k][1]:.4f}]" for k, v in fit.params.items())
        print(f"{fit.model}: {ci}  R2={fit.r2:.6f}")
