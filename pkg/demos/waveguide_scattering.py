"""Transmission and reflection of Fock-state pulses by an atom side-coupled to a waveguide."""

import numpy as np

from fockwave.experiments import run_scatter_sweep

bandwidths = np.logspace(np.log10(0.05), 2, 10)
rows = run_scatter_sweep(bandwidths, [1, 2, 3])
print(f"{'omega':>8}  " + "  ".join(f"T(N={n})" for n in (1, 2, 3)))
for omega in bandwidths:
    vals = [r["transmission"] for r in rows if r["omega"] == omega]
    print(f"{omega:8.3f}  " + "  ".join(f"{v:7.4f}" for v in vals))
