"""Atom excitation and emitted flux for one photon, two photons and their equal superposition."""

import numpy as np

from fockwave.fock import FieldCombination, simulate
from fockwave.operators import two_level_slh
from fockwave.simulate import peak_quadratic
from fockwave.wavepackets import GaussianPacket

combos = {
    "N=1": FieldCombination.fock(1),
    "N=2": FieldCombination.fock(2),
    "superposition": FieldCombination.superposition({1: 2 ** -0.5, 2: 2 ** -0.5}),
}
run = simulate(two_level_slh(), GaussianPacket(1.46), combos, sample_points=401)

print(f"{'field':>14}  {'P_e max':>8}  {'at t':>6}  {'photons out':>11}")
for name in combos:
    t_peak, p_peak = peak_quadratic(run.times, run[f"P_e[{name}]"])
    print(f"{name:>14}  {p_peak:8.4f}  {t_peak:6.3f}  {run[f'flux1_integrated[{name}]'][-1]:11.4f}")

print("\n   t    P_e(N=1)  flux(N=1)")
for i in np.linspace(0, len(run.times) - 1, 13).astype(int):
    print(f"{run.times[i]:6.2f}  {run['P_e[N=1]'][i]:8.4f}  {run['flux1_rate[N=1]'][i]:8.4f}")
