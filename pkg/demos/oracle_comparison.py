"""Hierarchy against a brute-force time-bin simulation of atom plus field."""

from fockwave.fock import simulate
from fockwave.operators import two_level_slh
from fockwave.oracle import TimeBinConfig, run_oracle
from fockwave.wavepackets import GaussianPacket

pkt = GaussianPacket(1.46)
for n in (1, 2):
    run = simulate(two_level_slh(), pkt, n, window=pkt.support(), sample_points=11, outputs=False)
    for bins in (500, 1000, 2000):
        oracle = run_oracle(two_level_slh(), (pkt, n), TimeBinConfig(bins=bins, window=pkt.support()))
        err = abs(oracle.excitation() - run["P_e"]).max()
        print(f"N={n} bins={bins:5d}  max |P_e difference| = {err:.2e}")
