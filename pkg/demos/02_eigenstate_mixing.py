"""How the field mixes the zero-field |F, m_F> states.

Tracks the |5D5/2, F~=4, m=1> eigenstate from 0 to 10 G.  Already at a
few hundred milligauss its |F=4, m=1> character erodes in favor of
|F=3, m=1> and |F=2, m=1>; only the stretched m = +/-4 states stay pure,
because no other state shares their m block.
"""

import pathlib

import numpy as np

from ba137qudit import BA137_D52, decomposition_scan
from ba137qudit.atomstruct import write_decomposition_scan

OUT = pathlib.Path(__file__).parent / "output"
OUT.mkdir(exist_ok=True)

bs = np.linspace(0.0, 10.0, 101)
scan = decomposition_scan(BA137_D52, 4, 1, bs)

print("== |F~=4, m=1> decomposition ==")
header = "  ".join(f"|F={F},m={m}>" for F, m in scan.components)
print(f"{'B (G)':>7s}  {header}")
for idx in (0, 2, 10, 40, 83, 100):
    amps = "  ".join(f"{a:+9.4f}" for a in scan.amplitudes[idx])
    print(f"{bs[idx]:7.2f}  {amps}")

at_835 = scan.amplitudes[np.argmin(np.abs(bs - 8.35))]
big = np.sum(np.abs(at_835) > 0.1)
print(f"\nat 8.35 G the state has {big} components with |amplitude| > 0.1")

print("\n== stretched states stay pure ==")
for m in (4, -4):
    pure = decomposition_scan(BA137_D52, 4, m, [0.0, 8.35, 10.0])
    print(f"|F~=4, m={m}>: components = "
          + ", ".join(f"|F={F},m={mm}>" for F, mm in pure.components)
          + f", amplitudes {pure.amplitudes.ravel().tolist()}")

path = OUT / "eigenstate_F4_m1_vs_B.csv"
write_decomposition_scan(path, scan)
print(f"\nwrote {path}")
