"""Relative quadrupole transition strengths and the 13-level encoding.

The 1762 nm beam sits at phi = 45 deg to the field with polarization
rotated gamma = 58 deg off the Delta m = 0 optimum, a compromise that
drives Delta m = 0, +/-1, +/-2 all at usable rates.  The strength table in
the intermediate-field eigenbasis differs strongly from the pure-F-basis
expectation; states are encodable when their strength from |0> exceeds
0.03, which selects exactly twelve 5D5/2 states.
"""

import pathlib

import numpy as np

from ba137qudit import (
    PAPER13_GEOMETRY,
    LaserGeometry,
    encodable_states,
    geometric_factor,
    strength_table,
)
from ba137qudit.fixtures import load_strength_fixture

OUT = pathlib.Path(__file__).parent / "output"
OUT.mkdir(exist_ok=True)

print("== geometric factors at the operating geometry ==")
for q in range(-2, 3):
    print(f"  g({q:+d}) = {geometric_factor(q, PAPER13_GEOMETRY):.5f}")
print("  (at gamma = 0, phi = 45 deg only Delta m = 0 and +/-2 survive: "
      f"g(1) = {geometric_factor(1, LaserGeometry(45, 0)):.3f})")

print("\n== full strength table at 8.35 G ==")
table = strength_table(8.35, PAPER13_GEOMETRY)
_, s_keys, reference = load_strength_fixture()
dev = np.max(np.abs(table.values - reference))
print(f"24 x 8 table; max |deviation| vs bundled reference = {dev:.2e}")

col = table.column((2, 2))
print("\ncolumn from |0> = |6S1/2, F~=2, m=2> (strength, encodable?):")
for (F, m), s in sorted(col.items(), key=lambda kv: -kv[1]):
    if s == 0.0:
        continue
    tag = "encoded" if s > 0.03 else "too weak"
    print(f"  -> D F~={F} m={str(m):>2s}: {s:.4f}  {tag}")

picked = encodable_states(table)
print(f"\nencodable states above 0.03, in qudit order |1>..|{len(picked)}>:")
print("  " + ", ".join(f"(F~={F}, m={m})" for F, m in picked))

table.to_csv(OUT / "strength_table_8p35G.csv")
table.to_json(OUT / "strength_table_8p35G.json")
print(f"\nwrote {OUT / 'strength_table_8p35G.csv'} and .json")
