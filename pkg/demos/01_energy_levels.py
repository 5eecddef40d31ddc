"""Energy structure of 137Ba+ at intermediate magnetic field.

Builds the hyperfine + Zeeman Hamiltonian for both levels, shows the
inverted 5D5/2 hyperfine ladder (F=4 sits 486 kHz *below* F=3), and scans
the 24 transition frequencies from |6S1/2, F~=2, m=2> against field.  At
the 8.35 G operating point the Zeeman energy is comparable to the F=3/F=4
splitting, so the spectrum bears little resemblance to the low-field
Zeeman fans.
"""

import pathlib

import numpy as np

from ba137qudit import (
    BA137_D52,
    BA137_S12,
    StateRef,
    diagonalize,
    diagonalize_range,
    field_sensitivity,
    zero_field_energy,
)

OUT = pathlib.Path(__file__).parent / "output"
OUT.mkdir(exist_ok=True)

print("== zero-field hyperfine structure ==")
for level in (BA137_S12, BA137_D52):
    energies = {str(F): zero_field_energy(level, F) for F in level.f_values()}
    print(f"{level.name}: " + ", ".join(f"E(F={f}) = {e:+.4f} MHz" for f, e in energies.items()))
d0 = diagonalize(BA137_D52, 0.0)
gap = d0.state(4, 0).energy - d0.state(3, 0).energy
print(f"5D5/2 E(F=4) - E(F=3) = {gap * 1e3:+.1f} kHz  (the ladder is inverted)")
s0 = diagonalize(BA137_S12, 0.0)
print(f"6S1/2 splitting = {s0.state(2, 2).energy - s0.state(1, 1).energy:.3f} MHz\n")

print("== transition frequencies from |0> at 8.35 G ==")
# f0: the zero-field transition to the F=4 level, the usual plot anchor
f0 = diagonalize(BA137_D52, 0.0).state(4, 0).energy - s0.state(2, 2).energy
ground = StateRef.of(BA137_S12, 2, 2)
s_sys = diagonalize(BA137_S12, 8.35)
d_sys = diagonalize(BA137_D52, 8.35)
rows = []
for state in d_sys:
    f = state.energy - s_sys.state(2, 2).energy - f0
    kappa = field_sensitivity(ground, state.ref, 8.35)
    rows.append((f, state.F_tilde, state.m_F_tilde, kappa))
for f, F, m, kappa in sorted(rows):
    print(f"  F~={F} m={str(m):>2s}: f - f0 = {f:+9.3f} MHz   kappa = {kappa:+.4f} MHz/G")

print("\n== field scan 0..10 G (CSV for plotting) ==")
bs = np.linspace(0.0, 10.0, 201)
systems = diagonalize_range(BA137_D52, bs)
grounds = diagonalize_range(BA137_S12, bs)
path = OUT / "transition_frequencies_vs_B.csv"
with open(path, "w") as fh:
    fh.write("B_gauss,state,f_minus_f0_MHz\n")
    for sys_, gsys in zip(systems, grounds):
        for s in sys_:
            f = s.energy - gsys.state(2, 2).energy - f0
            fh.write(f"{sys_.B!r},F{s.F_tilde}_m{s.m_F_tilde},{f!r}\n")
print(f"wrote {path} ({len(bs)} field values x 24 states)")
