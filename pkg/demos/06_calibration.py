"""Calibration workflows: field estimation, three-reference frequency
calibration, and the ratio-based pi-time scheme.

Measuring every transition frequency each session would scale with the
qudit dimension.  Instead, three references suffice: the least
field-sensitive transition pins the optical offset while the most
field-split pair measures the field through Delta f; a per-transition
linear model trained on drift history predicts the rest to kilohertz
accuracy.  Pi times could similarly come from five anchor Rabi
frequencies (one per Delta m class), but that scheme needs the laser
detuning small against the weakest Rabi frequency.
"""

import math
import pathlib

import numpy as np

from ba137qudit import PAPER13_GEOMETRY, detuned_rabi, estimate_field, strength_table
from ba137qudit.calib import (
    FrequencyScan,
    fit_calibration,
    fit_lorentzian,
    paper13_transition_refs,
    predict_frequency,
    ratio_pi_calibration,
    reference_trio,
    scan_plan,
    simulate_splittings,
    synthetic_snapshot,
)

OUT = pathlib.Path(__file__).parent / "output"
OUT.mkdir(exist_ok=True)
rng = np.random.default_rng(20240817)

print("== magnetic field from measured splittings ==")
trans = paper13_transition_refs()
pairs = [trans[n] for n in (1, 3, 5, 10)]
measured = simulate_splittings(pairs, 8.35)
noisy = {k: v + rng.uniform(-1e-3, 1e-3) for k, v in measured.items()}
est = estimate_field(noisy)
print(f"true field 8.3500 G, estimated {est.B:.4f} G from four transitions "
      f"with 1 kHz measurement noise")

print("\n== line-center fitting on a synthetic fine scan ==")
plan = scan_plan()
offsets = np.array(plan.fine_offsets(0.0))
p = 0.5 * 25.0 / ((offsets - 1.3) ** 2 + 25.0) + rng.uniform(-0.02, 0.02, len(offsets))
fit = fit_lorentzian(FrequencyScan(offsets, np.clip(p, 0, 1), np.full(len(offsets), 400)))
print(f"true center +1.300 kHz, fitted {fit.center_khz:+.3f} +/- {fit.center_err:.3f} kHz")

print("\n== three-reference linear calibration over drift history ==")
history = [synthetic_snapshot(8.35 + b) for b in (-0.02, -0.01, 0.0, 0.01, 0.02)]
model = fit_calibration(history)
probe = synthetic_snapshot(8.356)
worst = 0.0
for n in sorted(probe.freqs):
    pred = predict_frequency(model, probe.f_offset, probe.f_low, probe.f_up, n)
    err = (pred - probe.freqs[n]) * 1e3
    worst = max(worst, abs(err))
    print(f"  |{n:>2d}>: a1 = {model.a1[n]:+.4f}, a2 = {model.a2[n]:+10.4f} MHz, "
          f"prediction error {err:+.4f} kHz")
print(f"worst prediction error inside the drift window: {worst:.4f} kHz")
refs = reference_trio()
print("references: offset = transition to D(F~=2, m=1); "
      "low/up = the stretched m = -4 / +4 transitions")

print("\n== ratio-based pi-time calibration ==")
table = strength_table(8.35, PAPER13_GEOMETRY)
anchor = ((2, 2), (4, 4))  # strongest q = +2 transition
omega_anchor = 2 * math.pi * 10e3
out = ratio_pi_calibration(
    {2: (anchor, omega_anchor)}, table, targets=[anchor, ((1, -1), (1, 1))]
)
for pair, (omega, tau) in out.items():
    print(f"  {pair}: Omega = 2 pi x {omega / (2 * math.pi * 1e3):6.2f} kHz, "
          f"tau_pi = {tau * 1e6:7.1f} us")

print("\n== why the ratio scheme was not usable here ==")
omega_weak = 2.5e3
delta = 1e3  # frequency resolution floor
shifted = detuned_rabi(omega_weak, delta)
print(f"weakest transition: 2.5 kHz Rabi frequency; a 1 kHz detuning already "
      f"shifts it to {shifted / 1e3:.4f} kHz ({(shifted - omega_weak) / omega_weak:.1%})")
