"""Calibration procedures: line fitting, linear frequency calibration,
field estimation, Rabi-flop error extraction, and ratio-based pi times.

The frequency calibration needs only three empirically measured
transitions per session: an offset reference (the transition least
sensitive to field, so it pins the common optical offset) and a low/up
pair with the largest mutual sensitivity spread (so their difference
Delta f tracks the field).  Every other transition frequency is then
predicted as f_n = a_n1 * Delta f + f_offset + a_n2 with per-transition
coefficients regressed from drift history.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import Mapping, Sequence

import numpy as np
from scipy import optimize

from .atomstruct import (
    BA137_D52,
    BA137_S12,
    CONSTANTS,
    PhysicalConstants,
    StateRef,
    transition_frequency_at,
)
from .transitions import StrengthTable

__all__ = [
    "FrequencyScan",
    "LorentzianFit",
    "CalSnapshot",
    "CalibrationModel",
    "RabiTrace",
    "RabiFit",
    "FieldEstimate",
    "ScanPlan",
    "FitError",
    "fit_lorentzian",
    "fit_calibration",
    "predict_frequency",
    "estimate_field",
    "fit_rabi_flop",
    "ratio_pi_calibration",
    "detuned_rabi",
    "select_references",
    "scan_plan",
    "simulate_splittings",
    "paper13_transition_refs",
    "reference_trio",
    "synthetic_snapshot",
]


class FitError(RuntimeError):
    """A least-squares fit failed to converge or is ill-posed."""


@dataclass(frozen=True, eq=False)
class FrequencyScan:
    """Dark-probability vs laser-frequency offset, from a fine scan."""

    freq_khz: np.ndarray
    p_dark: np.ndarray
    shots: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "freq_khz", np.asarray(self.freq_khz, dtype=float))
        object.__setattr__(self, "p_dark", np.asarray(self.p_dark, dtype=float))
        object.__setattr__(self, "shots", np.asarray(self.shots))
        if not np.all(np.diff(self.freq_khz) > 0):
            raise ValueError("scan frequencies must be strictly increasing")
        if np.any((self.p_dark < 0) | (self.p_dark > 1)):
            raise ValueError("probabilities must be in [0, 1]")


@dataclass(frozen=True)
class LorentzianFit:
    center_khz: float
    width_khz: float  # half width at half maximum
    amplitude: float
    offset: float
    center_err: float
    covariance: np.ndarray = field(repr=False, compare=False, default=None)
    at_boundary: bool = False


def _lorentzian(f, f0, w, a, c):
    return a * w**2 / ((f - f0) ** 2 + w**2) + c


def fit_lorentzian(scan: FrequencyScan) -> LorentzianFit:
    """Least-squares Lorentzian peak fit of a fine frequency scan.

    A center within one grid step of either scan edge is flagged
    ``at_boundary`` (the scan window should be re-centered).
    """
    f, y = scan.freq_khz, scan.p_dark
    if len(f) < 5:
        raise FitError("need at least 5 scan points")
    c0 = float(min(y[0], y[-1]))
    a0 = float(y.max() - c0)
    if a0 <= 0:
        raise FitError("scan has no peak above the baseline")
    f0 = float(f[np.argmax(y)])
    w0 = max((f[-1] - f[0]) / 6.0, 1e-6)

    def resid(p):
        return _lorentzian(f, *p) - y

    res = optimize.least_squares(resid, [f0, w0, a0, c0], method="lm", max_nfev=5000)
    if not res.success:
        raise FitError(f"Lorentzian fit did not converge: {res.message}")
    dof = max(len(f) - 4, 1)
    s2 = 2.0 * res.cost / dof
    cov = s2 * np.linalg.pinv(res.jac.T @ res.jac)
    center, width = float(res.x[0]), float(abs(res.x[1]))
    step = float(np.min(np.diff(f)))
    boundary = center <= f[0] + step or center >= f[-1] - step
    return LorentzianFit(
        center_khz=center,
        width_khz=width,
        amplitude=float(res.x[2]),
        offset=float(res.x[3]),
        center_err=float(np.sqrt(cov[0, 0])),
        covariance=cov,
        at_boundary=bool(boundary),
    )


@dataclass(frozen=True, eq=False)
class CalSnapshot:
    """One calibration session: the three reference frequencies plus the
    measured frequency of every encoded transition (MHz)."""

    f_offset: float
    f_low: float
    f_up: float
    freqs: Mapping[int, float]


@dataclass(eq=False)
class CalibrationModel:
    """Per-transition linear model f_n = a_n1 (f_up - f_low) + f_offset + a_n2."""

    a1: dict[int, float]
    a2: dict[int, float]
    residual_rms: dict[int, float]
    references: tuple[str, str, str] = ("offset", "low", "up")

    def to_json(self, path) -> None:
        doc = {
            "references": list(self.references),
            "transitions": {
                str(n): {
                    "a1": self.a1[n],
                    "a2_MHz": self.a2[n],
                    "residual_rms_MHz": self.residual_rms[n],
                }
                for n in sorted(self.a1)
            },
        }
        with open(path, "w") as fh:
            json.dump(doc, fh, indent=2, sort_keys=True)
            fh.write("\n")

    @classmethod
    def from_json(cls, path) -> "CalibrationModel":
        with open(path) as fh:
            doc = json.load(fh)
        a1, a2, rms = {}, {}, {}
        for key, entry in doc["transitions"].items():
            n = int(key)
            a1[n] = entry["a1"]
            a2[n] = entry["a2_MHz"]
            rms[n] = entry["residual_rms_MHz"]
        return cls(a1=a1, a2=a2, residual_rms=rms, references=tuple(doc["references"]))


def fit_calibration(history: Sequence[CalSnapshot]) -> CalibrationModel:
    """Ordinary least squares of f_n - f_offset against Delta f = f_up - f_low,
    one regression per transition.  Needs >= 2 snapshots with distinct Delta f."""
    if len(history) < 2:
        raise FitError("need at least 2 calibration snapshots")
    dfs = np.array([s.f_up - s.f_low for s in history])
    if np.ptp(dfs) < 1e-12:
        raise FitError("rank-deficient history: all snapshots have equal Delta f")
    keys = set(history[0].freqs)
    for s in history[1:]:
        if set(s.freqs) != keys:
            raise FitError("snapshots disagree on which transitions were measured")
    a1, a2, rms = {}, {}, {}
    for n in sorted(keys):
        y = np.array([s.freqs[n] - s.f_offset for s in history])
        slope, intercept = np.polyfit(dfs, y, 1)
        a1[n] = float(slope)
        a2[n] = float(intercept)
        rms[n] = float(np.sqrt(np.mean((slope * dfs + intercept - y) ** 2)))
    return CalibrationModel(a1=a1, a2=a2, residual_rms=rms)


def predict_frequency(
    model: CalibrationModel, f_offset: float, f_low: float, f_up: float, n: int
) -> float:
    if n not in model.a1:
        raise KeyError(f"transition {n} not in the calibration model")
    return model.a1[n] * (f_up - f_low) + f_offset + model.a2[n]


@dataclass(frozen=True)
class FieldEstimate:
    B: float  # gauss
    residual_rms: float  # MHz
    reference: tuple


def _splittings(
    transitions: Sequence[tuple[StateRef, StateRef]],
    B: float,
    constants: PhysicalConstants,
) -> np.ndarray:
    return np.array(
        [transition_frequency_at(g, e, B, 0.0, constants) for g, e in transitions]
    )


def estimate_field(
    measured: Mapping[tuple[StateRef, StateRef], float],
    prior: tuple[float, float] = (0.0, 20.0),
    constants: PhysicalConstants = CONSTANTS,
    grid_step: float = 0.25,
    tol: float = 1e-5,
) -> FieldEstimate:
    """Least-squares field estimate from measured transition frequencies.

    Frequencies are compared relative to the first transition in the map
    (any common optical offset drops out), so at least two transitions
    with distinct field sensitivity are required.  Coarse grid search over
    the prior interval followed by golden-section refinement.
    """
    pairs = list(measured.keys())
    if len(pairs) < 2:
        raise ValueError("need at least two measured transitions")
    ref = pairs[0]
    meas = np.array([measured[p] - measured[ref] for p in pairs[1:]])

    def cost(B: float) -> float:
        sims = _splittings(pairs, B, constants)
        sim_rel = sims[1:] - sims[0]
        return float(np.sum((sim_rel - meas) ** 2))

    lo = max(prior[0], 1e-4)
    grid = np.arange(lo, prior[1] + grid_step, grid_step)
    values = np.array([cost(b) for b in grid])
    best = int(np.argmin(values))

    # a second, separated local minimum this deep means the data cannot
    # pin the field; report rather than silently picking one
    local_min = [
        i
        for i in range(1, len(grid) - 1)
        if values[i] <= values[i - 1] and values[i] <= values[i + 1]
    ]
    deep = [i for i in local_min if values[i] <= values[best] + 1e-9 * (1 + values[best])]
    if len(deep) > 1 and np.ptp(grid[deep]) > 2 * grid_step:
        raise FitError(
            f"field estimate is ambiguous: near-equal minima at B = "
            f"{[round(float(grid[i]), 3) for i in deep]} G"
        )

    a = grid[max(best - 1, 0)]
    b = grid[min(best + 1, len(grid) - 1)]
    res = optimize.minimize_scalar(
        cost, bounds=(a, b), method="bounded", options={"xatol": tol}
    )
    rms = math.sqrt(res.fun / max(len(meas), 1))
    return FieldEstimate(B=float(res.x), residual_rms=rms, reference=ref)


def simulate_splittings(
    transitions: Sequence[tuple[StateRef, StateRef]],
    B: float,
    constants: PhysicalConstants = CONSTANTS,
) -> dict[tuple[StateRef, StateRef], float]:
    """Model-generated transition frequencies, e.g. for round-trip tests."""
    vals = _splittings(list(transitions), B, constants)
    return dict(zip(transitions, vals.tolist()))


@dataclass(frozen=True, eq=False)
class RabiTrace:
    """Transition probability vs pulse duration."""

    t_us: np.ndarray
    p: np.ndarray
    shots: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "t_us", np.asarray(self.t_us, dtype=float))
        object.__setattr__(self, "p", np.asarray(self.p, dtype=float))
        object.__setattr__(self, "shots", np.asarray(self.shots))
        if np.any(self.t_us < 0) or not np.all(np.diff(self.t_us) > 0):
            raise ValueError("times must be nonnegative and increasing")


@dataclass(frozen=True)
class RabiFit:
    amplitude: float  # A
    offset: float  # C
    t_peak_us: float
    t_scale_us: float
    eps_pi: float  # 1 - A - C
    window: tuple[float, float]
    covariance: np.ndarray = field(repr=False, compare=False, default=None)


def _first_peak_time(t: np.ndarray, p: np.ndarray, smooth: bool) -> float:
    """Time of the highest raw point within the first oscillation peak.

    The peak region ends at the first smoothed local minimum that falls
    below half maximum after the trace first comes within 80% of its top;
    noise bumps on the rising edge stay below both gates.
    """
    s = p.copy()
    if smooth and len(p) >= 3:
        s[1:-1] = (p[:-2] + p[1:-1] + p[2:]) / 3.0
    top = float(s.max())
    if top - float(s.min()) < 0.05:
        raise FitError("no identifiable first peak in the Rabi trace")
    i_top = int(np.argmax(s >= 0.8 * top))
    i_end = len(s) - 1
    for i in range(i_top + 1, len(s) - 1):
        if s[i] <= s[i - 1] and s[i] <= s[i + 1] and s[i] < 0.5 * top:
            i_end = i
            break
    window = slice(0, i_end + 1)
    return float(t[window][np.argmax(p[window])])


def fit_rabi_flop(trace: RabiTrace, smooth: bool = True) -> RabiFit:
    """Extract the single-pulse error from the first Rabi oscillation peak.

    Fits p(t) = A cos^2(pi (t - t_peak) / (2 t_scale)) + C on the points
    between half and one-and-a-half times the empirical peak time; the
    pulse error is eps_pi = 1 - A - C.  Smoothing (3-point moving average)
    is used only to locate the peak, never in the fit.
    """
    t, p = trace.t_us, trace.p
    t_peak_r = _first_peak_time(t, p, smooth)
    mask = (t >= t_peak_r / 2.0) & (t <= 1.5 * t_peak_r)
    if int(mask.sum()) < 5:
        raise FitError(
            f"only {int(mask.sum())} points in the fit window around {t_peak_r} us"
        )
    tw, pw = t[mask], p[mask]

    def model(params):
        a, c, tp, ts = params
        return a * np.cos(np.pi * (tw - tp) / (2.0 * ts)) ** 2 + c

    p_max = float(pw.max())
    p_min = float(pw.min())
    x0 = [max(p_max - p_min, 0.1), p_min, t_peak_r, t_peak_r]
    # bounded fit: the window spans half an oscillation, so an unbounded
    # time scale is degenerate with the amplitude and wanders under noise
    lower = [0.0, -0.5, t_peak_r / 2.0, t_peak_r / 4.0]
    upper = [1.5, 0.5, 1.5 * t_peak_r, 4.0 * t_peak_r]
    x0 = np.clip(x0, lower, upper)

    res = optimize.least_squares(
        lambda q: model(q) - pw, x0, bounds=(lower, upper), method="trf", max_nfev=5000
    )
    if not res.success:
        raise FitError(f"Rabi fit did not converge: {res.message}")
    a, c, tp, ts = res.x
    dof = max(len(tw) - 4, 1)
    s2 = 2.0 * res.cost / dof
    cov = s2 * np.linalg.pinv(res.jac.T @ res.jac)
    return RabiFit(
        amplitude=float(a),
        offset=float(c),
        t_peak_us=float(tp),
        t_scale_us=float(abs(ts)),
        eps_pi=float(1.0 - a - c),
        window=(float(tw[0]), float(tw[-1])),
        covariance=cov,
    )


def ratio_pi_calibration(
    measured: Mapping[int, tuple[tuple, float]],
    strengths: StrengthTable,
    targets: Sequence[tuple],
) -> dict[tuple, tuple[float, float]]:
    """Predict Rabi frequencies from per-q anchor measurements.

    measured maps q -> ((ground label, excited label), Omega_rad_per_s) for
    one measured anchor transition per q.  Each target transition with the
    same Delta m = q is predicted as Omega' = (K'/K) Omega, which is
    laser-independent because the geometric factor cancels within a q
    class.  Cross-q ratios are refused: a target's q must have an anchor.
    Returns target -> (Omega, tau_pi = pi/Omega).
    """
    from .angmom import HalfInt

    def delta_m(pair) -> int:
        s_label, d_label = pair
        twice = HalfInt.coerce(d_label[1]).twice - HalfInt.coerce(s_label[1]).twice
        return twice // 2

    anchors = {}
    for q, (pair, omega) in measured.items():
        if delta_m(pair) != q:
            raise ValueError(
                f"anchor for q = {q} has Delta m = {delta_m(pair)}: cross-q "
                "ratios are not laser-independent and are refused"
            )
        strength = strengths.value(pair[1], pair[0])
        if strength <= 0.0:
            raise ValueError(f"anchor transition {pair} has zero strength")
        anchors[q] = (strength, omega)

    out = {}
    for pair in targets:
        q = delta_m(pair)
        if q not in anchors:
            raise KeyError(f"no anchor measured for q = {q} (target {pair})")
        k_anchor, omega_anchor = anchors[q]
        k_target = strengths.value(pair[1], pair[0])
        omega = omega_anchor * k_target / k_anchor
        if omega <= 0.0:
            out[pair] = (0.0, math.inf)
        else:
            out[pair] = (omega, math.pi / omega)
    return out


def detuned_rabi(omega: float, delta: float) -> float:
    """Effective Rabi frequency sqrt(Omega^2 + delta^2) off resonance."""
    return math.hypot(omega, delta)


def select_references(
    kappas: Mapping[object, float],
) -> tuple[object, object, object]:
    """(offset, low, up) references: minimum |kappa| pins the offset; the
    most negative / most positive kappa pair maximizes the Delta f lever.
    Operators may override, e.g. to prefer pure stretched transitions."""
    if len(kappas) < 3:
        raise ValueError("need at least three candidate transitions")
    offset = min(kappas, key=lambda k: abs(kappas[k]))
    low = min(kappas, key=lambda k: kappas[k])
    up = max(kappas, key=lambda k: kappas[k])
    if len({offset, low, up}) != 3:
        raise ValueError("reference transitions must be distinct")
    return offset, low, up


@dataclass(frozen=True)
class ScanPlan:
    """Two-stage frequency search: coarse grid, then fine grid at the
    coarse minimum (offsets in kHz relative to the last known center)."""

    coarse_offsets: tuple[float, ...]
    fine_span: float
    fine_step: float

    def fine_offsets(self, coarse_center: float) -> tuple[float, ...]:
        n = int(round(2 * self.fine_span / self.fine_step)) + 1
        return tuple(coarse_center - self.fine_span + i * self.fine_step for i in range(n))


def scan_plan(
    coarse_span: float = 50.0,
    coarse_step: float = 10.0,
    fine_span: float = 10.0,
    fine_step: float = 1.0,
) -> ScanPlan:
    n = int(round(2 * coarse_span / coarse_step)) + 1
    coarse = tuple(-coarse_span + i * coarse_step for i in range(n))
    return ScanPlan(coarse_offsets=coarse, fine_span=fine_span, fine_step=fine_step)


def paper13_transition_refs() -> dict[int, tuple[StateRef, StateRef]]:
    """Encoded transitions |0> <-> |n> of the 13-level scheme as state refs."""
    from .transitions import PAPER13_D_STATES

    ground = StateRef.of(BA137_S12, 2, 2)
    return {
        n + 1: (ground, StateRef(BA137_D52, f, m))
        for n, (f, m) in enumerate(PAPER13_D_STATES)
    }


def reference_trio() -> dict[str, tuple[StateRef, StateRef]]:
    """The published reference choice: the least field-sensitive encoded
    transition as offset, the two pure stretched transitions as low/up."""
    return {
        "offset": (StateRef.of(BA137_S12, 2, 2), StateRef.of(BA137_D52, 2, 1)),
        "low": (StateRef.of(BA137_S12, 2, -2), StateRef.of(BA137_D52, 4, -4)),
        "up": (StateRef.of(BA137_S12, 2, 2), StateRef.of(BA137_D52, 4, 4)),
    }


def synthetic_snapshot(
    B: float,
    optical_offset: float = 0.0,
    constants: PhysicalConstants = CONSTANTS,
) -> CalSnapshot:
    """Model-generated calibration session at one field value."""
    refs = reference_trio()
    trans = paper13_transition_refs()
    freqs = {
        n: transition_frequency_at(g, e, B, optical_offset, constants)
        for n, (g, e) in trans.items()
    }
    return CalSnapshot(
        f_offset=transition_frequency_at(*refs["offset"], B, optical_offset, constants),
        f_low=transition_frequency_at(*refs["low"], B, optical_offset, constants),
        f_up=transition_frequency_at(*refs["up"], B, optical_offset, constants),
        freqs=freqs,
    )
