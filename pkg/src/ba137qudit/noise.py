"""Filter-function model of magnetic-field dephasing during pi pulses.

The transition-frequency noise PSD is piecewise: 1/f with a low-frequency
cutoff, a mains peak, and a white floor, all scaled by the square of the
transition's field sensitivity kappa.  A pi pulse of Rabi frequency Omega
filters this noise; the overlap integral chi sets the pulse error
eps_pi = (1 - exp(-chi))/2, and the post-selected SPAM error follows as
eps_pi / (eps_pi + (1 - eps_pi)^2).

Angular frequencies are rad/s throughout.  kappa enters in MHz/G and is
converted to rad/s per gauss at the boundary, so the h parameters carry
the magnetic-field noise normalization (per-gauss PSD units).  Absolute
h values are not measurable here; only the PSD shape and the
kappa^2 tau_pi^2 scaling are exercised.
"""

from __future__ import annotations

import csv
import json
import math
import warnings
from dataclasses import asdict, dataclass

import numpy as np
from scipy import integrate, optimize

__all__ = [
    "NoiseModel",
    "TransitionNoiseParams",
    "ErrorScalingFit",
    "ErrorBudget",
    "QuadratureError",
    "kappa_to_rad",
    "psd",
    "filter_function_pi",
    "chi_numeric",
    "chi_closed_form",
    "pi_pulse_error",
    "spam_error_from_pi",
    "fit_error_scaling",
    "error_budget",
    "reference_scaling_points",
    "load_scaling_points",
    "write_scaling_points",
]

_KAPPA_TO_RAD = 2.0 * math.pi * 1e6  # MHz/G -> rad/s per gauss


def kappa_to_rad(kappa_mhz_per_gauss: float) -> float:
    return _KAPPA_TO_RAD * kappa_mhz_per_gauss


class QuadratureError(RuntimeError):
    """The chi integral failed to converge on one of its sub-intervals."""


@dataclass(frozen=True)
class NoiseModel:
    """Piecewise PSD of the magnetic-field noise (per-gauss units).

    S_B(w) = h_a/omega_0              for w < omega_0
           = h_peak                   inside the mains peak
           = h_a/w + h_b              otherwise
    """

    h_a: float = 0.0
    h_b: float = 0.0
    h_peak: float = 0.0
    omega_0: float = 1.0  # rad/s, low-frequency cutoff
    omega_ac: float = 2.0 * math.pi * 60.0  # rad/s, mains frequency
    delta_omega_ac: float = 2.0 * math.pi * 1.0  # rad/s, mains peak width

    def __post_init__(self):
        if self.omega_0 <= 0:
            raise ValueError("omega_0 must be positive")
        if not self.delta_omega_ac < self.omega_ac:
            raise ValueError("delta_omega_ac must be smaller than omega_ac")
        if min(self.h_a, self.h_b, self.h_peak) < 0:
            raise ValueError("PSD levels must be nonnegative")

    def base_psd(self, omega: float) -> float:
        if omega < self.omega_0:
            return self.h_a / self.omega_0
        if self.omega_ac - self.delta_omega_ac / 2 < omega < self.omega_ac + self.delta_omega_ac / 2:
            return self.h_peak
        return self.h_a / omega + self.h_b

    def to_json(self, path) -> None:
        with open(path, "w") as fh:
            json.dump(asdict(self), fh, indent=2, sort_keys=True)
            fh.write("\n")

    @classmethod
    def from_json(cls, path) -> "NoiseModel":
        with open(path) as fh:
            return cls(**json.load(fh))


@dataclass(frozen=True)
class TransitionNoiseParams:
    """Per-transition sensitivity and pulse duration."""

    kappa: float  # MHz/G
    tau_pi: float  # s

    def __post_init__(self):
        if self.tau_pi <= 0:
            raise ValueError("tau_pi must be positive")

    @property
    def omega(self) -> float:
        """Rabi frequency pi/tau_pi in rad/s."""
        return math.pi / self.tau_pi


def psd(omega: float, model: NoiseModel, kappa: float) -> float:
    """Transition-frequency noise PSD at omega (rad/s), scaled by kappa^2."""
    if omega < 0:
        raise ValueError("omega must be nonnegative")
    return kappa_to_rad(kappa) ** 2 * model.base_psd(omega)


def filter_function_pi(omega: float, big_omega: float) -> float:
    """Pi-pulse filter function: 4 w^2/Omega^2 below Omega, 4 above."""
    if big_omega <= 0:
        raise ValueError("Omega must be positive")
    if omega < big_omega:
        return 4.0 * omega**2 / big_omega**2
    return 4.0


def chi_numeric(model: NoiseModel, params: TransitionNoiseParams) -> float:
    """chi = (1/pi) int_0^inf S(w) F(w) / w^2 dw by adaptive quadrature.

    The integrand is split at the PSD cutoff, the mains-peak edges, and the
    Rabi frequency; above an upper truncation point the analytic tail of
    the w >= Omega branch (4 h_b/L + 2 h_a/L^2) is appended.
    """
    big_omega = params.omega
    scale = kappa_to_rad(params.kappa) ** 2

    def integrand(w: float) -> float:
        if w == 0.0:
            return 4.0 * (model.h_a / model.omega_0) / big_omega**2
        return model.base_psd(w) * filter_function_pi(w, big_omega) / w**2

    peak_lo = model.omega_ac - model.delta_omega_ac / 2
    peak_hi = model.omega_ac + model.delta_omega_ac / 2
    cut = 1e3 * max(big_omega, peak_hi, model.omega_0)
    breaks = {model.omega_0, peak_lo, peak_hi, big_omega}
    # decade subdivisions keep quad accurate on the slowly-decaying tails
    w = min(model.omega_0, peak_lo, big_omega) if model.omega_0 > 0 else big_omega
    while w < cut:
        breaks.add(w)
        w *= 10.0
    points = sorted(p for p in breaks if 0.0 < p < cut)
    total = 0.0
    err_total = 0.0
    lo = 0.0
    with warnings.catch_warnings():
        warnings.simplefilter("error", integrate.IntegrationWarning)
        for hi in points + [cut]:
            if hi <= lo:
                continue
            try:
                val, abserr = integrate.quad(
                    integrand, lo, hi, epsabs=0.0, epsrel=1e-10, limit=200
                )
            except integrate.IntegrationWarning as exc:
                raise QuadratureError(
                    f"chi quadrature did not converge on [{lo:g}, {hi:g}] rad/s: {exc}"
                ) from exc
            total += val
            err_total += abserr
            lo = hi
    if total > 0.0 and err_total > 1e-6 * total:
        raise QuadratureError(
            f"chi quadrature inaccurate: value {total:g}, error estimate {err_total:g}"
        )
    total += 4.0 * model.h_b / cut + 2.0 * model.h_a / cut**2
    return scale * total / math.pi


def chi_closed_form(model: NoiseModel, params: TransitionNoiseParams) -> float:
    """Approximate closed form of chi, valid for omega_ac < Omega and
    omega_0 << Omega, delta_omega_ac << omega_ac, h_b << Omega^2 delta_omega_ac:

    chi = kappa^2 [ (4/pi Omega^2)(3 h_a/2 + h_a ln(Omega/omega_0)
                    + h_peak delta_omega_ac) + 8 h_b/(pi Omega) ]
    """
    big_omega = params.omega
    if model.omega_ac >= big_omega:
        raise ValueError(
            f"closed form requires omega_ac < Omega "
            f"(got omega_ac = {model.omega_ac:g}, Omega = {big_omega:g} rad/s)"
        )
    scale = kappa_to_rad(params.kappa) ** 2
    bracket = (
        1.5 * model.h_a
        + model.h_a * math.log(big_omega / model.omega_0)
        + model.h_peak * model.delta_omega_ac
    )
    return scale * (
        4.0 * bracket / (math.pi * big_omega**2) + 8.0 * model.h_b / (math.pi * big_omega)
    )


def pi_pulse_error(chi: float) -> float:
    """eps_pi = (1 - exp(-chi)) / 2, in [0, 1/2)."""
    if chi < 0:
        raise ValueError("chi must be nonnegative")
    return 0.5 * -math.expm1(-chi)


def spam_error_from_pi(eps_pi: float) -> float:
    """Post-selected SPAM error eps_pi / (eps_pi + (1 - eps_pi)^2)."""
    if not 0 <= eps_pi < 1:
        raise ValueError("eps_pi must be in [0, 1)")
    if eps_pi == 0.0:
        return 0.0
    return eps_pi / (eps_pi + (1.0 - eps_pi) ** 2)


@dataclass(frozen=True)
class ErrorScalingFit:
    """Two-parameter fit of SPAM error against x = (kappa tau_pi)^2."""

    scale: float  # c: chi per unit x
    intercept: float  # b: x-independent error floor
    covariance: np.ndarray  # 2x2, order (scale, intercept)

    @property
    def scale_err(self) -> float:
        return float(np.sqrt(self.covariance[0, 0]))

    @property
    def intercept_err(self) -> float:
        return float(np.sqrt(self.covariance[1, 1]))

    def predict(self, x: np.ndarray) -> np.ndarray:
        chi = self.scale * np.asarray(x, dtype=float)
        eps = 0.5 * -np.expm1(-chi)
        return self.intercept + eps / (eps + (1.0 - eps) ** 2)


def _scaling_model(c: float, b: float, x: np.ndarray) -> np.ndarray:
    eps = 0.5 * -np.expm1(-c * x)
    return b + eps / (eps + (1.0 - eps) ** 2)


def fit_error_scaling(points) -> ErrorScalingFit:
    """Fit eps(x) = b + spam(pi(c x)) with x = kappa^2 tau_pi^2.

    points: iterable of (kappa, tau_pi, eps_spam).  Damped Gauss-Newton
    (Levenberg-Marquardt) with an analytic Jacobian; initialized with
    b = min eps and c from the two extreme-x points.
    """
    pts = [(float(k), float(t), float(e)) for k, t, e in points]
    if len(pts) < 3:
        raise ValueError("need at least 3 points")
    x = np.array([(k * t) ** 2 for k, t, _ in pts])
    y = np.array([e for _, _, e in pts])

    b0 = float(y.min())
    i_lo, i_hi = int(np.argmin(x)), int(np.argmax(x))
    if x[i_hi] > x[i_lo]:
        c0 = max((y[i_hi] - y[i_lo]) / (x[i_hi] - x[i_lo]), 0.0)
    else:
        c0 = 0.0

    def resid(p):
        return _scaling_model(p[0], p[1], x) - y

    def jac(p):
        c, _ = p
        eps = 0.5 * -np.expm1(-c * x)
        denom = eps + (1.0 - eps) ** 2
        # d(spam)/d(eps) and d(eps)/dc by the chain rule
        dspam_deps = ((1.0 - eps) * (1.0 + eps)) / denom**2
        deps_dc = 0.5 * x * np.exp(-c * x)
        return np.column_stack([dspam_deps * deps_dc, np.ones_like(x)])

    res = optimize.least_squares(resid, [c0, b0], jac=jac, method="lm", max_nfev=2000)
    if not res.success:
        raise RuntimeError(f"error-scaling fit did not converge: {res.message}")
    dof = max(len(x) - 2, 1)
    s2 = 2.0 * res.cost / dof
    jtj = res.jac.T @ res.jac
    cov = s2 * np.linalg.pinv(jtj)
    return ErrorScalingFit(scale=float(res.x[0]), intercept=float(res.x[1]), covariance=cov)


def _log_poisson_pmf(k: int, lam: float) -> float:
    return k * math.log(lam) - lam - math.lgamma(k + 1)


def _poisson_cdf(k: int, lam: float) -> float:
    """P[Poisson(lam) <= k] by direct log-space summation (lam <= ~30 here)."""
    if lam == 0.0:
        return 1.0
    return sum(math.exp(_log_poisson_pmf(i, lam)) for i in range(0, k + 1))


@dataclass(frozen=True)
class ErrorBudget:
    """Secondary error estimates, each reported separately."""

    decay: float  # spontaneous decay during the longest shelved interval
    off_resonant: float  # nearest-spectator excitation probability
    discrimination: float  # bright/dark Poisson threshold misclassification

    @property
    def total(self) -> float:
        return self.decay + self.off_resonant + self.discrimination


def error_budget(
    shelf_time: float,
    lifetime: float,
    omega_off: float,
    delta: float,
    lambda_dark: float,
    lambda_bright: float,
    threshold: int,
) -> ErrorBudget:
    """Three secondary error sources:

    decay          = 1 - exp(-shelf_time/lifetime)
    off_resonant   = omega^2 / (omega^2 + delta^2)   (omega, delta in Hz)
    discrimination = P[Poisson(lambda_dark) > threshold]
                   + P[Poisson(lambda_bright) <= threshold]
    """
    if shelf_time < 0 or lifetime <= 0:
        raise ValueError("times must be positive")
    if threshold < 0 or threshold != int(threshold):
        raise ValueError("threshold must be a nonnegative integer")
    decay = -math.expm1(-shelf_time / lifetime)
    off_res = omega_off**2 / (omega_off**2 + delta**2) if (omega_off or delta) else 0.0
    disc = (1.0 - _poisson_cdf(int(threshold), lambda_dark)) + _poisson_cdf(
        int(threshold), lambda_bright
    )
    return ErrorBudget(decay=decay, off_resonant=off_res, discrimination=disc)


def reference_scaling_points(fixtures_dir=None) -> list[tuple[float, float, float]]:
    """(kappa, tau_pi, eps_spam) triples from the bundled per-transition
    table, for the encoded metastable states (|0> carries no pulse)."""
    from .fixtures import load_transition_params

    out = []
    for row in load_transition_params(fixtures_dir):
        if row.index in (None, 0):
            continue
        if None in (row.kappa, row.tau_pi_us, row.spam_error):
            continue
        out.append((row.kappa, row.tau_pi_us * 1e-6, row.spam_error))
    return out


def load_scaling_points(path) -> list[tuple[float, float, float]]:
    """Read (kappa, tau_pi, eps_spam) rows; CSV columns kappa_MHz_per_G,
    tau_pi_us, eps_spam.  tau is converted from microseconds to seconds."""
    out = []
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        missing = {"kappa_MHz_per_G", "tau_pi_us", "eps_spam"} - set(reader.fieldnames or ())
        if missing:
            raise ValueError(f"scaling-point CSV missing columns: {sorted(missing)}")
        for row in reader:
            out.append(
                (
                    float(row["kappa_MHz_per_G"]),
                    float(row["tau_pi_us"]) * 1e-6,
                    float(row["eps_spam"]),
                )
            )
    return out


def write_scaling_points(path, points) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["kappa_MHz_per_G", "tau_pi_us", "eps_spam"])
        for k, t, e in points:
            w.writerow([f"{k:.10g}", f"{t * 1e6:.10g}", f"{e:.10g}"])
