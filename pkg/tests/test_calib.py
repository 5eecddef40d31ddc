import math

import numpy as np
import pytest

from ba137qudit.atomstruct import field_sensitivity
from ba137qudit.calib import (
    CalSnapshot,
    FitError,
    FrequencyScan,
    RabiTrace,
    detuned_rabi,
    estimate_field,
    fit_calibration,
    fit_lorentzian,
    fit_rabi_flop,
    paper13_transition_refs,
    predict_frequency,
    ratio_pi_calibration,
    reference_trio,
    scan_plan,
    select_references,
    simulate_splittings,
    synthetic_snapshot,
)
from ba137qudit.fixtures import load_transition_params
from ba137qudit.transitions import PAPER13_GEOMETRY, strength_table


def lorentzian(f, f0, w, a, c):
    return a * w**2 / ((np.asarray(f) - f0) ** 2 + w**2) + c


class TestLorentzian:
    def test_exact_recovery(self):
        f = np.arange(-10.0, 11.0)
        y = lorentzian(f, 1.7, 5.0, 0.5, 0.02)
        fit = fit_lorentzian(FrequencyScan(f, y, np.full(len(f), 400)))
        assert fit.center_khz == pytest.approx(1.7, abs=1e-9)
        assert fit.width_khz == pytest.approx(5.0, abs=1e-7)
        assert not fit.at_boundary

    def test_mirrored_samples_center_exact(self):
        f = np.arange(-10.0, 11.0)
        y = lorentzian(f, 0.0, 4.0, 0.5, 0.0)
        fit = fit_lorentzian(FrequencyScan(f, y, np.full(len(f), 400)))
        assert fit.center_khz == pytest.approx(0.0, abs=1e-8)

    def test_noisy_scan_half_khz(self):
        # uniform +-0.02 probability noise on a 21-point, 1 kHz scan:
        # the center stays within 0.5 kHz (tolerance frozen from a
        # 200-seed study of this exact configuration)
        rng = np.random.default_rng(2024)
        f = np.arange(-10.0, 11.0)
        misses = 0
        for _ in range(200):
            y = lorentzian(f, 0.35, 5.0, 0.5, 0.02) + rng.uniform(-0.02, 0.02, len(f))
            y = np.clip(y, 0.0, 1.0)
            fit = fit_lorentzian(FrequencyScan(f, y, np.full(len(f), 400)))
            if abs(fit.center_khz - 0.35) > 0.5:
                misses += 1
        assert misses == 0

    def test_boundary_flagged(self):
        f = np.arange(0.0, 21.0)
        y = lorentzian(f, 0.5, 5.0, 0.5, 0.02)
        fit = fit_lorentzian(FrequencyScan(f, y, np.full(len(f), 400)))
        assert fit.at_boundary

    def test_shift_equivariance(self):
        f = np.arange(-10.0, 11.0)
        y = lorentzian(f, 1.2, 5.0, 0.45, 0.03)
        base = fit_lorentzian(FrequencyScan(f, y, np.full(len(f), 400)))
        shifted = fit_lorentzian(FrequencyScan(f + 123.0, y, np.full(len(f), 400)))
        assert shifted.center_khz - base.center_khz == pytest.approx(123.0, abs=1e-8)

    def test_too_few_points(self):
        with pytest.raises(FitError):
            fit_lorentzian(FrequencyScan([0, 1, 2], [0.1, 0.5, 0.1], [10, 10, 10]))


class TestCalibrationModel:
    def snapshots(self, bs):
        return [synthetic_snapshot(b) for b in bs]

    def test_predicts_within_1khz_inside_drift_window(self):
        history = self.snapshots([8.33, 8.35, 8.37])
        model = fit_calibration(history)
        for b_test in (8.34, 8.345, 8.36):
            snap = synthetic_snapshot(b_test)
            for n in range(1, 13):
                pred = predict_frequency(model, snap.f_offset, snap.f_low, snap.f_up, n)
                assert abs(pred - snap.freqs[n]) < 1e-3  # MHz

    def test_exact_on_strictly_linear_data(self):
        model_freqs = {1: (0.5, 3.0), 2: (-0.2, 7.0)}
        history = []
        for df in (99.8, 100.0, 100.3):
            freqs = {n: a1 * df + 5.0 + a2 for n, (a1, a2) in model_freqs.items()}
            history.append(CalSnapshot(f_offset=5.0, f_low=0.0, f_up=df, freqs=freqs))
        model = fit_calibration(history)
        snap = history[1]
        for n in model_freqs:
            pred = predict_frequency(model, snap.f_offset, snap.f_low, snap.f_up, n)
            assert pred == pytest.approx(snap.freqs[n], abs=1e-9)

    def test_rank_deficiency(self):
        snap = synthetic_snapshot(8.35)
        with pytest.raises(FitError):
            fit_calibration([snap, snap])

    def test_offset_like_transition_has_zero_slope(self):
        # |10> is the offset reference itself: its kappa equals the offset's,
        # so the fitted Delta-f slope vanishes
        history = self.snapshots([8.33, 8.34, 8.35, 8.36, 8.37])
        model = fit_calibration(history)
        assert abs(model.a1[10]) < 1e-4

    def test_extrapolation_degrades(self):
        history = self.snapshots([8.33, 8.35, 8.37])
        model = fit_calibration(history)
        snap = synthetic_snapshot(8.40)
        worst_in = 0.0
        for b_test in (8.34, 8.36):
            s = synthetic_snapshot(b_test)
            for n in range(1, 13):
                pred = predict_frequency(model, s.f_offset, s.f_low, s.f_up, n)
                worst_in = max(worst_in, abs(pred - s.freqs[n]))
        worst_out = max(
            abs(predict_frequency(model, snap.f_offset, snap.f_low, snap.f_up, n) - snap.freqs[n])
            for n in range(1, 13)
        )
        assert worst_out > worst_in

    def test_json_roundtrip(self, tmp_path):
        model = fit_calibration(self.snapshots([8.33, 8.35, 8.37]))
        model.to_json(tmp_path / "cal.json")
        from ba137qudit.calib import CalibrationModel

        back = CalibrationModel.from_json(tmp_path / "cal.json")
        assert back.a1 == pytest.approx(model.a1)
        assert back.a2 == pytest.approx(model.a2)


class TestEstimateField:
    def refs(self):
        trans = paper13_transition_refs()
        return [trans[n] for n in (1, 3, 5, 10)]

    def test_round_trip(self):
        pairs = self.refs()
        measured = simulate_splittings(pairs, 8.35)
        est = estimate_field(measured)
        assert est.B == pytest.approx(8.35, abs=5e-4)

    def test_single_transition_rejected(self):
        pairs = self.refs()[:1]
        measured = simulate_splittings(pairs, 8.35)
        with pytest.raises(ValueError):
            estimate_field(measured)

    def test_perturbed_within_10mg(self):
        rng = np.random.default_rng(5)
        pairs = self.refs()
        measured = simulate_splittings(pairs, 8.35)
        for _ in range(5):
            noisy = {k: v + rng.uniform(-1e-3, 1e-3) for k, v in measured.items()}
            est = estimate_field(noisy)
            assert abs(est.B - 8.35) < 0.01


class TestRabiFit:
    def trace(self, A, C, t_pi, n=251, tmax=500.0):
        t = np.linspace(0.0, tmax, n)
        p = A * np.sin(np.pi * t / (2 * t_pi)) ** 2 + C
        return RabiTrace(t, np.clip(p, 0, 1), np.full(n, 100))

    def test_noiseless_recovery(self):
        trace = self.trace(0.95, 0.02, 40.0)
        fit = fit_rabi_flop(trace)
        assert fit.eps_pi == pytest.approx(0.03, abs=1e-9)
        assert fit.t_peak_us == pytest.approx(40.0, abs=1e-6)

    def test_perfect_flop(self):
        fit = fit_rabi_flop(self.trace(1.0, 0.0, 60.0))
        assert fit.eps_pi == pytest.approx(0.0, abs=1e-9)

    def test_binomial_noise_coverage(self):
        # 100 shots/point, true eps = 0.05: recovered within +-0.02 for at
        # least 95% of seeds (frozen from this 100-seed study)
        rng = np.random.default_rng(77)
        hits = 0
        n_trials = 100
        for _ in range(n_trials):
            t = np.arange(0.0, 160.0, 1.0)
            p_true = 0.93 * np.sin(np.pi * t / (2 * 50.0)) ** 2 + 0.02
            y = rng.binomial(100, p_true) / 100.0
            fit = fit_rabi_flop(RabiTrace(t, y, np.full(len(t), 100)))
            if abs(fit.eps_pi - 0.05) <= 0.02:
                hits += 1
        assert hits >= 95

    def test_shift_equivariance(self):
        # translating the time axis moves t_peak identically
        t = np.linspace(0.0, 200.0, 201)
        p = 0.9 * np.sin(np.pi * t / (2 * 45.0)) ** 2 + 0.03
        base = fit_rabi_flop(RabiTrace(t, p, np.full(len(t), 100)))
        # same physical curve sampled on a shifted grid
        shift = 10.0
        t2 = t + shift
        p2 = 0.9 * np.sin(np.pi * (t2 - shift) / (2 * 45.0)) ** 2 + 0.03
        moved = fit_rabi_flop(RabiTrace(t2, p2, np.full(len(t), 100)))
        assert moved.t_peak_us - base.t_peak_us == pytest.approx(shift, abs=1e-6)
        assert moved.eps_pi == pytest.approx(base.eps_pi, abs=1e-9)

    def test_no_peak(self):
        t = np.linspace(0.0, 10.0, 20)
        with pytest.raises(FitError):
            fit_rabi_flop(RabiTrace(t, np.full(20, 0.01), np.full(20, 100)))


class TestRatioCalibration:
    def table(self):
        return strength_table(8.35, PAPER13_GEOMETRY)

    def test_anchor_identity(self):
        table = self.table()
        anchor = ((2, 2), (4, 4))  # q = +2
        measured = {2: (anchor, 2 * math.pi * 10e3)}
        out = ratio_pi_calibration(measured, table, [anchor])
        omega, tau = out[anchor]
        assert omega == pytest.approx(2 * math.pi * 10e3, rel=1e-12)
        assert tau == pytest.approx(math.pi / omega, rel=1e-12)

    def test_same_q_prediction_matches_table_ratio(self):
        table = self.table()
        anchor = ((2, 2), (4, 4))
        target = ((1, -1), (1, 1))  # also q = +2, from a different ground
        measured = {2: (anchor, 1e5)}
        out = ratio_pi_calibration(measured, table, [target])
        want = 1e5 * table.value((1, 1), (1, -1)) / table.value((4, 4), (2, 2))
        assert out[target][0] == pytest.approx(want, rel=1e-12)
        # the geometric factor cancels: the ratio is independent of gamma/phi
        from ba137qudit.transitions import LaserGeometry

        other = strength_table(8.35, LaserGeometry(phi=30.0, gamma=10.0))
        out2 = ratio_pi_calibration({2: (anchor, 1e5)}, other, [target])
        assert out2[target][0] == pytest.approx(out[target][0], rel=1e-9)

    def test_cross_q_anchor_refused(self):
        table = self.table()
        with pytest.raises(ValueError):
            ratio_pi_calibration({1: (((2, 2), (4, 4)), 1e5)}, table, [])

    def test_missing_q_anchor(self):
        table = self.table()
        measured = {2: (((2, 2), (4, 4)), 1e5)}
        with pytest.raises(KeyError):
            ratio_pi_calibration(measured, table, [((2, 2), (4, 1))])  # q = -1

    def test_linearity_in_anchor(self):
        table = self.table()
        anchor = ((2, 2), (4, 4))
        target = ((1, -1), (1, 1))
        out1 = ratio_pi_calibration({2: (anchor, 1e5)}, table, [target])
        out2 = ratio_pi_calibration({2: (anchor, 2e5)}, table, [target])
        assert out2[target][0] == pytest.approx(2 * out1[target][0], rel=1e-12)
        assert out2[target][1] == pytest.approx(out1[target][1] / 2, rel=1e-12)

    def test_zero_strength_anchor_refused(self):
        # synthetic table with a vanishing entry exercises the error path
        import numpy as _np

        from ba137qudit.angmom import HalfInt
        from ba137qudit.transitions import StrengthTable

        table = StrengthTable(
            geometry=PAPER13_GEOMETRY,
            B=8.35,
            d_labels=((HalfInt(8), HalfInt(8)),),
            s_labels=((HalfInt(4), HalfInt(4)),),
            values=_np.zeros((1, 1)),
        )
        with pytest.raises(ValueError):
            ratio_pi_calibration({2: (((2, 2), (4, 4)), 1e5)}, table, [])


class TestDetunedRabi:
    def test_on_resonance(self):
        assert detuned_rabi(2.5e3, 0.0) == 2.5e3

    def test_weakest_transition_shift(self):
        # 1 kHz frequency resolution against a 2.5 kHz Rabi frequency
        # shifts the effective rate by 7.7%, which is why the ratio scheme
        # needs finer frequency control than this apparatus had
        got = detuned_rabi(2.5e3, 1e3)
        assert got == pytest.approx(2.6926e3, abs=0.05)
        assert (got - 2.5e3) / 2.5e3 == pytest.approx(0.077, abs=0.001)

    def test_zero_rabi(self):
        assert detuned_rabi(0.0, -3.0) == 3.0


class TestReferenceSelection:
    def test_reference_kappas(self):
        kappas = {}
        for row in load_transition_params():
            if row.kappa is not None and row.index is not None:
                kappas[row.index] = row.kappa
        offset, low, up = select_references(kappas)
        assert offset == 10  # D:F2:m1, |kappa| = 0.3026
        assert low == 5  # most negative kappa among encoded transitions
        assert up == 1

    def test_published_trio_sensitivities(self):
        refs = reference_trio()
        k_off = field_sensitivity(*refs["offset"], 8.35)
        k_low = field_sensitivity(*refs["low"], 8.35)
        k_up = field_sensitivity(*refs["up"], 8.35)
        assert abs(k_off) < 0.5
        assert k_low == pytest.approx(-2.7992, abs=1e-3)
        assert k_up == pytest.approx(2.7992, abs=1e-3)

    def test_needs_three(self):
        with pytest.raises(ValueError):
            select_references({"a": 1.0, "b": 2.0})


class TestScanPlan:
    def test_shapes(self):
        plan = scan_plan()
        assert len(plan.coarse_offsets) == 11
        assert plan.coarse_offsets[0] == -50.0
        fine = plan.fine_offsets(-20.0)
        assert len(fine) == 21
        assert fine[0] == -30.0 and fine[-1] == -10.0


class TestPredictFrequencyErrors:
    def test_unknown_transition(self):
        model = fit_calibration([synthetic_snapshot(b) for b in (8.33, 8.37)])
        with pytest.raises(KeyError):
            predict_frequency(model, 0.0, 0.0, 1.0, 99)


class TestEstimateFieldPrior:
    def test_prior_interval_respected(self):
        trans = paper13_transition_refs()
        pairs = [trans[n] for n in (1, 3, 5, 10)]
        measured = simulate_splittings(pairs, 8.35)
        est = estimate_field(measured, prior=(5.0, 12.0))
        assert est.B == pytest.approx(8.35, abs=1e-3)


class TestRabiWindowTooThin:
    def test_under_five_points(self):
        # peak at 4 us sampled every 2 us: only 3 points inside [2, 6]
        t = np.arange(0.0, 20.0, 2.0)
        p = 0.9 * np.sin(np.pi * t / (2 * 4.0)) ** 2 + 0.02
        with pytest.raises(FitError):
            fit_rabi_flop(RabiTrace(t, p, np.full(len(t), 100)))
