"""Shelving-based qudit SPAM protocol: plans, Monte Carlo, and analysis.

The protocol encodes |0> in a fluorescing 6S1/2 state and |1>..|d-1> in
metastable 5D5/2 states (or, for encodings beyond 13 levels, additional
6S1/2 states that get shelved to reserved 5D5/2 parking states first).
One measurement is a fluorescence check for |0>, then alternating
de-shelve pulse / fluorescence check for each encoded state in ascending
index order.  A de-shelve pulse is simultaneously a re-shelve pulse for
population already read out, which is what makes first-bright
interpretation single-shot.

The stochastic model is classical: every pi pulse is a Bernoulli swap
between its two endpoint states with failure probability eps_pi, every
fluorescence check a Bernoulli read flip, optical-pumping failure and
spontaneous decay park the ion in an inert bright ground state outside
the encoding.  Coherences play no role in SPAM statistics at this scale.
An exact branch-enumeration evaluator (``enumerate_outcomes``) provides
the distribution the Monte Carlo must converge to.
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass, field
from typing import Iterable, Mapping, NamedTuple, Sequence, Union

import numpy as np

from .angmom import HalfInt
from .fixtures import load_confusion_fixture, load_transition_params
from .transitions import PAPER13_D_STATES

__all__ = [
    "AtomicState",
    "QuditEncoding",
    "ErrorParams",
    "ShotRecord",
    "ConfusionMatrix",
    "PulseStep",
    "CheckStep",
    "MeasurementPlan",
    "Timings",
    "TimingBudget",
    "ScalingCurves",
    "EncodingError",
    "PlanError",
    "NullRowError",
    "parse_atomic_state",
    "paper13_encoding",
    "twenty_five_level_encoding",
    "build_measurement_sequence",
    "simulate_shot",
    "interpret",
    "run_experiment",
    "enumerate_outcomes",
    "post_select",
    "average_fidelity",
    "scaling_analysis",
    "timing_budget",
    "reference_timings",
    "error_params_from_reference",
    "error_params_to_json",
    "error_params_from_json",
    "read_confusion_csv",
    "write_confusion_csv",
    "load_reference_confusion",
    "intervals_from_timings",
]


class EncodingError(ValueError):
    """The qudit encoding violates a structural invariant."""


class PlanError(ValueError):
    """No valid pulse plan exists for the encoding."""


class NullRowError(ValueError):
    """A confusion-matrix row has no non-Null mass to renormalize."""


class MissingTransitionError(KeyError):
    """ErrorParams carries no pi-pulse error for a required transition."""


class AtomicState(NamedTuple):
    """One stable or metastable state: level side 'S' or 'D' plus (F~, m)."""

    level: str
    F: HalfInt
    m: HalfInt

    @property
    def key(self) -> str:
        return f"{self.level}:F{self.F}:m{self.m}"

    def __str__(self) -> str:
        return self.key


def _S(f, m) -> AtomicState:
    return AtomicState("S", HalfInt.coerce(f), HalfInt.coerce(m))


def _D(f, m) -> AtomicState:
    return AtomicState("D", HalfInt.coerce(f), HalfInt.coerce(m))


def parse_atomic_state(key: str) -> AtomicState:
    """Parse 'S:F2:m2' / 'D:F4:m-3' style keys (fractions like 3/2 allowed)."""

    def half(txt: str) -> HalfInt:
        if "/" in txt:
            num, den = txt.split("/")
            if int(den) != 2:
                raise ValueError(f"bad half-integer {txt!r}")
            return HalfInt(int(num))
        return HalfInt(2 * int(txt))

    try:
        level, ftxt, mtxt = key.split(":")
        if level not in ("S", "D") or not ftxt.startswith("F") or not mtxt.startswith("m"):
            raise ValueError
        return AtomicState(level, half(ftxt[1:]), half(mtxt[1:]))
    except ValueError as exc:
        raise ValueError(f"cannot parse atomic state key {key!r}") from exc


ALL_S_STATES: tuple[AtomicState, ...] = tuple(
    _S(f, m) for f in (1, 2) for m in range(f, -f - 1, -1)
)
ALL_D_STATES: tuple[AtomicState, ...] = tuple(
    _D(f, m) for f in (1, 2, 3, 4) for m in range(f, -f - 1, -1)
)

MAX_LEVELS = 25  # 32 stable/metastable states minus 7 reserved parking slots


def _quadrupole_allowed(s_state: AtomicState, d_state: AtomicState) -> bool:
    return abs(s_state.m.twice - d_state.m.twice) <= 4


@dataclass(eq=False)
class QuditEncoding:
    """Ordered computational states plus the shelving bookkeeping.

    states[0] must be a 6S1/2 state.  Any other 6S1/2-encoded state needs a
    reserved (unencoded) 5D5/2 parking state to be shelved into during
    measurement.  D-encoded states de-shelve into ``deshelve_targets``
    (default: the |0> state, as in the 13-level scheme).
    """

    name: str
    states: tuple[AtomicState, ...]
    parking: Mapping[AtomicState, AtomicState] = field(default_factory=dict)
    deshelve_targets: Mapping[AtomicState, AtomicState] = field(default_factory=dict)

    def __post_init__(self):
        self.states = tuple(self.states)
        if not self.states:
            raise EncodingError("encoding needs at least one state")
        if len(set(self.states)) != len(self.states):
            raise EncodingError("encoded states must be distinct")
        if len(self.states) > MAX_LEVELS:
            raise EncodingError(f"at most {MAX_LEVELS} levels are distinguishable")
        if self.states[0].level != "S":
            raise EncodingError("state |0> must be a 6S1/2 state")
        encoded = set(self.states)
        for s_state in self.states[1:]:
            if s_state.level != "S":
                continue
            park = self.parking.get(s_state)
            if park is None:
                raise EncodingError(f"6S-encoded state {s_state} has no parking state")
            if park.level != "D":
                raise EncodingError(f"parking state {park} must be a 5D5/2 state")
            if park in encoded:
                raise EncodingError(f"parking state {park} is itself encoded")
        if len(set(self.parking.values())) != len(self.parking):
            raise EncodingError("parking states must be distinct")

    @property
    def d(self) -> int:
        return len(self.states)

    def index_of(self, state: AtomicState) -> int:
        return self.states.index(state)

    def deshelve_target(self, d_state: AtomicState) -> AtomicState:
        return self.deshelve_targets.get(d_state, self.states[0])


def paper13_encoding() -> QuditEncoding:
    """The 13-level encoding: |0> = 6S1/2(F~=2, m=2) plus the twelve 5D5/2
    states reachable from it with relative strength above 0.03."""
    states = (_S(2, 2),) + tuple(
        AtomicState("D", f, m) for f, m in PAPER13_D_STATES
    )
    return QuditEncoding(name="paper13", states=states)


def twenty_five_level_encoding() -> QuditEncoding:
    """A full 25-level encoding: all 8 ground states plus 17 metastable
    states, with the remaining 7 metastable states reserved as parking
    slots for shelving the non-|0> ground states.

    The distinguishability ceiling is exactly 32 - 7 = 25: each encoded
    ground state other than |0> consumes one unencoded metastable state.
    The specific choice of parking/encoded split here is one workable
    assignment (every shelve and de-shelve pulse satisfies |Delta m| <= 2
    and every state is preparable from |0> within three pulses); others
    exist.
    """
    s_states = [_S(2, 2), _S(2, 1), _S(2, 0), _S(2, -1), _S(2, -2),
                _S(1, 1), _S(1, 0), _S(1, -1)]
    parking = {
        _S(2, 1): _D(4, 3),
        _S(2, 0): _D(4, 2),
        _S(2, -1): _D(4, -3),
        _S(2, -2): _D(4, -4),
        _S(1, 1): _D(3, 3),
        _S(1, 0): _D(4, -2),
        _S(1, -1): _D(3, -3),
    }
    parked = set(parking.values())
    d_states = [d for d in ALL_D_STATES if d not in parked]
    deshelve = {
        d: _S(2, max(-2, min(2, int(float(d.m))))) for d in d_states
    }
    return QuditEncoding(
        name="full25",
        states=tuple(s_states + d_states),
        parking=parking,
        deshelve_targets=deshelve,
    )


@dataclass(frozen=True)
class PulseStep:
    """A pi pulse connecting one 6S1/2 and one 5D5/2 state."""

    s_state: AtomicState
    d_state: AtomicState

    @property
    def key(self) -> tuple[AtomicState, AtomicState]:
        return (self.s_state, self.d_state)


@dataclass(frozen=True)
class CheckStep:
    """A fluorescence check; first bright here means the given outcome."""

    outcome: int


@dataclass(eq=False)
class MeasurementPlan:
    encoding: QuditEncoding
    steps: tuple[Union[PulseStep, CheckStep], ...]
    prep_paths: tuple[tuple[PulseStep, ...], ...]  # per encoded index

    @property
    def check_outcomes(self) -> tuple[int, ...]:
        return tuple(s.outcome for s in self.steps if isinstance(s, CheckStep))

    @property
    def n_checks(self) -> int:
        return len(self.check_outcomes)

    def pulse_keys(self) -> set[tuple[AtomicState, AtomicState]]:
        keys = {s.key for s in self.steps if isinstance(s, PulseStep)}
        for path in self.prep_paths:
            keys.update(p.key for p in path)
        return keys


def _prep_path(encoding: QuditEncoding, target: AtomicState) -> tuple[PulseStep, ...]:
    """Shortest pulse path from |0> to the target over quadrupole-allowed
    S<->D hops (breadth-first over all 32 states)."""
    start = encoding.states[0]
    if target == start:
        return ()
    frontier = [(start, ())]
    seen = {start}
    while frontier:
        nxt = []
        for state, path in frontier:
            if len(path) >= 3:
                continue
            partners = ALL_D_STATES if state.level == "S" else ALL_S_STATES
            for other in partners:
                if other in seen:
                    continue
                s_state, d_state = (state, other) if state.level == "S" else (other, state)
                if not _quadrupole_allowed(s_state, d_state):
                    continue
                new_path = path + (PulseStep(s_state, d_state),)
                if other == target:
                    return new_path
                seen.add(other)
                nxt.append((other, new_path))
        frontier = nxt
    raise PlanError(
        f"{encoding.name}: state {target} is not reachable from {start} "
        "within three quadrupole pulses"
    )


def build_measurement_sequence(encoding: QuditEncoding) -> MeasurementPlan:
    """Pulse/readout plan: shelve 6S-encoded states, check |0>, then
    alternate de-shelve pulse and check in ascending state order."""
    steps: list[Union[PulseStep, CheckStep]] = []
    for n in range(1, encoding.d):
        state = encoding.states[n]
        if state.level == "S":
            pulse = PulseStep(state, encoding.parking[state])
            if not _quadrupole_allowed(*pulse.key):
                raise PlanError(
                    f"{encoding.name}: shelving {state} -> {pulse.d_state} "
                    "needs |Delta m| <= 2"
                )
            steps.append(pulse)
    steps.append(CheckStep(0))
    for n in range(1, encoding.d):
        state = encoding.states[n]
        if state.level == "S":
            pulse = PulseStep(state, encoding.parking[state])
        else:
            target = encoding.deshelve_target(state)
            pulse = PulseStep(target, state)
            if not _quadrupole_allowed(*pulse.key):
                raise PlanError(
                    f"{encoding.name}: de-shelving {state} -> {target} needs |Delta m| <= 2"
                )
        steps.append(pulse)
        steps.append(CheckStep(n))
    prep_paths = tuple(_prep_path(encoding, s) for s in encoding.states)
    return MeasurementPlan(encoding=encoding, steps=tuple(steps), prep_paths=prep_paths)


@dataclass(eq=False)
class ErrorParams:
    """Stochastic error model of one SPAM experiment.

    eps_pi maps (6S state, 5D state) pulse pairs to failure probabilities.
    ``leak`` optionally redirects a pulse to a spectator pair with the
    given probability (off-resonant crosstalk to the nearest-frequency
    transition); it defaults to off.
    """

    eps_pi: Mapping[tuple[AtomicState, AtomicState], float] = field(default_factory=dict)
    prep_error: float = 0.0
    p_dark_given_s: float = 0.0  # bright ion read as dark
    p_bright_given_d: float = 0.0  # dark ion read as bright
    decay_rate: float = 0.0  # 1/s out of the 5D5/2 level
    leak: Mapping[
        tuple[AtomicState, AtomicState], tuple[tuple[AtomicState, AtomicState], float]
    ] = field(default_factory=dict)

    def __post_init__(self):
        probs = [self.prep_error, self.p_dark_given_s, self.p_bright_given_d]
        probs += list(self.eps_pi.values())
        probs += [p for _, p in self.leak.values()]
        if any(not 0.0 <= p <= 1.0 for p in probs):
            raise ValueError("probabilities must be in [0, 1]")
        if self.decay_rate < 0:
            raise ValueError("decay_rate must be nonnegative")

    def eps(self, key: tuple[AtomicState, AtomicState]) -> float:
        try:
            return self.eps_pi[key]
        except KeyError:
            raise MissingTransitionError(
                f"no pi-pulse error for transition {key[0]} <-> {key[1]}"
            ) from None

    @classmethod
    def zero(cls, encoding: QuditEncoding) -> "ErrorParams":
        return cls.uniform(encoding, 0.0)

    @classmethod
    def uniform(cls, encoding: QuditEncoding, eps: float, **kwargs) -> "ErrorParams":
        plan = build_measurement_sequence(encoding)
        return cls(eps_pi={k: eps for k in plan.pulse_keys()}, **kwargs)


def error_params_to_json(path, errors: ErrorParams) -> None:
    doc = {
        "eps_pi": {f"{s.key}->{d.key}": p for (s, d), p in sorted(
            errors.eps_pi.items(), key=lambda kv: (kv[0][0].key, kv[0][1].key)
        )},
        "prep_error": errors.prep_error,
        "p_dark_given_s": errors.p_dark_given_s,
        "p_bright_given_d": errors.p_bright_given_d,
        "decay_rate": errors.decay_rate,
        "leak": {
            f"{k[0].key}->{k[1].key}": {
                "spectator": f"{sp[0].key}->{sp[1].key}",
                "probability": p,
            }
            for k, (sp, p) in errors.leak.items()
        },
    }
    with open(path, "w") as fh:
        json.dump(doc, fh, indent=2, sort_keys=True)
        fh.write("\n")


def _parse_pair(key: str) -> tuple[AtomicState, AtomicState]:
    a, b = key.split("->")
    return parse_atomic_state(a), parse_atomic_state(b)


def error_params_from_json(path) -> ErrorParams:
    with open(path) as fh:
        doc = json.load(fh)
    leak = {
        _parse_pair(k): (_parse_pair(v["spectator"]), v["probability"])
        for k, v in doc.get("leak", {}).items()
    }
    return ErrorParams(
        eps_pi={_parse_pair(k): p for k, p in doc.get("eps_pi", {}).items()},
        prep_error=doc.get("prep_error", 0.0),
        p_dark_given_s=doc.get("p_dark_given_s", 0.0),
        p_bright_given_d=doc.get("p_bright_given_d", 0.0),
        decay_rate=doc.get("decay_rate", 0.0),
        leak=leak,
    )


def error_params_from_reference(fixtures_dir=None, **kwargs) -> ErrorParams:
    """eps_pi from the bundled per-transition reference table (13-level
    encoding, single-transition-error column)."""
    ground = _S(2, 2)
    eps = {}
    for row in load_transition_params(fixtures_dir):
        if row.index is None or row.index == 0:
            continue
        if row.single_transition_error is None:
            continue
        eps[(ground, parse_atomic_state(row.atomic_state))] = row.single_transition_error
    return ErrorParams(eps_pi=eps, **kwargs)


@dataclass(frozen=True)
class ShotRecord:
    """Outcome of one simulated experiment: the ordered fluorescence reads."""

    prepared: int
    reads: tuple[bool, ...]


_OTHER_GROUND = AtomicState("S", HalfInt(-2), HalfInt(0))  # inert bright sentinel


def _decay_probs(
    errors: ErrorParams, intervals, n_checks: int
) -> np.ndarray:
    """Per-check decay probabilities (0 for the first check)."""
    if np.isscalar(intervals):
        ivals = np.full(n_checks, float(intervals))
    else:
        ivals = np.asarray(list(intervals), dtype=float)
        if len(ivals) != n_checks:
            raise ValueError(f"need {n_checks} check intervals, got {len(ivals)}")
    probs = -np.expm1(-errors.decay_rate * ivals)
    probs[0] = 0.0
    return probs


def simulate_shot(
    prepared: int,
    encoding: QuditEncoding,
    errors: ErrorParams,
    rng: np.random.Generator,
    plan: MeasurementPlan | None = None,
    intervals: float | Sequence[float] = 0.0,
) -> ShotRecord:
    """Scalar reference simulation of one experiment.

    ``run_experiment`` uses a vectorized kernel with identical semantics;
    both are checked against the exact enumerator.
    """
    if plan is None:
        plan = build_measurement_sequence(encoding)
    if not 0 <= prepared < encoding.d:
        raise ValueError(f"prepared index {prepared} out of range")
    decay_p = _decay_probs(errors, intervals, plan.n_checks)

    state = encoding.states[0]
    if errors.prep_error > 0 and rng.random() < errors.prep_error:
        state = _OTHER_GROUND
    if prepared != 0 and state == encoding.states[0]:
        path = plan.prep_paths[prepared]
        success = 1.0
        for pulse in path:
            success *= 1.0 - errors.eps(pulse.key)
        if rng.random() < success:
            state = encoding.states[prepared]

    reads: list[bool] = []
    check_idx = 0
    for step in plan.steps:
        if isinstance(step, PulseStep):
            key = step.key
            if key in errors.leak:
                spectator, p_leak = errors.leak[key]
                if rng.random() < p_leak:
                    key = spectator
                    step = PulseStep(*spectator)
            if state == step.s_state:
                if rng.random() >= errors.eps(key):
                    state = step.d_state
            elif state == step.d_state:
                if rng.random() >= errors.eps(key):
                    state = step.s_state
        else:
            if decay_p[check_idx] > 0 and state.level == "D":
                if rng.random() < decay_p[check_idx]:
                    state = _OTHER_GROUND
            bright = state.level == "S"
            flip = errors.p_dark_given_s if bright else errors.p_bright_given_d
            if flip > 0 and rng.random() < flip:
                bright = not bright
            reads.append(bright)
            check_idx += 1
    return ShotRecord(prepared=prepared, reads=tuple(reads))


def interpret(
    record_or_reads,
    mode: str = "first-bright",
    check_outcomes: Sequence[int] | None = None,
):
    """Map a read sequence to an outcome index, or None for Null.

    first-bright: the first bright check decides; strict-single-bright:
    additionally Null whenever more than one check reads bright.
    """
    reads = record_or_reads.reads if isinstance(record_or_reads, ShotRecord) else tuple(record_or_reads)
    if mode not in ("first-bright", "strict-single-bright"):
        raise ValueError(f"unknown interpretation mode {mode!r}")
    n_bright = sum(reads)
    if n_bright == 0:
        return None
    if mode == "strict-single-bright" and n_bright > 1:
        return None
    first = reads.index(True)
    if check_outcomes is None:
        return first
    return check_outcomes[first]


@dataclass(eq=False)
class ConfusionMatrix:
    """Prepared x measured probability table, optionally with a Null column."""

    probs: np.ndarray  # (n_prepared, n_outcomes [+1 Null])
    shots: np.ndarray  # effective shots per prepared row
    has_null: bool

    def __post_init__(self):
        self.probs = np.asarray(self.probs, dtype=float)
        self.shots = np.asarray(self.shots)
        if self.probs.ndim != 2 or len(self.shots) != self.probs.shape[0]:
            raise ValueError("probs must be 2-D with one shots entry per row")

    @classmethod
    def from_counts(cls, counts: np.ndarray, has_null: bool) -> "ConfusionMatrix":
        counts = np.asarray(counts)
        shots = counts.sum(axis=1)
        if np.any(shots == 0):
            raise ValueError("every prepared state needs at least one shot")
        return cls(probs=counts / shots[:, None], shots=shots, has_null=has_null)

    @property
    def n_prepared(self) -> int:
        return self.probs.shape[0]

    @property
    def n_outcomes(self) -> int:
        return self.probs.shape[1] - (1 if self.has_null else 0)

    def null_column(self) -> np.ndarray:
        if not self.has_null:
            raise ValueError("matrix has no Null column")
        return self.probs[:, -1]

    def diagonal(self) -> np.ndarray:
        return np.array([self.probs[i, i] for i in range(self.n_prepared)])


def run_experiment(
    encoding: QuditEncoding,
    errors: ErrorParams,
    shots_per_state: int,
    seed: int,
    mode: str = "first-bright",
    intervals: float | Sequence[float] = 0.0,
    workers: int = 1,
    chunk: int = 1 << 16,
) -> ConfusionMatrix:
    """Monte-Carlo confusion matrix with the Null column.

    Shots are simulated in fixed-size chunks; each chunk draws from an
    independent substream seeded by (seed, prepared, chunk index), so the
    result is identical for any worker count or schedule.
    """
    if shots_per_state < 1:
        raise ValueError("shots_per_state must be >= 1")
    if mode not in ("first-bright", "strict-single-bright"):
        raise ValueError(f"unknown interpretation mode {mode!r}")
    plan = build_measurement_sequence(encoding)
    compiled = _compile_plan(encoding, plan, errors)
    decay_p = _decay_probs(errors, intervals, plan.n_checks)

    tasks = []
    for prepared in range(encoding.d):
        n_chunks = (shots_per_state + chunk - 1) // chunk
        for c in range(n_chunks):
            n = min(chunk, shots_per_state - c * chunk)
            tasks.append((prepared, c, n))

    counts = np.zeros((encoding.d, encoding.d + 1), dtype=np.int64)

    def run_task(task):
        prepared, c, n = task
        rng = np.random.default_rng(np.random.SeedSequence((seed, prepared, c)))
        return prepared, _simulate_chunk(compiled, decay_p, errors, prepared, n, rng, mode)

    if workers > 1:
        from concurrent.futures import ThreadPoolExecutor

        with ThreadPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(run_task, tasks))
    else:
        results = [run_task(t) for t in tasks]
    for prepared, chunk_counts in results:
        counts[prepared] += chunk_counts
    return ConfusionMatrix.from_counts(counts, has_null=True)


def _simulate_chunk(
    cp: "_CompiledPlan",
    decay_p: np.ndarray,
    errors: ErrorParams,
    prepared: int,
    n: int,
    rng: np.random.Generator,
    mode: str,
) -> np.ndarray:
    """Vectorized counterpart of simulate_shot for one substream chunk."""
    state = np.full(n, cp.start_code, dtype=np.int64)
    if errors.prep_error > 0:
        state[rng.random(n) < errors.prep_error] = cp.other_code
    if prepared != 0:
        moves = (state == cp.start_code) & (rng.random(n) < cp.prep_success[prepared])
        state[moves] = cp.prep_target[prepared]

    n_checks = len(cp.check_outcomes)
    reads = np.zeros((n, n_checks), dtype=bool)
    ci = 0
    for step in cp.steps:
        if step[0] == "check":
            if decay_p[ci] > 0:
                decayed = cp.is_d_level[state] & (rng.random(n) < decay_p[ci])
                state[decayed] = cp.other_code
            bright = ~cp.is_d_level[state]
            if errors.p_dark_given_s > 0 or errors.p_bright_given_d > 0:
                u = rng.random(n)
                flip = np.where(
                    bright, u < errors.p_dark_given_s, u < errors.p_bright_given_d
                )
                bright = bright ^ flip
            reads[:, ci] = bright
            ci += 1
        else:
            _, lo, hi, eps, leak_lo, leak_hi, leak_eps, leak_p = step
            u = rng.random(n)
            if leak_p > 0:
                on_main = rng.random(n) >= leak_p
            else:
                on_main = np.ones(n, dtype=bool)
            swap = on_main & (u >= eps)
            at_lo = swap & (state == lo)
            at_hi = swap & (state == hi)
            state[at_lo] = hi
            state[at_hi] = lo
            if leak_p > 0:
                swap2 = ~on_main & (u >= leak_eps)
                at_lo2 = swap2 & (state == leak_lo)
                at_hi2 = swap2 & (state == leak_hi)
                state[at_lo2] = leak_hi
                state[at_hi2] = leak_lo

    outcomes_arr = np.asarray(cp.check_outcomes, dtype=np.int64)
    any_bright = reads.any(axis=1)
    outcome = outcomes_arr[np.argmax(reads, axis=1)]
    null = ~any_bright
    if mode == "strict-single-bright":
        null |= reads.sum(axis=1) > 1
    final = np.where(null, cp.d, outcome)
    return np.bincount(final, minlength=cp.d + 1)


@dataclass(eq=False)
class _CompiledPlan:
    d: int
    code_states: tuple[AtomicState, ...]
    is_d_level: np.ndarray
    start_code: int
    other_code: int
    prep_success: np.ndarray  # per prepared index
    prep_target: np.ndarray
    steps: tuple  # ("pulse", lo, hi, eps, leak...) / ("check",)
    check_outcomes: tuple[int, ...]


def _compile_plan(
    encoding: QuditEncoding, plan: MeasurementPlan, errors: ErrorParams
) -> _CompiledPlan:
    code_states = list(encoding.states)
    for park in encoding.parking.values():
        if park not in code_states:
            code_states.append(park)
    for key in plan.pulse_keys():
        for st in key:
            if st not in code_states:
                code_states.append(st)
    code_states.append(_OTHER_GROUND)
    code = {s: i for i, s in enumerate(code_states)}
    is_d_level = np.array([s.level == "D" for s in code_states])

    prep_success = np.ones(encoding.d)
    prep_target = np.arange(encoding.d)
    for n in range(1, encoding.d):
        p = 1.0
        for pulse in plan.prep_paths[n]:
            p *= 1.0 - errors.eps(pulse.key)
        prep_success[n] = p
        prep_target[n] = code[encoding.states[n]]

    steps = []
    for step in plan.steps:
        if isinstance(step, CheckStep):
            steps.append(("check",))
            continue
        key = step.key
        leak_to, leak_p = errors.leak.get(key, (None, 0.0))
        entry = (
            "pulse",
            code[step.s_state],
            code[step.d_state],
            errors.eps(key),
            code[leak_to[0]] if leak_to else -1,
            code[leak_to[1]] if leak_to else -1,
            errors.eps(leak_to) if leak_to else 0.0,
            leak_p,
        )
        steps.append(entry)
    return _CompiledPlan(
        d=encoding.d,
        code_states=tuple(code_states),
        is_d_level=is_d_level,
        start_code=code[encoding.states[0]],
        other_code=code[_OTHER_GROUND],
        prep_success=prep_success,
        prep_target=prep_target,
        steps=tuple(steps),
        check_outcomes=plan.check_outcomes,
    )


def post_select(raw: ConfusionMatrix) -> ConfusionMatrix:
    """Drop the Null column and renormalize each row over real outcomes."""
    if not raw.has_null:
        raise ValueError("post_select needs a matrix with a Null column")
    body = raw.probs[:, :-1]
    mass = body.sum(axis=1)
    dead = np.where(mass <= 0)[0]
    if dead.size:
        raise NullRowError(f"rows {dead.tolist()} have no non-Null outcomes")
    probs = body / mass[:, None]
    shots = np.rint(raw.shots * mass).astype(int)
    return ConfusionMatrix(probs=probs, shots=shots, has_null=False)


def average_fidelity(matrix: ConfusionMatrix) -> tuple[float, float]:
    """Mean diagonal probability and its propagated binomial uncertainty."""
    diag = matrix.diagonal()
    fid = float(diag.mean())
    var = float(np.sum(diag * (1.0 - diag) / np.maximum(matrix.shots, 1)))
    return fid, math.sqrt(var) / matrix.n_prepared


@dataclass(frozen=True)
class ScalingCurves:
    """Average fidelity vs dimension for best- and worst-state choices."""

    d_values: tuple[int, ...]
    optimal: tuple[float, ...]
    worst: tuple[float, ...]
    optimal_choice: tuple[tuple[int, ...], ...]
    worst_choice: tuple[tuple[int, ...], ...]


def scaling_analysis(per_state_fidelity: Mapping[int, float], d_range: Iterable[int]) -> ScalingCurves:
    """Best/worst average fidelity vs qudit dimension, always keeping |0>.

    For each d the d-1 non-|0> states with the highest (lowest) fidelities
    are chosen; ties break toward the lower state index.
    """
    if 0 not in per_state_fidelity:
        raise ValueError("need the fidelity of state 0")
    others = sorted(k for k in per_state_fidelity if k != 0)
    d_values = sorted(set(int(d) for d in d_range))
    if d_values and d_values[-1] - 1 > len(others):
        raise ValueError(
            f"d = {d_values[-1]} needs {d_values[-1] - 1} non-zero states, "
            f"have {len(others)}"
        )
    if d_values and d_values[0] < 1:
        raise ValueError("d must be >= 1")
    best_order = sorted(others, key=lambda k: (-per_state_fidelity[k], k))
    worst_order = sorted(others, key=lambda k: (per_state_fidelity[k], k))
    opt, wst, opt_choice, wst_choice = [], [], [], []
    for d in d_values:
        chosen_b = [0] + best_order[: d - 1]
        chosen_w = [0] + worst_order[: d - 1]
        opt.append(float(np.mean([per_state_fidelity[k] for k in chosen_b])))
        wst.append(float(np.mean([per_state_fidelity[k] for k in chosen_w])))
        opt_choice.append(tuple(sorted(chosen_b)))
        wst_choice.append(tuple(sorted(chosen_w)))
    return ScalingCurves(
        d_values=tuple(d_values),
        optimal=tuple(opt),
        worst=tuple(wst),
        optimal_choice=tuple(opt_choice),
        worst_choice=tuple(wst_choice),
    )


@dataclass(eq=False)
class Timings:
    """Durations (seconds) of the protocol phases."""

    fluorescence_check: float
    awg_trigger: float
    optical_pump: float = 0.0
    pi_pulse: Mapping[int, float] = field(default_factory=dict)  # encoded index -> tau_pi


@dataclass(frozen=True)
class TimingBudget:
    measurement_total: float
    preparation_total: float
    breakdown: tuple[tuple[str, float], ...]


def timing_budget(encoding: QuditEncoding, timings: Timings, prepared: int = 0) -> TimingBudget:
    """Duration of one experiment.

    Measurement: d fluorescence checks, one AWG trigger to enter the
    readout loop, then a trigger plus the de-shelve pi pulse per encoded
    state (plus shelve pulses and triggers for 6S-encoded states).  The
    in-loop optical-pumping slot after each check is charged to the budget
    even though the simulated physics omits it (it does not affect the
    first-bright statistics).  Preparation (initial optical pumping plus
    the prep pulse) is reported separately.
    """
    d = encoding.d
    fluor = d * timings.fluorescence_check
    n_shelve = sum(1 for s in encoding.states[1:] if s.level == "S")
    # one trigger per pulse plus the switch into the readout loop; a d = 1
    # measurement never touches the AWG at all
    triggers = (1 + n_shelve + (d - 1)) * timings.awg_trigger if d > 1 else 0.0
    deshelve = sum(timings.pi_pulse.get(n, 0.0) for n in range(1, d))
    shelve = sum(
        timings.pi_pulse.get(encoding.index_of(s), 0.0)
        for s in encoding.states[1:]
        if s.level == "S"
    )
    inloop_pump = (d - 1) * timings.optical_pump
    measurement = fluor + triggers + deshelve + shelve + inloop_pump
    prep = timings.optical_pump + (timings.pi_pulse.get(prepared, 0.0) if prepared else 0.0)
    breakdown = (
        ("fluorescence", fluor),
        ("awg_triggers", triggers),
        ("deshelve_pulses", deshelve),
        ("shelve_pulses", shelve),
        ("inloop_optical_pump", inloop_pump),
        ("optical_pump", timings.optical_pump),
        ("prep_pulse", prep - timings.optical_pump),
    )
    return TimingBudget(
        measurement_total=measurement, preparation_total=prep, breakdown=breakdown
    )


def reference_timings(fixtures_dir=None) -> Timings:
    """5 ms fluorescence, 4 ms AWG trigger, pi times from the reference table."""
    pi = {}
    for row in load_transition_params(fixtures_dir):
        if row.index not in (None, 0) and row.tau_pi_us is not None:
            pi[row.index] = row.tau_pi_us * 1e-6
    return Timings(fluorescence_check=5e-3, awg_trigger=4e-3, optical_pump=0.0, pi_pulse=pi)


def intervals_from_timings(plan: MeasurementPlan, timings: Timings) -> list[float]:
    """Elapsed time before each fluorescence check (decay exposure)."""
    out = [0.0]
    for n in plan.check_outcomes[1:]:
        out.append(
            timings.awg_trigger + timings.pi_pulse.get(n, 0.0) + timings.fluorescence_check
        )
    return out


def enumerate_outcomes(
    encoding: QuditEncoding,
    errors: ErrorParams,
    prepared: int,
    mode: str = "first-bright",
    intervals: float | Sequence[float] = 0.0,
) -> dict:
    """Exact outcome distribution by branch enumeration.

    Walks the plan propagating probabilities over (state, reads) pairs;
    cost grows as 2^(number of checks), so this is an oracle for small d.
    Keys are outcome indices plus None for Null.
    """
    plan = build_measurement_sequence(encoding)
    decay_p = _decay_probs(errors, intervals, plan.n_checks)

    start = encoding.states[0]
    branches: dict[tuple, float] = {}

    def add(d, key, p):
        if p > 0.0:
            d[key] = d.get(key, 0.0) + p

    prep: dict[AtomicState, float] = {}
    add(prep, _OTHER_GROUND, errors.prep_error)
    stay = 1.0 - errors.prep_error
    if prepared != 0:
        success = 1.0
        for pulse in plan.prep_paths[prepared]:
            success *= 1.0 - errors.eps(pulse.key)
        add(prep, encoding.states[prepared], stay * success)
        add(prep, start, stay * (1.0 - success))
    else:
        add(prep, start, stay)
    branches = {(state, ()): p for state, p in prep.items()}

    check_idx = 0
    for step in plan.steps:
        new: dict[tuple, float] = {}
        if isinstance(step, PulseStep):
            variants = [(step, 1.0 - errors.leak.get(step.key, (None, 0.0))[1])]
            leak_to, leak_p = errors.leak.get(step.key, (None, 0.0))
            if leak_to is not None and leak_p > 0:
                variants.append((PulseStep(*leak_to), leak_p))
            for (state, reads), p in branches.items():
                for pulse, p_var in variants:
                    if p_var == 0.0:
                        continue
                    eps = errors.eps(pulse.key)
                    if state == pulse.s_state:
                        add(new, (pulse.d_state, reads), p * p_var * (1.0 - eps))
                        add(new, (state, reads), p * p_var * eps)
                    elif state == pulse.d_state:
                        add(new, (pulse.s_state, reads), p * p_var * (1.0 - eps))
                        add(new, (state, reads), p * p_var * eps)
                    else:
                        add(new, (state, reads), p * p_var)
        else:
            p_decay = decay_p[check_idx]
            staged: dict[tuple, float] = {}
            for (state, reads), p in branches.items():
                if p_decay > 0 and state.level == "D":
                    add(staged, (_OTHER_GROUND, reads), p * p_decay)
                    add(staged, (state, reads), p * (1.0 - p_decay))
                else:
                    add(staged, (state, reads), p)
            for (state, reads), p in staged.items():
                bright = state.level == "S"
                flip = errors.p_dark_given_s if bright else errors.p_bright_given_d
                add(new, (state, reads + (bright,)), p * (1.0 - flip))
                add(new, (state, reads + (not bright,)), p * flip)
            check_idx += 1
        branches = new

    out: dict = {}
    for (_, reads), p in branches.items():
        outcome = interpret(reads, mode, plan.check_outcomes)
        out[outcome] = out.get(outcome, 0.0) + p
    return out


def write_confusion_csv(path, matrix: ConfusionMatrix) -> None:
    """Header: prepared,0,1,...,[Null]; one row per prepared state."""
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        header = ["prepared"] + [str(i) for i in range(matrix.n_outcomes)]
        if matrix.has_null:
            header.append("Null")
        w.writerow(header)
        for i in range(matrix.n_prepared):
            w.writerow([str(i)] + [repr(float(x)) for x in matrix.probs[i]])


def read_confusion_csv(path, shots: int = 1000, row_tol: float = 2.5e-3) -> ConfusionMatrix:
    """Read a confusion CSV (probability form).  Printed-precision tables
    may miss row-stochasticity by a couple of counts; row_tol bounds that."""
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    header = rows[0]
    has_null = header[-1] == "Null"
    probs = np.array([[float(x) for x in r[1:]] for r in rows[1:]])
    dev = np.abs(probs.sum(axis=1) - 1.0).max()
    if dev > row_tol:
        raise ValueError(f"rows deviate from unit sum by {dev:g} (> {row_tol:g})")
    return ConfusionMatrix(
        probs=probs, shots=np.full(probs.shape[0], shots), has_null=has_null
    )


def load_reference_confusion(name: str, fixtures_dir=None, shots: int = 1000) -> ConfusionMatrix:
    """Bundled confusion fixture ('e2', 'e3', 's1', 's2') as a matrix."""
    _, outcomes, probs, has_null = load_confusion_fixture(name, fixtures_dir)
    return ConfusionMatrix(
        probs=probs, shots=np.full(probs.shape[0], shots), has_null=has_null
    )
