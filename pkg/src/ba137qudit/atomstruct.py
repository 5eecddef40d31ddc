"""Hyperfine + Zeeman structure of a fine-structure level at arbitrary field.

The Hamiltonian is built in the |m_I, m_J> product basis, in MHz:

    H = A_D I.J
      + B_Q [3(I.J)^2 + (3/2) I.J - I(I+1)J(J+1)] / [2I(2I-1)J(2J-1)]
      + B mu_B/h (g_J m_J + g_I m_I)

It conserves m = m_I + m_J, so each m block is diagonalized independently.
Eigenstates are labeled |F~, m_F~> by adiabatic continuation from B = 0,
where the labels coincide with the zero-field hyperfine states |F, m_F>.
The hyperfine terms are traceless over the level, so energies come out
relative to the level centroid; absolute optical frequencies enter only as
an explicit offset in ``transition_frequency``.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from functools import lru_cache
from typing import NamedTuple, Sequence

import numpy as np
from scipy.optimize import linear_sum_assignment

from .angmom import HalfInt, clebsch_gordan

__all__ = [
    "PhysicalConstants",
    "CONSTANTS",
    "LevelConstants",
    "LabeledEigenstate",
    "EigenSystem",
    "StateRef",
    "LabelingError",
    "FieldMismatchError",
    "BA137_S12",
    "BA137_D52",
    "build_hamiltonian",
    "zero_field_energy",
    "diagonalize",
    "diagonalize_range",
    "decomposition_scan",
    "transition_frequency",
    "transition_frequency_at",
    "field_sensitivity",
    "write_level_scan",
    "write_decomposition_scan",
]


@dataclass(frozen=True)
class PhysicalConstants:
    """Single source of truth for unit conversions used by all modules."""

    mu_B_over_h: float = 1.3996245  # Bohr magneton / Planck constant, MHz/G


CONSTANTS = PhysicalConstants()


class LabelingError(RuntimeError):
    """Adiabatic label tracking failed even at the minimum field step."""


class FieldMismatchError(ValueError):
    """Two eigenstates from different magnetic fields were combined."""


@dataclass(frozen=True)
class LevelConstants:
    """Hyperfine and Zeeman parameters of one fine-structure level.

    g_J defaults must be supplied by the caller; for 137Ba+ the bundled
    ``BA137_S12`` / ``BA137_D52`` presets use Lande values g_J = 2 and 6/5
    with g_I = 0, which reproduce the measured field sensitivities.
    """

    name: str
    I: HalfInt
    J: HalfInt
    A_D: float  # MHz
    B_Q: float  # MHz
    g_J: float
    g_I: float = 0.0

    def __post_init__(self):
        object.__setattr__(self, "I", HalfInt.coerce(self.I))
        object.__setattr__(self, "J", HalfInt.coerce(self.J))
        if self.I.twice < 0 or self.J.twice < 0:
            raise ValueError("I and J must be nonnegative")
        if self.B_Q != 0.0 and (self.I.twice < 2 or self.J.twice < 2):
            raise ValueError(
                f"{self.name}: B_Q != 0 requires I >= 1 and J >= 1 "
                "(the quadrupole denominator vanishes otherwise)"
            )

    @property
    def dim(self) -> int:
        return (self.I.twice + 1) * (self.J.twice + 1)

    def f_values(self) -> tuple[HalfInt, ...]:
        tmin = abs(self.I.twice - self.J.twice)
        tmax = self.I.twice + self.J.twice
        return tuple(HalfInt(t) for t in range(tmin, tmax + 1, 2))


BA137_S12 = LevelConstants("6S1/2", HalfInt(3), HalfInt(1), 4018.871, 0.0, 2.0)
BA137_D52 = LevelConstants("5D5/2", HalfInt(3), HalfInt(5), -12.028, 59.533, 1.2)


class StateRef(NamedTuple):
    """A (level, F~, m_F~) handle that survives re-diagonalization."""

    level: LevelConstants
    F: HalfInt
    m: HalfInt

    @classmethod
    def of(cls, level: LevelConstants, F, m) -> "StateRef":
        return cls(level, HalfInt.coerce(F), HalfInt.coerce(m))


def _spin_matrices(twice_j: int) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """(jz, jp, jm) for spin j = twice_j/2, basis m = -j..j ascending."""
    j = twice_j / 2.0
    dim = twice_j + 1
    ms = np.arange(-twice_j, twice_j + 1, 2) / 2.0
    jz = np.diag(ms)
    jp = np.zeros((dim, dim))
    for i in range(dim - 1):
        m = ms[i]
        jp[i + 1, i] = np.sqrt(j * (j + 1) - m * (m + 1))
    return jz, jp, jp.T


@lru_cache(maxsize=32)
def _basis(level: LevelConstants) -> tuple[tuple[int, int], ...]:
    """Product basis as (2*m_I, 2*m_J) pairs; index = i_I * dim_J + i_J."""
    tmis = range(-level.I.twice, level.I.twice + 1, 2)
    tmjs = list(range(-level.J.twice, level.J.twice + 1, 2))
    return tuple((tmi, tmj) for tmi in tmis for tmj in tmjs)


@lru_cache(maxsize=32)
def _hyperfine_parts(level: LevelConstants) -> tuple[np.ndarray, np.ndarray]:
    """(I.J matrix, quadrupole matrix without B_Q) in the product basis."""
    iz, ip, im = _spin_matrices(level.I.twice)
    jz, jp, jm = _spin_matrices(level.J.twice)
    idot = (
        np.kron(iz, jz)
        + 0.5 * (np.kron(ip, jm) + np.kron(im, jp))
    )
    if level.B_Q == 0.0 or level.I.twice < 2 or level.J.twice < 2:
        quad = np.zeros_like(idot)
    else:
        I, J = float(level.I), float(level.J)
        num = 3.0 * (idot @ idot) + 1.5 * idot - I * (I + 1) * J * (J + 1) * np.eye(level.dim)
        quad = num / (2.0 * I * (2 * I - 1) * J * (2 * J - 1))
    return idot, quad


def build_hamiltonian(
    level: LevelConstants, B: float, constants: PhysicalConstants = CONSTANTS
) -> np.ndarray:
    """Hamiltonian matrix in MHz over the |m_I, m_J> basis at field B (gauss)."""
    if B < 0:
        raise ValueError("B must be nonnegative")
    idot, quad = _hyperfine_parts(level)
    h = level.A_D * idot + level.B_Q * quad
    tmi = np.array([p[0] for p in _basis(level)]) / 2.0
    tmj = np.array([p[1] for p in _basis(level)]) / 2.0
    zeeman = B * constants.mu_B_over_h * (level.g_J * tmj + level.g_I * tmi)
    return h + np.diag(zeeman)


def zero_field_energy(level: LevelConstants, F) -> float:
    """Closed-form hyperfine energy E(F) in MHz, relative to the centroid."""
    F = float(HalfInt.coerce(F))
    I, J = float(level.I), float(level.J)
    K = F * (F + 1) - I * (I + 1) - J * (J + 1)
    e = level.A_D * K / 2.0
    if level.B_Q != 0.0:
        e += (
            level.B_Q
            * (0.75 * K * (K + 1) - I * (I + 1) * J * (J + 1))
            / (2.0 * I * (2 * I - 1) * J * (2 * J - 1))
        )
    return e


@dataclass(frozen=True, eq=False)
class LabeledEigenstate:
    """One |F~, m_F~> eigenstate at a given field.

    ``amp_mImJ`` is the (real) amplitude vector over the |m_I, m_J> product
    basis; ``amp_FmF`` the amplitudes over the zero-field |F, m_F> basis.
    Only |F, m_F = m_F~> components can be nonzero.  The global sign is fixed
    so the largest-magnitude |F, m_F> amplitude is positive, which makes the
    B -> 0 limit equal to +1 on the state's own |F, m_F> entry.
    """

    level: LevelConstants
    F_tilde: HalfInt
    m_F_tilde: HalfInt
    energy: float  # MHz, relative to the level centroid
    B: float  # gauss
    amp_mImJ: np.ndarray
    amp_FmF: np.ndarray

    def __post_init__(self):
        self.amp_mImJ.setflags(write=False)
        self.amp_FmF.setflags(write=False)

    @property
    def ref(self) -> StateRef:
        return StateRef(self.level, self.F_tilde, self.m_F_tilde)

    def f_component(self, F, m) -> float:
        """Amplitude on the zero-field state |F, m_F=m>."""
        key = (HalfInt.coerce(F).twice, HalfInt.coerce(m).twice)
        for i, (tf, tm) in enumerate(_f_basis(self.level)):
            if (tf, tm) == key:
                return float(self.amp_FmF[i])
        raise KeyError(f"no |F={F}, m={m}> state in {self.level.name}")


@lru_cache(maxsize=32)
def _f_basis(level: LevelConstants) -> tuple[tuple[int, int], ...]:
    out = []
    for F in level.f_values():
        for tm in range(F.twice, -F.twice - 1, -2):
            out.append((F.twice, tm))
    return tuple(out)


@lru_cache(maxsize=32)
def _f_transform(level: LevelConstants) -> np.ndarray:
    """U[(mI,mJ) index, (F,mF) index] = <I mI; J mJ | F mF>."""
    basis = _basis(level)
    fbasis = _f_basis(level)
    u = np.zeros((len(basis), len(fbasis)))
    for a, (tmi, tmj) in enumerate(basis):
        for b, (tf, tmf) in enumerate(fbasis):
            if tmi + tmj != tmf:
                continue
            u[a, b] = clebsch_gordan(
                level.I, HalfInt(tmi), level.J, HalfInt(tmj), HalfInt(tf), HalfInt(tmf)
            )
    return u


@dataclass(frozen=True, eq=False)
class EigenSystem:
    """All labeled eigenstates of one level at one field value.

    States are ordered by (F~ ascending, m_F~ descending), i.e. by adiabatic
    label rather than by raw energy, so state identity is stable across
    level anticrossings.
    """

    level: LevelConstants
    B: float
    states: tuple[LabeledEigenstate, ...]
    _index: dict = field(repr=False, compare=False, default_factory=dict)

    def __post_init__(self):
        for k, s in enumerate(self.states):
            self._index[(s.F_tilde.twice, s.m_F_tilde.twice)] = k

    def state(self, F, m) -> LabeledEigenstate:
        key = (HalfInt.coerce(F).twice, HalfInt.coerce(m).twice)
        try:
            return self.states[self._index[key]]
        except KeyError:
            raise KeyError(
                f"no state |F~={HalfInt(key[0])}, m={HalfInt(key[1])}> in {self.level.name}"
            ) from None

    def __iter__(self):
        return iter(self.states)

    def energies(self) -> dict[tuple[HalfInt, HalfInt], float]:
        return {(s.F_tilde, s.m_F_tilde): s.energy for s in self.states}


def _block_indices(level: LevelConstants) -> dict[int, np.ndarray]:
    basis = _basis(level)
    tm = np.array([a + b for a, b in basis])
    return {m: np.where(tm == m)[0] for m in sorted(set(tm.tolist()))}


def _block_labels(level: LevelConstants, tm: int) -> list[int]:
    """Twice-F labels living in the m block, ordered ascending in F."""
    return [F.twice for F in level.f_values() if F.twice >= abs(tm)]


def _zero_field_blocks(level: LevelConstants) -> dict[int, dict[int, np.ndarray]]:
    """Labeled eigenvectors at B = 0: {twice_m: {twice_F: vector-in-block}}."""
    h0 = build_hamiltonian(level, 0.0)
    out: dict[int, dict[int, np.ndarray]] = {}
    for tm, idx in _block_indices(level).items():
        w, v = np.linalg.eigh(h0[np.ix_(idx, idx)])
        labels: dict[int, np.ndarray] = {}
        for tf in _block_labels(level, tm):
            target = zero_field_energy(level, HalfInt(tf))
            k = int(np.argmin(np.abs(w - target)))
            if abs(w[k] - target) > 1e-6:
                raise LabelingError(
                    f"{level.name}: zero-field eigenvalue {w[k]:.9f} MHz does not match "
                    f"the closed-form E(F={HalfInt(tf)}) = {target:.9f} MHz"
                )
            labels[tf] = v[:, k]
        out[tm] = labels
    return out


def _advance_block(
    level: LevelConstants,
    tm: int,
    idx: np.ndarray,
    labels: dict[int, np.ndarray],
    b_from: float,
    b_to: float,
    constants: PhysicalConstants,
    overlap_min: float,
    min_step: float,
) -> tuple[dict[int, np.ndarray], dict[int, float]]:
    """Carry labels from b_from to b_to, bisecting until overlaps are safe."""
    h = build_hamiltonian(level, b_to, constants)[np.ix_(idx, idx)]
    w, v = np.linalg.eigh(h)
    keys = list(labels.keys())
    old = np.column_stack([labels[k] for k in keys])
    overlap = np.abs(old.T @ v)  # rows: old labels, cols: new eigenvectors
    row, col = linear_sum_assignment(-(overlap**2))
    if overlap[row, col].min() > overlap_min:
        new_labels = {}
        new_energy = {}
        for r, c in zip(row, col):
            vec = v[:, c]
            if old[:, r] @ vec < 0:
                vec = -vec
            new_labels[keys[r]] = vec
            new_energy[keys[r]] = float(w[c])
        return new_labels, new_energy
    if b_to - b_from <= min_step:
        raise LabelingError(
            f"{level.name}, m={HalfInt(tm)}: no eigenvector overlap above {overlap_min} "
            f"between B = {b_from:.6f} G and {b_to:.6f} G even at the {min_step} G floor"
        )
    mid = 0.5 * (b_from + b_to)
    labels, _ = _advance_block(
        level, tm, idx, labels, b_from, mid, constants, overlap_min, min_step
    )
    return _advance_block(level, tm, idx, labels, mid, b_to, constants, overlap_min, min_step)


def _assemble(
    level: LevelConstants,
    B: float,
    blocks: dict[int, dict[int, np.ndarray]],
    energies: dict[int, dict[int, float]],
) -> EigenSystem:
    basis = _basis(level)
    u = _f_transform(level)
    fbasis = _f_basis(level)
    block_idx = _block_indices(level)
    states = []
    for F in level.f_values():
        for tm in range(F.twice, -F.twice - 1, -2):
            vec = np.zeros(len(basis))
            vec[block_idx[tm]] = blocks[tm][F.twice]
            amp_f = u.T @ vec
            if amp_f[np.argmax(np.abs(amp_f))] < 0:
                vec = -vec
                amp_f = -amp_f
            states.append(
                LabeledEigenstate(
                    level=level,
                    F_tilde=F,
                    m_F_tilde=HalfInt(tm),
                    energy=energies[tm][F.twice],
                    B=B,
                    amp_mImJ=vec,
                    amp_FmF=amp_f,
                )
            )
    # sanity: the F-basis amplitudes must respect m conservation exactly
    for s in states:
        for (tf, tmf), a in zip(fbasis, s.amp_FmF):
            if tmf != s.m_F_tilde.twice and a != 0.0:
                raise LabelingError("m_F component leaked outside the m block")
    return EigenSystem(level=level, B=B, states=tuple(states))


def diagonalize_range(
    level: LevelConstants,
    b_values: Sequence[float],
    constants: PhysicalConstants = CONSTANTS,
    overlap_min: float = 0.7,
    min_step: float = 1e-3,
    max_step: float = 0.25,
) -> list[EigenSystem]:
    """Labeled eigensystems at every requested field, in the given order.

    The adiabatic walk runs once from B = 0 up to max(b_values) and snapshots
    at each requested point, so a dense scan costs one pass.
    """
    bs = [float(b) for b in b_values]
    if any(b < 0 for b in bs):
        raise ValueError("B must be nonnegative")
    targets = sorted(set(bs))
    block_idx = _block_indices(level)
    labels = _zero_field_blocks(level)
    energies = {
        tm: {tf: zero_field_energy(level, HalfInt(tf)) for tf in blk}
        for tm, blk in labels.items()
    }
    snapshots: dict[float, EigenSystem] = {}
    b_cur = 0.0
    if targets and targets[0] == 0.0:
        snapshots[0.0] = _assemble(level, 0.0, labels, energies)
        targets = targets[1:]
    for b_target in targets:
        while b_cur < b_target:
            b_next = min(b_cur + max_step, b_target)
            for tm, idx in block_idx.items():
                labels[tm], energies[tm] = _advance_block(
                    level, tm, idx, labels[tm], b_cur, b_next,
                    constants, overlap_min, min_step,
                )
            b_cur = b_next
        snapshots[b_target] = _assemble(level, b_target, labels, energies)
    return [snapshots[b] for b in bs]


@lru_cache(maxsize=4096)
def _diag_cached(level: LevelConstants, B: float, constants: PhysicalConstants) -> EigenSystem:
    return diagonalize_range(level, [B], constants)[0]


def diagonalize(
    level: LevelConstants, B: float, constants: PhysicalConstants = CONSTANTS
) -> EigenSystem:
    """Labeled eigensystem of one level at field B (gauss)."""
    return _diag_cached(level, float(B), constants)


@dataclass(frozen=True, eq=False)
class DecompositionScan:
    """|F, m_F> amplitudes of one labeled state across a field range."""

    level: LevelConstants
    F_tilde: HalfInt
    m_F_tilde: HalfInt
    b_values: np.ndarray
    components: tuple[tuple[HalfInt, HalfInt], ...]  # (F, m_F) per column
    amplitudes: np.ndarray  # shape (len(b_values), len(components))


def decomposition_scan(
    level: LevelConstants,
    F,
    m,
    b_values: Sequence[float],
    constants: PhysicalConstants = CONSTANTS,
) -> DecompositionScan:
    """Track one eigenstate's |F, m_F> decomposition over a field range.

    Identically-zero components (everything with m_F != m_F~, plus any
    accidental zeros) are omitted.
    """
    F = HalfInt.coerce(F)
    m = HalfInt.coerce(m)
    systems = diagonalize_range(level, list(b_values), constants)
    systems[0].state(F, m)  # raises KeyError early on an unknown label
    fbasis = _f_basis(level)
    amps = np.array([sys.state(F, m).amp_FmF for sys in systems])
    keep = np.where(np.max(np.abs(amps), axis=0) > 1e-12)[0]
    comps = tuple((HalfInt(fbasis[i][0]), HalfInt(fbasis[i][1])) for i in keep)
    return DecompositionScan(
        level=level,
        F_tilde=F,
        m_F_tilde=m,
        b_values=np.asarray(list(b_values), dtype=float),
        components=comps,
        amplitudes=amps[:, keep],
    )


def transition_frequency(
    ground: LabeledEigenstate, excited: LabeledEigenstate, optical_offset: float = 0.0
) -> float:
    """E_excited - E_ground + optical_offset, in MHz.

    With the default zero offset this is the splitting relative to the two
    level centroids; pass the optical carrier explicitly to get absolute
    frequencies.  Both states must come from the same field.
    """
    if ground.B != excited.B:
        raise FieldMismatchError(
            f"ground at B = {ground.B} G but excited at B = {excited.B} G"
        )
    return excited.energy - ground.energy + optical_offset


def transition_frequency_at(
    ground: StateRef,
    excited: StateRef,
    B: float,
    optical_offset: float = 0.0,
    constants: PhysicalConstants = CONSTANTS,
) -> float:
    g = diagonalize(ground.level, B, constants).state(ground.F, ground.m)
    e = diagonalize(excited.level, B, constants).state(excited.F, excited.m)
    return transition_frequency(g, e, optical_offset)


def field_sensitivity(
    ground: StateRef,
    excited: StateRef,
    B: float,
    step: float = 1e-3,
    constants: PhysicalConstants = CONSTANTS,
) -> float:
    """Magnetic-field sensitivity of a transition in MHz/G.

    Central finite difference of the transition frequency with the given
    step (default 1 mG).  B must exceed the step so the stencil stays in
    the valid B >= 0 domain.
    """
    if B <= 0:
        raise ValueError("field_sensitivity requires B > 0")
    if B - step <= 0:
        raise ValueError(f"step {step} G collides with the B = 0 boundary at B = {B} G")
    hi = transition_frequency_at(ground, excited, B + step, 0.0, constants)
    lo = transition_frequency_at(ground, excited, B - step, 0.0, constants)
    return (hi - lo) / (2.0 * step)


def write_level_scan(
    path,
    level: LevelConstants,
    b_values: Sequence[float],
    constants: PhysicalConstants = CONSTANTS,
) -> None:
    """CSV of state energies vs field: columns B_gauss, state_label, energy_MHz."""
    systems = diagonalize_range(level, list(b_values), constants)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["B_gauss", "state_label", "energy_MHz"])
        for sys in systems:
            for s in sys:
                w.writerow(
                    [
                        repr(float(sys.B)),
                        f"F{s.F_tilde}_m{s.m_F_tilde}",
                        repr(float(s.energy)),
                    ]
                )


def write_decomposition_scan(path, scan: DecompositionScan) -> None:
    """CSV rows: B_gauss, F, m_F, amplitude (zero components omitted)."""
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["B_gauss", "F", "m_F", "amplitude"])
        for i, b in enumerate(scan.b_values):
            for k, (F, m) in enumerate(scan.components):
                w.writerow([repr(float(b)), str(F), str(m), repr(float(scan.amplitudes[i, k]))])
