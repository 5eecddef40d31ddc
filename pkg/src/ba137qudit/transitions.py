"""Relative quadrupole transition strengths between 6S1/2 and 5D5/2.

A transition |S~> -> |D~> with q = m_D - m_S is driven with amplitude

    g^(q)(gamma, phi) * sum_{m_I} sum_{m_J} c*_D c_S <J_S m_J; 2 q | J_D m_J + q>

in units of the reduced matrix element <J_D||Q||J_S>, with m_I conserved.
Only the magnitude is reported; relative phases between transitions are
dropped.  The geometric factor g^(q) encodes the laser direction phi
(wavevector vs quantization axis) and linear polarization angle gamma
(relative to the k-B plane).
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .angmom import HalfInt, clebsch_gordan
from .atomstruct import (
    BA137_D52,
    BA137_S12,
    CONSTANTS,
    FieldMismatchError,
    LabeledEigenstate,
    LevelConstants,
    PhysicalConstants,
    diagonalize,
)

__all__ = [
    "LaserGeometry",
    "StrengthTable",
    "PAPER13_GEOMETRY",
    "PAPER13_D_STATES",
    "geometric_factor",
    "relative_strength",
    "strength_table",
    "encodable_states",
]


@dataclass(frozen=True)
class LaserGeometry:
    """Laser direction and linear-polarization angles, in degrees.

    phi: angle between the laser wavevector and the magnetic field.
    gamma: polarization angle relative to the plane spanned by the
    wavevector and the field.  Both are normalized into [0, 180).
    """

    phi: float
    gamma: float

    def __post_init__(self):
        object.__setattr__(self, "phi", float(self.phi) % 180.0)
        object.__setattr__(self, "gamma", float(self.gamma) % 180.0)


# 1762 nm beam at 45 deg to the field, polarization rotated 58 deg off the
# Delta m = 0 optimum so Delta m = +/-1 transitions are driven as well
PAPER13_GEOMETRY = LaserGeometry(phi=45.0, gamma=58.0)

# qudit index order |1>..|12> of the 13-level encoding; index |0> is the
# 6S1/2 (F~=2, m=2) state.  This assignment is data, not derivable.
PAPER13_D_STATES: tuple[tuple[HalfInt, HalfInt], ...] = tuple(
    (HalfInt(2 * f), HalfInt(2 * m))
    for f, m in [
        (4, 4), (4, 3), (4, 2), (4, 1), (4, 0),
        (3, 2), (3, 1), (3, 0),
        (2, 2), (2, 1), (2, 0),
        (1, 0),
    ]
)


def geometric_factor(q: int, geometry: LaserGeometry) -> float:
    """Laser-geometry weight g^(q) for a Delta m = q quadrupole transition.

    g^(0)    = 1/2 |cos(gamma) sin(2 phi)|
    g^(+-1)  = 1/sqrt6 |-+ cos(gamma) cos(2 phi) + i sin(gamma) cos(phi)|
    g^(+-2)  = 1/sqrt6 |1/2 cos(gamma) sin(2 phi) -+ i sin(gamma) sin(phi)|
    """
    if q not in (-2, -1, 0, 1, 2):
        raise ValueError(f"quadrupole q must be in [-2, 2], got {q}")
    g = math.radians(geometry.gamma)
    p = math.radians(geometry.phi)
    if q == 0:
        return 0.5 * abs(math.cos(g) * math.sin(2 * p))
    if abs(q) == 1:
        re = -math.cos(g) * math.cos(2 * p) if q > 0 else math.cos(g) * math.cos(2 * p)
        im = math.sin(g) * math.cos(p)
        return math.hypot(re, im) / math.sqrt(6)
    re = 0.5 * math.cos(g) * math.sin(2 * p)
    im = -math.sin(g) * math.sin(p) if q > 0 else math.sin(g) * math.sin(p)
    return math.hypot(re, im) / math.sqrt(6)


@lru_cache(maxsize=64)
def _coupling_matrix(
    ground_level: LevelConstants, excited_level: LevelConstants, twice_q: int
) -> np.ndarray:
    """Q[excited index, ground index] = delta_{m_I} <J_S m_J; 2 q | J_D m_J+q>."""
    from .atomstruct import _basis

    gb = _basis(ground_level)
    eb = _basis(excited_level)
    out = np.zeros((len(eb), len(gb)))
    for a, (tmi_g, tmj_g) in enumerate(gb):
        for b, (tmi_e, tmj_e) in enumerate(eb):
            if tmi_e != tmi_g:
                continue
            if tmj_e - tmj_g != twice_q:
                continue
            out[b, a] = clebsch_gordan(
                ground_level.J,
                HalfInt(tmj_g),
                2,
                HalfInt(twice_q),
                excited_level.J,
                HalfInt(tmj_e),
            )
    return out


def relative_strength(
    ground: LabeledEigenstate, excited: LabeledEigenstate, geometry: LaserGeometry
) -> float:
    """Magnitude of the relative transition strength between two eigenstates.

    Both states must come from the same field.  |Delta m| > 2 returns 0.
    """
    if ground.B != excited.B:
        raise FieldMismatchError(
            f"ground at B = {ground.B} G but excited at B = {excited.B} G"
        )
    twice_q = excited.m_F_tilde.twice - ground.m_F_tilde.twice
    if abs(twice_q) > 4 or twice_q % 2:
        return 0.0
    q = twice_q // 2
    qmat = _coupling_matrix(ground.level, excited.level, twice_q)
    amp = excited.amp_mImJ @ qmat @ ground.amp_mImJ
    return geometric_factor(q, geometry) * abs(amp)


@dataclass(frozen=True, eq=False)
class StrengthTable:
    """Relative strengths for every excited x ground eigenstate pair.

    Values are magnitudes in units of the reduced matrix element, carried
    symbolically as ``reduced_element`` (default 1).  Rows follow the
    excited level (F~ ascending, m descending), columns the ground level
    (F~ ascending, m ascending).
    """

    geometry: LaserGeometry
    B: float
    d_labels: tuple[tuple[HalfInt, HalfInt], ...]
    s_labels: tuple[tuple[HalfInt, HalfInt], ...]
    values: np.ndarray
    reduced_element: float = 1.0

    def value(self, d_label, s_label) -> float:
        i = self.d_labels.index((HalfInt.coerce(d_label[0]), HalfInt.coerce(d_label[1])))
        j = self.s_labels.index((HalfInt.coerce(s_label[0]), HalfInt.coerce(s_label[1])))
        return float(self.values[i, j])

    def column(self, s_label) -> dict[tuple[HalfInt, HalfInt], float]:
        j = self.s_labels.index((HalfInt.coerce(s_label[0]), HalfInt.coerce(s_label[1])))
        return {d: float(self.values[i, j]) for i, d in enumerate(self.d_labels)}

    def rabi_frequency(self, d_label, s_label, omega_ref: float) -> float:
        """Rabi frequency of one transition given the calibration scale
        omega_ref (laser field times reduced matrix element, user units)."""
        return self.value(d_label, s_label) * omega_ref

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["d_state"] + [f"S:F{f}:m{m}" for f, m in self.s_labels])
            for i, (f, m) in enumerate(self.d_labels):
                w.writerow(
                    [f"D:F{f}:m{m}"] + [repr(float(x)) for x in self.values[i]]
                )

    def to_json(self, path) -> None:
        entries = []
        for i, (df, dm) in enumerate(self.d_labels):
            for j, (sf, sm) in enumerate(self.s_labels):
                entries.append(
                    {
                        "excited": {"F": str(df), "m": str(dm)},
                        "ground": {"F": str(sf), "m": str(sm)},
                        "strength": float(self.values[i, j]),
                    }
                )
        doc = {
            "B_gauss": self.B,
            "phi_deg": self.geometry.phi,
            "gamma_deg": self.geometry.gamma,
            "reduced_element": self.reduced_element,
            "entries": entries,
        }
        with open(path, "w") as fh:
            json.dump(doc, fh, indent=2, sort_keys=True)
            fh.write("\n")


def _row_labels(level: LevelConstants) -> tuple[tuple[HalfInt, HalfInt], ...]:
    out = []
    for F in level.f_values():
        for tm in range(F.twice, -F.twice - 1, -2):
            out.append((F, HalfInt(tm)))
    return tuple(out)


def _col_labels(level: LevelConstants) -> tuple[tuple[HalfInt, HalfInt], ...]:
    out = []
    for F in level.f_values():
        for tm in range(-F.twice, F.twice + 1, 2):
            out.append((F, HalfInt(tm)))
    return tuple(out)


def strength_table(
    B: float,
    geometry: LaserGeometry,
    ground_level: LevelConstants = BA137_S12,
    excited_level: LevelConstants = BA137_D52,
    constants: PhysicalConstants = CONSTANTS,
) -> StrengthTable:
    """Full excited x ground relative-strength table at one field."""
    gsys = diagonalize(ground_level, B, constants)
    esys = diagonalize(excited_level, B, constants)
    d_labels = _row_labels(excited_level)
    s_labels = _col_labels(ground_level)
    values = np.zeros((len(d_labels), len(s_labels)))
    for j, (sf, sm) in enumerate(s_labels):
        g = gsys.state(sf, sm)
        for i, (df, dm) in enumerate(d_labels):
            values[i, j] = relative_strength(g, esys.state(df, dm), geometry)
    values.setflags(write=False)
    return StrengthTable(
        geometry=geometry, B=B, d_labels=d_labels, s_labels=s_labels, values=values
    )


def encodable_states(
    table: StrengthTable, threshold: float = 0.03, ground_label=(2, 2)
) -> tuple[tuple[HalfInt, HalfInt], ...]:
    """Excited states reachable from one ground state above a strength cut.

    Ordered by (F~ descending, m descending); for the default ground
    |6S1/2, F~=2, m=2> and threshold this reproduces the |1>..|12> index
    assignment of the 13-level encoding.
    """
    column = table.column(ground_label)
    picked = [lab for lab, s in column.items() if s > threshold]
    picked.sort(key=lambda lab: (-lab[0].twice, -lab[1].twice))
    return tuple(picked)
