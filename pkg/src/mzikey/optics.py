"""Transfer-matrix algebra for the round-trip Mach-Zehnder channel.

Conventions
-----------
A field pair is a 2-vector ``(upper, lower)`` in units of sqrt(I0), where I0
is the source intensity.  Component ordering is fixed once here and every
sign elsewhere follows from it:

* outbound, between the two beam splitters: upper = E3, lower = E4
* at Alice's ports: upper = E5, lower = E6
* inbound, between the beam splitters: upper = E7, lower = E8
* at Bob's ports: upper = E9, lower = E10

Phase shifters act on the lower component.  Mirrors and the optical delay
line contribute the same phase to both arms and are modelled as identity.

Visibility of a pair is ``(I_lower - I_upper) / (I_lower + I_upper)``, i.e.
``V_ij = (I_j - I_i) / (I_j + I_i)`` with ``j`` the higher-numbered field.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

SQRT1_2 = 1.0 / math.sqrt(2.0)

#: Tolerance for algebraic identities (unitarity, round-trip identity).
ALGEBRA_TOL = 1e-12
#: Tolerance for closed-form curve checks.
CURVE_TOL = 1e-9

STAGES = ("E1", "E34", "E56", "E78", "E910")

_BS = SQRT1_2 * np.array([[1.0, 1.0j], [1.0j, 1.0]], dtype=complex)


def _check_phase(phase: float) -> float:
    phase = float(phase)
    if not math.isfinite(phase):
        raise ValueError(f"phase must be finite, got {phase!r}")
    return phase


@dataclass(frozen=True)
class FieldPair:
    """Complex amplitudes of the two MZI paths at one labelled stage."""

    upper: complex
    lower: complex
    stage: str = "E1"

    @classmethod
    def source(cls, amplitude: complex = 1.0) -> "FieldPair":
        """Input light ``(E1, 0)``."""
        return cls(complex(amplitude), 0j, "E1")

    def as_array(self) -> np.ndarray:
        return np.array([self.upper, self.lower], dtype=complex)

    @property
    def total_intensity(self) -> float:
        return abs(self.upper) ** 2 + abs(self.lower) ** 2

    def scaled(self, factor: complex) -> "FieldPair":
        return FieldPair(self.upper * factor, self.lower * factor, self.stage)

    def to_dict(self) -> dict:
        """Debug dump with full-precision re/im pairs."""
        return {
            "stage": self.stage,
            "upper": [self.upper.real, self.upper.imag],
            "lower": [self.lower.real, self.lower.imag],
        }

    @classmethod
    def from_dict(cls, d: dict) -> "FieldPair":
        return cls(complex(*d["upper"]), complex(*d["lower"]), d["stage"])


@dataclass(frozen=True)
class Measurement:
    """Intensities, visibility and interference of a field pair.

    ``visibility`` is ``None`` when both intensities vanish: a dark pair is
    undefined, not balanced.
    """

    intensity_upper: float
    intensity_lower: float
    visibility: Optional[float]
    interference: float

    @property
    def defined(self) -> bool:
        return self.visibility is not None


def beam_splitter() -> np.ndarray:
    """Lossless 50/50 splitter with a pi/2 phase on the reflected arm."""
    return _BS.copy()


def phase_shifter(phase: float) -> np.ndarray:
    """``diag(1, exp(i*phase))``; the shift is on the lower arm."""
    phase = _check_phase(phase)
    return np.array([[1.0, 0.0], [0.0, np.exp(1j * phase)]], dtype=complex)


def mzi_transform(phase: float) -> np.ndarray:
    """Single pass through the interferometer: ``BS @ Phi(phase) @ BS``."""
    return _BS @ phase_shifter(phase) @ _BS


def mzi_closed_form(phase: float) -> np.ndarray:
    """The same matrix written out entry by entry."""
    e = np.exp(1j * _check_phase(phase))
    return 0.5 * np.array(
        [[1 - e, 1j * (1 + e)], [1j * (1 + e), -(1 - e)]], dtype=complex
    )


def round_trip_transform(psi: float, phi: float) -> np.ndarray:
    """Bob-to-Alice-to-Bob matrix ``MZ(psi) @ MZ(phi)``.

    ``phi`` is Bob's outbound phase, ``psi`` Alice's inbound phase.  For
    ``psi == phi`` the result is ``-exp(i*phi)`` times the identity.
    """
    return mzi_transform(psi) @ mzi_transform(phi)


def return_arm_fields(phi: float, psi: float) -> FieldPair:
    """Inbound mid-channel fields (E7, E8) for unit input ``(1, 0)``.

    Built from the transforms: Alice's first splitter folds the light back,
    then her shifter adds ``psi`` to the lower arm.
    """
    e56 = mzi_transform(phi) @ np.array([1.0, 0.0], dtype=complex)
    e78 = phase_shifter(psi) @ _BS @ e56
    return FieldPair(complex(e78[0]), complex(e78[1]), "E78")


def apply(t: np.ndarray, f: FieldPair, stage: Optional[str] = None) -> FieldPair:
    """Matrix-vector product; the result carries ``stage`` if given."""
    out = np.asarray(t, dtype=complex) @ f.as_array()
    return FieldPair(complex(out[0]), complex(out[1]), stage or f.stage)


def visibility(i_upper, i_lower):
    """Vectorised ``(I_lower - I_upper) / (I_lower + I_upper)``; NaN where dark."""
    i_upper = np.asarray(i_upper, dtype=float)
    i_lower = np.asarray(i_lower, dtype=float)
    total = i_upper + i_lower
    with np.errstate(invalid="ignore", divide="ignore"):
        v = np.where(total > 0, (i_lower - i_upper) / np.where(total > 0, total, 1.0), np.nan)
    return v


def observe(f: FieldPair) -> Measurement:
    iu = abs(f.upper) ** 2
    il = abs(f.lower) ** 2
    total = iu + il
    v = (il - iu) / total if total > 0 else None
    return Measurement(iu, il, v, abs(f.upper + f.lower) ** 2)


def visibility_surface(phi: float, psi: float) -> float:
    """Bob's port visibility V_9,10 after the round trip."""
    f = apply(round_trip_transform(psi, phi), FieldPair.source(), "E910")
    return observe(f).visibility


def is_unitary(m: np.ndarray, tol: float = ALGEBRA_TOL) -> bool:
    m = np.asarray(m)
    return bool(np.all(np.abs(m.conj().T @ m - np.eye(m.shape[0])) <= tol))


# -- batched helpers -------------------------------------------------------
# Shapes: phases (...,) -> matrices (..., 2, 2); fields (..., 2).

def phase_shifters(phases) -> np.ndarray:
    phases = np.asarray(phases, dtype=float)
    out = np.zeros(phases.shape + (2, 2), dtype=complex)
    out[..., 0, 0] = 1.0
    out[..., 1, 1] = np.exp(1j * phases)
    return out


def mzi_transforms(phases) -> np.ndarray:
    return _BS @ phase_shifters(phases) @ _BS


def intensities(fields: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    fields = np.asarray(fields)
    return np.abs(fields[..., 0]) ** 2, np.abs(fields[..., 1]) ** 2


def interference(fields: np.ndarray) -> np.ndarray:
    fields = np.asarray(fields)
    return np.abs(fields[..., 0] + fields[..., 1]) ** 2
