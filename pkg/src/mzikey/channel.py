"""Physical-layer model of the two-way interferometric link.

Bob's shifter (phase ``phi``) acts only on outbound light, Alice's shifter
(phase ``psi``) only on inbound light.  The unknown path-length bias
``static_offset`` and Alice's calibration ``trim`` sit in the shared arm, so
both passes see them.  Per-bit jitter perturbs Bob's shifter and therefore
rides along with the outbound light into the return pass.

Eavesdroppers get :class:`TapObservation` values only: three intensity-derived
reals at a mid-channel point.  No amplitude or absolute phase leaves this
module through that type.
"""
from __future__ import annotations

import hashlib
import json
import math
from dataclasses import asdict, dataclass, replace
from typing import NamedTuple, Optional

import numpy as np

from . import optics
from .optics import FieldPair, Measurement

MID_OUTBOUND = "mid-outbound"
MID_INBOUND = "mid-inbound"
TAP_POINTS = (MID_OUTBOUND, MID_INBOUND)

#: A detector pair summing to no more than this many noise sigmas is dark.
DARK_SIGMAS = 10.0

#: Tap readings are reported to this many decimals.  Float round-off in the
#: last few ulps depends on the absolute phase, which no real detector resolves.
TAP_DECIMALS = 12


@dataclass(frozen=True)
class ChannelConfig:
    static_offset: float = 0.0
    phase_jitter_sd: float = 0.0
    detector_error_sd: float = 0.0
    seed: int = 0

    def __post_init__(self):
        for name in ("static_offset", "phase_jitter_sd", "detector_error_sd"):
            if not math.isfinite(getattr(self, name)):
                raise ValueError(f"{name} must be finite")
        if self.phase_jitter_sd < 0 or self.detector_error_sd < 0:
            raise ValueError("noise standard deviations must be >= 0")

    @property
    def noiseless(self) -> bool:
        return self.phase_jitter_sd == 0 and self.detector_error_sd == 0

    def to_dict(self) -> dict:
        return asdict(self)

    def digest(self) -> str:
        blob = json.dumps(self.to_dict(), sort_keys=True).encode()
        return hashlib.sha256(blob).hexdigest()[:16]

    def with_(self, **changes) -> "ChannelConfig":
        return replace(self, **changes)


@dataclass(frozen=True)
class StagedFields:
    """Fields at every labelled region for one bit.

    ``jitter`` is the phase perturbation drawn for this bit; it is kept so the
    inbound pass reuses the same draw.
    """

    phi: float
    jitter: float
    trim: float
    e1: FieldPair
    e34: FieldPair
    e56: FieldPair
    psi: Optional[float] = None
    e78: Optional[FieldPair] = None
    e910: Optional[FieldPair] = None

    def to_dict(self) -> dict:
        out = {"phi": self.phi, "psi": self.psi, "jitter": self.jitter, "trim": self.trim}
        for name in ("e1", "e34", "e56", "e78", "e910"):
            f = getattr(self, name)
            out[name] = None if f is None else f.to_dict()
        return out


@dataclass(frozen=True)
class TapObservation:
    point: str
    intensity_upper: float
    intensity_lower: float
    interference: float

    def as_tuple(self) -> tuple[float, float, float]:
        return (self.intensity_upper, self.intensity_lower, self.interference)


def _draw_jitter(cfg: ChannelConfig, rng: np.random.Generator, size=None):
    if cfg.phase_jitter_sd > 0:
        return rng.normal(0.0, cfg.phase_jitter_sd, size)
    return 0.0 if size is None else np.zeros(size)


def propagate_outbound(
    phi: float, cfg: ChannelConfig, rng: np.random.Generator, trim: float = 0.0
) -> StagedFields:
    """Bob to Alice.  Alice's basis shifter is not in this path."""
    jitter = float(_draw_jitter(cfg, rng))
    e1 = FieldPair.source()
    e34 = optics.apply(
        optics.phase_shifter(phi + cfg.static_offset + trim + jitter)
        @ optics.beam_splitter(),
        e1,
        "E34",
    )
    e56 = optics.apply(optics.beam_splitter(), e34, "E56")
    return StagedFields(float(phi), jitter, float(trim), e1, e34, e56)


def propagate_inbound(staged: StagedFields, psi: float, cfg: ChannelConfig) -> StagedFields:
    """Alice reflects the outbound light back through the same interferometer.

    Only ``psi`` (plus the shared static phase) is applied on the way back;
    Bob's shifter is not in this path.
    """
    e78 = optics.apply(
        optics.phase_shifter(psi + cfg.static_offset + staged.trim)
        @ optics.beam_splitter(),
        staged.e56,
        "E78",
    )
    e910 = optics.apply(optics.beam_splitter(), e78, "E910")
    return replace(staged, psi=float(psi), e78=e78, e910=e910)


def tap(point: str, staged: StagedFields) -> TapObservation:
    """Intensities and interference at a transmission-line tap."""
    if point == MID_OUTBOUND:
        f = staged.e34
    elif point == MID_INBOUND:
        f = staged.e78
        if f is None:
            raise ValueError("inbound pass has not been propagated")
    else:
        raise ValueError(f"can only tap {TAP_POINTS}, not {point!r}")
    m = optics.observe(f)
    iu, il, inter = np.round([m.intensity_upper, m.intensity_lower, m.interference], TAP_DECIMALS)
    return TapObservation(point, float(iu), float(il), float(inter))


def _noisy_visibility(iu, il, sd):
    total = iu + il
    v = np.clip(optics.visibility(iu, il), -1.0, 1.0)
    dark = total <= (DARK_SIGMAS * sd if sd > 0 else 0.0)
    return np.where(dark, np.nan, v)


def detect(fields: FieldPair, cfg: ChannelConfig, rng: np.random.Generator) -> Measurement:
    """Detector pair reading with additive Gaussian intensity error."""
    m = optics.observe(fields)
    sd = cfg.detector_error_sd
    if sd == 0:
        return m
    iu, il = np.array([m.intensity_upper, m.intensity_lower]) + rng.normal(0.0, sd, 2)
    v = float(_noisy_visibility(iu, il, sd))
    return Measurement(float(iu), float(il), None if math.isnan(v) else v, m.interference)


class LinkResult(NamedTuple):
    v_a: np.ndarray
    v_b: np.ndarray
    e34: np.ndarray
    e56: np.ndarray
    e78: np.ndarray
    e910: np.ndarray


def simulate_link(
    phi,
    psi,
    cfg: ChannelConfig,
    rng: np.random.Generator,
    trim: float = 0.0,
) -> LinkResult:
    """Batched round trip for many bits at once.

    Returns Alice's and Bob's visibilities (NaN where a detector pair is dark)
    together with the complex fields at every stage, shape ``(n, 2)``.
    Random draws, in order: jitter ``(n,)``, Alice's detector noise
    ``(n, 2)``, Bob's detector noise ``(n, 2)``.
    """
    phi = np.atleast_1d(np.asarray(phi, dtype=float))
    psi = np.broadcast_to(np.asarray(psi, dtype=float), phi.shape)
    n = phi.shape[0]
    jitter = _draw_jitter(cfg, rng, n)
    bs = optics.beam_splitter()
    src = np.array([1.0, 0.0], dtype=complex)

    shared = cfg.static_offset + trim
    e34 = optics.phase_shifters(phi + shared + jitter) @ (bs @ src)
    e56 = e34 @ bs.T
    e78 = np.einsum("nij,nj->ni", optics.phase_shifters(psi + shared), e56 @ bs.T)
    e910 = e78 @ bs.T

    sd = cfg.detector_error_sd
    ia = np.stack(optics.intensities(e56), axis=-1)
    ib = np.stack(optics.intensities(e910), axis=-1)
    if sd > 0:
        ia = ia + rng.normal(0.0, sd, (n, 2))
        ib = ib + rng.normal(0.0, sd, (n, 2))
    v_a = _noisy_visibility(ia[:, 0], ia[:, 1], sd)
    v_b = _noisy_visibility(ib[:, 0], ib[:, 1], sd)
    return LinkResult(v_a, v_b, e34, e56, e78, e910)


def tap_batch(point: str, link: LinkResult) -> np.ndarray:
    """TapObservation triples for a batch, shape ``(n, 3)``."""
    if point == MID_OUTBOUND:
        f = link.e34
    elif point == MID_INBOUND:
        f = link.e78
    else:
        raise ValueError(f"can only tap {TAP_POINTS}, not {point!r}")
    iu, il = optics.intensities(f)
    return np.round(np.stack([iu, il, optics.interference(f)], axis=-1), TAP_DECIMALS)


def replica_readings(phi, eve_offset) -> np.ndarray:
    """Port visibilities of an eavesdropper's replica interferometer.

    This is the concession granted to a brute-force eavesdropper: a lossless,
    non-disturbing copy of Bob's outbound light through her own interferometer,
    whose calibration differs from the legitimate one by ``eve_offset``.  Only
    the real visibility is returned.
    """
    phi = np.atleast_1d(np.asarray(phi, dtype=float))
    offset = np.broadcast_to(np.asarray(eve_offset, dtype=float), phi.shape)
    out = optics.mzi_transforms(phi + offset) @ np.array([1.0, 0.0], dtype=complex)
    return optics.visibility(*optics.intensities(out))
