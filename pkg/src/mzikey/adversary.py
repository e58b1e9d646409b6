"""Eavesdropping strategies and their success statistics.

Eve is granted the generous concession model: perfect, non-disturbing taps of
the mid-channel intensities and interference, and for the brute-force attack
a lossless replica interferometer.  Her replica's calibration is independent
of the legitimate one, so the labelling she recovers is either Bob's key or
its complement, with the parity unknown to her.

Without per-bit randomisation (sifting or per-bit initialization) that parity
is one draw per session: storing the block and flipping it later if needed
(the memory attack) then wins with certainty.  With per-bit randomisation the
parity is redrawn for every kept bit and a block guess succeeds only with
probability ``2**-n`` per candidate.
"""
from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field
from typing import Optional, Sequence

import numpy as np

from . import channel
from .channel import ChannelConfig, TapObservation

PASSIVE_TAP = "passive-tap"
BRUTE_FORCE = "brute-force-interferometer"
MEMORY_ATTACK = "memory-attack"
INTERCEPT_RESEND = "intercept-resend"
STRATEGIES = (PASSIVE_TAP, BRUTE_FORCE, MEMORY_ATTACK, INTERCEPT_RESEND)

UNSIFTED = "unsifted"
SIFTED = "sifted"

#: Interference at every basis point, mid-outbound and mid-inbound alike.
BASIS_INTERFERENCE = 1.0


@dataclass(frozen=True)
class EveStrategy:
    kind: str
    params: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.kind not in STRATEGIES:
            raise ValueError(f"unknown strategy {self.kind!r}; choose from {STRATEGIES}")


@dataclass
class AttackReport:
    strategy: str
    n_bits: int
    trials: int
    per_bit_success: float
    block_success: float
    eta_analytic: float
    expected_block_success: Optional[float] = None
    detected_fraction: Optional[float] = None
    extra: dict = field(default_factory=dict)

    @property
    def sigma(self) -> float:
        """Binomial standard error of ``block_success`` around its expectation."""
        p = self.expected_block_success if self.expected_block_success is not None else self.block_success
        return math.sqrt(p * (1 - p) / self.trials) if self.trials else float("nan")

    def to_json(self) -> dict:
        # NaN marks "not applicable"; JSON has no NaN.
        return {
            k: (None if isinstance(v, float) and math.isnan(v) else v)
            for k, v in asdict(self).items()
        }


def eavesdrop_success_probability(n: int, mode: str = SIFTED) -> float:
    """Chance of guessing an ``n``-bit final key in one try.

    Unsifted keys only hide one global parity bit (1/2); sifted keys are
    independent per bit (``2**-n``).
    """
    if n < 1:
        raise ValueError("key length must be >= 1")
    if mode == UNSIFTED:
        return 0.5
    if mode == SIFTED:
        return 2.0 ** -n
    raise ValueError(f"mode must be {UNSIFTED!r} or {SIFTED!r}")


# -- passive tap -----------------------------------------------------------

@dataclass
class TapGuess:
    bits: np.ndarray
    off_basis: bool


def passive_tap_guess(
    observations: Sequence[TapObservation] | np.ndarray,
    rng: np.random.Generator,
    tol: float = 1e-9,
) -> TapGuess:
    """Guess Bob's bits from tap readings.

    Basis-point readings are identical for both bits, so the best guess is a
    fair coin per bit.  Readings off the basis interference value are flagged:
    they mean the parties are not using the orthogonal basis.
    """
    if isinstance(observations, np.ndarray):
        triples = observations.reshape(-1, 3)
    else:
        triples = np.array([o.as_tuple() for o in observations], dtype=float).reshape(-1, 3)
    off = bool(np.any(np.abs(triples[:, 2] - BASIS_INTERFERENCE) > tol))
    return TapGuess(rng.integers(0, 2, len(triples)), off)


def evaluate_passive_tap(
    n_bits: int, cfg: ChannelConfig = ChannelConfig(), seed: int = 0
) -> AttackReport:
    rng = np.random.default_rng(seed)
    x = rng.integers(0, 2, n_bits)
    psi = rng.integers(0, 2, n_bits)
    link = channel.simulate_link(x * math.pi, psi * math.pi, cfg, rng)
    obs = channel.tap_batch(channel.MID_OUTBOUND, link)
    guess = passive_tap_guess(obs, rng)
    hits = guess.bits == x
    return AttackReport(
        PASSIVE_TAP, n_bits, 1,
        per_bit_success=float(hits.mean()) if n_bits else float("nan"),
        block_success=float(hits.all()),
        eta_analytic=eavesdrop_success_probability(max(n_bits, 1), SIFTED),
        extra={"off_basis": guess.off_basis},
    )


# -- brute-force replica and memory attack ---------------------------------

def brute_force_interferometer(
    readings: np.ndarray, rng: np.random.Generator
) -> np.ndarray:
    """Label each replica reading: positive visibility -> 0, negative -> 1.

    A reading of exactly 0 carries no sign and is labelled by coin flip.
    """
    readings = np.asarray(readings, dtype=float)
    labels = (readings < 0).astype(np.int8)
    tie = readings == 0
    if tie.any():
        labels[tie] = rng.integers(0, 2, int(tie.sum()))
    return labels


def alignment_parity(delta_prime, delta_true, rng: np.random.Generator) -> np.ndarray:
    """1 where Eve's replica is inverted relative to the true calibration.

    Follows the sign of ``cos(delta_prime - delta_true)``; an exact zero is a
    coin flip.
    """
    c = np.cos(np.asarray(delta_prime, dtype=float) - np.asarray(delta_true, dtype=float))
    s = (c < 0).astype(np.int8)
    tie = c == 0
    if np.any(tie):
        s = np.where(tie, rng.integers(0, 2, np.shape(c)), s)
    return np.atleast_1d(s)


def replica_map(
    x_bits: np.ndarray,
    rng: np.random.Generator,
    *,
    per_bit: bool = False,
    delta_prime: Optional[float] = None,
    delta_true: float = 0.0,
) -> np.ndarray:
    """Eve's labelling of a session's bits through her replica interferometer.

    Her replica offset relative to the true calibration is
    ``delta_true - delta_prime``; when ``delta_prime`` is not given she is
    uninformed and it is uniform.  ``per_bit`` redraws it for every bit, which
    is what per-bit basis randomisation does to her.
    """
    x_bits = np.asarray(x_bits, dtype=int)
    n = x_bits.size
    if delta_prime is None:
        delta_prime = rng.uniform(0.0, 2 * math.pi, n if per_bit else 1)
    offset = np.broadcast_to(np.asarray(delta_true) - np.asarray(delta_prime), (n,))
    readings = channel.replica_readings(x_bits * math.pi, offset)
    # Readings at exactly cos = 0 are coin flips; round off the last ulp so
    # that offsets of pi/2 count as ties.
    readings = np.where(np.abs(readings) < 1e-12, 0.0, readings)
    return brute_force_interferometer(readings, rng)


def memory_attack(block: Sequence[int]) -> tuple[np.ndarray, np.ndarray]:
    """Both global parities of a stored block guess."""
    g = np.asarray(block, dtype=np.int8)
    return g, 1 - g


def evaluate_brute_force(
    n_sessions: int, n_bits: int, seed: int = 0, *, per_bit: bool = False
) -> AttackReport:
    """Replica labelling against Bob's raw key ``x`` over many sessions.

    ``block_success`` is the exact-match rate; ``extra['recovered']`` is the
    rate at which the map equals ``x`` or its complement.
    """
    rng = np.random.default_rng(seed)
    x = rng.integers(0, 2, (n_sessions, n_bits))
    if per_bit:
        delta_prime = rng.uniform(0.0, 2 * math.pi, (n_sessions, n_bits))
    else:
        delta_prime = np.repeat(rng.uniform(0.0, 2 * math.pi, (n_sessions, 1)), n_bits, axis=1)
    readings = channel.replica_readings(x.ravel() * math.pi, -delta_prime.ravel())
    labels = brute_force_interferometer(readings, rng).reshape(n_sessions, n_bits)
    exact = (labels == x).all(axis=1)
    flipped = (labels != x).all(axis=1)
    # Correlation of Eve's +-1 labels with the key, one value per session.
    corr = ((2 * labels - 1) * (2 * x - 1)).mean(axis=1)
    return AttackReport(
        BRUTE_FORCE, n_bits, n_sessions,
        per_bit_success=float((labels == x).mean()),
        block_success=float(exact.mean()),
        eta_analytic=eavesdrop_success_probability(n_bits, SIFTED if per_bit else UNSIFTED),
        expected_block_success=eavesdrop_success_probability(n_bits, SIFTED if per_bit else UNSIFTED),
        extra={
            "recovered": float((exact | flipped).mean()),
            "mean_correlation": float(corr.mean()),
            "mean_abs_correlation": float(np.abs(corr).mean()),
            "correlation_se": float(corr.std(ddof=1) / math.sqrt(n_sessions)) if n_sessions > 1 else float("nan"),
        },
    )


def evaluate_memory_attack(
    n: int,
    trials: int,
    seed: int = 0,
    *,
    sifted: bool = True,
    chunk: int = 1_000_000,
) -> AttackReport:
    """Monte Carlo of the two-candidate memory attack on ``n``-bit final keys.

    Each trial draws a key and Eve's replica parities (one per session when
    unsifted, one per bit when sifted), forms her block guess and both
    candidates, and counts a success if either equals the key.
    """
    if n < 1:
        raise ValueError("n must be >= 1")
    rng = np.random.default_rng(seed)
    wins = 0
    bit_hits = 0
    done = 0
    while done < trials:
        m = min(chunk, trials - done)
        key = rng.integers(0, 2, (m, n), dtype=np.int8)
        if sifted:
            parity = rng.integers(0, 2, (m, n), dtype=np.int8)
        else:
            parity = np.repeat(rng.integers(0, 2, (m, 1), dtype=np.int8), n, axis=1)
        guess = key ^ parity
        first, second = guess, 1 - guess
        wins += int(((first == key).all(axis=1) | (second == key).all(axis=1)).sum())
        bit_hits += int((first == key).sum())
        done += m
    mode = SIFTED if sifted else UNSIFTED
    eta = eavesdrop_success_probability(n, mode)
    return AttackReport(
        MEMORY_ATTACK, n, trials,
        per_bit_success=bit_hits / (trials * n) if trials else float("nan"),
        block_success=wins / trials if trials else float("nan"),
        eta_analytic=eta,
        expected_block_success=min(1.0, 2 * eta),
    )


# -- intercept and resend --------------------------------------------------

@dataclass
class InterceptResend:
    """Man in the middle posing as Alice to Bob and as Bob to Alice.

    Eve's interferometer is offset from the legitimate calibration by
    ``theta_e = s*pi + u`` with ``s`` a fair bit and ``u`` uniform on
    ``[-disturbance, disturbance]``.  ``disturbance = pi/2`` (the default)
    makes ``theta_e`` uniform on the circle, i.e. fully independent.  A fixed
    ``offset`` overrides the draw.  One draw per session (per call).

    Toward Bob she reflects his light with her own random basis, so Bob's
    pass is clean.  Toward Alice she re-launches her reading of Bob's bit from
    her own source, so Alice's visibility is ``cos(phi_hat + theta_e)``.
    """

    disturbance: float = math.pi / 2
    offset: Optional[float] = None
    last_offset: Optional[float] = field(default=None, repr=False)
    last_reading: Optional[np.ndarray] = field(default=None, repr=False)

    def __post_init__(self):
        if not 0 <= self.disturbance <= math.pi / 2:
            raise ValueError("disturbance must lie in [0, pi/2]")

    def to_json(self) -> dict:
        """Enough to rebuild the link when a transcript is replayed."""
        return {"kind": INTERCEPT_RESEND, "disturbance": self.disturbance, "offset": self.offset}

    @classmethod
    def from_json(cls, d: dict) -> "InterceptResend":
        return cls(d["disturbance"], d["offset"])

    def draw_offset(self, rng: np.random.Generator) -> float:
        if self.offset is not None:
            return float(self.offset)
        s = int(rng.integers(0, 2))
        return s * math.pi + float(rng.uniform(-self.disturbance, self.disturbance))

    def __call__(self, phi, psi, cfg: ChannelConfig, rng: np.random.Generator, trim=0.0):
        phi = np.atleast_1d(np.asarray(phi, dtype=float))
        psi = np.broadcast_to(np.asarray(psi, dtype=float), phi.shape)
        theta = self.draw_offset(rng)
        reading = channel.replica_readings(phi, theta)
        phi_hat = brute_force_interferometer(reading, rng) * math.pi
        psi_e = rng.integers(0, 2, phi.size) * math.pi
        # Bob <-> Eve: Eve reflects like Alice, so this leg is calibrated.
        clean = cfg.with_(static_offset=0.0)
        bob_leg = channel.simulate_link(phi, psi_e, clean, rng)
        # Eve -> Alice: Eve's source is offset by theta from Alice's trim.
        alice_leg = channel.simulate_link(phi_hat + theta, psi, clean, rng)
        self.last_offset = theta
        self.last_reading = reading
        return alice_leg.v_a, bob_leg.v_b


def intercept_resend(
    phi_bits: np.ndarray,
    disturbance: float,
    cfg: ChannelConfig,
    rng: np.random.Generator,
    tol: float = 0.01,
    psi_bits: Optional[np.ndarray] = None,
) -> dict:
    """Run one intercepted session of raw bits and summarise what the parties see."""
    phi_bits = np.asarray(phi_bits, dtype=int)
    if psi_bits is None:
        psi_bits = rng.integers(0, 2, phi_bits.size)
    eve = InterceptResend(disturbance)
    v_a, v_b = eve(phi_bits * math.pi, psi_bits * math.pi, cfg, rng)
    err_a = ~(np.abs(np.abs(v_a) - 1.0) <= tol)
    err_b = ~(np.abs(np.abs(v_b) - 1.0) <= tol)
    return {
        "theta_e": eve.last_offset,
        "eve_readings": eve.last_reading,
        "v_a": v_a,
        "v_b": v_b,
        "error_rate": float((err_a | err_b).mean()),
        "va_deficit": float(np.mean(1.0 - np.abs(v_a))),
    }


def intercept_error_rate(disturbance: float, tol: float = 0.01) -> float:
    """Expected fraction of sessions whose every bit is flagged at Alice.

    Alice's reading is ``cos(phi_hat + theta_e)``; a session passes only when
    ``|cos(u)| >= 1 - tol``, i.e. ``|u| <= arccos(1 - tol)``.
    """
    if disturbance == 0:
        return 0.0
    a = math.acos(1.0 - tol)
    return max(0.0, disturbance - a) / disturbance


def evaluate_intercept_resend(
    sessions: int,
    n_bits: int,
    disturbance: float = math.pi / 2,
    cfg: ChannelConfig = ChannelConfig(),
    seed: int = 0,
    tol: float = 0.01,
) -> AttackReport:
    rng = np.random.default_rng(seed)
    detected = 0
    errors = 0.0
    for _ in range(sessions):
        r = intercept_resend(rng.integers(0, 2, n_bits), disturbance, cfg, rng, tol)
        errors += r["error_rate"]
        detected += r["error_rate"] > 0
    return AttackReport(
        INTERCEPT_RESEND, n_bits, sessions,
        per_bit_success=float("nan"),
        block_success=float("nan"),
        eta_analytic=eavesdrop_success_probability(n_bits, SIFTED),
        detected_fraction=detected / sessions if sessions else float("nan"),
        extra={"error_rate": errors / sessions if sessions else float("nan"),
               "expected_error_rate": intercept_error_rate(disturbance, tol)},
    )
