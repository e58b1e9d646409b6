"""Network initialization: calibrate the unknown static offset, then settle
the remaining pi ambiguity with public O/X verdicts.

Alice scans her trim ``delta`` until her visibility on Bob's test bits is
maximal in magnitude.  ``|V_A|`` cannot tell ``delta`` from ``delta + pi``,
so the parties then exchange rounds: Alice announces ``V_A``, Bob announces
whether his ``V_B`` showed the round-trip identity (O) or not (X).  Alice
compares Bob's verdicts with the ones she predicts from her readings under
the aligned hypothesis and keeps or flips ``delta`` by majority.

The same statistics, compared against a stored baseline, serve as the
physical-layer authentication check.
"""
from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field
from typing import Optional, Sequence

import numpy as np

from . import channel
from .channel import ChannelConfig
from .protocol import DEFAULT_TOL, channel_link

TWO_PI = 2 * math.pi
DEFAULT_STEP = 1e-3
DEFAULT_ROUNDS = 8
BASELINE_VERSION = 1


class ScanFailure(RuntimeError):
    """No grid point brought ``|V_A|`` within tolerance of 1."""


class InvalidRound(RuntimeError):
    """Bob's visibility was neither -1 nor +1; the round has to be repeated."""


class Inconclusive(RuntimeError):
    """Too few valid rounds, or a vote too close to a tie."""


@dataclass(frozen=True)
class InitRound:
    phi_bit: int
    psi_bit: int  # 0: Alice used delta, 1: delta + pi
    v_a: float
    v_b: float
    verdict: Optional[str]  # "O", "X", or None for an invalid round

    @property
    def valid(self) -> bool:
        return self.verdict is not None

    @property
    def predicted(self) -> str:
        """Verdict Alice expects if her delta is aligned."""
        read_bit = 0 if self.v_a > 0 else 1
        return "O" if read_bit == self.psi_bit else "X"

    @property
    def consistent(self) -> bool:
        return self.valid and self.predicted == self.verdict

    def public(self) -> dict:
        """What goes over the public channel: Alice's V_A and Bob's verdict."""
        return {"v_a": self.v_a, "verdict": self.verdict}


@dataclass
class InitState:
    delta_estimate: float
    parity_resolved: bool = False
    rounds: list = field(default_factory=list)

    @property
    def valid_rounds(self) -> list:
        return [r for r in self.rounds if r.valid]

    @property
    def consistency(self) -> float:
        return round_statistics(self.rounds)["consistency"]

    def basis(self) -> tuple[float, float]:
        """Alice's corrected basis phases."""
        return (self.delta_estimate, (self.delta_estimate + math.pi) % TWO_PI)

    def to_text(self) -> str:
        stats = round_statistics(self.rounds)
        return json.dumps(
            {
                "version": BASELINE_VERSION,
                "delta": self.delta_estimate,
                "parity_resolved": self.parity_resolved,
                "stats": stats,
                "rounds": [asdict(r) for r in self.rounds],
            },
            sort_keys=True,
            indent=1,
        )

    @classmethod
    def from_text(cls, text: str) -> "InitState":
        d = json.loads(text)
        if d.get("version") != BASELINE_VERSION:
            raise ValueError(f"unsupported baseline version {d.get('version')!r}")
        return cls(d["delta"], d["parity_resolved"], [InitRound(**r) for r in d["rounds"]])

    def save(self, path) -> None:
        with open(path, "w") as fh:
            fh.write(self.to_text() + "\n")

    @classmethod
    def load(cls, path) -> "InitState":
        with open(path) as fh:
            return cls.from_text(fh.read())


def scan_delta(
    test_bits: Sequence[int],
    cfg: ChannelConfig,
    step: float = DEFAULT_STEP,
    tol: float = DEFAULT_TOL,
    rng: Optional[np.random.Generator] = None,
) -> float:
    """Grid search of Alice's trim over ``[0, 2*pi)``.

    Every grid point is a fresh pulse per test bit.  The score is the mean
    ``|V_A|`` over the test bits; the returned trim is the first maximiser,
    reduced mod 2*pi.  It equals ``-static_offset`` or ``pi - static_offset``
    up to one step.
    """
    if not step > 0:
        raise ValueError("step must be > 0")
    rng = np.random.default_rng(cfg.seed) if rng is None else rng
    bits = np.asarray(test_bits, dtype=int)
    grid = np.arange(0.0, TWO_PI, step)
    phi = np.tile(bits * math.pi, grid.size)
    trims = np.repeat(grid, bits.size)
    res = channel.simulate_link(phi, phi, cfg, rng, trims)
    score = np.nan_to_num(np.abs(res.v_a), nan=0.0).reshape(grid.size, bits.size).mean(axis=1)
    best = int(np.argmax(score))
    if score[best] < 1.0 - tol:
        raise ScanFailure(f"best mean |V_A| {score[best]:.4f} < {1 - tol}")
    return float(grid[best])


def _verdict(v_b: float, tol: float) -> Optional[str]:
    if abs(v_b + 1.0) <= tol:
        return "O"
    if abs(v_b - 1.0) <= tol:
        return "X"
    return None


def _measure_round(phi_bit, psi_bit, delta, cfg, rng, tol, link) -> InitRound:
    v_a, v_b = link(
        np.array([phi_bit * math.pi]), np.array([psi_bit * math.pi]), cfg, rng, delta
    )
    v_a, v_b = float(v_a[0]), float(v_b[0])
    return InitRound(int(phi_bit), int(psi_bit), v_a, v_b, _verdict(v_b, tol))


def init_round(
    phi_bit: int,
    psi_bit: int,
    delta: float,
    cfg: ChannelConfig,
    rng: np.random.Generator,
    tol: float = DEFAULT_TOL,
    link=channel_link,
) -> InitRound:
    """One announcement round.  Raises :class:`InvalidRound` if ``|V_B|`` is
    not 1 within ``tol``."""
    r = _measure_round(phi_bit, psi_bit, delta, cfg, rng, tol, link)
    if not r.valid:
        raise InvalidRound(f"V_B = {r.v_b}")
    return r


def collect_rounds(
    k: int,
    delta: float,
    cfg: ChannelConfig,
    rng: np.random.Generator,
    tol: float = DEFAULT_TOL,
    link=channel_link,
) -> list[InitRound]:
    """``k`` rounds with random bases; invalid rounds are kept with verdict None."""
    out = []
    for _ in range(k):
        phi_bit = int(rng.integers(0, 2))
        psi_bit = int(rng.integers(0, 2))
        out.append(_measure_round(phi_bit, psi_bit, delta, cfg, rng, tol, link))
    return out


def resolve_parity(rounds: Sequence[InitRound], delta: float, k: int = DEFAULT_ROUNDS) -> InitState:
    """Keep ``delta`` or add pi to it by majority over the valid rounds."""
    valid = [r for r in rounds if r.valid]
    if len(valid) < k:
        raise Inconclusive(f"{len(valid)} valid rounds, need {k}")
    agree = sum(r.consistent for r in valid)
    if abs(agree - len(valid) / 2) <= 1:
        raise Inconclusive(f"{agree}/{len(valid)} rounds consistent")
    if agree < len(valid) / 2:
        delta = (delta + math.pi) % TWO_PI
        # Relabel Alice's choices against the corrected trim so the stored
        # rounds describe the calibrated channel.
        rounds = [
            InitRound(r.phi_bit, 1 - r.psi_bit, r.v_a, r.v_b, r.verdict) for r in rounds
        ]
    return InitState(float(delta), True, list(rounds))


def initialize(
    cfg: ChannelConfig,
    rng: Optional[np.random.Generator] = None,
    *,
    n_test: int = 16,
    k: int = DEFAULT_ROUNDS,
    step: float = DEFAULT_STEP,
    tol: float = DEFAULT_TOL,
    max_batches: int = 8,
    link=channel_link,
) -> InitState:
    """Scan, then collect rounds in batches of ``k`` until parity resolves."""
    rng = np.random.default_rng(cfg.seed) if rng is None else rng
    test_bits = rng.integers(0, 2, n_test)
    delta = scan_delta(test_bits, cfg, step, tol, rng)
    rounds: list[InitRound] = []
    for _ in range(max_batches):
        rounds += collect_rounds(k, delta, cfg, rng, tol, link)
        try:
            return resolve_parity(rounds, delta, k)
        except Inconclusive:
            continue
    raise Inconclusive(f"parity unresolved after {len(rounds)} rounds")


def round_statistics(rounds: Sequence[InitRound]) -> dict:
    valid = [r for r in rounds if r.valid]
    n = len(rounds)
    v_a = np.array([r.v_a for r in rounds], dtype=float)
    return {
        "n": n,
        "invalid_fraction": (n - len(valid)) / n if n else 0.0,
        "consistency": sum(r.consistent for r in valid) / len(valid) if valid else 0.0,
        "mean_abs_va": float(np.nanmean(np.abs(v_a))) if np.isfinite(v_a).any() else 0.0,
    }


def authenticate(
    rounds: Sequence[InitRound],
    baseline: InitState,
    *,
    consistency_shift: float = 0.1,
    invalid_shift: float = 0.1,
    va_shift: float = 2 * DEFAULT_TOL,
) -> str:
    """``"suspect"`` if the rounds drift from the baseline, else ``"clean"``.

    A round set is suspect when verdict consistency drops, invalid rounds
    rise, or the mean ``|V_A|`` moves, each by more than its threshold.
    """
    now = round_statistics(rounds)
    ref = round_statistics(baseline.rounds)
    if not rounds:
        return "suspect"
    if abs(now["consistency"] - ref["consistency"]) > consistency_shift:
        return "suspect"
    if now["invalid_fraction"] - ref["invalid_fraction"] > invalid_shift:
        return "suspect"
    if abs(now["mean_abs_va"] - ref["mean_abs_va"]) > va_shift:
        return "suspect"
    return "clean"
