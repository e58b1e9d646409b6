"""Seeded Monte Carlo scenarios and plot data.

Every trial gets its own generator seed spawned from the scenario seed and
the trial index, so results do not depend on worker scheduling.
"""
from __future__ import annotations

import configparser
import csv
import io
import json
import math
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from typing import Optional

import numpy as np

from . import adversary, channel, initialization, optics, protocol
from .adversary import AttackReport, EveStrategy
from .channel import ChannelConfig

INIT_POLICIES = ("per-session", "per-bit", "off")
CURVES = ("V56", "V34", "IN34", "IN78", "V910")
DEFAULT_RESOLUTION = 181


class ScenarioError(ValueError):
    pass


@dataclass(frozen=True)
class Scenario:
    n_bits: int = 1000
    channel: ChannelConfig = ChannelConfig()
    tol: float = protocol.DEFAULT_TOL
    sifting: bool = True
    init_policy: str = "off"
    adversary: Optional[EveStrategy] = None
    trials: int = 1
    seed: int = 0

    def validate(self) -> None:
        if self.n_bits < 1:
            raise ScenarioError("n_bits must be >= 1")
        if self.trials < 0:
            raise ScenarioError("trials must be >= 0")
        if self.init_policy not in INIT_POLICIES:
            raise ScenarioError(f"init_policy must be one of {INIT_POLICIES}")
        if self.init_policy == "per-bit" and self.sifting:
            raise ScenarioError(
                "per-bit initialization replaces sifting; use it only with sifting off"
            )
        if not 0 < self.tol < 1:
            raise ScenarioError("tol must lie in (0, 1)")

    @property
    def per_bit_randomised(self) -> bool:
        return self.sifting or self.init_policy == "per-bit"

    def to_json(self) -> dict:
        d = asdict(self)
        d["adversary"] = None if self.adversary is None else asdict(self.adversary)
        return d


@dataclass
class RunReport:
    """Aggregate over trials.  ``wall_time`` is kept out of the serialized
    form so that reports are reproducible byte for byte."""

    scenario: dict
    trials: int
    kept_rate: float
    error_rate: float
    agreement_failures: int
    attack: Optional[AttackReport] = None
    wall_time: float = field(default=0.0, compare=False)

    def to_json(self) -> dict:
        d = {
            "scenario": self.scenario,
            "trials": self.trials,
            "kept_rate": self.kept_rate,
            "error_rate": self.error_rate,
            "agreement_failures": self.agreement_failures,
            "attack": None if self.attack is None else self.attack.to_json(),
        }
        return d

    def dumps(self) -> str:
        return json.dumps(self.to_json(), sort_keys=True, indent=1) + "\n"

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["key", "value"])
        for k, v in _flatten(self.to_json()):
            w.writerow([k, v])
        return buf.getvalue()


def _flatten(d, prefix=""):
    for k in sorted(d):
        v = d[k]
        key = f"{prefix}{k}"
        if isinstance(v, dict):
            yield from _flatten(v, key + ".")
        else:
            yield key, json.dumps(v)


def trial_seeds(seed: int, trials: int) -> list[int]:
    children = np.random.SeedSequence(seed).spawn(trials)
    return [int(c.generate_state(1, np.uint64)[0]) for c in children]


def _link_for(s: Scenario):
    if s.adversary is not None and s.adversary.kind == adversary.INTERCEPT_RESEND:
        return adversary.InterceptResend(**s.adversary.params)
    return protocol.channel_link


def _kept_bits(stream) -> np.ndarray:
    return np.array([s.value for s in stream if s.is_bit], dtype=int)


def run_trial(s: Scenario, seed: int) -> dict:
    """One session, plus Eve's attempt on it when the scenario has an adversary."""
    rng = np.random.default_rng([seed, 7])
    trim = 0.0
    if s.init_policy != "off":
        trim = initialization.initialize(s.channel, rng, tol=s.tol).delta_estimate
    t = protocol.run_session(
        s.n_bits, s.channel, s.tol, seed,
        sifting=s.sifting, trim=trim, link=_link_for(s),
    )
    out = {
        "kept": t.kept_fraction,
        "errors": t.error_fraction,
        "agreed": t.agreed,
        "transcript": t,
    }
    if s.adversary is None:
        return out

    kind = s.adversary.kind
    if kind == adversary.INTERCEPT_RESEND:
        out["detected"] = bool(t.announcements)
        return out

    x = np.array([r.x.value for r in t.records])
    keep = np.array([sym.is_bit for sym in t.m_alice])
    key = _kept_bits(t.m_alice)
    if kind == adversary.PASSIVE_TAP:
        link = channel.simulate_link(
            x * math.pi, [r.psi for r in t.records], s.channel, rng, trim
        )
        obs = channel.tap_batch(channel.MID_OUTBOUND, link)
        guess = adversary.passive_tap_guess(obs, rng).bits[keep]
        hits = guess == key
        out["bit_hits"] = int(hits.sum())
        out["block_hit"] = bool(hits.all())
    else:
        labels = adversary.replica_map(x, rng, per_bit=s.per_bit_randomised)[keep]
        if kind == adversary.MEMORY_ATTACK:
            a, b = adversary.memory_attack(labels)
            out["block_hit"] = bool((a == key).all() or (b == key).all())
        else:
            out["block_hit"] = bool((labels == key).all())
        out["bit_hits"] = int((labels == key).sum())
    out["n_kept"] = int(key.size)
    return out


def _run_trial_args(args):
    s, seed = args
    r = run_trial(s, seed)
    r["transcript"] = r["transcript"].to_jsonl()
    return r


def run_monte_carlo(
    s: Scenario, workers: int = 1, keep_transcripts: bool = False
) -> tuple[RunReport, list[str]]:
    """Run all trials; returns the report and (optionally) every transcript."""
    s.validate()
    start = time.perf_counter()
    seeds = trial_seeds(s.seed, s.trials)
    jobs = [(s, sd) for sd in seeds]
    if workers > 1 and s.trials > 1:
        with ProcessPoolExecutor(workers) as pool:
            results = list(pool.map(_run_trial_args, jobs))
    else:
        results = [_run_trial_args(j) for j in jobs]

    n = len(results)
    attack = None
    if s.adversary is not None and n:
        kind = s.adversary.kind
        if kind == adversary.INTERCEPT_RESEND:
            attack = AttackReport(
                kind, s.n_bits, n,
                per_bit_success=float("nan"),
                block_success=float("nan"),
                eta_analytic=adversary.eavesdrop_success_probability(s.n_bits),
                detected_fraction=sum(r["detected"] for r in results) / n,
            )
        else:
            total_kept = sum(r["n_kept"] for r in results)
            mode = adversary.SIFTED if s.per_bit_randomised else adversary.UNSIFTED
            attack = AttackReport(
                kind, s.n_bits, n,
                per_bit_success=sum(r["bit_hits"] for r in results) / total_kept if total_kept else float("nan"),
                block_success=sum(r["block_hit"] for r in results) / n,
                eta_analytic=adversary.eavesdrop_success_probability(s.n_bits, mode),
            )
    report = RunReport(
        scenario=s.to_json(),
        trials=n,
        kept_rate=float(np.mean([r["kept"] for r in results])) if n else 0.0,
        error_rate=float(np.mean([r["errors"] for r in results])) if n else 0.0,
        agreement_failures=sum(not r["agreed"] for r in results),
        attack=attack,
        wall_time=time.perf_counter() - start,
    )
    return report, ([r["transcript"] for r in results] if keep_transcripts else [])


# -- plot data -------------------------------------------------------------

def ber_map(
    phi_range=(0.0, math.pi),
    psi_range=(0.0, math.pi),
    resolution: int = DEFAULT_RESOLUTION,
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Bob's visibility ``V_9,10`` over a ``resolution x resolution`` grid.

    Returns ``(phis, psis, grid)`` with ``grid[i, j]`` at ``(phis[i], psis[j])``.
    """
    if resolution < 2:
        raise ValueError("resolution must be >= 2")
    phis = np.linspace(*phi_range, resolution)
    psis = np.linspace(*psi_range, resolution)
    P, S = np.meshgrid(phis, psis, indexing="ij")
    bh = optics.mzi_transforms(S) @ optics.mzi_transforms(P)
    out = bh[..., :, 0]  # input (1, 0)
    grid = optics.visibility(*optics.intensities(out))
    return phis, psis, grid


def ber_map_csv(phis, psis, grid) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["phi", "psi", "visibility"])
    for i, p in enumerate(phis):
        for j, q in enumerate(psis):
            w.writerow([repr(float(p)), repr(float(q)), repr(float(grid[i, j]))])
    return buf.getvalue()


def fringe_curves(
    which: str, start: float = 0.0, stop: float = 2 * math.pi, step: float = 0.01, psi: float = 0.0
) -> np.ndarray:
    """Sampled ``(phase, value)`` columns for one curve.

    ``V56`` is Alice's port visibility, ``V34``/``IN34`` the outbound tap
    visibility/interference, ``IN78`` the inbound tap interference and
    ``V910`` Bob's visibility; the last two use the fixed ``psi``.
    """
    if not step > 0:
        raise ValueError("step must be > 0")
    if which not in CURVES:
        raise ValueError(f"unknown curve {which!r}; choose from {CURVES}")
    phase = np.arange(start, stop + step / 2, step)
    bs = optics.beam_splitter()
    src = np.array([1.0, 0.0], dtype=complex)
    e34 = optics.phase_shifters(phase) @ (bs @ src)
    e56 = e34 @ bs.T
    e78 = np.einsum("nij,nj->ni", optics.phase_shifters(np.full_like(phase, psi)), e56 @ bs.T)
    e910 = e78 @ bs.T
    if which == "V56":
        value = optics.visibility(*optics.intensities(e56))
    elif which == "V34":
        value = optics.visibility(*optics.intensities(e34))
    elif which == "IN34":
        value = optics.interference(e34)
    elif which == "IN78":
        value = optics.interference(e78)
    else:
        value = optics.visibility(*optics.intensities(e910))
    return np.column_stack([phase, value])


def curve_csv(curve: np.ndarray, name: str) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["phase", name])
    for p, v in curve:
        w.writerow([repr(float(p)), repr(float(v))])
    return buf.getvalue()


# -- configuration ---------------------------------------------------------

def load_config(text: str) -> Scenario:
    """Scenario from INI text with ``[channel]``, ``[session]`` and
    ``[adversary]`` sections; missing keys keep their defaults."""
    cp = configparser.ConfigParser()
    cp.read_string(text)
    ch = cp["channel"] if cp.has_section("channel") else {}
    ss = cp["session"] if cp.has_section("session") else {}
    cfg = ChannelConfig(
        static_offset=float(ch.get("static_offset", 0.0)),
        phase_jitter_sd=float(ch.get("phase_jitter_sd", 0.0)),
        detector_error_sd=float(ch.get("detector_error_sd", 0.0)),
        seed=int(ch.get("seed", ss.get("seed", 0))),
    )
    adv = None
    if cp.has_section("adversary") and cp["adversary"].get("strategy"):
        sec = dict(cp["adversary"])
        kind = sec.pop("strategy")
        adv = EveStrategy(kind, {k: float(v) for k, v in sec.items()})
    sifting = cp.getboolean("session", "sifting", fallback=True)
    return Scenario(
        n_bits=int(float(ss.get("n_bits", 1000))),
        channel=cfg,
        tol=float(ss.get("tol", protocol.DEFAULT_TOL)),
        sifting=sifting,
        init_policy=ss.get("init_policy", "off"),
        adversary=adv,
        trials=int(float(ss.get("trials", 1))),
        seed=int(ss.get("seed", cfg.seed)),
    )
