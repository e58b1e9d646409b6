"""Two-party key distribution over the round-trip interferometer.

Bob prepares ``phi`` and records ``x``; Alice reads ``V_A`` into ``y``,
picks ``psi`` (recorded as ``z``) and sifts ``y`` against ``z`` into ``a``;
Bob reads ``V_B`` into ``w`` and sifts ``w`` against ``x`` into ``b``.  The
only public messages are error indices.  Positions discarded by basis
mismatch are never announced: both sides discard them independently.
"""
from __future__ import annotations

import configparser
import json
import math
from dataclasses import dataclass, field
from typing import Callable, Iterable, Optional, Sequence

import numpy as np

from . import channel
from .channel import ChannelConfig

DEFAULT_TOL = 0.01
D_DIGIT = 9

ALICE = "alice"
BOB = "bob"


class ProtocolAbort(RuntimeError):
    pass


@dataclass(frozen=True)
class KeySymbol:
    """One key position: a bit, a discard (D), or a raw erroneous visibility."""

    kind: str
    value: Optional[float] = None

    @classmethod
    def bit(cls, b: int) -> "KeySymbol":
        if b not in (0, 1):
            raise ValueError(f"not a bit: {b!r}")
        return cls("bit", int(b))

    @classmethod
    def raw(cls, v: float) -> "KeySymbol":
        return cls("raw", float(v))

    @property
    def is_bit(self) -> bool:
        return self.kind == "bit"

    @property
    def is_raw(self) -> bool:
        return self.kind == "raw"

    @property
    def is_discard(self) -> bool:
        return self.kind == "discard"

    @property
    def digit(self) -> int:
        """0/1 for bits, 9 for anything else."""
        return self.value if self.is_bit else D_DIGIT

    def to_json(self):
        if self.is_raw:
            return {"raw": self.value}
        return self.digit

    @classmethod
    def from_json(cls, obj) -> "KeySymbol":
        if isinstance(obj, dict):
            return cls.raw(obj["raw"])
        if obj == D_DIGIT:
            return D
        return cls.bit(obj)

    def __str__(self):
        if self.is_bit:
            return str(self.value)
        if self.is_discard:
            return "D"
        return repr(self.value)


ZERO = KeySymbol.bit(0)
ONE = KeySymbol.bit(1)
D = KeySymbol("discard")

KeyStream = list


def stream_from_digits(digits: Iterable) -> KeyStream:
    """``[0, 'D', 1, 9, ...]`` -> symbols.  ``'D'`` and 9 both mean discard."""
    out = []
    for d in digits:
        if d in ("D", D_DIGIT, "9"):
            out.append(D)
        else:
            out.append(KeySymbol.bit(int(d)))
    return out


def to_compact(stream: Sequence[KeySymbol]) -> tuple[str, list[float]]:
    """Key as a string of 0/1/9 digits plus the raw values in order."""
    return (
        "".join(str(s.digit) for s in stream),
        [s.value for s in stream if s.is_raw],
    )


def phase_of(bit: int) -> float:
    return math.pi if bit else 0.0


# -- per-bit rules ---------------------------------------------------------

def bob_prepare(rng: np.random.Generator) -> tuple[float, KeySymbol]:
    bit = int(rng.integers(0, 2))
    return phase_of(bit), KeySymbol.bit(bit)


def alice_select(rng: np.random.Generator) -> tuple[float, KeySymbol]:
    bit = int(rng.integers(0, 2))
    return phase_of(bit), KeySymbol.bit(bit)


def alice_classify(v_a: float, tol: float = DEFAULT_TOL) -> KeySymbol:
    if abs(v_a - 1.0) <= tol:
        return ZERO
    if abs(v_a + 1.0) <= tol:
        return ONE
    return KeySymbol.raw(v_a)


def alice_sift(y: KeySymbol, z: KeySymbol) -> KeySymbol:
    # A raw y never equals a bit: it is a mismatch.
    return y if (y.is_bit and y == z) else D


def bob_classify(v_b: float, x: KeySymbol, tol: float = DEFAULT_TOL) -> KeySymbol:
    if abs(v_b + 1.0) <= tol:
        return x
    if abs(v_b - 1.0) <= tol:
        return D
    return KeySymbol.raw(v_b)


def bob_sift(w: KeySymbol, x: KeySymbol) -> KeySymbol:
    return w if (w.is_bit and w == x) else D


# -- parties and announcements -------------------------------------------

@dataclass(frozen=True)
class Announcement:
    """Public message: "position ``index`` was an error on my side"."""

    index: int
    party: str

    def to_json(self) -> dict:
        return {"index": self.index, "party": self.party}


@dataclass
class PartyState:
    role: str
    basis_record: list = field(default_factory=list)
    key_record: KeyStream = field(default_factory=list)
    copy_record: KeyStream = field(default_factory=list)
    sifted: KeyStream = field(default_factory=list)
    final: Optional[KeyStream] = None

    def __len__(self):
        return len(self.sifted)

    def errors(self) -> list[Announcement]:
        return [Announcement(i, self.role) for i, s in enumerate(self.copy_record) if s.is_raw]


def reconcile(
    alice: PartyState, bob: PartyState, announcements: Iterable[Announcement]
) -> tuple[KeyStream, KeyStream]:
    """Force every announced index to D on both sides; keep the rest."""
    if len(alice) != len(bob):
        raise ProtocolAbort(f"length mismatch: alice {len(alice)}, bob {len(bob)}")
    bad = {a.index for a in announcements}
    m_a = [D if i in bad else s for i, s in enumerate(alice.sifted)]
    m_b = [D if i in bad else s for i, s in enumerate(bob.sifted)]
    alice.final, bob.final = m_a, m_b
    return m_a, m_b


# -- sessions --------------------------------------------------------------

@dataclass(frozen=True)
class Script:
    """Fixed bases and injected visibility readings for a scripted session.

    Indices are 0-based bit positions.
    """

    phi_bits: tuple
    psi_bits: tuple
    v_a: dict = field(default_factory=dict)
    v_b: dict = field(default_factory=dict)

    def __post_init__(self):
        if len(self.phi_bits) != len(self.psi_bits):
            raise ValueError("phi and psi scripts differ in length")

    def __len__(self):
        return len(self.phi_bits)

    def to_json(self) -> dict:
        return {
            "phi_bits": list(self.phi_bits),
            "psi_bits": list(self.psi_bits),
            "v_a": {str(k): v for k, v in sorted(self.v_a.items())},
            "v_b": {str(k): v for k, v in sorted(self.v_b.items())},
        }

    @classmethod
    def from_json(cls, d: dict) -> "Script":
        return cls(
            tuple(d["phi_bits"]),
            tuple(d["psi_bits"]),
            {int(k): float(v) for k, v in d.get("v_a", {}).items()},
            {int(k): float(v) for k, v in d.get("v_b", {}).items()},
        )


def _parse_bits(text: str) -> tuple:
    out = []
    for tok in text.replace(",", " ").split():
        tok = tok.lower()
        if tok in ("0", "pi", "1"):
            out.append(0 if tok == "0" else 1)
        else:
            raise ValueError(f"basis must be 0 or pi, got {tok!r}")
    return tuple(out)


def parse_script(text: str) -> Script:
    """Read a script from INI text.

    ``[bases]`` holds ``phi`` and ``psi`` as whitespace-separated ``0``/``pi``;
    ``[inject.v_a]`` / ``[inject.v_b]`` map 0-based indices to readings.
    """
    cp = configparser.ConfigParser()
    cp.read_string(text)
    phi = _parse_bits(cp.get("bases", "phi"))
    psi = _parse_bits(cp.get("bases", "psi"))
    va = {int(k): float(v) for k, v in cp["inject.v_a"].items()} if cp.has_section("inject.v_a") else {}
    vb = {int(k): float(v) for k, v in cp["inject.v_b"].items()} if cp.has_section("inject.v_b") else {}
    return Script(phi, psi, va, vb)


def load_script(path) -> Script:
    """Load a script file; the name ``worked-session`` resolves to the bundled one."""
    if str(path) in ("worked-session", "worked_session.cfg"):
        from importlib.resources import files

        return parse_script(files("mzikey.data").joinpath("worked_session.cfg").read_text())
    with open(path) as fh:
        return parse_script(fh.read())


@dataclass
class BitRecord:
    index: int
    phi: float
    psi: float
    v_a: float
    v_b: float
    x: KeySymbol
    y: KeySymbol
    z: KeySymbol
    a: KeySymbol
    w: KeySymbol
    b: KeySymbol

    def to_json(self) -> dict:
        return {
            "index": self.index,
            "phi": self.phi,
            "psi": self.psi,
            "v_a": self.v_a,
            "v_b": self.v_b,
            **{k: getattr(self, k).to_json() for k in "xyzawb"},
        }

    @classmethod
    def from_json(cls, d: dict) -> "BitRecord":
        return cls(
            d["index"], d["phi"], d["psi"], d["v_a"], d["v_b"],
            *(KeySymbol.from_json(d[k]) for k in "xyzawb"),
        )


@dataclass
class SessionTranscript:
    records: list
    announcements: list
    m_alice: KeyStream
    m_bob: KeyStream
    seed: int
    config: ChannelConfig
    tol: float = DEFAULT_TOL
    sifting: bool = True
    trim: float = 0.0
    script: Optional[Script] = None
    link: Optional[dict] = None  # non-default link description, if any

    @property
    def n_bits(self) -> int:
        return len(self.records)

    @property
    def agreed(self) -> bool:
        return self.m_alice == self.m_bob

    @property
    def kept(self) -> int:
        return sum(s.is_bit for s in self.m_alice)

    @property
    def kept_fraction(self) -> float:
        return self.kept / self.n_bits if self.n_bits else 0.0

    @property
    def error_fraction(self) -> float:
        if not self.n_bits:
            return 0.0
        return len({a.index for a in self.announcements}) / self.n_bits

    def key_digits(self) -> str:
        return to_compact(self.m_alice)[0]

    def footer(self) -> dict:
        return {
            "announcements": [a.to_json() for a in self.announcements],
            "m_alice": to_compact(self.m_alice)[0],
            "m_bob": to_compact(self.m_bob)[0],
            "seed": self.seed,
            "n_bits": self.n_bits,
            "tol": self.tol,
            "sifting": self.sifting,
            "trim": self.trim,
            "config": self.config.to_dict(),
            "config_digest": self.config.digest(),
            "script": None if self.script is None else self.script.to_json(),
            "link": self.link,
        }

    def to_jsonl(self) -> str:
        lines = [json.dumps(r.to_json(), sort_keys=True) for r in self.records]
        lines.append(json.dumps({"footer": self.footer()}, sort_keys=True))
        return "\n".join(lines) + "\n"

    @classmethod
    def from_jsonl(cls, text: str) -> "SessionTranscript":
        rows = [json.loads(line) for line in text.splitlines() if line.strip()]
        if not rows or "footer" not in rows[-1]:
            raise ValueError("transcript has no footer")
        foot = rows[-1]["footer"]
        return cls(
            records=[BitRecord.from_json(r) for r in rows[:-1]],
            announcements=[Announcement(a["index"], a["party"]) for a in foot["announcements"]],
            m_alice=stream_from_digits(foot["m_alice"]),
            m_bob=stream_from_digits(foot["m_bob"]),
            seed=foot["seed"],
            config=ChannelConfig(**foot["config"]),
            tol=foot["tol"],
            sifting=foot["sifting"],
            trim=foot["trim"],
            script=None if foot["script"] is None else Script.from_json(foot["script"]),
            link=foot.get("link"),
        )


#: ``link(phi, psi, cfg, rng, trim) -> (v_a, v_b)`` over arrays of bits.
Link = Callable[..., tuple]


def channel_link(phi, psi, cfg, rng, trim=0.0):
    res = channel.simulate_link(phi, psi, cfg, rng, trim)
    return res.v_a, res.v_b


def run_session(
    n_bits: int,
    cfg: ChannelConfig,
    tol: float = DEFAULT_TOL,
    seed: Optional[int] = None,
    *,
    script: Optional[Script] = None,
    sifting: bool = True,
    trim: float = 0.0,
    link: Link = channel_link,
) -> SessionTranscript:
    """Run the full procedure for ``n_bits`` positions in one batch.

    ``seed`` defaults to ``cfg.seed``.  With ``sifting=False`` Alice echoes
    the basis she read instead of choosing one, so every clean position is
    kept; that mode needs per-bit initialization against memory attacks.
    """
    if n_bits < 1:
        raise ValueError("n_bits must be >= 1")
    seed = cfg.seed if seed is None else int(seed)
    rng = np.random.default_rng(seed)

    if script is not None:
        if len(script) != n_bits:
            raise ValueError(f"script has {len(script)} bits, session wants {n_bits}")
        phi_bits = np.array(script.phi_bits, dtype=int)
        psi_bits = np.array(script.psi_bits, dtype=int)
    else:
        phi_bits = rng.integers(0, 2, n_bits)
        psi_bits = rng.integers(0, 2, n_bits)

    phi = phi_bits * math.pi
    bob = PartyState(BOB)
    alice = PartyState(ALICE)
    x_rec = [KeySymbol.bit(int(b)) for b in phi_bits]
    bob.basis_record = [float(p) for p in phi]
    bob.key_record = x_rec

    if sifting:
        psi = psi_bits * math.pi
        v_a, v_b = link(phi, psi, cfg, rng, trim)
    else:
        # Alice's echo depends on her own reading.  Both passes are evaluated
        # from the same generator state, so they share every draw and the
        # first pass's V_A equals the second's.
        state = rng.bit_generator.state
        v_a, _ = link(phi, phi, cfg, rng, trim)
        v_a = np.asarray(v_a, dtype=float).copy()
        if script is not None:
            for i, v in script.v_a.items():
                v_a[i] = v
        psi_bits = np.array([int(abs(v + 1.0) <= tol) for v in v_a])
        psi = psi_bits * math.pi
        rng.bit_generator.state = state
        _, v_b = link(phi, psi, cfg, rng, trim)

    v_a = np.asarray(v_a, dtype=float).copy()
    v_b = np.asarray(v_b, dtype=float).copy()
    if script is not None:
        for i, v in script.v_a.items():
            v_a[i] = v
        for i, v in script.v_b.items():
            v_b[i] = v

    records = []
    for i in range(n_bits):
        x = x_rec[i]
        y = alice_classify(v_a[i], tol)
        z = KeySymbol.bit(int(psi_bits[i]))
        a = alice_sift(y, z) if sifting else (y if y.is_bit else D)
        w = bob_classify(v_b[i], x, tol)
        b = bob_sift(w, x)
        alice.basis_record.append(float(psi[i]))
        alice.key_record.append(z)
        alice.copy_record.append(y)
        alice.sifted.append(a)
        bob.copy_record.append(w)
        bob.sifted.append(b)
        records.append(
            BitRecord(i, float(phi[i]), float(psi[i]), float(v_a[i]), float(v_b[i]), x, y, z, a, w, b)
        )

    announcements = sorted(alice.errors() + bob.errors(), key=lambda a: (a.index, a.party))
    m_a, m_b = reconcile(alice, bob, announcements)
    spec = link.to_json() if hasattr(link, "to_json") else None
    return SessionTranscript(
        records, announcements, m_a, m_b, seed, cfg, tol, sifting, float(trim), script, spec
    )


def replay(text: str) -> tuple[SessionTranscript, bool]:
    """Re-run a serialized transcript; returns the fresh one and whether the
    serialization is byte-identical."""
    old = SessionTranscript.from_jsonl(text)
    link = channel_link
    if old.link is not None:
        from .adversary import INTERCEPT_RESEND, InterceptResend

        if old.link.get("kind") != INTERCEPT_RESEND:
            raise ValueError(f"cannot replay link {old.link!r}")
        link = InterceptResend.from_json(old.link)
    new = run_session(
        old.n_bits, old.config, old.tol, old.seed,
        script=old.script, sifting=old.sifting, trim=old.trim, link=link,
    )
    return new, new.to_jsonl() == text
