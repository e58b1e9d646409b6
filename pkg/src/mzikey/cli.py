"""Command-line entry point: ``mzikey <subcommand> [options]``.

Exit codes: 0 success, 1 usage, 2 invalid scenario, 3 agreement failure
(or a replay that does not reproduce its transcript).
"""
from __future__ import annotations

import argparse
import json
import math
import os
import sys
from dataclasses import replace
from pathlib import Path

import numpy as np

from . import adversary, harness, initialization, protocol
from .channel import ChannelConfig

OUT_ENV = "MZIKEY_OUT"

EXIT_OK, EXIT_USAGE, EXIT_SCENARIO, EXIT_AGREEMENT = 0, 1, 2, 3

_STRATEGY_ALIASES = {
    "passive": adversary.PASSIVE_TAP,
    "brute-force": adversary.BRUTE_FORCE,
    "memory": adversary.MEMORY_ATTACK,
    "intercept": adversary.INTERCEPT_RESEND,
}


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _count(text: str) -> int:
    """Accept ``1e7`` as well as ``10000000``."""
    value = float(text)
    if value != int(value) or value < 0:
        raise argparse.ArgumentTypeError(f"not a count: {text}")
    return int(value)


def build_parser() -> argparse.ArgumentParser:
    # Global flags are accepted before or after the subcommand; the copy on
    # each subparser must not overwrite a value given before it.
    p = _Parser(prog="mzikey", description=__doc__.splitlines()[0])
    common = _Parser(add_help=False)
    for target, default in ((p, None), (common, argparse.SUPPRESS)):
        target.add_argument("--seed", type=int, default=default)
        target.add_argument("--config", type=Path, default=default)
        target.add_argument("--out", type=Path, default=default)
        target.add_argument("--format", choices=("csv", "json"), default=default)

    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    s = sub.add_parser("simulate", parents=[common], help="run key-distribution sessions")
    s.add_argument("--bits", type=_count, default=None)
    s.add_argument("--trials", type=_count, default=None)
    s.add_argument("--script", default=None, help="scripted bases file, or 'worked-session'")
    s.add_argument("--no-sifting", action="store_true")
    s.add_argument("--init-policy", choices=harness.INIT_POLICIES, default=None)
    s.add_argument("--strategy", choices=sorted(_STRATEGY_ALIASES), default=None)
    s.add_argument("--jitter", type=float, default=None)
    s.add_argument("--transcripts", action="store_true", help="write every transcript")
    s.add_argument("--workers", type=int, default=1)

    b = sub.add_parser("ber-map", parents=[common], help="V_9,10 grid")
    b.add_argument("--res", type=int, default=harness.DEFAULT_RESOLUTION)

    c = sub.add_parser("curves", parents=[common], help="fringe curves")
    c.add_argument("--which", choices=harness.CURVES, default="V56")
    c.add_argument("--step", type=float, default=0.01)
    c.add_argument("--psi", type=float, default=0.0)

    a = sub.add_parser("attack-eval", parents=[common], help="attack statistics")
    a.add_argument("--strategy", choices=sorted(_STRATEGY_ALIASES), required=True)
    a.add_argument("--n", type=int, default=12)
    a.add_argument("--trials", type=_count, default=10_000)
    a.add_argument("--unsifted", action="store_true")
    a.add_argument("--disturbance", type=float, default=math.pi / 2)

    i = sub.add_parser("init-demo", parents=[common], help="network initialization")
    i.add_argument("--offset", type=float, default=None, help="static offset; random if omitted")
    i.add_argument("--rounds", type=int, default=initialization.DEFAULT_ROUNDS)

    r = sub.add_parser("replay", parents=[common], help="re-run a transcript")
    r.add_argument("transcript", type=Path)
    return p


def _out_dir(args) -> Path:
    out = args.out or Path(os.environ.get(OUT_ENV, "."))
    out.mkdir(parents=True, exist_ok=True)
    return out


def _scenario(args) -> harness.Scenario:
    s = harness.Scenario()
    if args.config is not None:
        s = harness.load_config(args.config.read_text())
    changes = {}
    if args.seed is not None:
        changes["seed"] = args.seed
        changes["channel"] = s.channel.with_(seed=args.seed)
    if getattr(args, "bits", None) is not None:
        changes["n_bits"] = args.bits
    if getattr(args, "trials", None) is not None:
        changes["trials"] = args.trials
    if getattr(args, "no_sifting", False):
        changes["sifting"] = False
    if getattr(args, "init_policy", None):
        changes["init_policy"] = args.init_policy
    if getattr(args, "strategy", None):
        changes["adversary"] = adversary.EveStrategy(_STRATEGY_ALIASES[args.strategy])
    if getattr(args, "jitter", None) is not None:
        changes["channel"] = changes.get("channel", s.channel).with_(phase_jitter_sd=args.jitter)
    return replace(s, **changes)


def _write(out: Path, name: str, text: str) -> Path:
    path = out / name
    path.write_text(text)
    print(path)
    return path


def _emit_report(args, out: Path, stem: str, data: dict) -> None:
    if (args.format or "json") == "json":
        _write(out, f"{stem}.json", json.dumps(data, sort_keys=True, indent=1) + "\n")
    else:
        rows = ["key,value"] + [f"{k},{v}" for k, v in harness._flatten(data)]
        _write(out, f"{stem}.csv", "\n".join(rows) + "\n")


def cmd_simulate(args) -> int:
    s = _scenario(args)
    out = _out_dir(args)
    if args.script:
        script = protocol.load_script(args.script)
        t = protocol.run_session(
            len(script), s.channel, s.tol, s.seed, script=script, sifting=s.sifting
        )
        _write(out, "transcript.jsonl", t.to_jsonl())
        print("m:", " ".join(str(x) for x in t.m_alice))
        _emit_report(args, out, "session", _session_report(t))
        return EXIT_OK if t.agreed else EXIT_AGREEMENT
    report, transcripts = harness.run_monte_carlo(s, args.workers, args.transcripts)
    for k, text in enumerate(transcripts):
        _write(out, f"transcript_{k:05d}.jsonl", text)
    _emit_report(args, out, "report", report.to_json())
    print(f"kept_rate={report.kept_rate!r} error_rate={report.error_rate!r} "
          f"agreement_failures={report.agreement_failures}")
    return EXIT_AGREEMENT if report.agreement_failures else EXIT_OK


def _session_report(t: protocol.SessionTranscript) -> dict:
    return {
        "n_bits": t.n_bits,
        "seed": t.seed,
        "config_digest": t.config.digest(),
        "kept_fraction": t.kept_fraction,
        "error_fraction": t.error_fraction,
        "agreed": t.agreed,
        "m": t.key_digits(),
    }


def cmd_ber_map(args) -> int:
    phis, psis, grid = harness.ber_map(resolution=args.res)
    out = _out_dir(args)
    if (args.format or "csv") == "csv":
        _write(out, "ber_map.csv", harness.ber_map_csv(phis, psis, grid))
    else:
        _write(out, "ber_map.json", json.dumps(
            {"phi": phis.tolist(), "psi": psis.tolist(), "visibility": grid.tolist()}
        ) + "\n")
    return EXIT_OK


def cmd_curves(args) -> int:
    curve = harness.fringe_curves(args.which, step=args.step, psi=args.psi)
    out = _out_dir(args)
    if (args.format or "csv") == "csv":
        _write(out, f"{args.which}.csv", harness.curve_csv(curve, args.which))
    else:
        _write(out, f"{args.which}.json", json.dumps(
            {"phase": curve[:, 0].tolist(), args.which: curve[:, 1].tolist()}
        ) + "\n")
    return EXIT_OK


def cmd_attack_eval(args) -> int:
    seed = 0 if args.seed is None else args.seed
    kind = _STRATEGY_ALIASES[args.strategy]
    sifted = not args.unsifted
    if kind == adversary.MEMORY_ATTACK:
        rep = adversary.evaluate_memory_attack(args.n, args.trials, seed, sifted=sifted)
    elif kind == adversary.BRUTE_FORCE:
        rep = adversary.evaluate_brute_force(args.trials, args.n, seed, per_bit=sifted)
    elif kind == adversary.PASSIVE_TAP:
        rep = adversary.evaluate_passive_tap(args.n * args.trials, seed=seed)
    else:
        rep = adversary.evaluate_intercept_resend(args.trials, args.n, args.disturbance, seed=seed)
    _emit_report(args, _out_dir(args), "attack", rep.to_json())
    print(f"{rep.strategy}: block_success={rep.block_success!r} eta={rep.eta_analytic!r}")
    return EXIT_OK


def cmd_init_demo(args) -> int:
    seed = 0 if args.seed is None else args.seed
    rng = np.random.default_rng(seed)
    offset = rng.uniform(0, 2 * math.pi) if args.offset is None else args.offset
    cfg = ChannelConfig(static_offset=offset, seed=seed)
    try:
        state = initialization.initialize(cfg, rng, k=args.rounds)
    except (initialization.ScanFailure, initialization.Inconclusive) as exc:
        print(f"initialization failed: {exc}", file=sys.stderr)
        return EXIT_SCENARIO
    out = _out_dir(args)
    _write(out, "baseline.json", state.to_text() + "\n")
    print(f"static_offset={offset!r} delta={state.delta_estimate!r}")
    for r in state.rounds:
        print(f"phi={'pi' if r.phi_bit else '0':>2}  psi={'d+pi' if r.psi_bit else 'd':>4}  "
              f"V_A={r.v_a:+.3f}  V_B={r.v_b:+.3f}  {r.verdict}")
    return EXIT_OK


def cmd_replay(args) -> int:
    text = args.transcript.read_text()
    t, same = protocol.replay(text)
    _emit_report(args, _out_dir(args), "replay", _session_report(t))
    print("identical" if same else "MISMATCH")
    return EXIT_OK if same else EXIT_AGREEMENT


COMMANDS = {
    "simulate": cmd_simulate,
    "ber-map": cmd_ber_map,
    "curves": cmd_curves,
    "attack-eval": cmd_attack_eval,
    "init-demo": cmd_init_demo,
    "replay": cmd_replay,
}


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return COMMANDS[args.command](args)
    except harness.ScenarioError as exc:
        print(f"invalid scenario: {exc}", file=sys.stderr)
        return EXIT_SCENARIO


if __name__ == "__main__":
    sys.exit(main())
