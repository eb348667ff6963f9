"""Command-line front end.

Exit codes: 0 exchange complete (or report produced), 1 Monte-Carlo
disagreement in ``attack``, 2 protocol abort, 64 usage error.
"""
from __future__ import annotations

import argparse
import json
import math
import os
import sys
from typing import Optional

import numpy as np

from .adversary import (
    AttackKind,
    AttackStrategy,
    detection_probability_closed_form,
    estimate_detection_probability,
)
from .leakage import OP_NAMES, build_relation_table, efficiency_report, leakage_report
from .photon import BASES, PolState, SpaState, label_name
from .protocol import ProtocolConfig, SecretMessage, run_session

EXIT_OK = 0
EXIT_DISAGREE = 1
EXIT_ABORT = 2
EXIT_USAGE = 64

# the four initial states of the printed relation tables
TABLE_INITIALS = (("H", "s"), ("H", "a"), ("V", "s"), ("V", "a"))


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _label(text: str):
    try:
        pol, spa = (t.strip() for t in text.split(","))
        return PolState(pol), SpaState(spa)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected POL,SPA such as H,s; got {text!r}")


def _seed(value: Optional[int]) -> int:
    if value is not None:
        return value
    env = os.environ.get("QD_SEED")
    if env is None:
        return 0
    try:
        return int(env)
    except ValueError:
        raise UsageError(f"QD_SEED must be an integer, got {env!r}")


def _emit(records, fmt: str, text_lines) -> None:
    if fmt == "json-lines":
        for rec in records:
            print(json.dumps(rec, sort_keys=True, ensure_ascii=False))
    else:
        for line in text_lines:
            print(line)


def _table_text(header: list[str], rows: list[list]) -> list[str]:
    widths = [max(len(str(r[c])) for r in [header, *rows]) for c in range(len(header))]
    fmt = "  ".join(f"{{:<{w}}}" for w in widths)
    return [fmt.format(*header), *(fmt.format(*map(str, r)) for r in rows)]


def cmd_run(args) -> int:
    seed = _seed(args.seed)
    config = ProtocolConfig(args.n, args.delta1, args.delta2, seed)
    rng = np.random.default_rng(seed)
    secrets = {}
    for who in ("alice", "bob"):
        bits = getattr(args, who)
        if bits is None:
            secrets[who] = SecretMessage.random(args.n, rng)
            continue
        if len(bits) != 2 * args.n:
            raise UsageError(f"--{who} needs {2 * args.n} bits for --n {args.n}, got {len(bits)}")
        try:
            secrets[who] = SecretMessage.from_bits(bits)
        except ValueError as exc:
            raise UsageError(str(exc))
    attack = AttackStrategy(args.attack, beta=args.beta, leg=args.leg)
    result = run_session(
        config, secrets["alice"], secrets["bob"], attack, rng,
        force_initial=args.force_initial, force_decoy=args.force_decoy,
    )
    if args.dump_transcript:
        result.transcript.dump(args.dump_transcript)

    summary = {
        "record": "session",
        "n": args.n,
        "delta1": args.delta1,
        "delta2": args.delta2,
        "attack": attack.kind.value,
        "alice_secret": secrets["alice"].to_bits(),
        "bob_secret": secrets["bob"].to_bits(),
        **result.to_dict(),
    }
    exchanged = (
        not result.aborted
        and result.bob_decoded == secrets["alice"]
        and result.alice_decoded == secrets["bob"]
    )
    summary["exchange_ok"] = exchanged
    lines = [
        f"seed            {seed}",
        f"attack          {attack.kind.value}",
        f"alice secret    {summary['alice_secret']}",
        f"bob secret      {summary['bob_secret']}",
    ]
    if result.aborted:
        lines.append(f"ABORTED at {result.abort_stage} (error rate {_rate(result)})")
    else:
        lines += [
            f"bob decoded     {summary['bob_decoded']}",
            f"alice decoded   {summary['alice_decoded']}",
            "announced       "
            + " ".join(f"{o['basis']}:{o['outcome']}" for o in summary["announced_outcomes"]),
            f"exchange        {'ok' if exchanged else 'MISMATCH'}",
        ]
    _emit([summary], args.format, lines)
    return EXIT_ABORT if result.aborted else EXIT_OK


def _rate(result) -> float:
    check = result.second_check if result.abort_stage == "second_check" else result.first_check
    return check.error_rate


def cmd_attack(args) -> int:
    seed = _seed(args.seed)
    if args.trials < 1:
        raise UsageError("--trials must be >= 1")
    config = ProtocolConfig(args.n, args.delta1, args.delta2, seed)
    rng = np.random.default_rng(seed)
    closed = detection_probability_closed_form(args.attack, args.delta1, args.beta, args.force_decoy)
    est, stderr = estimate_detection_probability(
        args.attack, config, args.trials, rng,
        beta=args.beta, force_decoy=args.force_decoy, engine=args.engine,
    )
    band = 3 * max(stderr, math.sqrt(closed * (1 - closed) / args.trials))
    agree = abs(est - closed) <= band + 1e-12
    rec = {
        "record": "attack",
        "attack": AttackKind(args.attack).value,
        "beta": args.beta,
        "delta1": args.delta1,
        "trials": args.trials,
        "engine": args.engine,
        "closed_form": closed,
        "estimate": est,
        "stderr": stderr,
        "band_3sigma": band,
        "agree": agree,
        "seed": seed,
    }
    lines = [
        f"attack        {rec['attack']}" + (f" (beta={args.beta})" if args.attack == "entangle-measure" else ""),
        f"delta1        {args.delta1}",
        f"trials        {args.trials} ({args.engine})",
        f"closed form   {closed:.6f}",
        f"estimate      {est:.6f} ± {stderr:.6f}",
        f"3-sigma check {'PASS' if agree else 'FAIL'} (|diff| = {abs(est - closed):.6f}, band {band:.6f})",
    ]
    _emit([rec], args.format, lines)
    return EXIT_OK if agree else EXIT_DISAGREE


def cmd_tables(args) -> int:
    if args.all_bases:
        initials = [lab for b in BASES for lab in b.labels]
    else:
        initials = [(PolState(p), SpaState(s)) for p, s in TABLE_INITIALS]
    records, lines = [], []
    for n, initial in enumerate(initials, 1):
        table = build_relation_table(initial)
        for b in range(4):
            for a in range(4):
                records.append(
                    {
                        "record": "cell",
                        "table": n,
                        "initial": label_name(initial),
                        "bob_op": OP_NAMES[b],
                        "alice_op": OP_NAMES[a],
                        "outcome": label_name(table.cells[b][a]),
                        "sign": table.signed[b][a],
                    }
                )
        lines.append(f"Table {n}: initial |{label_name(initial)}⟩ (rows: Bob, columns: Alice)")
        rows = table.rows(show_sign=args.signed)
        lines += _table_text(["", *OP_NAMES], [[OP_NAMES[b], *rows[b]] for b in range(4)])
        lines.append("")
    _emit(records, args.format, lines)
    return EXIT_OK


def cmd_leakage(args) -> int:
    rows = leakage_report()
    records = [{"record": "leakage", **r} for r in rows]
    lines = _table_text(
        ["basis", "outcome", "candidates", "entropy (bits)"],
        [[r["basis"], r["outcome"], r["candidates"], f"{r['entropy_bits']:.6f}"] for r in rows],
    )
    _emit(records, args.format, lines)
    return EXIT_OK


def cmd_efficiency(args) -> int:
    report = efficiency_report()
    records = [{"record": "efficiency", **r} for r in report["rows"]]
    records.append({"record": "capacity", "capacity_ratio": report["capacity_ratio"]})
    lines = _table_text(
        ["protocol", "v_c", "q_t", "v_t", "eta", "bits/photon pair"],
        [
            [r["protocol"], r["v_c"], r["q_t"], r["v_t"], f"{100 * r['efficiency']:.0f}%", r["bits_per_photon_pair"]]
            for r in report["rows"]
        ],
    )
    lines.append(f"capacity ratio vs one-DOF twin-photon dialogue: {report['capacity_ratio']:g}x")
    _emit(records, args.format, lines)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--format", choices=("text", "json-lines"), default="text")
    common.add_argument("--seed", type=int, default=None, help="RNG seed (falls back to $QD_SEED, then 0)")

    proto = argparse.ArgumentParser(add_help=False)
    proto.add_argument("--n", type=int, default=64, help="message photon pairs")
    proto.add_argument("--delta1", type=int, default=16, help="first-check decoys")
    proto.add_argument("--delta2", type=int, default=16, help="second-check decoys")
    proto.add_argument("--attack", choices=[k.value for k in AttackKind], default="none")
    proto.add_argument("--beta", type=float, default=0.0, help="entangle-measure strength")
    proto.add_argument("--force-decoy", type=_label, default=None, metavar="POL,SPA")

    parser = _Parser(prog="qdialogue", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    run = sub.add_parser("run", parents=[common, proto], help="run one session")
    run.add_argument("--alice", default=None, help="Alice's secret as a 2N-bit string")
    run.add_argument("--bob", default=None, help="Bob's secret as a 2N-bit string")
    run.add_argument("--leg", choices=("forward", "return", "both"), default="forward")
    run.add_argument("--force-initial", type=_label, default=None, metavar="POL,SPA")
    run.add_argument("--dump-transcript", default=None, metavar="PATH")
    run.set_defaults(func=cmd_run)

    attack = sub.add_parser("attack", parents=[common, proto], help="detection-probability experiment")
    attack.add_argument("--trials", type=int, default=10000)
    attack.add_argument("--engine", choices=("session", "batch"), default="session")
    attack.set_defaults(func=cmd_attack, n=1, delta2=0)

    tables = sub.add_parser("tables", parents=[common], help="relation tables")
    tables.add_argument("--all-bases", action="store_true", help="all sixteen initial states")
    tables.add_argument("--signed", action="store_true", help="show the sign each state carries")
    tables.set_defaults(func=cmd_tables)

    leak = sub.add_parser("leakage", parents=[common], help="entropy of Eve's candidate sets")
    leak.set_defaults(func=cmd_leakage)

    eff = sub.add_parser("efficiency", parents=[common], help="information-theoretical efficiency")
    eff.set_defaults(func=cmd_efficiency)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        for name in ("n", "delta1", "delta2"):
            value = getattr(args, name, None)
            if value is not None and value < (1 if name == "n" else 0):
                raise UsageError(f"--{name} out of range: {value}")
        if getattr(args, "beta", 0.0) is not None and not 0.0 <= getattr(args, "beta", 0.0) <= 1.0:
            raise UsageError("--beta must lie in [0, 1]")
        if getattr(args, "leg", "forward") == "both" and args.attack == "entangle-measure":
            raise UsageError("entangle-measure cannot tap both legs")
        return args.func(args)
    except UsageError as exc:
        print(f"qdialogue: error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
