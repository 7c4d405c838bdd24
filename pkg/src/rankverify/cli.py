"""Command-line front end.

Exit codes: 0 positive outcome (rejected / bound above zero / ran), 1 negative
outcome, 2 input or validation error, 3 too few conditioning events in a
simulation. Errors go to stderr as a JSON object.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import os
import secrets
import sys
from dataclasses import asdict

import numpy as np

from . import __version__
from .baselines import hsd_quantile, hsd_verify
from .clb import clb_exact, clb_fast
from .documents import InputError, dumps, load_document
from .errors import InsufficientConditioningError, ModelValidationError, RankVerifyError
from .numerics import std_normal_quantile
from .sim import Scenario, estimate_conditional, scenario_appendix_a, scenario_tightness
from .verifier import verify

EXIT_POSITIVE, EXIT_NEGATIVE, EXIT_ERROR, EXIT_CONDITIONING = 0, 1, 2, 3


def _threads_default() -> int:
    try:
        return max(1, int(os.environ.get("RANK_VERIFY_THREADS", "1")))
    except ValueError:
        return 1


def _add_input(p: argparse.ArgumentParser) -> None:
    p.add_argument("--input", required=True, help="JSON document or observations CSV")
    p.add_argument("--covariance", help="covariance CSV (with a CSV --input)")
    p.add_argument("--k", type=int, required=True, help="size of the selected set")
    p.add_argument("--ties", choices=["error", "break-low-index"], default="error")
    p.add_argument("--format", choices=["json", "text"], default="json")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="rankverify",
        description="Verify that the top-k observations came from the top-k means.",
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("verify", help="run the selective rank verification test")
    _add_input(p)
    p.add_argument("--delta", type=float, default=0.0)
    p.add_argument("--alpha", type=float, default=0.05)
    p.add_argument("--method", choices=["full", "fast"], default="full")
    p.add_argument("--early-exit", action="store_true", help="stop at the first non-significant pair")

    p = sub.add_parser("clb", help="conditional lower confidence bound on the mean gap")
    _add_input(p)
    p.add_argument("--alpha", type=float, default=0.05)
    p.add_argument("--method", choices=["exact", "fast"], default="exact")
    p.add_argument("--tol", type=float, default=None)

    p = sub.add_parser("hsd", help="Tukey-HSD style simultaneous comparison")
    _add_input(p)
    p.add_argument("--alpha", type=float, default=0.05)
    p.add_argument("--reps", type=int, default=100_000)
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--threads", type=int, default=_threads_default())

    p = sub.add_parser("simulate", help="conditional Monte Carlo power / size / coverage")
    p.add_argument("--scenario", required=True, help="appendix-a, tightness or file:<path.json>")
    p.add_argument("--estimand", choices=["power", "false-rejection", "clb-coverage"], default="power")
    p.add_argument("--method", choices=["full", "fast-only", "hsd", "exact", "fast"], default="full")
    p.add_argument("--reps", type=int, default=10_000)
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--alpha", type=float, default=0.1)
    p.add_argument("--delta", type=float, default=0.0)
    p.add_argument("--target-s", default=None, help="comma-separated 0-based indices")
    p.add_argument("--n", type=int, default=5, help="dimension for the tightness scenario")
    p.add_argument("--k", type=int, default=1, help="k for the tightness scenario")
    p.add_argument("--spread", type=float, default=20.0)
    p.add_argument("--hsd-reps", type=int, default=100_000)
    p.add_argument("--threads", type=int, default=_threads_default())
    p.add_argument("--format", choices=["json", "csv", "text"], default="json")
    return parser


def _fail(exc: Exception, code: int = EXIT_ERROR, **extra) -> int:
    payload = {"error": type(exc).__name__, "message": str(exc)}
    if isinstance(exc, ModelValidationError):
        payload["problems"] = exc.problems
    payload.update(extra)
    print(json.dumps(payload), file=sys.stderr)
    return code


def _text(d: dict, prefix: str = "") -> list[str]:
    lines = []
    width = max((len(k) for k in d), default=0)
    for key, value in d.items():
        if isinstance(value, dict):
            lines.append(f"{prefix}{key}:")
            lines.extend(_text(value, prefix + "  "))
        elif isinstance(value, list) and value and isinstance(value[0], dict):
            lines.append(f"{prefix}{key}:")
            cols = list(value[0])
            table = [cols] + [[str(row[c]) for c in cols] for row in value]
            widths = [max(len(r[i]) for r in table) for i in range(len(cols))]
            for r in table:
                lines.append(prefix + "  " + "  ".join(c.rjust(w) for c, w in zip(r, widths)))
        else:
            lines.append(f"{prefix}{key.ljust(width)}  {value}")
    return lines


def _emit(payload, fmt: str) -> None:
    text = dumps(payload)
    if fmt == "text":
        print("\n".join(_text(json.loads(text))))
    else:
        print(text)


def _load(args):
    doc = load_document(args.input, args.covariance)
    return doc.to_model(), doc.labels


def _with_labels(payload: dict, labels) -> dict:
    if labels is not None:
        payload["labels"] = list(labels)
    return payload


def cmd_verify(args) -> int:
    model, labels = _load(args)
    method = "fast-only" if args.method == "fast" else "full"
    report = verify(model, args.k, delta=args.delta, alpha=args.alpha, method=method,
                    ties=args.ties, early_exit=args.early_exit)
    _emit(_with_labels(asdict(report), labels), args.format)
    return EXIT_POSITIVE if report.reject else EXIT_NEGATIVE


def cmd_clb(args) -> int:
    model, labels = _load(args)
    if args.method == "exact":
        bound = clb_exact(model, args.k, alpha=args.alpha, tol=args.tol, ties=args.ties)
    else:
        bound = clb_fast(model, args.k, alpha=args.alpha, ties=args.ties)
    _emit(_with_labels(asdict(bound), labels), args.format)
    return EXIT_POSITIVE if bound.value > 0 else EXIT_NEGATIVE


def _seed(args) -> int:
    return args.seed if args.seed is not None else secrets.randbits(32)


def cmd_hsd(args) -> int:
    model, labels = _load(args)
    seed = _seed(args)
    h = hsd_quantile(model.sigma, alpha=args.alpha, reps=args.reps, seed=seed, workers=args.threads)
    hsd_reject = hsd_verify(model, args.k, args.alpha, h, ties=args.ties)
    full = verify(model, args.k, alpha=args.alpha, ties=args.ties)
    payload = {
        "quantile": asdict(h),
        "z": std_normal_quantile(1.0 - args.alpha / 2.0),
        "hsd_reject": hsd_reject,
        "full_reject": full.reject,
        "fast_reject": full.fast_check.passes,
        "full_worst_p": full.worst_p,
        "dominance_holds": (not hsd_reject) or full.reject,
    }
    _emit(_with_labels(payload, labels), args.format)
    return EXIT_POSITIVE if hsd_reject else EXIT_NEGATIVE


def _scenario(args) -> Scenario:
    name = args.scenario
    if name == "appendix-a":
        return scenario_appendix_a()
    if name == "tightness":
        return scenario_tightness(n=args.n, k=args.k, delta=args.delta, spread=args.spread)
    if name.startswith("file:"):
        path = name[len("file:"):]
        try:
            with open(path, encoding="utf-8") as fh:
                d = json.load(fh)
            return Scenario(mu=np.asarray(d["mu"], float), sigma=np.asarray(d["sigma"], float),
                            k=int(d["k"]), name=str(d.get("name", path)))
        except (OSError, KeyError, ValueError, TypeError) as exc:
            raise InputError(f"cannot read scenario file {path}: {exc}") from None
    raise InputError(f"unknown scenario {name!r}")


def cmd_simulate(args) -> int:
    scenario = _scenario(args)
    target = None
    if args.target_s:
        try:
            target = [int(s) for s in args.target_s.split(",")]
        except ValueError:
            raise InputError("--target-s must be comma-separated integers") from None
    seed = _seed(args)
    try:
        result = estimate_conditional(
            scenario, target_s=target, delta=args.delta, alpha=args.alpha, method=args.method,
            estimand=args.estimand, reps=args.reps, seed=seed, workers=args.threads,
            hsd_reps=args.hsd_reps,
        )
    except InsufficientConditioningError as exc:
        return _fail(exc, EXIT_CONDITIONING, event_rate=exc.event_rate, events=exc.events)
    if args.format == "csv":
        row = json.loads(dumps(result))
        row["target_s"] = " ".join(str(i) for i in row["target_s"])
        buf = io.StringIO()
        writer = csv.DictWriter(buf, fieldnames=list(row), lineterminator="\n")
        writer.writeheader()
        writer.writerow(row)
        sys.stdout.write(buf.getvalue())
    else:
        _emit(result, args.format)
    return EXIT_POSITIVE


COMMANDS = {"verify": cmd_verify, "clb": cmd_clb, "hsd": cmd_hsd, "simulate": cmd_simulate}


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        # argparse exits 2 on usage errors, which matches our error code
        return int(exc.code) if exc.code is not None else EXIT_ERROR
    try:
        return COMMANDS[args.command](args)
    except (InputError, RankVerifyError, ValueError, OSError) as exc:
        return _fail(exc)


if __name__ == "__main__":
    sys.exit(main())
