"""Command line entry point: ``qansim <command> [options]``.

Every stochastic command needs ``--seed``; the same flags and seed always
produce a byte-identical CSV.
"""
from __future__ import annotations

import argparse
import contextlib
import csv
import math
import sys
from pathlib import Path
from typing import Iterable, Sequence

from . import __version__
from .attacks import AdversaryConfig, attack_rates, leakage_experiment
from .errors import InvalidArgument, NumericalError, ScenarioConfigError
from .experiments import (
    TABLE1_KMAX,
    TABLE1_PZ,
    anonymity_distribution,
    detection_curve,
    false_positive_compare,
)
from .protocol import Accounting, Scope, SessionConfig
from .qsim import NoiseParams
from .quanet import PayloadClass, run_modes
from .rng import RngStream
from .scenario import bundled_scenario, load_scenario


# -- argument types ------------------------------------------------------------

def _positive_int(text: str) -> int:
    try:
        value = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected an integer, got {text!r}")
    if value < 1:
        raise argparse.ArgumentTypeError(f"must be >= 1, got {value}")
    return value


def _probability(text: str) -> float:
    try:
        value = float(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected a number, got {text!r}")
    if not (0.0 <= value <= 1.0):
        raise argparse.ArgumentTypeError(f"must lie in [0, 1], got {value}")
    return value


def _probability_list(text: str) -> list[float]:
    return [_probability(part) for part in text.split(",") if part.strip()]


def _seed(text: str) -> int:
    try:
        value = int(text, 0)
    except ValueError:
        raise argparse.ArgumentTypeError(f"seed must be an integer, got {text!r}")
    if not (0 <= value < 2**64):
        raise argparse.ArgumentTypeError("seed must fit in an unsigned 64-bit integer")
    return value


def _angle_range(text: str) -> tuple[float, float]:
    try:
        parts = [float(eval_angle(p)) for p in text.split(",")]
    except ValueError:
        raise argparse.ArgumentTypeError(f"bad angle range {text!r}")
    if len(parts) == 1:
        return parts[0], parts[0]
    if len(parts) != 2 or parts[1] < parts[0]:
        raise argparse.ArgumentTypeError(f"bad angle range {text!r}")
    return parts[0], parts[1]


def eval_angle(text: str) -> float:
    """Parse ``pi``, ``2pi``, ``pi/2`` or a plain number."""
    t = text.strip().lower().replace(" ", "")
    if "pi" not in t:
        return float(t)
    num, _, den = t.partition("/")
    coeff = num.replace("*", "").replace("pi", "")
    value = (float(coeff) if coeff not in ("", "+") else (-1.0 if coeff == "-" else 1.0)) * math.pi
    return value / float(den) if den else value


# -- output ----------------------------------------------------------------------

def _fmt(value) -> str:
    if value is None:
        return "NA"
    if isinstance(value, bool):
        return str(int(value))
    if isinstance(value, int):
        return str(value)
    if isinstance(value, float):
        if math.isnan(value):
            return "NA"
        return f"{value:.10f}"
    return str(value)


@contextlib.contextmanager
def _open_out(path: str):
    if path == "-":
        yield sys.stdout
    else:
        with open(path, "w", newline="") as fh:
            yield fh


def write_csv(path: str, header: Sequence[str], rows: Iterable[Sequence]) -> int:
    count = 0
    with _open_out(path) as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(header)
        for row in rows:
            writer.writerow([_fmt(v) for v in row])
            count += 1
    return count


# -- commands --------------------------------------------------------------------

def _noise(args) -> NoiseParams:
    return NoiseParams(args.p1, args.p2)


def cmd_detect(args) -> int:
    base = SessionConfig(
        n=args.n, delta=eval_angle(args.delta), noise=_noise(args), backend=args.backend
    )
    points = detection_curve(args.pz, args.kmax, args.trials, RngStream(args.seed), base)
    rows = ((p.pz, p.k, p.trials, p.detections, p.prob, p.stderr) for p in points)
    return write_csv(args.out, ("pz", "k", "trials", "detections", "prob", "stderr"), rows)


def cmd_anonymity(args) -> int:
    dists = anonymity_distribution(
        args.n, args.trials, RngStream(args.seed), _noise(args), args.backend
    )
    rows = (
        (f, format(idx, f"0{args.n}b"), float(p))
        for f in sorted(dists)
        for idx, p in enumerate(dists[f])
    )
    return write_csv(args.out, ("flipper_index", "outcome", "probability"), rows)


def cmd_compare(args) -> int:
    base = SessionConfig(n=args.n, accounting=args.accounting, backend=args.backend)
    points = false_positive_compare(
        _noise(args), args.kmax, args.trials, RngStream(args.seed), base
    )
    rows = (
        (p.variant, p.k, p.trials, p.false_positives, p.fp_rate, p.stderr, p.gap, p.accounting)
        for p in points
    )
    header = ("variant", "k", "trials", "false_positives", "fp_rate", "stderr", "gap", "accounting")
    return write_csv(args.out, header, rows)


ATTACK_HEADER = ("model", "param", "trials", "false_notify_rate", "missed_rate", "guess_accuracy")


def cmd_attack(args) -> int:
    rng = RngStream(args.seed)
    corrupted = frozenset(range(args.n - args.corrupted, args.n))
    base = SessionConfig(
        n=args.n,
        pz=args.pz,
        k_rounds=args.k,
        noise=_noise(args),
        backend=args.backend,
    )
    rows = []
    if args.model == "poison":
        for g, prob in enumerate(args.prob):
            adv = AdversaryConfig(
                "poison", corrupted, args.epsilon, prob, allow_majority=args.allow_majority
            )
            s = attack_rates(base, adv, args.trials, rng.child(g))
            rows.append(("poison", prob, s.trials, s.false_notify_rate, s.missed_rate, s.guess_accuracy))
    elif args.model == "last-speaker":
        for g, goal in enumerate(args.goal):
            if goal not in ("force", "suppress"):
                raise InvalidArgument(f"unknown goal {goal!r}; use force or suppress")
            adv = AdversaryConfig(
                "last-speaker",
                corrupted or frozenset({args.n - 1}),
                target_parity=1 if goal == "force" else 0,
                allow_majority=args.allow_majority,
            )
            s = attack_rates(base, adv, args.trials, rng.child(g))
            rows.append(("last-speaker", goal, s.trials, s.false_notify_rate, s.missed_rate, s.guess_accuracy))
    else:
        for g, scope in enumerate(args.scope):
            adv = AdversaryConfig(
                "semi-honest", corrupted, allow_majority=args.allow_majority
            )
            rep = leakage_experiment(base.replace(scope=scope), adv, args.trials, rng.child(g))
            rows.append(("semi-honest", scope, rep.sessions, None, None, rep.notifier_accuracy))
    return write_csv(args.out, ATTACK_HEADER, rows)


QUANET_HEADER = (
    "mode",
    "class",
    "sent",
    "delivered",
    "dropped",
    "delayed",
    "mean_latency",
    "inference_accuracy",
    "failed",
    "chance_baseline",
)


def _scenario_path(text: str) -> Path:
    if text.startswith("bundled:"):
        return bundled_scenario(text.split(":", 1)[1])
    return Path(text)


def cmd_quanet(args) -> int:
    scenario = load_scenario(_scenario_path(args.config))
    cfg = scenario.config
    rng = RngStream(args.seed)
    if scenario.qan_lookup is not None:
        pz, rounds, trials, n = scenario.qan_lookup
        points = detection_curve((pz,), rounds, trials, rng.child(1_000_000), SessionConfig(n=n))
        cfg.qan_success_probability = points[-1].prob
    rows = []
    for m in run_modes(cfg, scenario.modes, rng):
        for cls in PayloadClass:
            c = m.per_class[cls]
            private = cls is PayloadClass.PRIVATE
            rows.append(
                (
                    m.mode.value,
                    cls.value,
                    c.sent,
                    c.delivered,
                    c.dropped,
                    c.delayed,
                    c.mean_latency,
                    m.inference_accuracy if private else None,
                    c.failed,
                    m.chance_baseline if private else None,
                )
            )
    return write_csv(args.out, QUANET_HEADER, rows)


def cmd_selftest(args) -> int:
    from .selftest import run_selftest

    with _open_out(args.out) as fh:
        ok = run_selftest(fh, seed=args.seed)
    return 0 if ok else 1


# -- parser ----------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--seed", type=_seed, required=True, help="master seed (unsigned 64-bit)")
    common.add_argument("--out", default="-", help="output CSV path ('-' for stdout)")
    common.add_argument("--backend", choices=("exact", "trajectory"), default="exact")
    common.add_argument("--n", type=int, default=4, help="number of users")

    def noise_flags(p, p1, p2):
        p.add_argument("--p1", type=_probability, default=p1, help="1-qubit depolarizing probability")
        p.add_argument("--p2", type=_probability, default=p2, help="2-qubit depolarizing probability")

    parser = argparse.ArgumentParser(prog="qansim", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("detect", parents=[common], help="detection probability vs rounds")
    p.add_argument("--pz", type=_probability_list, default=list(TABLE1_PZ))
    p.add_argument("--kmax", type=_positive_int, default=TABLE1_KMAX)
    p.add_argument("--trials", type=_positive_int, default=10_000)
    p.add_argument("--delta", default="pi", help="phase kick in radians (accepts 'pi')")
    noise_flags(p, 0.0, 0.0)
    p.set_defaults(func=cmd_detect)

    p = sub.add_parser("anonymity", parents=[common], help="outcome strings per flipper index")
    p.add_argument("--trials", type=_positive_int, default=1000)
    noise_flags(p, 0.0, 0.0)
    p.set_defaults(func=cmd_anonymity)

    p = sub.add_parser("compare", parents=[common], help="false positives of both variants under noise")
    p.add_argument("--kmax", type=_positive_int, default=TABLE1_KMAX)
    p.add_argument("--trials", type=_positive_int, default=10_000)
    p.add_argument(
        "--accounting",
        choices=[a.value for a in Accounting],
        default=Accounting.EQUALIZED.value,
        help="whether identity gate applications incur noise",
    )
    noise_flags(p, 0.01, 0.02)
    p.set_defaults(func=cmd_compare)

    p = sub.add_parser("attack", parents=[common], help="adversary experiments")
    p.add_argument("--model", choices=("poison", "last-speaker", "semi-honest"), required=True)
    p.add_argument("--trials", type=_positive_int, default=1000)
    p.add_argument("--prob", type=_probability_list, default=[0.0, 0.25, 0.5, 1.0])
    p.add_argument("--epsilon", type=_angle_range, default=(0.0, 2 * math.pi),
                   help="poison angle, 'lo,hi' interval or a single value (accepts pi)")
    p.add_argument("--goal", type=lambda s: [g.strip() for g in s.split(",")], default=["force"],
                   help="last-speaker goal(s): force and/or suppress")
    p.add_argument("--scope", type=lambda s: [Scope(x.strip()).value for x in s.split(",")],
                   default=[Scope.NOTIFIER_GHZ_ONLY.value])
    p.add_argument("--corrupted", type=int, default=None, help="number of corrupted users")
    p.add_argument("--allow-majority", action="store_true")
    p.add_argument("--pz", type=_probability, default=1.0)
    p.add_argument("--k", type=_positive_int, default=1, help="rounds per session")
    noise_flags(p, 0.0, 0.0)
    p.set_defaults(func=cmd_attack)

    p = sub.add_parser("quanet", help="network scenario with compromised switches")
    p.add_argument("config", help="scenario TOML file, or bundled:<name>")
    p.add_argument("--seed", type=_seed, required=True)
    p.add_argument("--out", default="-")
    p.set_defaults(func=cmd_quanet)

    p = sub.add_parser("selftest", help="quick property checks")
    p.add_argument("--seed", type=_seed, default=12345)
    p.add_argument("--out", default="-")
    p.set_defaults(func=cmd_selftest)
    return parser


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if getattr(args, "model", None) is not None:
        if args.corrupted is None:
            args.corrupted = 0 if args.model == "semi-honest" else 1
        if not (0 <= args.corrupted < args.n):
            parser.error("--corrupted must be between 0 and n-1")
    try:
        result = args.func(args)
    except (InvalidArgument, ScenarioConfigError, NumericalError) as exc:
        print(f"qansim {args.command}: error: {exc}", file=sys.stderr)
        return 2
    if args.command == "selftest":
        return result
    if args.out != "-":
        print(f"wrote {result} rows to {args.out}", file=sys.stderr)
    return 0


if __name__ == "__main__":
    sys.exit(main())
