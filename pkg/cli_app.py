"""
Command-line front end.

    python cli_app.py estimate   --counts sample_data/field_run_103km.csv --config sample_data/field_device.conf
    python cli_app.py simulate   --config sample_data/field_device.conf --distance 103 --optimize
    python cli_app.py rate-curve --config sample_data/field_device.conf --from 0 --to 300 --step 20 --out curve.csv
    python cli_app.py demo-sign  --config demo.conf --message-bit 1 --seed 7

Exit codes: 0 success, 2 input error, 3 infeasible estimate or protocol failure.
"""
import argparse
import logging
import sys

import numpy as np
import pandas as pd

from channel_model import Link, expected_statistics, sample_statistics
from counts_io import read_counts
from errors import (
    ConfigError,
    CountsFormatError,
    EstimationError,
    InfeasibleError,
    PoolExhaustedError,
)
from optimizer import SearchSpace, optimize, rate_curve
from protocol import TRANSMITTER, Purpose, QDSSession
from security import Thresholds, assess, min_signature_length, signature_time_and_rate
from settings import load_config

logger = logging.getLogger(__name__)

EXIT_OK, EXIT_INPUT, EXIT_INFEASIBLE = 0, 2, 3


def render_report(report, params):
    summary = pd.DataFrame(
        [
            ("s_Z,1^L", report.estimates.s_z1_lower),
            ("phi_Z,1^U", report.estimates.phi_z1_upper),
            ("s_alpha", report.thresholds.s_alpha),
            ("s_upsilon", report.thresholds.s_upsilon),
            ("L", report.L),
            ("p_sec", report.p_sec),
            ("rate (bit/s)", report.rate_bits_per_s),
        ],
        columns=["quantity", "value"],
    )
    bounds = pd.DataFrame(
        [
            ("P(Robust)", report.p_robust, report.raw["p_robust"]),
            ("P(Repudiation)", report.p_repudiation, report.raw["p_repudiation"]),
            ("P(Forge)", report.p_forge, report.raw["p_forge"]),
            ("eps_F", min(1.0, report.raw["epsilon_f"]), report.raw["epsilon_f"]),
            ("p_sec floor", report.floor, report.floor),
        ],
        columns=["bound", "clamped", "raw"],
    )
    extra = pd.DataFrame(
        [
            ("p_E", report.p_e),
            ("E^U", report.e_upper),
            ("k (test keys)", report.k),
            ("s_Z,0^U", report.estimates.s_z0_upper),
            ("s_X,1^L", report.estimates.s_x1_lower),
            ("v_X,1^U", report.estimates.v_x1_upper),
            ("time per bit (s)", report.time_per_bit_s),
        ],
        columns=["quantity", "value"],
    )
    budget = pd.DataFrame(params.budget().to_rows())
    parts = [
        "## Estimated parameters",
        summary.to_markdown(index=False, floatfmt=".6g"),
        "",
        "## Security bounds",
        bounds.to_markdown(index=False, floatfmt=".4g"),
        "",
        "## Intermediate values",
        extra.to_markdown(index=False, floatfmt=".6g"),
        "",
        "## Parameter-estimation budget",
        budget.to_markdown(index=False, floatfmt=".3g"),
    ]
    if report.notes:
        parts += ["", "## Notes", *(f"- {note}" for note in report.notes)]
    return "\n".join(parts)


def _emit(text, out=None):
    print(text)
    if out:
        with open(out, "w") as f:
            f.write(text + "\n")
        logger.info("report written to %s", out)


def cmd_estimate(args):
    cfg = load_config(args.config)
    counts_file = read_counts(args.counts)
    pc = cfg.pulse_config(n_pulses=counts_file.n_pulses)
    ch = cfg.channel(counts_file.distance_km)
    params = cfg.security()
    counts = counts_file.counts
    L = args.block_length or min_signature_length(counts, pc, params)
    report = assess(counts, pc, params, L)
    report.with_timing(signature_time_and_rate(L, counts, pc, ch))
    _emit(render_report(report, params), args.out)
    return EXIT_OK if report.thresholds.feasible and not report.overestimated else EXIT_INFEASIBLE


def _sampled_counts(pc, ch, seed):
    return {link: sample_statistics(pc, ch, seed=[seed, int(TRANSMITTER[link]), int(Purpose.CHANNEL)]) for link in Link}


def cmd_simulate(args):
    cfg = load_config(args.config)
    distance = cfg.distance_km if args.distance is None else args.distance
    seed = cfg.seed if args.seed is None else args.seed
    ch = cfg.channel(distance)
    params = cfg.security()
    pc = cfg.pulse_config()
    if args.optimize:
        result = optimize(SearchSpace(search_k=args.search_k), ch, params, cfg.n_pulses, progress=sys.stderr.isatty())
        if not result.best.feasible:
            print(result.diagnosis, file=sys.stderr)
            return EXIT_INFEASIBLE
        pc = result.best.point.pulse_config(cfg.n_pulses)
        params = result.best.point.security(params)
        print(f"optimized source: {result.best.point.as_dict()}")
    if args.sampled:
        counts = _sampled_counts(pc, ch, seed)
    else:
        counts = {link: expected_statistics(pc, ch) for link in Link}
    L = min_signature_length(counts, pc, params)
    report = assess(counts, pc, params, L)
    report.with_timing(signature_time_and_rate(L, counts, pc, ch))
    _emit(render_report(report, params), args.out)
    if args.no_messaging:
        return EXIT_OK
    session = QDSSession(pc, ch, params, seed)
    try:
        dist = session.distribute(L=L)
        outcome = session.run_messaging(args.message_bit)
    except (InfeasibleError, PoolExhaustedError) as exc:
        print(f"\nmessaging demo skipped: {exc}")
        return EXIT_OK
    print(f"\n## Messaging ({dist.mode} keys, L={dist.L})")
    _print_outcome(outcome)
    if args.transcript:
        session.transcript.write_jsonl(args.transcript)
    print(f"transcript: {len(session.transcript)} messages, digest {session.transcript.digest()[:16]}")
    return EXIT_OK


def distance_grid(start, stop, step):
    """start, start + step, ... up to and including stop; empty when start == stop."""
    if start == stop:
        return np.array([])
    return np.arange(start, stop + step / 2.0, step)


def cmd_rate_curve(args):
    if args.step <= 0 or args.start > args.stop:
        raise ValueError(f"bad range: from={args.start} to={args.stop} step={args.step}")
    cfg = load_config(args.config)
    distances = distance_grid(args.start, args.stop, args.step)
    space = SearchSpace(resolution=args.resolution, search_k=args.search_k)
    df = rate_curve(distances, space, cfg.channel(), cfg.security(), cfg.n_pulses, progress=sys.stderr.isatty())
    df.to_csv(args.out, index=False, columns=["distance_km", "rate", "L", "p_sec", "feasible"])
    logger.info("rate curve with %d rows written to %s", len(df), args.out)
    if len(df):
        print(df.to_markdown(index=False, floatfmt=".4g"))
    return EXIT_OK


def _print_outcome(outcome):
    bob = outcome.mismatches.get("bob")
    print(f"Bob (s_alpha):     mismatches kept/forwarded = {bob}, verdict {outcome.bob_verdict.value}")
    if outcome.aborted:
        print("Bob announced abort; Charlie gives no verdict")
    else:
        charlie = outcome.mismatches.get("charlie")
        print(f"Charlie (s_upsilon): mismatches kept/forwarded = {charlie}, verdict {outcome.charlie_verdict.value}")


def cmd_demo_sign(args):
    cfg = load_config(args.config)
    seed = cfg.seed if args.seed is None else args.seed
    session = QDSSession(cfg.pulse_config(), cfg.channel(), cfg.security(), seed)
    thresholds = Thresholds(*args.thresholds) if args.thresholds else None
    dist = session.distribute(L=args.block_length, thresholds=thresholds)
    print("## Key generation")
    for link, kgp in dist.kgp.items():
        print(f"{link.value}: {kgp.detections} detections, pool QBER {kgp.pool.qber():.4f}, "
              f"{kgp.pool.remaining} bits left ({kgp.mode} mode)")
    print(f"L={dist.L}, k={dist.k}, s_alpha={dist.thresholds.s_alpha:.4f}, s_upsilon={dist.thresholds.s_upsilon:.4f}")
    for note in dist.notes:
        print(f"note: {note}")
    print(f"\n## Message m={args.message_bit}")
    outcome = session.run_messaging(args.message_bit)
    _print_outcome(outcome)
    if args.transcript:
        session.transcript.write_jsonl(args.transcript)
    print(f"transcript: {len(session.transcript)} messages, digest {session.transcript.digest()[:16]}")
    return EXIT_OK


def build_parser():
    parser = argparse.ArgumentParser(prog="qds", description="One-decoy quantum digital signature toolkit")
    parser.add_argument("-v", "--verbose", action="store_true", help="debug logging")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("estimate", help="finite-key estimation and security report from a counts file")
    p.add_argument("--counts", required=True)
    p.add_argument("--config")
    p.add_argument("--block-length", type=int, help="fixed signature length L instead of the minimal one")
    p.add_argument("--out", help="also write the report here")
    p.set_defaults(func=cmd_estimate)

    p = sub.add_parser("simulate", help="simulate both links at a distance and run the full pipeline")
    p.add_argument("--config")
    p.add_argument("--distance", type=float)
    p.add_argument("--seed", type=int)
    p.add_argument("--sampled", action="store_true", help="binomial counts instead of expectations")
    p.add_argument("--optimize", action="store_true", help="search source parameters first")
    p.add_argument("--search-k", action="store_true", help="also optimize the test-key fraction")
    p.add_argument("--message-bit", type=int, choices=(0, 1), default=0)
    p.add_argument("--no-messaging", action="store_true", help="skip the end-to-end signing demo")
    p.add_argument("--transcript", help="JSON-lines transcript output")
    p.add_argument("--out")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("rate-curve", help="optimized signature rate versus distance as CSV")
    p.add_argument("--config")
    p.add_argument("--from", dest="start", type=float, required=True)
    p.add_argument("--to", dest="stop", type=float, required=True)
    p.add_argument("--step", type=float, required=True)
    p.add_argument("--resolution", type=int, default=4, help="grid points per parameter")
    p.add_argument("--search-k", action="store_true", help="also optimize the test-key fraction")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_rate_curve)

    p = sub.add_parser("demo-sign", help="distribution plus one signed bit, printed hop by hop")
    p.add_argument("--config")
    p.add_argument("--message-bit", type=int, choices=(0, 1), required=True)
    p.add_argument("--seed", type=int)
    p.add_argument("--block-length", type=int)
    p.add_argument("--thresholds", type=float, nargs=2, metavar=("S_ALPHA", "S_UPSILON"),
                   help="fixed verification thresholds instead of the estimated ones")
    p.add_argument("--transcript")
    p.set_defaults(func=cmd_demo_sign)
    return parser


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(
        level=logging.DEBUG if args.verbose else logging.INFO,
        format="[%(levelname)s] %(name)s: %(message)s",
    )
    try:
        return args.func(args)
    except (ConfigError, CountsFormatError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except (InfeasibleError, EstimationError, PoolExhaustedError) as exc:
        print(f"infeasible: {exc}", file=sys.stderr)
        return EXIT_INFEASIBLE


if __name__ == "__main__":
    sys.exit(main())
