"""Command-line surface: score, train, gradcheck, simulate-noise, calibrate.

Exit codes: 0 success, 1 validation error, 2 numerical failure.
"""

from __future__ import annotations

import argparse
import json
import os
import sys

from . import calibration, data, gradcheck, noise_sim
from .data import DatasetError, load_config
from .policy import TrainConfig, save_checkpoint, train
from .reward import TrainingError

CONFIG_ENV = "TURDPO_CONFIG"

EXIT_OK = 0
EXIT_VALIDATION = 1
EXIT_NUMERICAL = 2


def _config_path(args) -> str | None:
    if args.config:
        return args.config
    return os.environ.get(CONFIG_ENV) or None


def _write_jsonl(path: str, rows) -> None:
    with open(path, "w") as fh:
        for row in rows:
            fh.write(json.dumps(row, sort_keys=True) + "\n")


def cmd_score(args) -> int:
    cfg = load_config(_config_path(args), {"seed": args.seed})
    records = data.parse_dataset(args.input, cfg.k_samples)
    rows = [data.score_record(r, cfg) for r in records]
    _write_jsonl(args.output, rows)
    print(f"scored {len(rows)} pairs -> {args.output}")
    return EXIT_OK


def cmd_train(args) -> int:
    cfg = load_config(_config_path(args), {"seed": args.seed})
    records = data.parse_dataset(args.input, cfg.k_samples)
    if not records:
        raise DatasetError("dataset is empty")
    pairs = data.prepare_pairs(records, cfg)
    train_cfg = cfg.train_config()
    result = train(pairs, train_cfg)
    save_checkpoint(args.output, result, train_cfg)
    metrics_path = args.metrics or args.output + ".metrics.jsonl"
    _write_jsonl(metrics_path, result.metrics)
    print(
        f"trained {train_cfg.steps} steps on {len(pairs)} pairs; "
        f"checkpoint -> {args.output}, metrics -> {metrics_path}"
    )
    return EXIT_OK


def cmd_gradcheck(args) -> int:
    report = gradcheck.run_all(n=args.instances, seed=args.seed or 0)
    print(json.dumps(report.to_dict(), indent=2, sort_keys=True))
    return EXIT_OK if report.passed else EXIT_NUMERICAL


def cmd_simulate_noise(args) -> int:
    cfg = load_config(_config_path(args), {"seed": args.seed})
    eps_grid = [float(v) for v in args.eps_grid.split(",") if v.strip()]
    if not eps_grid:
        raise DatasetError("eps grid must be nonempty")
    points = noise_sim.run_noise_experiment(
        eps_grid=eps_grid,
        seeds=args.seeds,
        dependence=args.dependence,
        objective=cfg.objective_params(),
        weight_params=cfg.weight_params(),
        base_seed=cfg.seed,
    )
    report = [
        {
            "eps": p.eps,
            "win_rate_dpo": p.win_rate_dpo,
            "win_rate_turdpo": p.win_rate_turdpo,
            "retention_dpo": p.retention_dpo,
            "retention_turdpo": p.retention_turdpo,
        }
        for p in points
    ]
    text = json.dumps(report, indent=2, sort_keys=True)
    if args.output:
        with open(args.output, "w") as fh:
            fh.write(text + "\n")
    print(text)
    return EXIT_OK


def cmd_calibrate(args) -> int:
    cfg = load_config(_config_path(args), {"seed": args.seed})
    probs, labels, logits = [], [], []
    with open(args.input) as fh:
        for lineno, raw in enumerate(fh, start=1):
            raw = raw.strip()
            if not raw:
                continue
            try:
                row = json.loads(raw)
            except json.JSONDecodeError as exc:
                raise DatasetError(f"malformed JSON: {exc.msg}", lineno) from exc
            if "label" not in row or ("prob" not in row and "logit" not in row):
                raise DatasetError("need 'label' and one of 'prob'/'logit'", lineno)
            labels.append(float(row["label"]))
            if "logit" in row:
                logits.append(float(row["logit"]))
                probs.append(float(row.get("prob", _sigmoid(float(row["logit"])))))
            else:
                probs.append(float(row["prob"]))
    if not probs:
        raise DatasetError("empty predictions file")
    edges = tuple(float(v) for v in args.bin_edges.split(",")) if args.bin_edges else None
    cal_cfg = calibration.CalibrationConfig(num_bins=cfg.num_bins, edges=edges)
    report = calibration.calibration_report(
        probs, labels, logits if len(logits) == len(probs) else None, cal_cfg
    )
    text = json.dumps(report, indent=2, sort_keys=True)
    if args.output:
        with open(args.output, "w") as fh:
            fh.write(text + "\n")
    print(text)
    return EXIT_OK


def _sigmoid(x: float) -> float:
    import math

    if x >= 0:
        return 1.0 / (1.0 + math.exp(-x))
    e = math.exp(x)
    return e / (1.0 + e)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="turdpo",
        description="Topology- and uncertainty-aware preference optimization toolkit",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--config", help=f"config JSON (or ${CONFIG_ENV})")
        p.add_argument("--seed", type=int, default=None, help="override config seed")

    p = sub.add_parser("score", help="score a preference dataset")
    common(p)
    p.add_argument("--input", required=True, help="JSONL pair dataset")
    p.add_argument("--output", required=True, help="scored JSONL output")
    p.set_defaults(func=cmd_score)

    p = sub.add_parser("train", help="train the toy policy")
    common(p)
    p.add_argument("--input", required=True, help="JSONL pair dataset")
    p.add_argument("--output", required=True, help="checkpoint JSON output")
    p.add_argument("--metrics", help="metrics trace JSONL (default: <output>.metrics.jsonl)")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("gradcheck", help="finite-difference gradient verification")
    common(p)
    p.add_argument("--instances", type=int, default=1000, help="random instances per check")
    p.set_defaults(func=cmd_gradcheck)

    p = sub.add_parser("simulate-noise", help="label-noise retention experiment")
    common(p)
    p.add_argument("--eps-grid", default="0.1,0.2,0.3", help="comma-separated flip rates")
    p.add_argument("--seeds", type=int, default=20)
    p.add_argument(
        "--dependence",
        choices=("independent", "uncertainty-correlated"),
        default="uncertainty-correlated",
    )
    p.add_argument("--output", help="report JSON output path")
    p.set_defaults(func=cmd_simulate_noise)

    p = sub.add_parser("calibrate", help="calibration report for predictions")
    common(p)
    p.add_argument("--input", required=True, help="JSONL with prob/logit and label fields")
    p.add_argument("--output", help="report JSON output path")
    p.add_argument("--bin-edges", help="comma-separated custom bin edges, e.g. 0,0.5,0.7,0.9,1")
    p.set_defaults(func=cmd_calibrate)
    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (DatasetError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    except (TrainingError, FloatingPointError, ArithmeticError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL


if __name__ == "__main__":
    sys.exit(main())
