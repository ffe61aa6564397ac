"""Command-line entry point.

Subcommands: train, verify, ablate, metrics e3, analyze-keywords. Each takes
``--seed``, ``--out-dir`` (default from $VPGEA_OUT_DIR, else ./runs) and
``--json``. Every file goes under the out-dir and is written atomically.

Exit codes: 0 success, 1 a verification check failed, 2 config/usage error,
3 numeric error, 4 capacity error.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import os
import sys
import tempfile
from dataclasses import dataclass, field, replace
from datetime import datetime, timezone
from pathlib import Path

from . import __version__, config as config_io
from .errors import CapacityError, ConfigError, NumericError
from .metrics import KeywordDictionary, eval_report, keyword_scan, read_eval_csv
from .oracle import enumerate_world
from .scoring import HyperParams
from .trainer import TrainConfig, TrainingAborted, eval_tasks, run_training
from .verification import random_world, run_theory_checks

OUT_DIR_ENV = "VPGEA_OUT_DIR"

EXIT_OK, EXIT_CHECK_FAILED, EXIT_CONFIG, EXIT_NUMERIC, EXIT_CAPACITY = 0, 1, 2, 3, 4

ABLATION_GRID: dict[str, dict] = {
    "full": {},
    "beta0": {"disable_distill": True},
    "alpha0": {"disable_efficiency": True},
    "alpha0.25": {"hp": {"alpha": 0.25}},
    # alpha = 0.5 is the default, so "full" covers it
    "alpha1.0": {"hp": {"alpha": 1.0}},
    "alpha2.0": {"hp": {"alpha": 2.0}},
}


@dataclass
class RunManifest:
    command: str
    seed: int
    config: dict | None
    started: str
    finished: str = ""
    artifacts: dict[str, str] = field(default_factory=dict)
    version: str = __version__

    def to_json(self) -> str:
        return json.dumps(self.__dict__, indent=2, sort_keys=True)


def _now() -> str:
    return datetime.now(timezone.utc).isoformat(timespec="seconds")


def write_atomic(path: Path, text: str) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        os.unlink(tmp)
        raise


def _rows_csv(rows: list[dict], columns=None) -> str:
    buf = io.StringIO()
    columns = columns or (list(rows[0]) if rows else [])
    w = csv.DictWriter(buf, fieldnames=columns, lineterminator="\n")
    w.writeheader()
    w.writerows(rows)
    return buf.getvalue()


class _Run:
    """Collects artifacts for one subcommand and writes the manifest last."""

    def __init__(self, args, command: str, cfg: TrainConfig | None = None):
        self.out = Path(args.out_dir)
        self.manifest = RunManifest(
            command=command, seed=args.seed,
            config=None if cfg is None else config_io.config_to_dict(cfg), started=_now(),
        )

    def write(self, key: str, name: str, text: str) -> Path:
        path = self.out / name
        write_atomic(path, text)
        self.manifest.artifacts[key] = str(path)
        return path

    def finish(self) -> None:
        self.manifest.finished = _now()
        write_atomic(self.out / "manifest.json", self.manifest.to_json() + "\n")


def _emit(args, payload: dict, text: str) -> None:
    print(json.dumps(payload, indent=2, sort_keys=True) if args.json else text)


def _load_config(args) -> TrainConfig:
    cfg = config_io.load(args.config)
    changes = {"seed": args.seed}
    if getattr(args, "iterations", None) is not None:
        changes["iterations"] = args.iterations
    try:
        return replace(cfg, **changes)
    except TypeError as exc:
        raise ConfigError(str(exc)) from exc


# --- subcommands --------------------------------------------------------------


def cmd_train(args) -> int:
    cfg = _load_config(args)
    run = _Run(args, "train", cfg)
    run.write("config", "config.toml", config_io.dumps(cfg))
    try:
        log = run_training(cfg)
    except TrainingAborted as exc:
        run.write("training_log", "training_log.csv", exc.log.to_csv())
        run.write("eval_log", "eval_log.csv", exc.log.evals_to_csv())
        run.finish()
        raise
    run.write("params", "params.json", log.params.to_json())
    run.write("training_log", "training_log.csv", log.to_csv())
    run.write("eval_log", "eval_log.csv", log.evals_to_csv())
    rep = enumerate_world(log.params, eval_tasks(cfg)[0], cfg.effective_hp())
    run.write("enumeration_report", "enumeration_report.json", json.dumps(rep.scalars(), indent=2) + "\n")
    run.write("enumeration_table", "enumeration_table.csv", _rows_csv(rep.table_rows()))
    run.finish()
    first, last = log.evals[0], log.evals[-1]
    _emit(
        args,
        {"initial": first, "final": last, "out_dir": str(run.out)},
        f"prior length {first['prior_len']:.3f} -> {last['prior_len']:.3f}, "
        f"prior accuracy {first['prior_acc']:.3f} -> {last['prior_acc']:.3f}\n"
        f"artifacts in {run.out}",
    )
    return EXIT_OK


def cmd_verify(args) -> int:
    hp = HyperParams(alpha=args.alpha)
    run = _Run(args, "verify")
    report = run_theory_checks(args.seed, args.worlds, hp)
    run.write("verify_report", "verify_report.json", json.dumps(report, indent=2) + "\n")
    task, params = random_world(args.seed, 0)
    rep = enumerate_world(params, task, hp)
    run.write("enumeration_report", "enumeration_report.json", json.dumps(rep.scalars(), indent=2) + "\n")
    run.write("enumeration_table", "enumeration_table.csv", _rows_csv(rep.table_rows()))
    run.finish()
    lines = [
        f"{'PASS' if c['passed'] else 'FAIL'}  {name:32s} max residual {c['max_residual']:.3e}"
        for name, c in report["checks"].items()
    ]
    _emit(args, report, "\n".join(lines))
    return EXIT_OK if report["all_passed"] else EXIT_CHECK_FAILED


def _variant_config(base: TrainConfig, overrides: dict) -> TrainConfig:
    overrides = dict(overrides)
    hp = replace(base.hp, **overrides.pop("hp", {}))
    return replace(base, hp=hp, **overrides)


def cmd_ablate(args) -> int:
    base = _load_config(args)
    run = _Run(args, "ablate", base)
    variants = args.variants or list(ABLATION_GRID)
    unknown = set(variants) - set(ABLATION_GRID)
    if unknown:
        raise ConfigError(f"unknown ablation variants: {sorted(unknown)}")
    runs, curves = [], []
    for name in variants:
        for seed in range(args.seed, args.seed + args.seeds):
            log = run_training(replace(_variant_config(base, ABLATION_GRID[name]), seed=seed))
            first, last = log.evals[0], log.evals[-1]
            runs.append({
                "variant": name, "seed": seed,
                "initial_prior_len": first["prior_len"], "final_prior_len": last["prior_len"],
                "initial_prior_acc": first["prior_acc"], "final_prior_acc": last["prior_acc"],
                "final_post_len": last["post_len"], "final_post_acc": last["post_acc"],
            })
            curves.extend({"variant": name, "seed": seed, **e} for e in log.evals)
    summary = []
    full = {r["seed"]: r for r in runs if r["variant"] == "full"}
    for name in variants:
        rs = [r for r in runs if r["variant"] == name]
        row = {
            "variant": name,
            "seeds": len(rs),
            "mean_final_prior_len": sum(r["final_prior_len"] for r in rs) / len(rs),
            "mean_final_prior_acc": sum(r["final_prior_acc"] for r in rs) / len(rs),
            "mean_length_change": sum(r["final_prior_len"] - r["initial_prior_len"] for r in rs) / len(rs),
        }
        if full and name != "full":
            row["seeds_longer_than_full"] = sum(
                r["final_prior_len"] > full[r["seed"]]["final_prior_len"] for r in rs
            )
        summary.append(row)
    run.write("ablation_runs", "ablation_runs.csv", _rows_csv(runs))
    run.write("ablation_curves", "ablation_curves.csv", _rows_csv(curves))
    run.write("ablation_summary", "ablation_summary.json", json.dumps(summary, indent=2) + "\n")
    run.finish()
    lines = [
        f"{s['variant']:10s} final prior length {s['mean_final_prior_len']:.3f}  "
        f"accuracy {s['mean_final_prior_acc']:.3f}"
        for s in summary
    ]
    _emit(args, {"summary": summary, "runs": runs}, "\n".join(lines))
    return EXIT_OK


def cmd_metrics_e3(args) -> int:
    path = Path(args.input)
    if not path.is_file():
        raise ConfigError(f"input file not found: {path}")
    table = eval_report(read_eval_csv(path))
    run = _Run(args, "metrics e3")
    run.write("e3_table", "e3_table.csv", table.to_csv())
    run.finish()
    _emit(args, table.to_dict(), table.to_csv().rstrip("\n"))
    return EXIT_OK


def cmd_analyze_keywords(args) -> int:
    dictionary = KeywordDictionary.from_file(args.dict) if args.dict else KeywordDictionary()
    rows = []
    for name in args.files:
        path = Path(name)
        if not path.is_file():
            raise ConfigError(f"transcript not found: {path}")
        text = path.read_text()
        for cat, kc in keyword_scan(text, dictionary).items():
            rows.append({
                "file": str(path), "category": cat, "count": kc.count,
                "per_thousand": kc.per_thousand, "matched_tokens": kc.matched_tokens,
                "total_tokens": len(text.split()),
            })
    run = _Run(args, "analyze-keywords")
    run.write("keyword_frequencies", "keyword_frequencies.csv", _rows_csv(rows))
    run.finish()
    lines = [f"{r['file']}  {r['category']:22s} {r['count']:5d}  {r['per_thousand']:.3f}/1k" for r in rows]
    _emit(args, {"rows": rows}, "\n".join(lines))
    return EXIT_OK


# --- parser -------------------------------------------------------------------


def _common() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(add_help=False)
    p.add_argument("--seed", type=int, default=0, help="master seed (default 0)")
    p.add_argument(
        "--out-dir", default=os.environ.get(OUT_DIR_ENV, "runs"),
        help=f"output directory (default ${OUT_DIR_ENV} or ./runs)",
    )
    p.add_argument("--json", action="store_true", help="print a JSON summary to stdout")
    return p


def build_parser() -> argparse.ArgumentParser:
    common = _common()
    parser = argparse.ArgumentParser(prog="vpgea", description=__doc__.split("\n\n")[0])
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("train", parents=[common], help="train one policy")
    p.add_argument("--config", default="default", help="TOML config path, or 'default'")
    p.add_argument("--iterations", type=int, help="override train.iterations")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("verify", parents=[common], help="exact theory checks on random worlds")
    p.add_argument("--worlds", type=int, default=100)
    p.add_argument("--alpha", type=float, default=HyperParams.alpha)
    p.set_defaults(func=cmd_verify)

    p = sub.add_parser("ablate", parents=[common], help="run the ablation grid over seeds")
    p.add_argument("--config", default="default")
    p.add_argument("--seeds", type=int, default=5, help="number of consecutive seeds from --seed")
    p.add_argument("--iterations", type=int)
    p.add_argument("--variants", nargs="+", metavar="NAME", help=f"subset of {list(ABLATION_GRID)}")
    p.set_defaults(func=cmd_ablate)

    p = sub.add_parser("metrics", help="evaluation metrics")
    msub = p.add_subparsers(dest="metric", required=True)
    e3 = msub.add_parser("e3", parents=[common], help="ACC^2 / A.Tok table from a CSV of name,acc,avg_tokens")
    e3.add_argument("--in", dest="input", required=True)
    e3.set_defaults(func=cmd_metrics_e3)

    p = sub.add_parser(
        "analyze-keywords", parents=[common],
        help="keyword-category frequencies per 1000 tokens",
        description="Tokens are whitespace-split; leading/trailing punctuation is stripped "
        "for matching only, and frequencies use the raw token count. Matching is "
        "case-sensitive, leftmost-longest, without overlaps.",
    )
    p.add_argument("files", nargs="+")
    p.add_argument("--dict", help="override dictionary, one 'category: phrase' per line")
    p.set_defaults(func=cmd_analyze_keywords)
    return parser


def run(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        return args.func(args)
    except CapacityError as exc:
        print(f"capacity error: {exc}", file=sys.stderr)
        return EXIT_CAPACITY
    except NumericError as exc:
        print(f"numeric error: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except (ConfigError, ValueError, OSError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


def main() -> None:
    sys.exit(run())


if __name__ == "__main__":
    main()
