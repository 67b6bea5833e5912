"""``tiesignal`` command line: synth, train, evaluate, signals, analyze.

Exit codes: 0 success, 1 usage error, 2 data error, 3 model/training error.
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import os
import sys
from pathlib import Path

import numpy as np

from . import dynamics
from .baselines import BaselineKind
from .cdr import load_events
from .config import ConfigError, RunConfig, load_config
from .evaluation import (
    MODEL_NAMES,
    Dataset,
    OracleModel,
    RboParams,
    ceiling_score,
    default_models,
    temporal_cv,
)
from .models import (
    ForestModel,
    TrainingDivergedError,
    comparator_of,
    generate_training_pairs,
    load_model,
    train_forest,
    train_recurrent,
)
from .pairwise import DAY, ScoreComparator, TieSignal, signal_grid, signal_series, write_signals_csv
from .survey import SurveyError, SurveyResponse, ground_truth, load_surveys, survey_waves
from .synth import generate_world

log = logging.getLogger("tiesignal")

EXIT_USAGE, EXIT_DATA, EXIT_MODEL = 1, 2, 3


class UsageError(Exception):
    pass


class DataError(Exception):
    pass


class ModelError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _out_dir(cfg: RunConfig) -> Path:
    path = Path(cfg.out)
    path.mkdir(parents=True, exist_ok=True)
    return path


def _write_text(path: Path, text: str) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write(text)


def load_dataset(cfg: RunConfig) -> Dataset:
    if not cfg.cdr or not cfg.surveys:
        raise UsageError("both --cdr and --surveys are required")
    try:
        surveys = load_surveys(cfg.surveys)
        store = load_events(cfg.cdr, participants={s.ego for s in surveys})
    except (OSError, SurveyError, ValueError, KeyError) as exc:
        raise DataError(str(exc)) from exc
    if store.report.n_rejected:
        log.warning("%d CDR lines rejected", store.report.n_rejected)
    return Dataset(store, surveys)


# -- synth -------------------------------------------------------------------

def cmd_synth(cfg: RunConfig) -> list[Path]:
    seed = cfg.require_seed()
    world = generate_world(cfg.synth, seed)
    out = _out_dir(cfg)
    paths = [out / "cdr.csv", out / "surveys.json", out / "truth.json"]
    for path, writer in zip(paths, (world.write_cdr, world.write_surveys, world.write_truth)):
        with open(path, "w", encoding="utf-8", newline="") as fh:
            writer(fh)
    log.info("wrote %d events, %d surveys to %s", len(world.events), len(world.surveys), out)
    return paths


# -- train -------------------------------------------------------------------

def train_model(kind: str, dataset: Dataset, cfg: RunConfig, exclude: str | None = None):
    """Fit ``ensemble`` or ``lstm`` on every survey, optionally leaving one ego out entirely."""
    store, surveys = dataset.store, dataset.surveys
    if exclude is not None:
        store = store.without([exclude])
        surveys = [s for s in surveys if s.ego != exclude]
    examples, _ = generate_training_pairs(list(ground_truth(surveys).values()), store)
    if not examples:
        raise ModelError("no training examples")
    seed = cfg.require_seed()
    try:
        if kind == "ensemble":
            return train_forest(examples, store, cfg.forest, seed)
        if kind == "lstm":
            return train_recurrent(examples, store, cfg.recurrent, seed)
    except TrainingDivergedError as exc:
        raise ModelError(str(exc)) from exc
    raise UsageError(f"model {kind!r} is not trainable")


def cmd_train(cfg: RunConfig, model: str, exclude: str | None = None) -> Path:
    dataset = load_dataset(cfg)
    fitted = train_model(model, dataset, cfg, exclude)
    path = _out_dir(cfg) / f"model_{model}.json"
    _write_text(path, fitted.to_json())
    return path


# -- evaluate ----------------------------------------------------------------

def cmd_evaluate(cfg: RunConfig, models=MODEL_NAMES, with_oracle: bool = False) -> Path:
    seed = cfg.require_seed()
    dataset = load_dataset(cfg)
    params = RboParams(cfg.rbo_p)
    ranking_models = default_models(seed, cfg.forest, cfg.recurrent, models)
    if with_oracle:
        ranking_models.append(OracleModel(dataset.truths))
    try:
        report = temporal_cv(dataset, ranking_models, seed, params)
    except TrainingDivergedError as exc:
        raise ModelError(str(exc)) from exc
    out = _out_dir(cfg)
    doc = report.to_dict()
    doc["ceiling"] = ceiling_score(dataset, params)
    _write_text(out / "report.json", json.dumps(doc, indent=1) + "\n")
    with open(out / "leaderboard.csv", "w", encoding="utf-8", newline="") as fh:
        report.write_leaderboard(fh)
    return out / "leaderboard.csv"


# -- signals -----------------------------------------------------------------

def comparator_for(name: str, dataset: Dataset, cfg: RunConfig, model_file: str | None, exclude: str | None):
    if name in ("ensemble", "lstm"):
        if model_file:
            try:
                with open(model_file, encoding="utf-8") as fh:
                    fitted = load_model(fh.read())
            except (OSError, ValueError) as exc:
                raise ModelError(f"cannot load model {model_file}: {exc}") from exc
            if isinstance(fitted, ForestModel) != (name == "ensemble"):
                raise UsageError(f"model file does not hold a {name} model")
        else:
            fitted = train_model(name, dataset, cfg, exclude)
        return comparator_of(fitted)
    if name in ("random", "overlap"):
        raise UsageError(f"{name} has no per-alter score to turn into a signal")
    return ScoreComparator(BaselineKind(name))


def _grid(dataset: Dataset, cfg: RunConfig) -> list[float]:
    store = dataset.store
    return signal_grid(store.first_timestamp, store.last_timestamp + 1, cfg.analysis.cadence_days,
                       extra=survey_waves(dataset.surveys))


def survey_flags(signals: dict, surveys: list[SurveyResponse]) -> list[dict]:
    """Whether ordering the surveyed alters by signal puts each at its ground-truth rank."""
    rows = []
    truths = ground_truth(surveys)
    for s in surveys:
        truth = [a for a in truths[(s.ego, s.time)].ordered_alters
                 if a in signals and signals[a].at(s.time) is not None]
        predicted = sorted(truth, key=lambda a: (-signals[a].at(s.time), a))
        for k, a in enumerate(truth):
            p = predicted.index(a)
            rows.append({"ego": s.ego, "alter": a, "survey_time": s.time, "true_rank": k + 1,
                         "predicted_rank": p + 1, "correct": int(p == k)})
    return rows


def cmd_signals(cfg: RunConfig, ego: str, model: str = "lstm", model_file: str | None = None) -> list[Path]:
    dataset = load_dataset(cfg)
    if ego not in dataset.store.persons:
        raise DataError(f"unknown ego {ego!r}")
    comparator = comparator_for(model, dataset, cfg, model_file, exclude=ego)
    signals = signal_series(comparator, dataset.store, ego, _grid(dataset, cfg))
    out = _out_dir(cfg)
    sig_path, flag_path = out / f"signals_{ego}_{model}.csv", out / f"survey_flags_{ego}_{model}.csv"
    with open(sig_path, "w", encoding="utf-8", newline="") as fh:
        write_signals_csv([signals[a] for a in sorted(signals)], fh)
    rows = survey_flags(signals, [s for s in dataset.surveys if s.ego == ego and s.answers])
    with open(flag_path, "w", encoding="utf-8", newline="") as fh:
        w = csv.DictWriter(fh, ["ego", "alter", "survey_time", "true_rank", "predicted_rank", "correct"],
                           lineterminator="\n")
        w.writeheader()
        w.writerows(rows)
    return [sig_path, flag_path]


# -- analyze -----------------------------------------------------------------

def _fmt(x) -> str:
    return "" if x is None else repr(float(x))


def run_analysis(dataset: Dataset, signals: dict[tuple[str, str], TieSignal], grid: list[float],
                 cfg: RunConfig, out: Path) -> dict:
    acfg = cfg.analysis
    labels = dynamics.relation_labels(dataset.surveys)
    genders = dynamics.genders_from(dataset.surveys)
    surveyed = {e: s for e, s in signals.items() if e in labels}
    summary: dict = {"n_signals": len(signals), "n_labelled": len(surveyed)}

    series = dynamics.relation_class_series(surveyed, labels, grid)
    with open(out / "relation_series.csv", "w", encoding="utf-8", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["class", "time", "mean", "count"])
        for rel, s in series.items():
            for t, m, n in zip(s.times, s.means, s.counts):
                w.writerow([rel.value, int(t), _fmt(m), n])
    summary["edge_volatility"] = {r.value: v for r, v in dynamics.edge_volatility(surveyed, labels).items()}
    summary["series_variance"] = {r.value: float(np.var(s.values())) for r, s in series.items() if len(s.values())}

    diffs, skipped = dynamics.transition_differences(surveyed, labels)
    summary["transitions_skipped"] = skipped
    summary["kde_modes"] = {}
    with open(out / "transitions.csv", "w", encoding="utf-8", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["relation", "transition_difference"])
        for rel in sorted(diffs, key=lambda r: r.value):
            for d in diffs[rel]:
                w.writerow([rel.value, repr(d)])
    with open(out / "transition_kde.csv", "w", encoding="utf-8", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["relation", "x", "density"])
        xs = np.linspace(-1.0, 1.0, 201)
        for rel in sorted(diffs, key=lambda r: r.value):
            kde = dynamics.gaussian_kde(diffs[rel])
            summary["kde_modes"][rel.value] = kde.modes()[:3]
            for x, y in zip(xs, kde(xs)):
                w.writerow([rel.value, repr(float(x)), repr(float(y))])

    semesters = dynamics.semester_intervals(survey_waves(dataset.surveys), dataset.store.first_timestamp)
    triads = dynamics.extract_stable_triads(dataset.store, semesters, acfg.min_events)
    summary["n_triads"] = len(triads)
    asym = dynamics.gender_asymmetry(triads, signals, genders, grid)
    with open(out / "gender_asymmetry.csv", "w", encoding="utf-8", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["triad_type", "time", "value"])
        for kind, vals in asym.items():
            for t, v in zip(grid, vals):
                w.writerow([kind, int(t), _fmt(v)])
    counts, classifiable = dynamics.motif_counts(triads, signals, grid, acfg.epsilon)
    with open(out / "motif_counts.csv", "w", encoding="utf-8", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["motif", "time", "count"])
        for motif, vals in counts.items():
            for t, v in zip(grid, vals):
                w.writerow([motif.value, int(t), v])
        for t, v in zip(grid, classifiable):
            w.writerow(["classifiable", int(t), v])
    days = [t / DAY for t in grid]
    summary["motif_slopes_per_day"] = {m.value: dynamics.trend_slope(days, v) for m, v in counts.items()} if grid else {}
    _write_text(out / "analysis_summary.json", json.dumps(summary, indent=1, sort_keys=True) + "\n")
    return summary


def all_signals(comparator, dataset: Dataset, grid: list[float]) -> dict[tuple[str, str], TieSignal]:
    out = {}
    for ego in sorted(dataset.store.participants):
        for alter, sig in signal_series(comparator, dataset.store, ego, grid).items():
            out[(ego, alter)] = sig
    return out


def cmd_analyze(cfg: RunConfig, model: str | None = None, model_file: str | None = None) -> dict:
    dataset = load_dataset(cfg)
    name = model or cfg.analysis.model
    comparator = comparator_for(name, dataset, cfg, model_file, exclude=None)
    grid = _grid(dataset, cfg)
    signals = all_signals(comparator, dataset, grid)
    out = _out_dir(cfg)
    with open(out / "signals.csv", "w", encoding="utf-8", newline="") as fh:
        write_signals_csv([signals[k] for k in sorted(signals)], fh)
    return run_analysis(dataset, signals, grid, cfg, out)


# -- argument handling -------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="INI run configuration")
    common.add_argument("--seed", type=int)
    common.add_argument("--out")
    common.add_argument("--cdr")
    common.add_argument("--surveys")
    common.add_argument("--truth")
    common.add_argument("--threads", type=int)
    common.add_argument("-v", "--verbose", action="store_true")

    parser = _Parser(prog="tiesignal", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)
    sub.add_parser("synth", parents=[common], help="generate a synthetic world")
    p = sub.add_parser("train", parents=[common], help="fit a learned comparator on all surveys")
    p.add_argument("--model", choices=["ensemble", "lstm"], default="lstm")
    p.add_argument("--exclude-ego")
    p = sub.add_parser("evaluate", parents=[common], help="temporal 3-fold cross validation")
    p.add_argument("--model", action="append", choices=MODEL_NAMES,
                   help="restrict to these models (repeatable); default all eight")
    p.add_argument("--with-oracle", action="store_true", help="add a ground-truth oracle row")
    p = sub.add_parser("signals", parents=[common], help="tie-strength signals for one ego")
    p.add_argument("--ego", required=True)
    p.add_argument("--model", choices=[m for m in MODEL_NAMES if m not in ("random", "overlap")], default="lstm")
    p.add_argument("--model-file")
    p = sub.add_parser("analyze", parents=[common], help="relationship and triad analyses")
    p.add_argument("--model", choices=[m for m in MODEL_NAMES if m not in ("random", "overlap")])
    p.add_argument("--model-file")
    return parser


def resolve_config(args) -> RunConfig:
    cfg = load_config(args.config) if args.config else RunConfig()
    for key in ("seed", "out", "cdr", "surveys", "truth", "threads"):
        val = getattr(args, key, None)
        if val is not None:
            setattr(cfg, key, val)
    return cfg


def _limit_threads(n: int):
    try:
        from threadpoolctl import threadpool_limits
    except ImportError:  # pragma: no cover
        os.environ["OMP_NUM_THREADS"] = str(n)
        return None
    return threadpool_limits(limits=n)


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg = resolve_config(args)
        _limit_threads(max(1, cfg.threads))
        if args.command == "synth":
            for path in cmd_synth(cfg):
                print(path)
        elif args.command == "train":
            print(cmd_train(cfg, args.model, args.exclude_ego))
        elif args.command == "evaluate":
            path = cmd_evaluate(cfg, tuple(args.model) if args.model else MODEL_NAMES, args.with_oracle)
            print(path.read_text(), end="")
        elif args.command == "signals":
            for path in cmd_signals(cfg, args.ego, args.model, args.model_file):
                print(path)
        elif args.command == "analyze":
            summary = cmd_analyze(cfg, args.model, args.model_file)
            print(json.dumps(summary, indent=1, sort_keys=True))
    except (UsageError, ConfigError) as exc:
        print(f"tiesignal: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except DataError as exc:
        print(f"tiesignal: data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except ModelError as exc:
        print(f"tiesignal: model error: {exc}", file=sys.stderr)
        return EXIT_MODEL
    return 0


if __name__ == "__main__":
    sys.exit(main())
