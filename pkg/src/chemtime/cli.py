"""``chemtime`` command line: simulate, train, benchmark, survival, frontier, trajectory, ranks.

Exit codes: 0 success, 1 usage/config error, 2 data or model error.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import logging
import sys
from dataclasses import replace
from pathlib import Path

from .core import DataError, load_dataset, save_dataset
from .embedding import load_table
from .encoder import ChemTimeClassifier, forward
from .evaluation import (
    ModelSpec,
    average_ranks,
    frontier_from_results,
    read_results,
    run_benchmark,
    survival,
    write_frontier,
    write_ranks,
    write_results,
    write_survival,
)
from .models import DEFAULT_ROSTER, REGISTRY, load_model, make_model, save_model
from .simgen import generate_dataset, preset_config

log = logging.getLogger("chemtime")


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(f"{self.prog}: {message}")


def _csv_list(text: str) -> list[str]:
    return [t.strip() for t in text.split(",") if t.strip()]


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="chemtime", description=__doc__.splitlines()[0])
    p.add_argument("--config", help="JSON file of option defaults for the subcommand")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", parser_class=_Parser)

    s = sub.add_parser("simgen", help="write synthetic train/test dataset files")
    s.add_argument("--preset", type=int, default=0, help="array configuration 0..10")
    s.add_argument("--seed", type=int, default=None, help="sampling seed (default: preset index)")
    s.add_argument("--n-train", type=int, default=100)
    s.add_argument("--n-test", type=int, default=32)
    s.add_argument("--duration", type=float, default=5.0)
    s.add_argument("--onset", type=float, default=1.0)
    s.add_argument("--noise", type=float, default=None, help="override the preset noise sigma (ohms)")
    s.add_argument("--positive", default="A")
    s.add_argument("--out-dir", default=".")

    s = sub.add_parser("train", help="fit one model and write a model file")
    s.add_argument("--model", default="chemtime", choices=sorted(REGISTRY))
    s.add_argument("--train", dest="train_path", required=False)
    s.add_argument("--out", default="model.json")
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--table", default=None, help="embedding table file (chemtime only)")
    s.add_argument("--epochs", type=int, default=None)
    s.add_argument("--hidden", type=int, default=None)
    s.add_argument("--lr", type=float, default=None)
    s.add_argument("--batch", type=int, default=None)
    s.add_argument("--loss", default=None, choices=("squared", "cosine", "hinge_rank"))
    s.add_argument("--boost", default=None, choices=("margin", "nearest_target"))

    s = sub.add_parser("benchmark", help="4-split benchmark -> results CSV")
    s.add_argument("--dataset", nargs=2, action="append", metavar=("TRAIN", "TEST"), default=None)
    s.add_argument("--models", type=_csv_list, default=list(DEFAULT_ROSTER))
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--jobs", type=int, default=1)
    s.add_argument("--epochs", type=int, default=None, help="chemtime training epochs")
    s.add_argument("--kernels", type=int, default=None, help="rocket kernel count")
    s.add_argument("--out", default="results.csv")

    s = sub.add_parser("survival", help="shrinking-window elimination contest -> survival CSV")
    s.add_argument("--train", dest="train_path")
    s.add_argument("--test", dest="test_path")
    s.add_argument("--models", type=_csv_list, default=list(DEFAULT_ROSTER))
    s.add_argument("--prefix-only", type=_csv_list, default=[], help="models fit once and scored on prefixes")
    s.add_argument("--start", type=float, default=5.0)
    s.add_argument("--step", type=float, default=0.25)
    s.add_argument("--floor", type=float, default=0.8)
    s.add_argument("--biased", action="store_true", help="charge inference time against the window")
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--epochs", type=int, default=None, help="chemtime training epochs")
    s.add_argument("--kernels", type=int, default=None, help="rocket kernel count")
    s.add_argument("--out", default="survival.csv")

    s = sub.add_parser("frontier", help="results CSV -> inference-time/F1 frontier CSV")
    s.add_argument("--results")
    s.add_argument("--out", default="frontier.csv")

    s = sub.add_parser("trajectory", help="per-step embeddings and margins for one sample")
    s.add_argument("--model", dest="model_path")
    s.add_argument("--data", dest="data_path")
    s.add_argument("--sample", default=None, help="sample id (default: first sample)")
    s.add_argument("--out", default=None, help="output CSV (default: stdout)")

    s = sub.add_parser("ranks", help="results CSV -> average rank per model")
    s.add_argument("--results")
    s.add_argument("--out", default=None)
    return p


def _apply_config(parser: argparse.ArgumentParser, args: argparse.Namespace, argv: list[str]) -> argparse.Namespace:
    """Config-file values fill any option not given on the command line."""
    if not args.config:
        return args
    try:
        cfg = json.loads(Path(args.config).read_text())
    except FileNotFoundError:
        raise UsageError(f"config file not found: {args.config}") from None
    except json.JSONDecodeError as exc:
        raise UsageError(f"config file {args.config} is not valid JSON: {exc}") from None
    if not isinstance(cfg, dict):
        raise UsageError("config file must hold a JSON object")
    known = set(vars(args)) - {"config", "command", "verbose"}
    # accept both option spellings: "n-train", "n_train", "train" (-> train_path)
    aliases = {"train": "train_path", "test": "test_path", "data": "data_path"}
    if args.command in ("trajectory",):
        aliases["model"] = "model_path"
    given = {a.split("=")[0].lstrip("-").replace("-", "_") for a in argv if a.startswith("--")}
    given |= {aliases.get(g, g) for g in given}
    for key, value in cfg.items():
        dest = key.replace("-", "_")
        dest = aliases.get(dest, dest)
        if dest not in known:
            raise UsageError(f"unknown config key {key!r} for subcommand {args.command!r}")
        if dest in given:
            continue
        if dest in ("models", "prefix_only") and isinstance(value, str):
            value = _csv_list(value)
        setattr(args, dest, value)
    return args


def _require(args, *names):
    for n in names:
        if getattr(args, n, None) in (None, ""):
            raise UsageError(f"missing required option {n.replace('_path', '').replace('_', '-')!r}")


def _load(path: str, what: str):
    if not Path(path).exists():
        raise UsageError(f"{what} file not found: {path}")
    return load_dataset(path)


def _model_options(name: str, args) -> dict:
    opts = {}
    if name == "chemtime" and getattr(args, "epochs", None) is not None:
        opts["epochs"] = args.epochs
    if name == "rocket" and getattr(args, "kernels", None) is not None:
        opts["n_kernels"] = args.kernels
    return opts


def _check_models(names):
    bad = [n for n in names if n not in REGISTRY]
    if bad:
        raise UsageError(f"unknown model(s) {bad}; choose from {sorted(REGISTRY)}")


def cmd_simgen(args) -> None:
    cfg = preset_config(args.preset)
    overrides = dict(
        n_train=args.n_train,
        n_test=args.n_test,
        duration_s=args.duration,
        onset_s=args.onset,
        positive_analyte=args.positive,
    )
    if args.seed is not None:
        overrides["seed"] = args.seed
    if args.noise is not None:
        overrides["array_spec"] = replace(cfg.array_spec, noise_sigma=args.noise)
    try:
        cfg = replace(cfg, **overrides)
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    train, test = generate_dataset(cfg)
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    save_dataset(train, out / "train.json")
    save_dataset(test, out / "test.json")
    log.info("wrote %s and %s", out / "train.json", out / "test.json")


def cmd_train(args) -> None:
    _require(args, "train_path")
    ds = _load(args.train_path, "training")
    if args.model == "chemtime":
        hp = {k: v for k, v in dict(epochs=args.epochs, hidden=args.hidden, lr=args.lr, batch=args.batch,
                                     loss_kind=args.loss, boost=args.boost).items() if v is not None}
        table = load_table(args.table) if args.table else None
        model = ChemTimeClassifier(table=table, seed=args.seed, **hp)
    else:
        model = make_model(args.model, seed=args.seed)
    model.fit(ds)
    save_model(model, args.out)
    log.info("wrote %s", args.out)


def cmd_benchmark(args) -> None:
    if not args.dataset:
        raise UsageError("benchmark needs at least one --dataset TRAIN TEST pair")
    _check_models(args.models)
    pairs = [(_load(tr, "training"), _load(te, "test")) for tr, te in args.dataset]
    specs = [ModelSpec(m, _model_options(m, args)) for m in args.models]
    records = run_benchmark(specs, pairs, seed=args.seed, jobs=args.jobs)
    write_results(records, args.out)
    log.info("wrote %d records to %s", len(records), args.out)


def cmd_survival(args) -> None:
    _require(args, "train_path", "test_path")
    _check_models(args.models)
    train, test = _load(args.train_path, "training"), _load(args.test_path, "test")
    specs = [ModelSpec(m, _model_options(m, args), prefix_only=m in args.prefix_only) for m in args.models]
    table = survival(
        specs, train, test, start_s=args.start, step_s=args.step, floor=args.floor,
        mode="inference_biased" if args.biased else "plain", seed=args.seed,
    )
    write_survival(table, args.out)
    log.info("wrote %d rounds to %s", len(table.rounds), args.out)


def cmd_frontier(args) -> None:
    _require(args, "results")
    if not Path(args.results).exists():
        raise UsageError(f"results file not found: {args.results}")
    write_frontier(frontier_from_results(read_results(args.results)), args.out)


def cmd_trajectory(args) -> None:
    _require(args, "model_path", "data_path")
    if not Path(args.model_path).exists():
        raise UsageError(f"model file not found: {args.model_path}")
    clf = load_model(args.model_path)
    if not isinstance(clf, ChemTimeClassifier):
        raise DataError(f"{args.model_path} holds a {clf.kind!r} model; trajectories need a chemtime model")
    ds = _load(args.data_path, "dataset")
    if args.sample is None:
        sample = ds.samples[0]
    else:
        matches = [s for s in ds.samples if s.id == args.sample]
        if not matches:
            raise DataError(f"sample {args.sample!r} not in {args.data_path}")
        sample = matches[0]
    traj = forward(clf.model, sample)
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["t"] + [f"e{i}" for i in range(traj.points.shape[1])] + ["distance"])
    for t, e in enumerate(traj.points):
        dist = "" if traj.distances is None else repr(float(traj.distances[t]))
        w.writerow([t + 1] + [repr(float(v)) for v in e] + [dist])
    if args.out:
        Path(args.out).write_text(buf.getvalue())
    else:
        sys.stdout.write(buf.getvalue())


def cmd_ranks(args) -> None:
    _require(args, "results")
    if not Path(args.results).exists():
        raise UsageError(f"results file not found: {args.results}")
    text = write_ranks(average_ranks(read_results(args.results)), args.out)
    if not args.out:
        sys.stdout.write(text)


COMMANDS = {
    "simgen": cmd_simgen,
    "train": cmd_train,
    "benchmark": cmd_benchmark,
    "survival": cmd_survival,
    "frontier": cmd_frontier,
    "trajectory": cmd_trajectory,
    "ranks": cmd_ranks,
}


def main(argv: list[str] | None = None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        if not args.command:
            raise UsageError("a subcommand is required: " + ", ".join(COMMANDS))
        args = _apply_config(parser, args, argv)
        logging.basicConfig(level=logging.DEBUG if args.verbose else logging.INFO, format="%(levelname)s %(name)s: %(message)s")
        resolved = {k: v for k, v in sorted(vars(args).items())}
        log.info("resolved config: %s", json.dumps(resolved, default=str, sort_keys=True))
        COMMANDS[args.command](args)
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except (DataError, ValueError, KeyError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
