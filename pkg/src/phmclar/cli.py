"""Command-line interface.

Subcommands: ``simulate``, ``train``, ``infer``, ``forecast``, ``eval``,
``experiment``.  Every run with a ``--seed`` flag is reproducible.
Failures print one JSON object to stderr; the exit code is 1 for
validation problems and 2 for numeric ones (zero likelihood,
inconsistent labels, no admissible path).
"""

from __future__ import annotations

import argparse
import glob
import json
import sys
from pathlib import Path

import numpy as np

from . import serialize
from .decode import viterbi
from .em import EmConfig, train
from .errors import InvalidConfig, InvalidModel, NumericFailure, PhmclarError
from .experiments import (
    FORECAST_FIELDS,
    INFERENCE_FIELDS,
    InferenceExperimentConfig,
    load_experiment_config,
    run_forecast_experiment,
    run_inference_experiment,
    write_csv,
)
from .forecast import forecast
from .model import Hyper, simulate, validate_model
from .serialize import _label_from_json  # shared label wire format


class _UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):  # exit 1 with JSON, not argparse's exit 2
        raise _UsageError(message)


def _expand(patterns: list[str]) -> list[Path]:
    paths: list[Path] = []
    for pattern in patterns:
        hits = sorted(glob.glob(pattern))
        if not hits:
            raise InvalidConfig(f"no files match {pattern!r}")
        paths.extend(Path(h) for h in hits)
    return paths


def _cmd_simulate(args) -> int:
    model = serialize.load_model(args.model)
    validate_model(model, strict_stationarity=args.strict)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    rng = np.random.default_rng(args.seed)
    for i in range(args.count):
        _, seq = simulate(model, args.length, rng)
        serialize.save_sequence(seq, model.hyper.K, out / f"seq{i}.json")
    print(json.dumps({"written": args.count, "dir": str(out)}))
    return 0


def _cmd_train(args) -> int:
    hyper = Hyper(K=args.K, p=args.p)
    data = [serialize.load_sequence(p, args.K) for p in _expand(args.data)]
    cfg = EmConfig(
        kappa=args.kappa,
        max_iter=args.max_iter,
        restarts=args.restarts,
        restart_iters=args.restart_iters,
        seed=args.seed,
    )
    report = train(data, hyper, cfg)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    serialize.save_model(report.model, out / "model.json")
    (out / "report.json").write_text(
        json.dumps(serialize.report_to_dict(report), indent=2) + "\n"
    )
    print(
        json.dumps(
            {
                "model": str(out / "model.json"),
                "report": str(out / "report.json"),
                "iterations": report.iterations,
                "converged": report.converged,
            }
        )
    )
    return 0


def _cmd_infer(args) -> int:
    model = serialize.load_model(args.model)
    out_dir = Path(args.out) if args.out else None
    if out_dir:
        out_dir.mkdir(parents=True, exist_ok=True)
    for path in _expand(args.data):
        seq = serialize.load_sequence(path, model.hyper.K)
        decoded = viterbi(model, seq)
        doc = {
            "states": serialize.states_to_json(decoded.states),
            "log_joint": decoded.log_joint,
        }
        line = json.dumps(doc)
        print(line)
        if out_dir:
            (out_dir / (path.stem + ".decoded.json")).write_text(line + "\n")
    return 0


def _cmd_forecast(args) -> int:
    model = serialize.load_model(args.model)
    seq = serialize.load_sequence(args.data, model.hyper.K)
    future = None
    if args.future_labels:
        entries = json.loads(Path(args.future_labels).read_text())
        if not isinstance(entries, list) or len(entries) != args.horizon:
            raise InvalidConfig(
                f"future labels must be a list of length {args.horizon}"
            )
        future = [_label_from_json(e, model.hyper.K) for e in entries]
    result = forecast(model, seq, args.horizon, future)
    print(
        json.dumps(
            {
                "predictions": result.predictions.tolist(),
                "weights": result.state_weights.tolist(),
            }
        )
    )
    return 0


def _load_states_doc(path: Path) -> list[int]:
    doc = json.loads(path.read_text())
    if isinstance(doc, dict) and "states" in doc:
        return [int(s) for s in doc["states"]]
    if isinstance(doc, list):
        return [int(s) for s in doc]
    raise InvalidModel(f"{path}: expected a states document")


def _cmd_eval(args) -> int:
    from .experiments import mpe, rmse_at_h

    if args.metric == "mpe":
        truth_paths, pred_paths = _expand(args.truth), _expand(args.pred)
        truths = []
        for path in truth_paths:
            doc = json.loads(path.read_text())
            if isinstance(doc, dict) and "labels" in doc:
                labels = doc["labels"]
                if any(not isinstance(e, int) for e in labels):
                    raise InvalidModel(f"{path}: truth labels must all be observed")
                truths.append([int(e) for e in labels])
            else:
                truths.append(_load_states_doc(path))
        preds = [_load_states_doc(p) for p in pred_paths]
        value = mpe([np.asarray(t) for t in truths], [np.asarray(p) for p in preds])
        print(json.dumps({"mpe": value}))
    else:
        truth = json.loads(Path(args.truth[0]).read_text())
        pred = json.loads(Path(args.pred[0]).read_text())
        print(json.dumps({"rmse": rmse_at_h(truth, pred)}))
    return 0


def _cmd_experiment(args) -> int:
    raw = json.loads(Path(args.config).read_text())
    cfg = load_experiment_config(args.config)
    out_dir = Path(args.out_dir or raw.get("out_dir", "results"))
    stem = raw.get("name") or raw["kind"]
    if isinstance(cfg, InferenceExperimentConfig):
        rows = run_inference_experiment(cfg)
        csv_path = write_csv(rows, out_dir / f"{stem}.csv", INFERENCE_FIELDS)
        figures = []
        if not args.no_figures:
            from .report import render_inference_figures

            figures = render_inference_figures(rows, out_dir, stem)
    else:
        rows = run_forecast_experiment(cfg)
        csv_path = write_csv(rows, out_dir / f"{stem}.csv", FORECAST_FIELDS)
        figures = []
        if not args.no_figures:
            from .report import render_forecast_figures

            figures = render_forecast_figures(rows, out_dir, stem)
    print(
        json.dumps(
            {
                "csv": str(csv_path),
                "figures": [str(f) for f in figures],
                "rows": len(rows),
            }
        )
    )
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="phmclar", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", help="draw labelled sequences from a model")
    p.add_argument("--model", required=True, help="model JSON file")
    p.add_argument("--length", type=int, required=True, help="observations per sequence")
    p.add_argument("--count", type=int, default=1, help="number of sequences")
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--strict", action="store_true", help="require |lag coefficients| < 1")
    p.set_defaults(func=_cmd_simulate)

    p = sub.add_parser("train", help="fit a model to sequence files")
    p.add_argument("--data", nargs="+", required=True, help="sequence JSON globs")
    p.add_argument("--K", type=int, required=True, help="number of states")
    p.add_argument("--p", type=int, required=True, help="autoregressive order")
    p.add_argument("--kappa", type=float, default=1e-6, help="convergence precision")
    p.add_argument("--max-iter", type=int, default=500)
    p.add_argument("--restarts", type=int, default=5)
    p.add_argument("--restart-iters", type=int, default=10)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True, help="output directory")
    p.set_defaults(func=_cmd_train)

    p = sub.add_parser("infer", help="decode the most probable state paths")
    p.add_argument("--model", required=True)
    p.add_argument("--data", nargs="+", required=True)
    p.add_argument("--out", help="also write one decoded JSON per input here")
    p.set_defaults(func=_cmd_infer)

    p = sub.add_parser("forecast", help="predict future values of a sequence")
    p.add_argument("--model", required=True)
    p.add_argument("--data", required=True, help="sequence JSON file")
    p.add_argument("--horizon", type=int, required=True)
    p.add_argument(
        "--future-labels",
        help="JSON list of per-horizon labels (int, list, or null)",
    )
    p.set_defaults(func=_cmd_forecast)

    p = sub.add_parser("eval", help="score decoded states or forecasts")
    p.add_argument("--metric", choices=["mpe", "rmse"], required=True)
    p.add_argument("--truth", nargs="+", required=True)
    p.add_argument("--pred", nargs="+", required=True)
    p.set_defaults(func=_cmd_eval)

    p = sub.add_parser("experiment", help="run a config-driven experiment")
    p.add_argument("--config", required=True, help="experiment config JSON")
    p.add_argument("--out-dir", help="override the config's output directory")
    p.add_argument("--no-figures", action="store_true", help="skip figure rendering")
    p.set_defaults(func=_cmd_experiment)
    return parser


def _fail(kind: str, message: str, code: int) -> int:
    sys.stderr.write(json.dumps({"error": kind, "message": message}) + "\n")
    return code


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except _UsageError as exc:
        return _fail("usage", str(exc), 1)
    except SystemExit as exc:  # --help
        return int(exc.code or 0)
    try:
        return args.func(args)
    except NumericFailure as exc:
        return _fail(type(exc).__name__, str(exc), 2)
    except PhmclarError as exc:
        return _fail(type(exc).__name__, str(exc), 1)
    except (OSError, json.JSONDecodeError, ValueError) as exc:
        return _fail(type(exc).__name__, str(exc), 1)


if __name__ == "__main__":
    sys.exit(main())
