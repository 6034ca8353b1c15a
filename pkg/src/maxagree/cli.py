"""Command-line surface: fit, predict, interval, pi, evaluate, subsets, simulate.

Every subcommand reads CSV input, writes a versioned JSON document to
stdout (or ``--out``), and exits 0 on success.  Failures print a
machine-readable error object and exit nonzero (2 for configuration
problems, 1 for runtime errors).  Stochastic subcommands require an
explicit ``--seed``; there is no wall-clock default, so identical
invocations produce identical bytes.
"""

from __future__ import annotations

import argparse
import sys
from typing import List, Optional

import numpy as np

from . import dataio
from .errors import ConfigError, MaxagreeError
from .intervals import CI_METHODS, IntervalMethod, ci, pi
from .metrics import best_subsets, evaluate, split_evaluate
from .moments import Dataset
from .predictor import FittedModel, PredictorKind, fit
from .resample import ResamplePlan
from .simulate import PredictionPoints, SimulationConfig, run_experiment

_STOCHASTIC_METHODS = {
    IntervalMethod.BOOTSTRAP_SE,
    IntervalMethod.BOOTSTRAP_T,
    IntervalMethod.PERCENTILE,
    IntervalMethod.BCA,
}


def _split_list(text: str) -> List[str]:
    return [part.strip() for part in text.split(",") if part.strip()]


def _load_dataset(args) -> Dataset:
    if not args.input:
        raise ConfigError("--input", "required")
    if not args.response:
        raise ConfigError("--response", "required")
    if not args.predictors:
        raise ConfigError("--predictors", "required")
    return dataio.ingest_csv(args.input, args.response, _split_list(args.predictors))


def _parse_x0(args, p: int) -> np.ndarray:
    if args.x0 is not None:
        values = [float(v) for v in _split_list(args.x0)]
        if len(values) != p:
            raise ConfigError("--x0", f"expected {p} values, got {len(values)}")
        return np.array([values])
    if args.x0_file is not None:
        pts = np.asarray(dataio.read_points_csv(args.x0_file), dtype=float)
        if pts.shape[1] != p:
            raise ConfigError("--x0-file", f"expected {p} columns, got {pts.shape[1]}")
        return pts
    raise ConfigError("--x0", "one of --x0 or --x0-file is required")


def _model_payload(model: FittedModel) -> dict:
    return {
        "kind": model.kind.value,
        "intercept": model.predictor.intercept,
        "coefficients": model.predictor.coefficients.tolist(),
        "gamma": model.gamma,
        "n": model.summary.n,
        "p": model.summary.p,
    }


def _interval_payload(est) -> dict:
    payload = {
        "method": est.method.value,
        "level": est.level,
        "lower": est.lower,
        "upper": est.upper,
        "center": est.center,
        "se": est.se,
    }
    if est.diagnostics is not None:
        payload["diagnostics"] = {
            "z0": est.diagnostics.z0,
            "a_hat": est.diagnostics.a_hat,
            "n_failed": est.diagnostics.n_failed,
            "z0_clamped": est.diagnostics.z0_clamped,
        }
    return payload


def _require_seed(args, reason: str) -> int:
    if args.seed is None:
        raise ConfigError("--seed", f"required for {reason} (no wall-clock default)")
    return int(args.seed)


def _check_level(args) -> None:
    if not 0.0 < args.level < 1.0:
        raise ConfigError("--level", f"must be in (0, 1), got {args.level}")


def _cmd_fit(args) -> dict:
    data = _load_dataset(args)
    kinds = (
        [PredictorKind.MALP, PredictorKind.LSLP]
        if args.kind == "both"
        else [PredictorKind.parse(args.kind)]
    )
    result = {}
    for kind in kinds:
        model = fit(data, kind)
        payload = _model_payload(model)
        if data.column_names:
            payload["predictor_names"] = data.column_names[:-1]
        result[kind.value] = payload
    return result


def _cmd_predict(args) -> dict:
    data = _load_dataset(args)
    model = fit(data, PredictorKind.parse(args.kind))
    points = _parse_x0(args, data.p)
    preds = model.predict(points)
    return {
        "kind": model.kind.value,
        "points": points.tolist(),
        "predictions": np.atleast_1d(preds).tolist(),
    }


def _cmd_interval(args) -> dict:
    _check_level(args)
    data = _load_dataset(args)
    points = _parse_x0(args, data.p)
    if points.shape[0] != 1:
        raise ConfigError("--x0", "interval expects a single point")
    x0 = points[0]
    methods = (
        list(CI_METHODS) if args.method == "all" else [IntervalMethod.parse(args.method)]
    )
    plan = None
    if any(m in _STOCHASTIC_METHODS for m in methods):
        seed = _require_seed(args, "bootstrap-based intervals")
        plan = ResamplePlan(seed=seed, b_outer=args.b_outer, b_inner=args.b_inner)
    estimates = [ci(data, x0, args.level, m, plan) for m in methods]
    return {
        "x0": x0.tolist(),
        "level": args.level,
        "intervals": [_interval_payload(e) for e in estimates],
    }


def _cmd_pi(args) -> dict:
    _check_level(args)
    data = _load_dataset(args)
    points = _parse_x0(args, data.p)
    if points.shape[0] != 1:
        raise ConfigError("--x0", "pi expects a single point")
    x0 = points[0]
    bases = (
        [PredictorKind.MALP, PredictorKind.LSLP]
        if args.basis == "both"
        else [PredictorKind.parse(args.basis)]
    )
    return {
        "x0": x0.tolist(),
        "level": args.level,
        "intervals": [_interval_payload(pi(data, x0, args.level, b)) for b in bases],
    }


def _cmd_evaluate(args) -> dict:
    if args.splits is not None:
        data = _load_dataset(args)
        seed = _require_seed(args, "split evaluation")
        result = split_evaluate(data, args.splits, seed, args.train_fraction)
        return result.to_dict()
    if not args.input:
        raise ConfigError("--input", "required")
    if not args.observed or not args.predicted:
        raise ConfigError("--observed/--predicted", "required unless --splits is given")
    table = dataio.ingest_csv(args.input, args.observed, [args.predicted])
    triple = evaluate(table.y, table.x[:, 0])
    return triple.to_dict()


def _cmd_subsets(args) -> dict:
    data = _load_dataset(args)
    sizes = [int(s) for s in _split_list(args.sizes)]
    found = best_subsets(data, sizes)
    names = data.column_names[:-1] if data.column_names else None
    result = []
    for size in sizes:
        idx, r2 = found[size]
        entry = {"size": size, "indices": list(idx), "r_squared": r2}
        if names:
            entry["columns"] = [names[i] for i in idx]
        result.append(entry)
    return {"subsets": result}


def _cmd_simulate(args) -> dict:
    seed = _require_seed(args, "simulation")
    kwargs = dict(
        experiment=args.experiment,
        seed=seed,
        mreps=args.reps,
        level=args.level,
        b_outer=args.b_outer,
        b_inner=args.b_inner,
        n_jobs=args.jobs,
    )
    if args.n_grid:
        kwargs["n_grid"] = tuple(int(v) for v in _split_list(args.n_grid))
    if args.correlations:
        kwargs["correlation_grid"] = tuple(float(v) for v in _split_list(args.correlations))
    if args.sets:
        kwargs["sets"] = tuple(int(v) for v in _split_list(args.sets))
    if args.method and args.method != "all":
        kwargs["methods"] = (args.method,)
    if args.x0:
        point = tuple(float(v) for v in _split_list(args.x0))
        kwargs["prediction_points"] = PredictionPoints(mode="explicit", points=(point,))
    try:
        config = SimulationConfig(**kwargs)
    except ValueError as exc:
        raise ConfigError("simulate", str(exc)) from exc
    report = run_experiment(config)
    return report.to_dict()


_COMMANDS = {
    "fit": _cmd_fit,
    "predict": _cmd_predict,
    "interval": _cmd_interval,
    "pi": _cmd_pi,
    "evaluate": _cmd_evaluate,
    "subsets": _cmd_subsets,
    "simulate": _cmd_simulate,
}


def _add_data_options(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--input", help="CSV file with a header row")
    parser.add_argument("--response", help="response column (name or index)")
    parser.add_argument("--predictors", help="comma-separated predictor columns")


def _add_x0_options(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--x0", help="comma-separated coordinates of the prediction point")
    parser.add_argument("--x0-file", help="CSV of prediction points, one per row")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="maxagree",
        description="Maximum agreement linear prediction toolkit",
    )
    parser.add_argument("--out", help="write the JSON document here instead of stdout")
    sub = parser.add_subparsers(dest="command", required=True)

    p_fit = sub.add_parser("fit", help="fit the predictors to a dataset")
    _add_data_options(p_fit)
    p_fit.add_argument("--kind", default="both", choices=["malp", "lslp", "both"])

    p_pred = sub.add_parser("predict", help="evaluate a fitted predictor at points")
    _add_data_options(p_pred)
    _add_x0_options(p_pred)
    p_pred.add_argument("--kind", default="malp", choices=["malp", "lslp"])

    p_int = sub.add_parser("interval", help="confidence interval for the agreement prediction")
    _add_data_options(p_int)
    _add_x0_options(p_int)
    p_int.add_argument("--method", default="all",
                       choices=["all"] + [m.value for m in CI_METHODS])
    p_int.add_argument("--level", type=float, default=0.95)
    p_int.add_argument("--b-outer", type=int, default=2000)
    p_int.add_argument("--b-inner", type=int, default=30)
    p_int.add_argument("--seed", type=int)

    p_pi = sub.add_parser("pi", help="prediction interval for a new observation")
    _add_data_options(p_pi)
    _add_x0_options(p_pi)
    p_pi.add_argument("--basis", default="both", choices=["malp", "lslp", "both"])
    p_pi.add_argument("--level", type=float, default=0.95)

    p_eval = sub.add_parser("evaluate", help="score predictions or run split evaluation")
    _add_data_options(p_eval)
    p_eval.add_argument("--observed", help="observed column (direct mode)")
    p_eval.add_argument("--predicted", help="predicted column (direct mode)")
    p_eval.add_argument("--splits", type=int, help="number of train/test splits")
    p_eval.add_argument("--train-fraction", type=float, default=0.5)
    p_eval.add_argument("--seed", type=int)

    p_sub = sub.add_parser("subsets", help="exhaustive best-subset search")
    _add_data_options(p_sub)
    p_sub.add_argument("--sizes", required=True, help="comma-separated subset sizes")

    p_sim = sub.add_parser("simulate", help="run a Monte Carlo study")
    p_sim.add_argument(
        "--experiment",
        required=True,
        choices=["sampling", "predictive", "coverage", "fixed-locations"],
    )
    p_sim.add_argument("--reps", type=int, default=2000)
    p_sim.add_argument("--seed", type=int)
    p_sim.add_argument("--n-grid", help="comma-separated sample sizes")
    p_sim.add_argument("--correlations", help="comma-separated correlation targets")
    p_sim.add_argument("--sets", help="comma-separated parameter set ids")
    p_sim.add_argument("--method", default="all",
                       choices=["all"] + [m.value for m in CI_METHODS])
    p_sim.add_argument("--level", type=float, default=0.95)
    p_sim.add_argument("--b-outer", type=int, default=2000)
    p_sim.add_argument("--b-inner", type=int, default=30)
    p_sim.add_argument("--x0", help="override the prediction point (comma-separated)")
    p_sim.add_argument("--jobs", type=int, default=None, help="parallel workers")

    return parser


def main(argv: Optional[List[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        result = _COMMANDS[args.command](args)
    except ConfigError as exc:
        _emit_error(args, "config", str(exc), field=exc.field)
        return 2
    except FileNotFoundError as exc:
        _emit_error(args, "io", str(exc))
        return 2
    except MaxagreeError as exc:
        _emit_error(args, type(exc).__name__, str(exc))
        return 1
    except ValueError as exc:
        _emit_error(args, "ValueError", str(exc))
        return 1
    doc = dataio.document(args.command, result)
    text = dataio.dump_document(doc, args.out)
    if not args.out:
        sys.stdout.write(text)
    return 0


def _emit_error(args, kind: str, message: str, field: Optional[str] = None) -> None:
    payload = {"error": {"type": kind, "message": message}}
    if field is not None:
        payload["error"]["field"] = field
    text = dataio.dump_document(payload, getattr(args, "out", None))
    if not getattr(args, "out", None):
        sys.stdout.write(text)


if __name__ == "__main__":
    sys.exit(main())
