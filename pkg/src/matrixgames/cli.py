"""Command-line pipelines: generation, analysis, fitting, training, reports.

Every run is determined by its flags plus input files; outputs embed a hash of
the parsed configuration and the seed so files can be traced back to the exact
invocation. Exit codes: 0 success, 2 usage, 3 data error, 4 numerical failure.
"""

from __future__ import annotations

import argparse
import csv
import hashlib
import json
import sys

import numpy as np

from . import __version__, complexity, dataio, fitting, neural
from .behavioral import ModelParams, parse_model_string
from .errors import (
    Divergence,
    EmptyDataset,
    InsufficientData,
    InvalidSpec,
    MatrixGamesError,
    NoConvergence,
    NoEquilibrium,
    NonFinite,
    ParseError,
    QuotaInfeasible,
    RangeError,
    TiesNotClassifiable,
    UnknownGame,
    ZeroVariance,
)
from .fitting import Dataset
from .games import classify_detail, games_from_json, games_to_json
from .solvers import dominance_category, mixed_nash_info, pure_nash

_USAGE_ERRORS = (InvalidSpec,)
_DATA_ERRORS = (
    ParseError,
    RangeError,
    UnknownGame,
    EmptyDataset,
    InsufficientData,
    QuotaInfeasible,
    TiesNotClassifiable,
    FileNotFoundError,
    IsADirectoryError,
    PermissionError,
    json.JSONDecodeError,
    KeyError,
    ValueError,
)
_NUMERICAL_ERRORS = (NoConvergence, NonFinite, Divergence, NoEquilibrium, ZeroVariance)


def config_hash(args: argparse.Namespace) -> str:
    payload = {k: v for k, v in sorted(vars(args).items()) if k != "func"}
    blob = json.dumps(payload, sort_keys=True, default=str).encode()
    return hashlib.sha256(blob).hexdigest()[:12]


def _meta(args) -> dict:
    return {
        "command": args.command,
        "config_hash": config_hash(args),
        "seed": getattr(args, "seed", None),
    }


def _header_lines(args):
    m = _meta(args)
    return [f"command={m['command']} config_hash={m['config_hash']} seed={m['seed']}"]


def _load_games(path):
    with open(path, "r", encoding="utf-8") as fh:
        games, _ = games_from_json(fh.read())
    return games


def _load_dataset(args):
    games = _load_games(args.games)
    records = dataio.read_records(args.records, games)
    return Dataset.from_records(records), games, records


def _params_from_args(args) -> ModelParams:
    weights = None
    if getattr(args, "weights", None):
        weights = tuple(float(v) for v in args.weights.split(","))
    return ModelParams(
        eta_self=args.eta_self,
        eta_other=args.eta_other,
        alpha=args.alpha,
        level_weights=weights,
    )


def _int_tuple(text):
    return tuple(int(v) for v in text.split(","))


def _write_csv(path, header_lines, columns, rows):
    with open(path, "w", encoding="utf-8", newline="") as fh:
        for line in header_lines:
            fh.write(f"# {line}\n")
        writer = csv.writer(fh)
        writer.writerow(columns)
        writer.writerows(rows)


def _write_json(path, doc):
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(doc, fh, indent=2)
        fh.write("\n")


# ---------------------------------------------------------------------------
# subcommand handlers


def _cmd_generate(args):
    games = dataio.generate_games(
        seed=args.seed,
        quotas=_int_tuple(args.quotas),
        payoff_max=args.payoff_max,
        base_total=args.base_total,
    )
    text = games_to_json(games, meta={**_meta(args), "payoff_max": args.payoff_max})
    with open(args.out, "w", encoding="utf-8") as fh:
        fh.write(text)
    print(f"wrote {len(games)} game instances to {args.out}")
    return 0


def _cmd_classify(args):
    games = _load_games(args.games)
    rows = []
    for g in games:
        rg, rc, cg, cc = classify_detail(g)
        rows.append([g.id, rg.name, cg.name, int(rc), int(cc), dominance_category(g)])
    _write_csv(
        args.out,
        _header_lines(args),
        ["id", "row_graph", "col_graph", "row_canonical", "col_canonical", "dominance"],
        rows,
    )
    print(f"classified {len(rows)} games into {args.out}")
    return 0


def _cmd_solve(args):
    games = _load_games(args.games)
    rows = []
    for g in games:
        psne = pure_nash(g)
        mixed, degenerate = mixed_nash_info(g)
        rows.append(
            [
                g.id,
                ";".join(f"{e.row_action}/{e.col_action}" for e in psne),
                "" if mixed is None else repr(mixed.p_A),
                "" if mixed is None else repr(mixed.q_C),
                int(degenerate),
            ]
        )
    _write_csv(
        args.out,
        _header_lines(args),
        ["id", "pure_equilibria", "mixed_p_A", "mixed_q_C", "degenerate"],
        rows,
    )
    print(f"solved {len(rows)} games into {args.out}")
    return 0


def _cmd_features(args):
    games = _load_games(args.games)
    rows = [
        [g.id] + [repr(float(v)) for v in complexity.compute_features(g).as_array()]
        for g in games
    ]
    _write_csv(
        args.out,
        _header_lines(args),
        ["id", *complexity.FEATURE_NAMES],
        rows,
    )
    print(f"computed features for {len(rows)} games into {args.out}")
    return 0


def _cmd_simulate(args):
    games = _load_games(args.games)
    spec, slots = parse_model_string(args.model)
    if slots:
        raise InvalidSpec("simulate needs a scalar model; train one for neural slots")
    params = _params_from_args(args)
    rt_scores = None
    if args.index:
        with open(args.index, "r", encoding="utf-8") as fh:
            index = complexity.index_from_json(fh.read())
        rt_scores = {g.id: complexity.complexity_index(g, index) for g in games}
    trials = dataio.simulate_choices(
        games,
        spec,
        params,
        participants_per_game=args.participants,
        seed=args.seed,
        games_per_participant=args.games_per_participant,
        rt_scores=rt_scores,
        rt_loading=args.rt_loading,
        rt_game_noise=args.rt_game_noise,
        rt_trial_noise=args.rt_trial_noise,
        with_confidence=args.confidence,
        conf_loading=args.conf_loading,
    )
    dataio.write_trials(args.out, trials, header_lines=_header_lines(args))
    print(f"simulated {len(trials)} trials into {args.out}")
    return 0


def _cmd_aggregate(args):
    games = _load_games(args.games)
    trials = dataio.parse_trials(args.trials)
    records = dataio.aggregate_trials(trials, games)
    dataio.write_records(args.out, records, header_lines=_header_lines(args))
    print(f"aggregated {len(trials)} trials into {len(records)} records at {args.out}")
    return 0


def _cmd_fit(args):
    data, _, _ = _load_dataset(args)
    spec, slots = parse_model_string(args.model)
    if slots:
        raise InvalidSpec("fit handles scalar models; use the train command for neural slots")
    result = fitting.nelder_mead_fit(spec, data, seed=args.seed, starts=args.starts)
    doc = {
        "meta": _meta(args),
        "model": args.model,
        "params": {
            "eta_self": result.params.eta_self,
            "eta_other": result.params.eta_other,
            "alpha": result.params.alpha,
            "level_weights": None
            if result.params.level_weights is None
            else list(result.params.level_weights),
        },
        "train_mse": result.train_mse,
        "test_mse": result.test_mse,
        "test_r2": result.test_r2,
        "theta": list(result.theta),
    }
    _write_json(args.out, doc)
    print(f"fit {args.model}: train mse {result.train_mse:.6g} -> {args.out}")
    return 0


def _cmd_cv(args):
    data, _, _ = _load_dataset(args)
    rows = []
    train_cfg = neural.TrainConfig(
        lr=args.lr,
        max_epochs=args.max_epochs,
        eval_interval=args.eval_interval,
        seed=args.seed,
    )
    for model_str in [m.strip() for m in args.models.split(",") if m.strip()]:
        if model_str.lower() in ("mlp", "direct"):
            spec, _ = parse_model_string("Nash")  # placeholder spec; fit_fn decides
            fit_fn = neural.direct_fit_fn(
                neural.MLPConfig(head="prob", hidden=_int_tuple(args.hidden)), train_cfg
            )
            split = (0.8, 0.1, 0.1)
        else:
            spec, slots = parse_model_string(model_str)
            if slots:
                aspec = neural.AugmentedModelSpec.from_string(
                    model_str, hidden=_int_tuple(args.hidden)
                )
                fit_fn = neural.augmented_fit_fn(aspec, train_cfg)
                split = (0.8, 0.1, 0.1)
            else:
                fit_fn = None
                split = (0.9, 0.1)
        res = fitting.cross_validate(
            spec, data, rounds=args.rounds, split=split, seed=args.seed, fit_fn=fit_fn
        )
        rows.append(
            [
                model_str,
                repr(res.mean_mse),
                repr(res.se_mse),
                repr(res.mean_r2),
                repr(res.se_r2),
            ]
        )
        print(
            f"{model_str}: mse {res.mean_mse:.4f} ({res.se_mse:.4f}) "
            f"r2 {res.mean_r2:.4f} ({res.se_r2:.4f})"
        )
    _write_csv(
        args.out,
        _header_lines(args),
        ["model", "mean_mse", "se_mse", "mean_r2", "se_r2"],
        rows,
    )
    return 0


def _cmd_train(args):
    data, _, _ = _load_dataset(args)
    cfg = neural.TrainConfig(
        lr=args.lr,
        batch=args.batch,
        eval_interval=args.eval_interval,
        patience=args.patience,
        max_epochs=args.max_epochs,
        seed=args.seed,
    )
    if args.model.lower() in ("mlp", "direct"):
        result = neural.train_direct_mlp(
            data, cfg, neural.MLPConfig(head="prob", hidden=_int_tuple(args.hidden))
        )
        neural.save_direct(args.out, result.params)
    else:
        aspec = neural.AugmentedModelSpec.from_string(args.model, hidden=_int_tuple(args.hidden))
        result = neural.train_augmented(aspec, data, cfg)
        neural.save_augmented(args.out, result.model)
    metrics = {
        "meta": _meta(args),
        "model": args.model,
        "test_mse": result.test_mse,
        "test_r2": result.test_r2,
        "best_epoch": result.history.best_epoch,
        "stopped_epoch": result.history.stopped_epoch,
    }
    if args.metrics_out:
        _write_json(args.metrics_out, metrics)
    print(
        f"trained {args.model}: test mse {result.test_mse:.6g}, r2 {result.test_r2:.4f}, "
        f"checkpoint at {args.out}"
    )
    return 0


def _cmd_index(args):
    games = _load_games(args.games)
    model = neural.load_checkpoint(args.checkpoint)
    if not isinstance(model, neural.AugmentedModel) or "eta_self" not in model.spec.neural_slots:
        raise InvalidSpec("index needs a checkpoint with a game-specific eta_self network")
    R = np.array([g.row_payoffs for g in games], dtype=float)
    C = np.array([g.col_payoffs for g in games], dtype=float)
    X = np.hstack([R, C]) / neural.INPUT_SCALE
    (eta, _), _, _, _ = model.slot_values(model.theta, X)
    index, lres = complexity.fit_complexity_index(games, eta, lam=args.lam)
    text = complexity.index_to_json(
        index, meta={**_meta(args), "lasso_r2": lres.r2, "sweeps": lres.sweeps}
    )
    with open(args.out, "w", encoding="utf-8") as fh:
        fh.write(text)
    print(f"index over {len(games)} games -> {args.out}; active weights: {index.weight_map()}")
    return 0


def _cmd_correlate(args):
    data, games, records = _load_dataset(args)
    with open(args.index, "r", encoding="utf-8") as fh:
        index = complexity.index_from_json(fh.read())
    target_name = args.target
    pairs = []
    for rec in records:
        value = rec.rt_norm if target_name == "rt" else rec.conf_norm
        if value is None:
            continue
        pairs.append((complexity.complexity_index(rec.game, index), value))
    if len(pairs) < 3:
        raise EmptyDataset(f"fewer than 3 records carry a {target_name} value")
    scores, targets = zip(*pairs)
    r, p = complexity.pearson_r(scores, targets)
    doc = {"meta": _meta(args), "target": target_name, "n": len(pairs), "r": r, "p": p}
    _write_json(args.out, doc)
    print(f"index vs {target_name}: r={r:.4f}, p={p:.3g}, n={len(pairs)}")
    return 0


def _cmd_psychometric(args):
    data, games, records = _load_dataset(args)
    with open(args.index, "r", encoding="utf-8") as fh:
        index = complexity.index_from_json(fh.read())
    split_values = [complexity.complexity_index(r.game, index) for r in records]
    table = complexity.psychometric_bins(records, split_values, n_bins=args.bins)
    rows = []
    for group in ("low", "high"):
        for i, b in enumerate(table[group]):
            rows.append(
                [
                    group,
                    i,
                    repr(b.deu_mean),
                    repr(b.p_mean),
                    "" if b.se is None else repr(b.se),
                    b.n,
                ]
            )
    header = _header_lines(args)
    header.append(f"split_threshold={table['threshold']!r}")
    _write_csv(
        args.out,
        header,
        ["group", "bin", "deu_mean", "p_first_mean", "se", "n"],
        rows,
    )
    print(f"psychometric table ({len(rows)} bins) -> {args.out}")
    return 0


# ---------------------------------------------------------------------------
# parser


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="matrixgames",
        description="Procedural 2x2 games: generation, behavioral models, analyses.",
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("generate", help="draw a game corpus under topology quotas")
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--quotas", default="3,8,22", help="per-cell counts: double,single,non")
    p.add_argument("--payoff-max", type=int, default=50)
    p.add_argument("--base-total", type=int, default=1208)
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_generate)

    p = sub.add_parser("classify", help="order-graph class of each player per game")
    p.add_argument("--games", required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_classify)

    p = sub.add_parser("solve", help="pure and mixed equilibria per game")
    p.add_argument("--games", required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_solve)

    p = sub.add_parser("features", help="structural feature matrix")
    p.add_argument("--games", required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_features)

    p = sub.add_parser("simulate", help="synthetic participants from a scalar model")
    p.add_argument("--games", required=True)
    p.add_argument("--model", required=True)
    p.add_argument("--eta-self", type=float, default=None)
    p.add_argument("--eta-other", type=float, default=None)
    p.add_argument("--alpha", type=float, default=0.0)
    p.add_argument("--weights", default=None, help="level mixture weights w0,w1,w2,w3")
    p.add_argument("--participants", type=int, default=50, help="trials per game")
    p.add_argument("--games-per-participant", type=int, default=20)
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--index", default=None, help="index JSON that loads response times")
    p.add_argument("--rt-loading", type=float, default=0.0)
    p.add_argument("--rt-game-noise", type=float, default=1.0)
    p.add_argument("--rt-trial-noise", type=float, default=0.3)
    p.add_argument("--confidence", action="store_true")
    p.add_argument("--conf-loading", type=float, default=0.0)
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_simulate)

    p = sub.add_parser("aggregate", help="trials to per-game canonical records")
    p.add_argument("--trials", required=True)
    p.add_argument("--games", required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_aggregate)

    p = sub.add_parser("fit", help="scalar model fit by simplex search")
    p.add_argument("--records", required=True)
    p.add_argument("--games", required=True)
    p.add_argument("--model", required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--starts", type=int, default=8)
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_fit)

    p = sub.add_parser("cv", help="cross-validated comparison over model strings")
    p.add_argument("--records", required=True)
    p.add_argument("--games", required=True)
    p.add_argument("--models", required=True, help="comma-separated model strings")
    p.add_argument("--rounds", type=int, default=10)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--hidden", default="32,32", help="hidden sizes for neural entries")
    p.add_argument("--lr", type=float, default=1e-3)
    p.add_argument("--max-epochs", type=int, default=1000)
    p.add_argument("--eval-interval", type=int, default=100)
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_cv)

    p = sub.add_parser("train", help="gradient-train a direct or augmented model")
    p.add_argument("--records", required=True)
    p.add_argument("--games", required=True)
    p.add_argument("--model", required=True, help='"direct" or a neural model string')
    p.add_argument("--hidden", default="300,300,300")
    p.add_argument("--lr", type=float, default=1e-3)
    p.add_argument("--batch", type=int, default=64)
    p.add_argument("--max-epochs", type=int, default=5000)
    p.add_argument("--eval-interval", type=int, default=100)
    p.add_argument("--patience", type=int, default=2)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.add_argument("--metrics-out", default=None)
    p.set_defaults(func=_cmd_train)

    p = sub.add_parser("index", help="sparse complexity index from a trained checkpoint")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--games", required=True)
    p.add_argument("--lam", type=float, default=0.2)
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_index)

    p = sub.add_parser("correlate", help="index vs response time or confidence")
    p.add_argument("--records", required=True)
    p.add_argument("--games", required=True)
    p.add_argument("--index", required=True)
    p.add_argument("--target", choices=("rt", "confidence"), default="rt")
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_correlate)

    p = sub.add_parser("psychometric", help="choice frequency vs utility difference, split by index")
    p.add_argument("--records", required=True)
    p.add_argument("--games", required=True)
    p.add_argument("--index", required=True)
    p.add_argument("--bins", type=int, default=10)
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_psychometric)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except _USAGE_ERRORS as e:
        _emit_error(args, e)
        return 2
    except _NUMERICAL_ERRORS as e:
        _emit_error(args, e)
        return 4
    except _DATA_ERRORS as e:
        _emit_error(args, e)
        return 3
    except MatrixGamesError as e:
        _emit_error(args, e)
        return 3


def _emit_error(args, exc):
    record = {
        "error": type(exc).__name__,
        "message": str(exc),
        "command": getattr(args, "command", None),
    }
    print(json.dumps(record), file=sys.stderr)


if __name__ == "__main__":
    sys.exit(main())
