"""Command-line front end: run experiments, generate data, inspect models.

Subcommands:
  run       drive a policy over a dataset for N independent runs, writing
            per-run trace CSVs, an aggregate CSV, and the resolved config
  gen       write a generated dataset (noisy XOR) to CSV
  inspect   print per-arm DNF rules from a saved policy model
  binarize  fit a binarization schema to a CSV and emit bits + schema

All randomness flows from --seed; identical configs produce byte-identical
trace files.  Exit status is 0 on success and 2 on configuration, I/O, or
numeric errors.
"""

from __future__ import annotations

import argparse
import csv
import json
import sys
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

import numpy as np

from . import binarize as binarize_mod
from . import data as data_mod
from . import experiment as exp_mod
from . import interpret as interpret_mod
from .policies import PolicyConfig, make_policy
from .tm import ConfigError, TmConfig, TsetlinMachine


class CliError(Exception):
    """User-facing failure; maps to exit status 2."""


POLICY_CHOICES = {
    "tm-eps-greedy": "tm_eps_greedy",
    "tm-thompson-exact": "tm_thompson_exact",
    "tm-thompson-online": "tm_thompson_online",
    "linucb": "linucb",
    "logistic-eps-greedy": "logistic_eps_greedy",
}

RUN_DEFAULTS = {
    "dataset": None,
    "label_column": None,
    "policy": "tm-thompson-online",
    "horizon": 1000,
    "runs": 10,
    "seed": 0,
    "out": "runs",
    "binarization": "auto",
    "max_bits": 10,
    "cutoff": 75.0,
    "clauses": 1000,
    "threshold": 700,
    "specificity": 5.0,
    "state_bits": 8,
    "boost_true_positives": False,
    "epsilon": 0.1,
    "alpha": 1.0,
    "learning_rate": 0.1,
    "refit_interval": 1,
    "fit_epochs": 1,
    "xor_bits": 12,
    "xor_flip": 0.4,
    "xor_samples": 0,
    "svd_rank": 10,
    "top_k_items": 0,
    "jobs": 1,
    "save_model": False,
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="tsetlin-bandit",
        description="Tsetlin Machine contextual bandits: experiments, data, and rule inspection.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="run independent bandit experiments and write traces")
    run.add_argument("--config", help="JSON file with a full run configuration")
    run.add_argument("--dataset", help="CSV path, 'gen:xor', or 'ratings:PATH'")
    run.add_argument("--label-column", dest="label_column", help="label column name (default: last)")
    run.add_argument("--policy", choices=sorted(POLICY_CHOICES))
    run.add_argument("--horizon", type=int, help="rounds per run")
    run.add_argument("--runs", type=int, help="number of independent runs")
    run.add_argument("--seed", type=int, help="master seed")
    run.add_argument("--out", help="output directory")
    run.add_argument(
        "--binarization",
        choices=["auto", "thermometer", "cutoff", "none"],
        help="auto: pass through already-binary data, else fit thermometer thresholds",
    )
    run.add_argument("--max-bits", dest="max_bits", type=int, help="max thresholds per feature")
    run.add_argument("--cutoff", type=float, help="cutoff for --binarization cutoff")
    run.add_argument("--clauses", type=int)
    run.add_argument("--threshold", type=int, help="voting margin T")
    run.add_argument("--specificity", type=float, help="pattern specificity s")
    run.add_argument("--state-bits", dest="state_bits", type=int)
    run.add_argument(
        "--boost-true-positives", dest="boost_true_positives", action="store_true", default=None
    )
    run.add_argument("--epsilon", type=float)
    run.add_argument("--alpha", type=float, help="LinUCB exploration width")
    run.add_argument("--learning-rate", dest="learning_rate", type=float)
    run.add_argument("--refit-interval", dest="refit_interval", type=int)
    run.add_argument("--fit-epochs", dest="fit_epochs", type=int)
    run.add_argument("--xor-bits", dest="xor_bits", type=int)
    run.add_argument("--xor-flip", dest="xor_flip", type=float)
    run.add_argument(
        "--xor-samples", dest="xor_samples", type=int, help="samples per run (0: horizon)"
    )
    run.add_argument("--svd-rank", dest="svd_rank", type=int)
    run.add_argument("--top-k-items", dest="top_k_items", type=int, help="keep k most-rated items")
    run.add_argument("--jobs", type=int, help="parallel run workers")
    run.add_argument("--save-model", dest="save_model", action="store_true", default=None)
    run.set_defaults(func=cmd_run)

    gen = sub.add_parser("gen", help="generate a dataset CSV")
    gen.add_argument("generator", choices=["xor"])
    gen.add_argument("--n", type=int, default=10000, help="number of rows")
    gen.add_argument("--bits", type=int, default=12)
    gen.add_argument("--flip", type=float, default=0.4)
    gen.add_argument("--seed", type=int, default=0)
    gen.add_argument("--out", required=True)
    gen.set_defaults(func=cmd_gen)

    inspect = sub.add_parser("inspect", help="print per-arm DNF rules from a saved model")
    inspect.add_argument("model", help="model JSON written by 'run --save-model'")
    inspect.add_argument("--arm", type=int, default=None, help="only this arm")
    inspect.add_argument("--polarity", choices=["pos", "neg"], default="pos")
    inspect.add_argument("--format", choices=["text", "json"], default="text")
    inspect.set_defaults(func=cmd_inspect)

    binarize = sub.add_parser("binarize", help="fit and apply a binarization schema to a CSV")
    binarize.add_argument("input", help="CSV with a header and a label column")
    binarize.add_argument("--label-column", dest="label_column")
    binarize.add_argument("--max-bits", dest="max_bits", type=int, default=10)
    binarize.add_argument("--cutoff", type=float, default=None, help="single shared cutoff instead")
    binarize.add_argument("--out-csv", dest="out_csv", required=True)
    binarize.add_argument("--out-schema", dest="out_schema", required=True)
    binarize.set_defaults(func=cmd_binarize)

    return parser


# --- run --------------------------------------------------------------------


def resolve_run_config(args: argparse.Namespace) -> dict:
    cfg = dict(RUN_DEFAULTS)
    if args.config:
        path = Path(args.config)
        if not path.exists():
            raise CliError(f"config file not found: {path}")
        with open(path, "r", encoding="utf-8") as fh:
            loaded = json.load(fh)
        unknown = set(loaded) - set(RUN_DEFAULTS)
        if unknown:
            raise CliError(f"unknown config keys: {sorted(unknown)}")
        cfg.update(loaded)
    for key in RUN_DEFAULTS:
        value = getattr(args, key, None)
        if value is not None:
            cfg[key] = value
    if cfg["dataset"] is None:
        raise CliError("--dataset is required (CSV path, 'gen:xor', or 'ratings:PATH')")
    if cfg["horizon"] < 1:
        raise CliError("--horizon must be >= 1")
    if cfg["runs"] < 1:
        raise CliError("--runs must be >= 1")
    if cfg["jobs"] < 1:
        raise CliError("--jobs must be >= 1")
    if cfg["policy"] not in POLICY_CHOICES:
        raise CliError(f"unknown policy {cfg['policy']!r}")
    return cfg


def _prepare(cfg: dict) -> dict:
    """Load/derive everything shared across runs: dataset, schema, widths."""
    spec = cfg["dataset"]
    if spec == "gen:xor":
        # Contexts are already bits; each run draws its own samples.
        return {
            "kind": "xor",
            "num_arms": 2,
            "bit_width": cfg["xor_bits"],
            "arm_labels": ["0", "1"],
        }
    if spec.startswith("ratings:"):
        path = Path(spec[len("ratings:"):])
        if not path.exists():
            raise CliError(f"dataset file not found: {path}")
        S = data_mod.load_interactions(path, top_k_items=cfg["top_k_items"] or None)
        rank = cfg["svd_rank"]
        W, X = data_mod.truncated_svd(S, rank)
        schema = _schema_for_matrix(W, cfg)
        return {
            "kind": "ratings",
            "S": S,
            "factors": (W, X),
            "schema": schema,
            "num_arms": S.shape[1],
            "bit_width": schema.width if schema else None,
            "arm_labels": [f"item{j}" for j in range(S.shape[1])],
        }
    path = Path(spec)
    if not path.exists():
        raise CliError(f"dataset file not found: {path}")
    dataset = data_mod.load_csv(path, label_column=cfg["label_column"])
    schema = _schema_for_dataset(dataset, cfg)
    if schema is None:
        bit_width = dataset.num_features if dataset.is_binary() else None
    else:
        bit_width = schema.width
    return {
        "kind": "csv",
        "dataset": dataset,
        "schema": schema,
        "num_arms": dataset.num_classes,
        "bit_width": bit_width,
        "arm_labels": list(dataset.class_names),
    }


def _schema_for_dataset(dataset, cfg):
    mode = cfg["binarization"]
    if mode == "none":
        return None
    if mode == "auto":
        if dataset.is_binary():
            return None
        return binarize_mod.fit_schema(dataset.columns, cfg["max_bits"])
    if mode == "thermometer":
        return binarize_mod.fit_schema(dataset.columns, cfg["max_bits"])
    if mode == "cutoff":
        if not dataset.is_numeric():
            raise CliError("cutoff binarization needs all-numeric features")
        return binarize_mod.cutoff_schema(dataset.num_features, cfg["cutoff"])
    raise CliError(f"unknown binarization mode {mode!r}")


def _schema_for_matrix(W, cfg):
    if cfg["binarization"] == "none":
        return None
    columns = [W[:, i] for i in range(W.shape[1])]
    return binarize_mod.fit_schema(columns, cfg["max_bits"])


def _policy_config(cfg: dict, bit_width: int | None, seed: int) -> PolicyConfig:
    kind = POLICY_CHOICES[cfg["policy"]]
    tm = None
    if kind.startswith("tm_"):
        if bit_width is None:
            raise CliError(
                "this policy needs binarized contexts; pick --binarization auto/thermometer/cutoff"
            )
        tm = TmConfig(
            num_clauses=cfg["clauses"],
            threshold=cfg["threshold"],
            specificity=cfg["specificity"],
            num_features=bit_width,
            num_state_bits=cfg["state_bits"],
            boost_true_positives=cfg["boost_true_positives"],
        )
    return PolicyConfig(
        kind=kind,
        tm=tm,
        epsilon=cfg["epsilon"],
        refit_interval=cfg["refit_interval"],
        fit_epochs=cfg["fit_epochs"],
        alpha=cfg["alpha"],
        learning_rate=cfg["learning_rate"],
        seed=seed,
    )


def _run_one(cfg: dict, prepared: dict, run_index: int, want_model: bool):
    ss = np.random.SeedSequence(entropy=cfg["seed"], spawn_key=(run_index,))
    data_child, policy_child = ss.spawn(2)
    data_seed = int(data_child.generate_state(1, np.uint64)[0])
    policy_seed = int(policy_child.generate_state(1, np.uint64)[0])

    if prepared["kind"] == "xor":
        n = cfg["xor_samples"] or cfg["horizon"]
        dataset = data_mod.gen_noisy_xor(
            n, num_bits=cfg["xor_bits"], flip_prob=cfg["xor_flip"], seed=data_seed
        )
        stream = data_mod.class_to_bandit(dataset, schema=None, seed=data_seed)
    elif prepared["kind"] == "ratings":
        stream = data_mod.recommender_to_bandit(
            prepared["S"],
            cfg["svd_rank"],
            schema=prepared["schema"],
            seed=data_seed,
            factors=prepared["factors"],
        )
    else:
        stream = data_mod.class_to_bandit(
            prepared["dataset"], schema=prepared["schema"], seed=data_seed
        )

    policy = make_policy(
        _policy_config(cfg, prepared["bit_width"], policy_seed),
        prepared["num_arms"],
        num_features=prepared["bit_width"],
    )
    trace = exp_mod.run_experiment(
        stream, policy, cfg["horizon"], seed=data_seed, config={"run": run_index}
    )
    model = None
    if want_model:
        model = policy.to_dict()
        model["arm_labels"] = prepared["arm_labels"]
    return trace, model


def _worker(cfg: dict, run_index: int, want_model: bool):
    prepared = _prepare(cfg)
    return _run_one(cfg, prepared, run_index, want_model)


def cmd_run(args) -> int:
    cfg = resolve_run_config(args)
    outdir = Path(cfg["out"])
    outdir.mkdir(parents=True, exist_ok=True)
    prepared = _prepare(cfg)

    results = []
    if cfg["jobs"] == 1:
        for i in range(cfg["runs"]):
            results.append(_run_one(cfg, prepared, i, want_model=cfg["save_model"] and i == 0))
            print(f"run {i + 1}/{cfg['runs']} done", file=sys.stderr)
    else:
        with ProcessPoolExecutor(max_workers=cfg["jobs"]) as pool:
            futures = [
                pool.submit(_worker, cfg, i, cfg["save_model"] and i == 0)
                for i in range(cfg["runs"])
            ]
            for i, future in enumerate(futures):
                results.append(future.result())
                print(f"run {i + 1}/{cfg['runs']} done", file=sys.stderr)

    traces = [trace for trace, _ in results]
    for i, trace in enumerate(traces):
        exp_mod.write_trace_csv(trace, outdir / f"run_{i:03d}.csv")
    exp_mod.write_aggregate_csv(exp_mod.aggregate_runs(traces), outdir / "aggregate.csv")
    with open(outdir / "config.json", "w", encoding="utf-8") as fh:
        json.dump(cfg, fh, indent=2, sort_keys=True)
        fh.write("\n")
    model = results[0][1]
    if model is not None:
        with open(outdir / "model.json", "w", encoding="utf-8") as fh:
            json.dump(model, fh)
    print(json.dumps(cfg, sort_keys=True))
    return 0


# --- gen ----------------------------------------------------------------------


def cmd_gen(args) -> int:
    if args.generator == "xor":
        dataset = data_mod.gen_noisy_xor(
            args.n, num_bits=args.bits, flip_prob=args.flip, seed=args.seed
        )
        out = Path(args.out)
        if out.parent and not out.parent.exists():
            raise CliError(f"output directory does not exist: {out.parent}")
        data_mod.save_csv(dataset, out)
        print(f"wrote {dataset.num_rows} rows to {out}", file=sys.stderr)
        return 0
    raise CliError(f"unknown generator {args.generator!r}")


# --- inspect --------------------------------------------------------------------


def cmd_inspect(args) -> int:
    path = Path(args.model)
    if not path.exists():
        raise CliError(f"model file not found: {path}")
    with open(path, "r", encoding="utf-8") as fh:
        payload = json.load(fh)
    if payload.get("format") != "tm-bandit-policy":
        raise CliError(f"{path} is not a policy model dump")
    arms = payload.get("arms", [])
    if not arms or "tm" not in arms[0]:
        raise CliError("model has no per-arm Tsetlin Machines; DNF inspection needs a TM policy")
    labels = payload.get("arm_labels") or [None] * len(arms)
    polarity = "positive" if args.polarity == "pos" else "negative"

    selected = range(len(arms)) if args.arm is None else [args.arm]
    report = []
    for u in selected:
        if not 0 <= u < len(arms):
            raise CliError(f"arm {u} out of range [0, {len(arms)})")
        tm = TsetlinMachine.from_dict(arms[u]["tm"])
        expr = interpret_mod.extract_arm_dnf(tm, polarity=polarity)
        report.append(
            {
                "arm": u,
                "label": labels[u],
                "polarity": polarity,
                "dnf": interpret_mod.render_dnf(expr),
                "terms": expr.literal_lists(),
            }
        )
    if args.format == "json":
        print(json.dumps({"arms": report}, ensure_ascii=False, indent=2))
    else:
        for entry in report:
            name = f"arm {entry['arm']}"
            if entry["label"]:
                name += f" ({entry['label']})"
            print(f"{name}: {entry['dnf']}")
    return 0


# --- binarize ---------------------------------------------------------------------


def cmd_binarize(args) -> int:
    path = Path(args.input)
    if not path.exists():
        raise CliError(f"dataset file not found: {path}")
    dataset = data_mod.load_csv(path, label_column=args.label_column)
    if args.cutoff is not None:
        if not dataset.is_numeric():
            raise CliError("cutoff binarization needs all-numeric features")
        schema = binarize_mod.cutoff_schema(dataset.num_features, args.cutoff)
    else:
        schema = binarize_mod.fit_schema(dataset.columns, args.max_bits)
    bits = np.stack([schema.transform(dataset.row(i)) for i in range(dataset.num_rows)])
    with open(args.out_csv, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow([f"x{i + 1}" for i in range(schema.width)] + [dataset.label_name])
        for i in range(dataset.num_rows):
            writer.writerow(
                [int(b) for b in bits[i]] + [dataset.class_names[dataset.labels[i]]]
            )
    schema.save(args.out_schema)
    print(
        f"wrote {dataset.num_rows} rows x {schema.width} bits to {args.out_csv}; "
        f"schema in {args.out_schema}",
        file=sys.stderr,
    )
    return 0


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except CliError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except (ConfigError, ValueError, OSError, data_mod.ConvergenceError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
