"""Command-line entry point: generate, train, explain, experiment, report."""
from __future__ import annotations

import argparse
import json
import logging
import sys
from dataclasses import replace
from pathlib import Path

import numpy as np

from .cox import CoxModel, fit_cox
from .dataio import BUNDLED, load_bundled, load_report, read_dataset, save_report, write_dataset
from .datagen import WeibullCoxGen, gen_contaminated, gen_dataset
from .experiments import KINDS, ExperimentConfig, run, run_sweep
from .explainer import ExplainConfig, explain
from .rsf import RsfModel, RsfParams, fit_rsf

log = logging.getLogger("ksexplain")


def _config(args) -> dict:
    doc = json.loads(Path(args.config).read_text()) if args.config else {}
    if args.seed is not None:
        doc["seed"] = args.seed
    return doc


def _load_data(source: str):
    if source in BUNDLED:
        return load_bundled(source).dataset
    return read_dataset(source)


def _load_model(path: Path):
    doc = json.loads(path.read_text())
    return RsfModel.from_json(doc) if "trees" in doc else CoxModel.from_json(doc)


def cmd_generate(args) -> int:
    doc = _config(args)
    seed = doc.get("seed", 0)
    out = Path(args.out)
    if doc.get("contaminated"):
        total = doc.get("n", 500)
        data = gen_contaminated(doc.get("n_clean"), total, seed=seed)
        write_dataset(data.clean, out / "clean.csv")
        write_dataset(data.contaminated, out / "contaminated.csv")
        log.info("wrote %s and %s", out / "clean.csv", out / "contaminated.csv")
        return 0
    gen = WeibullCoxGen(**{k: tuple(v) if isinstance(v, list) else v
                           for k, v in doc.get("generator", {}).items()}, seed=seed)
    data = gen_dataset(doc.get("n", 200), doc.get("sphere_center"), doc.get("sphere_radius", 8.0), gen,
                       np.random.default_rng(seed))
    write_dataset(data, out / "dataset.csv")
    log.info("wrote %s", out / "dataset.csv")
    return 0


def cmd_train(args) -> int:
    doc = _config(args)
    data = _load_data(args.data)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    if args.model == "cox":
        model = fit_cox(data)
    else:
        params = RsfParams(**{k: v for k, v in doc.items() if k in RsfParams.__dataclass_fields__})
        model = fit_rsf(data, params)
    model.save(out / f"{args.model}.json")
    log.info("wrote %s", out / f"{args.model}.json")
    return 0


def cmd_explain(args) -> int:
    doc = _config(args)
    data = _load_data(args.data)
    model = replace(_load_model(Path(args.model)), training_data=data)
    x = np.array([float(v) for v in args.x.split(",")]) if args.x else data.features[args.row]
    cfg = ExplainConfig(**{"ridge": 1.0, **{k: v for k, v in doc.items()
                                            if k in ExplainConfig.__dataclass_fields__}})
    ex = explain(model, x, cfg)
    text = ex.dumps()
    if args.out:
        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
        (out / "explanation.json").write_text(text)
    print(text)
    return 0


def cmd_experiment(args) -> int:
    doc = _config(args)
    if args.kind != "sweep":
        doc["kind"] = args.kind
    config = ExperimentConfig.from_json(doc)
    report = run_sweep(config) if args.kind == "sweep" else run(config)
    written = save_report(report, Path(args.out) / f"{args.kind}-seed{config.seed}.json")
    for p in written:
        log.info("wrote %s", p)
    return 0


def _fmt(v) -> str:
    return f"{v:.4f}" if isinstance(v, float) else str(v)


def cmd_report(args) -> int:
    r = load_report(args.report)
    print(f"{r.kind} (seed {r.seed}, {r.wall_clock:.1f} s)")
    if r.kind == "contamination":
        for c in r.aggregates["table"]:
            print("  " + "  ".join(f"{k}={_fmt(v)}" for k, v in c.items()))
    elif r.kind == "sweep":
        for s in r.surface:
            print(f"  gamma={s['gamma']:<6g} lambda={s['lambda']:<10.4g} MRSE={s['mrse']:.4f}")
    else:
        for row in r.rows:
            print("  " + "  ".join(f"{k}={_fmt(v)}" for k, v in row.items()))
        print("  " + "  ".join(f"{k}={_fmt(r.aggregates[k])}" for k in ("MRSE_E1", "MRSE_E2", "MRSE_E3")))
    return 0


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="JSON config file")
    common.add_argument("--seed", type=int)
    common.add_argument("--out", default="out", help="output directory")
    common.add_argument("-v", "--verbose", action="store_true")

    p = argparse.ArgumentParser(prog="ksexplain", description=__doc__)
    sub = p.add_subparsers(dest="command", required=True)

    g = sub.add_parser("generate", parents=[common], help="synthetic Weibull-Cox dataset to CSV")
    g.set_defaults(func=cmd_generate)

    t = sub.add_parser("train", parents=[common], help="fit a black-box model")
    t.add_argument("--data", required=True, help="dataset CSV or bundled name (veteran, lung)")
    t.add_argument("--model", choices=("cox", "rsf"), default="cox")
    t.set_defaults(func=cmd_train)

    e = sub.add_parser("explain", parents=[common], help="explain one prediction")
    e.add_argument("--model", required=True, help="model JSON written by train")
    e.add_argument("--data", required=True, help="the model's training data")
    e.add_argument("--x", help="comma-separated feature vector")
    e.add_argument("--row", type=int, default=0, help="explain this training row when --x is absent")
    e.set_defaults(func=cmd_explain)

    x = sub.add_parser("experiment", parents=[common], help="run an experiment family")
    x.add_argument("kind", choices=(*KINDS, "sweep"))
    x.set_defaults(func=cmd_experiment)

    r = sub.add_parser("report", parents=[common], help="print a saved report")
    r.add_argument("report", help="report JSON")
    r.set_defaults(func=cmd_report)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(message)s")
    try:
        return args.func(args)
    except (OSError, ValueError, RuntimeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
