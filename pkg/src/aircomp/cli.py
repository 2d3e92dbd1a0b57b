"""Command-line entry point.

Subcommands: gen, solve, train, sweep, bench, demo-heatmap. Configuration
comes from a flat `key = value` text file whose keys mirror the
ScenarioConfig and TrainConfig field names; environment variables prefixed
AIRCOMP_ override file values (AIRCOMP_NOISE_POWER overrides noise_power).
"""

import argparse
import dataclasses
import os
import sys

import numpy as np

from . import harness
from .model import ModelConfig, load_params, save_params
from .scenario import ScenarioConfig, sample_realization
from .training import TrainConfig, train

ENV_PREFIX = "AIRCOMP_"


def read_flat_config(path):
    out = {}
    with open(path) as f:
        for line in f:
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ValueError(f"bad config line: {line!r}")
            key, val = line.split("=", 1)
            out[key.strip()] = val.strip()
    return out


def env_overrides():
    out = {}
    for key, val in os.environ.items():
        if key.startswith(ENV_PREFIX):
            out[key[len(ENV_PREFIX):].lower()] = val
    return out


def _coerce(text, field_type, example):
    if field_type is int:
        return int(text)
    if field_type is float:
        return float(text)
    if field_type is bool:
        return text.lower() in ("1", "true", "yes")
    if field_type is tuple or isinstance(example, tuple):
        parts = [p for p in text.replace(",", " ").split() if p]
        vals = [float(p) if "." in p or "e" in p.lower() else int(p)
                for p in parts]
        if isinstance(example, tuple):
            return tuple(vals)
        # scalar shorthand broadcasts across clusters in ScenarioConfig
        return vals[0] if len(vals) == 1 else tuple(vals)
    return text


def build_config(cls, raw, defaults=None):
    """Instantiate a config dataclass from flat string key/values."""
    kwargs = dict(defaults or {})
    fields = {f.name: f for f in dataclasses.fields(cls)}
    for key, val in raw.items():
        if key not in fields:
            continue
        f = fields[key]
        example = getattr(cls, key, None)
        typ = f.type if isinstance(f.type, type) else None
        if typ is None:
            typ = type(f.default) if f.default is not dataclasses.MISSING else str
        kwargs[key] = _coerce(val, typ, example)
    return cls(**kwargs)


def load_scenario_config(args):
    raw = {}
    if getattr(args, "config", None):
        raw.update(read_flat_config(args.config))
    raw.update(env_overrides())
    return build_config(ScenarioConfig, raw)


def _model_config_from(raw):
    return build_config(ModelConfig, raw)


def cmd_gen(args):
    cfg = load_scenario_config(args)
    paths = harness.generate_scenarios(cfg, args.count, args.seed, args.out)
    print(f"wrote {len(paths)} scenario files to {args.out}")


def cmd_solve(args):
    if args.method == "udgl" and not args.model:
        sys.exit("solve: --model is required for method udgl")
    items = harness.load_scenario_items(args.scenarios)
    records = harness.run_batch(items, args.method, args.model, args.jobs)
    harness.write_csv(args.out, "solve", harness.SOLVE_COLUMNS,
                      [r.row() for r in records])
    mean = np.mean([r.weighted for r in records]) if records else float("nan")
    print(f"{args.method}: {len(records)} scenarios, mean R = {mean:.4f}")


def cmd_train(args):
    raw = {}
    if args.config:
        raw.update(read_flat_config(args.config))
    raw.update(env_overrides())
    scenario = build_config(ScenarioConfig, raw)
    model_cfg = _model_config_from(raw)
    tcfg = build_config(TrainConfig, raw,
                        defaults={"scenario": scenario, "model": model_cfg,
                                  "seed": args.seed})
    init = load_params(args.init) if args.init else None
    params, log = train(tcfg, init)
    os.makedirs(args.out, exist_ok=True)
    save_params(params, os.path.join(args.out, "model.udgl"))
    log.to_csv(os.path.join(args.out, "training.csv"))
    print(f"trained {tcfg.epochs} epochs; artifacts in {args.out}")


def _sweep_config(base, param, value):
    if param == "clusters":
        return base.scaled(num_clusters=value, devices_per_cluster=base.devices_per_cluster[0],
                           antennas=base.antennas[0], weights=base.weights[0],
                           quant_bits=base.quant_bits[0])
    if param == "devices":
        return base.scaled(devices_per_cluster=value)
    if param == "antennas":
        return base.scaled(antennas=value)
    raise ValueError(f"unknown sweep parameter {param!r}")


def cmd_sweep(args):
    base = load_scenario_config(args)
    methods = args.methods.split(",")
    params = load_params(args.model) if args.model else None
    if "udgl" in methods and params is None:
        sys.exit("sweep: --model is required when methods include udgl")
    values = [int(v) for v in args.values.split(",")]
    rows = []
    for value in values:
        cfg = _sweep_config(base, args.param, value)
        seeds = np.random.SeedSequence(args.seed + value).generate_state(args.count)
        for method in methods:
            records = []
            for i, s in enumerate(seeds):
                r = sample_realization(cfg, int(s))
                records.append(harness.make_record(r, method, args.seed, i,
                                                   params, ao_seed=int(s)))
            rows.extend(harness.sweep_rows(args.param, value, records))
    harness.write_csv(args.out, "sweep", harness.SWEEP_COLUMNS, rows)
    print(f"sweep over {args.param}={values} done; {args.out}")


def cmd_bench(args):
    cfg = load_scenario_config(args)
    methods = args.methods.split(",")
    params = load_params(args.model) if args.model else None
    if "udgl" in methods and params is None:
        sys.exit("bench: --model is required when methods include udgl")
    seeds = np.random.SeedSequence(args.seed).generate_state(args.count)
    realizations = [sample_realization(cfg, int(s)) for s in seeds]
    rows = []
    for method in methods:
        times = []
        for r in realizations:
            _, _, secs = harness.solve_one(r, method, params)
            times.append(secs * 1e6)
        t = np.array(times)
        rows.append([method, repr(float(t.mean())), repr(float(t.std())),
                     len(t)])
        print(f"{method}: mean {t.mean()/1e3:.2f} ms over {len(t)} runs")
    harness.write_csv(args.out, "bench", harness.BENCH_COLUMNS, rows)


def cmd_demo_heatmap(args):
    cfg = load_scenario_config(args)
    realization = sample_realization(cfg, args.seed)
    params = load_params(args.model) if args.model else None
    methods = args.methods.split(",")
    all_rows = []
    cols = None
    for method in methods:
        strategy, _, _ = harness.solve_one(realization, method, params,
                                           ao_seed=args.seed)
        cols, rows = harness.heatmap_rows(strategy, realization, method)
        all_rows.extend(rows)
    harness.write_csv(args.out, "heatmap", cols, all_rows)
    print(f"heatmap data for {methods} written to {args.out}")


def build_parser():
    p = argparse.ArgumentParser(prog="aircomp")
    sub = p.add_subparsers(dest="command", required=True)

    g = sub.add_parser("gen", help="generate serialized scenario files")
    g.add_argument("--config")
    g.add_argument("--count", type=int, required=True)
    g.add_argument("--seed", type=int, default=0)
    g.add_argument("--out", required=True)
    g.set_defaults(func=cmd_gen)

    s = sub.add_parser("solve", help="run a method over scenario files")
    s.add_argument("--method", choices=harness.METHODS, required=True)
    s.add_argument("--scenarios", required=True)
    s.add_argument("--model")
    s.add_argument("--jobs", type=int, default=1)
    s.add_argument("--out", required=True)
    s.set_defaults(func=cmd_solve)

    t = sub.add_parser("train", help="train the unfolded network")
    t.add_argument("--config")
    t.add_argument("--seed", type=int, default=0)
    t.add_argument("--init", help="warm-start model file (fine-tuning)")
    t.add_argument("--out", required=True)
    t.set_defaults(func=cmd_train)

    w = sub.add_parser("sweep", help="mean rate vs a scenario parameter")
    w.add_argument("--config")
    w.add_argument("--param", choices=("clusters", "devices", "antennas"),
                   required=True)
    w.add_argument("--values", required=True)
    w.add_argument("--methods", default="ao,fpt,apt")
    w.add_argument("--model")
    w.add_argument("--count", type=int, default=20)
    w.add_argument("--seed", type=int, default=0)
    w.add_argument("--out", required=True)
    w.set_defaults(func=cmd_sweep)

    b = sub.add_parser("bench", help="wall-clock comparison of methods")
    b.add_argument("--config")
    b.add_argument("--methods", default="ao,udgl,fpt,apt")
    b.add_argument("--model")
    b.add_argument("--count", type=int, default=20)
    b.add_argument("--seed", type=int, default=0)
    b.add_argument("--out", required=True)
    b.set_defaults(func=cmd_bench)

    h = sub.add_parser("demo-heatmap", help="signal/interference power matrix")
    h.add_argument("--config")
    h.add_argument("--methods", default="ao")
    h.add_argument("--model")
    h.add_argument("--seed", type=int, default=0)
    h.add_argument("--out", required=True)
    h.set_defaults(func=cmd_demo_heatmap)
    return p


def main(argv=None):
    args = build_parser().parse_args(argv)
    args.func(args)


if __name__ == "__main__":
    main()
