"""Batch orchestration: run methods over scenario sets and emit CSV artifacts.

All CSVs open with a schema comment line `# aircomp-csv-schema <version>
kind=<kind>` so downstream consumers can reject files they do not
understand. Rows are ordered by scenario index regardless of worker
completion order.
"""

import csv
import os
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass

import numpy as np

from .ao import alternating_optimize
from .baselines import apt_strategy, fpt_strategy
from .metrics import weighted_sum_rate
from .model import load_params, model_forward
from .scenario import deserialize_realization, sample_realization, serialize_realization

CSV_SCHEMA_VERSION = 1
METHODS = ("ao", "udgl", "fpt", "apt")

SOLVE_COLUMNS = ["seed", "index", "clusters", "devices", "antennas", "method",
                 "weighted_R", "rates", "wall_us", "iterations"]
SWEEP_COLUMNS = ["param", "param_value", "method", "mean_R", "std_R", "n"]
BENCH_COLUMNS = ["method", "mean_us", "std_us", "n"]
HEATMAP_COLUMNS = None  # built per K at write time


class SchemaError(ValueError):
    pass


def schema_line(kind):
    return f"# aircomp-csv-schema {CSV_SCHEMA_VERSION} kind={kind}"


def write_csv(path, kind, columns, rows):
    with open(path, "w", newline="") as f:
        f.write(schema_line(kind) + "\n")
        w = csv.writer(f)
        w.writerow(columns)
        w.writerows(rows)


def read_csv(path, expect_kind=None):
    """Rows as dicts; validates the schema comment line."""
    with open(path, newline="") as f:
        first = f.readline().strip()
        parts = first.split()
        if (len(parts) != 4 or parts[0] != "#"
                or parts[1] != "aircomp-csv-schema"):
            raise SchemaError(f"{path}: missing schema line")
        if int(parts[2]) != CSV_SCHEMA_VERSION:
            raise SchemaError(f"{path}: unsupported schema version {parts[2]}")
        kind = parts[3].split("=", 1)[1]
        if expect_kind is not None and kind != expect_kind:
            raise SchemaError(f"{path}: expected kind={expect_kind}, got {kind}")
        return kind, list(csv.DictReader(f))


@dataclass
class RunRecord:
    seed: int
    index: int
    clusters: int
    devices: int        # per cluster (uniform configs; else total)
    antennas: int
    method: str
    rates: np.ndarray   # per cluster
    weighted: float
    wall_us: float
    iterations: int = None

    def validate(self, weights):
        assert abs(self.weighted - float(np.dot(weights, self.rates))) < 1e-9
        assert self.wall_us > 0

    def row(self):
        its = "" if self.iterations is None else self.iterations
        return [self.seed, self.index, self.clusters, self.devices,
                self.antennas, self.method, repr(self.weighted),
                "|".join(repr(float(r)) for r in self.rates),
                repr(self.wall_us), its]


def solve_one(realization, method, params=None, ao_seed=0):
    """Run one method; returns (strategy, iteration count or None, seconds)."""
    tic = time.perf_counter()
    iterations = None
    if method == "ao":
        strategy, trace = alternating_optimize(realization, seed=ao_seed)
        iterations = trace.outer_iterations
    elif method == "udgl":
        if params is None:
            raise ValueError("udgl requires model parameters")
        strategy = model_forward(realization, params)
    elif method == "fpt":
        strategy = fpt_strategy(realization)
    elif method == "apt":
        strategy = apt_strategy(realization)
    else:
        raise ValueError(f"unknown method {method!r}")
    return strategy, iterations, time.perf_counter() - tic


def make_record(realization, method, seed, index, params=None, ao_seed=0):
    strategy, iterations, secs = solve_one(realization, method, params, ao_seed)
    report = weighted_sum_rate(strategy, realization)
    cfg = realization.config
    rec = RunRecord(seed, index, cfg.num_clusters,
                    cfg.devices_per_cluster[0], cfg.antennas[0], method,
                    report.rates, report.weighted_sum,
                    secs * 1e6, iterations)
    rec.validate(cfg.weights)
    return rec


def _record_task(args):
    raw, method, model_path, seed, index = args
    params = load_params(model_path) if model_path else None
    return make_record(deserialize_realization(raw), method, seed, index,
                       params, ao_seed=seed)


def run_batch(items, method, model_path=None, jobs=1):
    """items: iterable of (raw_bytes, seed, index); returns ordered records."""
    tasks = [(raw, method, model_path, seed, index)
             for raw, seed, index in items]
    if jobs <= 1:
        return [_record_task(t) for t in tasks]
    with ProcessPoolExecutor(max_workers=jobs) as ex:
        return list(ex.map(_record_task, tasks))


# -- scenario files ------------------------------------------------------------

def scenario_filename(seed, index):
    return f"scn_{seed:010d}_{index:05d}.bin"


def generate_scenarios(cfg, count, master_seed, out_dir):
    os.makedirs(out_dir, exist_ok=True)
    seeds = np.random.SeedSequence(master_seed).generate_state(count)
    paths = []
    for i, s in enumerate(seeds):
        r = sample_realization(cfg, int(s))
        p = os.path.join(out_dir, scenario_filename(master_seed, i))
        with open(p, "wb") as f:
            f.write(serialize_realization(r))
        paths.append(p)
    return paths


def load_scenario_items(scenario_dir):
    """(raw, seed, index) tuples from a directory of generated files."""
    items = []
    for name in sorted(os.listdir(scenario_dir)):
        if not (name.startswith("scn_") and name.endswith(".bin")):
            continue
        stem = name[4:-4]
        seed_s, index_s = stem.split("_")
        with open(os.path.join(scenario_dir, name), "rb") as f:
            items.append((f.read(), int(seed_s), int(index_s)))
    items.sort(key=lambda t: (t[1], t[2]))
    return items


# -- aggregation ---------------------------------------------------------------

def sweep_rows(param, value, records):
    by_method = {}
    for r in records:
        by_method.setdefault(r.method, []).append(r.weighted)
    rows = []
    for method in sorted(by_method):
        vals = np.array(by_method[method])
        rows.append([param, value, method, repr(float(vals.mean())),
                     repr(float(vals.std())), len(vals)])
    return rows


def power_matrix(strategy, realization):
    """Per-cluster transmit power and the K x K received-power matrix.

    Entry [k, l] is the power cluster l's devices deposit at fusion center
    k: the diagonal is intra-cluster signal power, off-diagonals are
    inter-cluster interference.
    """
    cfg = realization.config
    K = cfg.num_clusters
    tx = np.array([float(np.sum(np.abs(u) ** 2)) for u in strategy.u])
    mat = np.zeros((K, K))
    for k in range(K):
        for l in range(K):
            acc = 0.0
            for n in range(cfg.devices_per_cluster[l]):
                g = np.vdot(realization.h(l, n, k), strategy.v[k])
                acc += abs(np.conj(g) * strategy.u[l][n]) ** 2
            mat[k, l] = acc
    return tx, mat


def heatmap_rows(strategy, realization, method):
    tx, mat = power_matrix(strategy, realization)
    K = mat.shape[0]
    cols = ["method", "cluster", "tx_power"] + [f"pw_{l}" for l in range(K)]
    rows = [[method, k, repr(float(tx[k]))] + [repr(float(x)) for x in mat[k]]
            for k in range(K)]
    return cols, rows
