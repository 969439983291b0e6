"""Command-line entry point: ``generate``, ``solve``, ``sweep`` and ``report``.

Exit codes: 0 success, 2 usage error, 3 data error, 4 numerical failure.
"""

from __future__ import annotations

import argparse
import csv
import hashlib
import json
import logging
import math
import sys
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Any, Optional, Sequence

import numpy as np

from mbsvrn.dataset import (
    Dataset,
    FeatureMapSpec,
    SyntheticSpec,
    apply_feature_map,
    generate_synthetic,
    load_dense_csv,
    load_libsvm,
    write_dense_csv,
)
from mbsvrn.errors import ConvergenceError, DataError, NotPositiveDefiniteError
from mbsvrn.harness import (
    RateProbe,
    RunKey,
    RunResult,
    SweepSpec,
    data_passes,
    execute_runs,
    iter_run_keys,
    measure_alpha_for_h,
    probe_policy,
    summarize,
    t_max_grid,
)
from mbsvrn.objective import Objective
from mbsvrn.solvers import Method, SolverConfig, Status, run, solve_reference

log = logging.getLogger("mbsvrn")

RESULTS_VERSION = "#svrn-results-v1"
RESULTS_COLUMNS = [
    "dataset", "method", "h", "b", "eta", "t_max", "run",
    "rho_min", "passes_used", "status", "alpha_measured",
]
TUNED_COLUMNS = [
    "dataset", "method", "h", "b", "best_rho", "std_rho", "best_eta", "best_t_max",
    "runs", "alpha_measured", "flag",
]

EXIT_OK, EXIT_USAGE, EXIT_DATA, EXIT_NUMERIC = 0, 2, 3, 4


class UsageError(Exception):
    pass


class SchemaError(DataError):
    pass


# ---------------------------------------------------------------------------
# configuration


@dataclass
class ExperimentConfig:
    """Parsed experiment file. Relative paths resolve against ``base_dir``."""

    dataset: dict
    mu: float = 1e-2
    feature_map: Optional[FeatureMapSpec] = None
    sweep: SweepSpec = field(default_factory=SweepSpec)
    output_dir: Path = Path("out")
    reference_tol: float = 1e-12
    dump_probes: bool = False
    base_dir: Path = Path(".")

    @classmethod
    def from_dict(cls, raw: dict, base_dir: Path = Path(".")) -> "ExperimentConfig":
        if not isinstance(raw, dict):
            raise UsageError("config must be a JSON object")
        unknown = set(raw) - {"dataset", "mu", "feature_map", "sweep", "output_dir",
                              "reference_tol", "dump_probes"}
        if unknown:
            raise UsageError(f"unknown config keys: {sorted(unknown)}")
        ds = dict(raw.get("dataset") or {"source": "generate"})
        source = ds.get("source")
        if source == "generate":
            allowed = {"source", "n", "d", "kappa", "seed", "name"}
            ds = {"source": "generate", "n": 500_000, "d": 256, "kappa": 6000.0, "seed": 0, **ds}
        elif source in ("dense-csv", "libsvm"):
            allowed = {"source", "path", "n_features", "name"}
            if "path" not in ds:
                raise UsageError(f"dataset source {source!r} needs a path")
            path = Path(ds["path"])
            ds["path"] = str(path if path.is_absolute() else (base_dir / path))
            if not Path(ds["path"]).is_file():
                raise UsageError(f"dataset file not found: {ds['path']}")
        else:
            raise UsageError("dataset.source must be one of generate, dense-csv, libsvm")
        if set(ds) - allowed:
            raise UsageError(f"unknown dataset keys: {sorted(set(ds) - allowed)}")

        fm = raw.get("feature_map")
        try:
            feature_map = FeatureMapSpec(**fm) if fm else None
            sweep = _sweep_from_dict(raw.get("sweep") or {})
        except (TypeError, ValueError) as exc:
            raise UsageError(str(exc)) from None
        out = Path(raw.get("output_dir", "out"))
        mu = float(raw.get("mu", 1e-2))
        if not mu > 0:
            raise UsageError("mu must be positive")
        return cls(
            dataset=ds,
            mu=mu,
            feature_map=feature_map,
            sweep=sweep,
            output_dir=out if out.is_absolute() else base_dir / out,
            reference_tol=float(raw.get("reference_tol", 1e-12)),
            dump_probes=bool(raw.get("dump_probes", False)),
            base_dir=base_dir,
        )


def _sweep_from_dict(raw: dict) -> SweepSpec:
    known = {"method", "b_grid", "h_grid", "eta_grid", "t_max_multipliers",
             "runs_per_config", "pass_budget", "master_seed", "max_outer"}
    if set(raw) - known:
        raise UsageError(f"unknown sweep keys: {sorted(set(raw) - known)}")
    kwargs: dict[str, Any] = dict(raw)
    for key in ("b_grid", "h_grid"):
        if key in kwargs:
            kwargs[key] = tuple(int(v) for v in kwargs[key])
    for key in ("eta_grid", "t_max_multipliers"):
        if key in kwargs:
            kwargs[key] = tuple(float(v) for v in kwargs[key])
    return SweepSpec(**kwargs)


def load_config(path: Optional[str]) -> ExperimentConfig:
    if path is None:
        return ExperimentConfig.from_dict({"dataset": {"source": "generate"}})
    p = Path(path)
    try:
        raw = json.loads(p.read_text(encoding="utf-8"))
    except FileNotFoundError:
        raise UsageError(f"config file not found: {path}") from None
    except json.JSONDecodeError as exc:
        raise UsageError(f"config file is not valid JSON: {exc}") from None
    return ExperimentConfig.from_dict(raw, base_dir=p.resolve().parent)


def load_dataset(cfg: ExperimentConfig) -> Dataset:
    ds_cfg = cfg.dataset
    if ds_cfg["source"] == "generate":
        spec = SyntheticSpec(int(ds_cfg["n"]), int(ds_cfg["d"]), float(ds_cfg["kappa"]),
                             int(ds_cfg["seed"]))
        ds = generate_synthetic(spec)
    elif ds_cfg["source"] == "dense-csv":
        ds = load_dense_csv(ds_cfg["path"])
    else:
        ds = load_libsvm(ds_cfg["path"], ds_cfg.get("n_features"))
    if cfg.feature_map is not None:
        ds = apply_feature_map(ds, cfg.feature_map)
    if ds_cfg.get("name"):
        ds = Dataset(ds.features, ds.labels, ds_cfg["name"])
    return ds


def dataset_hash(ds: Dataset, mu: float) -> str:
    h = hashlib.sha256()
    h.update(np.asarray(ds.features.shape, dtype=np.int64).tobytes())
    h.update(ds.features.tobytes())
    h.update(ds.labels.tobytes())
    h.update(repr(float(mu)).encode())
    return h.hexdigest()


def reference_solution(obj: Objective, out_dir: Path, tol: float) -> tuple[np.ndarray, float]:
    """``(x*, f*)``, cached under ``out_dir/reference`` by content hash."""
    key = dataset_hash(obj.data, obj.mu)
    path = out_dir / "reference" / f"{key[:32]}.json"
    if path.is_file():
        cached = json.loads(path.read_text(encoding="utf-8"))
        if cached.get("tol") == tol:
            return np.array(cached["x_star"], dtype=np.float64), float(cached["f_star"])
    ref = solve_reference(obj, tol=tol)
    path.parent.mkdir(parents=True, exist_ok=True)
    payload = {"hash": key, "mu": obj.mu, "tol": tol, "f_star": ref.f,
               "iterations": ref.iterations, "grad_norm": ref.grad_norm,
               "x_star": ref.x.tolist()}
    path.write_text(json.dumps(payload, indent=1) + "\n", encoding="utf-8")
    return ref.x, ref.f


def _setup_logging(out_dir: Path) -> None:
    out_dir.mkdir(parents=True, exist_ok=True)
    log.setLevel(logging.INFO)
    for handler in list(log.handlers):
        log.removeHandler(handler)
        handler.close()
    fh = logging.FileHandler(out_dir / "mbsvrn.log", encoding="utf-8")
    fh.setFormatter(logging.Formatter("%(asctime)s %(levelname)s %(message)s"))
    log.addHandler(fh)
    sh = logging.StreamHandler(sys.stderr)
    sh.setFormatter(logging.Formatter("%(message)s"))
    log.addHandler(sh)
    log.propagate = False


def _num(v: float) -> str:
    return repr(float(v))


# ---------------------------------------------------------------------------
# commands


def cmd_generate(cfg: ExperimentConfig, out_dir: Path) -> Path:
    """Write the generated dataset as CSV plus a JSON sidecar with spec and seed."""
    if cfg.dataset["source"] != "generate":
        raise UsageError("generate needs dataset.source = generate")
    ds = load_dataset(cfg)
    out_dir.mkdir(parents=True, exist_ok=True)
    csv_path = out_dir / f"{ds.name}.csv"
    write_dense_csv(ds, csv_path)
    sidecar = {
        "format": "dense-csv",
        "file": csv_path.name,
        "spec": {k: cfg.dataset[k] for k in ("n", "d", "kappa", "seed")},
        "seed": cfg.dataset["seed"],
        "mu": cfg.mu,
        "feature_map": asdict(cfg.feature_map) if cfg.feature_map else None,
        "n": ds.n,
        "d": ds.d,
    }
    (out_dir / f"{ds.name}.json").write_text(json.dumps(sidecar, indent=2, sort_keys=True) + "\n",
                                             encoding="utf-8")
    log.info("wrote %s (n=%d, d=%d)", csv_path, ds.n, ds.d)
    return csv_path


def build_solver_config(
    n: int,
    method: str,
    b: Optional[int],
    h: Optional[int],
    eta: float,
    t_max: Optional[int],
    seed: int,
    max_passes: float,
    max_outer: int,
) -> SolverConfig:
    try:
        m = Method(method)
    except ValueError:
        raise UsageError(f"unknown method {method!r}") from None
    if m is Method.NEWTON:
        raise UsageError("method newton is the reference solver; it runs implicitly")
    if m in (Method.SVRG, Method.GD):
        if h not in (None, 0):
            raise UsageError(f"method {m.value} uses the identity Hessian; drop --h")
        h = 0
    if m in (Method.SN, Method.GD):
        if b not in (None, n) or t_max not in (None, 1):
            raise UsageError(f"method {m.value} forces b = n and t_max = 1")
        b, t_max = n, 1
    if m is Method.SN and h is None:
        h = n
    if b is None:
        raise UsageError("--b is required")
    if h is None:
        raise UsageError("--h is required for mbsvrn")
    if t_max is None:
        t_max = max(1, math.ceil(n / b))
    cfg = SolverConfig(method=m, b=b, h=h, eta=eta, t_max=t_max, seed=seed,
                       max_passes=max_passes, max_outer=max_outer,
                       probe_every=probe_policy(min(max(b, 1), n), n) if 1 <= b <= n else 1)
    try:
        return cfg.validate(n)
    except ValueError as exc:
        raise UsageError(str(exc)) from None


def cmd_solve(cfg: ExperimentConfig, out_dir: Path, solver_cfg_args: dict, halt: bool = True) -> Path:
    """Run one solver and write its probes as JSON lines.

    The trajectory file is deterministic; wall-clock times go to a
    ``.timing.jsonl`` sidecar.
    """
    ds = load_dataset(cfg)
    obj = Objective(ds, cfg.mu)
    scfg = build_solver_config(ds.n, **solver_cfg_args)
    out_dir.mkdir(parents=True, exist_ok=True)
    x_star, f_star = reference_solution(obj, out_dir, cfg.reference_tol)
    rate_probe = RateProbe(ds.n, f_star)

    stem = (f"solve_{scfg.method.value}_h{scfg.h}_b{scfg.b}_eta{scfg.eta:g}"
            f"_tmax{scfg.t_max}_seed{scfg.seed}")
    traj_path = out_dir / f"{stem}.jsonl"
    def probe(t: int, s: int, counter: int, fval: float) -> Optional[Status]:
        status = rate_probe(t, s, counter, fval)
        # without halting, only convergence stops the run early
        return status if halt or status is Status.CONVERGED else None

    final: dict[str, Any]
    records = []
    try:
        traj = run(obj, scfg, probe)
        records = traj.records
        final = {"status": traj.status.value, "counter": traj.counter,
                 "passes": data_passes(traj.counter, ds.n), "rho_min": rate_probe.rho_min}
    except (NotPositiveDefiniteError, FloatingPointError, np.linalg.LinAlgError) as exc:
        final = {"status": "failed", "error": f"{type(exc).__name__}: {exc}"}

    lines, timing = [], []
    base = 0
    snapshot_err = math.nan
    for r in records:
        err = r.fval - f_star
        if r.t == 0:
            base = r.counter - ds.n
            snapshot_err = err
        w = data_passes(r.counter - base, ds.n)
        rho = None
        if r.t > 0 and snapshot_err > 0 and err >= 0 and math.isfinite(err):
            rho = (err / snapshot_err) ** (1.0 / w)
        lines.append({"s": r.s, "t": r.t, "counter": r.counter, "w": w,
                      "error": err if math.isfinite(err) else None, "rho": rho})
        timing.append({"s": r.s, "t": r.t, "elapsed_ms": 1000.0 * r.elapsed})
    lines.append(final)
    with open(traj_path, "w", encoding="utf-8", newline="\n") as fh:
        for rec in lines:
            fh.write(json.dumps(rec, sort_keys=True) + "\n")
    with open(out_dir / f"{stem}.timing.jsonl", "w", encoding="utf-8", newline="\n") as fh:
        for rec in timing:
            fh.write(json.dumps(rec, sort_keys=True) + "\n")
    log.info("wrote %s (%s)", traj_path, final["status"])
    if final["status"] == "failed":
        raise NotPositiveDefiniteError(final["error"])
    return traj_path


def _write_csv(path: Path, columns: Sequence[str], rows: Sequence[dict]) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write(RESULTS_VERSION + "\n")
        writer = csv.DictWriter(fh, fieldnames=list(columns), lineterminator="\n")
        writer.writeheader()
        for row in rows:
            writer.writerow(row)


def read_versioned_csv(path: Path, required: Sequence[str]) -> list[dict]:
    """Rows of a versioned CSV; rejects unknown versions and missing columns."""
    with open(path, "r", encoding="utf-8", newline="") as fh:
        first = fh.readline().rstrip("\r\n")
        if first != RESULTS_VERSION:
            raise SchemaError(f"{path}: unsupported schema version line {first!r}")
        reader = csv.DictReader(fh)
        header = reader.fieldnames or []
        for col in required:
            if col not in header:
                raise SchemaError(f"{path}: missing column {col!r}")
        return list(reader)


def _row_key(row: dict) -> tuple:
    return (row["method"], int(row["h"]), int(row["b"]), float(row["eta"]),
            int(row["t_max"]), int(row["run"]))


def _result_row(ds_name: str, method: Method, r: RunResult, alpha: float) -> dict:
    return {
        "dataset": ds_name, "method": method.value, "h": r.key.h, "b": r.key.b,
        "eta": _num(r.eta), "t_max": r.t_max, "run": r.key.run,
        "rho_min": _num(r.rho_min), "passes_used": _num(r.passes_used),
        "status": r.status, "alpha_measured": _num(alpha),
    }


def _rows_to_results(rows: Sequence[dict]) -> list[RunResult]:
    out = []
    for row in rows:
        key = RunKey(int(row["h"]), int(row["b"]), -1, -1, int(row["run"]))
        out.append(RunResult(key, float(row["eta"]), int(row["t_max"]), 0,
                             float(row["rho_min"]), float(row["passes_used"]), row["status"]))
    return out


def _tuned_rows(ds_name: str, method: str, tuned: dict) -> list[dict]:
    rows = []
    for (h, b), tr in sorted(tuned.items()):
        rows.append({
            "dataset": ds_name, "method": method, "h": h, "b": b,
            "best_rho": _num(tr.best_rho), "std_rho": _num(tr.std_rho),
            "best_eta": _num(tr.best_eta), "best_t_max": tr.best_t_max,
            "runs": len(tr.per_run_rhos), "alpha_measured": _num(tr.measured_alpha),
            "flag": "all_diverged" if tr.all_diverged else "ok",
        })
    return rows


def cmd_sweep(cfg: ExperimentConfig, out_dir: Path, workers: int = 1) -> Path:
    """Run every sweep key, one CSV row per run, then tune per ``(h, b)``.

    Keys already present in ``results.csv`` are not rerun. The final file is
    rewritten in canonical key order so resumed and fresh sweeps agree.
    """
    ds = load_dataset(cfg)
    obj = Objective(ds, cfg.mu)
    spec = cfg.sweep
    out_dir.mkdir(parents=True, exist_ok=True)
    x_star, f_star = reference_solution(obj, out_dir, cfg.reference_tol)
    alphas = {h: measure_alpha_for_h(obj, x_star, h, spec.master_seed).alpha
              for h in sorted(set(spec.h_grid))}

    results_path = out_dir / "results.csv"
    existing: dict[tuple, dict] = {}
    if results_path.is_file():
        for row in read_versioned_csv(results_path, RESULTS_COLUMNS):
            existing[_row_key(row)] = row

    keys = list(iter_run_keys(spec, ds.n))

    def key_tuple(k: RunKey) -> tuple:
        t_max = t_max_grid(spec, ds.n, k.b)[k.tmax_index]
        return (spec.method.value, k.h, k.b, spec.eta_grid[k.eta_index], t_max, k.run)

    todo = [k for k in keys if key_tuple(k) not in existing]
    log.info("sweep: %d runs total, %d to do", len(keys), len(todo))

    probes_path = out_dir / "probes.jsonl"
    probe_lines = {}
    if cfg.dump_probes and probes_path.is_file():
        for line in probes_path.read_text(encoding="utf-8").splitlines():
            rec = json.loads(line)
            probe_lines[tuple(rec["key"])] = line

    # single writer: rows are appended here as results arrive
    new_file = not results_path.is_file()
    with open(results_path, "a", encoding="utf-8", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=RESULTS_COLUMNS, lineterminator="\n")
        if new_file:
            fh.write(RESULTS_VERSION + "\n")
            writer.writeheader()
        for r in execute_runs(obj, f_star, spec, todo, workers):
            row = _result_row(ds.name, spec.method, r, alphas[r.key.h])
            writer.writerow(row)
            fh.flush()
            kt = key_tuple(r.key)
            existing[kt] = row
            if r.error:
                log.warning("run %s failed: %s", kt, r.error)
            if cfg.dump_probes:
                probe_lines[kt] = json.dumps({"key": list(kt), "rhos": r.rhos}, sort_keys=True)

    ordered = [existing[key_tuple(k)] for k in keys]
    _write_csv(results_path, RESULTS_COLUMNS, ordered)
    if cfg.dump_probes:
        with open(probes_path, "w", encoding="utf-8", newline="\n") as fh:
            for k in keys:
                if key_tuple(k) in probe_lines:
                    fh.write(probe_lines[key_tuple(k)] + "\n")

    tuned = summarize(_rows_to_results(ordered), spec.method, alphas)
    _write_csv(out_dir / "tuned.csv", TUNED_COLUMNS, _tuned_rows(ds.name, spec.method.value, tuned))
    log.info("wrote %s and tuned.csv (%d cells)", results_path, len(tuned))
    return results_path


def flat_regime(bs: Sequence[int], rhos: Sequence[float], factor: float = 1.5) -> dict:
    """Widest contiguous span of ``b`` values with tuned rho within ``factor`` of the minimum."""
    order = np.argsort(bs)
    bs = [int(bs[i]) for i in order]
    rhos = [float(rhos[i]) for i in order]
    threshold = factor * min(rhos)
    best = (0, 0)
    start = None
    for i, r in enumerate(rhos + [math.inf]):
        if r <= threshold:
            start = i if start is None else start
        elif start is not None:
            if i - start > best[1] - best[0]:
                best = (start, i)
            start = None
    lo, hi = bs[best[0]], bs[best[1] - 1]
    return {"b_min": lo, "b_max": hi, "width": hi / lo, "count": best[1] - best[0],
            "min_rho": min(rhos), "threshold": threshold}


def cmd_report(results_csv: Path, out_dir: Path) -> Path:
    """Plot-data files: rho vs b per h, rho vs eta per b, and a summary JSON."""
    rows = read_versioned_csv(results_csv, RESULTS_COLUMNS)
    if not rows:
        raise DataError(f"{results_csv}: no rows")
    out_dir.mkdir(parents=True, exist_ok=True)
    methods = sorted({row["method"] for row in rows})
    alpha_by_h = {int(row["h"]): float(row["alpha_measured"]) for row in rows}
    tuned = summarize(_rows_to_results(rows), Method(methods[0]), alpha_by_h)

    summary: dict[str, Any] = {"methods": methods, "flat_regime": {}}
    for h in sorted({h for h, _ in tuned}):
        cells = sorted((b, tr) for (hh, b), tr in tuned.items() if hh == h)
        series = [{"b": b, "mean_rho": _num(tr.best_rho), "std_rho": _num(tr.std_rho),
                   "alpha_measured": _num(tr.measured_alpha)} for b, tr in cells]
        _write_csv(out_dir / f"rho_vs_b_h{h}.csv", ["b", "mean_rho", "std_rho", "alpha_measured"],
                   series)
        summary["flat_regime"][str(h)] = flat_regime([b for b, _ in cells],
                                                     [tr.best_rho for _, tr in cells])

    for b in sorted({b for _, b in tuned}):
        series = []
        for (h, bb), tr in sorted(tuned.items()):
            if bb != b:
                continue
            by_eta: dict[float, float] = {}
            for (eta, _t), score in tr.scores.items():
                by_eta[eta] = min(score, by_eta.get(eta, math.inf))
            series.extend({"h": h, "eta": _num(eta), "mean_rho": _num(v)}
                          for eta, v in sorted(by_eta.items()))
        _write_csv(out_dir / f"rho_vs_eta_b{b}.csv", ["h", "eta", "mean_rho"], series)

    summary_path = out_dir / "summary.json"
    summary_path.write_text(json.dumps(summary, indent=2, sort_keys=True) + "\n", encoding="utf-8")
    return summary_path


# ---------------------------------------------------------------------------
# argument parsing


def _parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="mbsvrn", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp, with_config=True):
        if with_config:
            sp.add_argument("--config", help="experiment JSON file")
            sp.add_argument("--mu", type=float, help="regularization (overrides config)")
        sp.add_argument("--out", help="output directory (overrides config)")
        sp.add_argument("--workers", type=int, default=1, help="parallel worker processes")
        sp.add_argument("--seed", type=int, help="seed (dataset, solver or sweep master seed)")

    g = sub.add_parser("generate", help="write a synthetic dataset")
    common(g)
    g.add_argument("--n", type=int)
    g.add_argument("--d", type=int)
    g.add_argument("--kappa", type=float)

    s = sub.add_parser("solve", help="run one solver and write its trajectory")
    common(s)
    s.add_argument("--method", default="mbsvrn", choices=[m.value for m in Method if m is not Method.NEWTON])
    s.add_argument("--b", type=int)
    s.add_argument("--h", type=int)
    s.add_argument("--eta", type=float, required=True)
    s.add_argument("--t-max", type=int, dest="t_max")
    s.add_argument("--max-passes", type=float, default=30.0)
    s.add_argument("--max-outer", type=int, default=1000)
    s.add_argument("--no-halt", action="store_true", help="ignore the rate-based halting rule")

    w = sub.add_parser("sweep", help="run a tuning sweep")
    common(w)
    w.add_argument("--runs", type=int, help="runs per configuration")
    w.add_argument("--pass-budget", type=float)

    r = sub.add_parser("report", help="turn results.csv into plot-data files")
    r.add_argument("results", help="results.csv written by sweep")
    r.add_argument("--out", help="output directory (default: next to results)")
    return p


def _apply_overrides(cfg: ExperimentConfig, args: argparse.Namespace) -> ExperimentConfig:
    if getattr(args, "mu", None) is not None:
        if not args.mu > 0:
            raise UsageError("--mu must be positive")
        cfg.mu = args.mu
    if getattr(args, "out", None):
        cfg.output_dir = Path(args.out)
    return cfg


def main(argv: Optional[Sequence[str]] = None) -> int:
    try:
        args = _parser().parse_args(argv)
    except SystemExit as exc:
        return EXIT_USAGE if exc.code not in (0, None) else EXIT_OK
    try:
        if args.command == "report":
            results = Path(args.results)
            out = Path(args.out) if args.out else results.parent / "report"
            _setup_logging(out)
            print(cmd_report(results, out))
            return EXIT_OK

        cfg = _apply_overrides(load_config(args.config), args)
        _setup_logging(cfg.output_dir)
        if args.command == "generate":
            for key in ("n", "d", "kappa"):
                if getattr(args, key) is not None:
                    if cfg.dataset["source"] != "generate":
                        raise UsageError(f"--{key} only applies to generated datasets")
                    cfg.dataset[key] = getattr(args, key)
            if args.seed is not None:
                cfg.dataset["seed"] = args.seed
            print(cmd_generate(cfg, cfg.output_dir))
        elif args.command == "solve":
            solver_args = dict(method=args.method, b=args.b, h=args.h, eta=args.eta,
                               t_max=args.t_max, seed=args.seed or 0,
                               max_passes=args.max_passes, max_outer=args.max_outer)
            print(cmd_solve(cfg, cfg.output_dir, solver_args, halt=not args.no_halt))
        elif args.command == "sweep":
            overrides = {}
            if args.seed is not None:
                overrides["master_seed"] = args.seed
            if args.runs is not None:
                overrides["runs_per_config"] = args.runs
            if args.pass_budget is not None:
                overrides["pass_budget"] = args.pass_budget
            if overrides:
                cfg.sweep = SweepSpec(**{**cfg.sweep.__dict__, **overrides})
            print(cmd_sweep(cfg, cfg.output_dir, workers=args.workers))
        return EXIT_OK
    except UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (DataError, OSError) as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except (NotPositiveDefiniteError, ConvergenceError, FloatingPointError,
            np.linalg.LinAlgError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC


if __name__ == "__main__":
    sys.exit(main())
