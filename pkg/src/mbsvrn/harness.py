"""Convergence-rate-per-data-pass measurement, tuning sweeps and robustness curves.

Measurement protocol
--------------------
Within an outer iteration the solver has spent one full gradient plus ``2b``
component gradients per inner step, so after ``t`` steps it has used
``w = 1 + 2bt/n`` data passes. At a probe the rate per pass is

    rho = ((f(x_t) - f*) / (f(x_snapshot) - f*)) ** (1 / w)

measured against the most recent snapshot. A run halts once rho has risen
at two consecutive probes or exceeds 1, and reports the smallest rho seen.
"""

from __future__ import annotations

import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Iterable, Iterator, NamedTuple, Optional, Sequence, Union

import numpy as np

from mbsvrn.objective import Objective
from mbsvrn.oracles import (
    AlphaReport,
    identity_estimate,
    measure_alpha,
    subsampled_hessian_oracle,
)
from mbsvrn.solvers import Method, SolverConfig, Status, run

__all__ = [
    "RateRecord",
    "HaltDecision",
    "RateProbe",
    "SweepSpec",
    "RunKey",
    "RunResult",
    "TunedResult",
    "data_passes",
    "rate_per_pass",
    "probe_policy",
    "halting_monitor",
    "derive_seed",
    "t_max_grid",
    "iter_run_keys",
    "run_single",
    "execute_runs",
    "measure_alpha_for_h",
    "summarize",
    "tune_config",
    "robustness_curve",
    "DEFAULT_ETA_GRID",
]

DEFAULT_ETA_GRID = tuple(2.0**k for k in range(-10, 2))
DEFAULT_T_MAX_MULTIPLIERS = (0.25, 0.5, 1.0, 2.0, 4.0)
# spawn-key tag separating alpha-measurement streams from run streams
_ALPHA_STREAM = 0xA1FA


def data_passes(counter: int, n: int) -> float:
    """Component-gradient evaluations expressed in passes over the data."""
    if counter < 0:
        raise ValueError("counter must be non-negative")
    return counter / n


def rate_per_pass(err_t: float, err_snapshot: float, w: float) -> float:
    if not err_snapshot > 0:
        raise ValueError(f"snapshot error must be positive, got {err_snapshot}")
    if err_t < 0 or not w > 0:
        raise ValueError("need err_t >= 0 and w > 0")
    if err_t == 0:
        return 0.0
    return (err_t / err_snapshot) ** (1.0 / w)


def probe_policy(b: int, n: int) -> int:
    """Inner iterations between rate probes: 200, or ``n/(2b)`` when that is smaller."""
    if not 1 <= b <= n:
        raise ValueError(f"b={b} outside [1, {n}]")
    return min(200, max(1, n // (2 * b)))


@dataclass(frozen=True)
class RateRecord:
    w: float
    rho: float
    t: int
    s: int
    error: float


class HaltDecision(NamedTuple):
    halt: bool
    rho_min: float


def halting_monitor(history: Sequence[Union[float, RateRecord]]) -> HaltDecision:
    """Apply the stopping rule to the rho values probed so far.

    Halts when the latest rho exceeds 1 or when rho increased at each of the
    last two probes. ``rho_min`` is the smallest value in ``history``.
    """
    rhos = [r.rho if isinstance(r, RateRecord) else float(r) for r in history]
    if not rhos:
        return HaltDecision(False, math.inf)
    rho_min = min(rhos)
    if rhos[-1] > 1.0:
        return HaltDecision(True, rho_min)
    if len(rhos) >= 3 and rhos[-1] > rhos[-2] > rhos[-3]:
        return HaltDecision(True, rho_min)
    return HaltDecision(False, rho_min)


class RateProbe:
    """Solver probe computing rho at each inner probe and applying the halting rule.

    ``error_floor`` stops the run as converged once ``f - f*`` is too small to
    give a meaningful ratio.
    """

    def __init__(self, n: int, f_star: float, error_floor: Optional[float] = None):
        self.n = n
        self.f_star = float(f_star)
        self.error_floor = 1e-12 * max(1.0, abs(self.f_star)) if error_floor is None else error_floor
        self.records: list[RateRecord] = []
        self.snapshot_error = math.nan
        self._base = 0

    def __call__(self, t: int, s: int, counter: int, fval: float) -> Optional[Status]:
        err = fval - self.f_star
        if t == 0:
            self._base = counter - self.n
            self.snapshot_error = err
            return Status.CONVERGED if err <= self.error_floor else None
        if err <= self.error_floor:
            return Status.CONVERGED
        w = data_passes(counter - self._base, self.n)
        self.records.append(RateRecord(w, rate_per_pass(err, self.snapshot_error, w), t, s, err))
        return Status.HALTED if halting_monitor(self.records).halt else None

    @property
    def rhos(self) -> list[float]:
        return [r.rho for r in self.records]

    @property
    def rho_min(self) -> float:
        """Smallest probed rho, capped at 1 (1 when nothing was probed)."""
        return min([1.0] + self.rhos)


@dataclass(frozen=True)
class SweepSpec:
    method: Method = Method.MBSVRN
    b_grid: tuple[int, ...] = (1,)
    h_grid: tuple[int, ...] = (0,)
    eta_grid: tuple[float, ...] = DEFAULT_ETA_GRID
    t_max_multipliers: tuple[float, ...] = DEFAULT_T_MAX_MULTIPLIERS
    runs_per_config: int = 10
    pass_budget: float = 30.0
    master_seed: int = 0
    max_outer: int = 1000

    def __post_init__(self):
        object.__setattr__(self, "method", Method(self.method))
        for name in ("b_grid", "h_grid", "eta_grid", "t_max_multipliers"):
            values = tuple(getattr(self, name))
            if not values:
                raise ValueError(f"{name} must be non-empty")
            object.__setattr__(self, name, values)
        if self.runs_per_config < 1:
            raise ValueError("runs_per_config must be >= 1")
        if not self.pass_budget > 0:
            raise ValueError("pass_budget must be positive")
        if any(not e > 0 for e in self.eta_grid):
            raise ValueError("step sizes must be positive")
        if self.method in (Method.SVRG, Method.GD) and set(self.h_grid) != {0}:
            raise ValueError(f"{self.method.value} sweeps need h_grid = (0,)")
        if self.method is Method.NEWTON:
            raise ValueError("newton is not a sweepable method")

    def cells(self, n: int) -> list[tuple[int, int]]:
        """``(h, b)`` pairs; methods with a forced batch use ``b = n``."""
        if self.method in (Method.SN, Method.GD):
            return [(h, n) for h in self.h_grid]
        return [(h, b) for h in self.h_grid for b in self.b_grid]


def t_max_grid(spec: SweepSpec, n: int, b: int) -> list[int]:
    if spec.method in (Method.SN, Method.GD):
        return [1]
    values = sorted({max(1, math.ceil(m * n / b)) for m in spec.t_max_multipliers})
    return values


class RunKey(NamedTuple):
    h: int
    b: int
    eta_index: int
    tmax_index: int
    run: int


def derive_seed(master_seed: int, key: Sequence[int]) -> int:
    """64-bit seed from ``master_seed`` and a key, independent of scheduling."""
    ss = np.random.SeedSequence(int(master_seed), spawn_key=tuple(int(k) for k in key))
    return int(ss.generate_state(1, dtype=np.uint64)[0])


def iter_run_keys(spec: SweepSpec, n: int) -> Iterator[RunKey]:
    for h, b in spec.cells(n):
        for ei in range(len(spec.eta_grid)):
            for ti in range(len(t_max_grid(spec, n, b))):
                for r in range(spec.runs_per_config):
                    yield RunKey(h, b, ei, ti, r)


@dataclass
class RunResult:
    key: RunKey
    eta: float
    t_max: int
    seed: int
    rho_min: float
    passes_used: float
    status: str
    rhos: list[float] = field(default_factory=list)
    error: Optional[str] = None


def run_single(
    obj: Objective,
    f_star: float,
    spec: SweepSpec,
    key: RunKey,
) -> RunResult:
    """One seeded, monitored run for a single sweep key; failures are captured."""
    n = obj.n
    eta = spec.eta_grid[key.eta_index]
    t_max = t_max_grid(spec, n, key.b)[key.tmax_index]
    seed = derive_seed(spec.master_seed, key)
    cfg = SolverConfig(
        method=spec.method,
        b=key.b,
        h=key.h,
        eta=eta,
        t_max=t_max,
        max_outer=spec.max_outer,
        max_passes=spec.pass_budget,
        seed=seed,
        probe_every=probe_policy(key.b, n),
    )
    probe = RateProbe(n, f_star)
    try:
        traj = run(obj, cfg, probe)
    except Exception as exc:  # recorded per run; a sweep never aborts
        return RunResult(key, eta, t_max, seed, 1.0, math.nan, "failed", probe.rhos,
                         f"{type(exc).__name__}: {exc}")
    status = "diverged" if traj.status is Status.DIVERGED else "ok"
    return RunResult(key, eta, t_max, seed, probe.rho_min, data_passes(traj.counter, n),
                     status, probe.rhos)


_WORKER: dict = {}


def _worker_init(features, labels, mu, f_star, spec):
    from mbsvrn.dataset import Dataset

    _WORKER["obj"] = Objective(Dataset(features, labels), mu)
    _WORKER["f_star"] = f_star
    _WORKER["spec"] = spec


def _worker_run(key: RunKey) -> RunResult:
    return run_single(_WORKER["obj"], _WORKER["f_star"], _WORKER["spec"], RunKey(*key))


def execute_runs(
    obj: Objective,
    f_star: float,
    spec: SweepSpec,
    keys: Iterable[RunKey],
    workers: int = 1,
) -> Iterator[RunResult]:
    """Yield results in the order of ``keys``; ``workers > 1`` uses a process pool."""
    keys = list(keys)
    if workers <= 1 or len(keys) <= 1:
        for key in keys:
            yield run_single(obj, f_star, spec, key)
        return
    if type(obj) is not Objective:
        raise TypeError("parallel execution supports the logistic Objective only")
    workers = min(workers, os.cpu_count() or 1, len(keys))
    with ProcessPoolExecutor(
        max_workers=workers,
        initializer=_worker_init,
        initargs=(obj.data.features, obj.data.labels, obj.mu, f_star, spec),
    ) as pool:
        yield from pool.map(_worker_run, keys, chunksize=max(1, len(keys) // (8 * workers)))


def measure_alpha_for_h(obj: Objective, x_star: np.ndarray, h: int, master_seed: int) -> AlphaReport:
    """Alpha of one seeded size-``h`` Hessian sample at ``x*`` (identity when ``h = 0``)."""
    if h == 0:
        return measure_alpha(obj, identity_estimate(obj.d, x_star))
    rng = np.random.default_rng(derive_seed(master_seed, (_ALPHA_STREAM, h)))
    return measure_alpha(obj, subsampled_hessian_oracle(obj, rng, h, x_star))


@dataclass
class TunedResult:
    h: int
    b: int
    best_rho: float
    best_eta: float
    best_t_max: int
    per_run_rhos: list[float]
    measured_alpha: float = math.nan
    all_diverged: bool = False
    method: Method = Method.MBSVRN
    scores: dict = field(default_factory=dict, repr=False)

    @property
    def std_rho(self) -> float:
        return float(np.std(self.per_run_rhos)) if self.per_run_rhos else math.nan


def _score_table(results: Iterable[RunResult]) -> dict:
    table: dict = {}
    for r in results:
        table.setdefault((r.key.h, r.key.b), {}).setdefault((r.eta, r.t_max), []).append(r)
    return table


def summarize(
    results: Iterable[RunResult],
    method: Method = Method.MBSVRN,
    alphas: Optional[dict] = None,
) -> dict:
    """Tuned result per ``(h, b)``: the mean-rho-minimizing ``(eta, t_max)``.

    Ties go to the smaller ``eta``, then the smaller ``t_max``.
    """
    alphas = alphas or {}
    tuned = {}
    for (h, b), configs in sorted(_score_table(results).items()):
        scores = {}
        for (eta, t_max), runs in configs.items():
            runs = sorted(runs, key=lambda r: r.key.run)
            scores[(eta, t_max)] = (float(np.mean([r.rho_min for r in runs])), [r.rho_min for r in runs])
        (eta, t_max) = min(scores, key=lambda k: (scores[k][0], k[0], k[1]))
        best, per_run = scores[(eta, t_max)]
        tuned[(h, b)] = TunedResult(
            h, b, best, eta, t_max, per_run,
            measured_alpha=alphas.get(h, math.nan),
            all_diverged=all(v[0] >= 1.0 for v in scores.values()),
            method=Method(method),
            scores={k: v[0] for k, v in scores.items()},
        )
    return tuned


def tune_config(
    obj: Objective,
    h: int,
    b: int,
    spec: SweepSpec,
    f_star: float,
    x_star: Optional[np.ndarray] = None,
    workers: int = 1,
) -> TunedResult:
    """Tune ``(eta, t_max)`` for one ``(h, b)`` cell by mean rho over seeded runs."""
    if spec.method in (Method.SN, Method.GD):
        b = obj.n
    cell_spec = SweepSpec(**{**spec.__dict__, "h_grid": (h,), "b_grid": (b,)})
    keys = [k for k in iter_run_keys(cell_spec, obj.n)]
    results = list(execute_runs(obj, f_star, cell_spec, keys, workers))
    alphas = {}
    if x_star is not None:
        alphas[h] = measure_alpha_for_h(obj, x_star, h, spec.master_seed).alpha
    return summarize(results, spec.method, alphas)[(h, b)]


def robustness_curve(
    obj: Objective,
    spec: SweepSpec,
    f_star: float,
    x_star: Optional[np.ndarray] = None,
    workers: int = 1,
    on_result: Optional[Callable[[RunResult], None]] = None,
) -> dict:
    """Tuned rho for every ``(h, b)`` cell of the sweep, with alpha per ``h``."""
    results = []
    for r in execute_runs(obj, f_star, spec, iter_run_keys(spec, obj.n), workers):
        results.append(r)
        if on_result is not None:
            on_result(r)
    alphas = {}
    if x_star is not None:
        alphas = {h: measure_alpha_for_h(obj, x_star, h, spec.master_seed).alpha
                  for h in sorted(set(spec.h_grid))}
    return summarize(results, spec.method, alphas)
