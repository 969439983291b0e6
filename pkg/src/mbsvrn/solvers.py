"""Mb-SVRN and its limiting cases (SVRG, Subsampled Newton, GD), plus a Newton reference solver."""

from __future__ import annotations

import enum
import math
import time
from dataclasses import dataclass, field, replace
from typing import Callable, NamedTuple, Optional

import numpy as np

from mbsvrn.errors import ConvergenceError
from mbsvrn.linalg import factorize, solve
from mbsvrn.objective import Objective
from mbsvrn.oracles import (
    EvalCounter,
    HessianEstimate,
    full_batch,
    minibatch_gradient,
    sample_gradient_batch,
    subsampled_hessian_oracle,
    variance_reduced_gradient,
)

__all__ = [
    "Method",
    "Status",
    "SolverConfig",
    "SolverState",
    "ProbeRecord",
    "Trajectory",
    "Probe",
    "run",
    "run_mb_svrn",
    "run_svrg",
    "run_subsampled_newton",
    "run_gd",
    "ReferenceSolution",
    "solve_reference",
    "neighborhood_check",
    "global_step_size",
]

# f(x) above this multiple of f(x0) counts as divergence
DIVERGENCE_FACTOR = 1e10


class Method(str, enum.Enum):
    MBSVRN = "mbsvrn"
    SVRG = "svrg"
    SN = "sn"
    GD = "gd"
    NEWTON = "newton"


class Status(str, enum.Enum):
    BUDGET_EXHAUSTED = "budget_exhausted"
    CONVERGED = "converged"
    DIVERGED = "diverged"
    HALTED = "halted_by_rate_rule"


# probe(t, s, counter, f(x)) -> None to continue, or a Status to stop with
Probe = Callable[[int, int, int, float], Optional[Status]]


@dataclass(frozen=True)
class SolverConfig:
    """Knobs of one solver run.

    ``h = 0`` selects the identity Hessian, ``h = n`` the exact one. ``b = n``
    uses the full index set, each component once, instead of sampling.
    ``probe_every = 0`` probes only at outer-iteration boundaries.
    """

    method: Method = Method.MBSVRN
    b: int = 1
    h: int = 0
    eta: float = 1.0
    t_max: int = 1
    max_outer: int = 1000
    max_passes: float = math.inf
    seed: int = 0
    x0: Optional[np.ndarray] = field(default=None, compare=False)
    probe_every: int = 0

    def validate(self, n: int) -> "SolverConfig":
        method = Method(self.method)
        if not 1 <= self.b <= n:
            raise ValueError(f"b={self.b} outside [1, {n}]")
        if not 0 <= self.h <= n:
            raise ValueError(f"h={self.h} outside [0, {n}]")
        if not (self.eta > 0 and math.isfinite(self.eta)):
            raise ValueError(f"eta must be positive, got {self.eta}")
        if self.t_max < 1:
            raise ValueError(f"t_max must be >= 1, got {self.t_max}")
        if self.max_outer < 1 or not self.max_passes > 0:
            raise ValueError("max_outer and max_passes must be positive")
        if self.probe_every < 0:
            raise ValueError("probe_every must be >= 0")
        if method in (Method.SVRG, Method.GD) and self.h != 0:
            raise ValueError(f"{method.value} requires h = 0")
        if method in (Method.SN, Method.GD) and (self.b != n or self.t_max != 1):
            raise ValueError(f"{method.value} requires b = n and t_max = 1")
        if method is Method.SN and self.h == 0:
            raise ValueError("sn requires h >= 1 (h = 0 is gd)")
        if method is Method.NEWTON:
            raise ValueError("use solve_reference for the exact Newton solver")
        return replace(self, method=method)


@dataclass
class SolverState:
    s: int
    snapshot: np.ndarray
    snapshot_grad: np.ndarray
    hessian: Optional[HessianEstimate]
    t: int
    x: np.ndarray
    counter: EvalCounter
    rng: np.random.Generator
    factorizations: int = 0


class ProbeRecord(NamedTuple):
    s: int
    t: int
    counter: int
    fval: float
    elapsed: float

    def key(self) -> tuple:
        return (self.s, self.t, self.counter, self.fval)


@dataclass
class Trajectory:
    records: list[ProbeRecord]
    status: Status
    x_final: np.ndarray
    counter: int
    factorizations: int
    state: Optional[SolverState] = field(default=None, repr=False)

    def snapshot_values(self) -> list[float]:
        """f at every snapshot, in outer-iteration order."""
        return [r.fval for r in self.records if r.t == 0]

    def same_path(self, other: "Trajectory") -> bool:
        """Bitwise comparison, ignoring wall-clock time."""
        return (
            self.status == other.status
            and self.counter == other.counter
            and [r.key() for r in self.records] == [r.key() for r in other.records]
            and self.x_final.tobytes() == other.x_final.tobytes()
        )


def _run(obj: Objective, cfg: SolverConfig, probe: Optional[Probe]) -> Trajectory:
    n, d = obj.n, obj.d
    cfg = cfg.validate(n)
    rng = np.random.default_rng(cfg.seed)
    counter = EvalCounter()
    x0 = np.zeros(d) if cfg.x0 is None else np.array(cfg.x0, dtype=np.float64)
    if x0.shape != (d,):
        raise ValueError(f"x0 has shape {x0.shape}, expected ({d},)")
    budget = cfg.max_passes * n
    f_limit = DIVERGENCE_FACTOR * abs(obj.value(x0))
    records: list[ProbeRecord] = []
    start = time.perf_counter()

    state = SolverState(0, x0, np.zeros(d), None, 0, x0, counter, rng)

    def emit(t: int, s: int, x: np.ndarray) -> Optional[Status]:
        fval = obj.value(x) if np.all(np.isfinite(x)) else math.nan
        records.append(ProbeRecord(s, t, counter.count, fval, time.perf_counter() - start))
        if not math.isfinite(fval) or fval > f_limit:
            return Status.DIVERGED
        return probe(t, s, counter.count, fval) if probe is not None else None

    status: Optional[Status] = None
    x_tilde = x0
    x = x0
    for s in range(cfg.max_outer):
        state.s, state.snapshot, state.t = s, x_tilde, 0
        if cfg.h == 0:
            hess = None
        else:
            hess = subsampled_hessian_oracle(obj, rng, cfg.h, x_tilde)
            state.factorizations += 1
        state.hessian = hess
        g_s = minibatch_gradient(obj, full_batch(n), x_tilde, counter)
        state.snapshot_grad = g_s
        status = emit(0, s, x_tilde)
        if status is not None:
            break

        x = x_tilde
        for t in range(1, cfg.t_max + 1):
            batch = full_batch(n) if cfg.b == n else sample_gradient_batch(rng, n, cfg.b)
            g_bar = variance_reduced_gradient(obj, batch, x, x_tilde, g_s, counter)
            step = g_bar if hess is None else solve(hess.factorization, g_bar)
            x = x - cfg.eta * step
            state.t, state.x = t, x
            out_of_budget = counter.count >= budget
            if not np.all(np.isfinite(x)):
                emit(t, s, x)
                status = Status.DIVERGED
                break
            if t == cfg.t_max or out_of_budget or (cfg.probe_every and t % cfg.probe_every == 0):
                status = emit(t, s, x)
                if status is not None:
                    break
            if out_of_budget:
                status = Status.BUDGET_EXHAUSTED
                break
        if status is not None:
            break
        x_tilde = x
    else:
        status = Status.BUDGET_EXHAUSTED

    return Trajectory(records, status, np.array(x), counter.count, state.factorizations, state)


def run(obj: Objective, cfg: SolverConfig, probe: Optional[Probe] = None) -> Trajectory:
    """Run whichever method ``cfg.method`` names."""
    return _run(obj, cfg, probe)


def run_mb_svrn(obj: Objective, cfg: SolverConfig, probe: Optional[Probe] = None) -> Trajectory:
    """Mini-batch stochastic variance-reduced Newton.

    Each outer iteration draws a Hessian estimate at the snapshot and
    factorizes it once, takes one full gradient, then runs ``t_max`` inner
    steps ``x <- x - eta * H^{-1} (g_hat(x) - g_hat(snapshot) + g(snapshot))``
    with a fresh batch of ``b`` indices per step.
    """
    if Method(cfg.method) is not Method.MBSVRN:
        raise ValueError(f"run_mb_svrn needs method mbsvrn, got {cfg.method}")
    return _run(obj, cfg, probe)


def run_svrg(obj: Objective, cfg: SolverConfig, probe: Optional[Probe] = None) -> Trajectory:
    """SVRG: the same loop with the identity in place of the Hessian estimate."""
    if Method(cfg.method) is not Method.SVRG:
        raise ValueError(f"run_svrg needs method svrg, got {cfg.method}")
    return _run(obj, cfg, probe)


def run_subsampled_newton(
    obj: Objective, cfg: SolverConfig, probe: Optional[Probe] = None
) -> Trajectory:
    """Subsampled Newton with full gradients (``b = n``, ``t_max = 1``)."""
    if Method(cfg.method) is not Method.SN:
        raise ValueError(f"run_subsampled_newton needs method sn, got {cfg.method}")
    return _run(obj, cfg, probe)


def run_gd(obj: Objective, cfg: SolverConfig, probe: Optional[Probe] = None) -> Trajectory:
    if Method(cfg.method) is not Method.GD:
        raise ValueError(f"run_gd needs method gd, got {cfg.method}")
    return _run(obj, cfg, probe)


class ReferenceSolution(NamedTuple):
    x: np.ndarray
    f: float
    iterations: int
    grad_norm: float


def solve_reference(
    obj: Objective,
    tol: float = 1e-12,
    max_iter: int = 200,
    x0: Optional[np.ndarray] = None,
) -> ReferenceSolution:
    """Damped Newton with Armijo backtracking until ``||grad f|| <= tol``."""
    if obj.mu <= 0:
        raise ValueError("strong convexity required (mu > 0)")
    x = np.zeros(obj.d) if x0 is None else np.array(x0, dtype=np.float64)
    fx = obj.value(x)
    for it in range(max_iter + 1):
        g = obj.full_gradient(x)
        gnorm = float(np.linalg.norm(g))
        if gnorm <= tol:
            return ReferenceSolution(x, fx, it, gnorm)
        if it == max_iter:
            break
        p = solve(factorize(obj.full_hessian(x)), g)
        slope = float(g @ p)
        step = 1.0
        while True:
            x_new = x - step * p
            f_new = obj.value(x_new)
            if f_new <= fx - 1e-4 * step * slope:
                break
            step *= 0.5
            if step < 2.0**-40:
                # f differences are below rounding; the unit Newton step is
                # then safe since we are inside the quadratic region
                x_new = x - p
                f_new = obj.value(x_new)
                break
        x, fx = x_new, f_new
    raise ConvergenceError(f"Newton did not reach ||grad|| <= {tol} in {max_iter} iterations")


def neighborhood_check(
    obj: Objective, x: np.ndarray, x_star: np.ndarray, L: float, eps0_eta: float
) -> bool:
    """Whether ``||x - x*||_H^2 < mu^{3/2} / L * eps0_eta`` with ``H`` the Hessian at ``x*``."""
    diff = np.asarray(x, dtype=np.float64) - x_star
    H = obj.full_hessian(x_star)
    return float(diff @ H @ diff) < obj.mu**1.5 / L * eps0_eta


def global_step_size(kappa: float, alpha: float, b: int) -> float:
    """``min(2 / (kappa sqrt(alpha)), b / (8 kappa^3 alpha^{3/2}))``: the global-convergence step."""
    return min(2.0 / (kappa * math.sqrt(alpha)), b / (8.0 * kappa**3 * alpha**1.5))
