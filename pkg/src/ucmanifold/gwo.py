"""Enhanced grey wolf optimizer for unit commitment.

Commitment bits evolve with the binary (sigmoid) variant, dispatch with the
continuous update.  Priority-list repair keeps candidates feasible with
respect to capacity adequacy, minimum up/down times, generation bounds and
ramp limits.  Leaders are ranked by total constraint violation first and by
quantile dominance of their DS-valued fitness second.
"""

from __future__ import annotations

import logging
import time
from dataclasses import dataclass, field

import numpy as np

from .ds import quantile_dominates, to_pbox
from .errors import InfeasibleCaseError, InvalidInputError
from .model import EvaluatedSolution, Schedule, UCProblem

log = logging.getLogger(__name__)

DECAY_MODES = ("exponential", "linear")
_TCV_DIGITS = 9
_DISPATCH_TOL = 1e-9
_MAX_DISPATCH_PASSES = 20


@dataclass(frozen=True)
class OptimizerConfig:
    population: int = 100
    iterations: int = 500
    seed: int = 0
    decay: str = "exponential"
    init_optimization: bool = True
    repair: bool = True

    def __post_init__(self):
        if self.population < 4:
            raise InvalidInputError("population must hold at least 4 wolves")
        if self.iterations < 1:
            raise InvalidInputError("iterations must be >= 1")
        if self.decay not in DECAY_MODES:
            raise InvalidInputError(f"decay must be one of {DECAY_MODES}")
        if not 0 <= int(self.seed) < 2**64:
            raise InvalidInputError("seed must be an unsigned 64-bit integer")

    @classmethod
    def ablation(cls, scenario: int, **kw) -> "OptimizerConfig":
        """Settings of the three compared variants.

        1: plain GWO (random start, linear decay, no repair);
        2: plain GWO with a priority-list repaired initial population;
        3: the enhanced algorithm (repaired start, repair every iteration,
           exponential decay).
        """
        presets = {
            1: dict(decay="linear", init_optimization=False, repair=False),
            2: dict(decay="linear", init_optimization=True, repair=False),
            3: dict(decay="exponential", init_optimization=True, repair=True),
        }
        if scenario not in presets:
            raise InvalidInputError("ablation scenario must be 1, 2 or 3")
        return cls(**{**presets[scenario], **kw})


def wolf_rng(seed: int, iteration: int, index: int) -> np.random.Generator:
    """Independent stream per (seed, iteration, wolf); evaluation order does not matter."""
    return np.random.default_rng([int(seed), int(iteration), int(index)])


def decay_parameter(iteration: float, max_iter: float, mode: str = "exponential") -> float:
    if max_iter <= 0 or not 0 <= iteration <= max_iter:
        raise InvalidInputError("need 0 <= iteration <= max_iter and max_iter > 0")
    r = iteration / max_iter
    if mode == "exponential":
        return 2.0 * (1.0 - r * r)
    if mode == "linear":
        return 2.0 - 2.0 * r
    raise InvalidInputError(f"unknown decay mode {mode!r}")


def _consensus(x: np.ndarray, leaders, a: float, rng: np.random.Generator) -> np.ndarray:
    total = np.zeros_like(x, dtype=float)
    for lead in leaders:
        r1 = rng.random(x.shape)
        r2 = rng.random(x.shape)
        A = 2.0 * a * r1 - a
        C = 2.0 * r2
        D = np.abs(C * lead - x)
        total += lead - A * D
    return total / 3.0


def gwo_update_continuous(x, leaders, a: float, rng: np.random.Generator,
                          lower=None, upper=None) -> np.ndarray:
    """Average of the three leader-guided moves, clamped to ``[lower, upper]``."""
    x = np.asarray(x, float)
    leaders = [np.asarray(l, float) for l in leaders]
    if len(leaders) != 3:
        raise InvalidInputError("exactly three leaders required")
    out = _consensus(x, leaders, a, rng)
    if lower is not None or upper is not None:
        out = np.clip(out, lower, upper)
    return out


def sigmoid(x):
    return 1.0 / (1.0 + np.exp(-10.0 * (np.asarray(x, float) - 0.5)))


def bgwo_update_binary(bits, leaders, a: float, rng: np.random.Generator) -> np.ndarray:
    """Leader consensus on 0/1 positions mapped through the sigmoid, then thresholded."""
    bits = np.asarray(bits, float)
    leaders = [np.asarray(l, float) for l in leaders]
    if len(leaders) != 3:
        raise InvalidInputError("exactly three leaders required")
    s = sigmoid(_consensus(bits, leaders, a, rng))
    return (s > rng.random(bits.shape)).astype(np.int8)


def priority_coefficients(units):
    """Full-load average cost per unit and the ascending / descending priority lists."""
    lam = []
    for g in units:
        if g.umax <= 0:
            raise InvalidInputError(f"unit {g.id}: Umax must be positive")
        lam.append(g.a * g.umax + g.b + g.c / g.umax)
    lam = np.array(lam)
    ids = [str(g.id) for g in units]
    pl = sorted(range(len(units)), key=lambda i: (lam[i], ids[i]))
    dpl = sorted(range(len(units)), key=lambda i: (-lam[i], ids[i]))
    return lam, pl, dpl


# ---------------------------------------------------------------------------
# repair


def _runs_entering(unit, col: np.ndarray, t: int):
    """(on-duration, off-duration, previous bit) entering hour ``t`` for one unit."""
    on = max(unit.init_status, 0)
    off = max(-unit.init_status, 0)
    for v in col[:t]:
        if v:
            on, off = on + 1, 0
        else:
            on, off = 0, off + 1
    prev = int(col[t - 1]) if t > 0 else int(unit.initially_on)
    return on, off, prev


def repair_commitment(u, units, target, pl, dpl) -> np.ndarray:
    """Make a commitment matrix adequate and consistent with minimum up/down times.

    Hours are processed in order.  At each hour the minimum up/down rule
    forces states (a start-up too soon after a shut-down is cancelled, a
    shut-down too soon after a start-up is postponed).  Capacity is then
    raised to ``target`` with the cheapest units allowed to run; if none is,
    the most recent in-horizon shut-down of the cheapest offline unit is
    cancelled.  Finally surplus units are released in descending-cost order
    while adequacy and the minimum up-time allow.
    """
    u = np.array(u, dtype=np.int8, copy=True)
    T, G = u.shape
    umax = np.array([g.umax for g in units])
    target = np.asarray(target, float)
    if target.shape != (T,):
        raise InvalidInputError("target must hold one value per hour")
    short = np.flatnonzero(target > umax.sum() + _DISPATCH_TOL)
    if short.size:
        t = int(short[0])
        raise InfeasibleCaseError(
            f"hour {t + 1}: requirement {target[t]:.3f} MW exceeds total capacity {umax.sum():.3f} MW", t)

    on = np.array([max(g.init_status, 0) for g in units])
    off = np.array([max(-g.init_status, 0) for g in units])
    prev = np.array([1 if g.initially_on else 0 for g in units], dtype=np.int8)
    for t in range(T):
        row = u[t]
        for i, g in enumerate(units):
            if row[i] and not prev[i] and off[i] < g.mdt:
                row[i] = 0
            elif not row[i] and prev[i] and on[i] < g.mut:
                row[i] = 1
        cap = float(row @ umax)
        while cap < target[t] - _DISPATCH_TOL:
            pick = None
            for i in pl:
                if not row[i] and (prev[i] or off[i] >= units[i].mdt):
                    pick = i
                    break
            if pick is not None:
                row[pick] = 1
                cap += umax[pick]
                continue
            for i in pl:
                if row[i]:
                    continue
                t0 = t - off[i]  # first hour of the current off-run
                if t0 >= 1 or (t0 == 0 and units[i].initially_on):
                    pick = i
                    break
            if pick is None:
                raise InfeasibleCaseError(
                    f"hour {t + 1}: minimum up/down limits leave committed capacity "
                    f"{cap:.3f} MW below the requirement {target[t]:.3f} MW", t)
            u[t - off[pick]:t + 1, pick] = 1
            on[pick], off[pick], prev[pick] = _runs_entering(units[pick], u[:, pick], t)
            cap += umax[pick]
        for i in dpl:
            if not row[i] or cap - umax[i] < target[t] - _DISPATCH_TOL:
                continue
            if prev[i] and on[i] < units[i].mut:
                continue
            row[i] = 0
            cap -= umax[i]
        on = np.where(row == 1, on + 1, 0)
        off = np.where(row == 0, off + 1, 0)
        prev = row.copy()
    return u


def _dispatch_hour(p, u, lmin, umax, target, pl, dpl, rng):
    """Move one hour's dispatch toward ``target`` (in place); returns the residual."""
    dp = target - p.sum()
    passes = 0
    while dp > _DISPATCH_TOL and passes < _MAX_DISPATCH_PASSES:
        passes += 1
        moved = False
        for a in pl:
            if not u[a]:
                continue
            head = umax[a] - p[a]
            if head <= 0:
                continue
            if head >= dp:
                p[a] += dp
                dp = 0.0
                moved = True
                break
            p[a] += rng.random() * head
            moved = True
            dp = target - p.sum()
        if not moved:
            break
        dp = target - p.sum()
    if dp < -_DISPATCH_TOL:
        for b in dpl:
            if not u[b]:
                continue
            dec = min(p[b] - lmin[b], -dp)
            if dec > 0:
                p[b] -= dec
                dp += dec
            if dp >= -_DISPATCH_TOL:
                break
    return target - p.sum()


def _ramp_room(p, u, t, j, units, lmin, umax, up: bool) -> float:
    T = p.shape[0]
    g = units[j]
    if up:
        room = umax[j] - p[t, j]
        if t > 0 and u[t - 1, j]:
            room = min(room, p[t - 1, j] + g.ramp_up - p[t, j])
        if t + 1 < T and u[t + 1, j]:
            room = min(room, p[t + 1, j] + g.ramp_down - p[t, j])
    else:
        room = p[t, j] - lmin[j]
        if t > 0 and u[t - 1, j]:
            room = min(room, p[t, j] - (p[t - 1, j] - g.ramp_down))
        if t + 1 < T and u[t + 1, j]:
            room = min(room, p[t, j] - (p[t + 1, j] - g.ramp_up))
    return max(room, 0.0)


def repair_ramps(p, u, units, pl, dpl) -> np.ndarray:
    """Clip ramp violations unit by unit and redistribute the clipped power."""
    p = np.array(p, float, copy=True)
    T, G = p.shape
    lmin = np.array([g.lmin for g in units])
    umax = np.array([g.umax for g in units])
    for i, g in enumerate(units):
        for t in range(1, T):
            if not (u[t, i] and u[t - 1, i]):
                continue
            d = p[t, i] - p[t - 1, i]
            if d < -g.ramp_down:
                new = p[t - 1, i] - g.ramp_down
                extra = new - p[t, i]  # others must give this back
                p[t, i] = new
                order, up = dpl, False
            elif d > g.ramp_up:
                new = p[t - 1, i] + g.ramp_up
                extra = p[t, i] - new  # others must pick this up
                p[t, i] = new
                order, up = pl, True
            else:
                continue
            for j in order:
                if extra <= 0:
                    break
                if j == i or not u[t, j]:
                    continue
                step = min(extra, _ramp_room(p, u, t, j, units, lmin, umax, up))
                if step > 0:
                    p[t, j] += step if up else -step
                    extra -= step
    return p


def repair_dispatch(schedule: Schedule, problem: UCProblem, pl, dpl, rng,
                    loss_passes: int = 2) -> np.ndarray:
    """Economic-dispatch repair followed by the ramp treatment.

    The dispatch pass targets the net demand at the noise midpoints (load
    minus wind plus the loss at the current dispatch); the loss is
    re-evaluated ``loss_passes`` times.  Whatever cannot be placed remains
    as imbalance.
    """
    u = schedule.u
    lmin, umax = problem.lmin, problem.umax
    p = np.where(u == 1, np.clip(schedule.p, lmin, umax), 0.0)
    for _ in range(loss_passes):
        target = problem.net_demand(p)
        for t in range(problem.T):
            _dispatch_hour(p[t], u[t], lmin, umax, target[t], pl, dpl, rng)
    return repair_ramps(p, u, problem.units, pl, dpl)


# ---------------------------------------------------------------------------
# ranking


def _quantile_matrix(fits):
    """Left/right quantile rows on a shared grid when all fitness DS are equiprobable."""
    n = len(fits[0])
    for f in fits:
        if len(f) != n or not np.allclose(f.mass, 1.0 / n, rtol=0, atol=1e-12):
            return None
    L = np.array([np.sort(f.lo) for f in fits])
    R = np.array([np.sort(f.hi) for f in fits])
    return L, R


def _dominance_matrix(fits) -> np.ndarray:
    """``dom[i, j]`` is True when fitness ``i`` dominates fitness ``j``."""
    m = len(fits)
    q = _quantile_matrix(fits)
    if q is not None:
        L, R = q
        le = np.all(L[:, None, :] <= L[None, :, :], axis=2) & np.all(R[:, None, :] <= R[None, :, :], axis=2)
        lt = np.any(L[:, None, :] < L[None, :, :], axis=2) | np.any(R[:, None, :] < R[None, :, :], axis=2)
        return le & lt
    boxes = [to_pbox(f) for f in fits]
    dom = np.zeros((m, m), bool)
    for i in range(m):
        for j in range(m):
            if i != j:
                dom[i, j] = quantile_dominates(boxes[i], boxes[j])
    return dom


def rank_solutions(sols, count=None) -> list:
    """Indices ordered by TCV, then non-dominated fronts of the fitness, then index."""
    m = len(sols)
    count = m if count is None else count
    tcv = np.round([s.tcv for s in sols], _TCV_DIGITS)
    order = []
    for level in np.unique(tcv):
        group = [i for i in range(m) if tcv[i] == level]
        if len(group) > 1:
            dom = _dominance_matrix([sols[i].fitness for i in group])
            alive = np.ones(len(group), bool)
            while alive.any() and len(order) < count:
                beaten = (dom & alive[:, None]).any(axis=0)
                front = np.flatnonzero(alive & ~beaten)
                order.extend(group[f] for f in front)
                alive[front] = False
        else:
            order.extend(group)
        if len(order) >= count:
            break
    return order[:count]


@dataclass
class LeaderSet:
    alpha: EvaluatedSolution
    beta: EvaluatedSolution
    delta: EvaluatedSolution

    def __iter__(self):
        return iter((self.alpha, self.beta, self.delta))


def select_leaders(population) -> LeaderSet:
    if len(population) < 3:
        raise InvalidInputError("need at least three evaluated wolves")
    idx = rank_solutions(population, 3)
    return LeaderSet(*(population[i] for i in idx))


# ---------------------------------------------------------------------------
# solver


@dataclass(frozen=True)
class ConvergenceRecord:
    iteration: int
    alpha_central: float
    alpha_tcv: float
    wall_ms: float


@dataclass
class SolveResult:
    best: EvaluatedSolution
    log: list
    config: OptimizerConfig
    evaluations: int


def _initial_schedule(problem: UCProblem, cfg: OptimizerConfig, idx: int, pl, dpl, target):
    rng = wolf_rng(cfg.seed, 0, idx)
    u = rng.integers(0, 2, size=(problem.T, problem.G), dtype=np.int8)
    p = rng.uniform(problem.lmin, problem.umax, size=(problem.T, problem.G))
    if cfg.init_optimization:
        u = repair_commitment(u, problem.units, target, pl, dpl)
        p = repair_dispatch(Schedule(u, p), problem, pl, dpl, rng)
    return Schedule(u, p)


def _move(sched: Schedule, leaders: LeaderSet, a, problem, cfg, rng, pl, dpl, target) -> Schedule:
    lead_u = [l.schedule.u for l in leaders]
    lead_p = [l.schedule.p for l in leaders]
    u = bgwo_update_binary(sched.u, lead_u, a, rng)
    p = gwo_update_continuous(sched.p, lead_p, a, rng, 0.0, problem.umax)
    p = np.where(u == 1, np.clip(p, problem.lmin, problem.umax), 0.0)
    if cfg.repair:
        u = repair_commitment(u, problem.units, target, pl, dpl)
        p = repair_dispatch(Schedule(u, p), problem, pl, dpl, rng)
    return Schedule(u, p)


def solve(problem: UCProblem, config: OptimizerConfig, progress=None) -> SolveResult:
    """Run the optimizer; returns the final alpha and the per-iteration log.

    ``progress`` is an optional callback ``f(record)`` invoked after every
    iteration.
    """
    cfg = config
    _, pl, dpl = priority_coefficients(problem.units)
    target = problem.adequacy_target()
    start = time.perf_counter()
    pop = [_initial_schedule(problem, cfg, i, pl, dpl, target) for i in range(cfg.population)]
    evals = [problem.evaluate(s) for s in pop]
    n_eval = len(evals)
    leaders = select_leaders(evals)
    history = [ConvergenceRecord(0, leaders.alpha.fitness_central, leaders.alpha.tcv,
                                 (time.perf_counter() - start) * 1e3)]
    for it in range(1, cfg.iterations + 1):
        a = decay_parameter(it - 1, cfg.iterations, cfg.decay)
        pop = [
            _move(s, leaders, a, problem, cfg, wolf_rng(cfg.seed, it, i), pl, dpl, target)
            for i, s in enumerate(pop)
        ]
        evals = [problem.evaluate(s) for s in pop]
        n_eval += len(evals)
        leaders = select_leaders(list(leaders) + evals)
        rec = ConvergenceRecord(it, leaders.alpha.fitness_central, leaders.alpha.tcv,
                                (time.perf_counter() - start) * 1e3)
        history.append(rec)
        if progress is not None:
            progress(rec)
        log.debug("iter %d alpha central %.6f tcv %.6f", it, rec.alpha_central, rec.alpha_tcv)
    return SolveResult(leaders.alpha, history, cfg, n_eval)


# ---------------------------------------------------------------------------
# generic continuous minimizer (optimizer core without the UC layer)


@dataclass
class MinimizeResult:
    x: np.ndarray
    value: float
    history: list = field(default_factory=list)


def minimize(f, dim: int, lower, upper, population: int = 100, iterations: int = 500,
             seed: int = 0, decay: str = "exponential") -> MinimizeResult:
    """Plain GWO on a box with retained leaders; ``f`` maps a vector to a float."""
    cfg = OptimizerConfig(population=population, iterations=iterations, seed=seed, decay=decay)
    lower = np.broadcast_to(np.asarray(lower, float), (dim,))
    upper = np.broadcast_to(np.asarray(upper, float), (dim,))
    X = np.array([wolf_rng(seed, 0, i).uniform(lower, upper) for i in range(population)])
    vals = np.array([f(x) for x in X])
    order = np.argsort(vals, kind="stable")[:3]
    lead_x, lead_v = X[order].copy(), vals[order].copy()
    history = [float(lead_v[0])]
    for it in range(1, cfg.iterations + 1):
        a = decay_parameter(it - 1, cfg.iterations, cfg.decay)
        for i in range(population):
            X[i] = gwo_update_continuous(X[i], lead_x, a, wolf_rng(seed, it, i), lower, upper)
        vals = np.array([f(x) for x in X])
        allx = np.vstack([lead_x, X])
        allv = np.concatenate([lead_v, vals])
        order = np.argsort(allv, kind="stable")[:3]
        lead_x, lead_v = allx[order].copy(), allv[order].copy()
        history.append(float(lead_v[0]))
    return MinimizeResult(lead_x[0].copy(), float(lead_v[0]), history)


__all__ = [
    "OptimizerConfig", "LeaderSet", "ConvergenceRecord", "SolveResult", "MinimizeResult",
    "decay_parameter", "gwo_update_continuous", "bgwo_update_binary", "sigmoid",
    "priority_coefficients", "repair_commitment", "repair_dispatch", "repair_ramps",
    "rank_solutions", "select_leaders", "solve", "minimize", "wolf_rng",
]
