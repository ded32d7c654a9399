"""Unit-commitment problem: data, costs, constraints and DS-valued evaluation.

A candidate schedule is scored by a DS-valued fitness (operating cost plus a
quadratic penalty on the uncertain power imbalance) and a total constraint
violation (TCV) collecting chance-constraint shortfalls for power balance,
spinning reserve and line limits, plus one unit per violated deterministic
constraint.
"""

from __future__ import annotations

import csv
import json
import logging
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .ds import (
    DEFAULT_RESOLUTION,
    DSStructure,
    UncertainInputSpec,
    encode,
    to_pbox,
    two_sided_lower_probability,
    write_pbox_csv,
)
from .eaa import NoiseVector, QuadraticForm, batch_qf_to_ds, _symbol_elements, _univariate_range
from .errors import CaseParseError, InvalidInputError, PreconditionError
from .network import NetworkCase, build_loss_model, build_ptdf, eval_loss_many

log = logging.getLogger(__name__)

BOUND_TOL = 1e-9


@dataclass(frozen=True)
class UnitSpec:
    id: str
    bus: int  # 0-based bus index
    lmin: float
    umax: float
    mut: int
    mdt: int
    ramp_up: float
    ramp_down: float
    a: float
    b: float
    c: float
    su: float = 0.0
    sd: float = 0.0
    init_status: int = -24  # >0 hours on, <0 hours off
    init_output: float = 0.0

    def __post_init__(self):
        if not 0 <= self.lmin <= self.umax or self.umax <= 0:
            raise InvalidInputError(f"unit {self.id}: need 0 <= Lmin <= Umax, Umax > 0")
        if self.mut < 1 or self.mdt < 1:
            raise InvalidInputError(f"unit {self.id}: MUT and MDT must be >= 1")
        if self.ramp_up <= 0 or self.ramp_down <= 0:
            raise InvalidInputError(f"unit {self.id}: ramp rates must be positive")
        if self.a < 0:
            raise InvalidInputError(f"unit {self.id}: quadratic cost coefficient must be >= 0")
        if self.init_status == 0:
            raise InvalidInputError(f"unit {self.id}: initial status must be nonzero")

    @property
    def initially_on(self) -> bool:
        return self.init_status > 0


@dataclass
class Schedule:
    """Commitment ``u`` (T x NG, 0/1) and dispatch ``p`` (T x NG, MW)."""

    u: np.ndarray
    p: np.ndarray

    def __post_init__(self):
        self.u = np.asarray(self.u, dtype=np.int8)
        self.p = np.asarray(self.p, dtype=float)
        if self.u.ndim != 2 or self.u.shape != self.p.shape:
            raise InvalidInputError("u and p must be matrices of equal shape (T x NG)")
        if np.any((self.u != 0) & (self.u != 1)):
            raise InvalidInputError("commitment entries must be 0 or 1")
        self.p = np.where(self.u == 1, self.p, 0.0)

    @property
    def hours(self) -> int:
        return self.u.shape[0]

    @property
    def units(self) -> int:
        return self.u.shape[1]

    def copy(self) -> "Schedule":
        return Schedule(self.u.copy(), self.p.copy())


@dataclass(frozen=True)
class ScenarioConfig:
    load_profile: np.ndarray  # total demand per hour, MW
    bus_shares: np.ndarray  # fraction of demand per bus
    inputs: tuple = ()  # UncertainInputSpec
    reserve_margin: float = 0.05
    penalty_cost: float = 0.1
    imbalance_tolerance: float = 0.1
    sigma: dict = field(default_factory=lambda: {"balance": 0.9, "reserve": 1.0, "line": 1.0})
    reserve_mode: str = "deliverable"
    resolution: int = DEFAULT_RESOLUTION
    penetration: str = ""
    deviation: str = ""

    def __post_init__(self):
        object.__setattr__(self, "load_profile", np.asarray(self.load_profile, float))
        object.__setattr__(self, "bus_shares", np.asarray(self.bus_shares, float))
        if self.load_profile.ndim != 1 or self.load_profile.size < 1 or np.any(self.load_profile < 0):
            raise InvalidInputError("load profile must be a non-negative vector")
        if abs(self.bus_shares.sum() - 1.0) > 1e-9 or np.any(self.bus_shares < 0):
            raise InvalidInputError("bus load shares must be non-negative and sum to 1")
        if self.imbalance_tolerance <= 0:
            raise InvalidInputError("imbalance tolerance must be positive")
        for key in ("balance", "reserve", "line"):
            s = self.sigma.get(key)
            if s is None or not 0 <= s <= 1:
                raise InvalidInputError(f"sigma[{key}] must lie in [0, 1]")
        if self.reserve_mode not in ("deliverable", "literal"):
            raise InvalidInputError("reserve_mode must be 'deliverable' or 'literal'")

    @property
    def hours(self) -> int:
        return self.load_profile.size


@dataclass(frozen=True)
class Violation:
    hour: int
    constraint: str  # balance, reserve, line, bounds, min-up, min-down, ramp, adequacy
    element: str  # unit id, branch label or "system"
    magnitude: float  # MW, hours or probability shortfall
    cv: float


@dataclass
class EvaluatedSolution:
    schedule: Schedule
    fitness: DSStructure
    fitness_central: float
    operating_cost: float
    violations: list
    tcv: float
    residual: np.ndarray  # central imbalance per hour, MW

    @property
    def cv_table(self):
        return [(v.hour, v.constraint, v.element, v.cv) for v in self.violations if v.cv > 0]


# ---------------------------------------------------------------------------
# elementary costs and checks


def transition_cost(unit: UnitSpec, u_prev: int, u_now: int) -> float:
    if u_prev not in (0, 1) or u_now not in (0, 1):
        raise InvalidInputError("commitment bits must be 0 or 1")
    if u_now and not u_prev:
        return float(unit.su)
    if u_prev and not u_now:
        return float(unit.sd)
    return 0.0


def fuel_cost(unit: UnitSpec, u: int, p: float) -> float:
    if not u:
        return 0.0
    if p < unit.lmin - BOUND_TOL or p > unit.umax + BOUND_TOL:
        raise PreconditionError(f"unit {unit.id}: output {p} outside [{unit.lmin}, {unit.umax}]")
    return unit.a * p * p + unit.b * p + unit.c


def schedule_cost(schedule: Schedule, units) -> float:
    """Fuel plus start-up/shut-down cost of a schedule, counted from the initial status."""
    u, p = schedule.u, schedule.p
    a = np.array([g.a for g in units])
    b = np.array([g.b for g in units])
    c = np.array([g.c for g in units])
    fuel = float(np.sum(u * (a * p * p + b * p + c)))
    prev = np.vstack([[1 if g.initially_on else 0 for g in units], u[:-1]])
    su = np.array([g.su for g in units])
    sd = np.array([g.sd for g in units])
    starts = (u == 1) & (prev == 0)
    stops = (u == 0) & (prev == 1)
    return fuel + float(np.sum(starts * su) + np.sum(stops * sd))


def run_lengths_before(units, u: np.ndarray):
    """On/off durations entering every hour: ``(T_on, T_off)`` each ``(T, NG)``."""
    T, G = u.shape
    ton = np.zeros((T, G), dtype=int)
    toff = np.zeros((T, G), dtype=int)
    on = np.array([max(g.init_status, 0) for g in units])
    off = np.array([max(-g.init_status, 0) for g in units])
    for t in range(T):
        ton[t], toff[t] = on, off
        on = np.where(u[t] == 1, on + 1, 0)
        off = np.where(u[t] == 0, off + 1, 0)
    return ton, toff


def check_deterministic_constraints(schedule: Schedule, units, demand=None) -> list:
    """Bounds, minimum up/down and ramp violations, optionally capacity adequacy.

    Minimum up/down time is checked at each shut-down/start-up event against
    the run length entering that hour (initial status included).  Ramp limits
    apply between consecutive hours in which the unit is committed.
    """
    u, p = schedule.u, schedule.p
    T, G = u.shape
    if G != len(units):
        raise InvalidInputError("schedule width does not match unit count")
    out = []
    lmin = np.array([g.lmin for g in units])
    umax = np.array([g.umax for g in units])
    ton, toff = run_lengths_before(units, u)
    prev = np.array([1 if g.initially_on else 0 for g in units])
    for t in range(T):
        for i, g in enumerate(units):
            if u[t, i]:
                if p[t, i] < lmin[i] - BOUND_TOL or p[t, i] > umax[i] + BOUND_TOL:
                    mag = max(lmin[i] - p[t, i], p[t, i] - umax[i])
                    out.append(Violation(t, "bounds", g.id, float(mag), 1.0))
                if not prev[i] and toff[t, i] < g.mdt:
                    out.append(Violation(t, "min-down", g.id, float(g.mdt - toff[t, i]), 1.0))
                if t > 0 and u[t - 1, i]:
                    d = p[t, i] - p[t - 1, i]
                    if d > g.ramp_up + BOUND_TOL:
                        out.append(Violation(t, "ramp", g.id, float(d - g.ramp_up), 1.0))
                    elif d < -g.ramp_down - BOUND_TOL:
                        out.append(Violation(t, "ramp", g.id, float(-d - g.ramp_down), 1.0))
            else:
                if abs(p[t, i]) > BOUND_TOL:
                    out.append(Violation(t, "bounds", g.id, float(abs(p[t, i])), 1.0))
                if prev[i] and ton[t, i] < g.mut:
                    out.append(Violation(t, "min-up", g.id, float(g.mut - ton[t, i]), 1.0))
        prev = u[t]
        if demand is not None:
            short = float(demand[t] - u[t] @ umax)
            if short > BOUND_TOL:
                out.append(Violation(t, "adequacy", "system", short, 1.0))
    return out


def spinning_reserve(schedule: Schedule, hour: int, units) -> float:
    """Sum over units of min(u(U - P), u*RR) with RR taken as the ramp-up rate."""
    u, p = schedule.u[hour], schedule.p[hour]
    umax = np.array([g.umax for g in units])
    rr = np.array([g.ramp_up for g in units])
    return float(np.sum(u * np.minimum(umax - p, rr)))


def constraint_violation(g, threshold, sense: str, sigma: float) -> float:
    """``max(sigma - lowerProb, 0)`` for ``g <= threshold``, ``g >= threshold`` or ``|g| <= threshold``.

    ``sense`` is one of ``<=``, ``>=`` or ``two-sided``.  For the two-sided
    form ``threshold`` may be a scalar ``d`` (meaning ``[-d, d]``) or a pair.
    """
    from .ds import satisfaction_bounds

    if not 0 <= sigma <= 1:
        raise InvalidInputError("sigma must lie in [0, 1]")
    if sense in ("two-sided", "abs", "|<=|"):
        lo, hi = (-threshold, threshold) if np.isscalar(threshold) else threshold
        low = two_sided_lower_probability(g, lo, hi)
    else:
        low, _ = satisfaction_bounds(g, threshold, sense)
    return max(sigma - low, 0.0)


def power_balance_qf(schedule: Schedule, hour: int, bus_qfs, loss: QuadraticForm) -> QuadraticForm:
    """Imbalance QF: total net injection (generation + wind - load) minus loss.

    ``bus_qfs`` are the per-bus net injections at ``hour`` with generation
    already folded in; ``schedule`` is accepted for interface symmetry and
    its dispatch must already be contained in ``bus_qfs``.
    """
    if not bus_qfs:
        raise InvalidInputError("need at least one bus injection")
    k = loss.size
    total = QuadraticForm.zero(k)
    for q in bus_qfs:
        if q.size != k:
            raise InvalidInputError("basis mismatch between injections and loss")
        total = total + q
    return total - loss


# ---------------------------------------------------------------------------
# problem context


class UCProblem:
    """Immutable bundle of network, units and scenario with precomputed data."""

    def __init__(self, case: NetworkCase, units, scenario: ScenarioConfig):
        self.case = case
        self.units = tuple(units)
        self.scenario = scenario
        if not self.units:
            raise InvalidInputError("at least one unit required")
        nb = case.bus_count
        if scenario.bus_shares.size != nb:
            raise InvalidInputError("bus share vector length does not match the network")
        for g in self.units:
            if not 0 <= g.bus < nb:
                raise InvalidInputError(f"unit {g.id} sits on an unknown bus")
        self.loss_model = build_loss_model(case)
        self.ptdf = build_ptdf(case)
        self.T = scenario.hours
        self.G = len(self.units)
        self.lmin = np.array([g.lmin for g in self.units])
        self.umax = np.array([g.umax for g in self.units])
        self.ramp_up = np.array([g.ramp_up for g in self.units])
        self.gen_bus = np.zeros((nb, self.G))
        for i, g in enumerate(self.units):
            self.gen_bus[g.bus, i] = 1.0

        n = scenario.resolution
        self.inputs_ds = {}
        for spec in scenario.inputs:
            if not 0 <= spec.bus < nb:
                raise InvalidInputError(f"input {spec.name} sits on an unknown bus")
            self.inputs_ds[spec.name] = encode(spec, n)
        self.noise = NoiseVector.from_inputs(self.inputs_ds) if scenario.inputs else NoiseVector.empty()
        k = len(self.noise)
        self.k = k

        # fixed (non-generator) injections: central and sensitivities per hour
        T = self.T
        demand = scenario.load_profile
        shares = scenario.bus_shares.copy()
        for spec in scenario.inputs:
            if spec.sign < 0:
                shares[spec.bus] = 0.0  # the uncertain input replaces the bus load
        base = -np.outer(demand, shares)
        sens = np.zeros((T, nb, k))
        load_lin = np.zeros((T, k))
        load_central = -base.sum(axis=1)
        for j, spec in enumerate(scenario.inputs):
            scale = np.array([spec.scale_at(t) for t in range(T)]) if spec.hour_profile else np.ones(T)
            mid, rad = self.noise.midpoints[j], self.noise.radii[j]
            base[:, spec.bus] += spec.sign * scale * mid
            sens[:, spec.bus, j] += spec.sign * scale * rad
            if spec.sign < 0:
                load_central += scale * mid
                load_lin[:, j] += scale * rad
        self.fixed_injection = base  # (T, nb)
        self.sensitivity = sens  # (T, nb, k)
        self.total_sensitivity = sens.sum(axis=1)  # (T, k)
        self.central_load = load_central  # (T,)
        self.central_net_fixed = base.sum(axis=1)  # wind minus load at midpoints

        # worst-case-aware reserve requirement (1 + r_m) * load, one DS per hour
        rm = 1.0 + scenario.reserve_margin
        lo, hi = batch_qf_to_ds(rm * load_central, rm * load_lin, np.zeros((T, k, k)), self.noise, n)
        self.reserve_hi_sorted = np.sort(hi, axis=1)
        self.reserve_requirement_upper = hi.max(axis=1)
        self.load_upper = load_central + np.abs(load_lin).sum(axis=1)

        # symbol support bounds, used for exact range screening
        self._sym_lo = np.array([s.lo.min() for s in self.noise.symbols]) if k else np.zeros(0)
        self._sym_hi = np.array([s.hi.max() for s in self.noise.symbols]) if k else np.zeros(0)
        self._sym_elems = [_symbol_elements(s) for s in self.noise.symbols]
        self.branch_labels = [
            f"{case.bus_ids[br.from_bus]}-{case.bus_ids[br.to_bus]}" for br in case.branches
        ]
        self.capacity = case.capacities

        # schedule-independent parts of the loss and line-flow forms
        H = self.loss_model.M / self.loss_model.base_mva
        self._loss_quad = 0.5 * np.einsum("tbi,bc,tcj->tij", sens, H, sens)
        self._line_lin = np.einsum("lb,tbk->tlk", self.ptdf.factors, sens)
        if k:
            self._line_hi_off = np.maximum(self._line_lin * self._sym_hi, self._line_lin * self._sym_lo).sum(axis=2)
            self._line_lo_off = np.minimum(self._line_lin * self._sym_hi, self._line_lin * self._sym_lo).sum(axis=2)
        else:
            self._line_hi_off = self._line_lo_off = np.zeros((T, len(case.branches)))
        self._line_ds = {}  # (hour, branch) -> sorted lo, hi of the zero-centred flow DS

    # -- requirement used by the repair heuristics
    def adequacy_target(self) -> np.ndarray:
        """Committed capacity each hour must cover the reserve-inclusive worst-case load."""
        return self.reserve_requirement_upper.copy()

    def empty_schedule(self) -> Schedule:
        return Schedule(np.zeros((self.T, self.G), np.int8), np.zeros((self.T, self.G)))

    # -- injections
    def bus_injections(self, p: np.ndarray) -> np.ndarray:
        """Central net injections per hour and bus, ``(T, nb)``."""
        return self.fixed_injection + p @ self.gen_bus.T

    def central_losses(self, p: np.ndarray) -> np.ndarray:
        return eval_loss_many(self.loss_model, self.bus_injections(p))

    def net_demand(self, p: np.ndarray) -> np.ndarray:
        """Generation needed each hour at the noise midpoints for the given dispatch's loss."""
        return -self.central_net_fixed + self.central_losses(p)

    def bus_qfs(self, schedule: Schedule, hour: int):
        inj = self.bus_injections(schedule.p)[hour]
        k = self.k
        z = np.zeros((k, k))
        return [QuadraticForm(inj[b], self.sensitivity[hour, b], z) for b in range(inj.size)]

    # -- evaluation
    def _min_width(self, lin: np.ndarray, quad: np.ndarray) -> np.ndarray:
        """Lower bound on the width of every joint focal element, per row."""
        w = np.zeros(lin.shape[0])
        for s, (a, b, _) in enumerate(self._sym_elems):
            lo, hi = _univariate_range(lin[:, s], quad[:, s, s], a, b)
            w += (hi - lo).min(axis=1)
        return w

    def _line_shapes(self, tt, ll):
        """Sorted focal edges of the flow DS around a zero central value."""
        missing = [(t, l) for t, l in zip(tt, ll) if (t, l) not in self._line_ds]
        if missing:
            mt = np.array([m[0] for m in missing])
            ml = np.array([m[1] for m in missing])
            k = self.k
            lo, hi = batch_qf_to_ds(np.zeros(mt.size), self._line_lin[mt, ml],
                                    np.zeros((mt.size, k, k)), self.noise, self.scenario.resolution)
            for j, key in enumerate(missing):
                self._line_ds[key] = (np.sort(lo[j]), np.sort(hi[j]))
        return [self._line_ds[(t, l)] for t, l in zip(tt, ll)]

    def _two_sided_lower(self, c, lin, quad, lo_lim, hi_lim) -> np.ndarray:
        """Lower probability of ``lo_lim <= QF <= hi_lim`` for a batch of QFs."""
        n = self.scenario.resolution
        lo, hi = batch_qf_to_ds(c, lin, quad, self.noise, n)
        inside = (hi <= hi_lim[:, None]).sum(axis=1) - (lo < lo_lim[:, None]).sum(axis=1)
        return np.maximum(inside / n, 0.0)

    def evaluate(self, schedule: Schedule, deterministic_cv: bool = True) -> EvaluatedSolution:
        sc = self.scenario
        T, k = self.T, self.k
        if schedule.u.shape != (T, self.G):
            raise InvalidInputError(f"schedule must be {T} x {self.G}")
        p = schedule.p
        inj = self.bus_injections(p)
        sens = self.sensitivity
        lc = eval_loss_many(self.loss_model, inj)
        grad = (inj / self.loss_model.base_mva) @ self.loss_model.M
        llin = np.einsum("tb,tbk->tk", grad, sens)
        lquad = self._loss_quad

        # hourly imbalance QF
        dc = inj.sum(axis=1) - lc
        dlin = self.total_sensitivity - llin
        dquad = -lquad

        # fitness: cost + xi * sum_t dP_t^2 (second-order product)
        cost = schedule_cost(schedule, self.units)
        xi = sc.penalty_cost
        fc = cost + xi * float(dc @ dc)
        flin = xi * 2.0 * (dc @ dlin)
        fquad = xi * (2.0 * np.einsum("t,tij->ij", dc, dquad) + dlin.T @ dlin)
        lo, hi = batch_qf_to_ds(np.array([fc]), flin[None], fquad[None], self.noise, sc.resolution)
        n = sc.resolution
        fitness = DSStructure(lo[0], hi[0], np.full(n, 1.0 / n))

        viols = []
        # power balance, two-sided
        sig = sc.sigma["balance"]
        delta = sc.imbalance_tolerance
        low = np.zeros(T)
        if k:
            wide = self._min_width(dlin, dquad) > 2.0 * delta
            todo = np.flatnonzero(~wide)
            if todo.size:
                lims = np.full(todo.size, delta)
                low[todo] = self._two_sided_lower(dc[todo], dlin[todo], dquad[todo], -lims, lims)
        else:
            low = (np.abs(dc) <= delta).astype(float)
        for t in range(T):
            cv = max(sig - low[t], 0.0)
            if cv > 0:
                viols.append(Violation(t, "balance", "system", float(dc[t]), cv))

        # spinning reserve against the worst-case-aware requirement
        sig = sc.sigma["reserve"]
        u = schedule.u
        if sc.reserve_mode == "deliverable":
            avail = np.sum(u * np.minimum(self.umax, p + self.ramp_up), axis=1)
        else:
            avail = np.sum(u * np.minimum(self.umax - p, self.ramp_up), axis=1)
        for t in range(T):
            low_t = np.searchsorted(self.reserve_hi_sorted[t], avail[t], side="right") / n
            cv = max(sig - low_t, 0.0)
            if cv > 0:
                short = float(self.reserve_requirement_upper[t] - avail[t])
                viols.append(Violation(t, "reserve", "system", short, cv))

        # line limits: exact range screening, DS only where the range straddles a limit
        sig = sc.sigma["line"]
        fcen = inj @ self.ptdf.factors.T  # (T, L)
        fmax, fmin = fcen + self._line_hi_off, fcen + self._line_lo_off
        cap = self.capacity[None, :]
        inside = (fmax <= cap) & (fmin >= -cap)
        outside = (fmin > cap) | (fmax < -cap)
        partial = ~(inside | outside)
        low = np.where(inside, 1.0, 0.0)
        if np.any(partial):
            tt, ll = np.nonzero(partial)
            for t, l, (slo, shi) in zip(tt, ll, self._line_shapes(tt, ll)):
                c, C = fcen[t, l], self.capacity[l]
                ok = np.searchsorted(shi, C - c, side="right") - np.searchsorted(slo, -C - c, side="left")
                low[t, l] = max(ok / n, 0.0)
        tt, ll = np.nonzero(sig - low > 0)
        for t, l in zip(tt, ll):
            viols.append(Violation(int(t), "line", self.branch_labels[l], float(fcen[t, l]), float(sig - low[t, l])))

        if deterministic_cv:
            viols.extend(check_deterministic_constraints(schedule, self.units))
        viols.sort(key=lambda v: (v.hour, v.constraint, v.element))
        tcv = float(sum(v.cv for v in viols))
        return EvaluatedSolution(schedule.copy(), fitness, fc, cost, viols, tcv, dc)


def evaluate(schedule: Schedule, problem: UCProblem) -> EvaluatedSolution:
    return problem.evaluate(schedule)


# ---------------------------------------------------------------------------
# file formats


_UNIT_COLUMNS = ("id", "bus", "Lmin", "Umax", "MUT", "MDT", "UR", "DR", "a", "b", "c", "SU", "SD", "init")


def read_units(path, case: NetworkCase) -> list:
    """Unit table CSV; ``bus`` refers to a case bus label, ``init_output`` is optional."""
    path = Path(path)
    try:
        fh = open(path, newline="")
    except OSError as exc:
        raise CaseParseError(f"cannot read unit file: {exc.strerror}", path) from None
    units = []
    with fh:
        reader = csv.DictReader(fh)
        missing = [c for c in _UNIT_COLUMNS if c not in (reader.fieldnames or [])]
        if missing:
            raise CaseParseError(f"missing columns {missing}", path, 1)
        for row in reader:
            line = reader.line_num
            try:
                bus = row["bus"].strip()
                if bus not in case.bus_ids:
                    raise ValueError(f"unknown bus {bus}")
                units.append(UnitSpec(
                    id=row["id"].strip(), bus=case.bus_ids.index(bus),
                    lmin=float(row["Lmin"]), umax=float(row["Umax"]),
                    mut=int(row["MUT"]), mdt=int(row["MDT"]),
                    ramp_up=float(row["UR"]), ramp_down=float(row["DR"]),
                    a=float(row["a"]), b=float(row["b"]), c=float(row["c"]),
                    su=float(row["SU"]), sd=float(row["SD"]), init_status=int(row["init"]),
                    init_output=float(row.get("init_output") or 0.0),
                ))
            except (ValueError, TypeError, InvalidInputError) as exc:
                raise CaseParseError(str(exc), path, line) from None
    if not units:
        raise CaseParseError("no units defined", path)
    return units


def read_scenario(path, case: NetworkCase, penetration: str | None = None,
                  deviation: str | None = None) -> ScenarioConfig:
    """JSON scenario file; per-level input parameters are picked by the level labels."""
    path = Path(path)
    try:
        data = json.loads(path.read_text())
    except OSError as exc:
        raise CaseParseError(f"cannot read scenario file: {exc.strerror}", path) from None
    except json.JSONDecodeError as exc:
        raise CaseParseError(f"invalid JSON: {exc.msg}", path, exc.lineno) from None
    try:
        return scenario_from_dict(data, case, penetration, deviation)
    except (KeyError, TypeError, ValueError) as exc:
        raise CaseParseError(f"bad scenario: {exc}", path) from None


def scenario_from_dict(data: dict, case: NetworkCase, penetration=None, deviation=None) -> ScenarioConfig:
    pen = str(penetration if penetration is not None else data.get("penetration", ""))
    dev = str(deviation if deviation is not None else data.get("deviation", ""))
    profile = np.asarray(data["load_profile"], float)
    shares = data.get("bus_shares", "case")
    if shares == "case":
        if case.loads is None or case.loads.sum() <= 0:
            raise ValueError("bus_shares='case' needs bus loads in the case file")
        shares = case.loads / case.loads.sum()
    elif isinstance(shares, dict):
        vec = np.zeros(case.bus_count)
        for label, v in shares.items():
            vec[case.bus_index(str(label))] = float(v)
        shares = vec
    ref = float(data.get("load_reference_mw", case.loads.sum() if case.loads is not None else 0.0))
    inputs = []
    for item in data.get("inputs", []):
        params = dict(item.get("params", {}))
        levels = item.get("levels")
        if levels:
            axis = item.get("level_axis", "")
            label = pen if axis == "penetration" else dev
            if label not in levels:
                raise ValueError(f"input {item['name']}: no parameters for {axis} level {label!r}")
            params.update(levels[label])
        profile_scale = ()
        if item.get("scale_with_load", False):
            if ref <= 0:
                raise ValueError("scale_with_load needs a positive load_reference_mw")
            profile_scale = tuple(profile / ref)
        inputs.append(UncertainInputSpec(
            name=item["name"], kind=item["kind"], params=params,
            bus=case.bus_index(str(item["bus"])), sign=float(item.get("sign", 1.0)),
            hour_profile=profile_scale,
        ))
    sigma = {"balance": 0.9, "reserve": 1.0, "line": 1.0}
    sigma.update(data.get("sigma", {}))
    return ScenarioConfig(
        load_profile=profile, bus_shares=shares, inputs=tuple(inputs),
        reserve_margin=float(data.get("reserve_margin", 0.05)),
        penalty_cost=float(data.get("penalty_cost", 0.1)),
        imbalance_tolerance=float(data.get("imbalance_tolerance", 0.1)),
        sigma=sigma, reserve_mode=data.get("reserve_mode", "deliverable"),
        resolution=int(data.get("resolution", DEFAULT_RESOLUTION)),
        penetration=pen, deviation=dev,
    )


def _fmt(v) -> str:
    return repr(float(v))


def write_schedule_csv(schedule: Schedule, units, path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["hour", "unit", "on", "mw"])
        for t in range(schedule.hours):
            for i, g in enumerate(units):
                w.writerow([t + 1, g.id, int(schedule.u[t, i]), _fmt(schedule.p[t, i])])


def write_fitness_csv(fitness: DSStructure, path) -> None:
    """Focal elements of the fitness P-box (lo, hi, mass)."""
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["lo", "hi", "mass"])
        for lo, hi, m in zip(fitness.lo, fitness.hi, fitness.mass):
            w.writerow([_fmt(lo), _fmt(hi), _fmt(m)])


def write_violations_csv(sol: EvaluatedSolution, path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["hour", "constraint", "element", "magnitude", "cv"])
        for v in sol.violations:
            w.writerow([v.hour + 1, v.constraint, v.element, _fmt(v.magnitude), _fmt(v.cv)])


__all__ = [
    "UnitSpec", "Schedule", "ScenarioConfig", "Violation", "EvaluatedSolution", "UCProblem",
    "transition_cost", "fuel_cost", "schedule_cost", "check_deterministic_constraints",
    "spinning_reserve", "constraint_violation", "power_balance_qf", "evaluate",
    "read_units", "read_scenario", "scenario_from_dict", "write_schedule_csv",
    "write_fitness_csv", "write_violations_csv", "write_pbox_csv", "to_pbox",
]
