"""Network model: DC-flow loss coefficients, PTDFs and line flows.

Matrices follow the B-coefficient loss formulation::

    G*_ll = sum_k U_l U_k g_lk      G*_lk = -U_l U_k g_lk
    B*_ll = -sum_k U_l U_k b_lk     B*_lk =  U_l U_k b_lk
    delta = X P,  X = inv(B*) with the slack row/column removed
    P_loss = P' X' G* X P + P_LV

``b_lk`` is the magnitude of the series susceptance.  Internally every
quantity is per-unit on ``base_mva``; the public interfaces speak MW.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np

from .eaa import QuadraticForm
from .errors import CaseParseError, InvalidInputError, SingularNetworkError

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class Branch:
    from_bus: int  # 0-based bus index
    to_bus: int
    g: float  # series conductance, pu
    b: float  # series susceptance magnitude, pu
    capacity: float  # MW


@dataclass(frozen=True, eq=False)
class NetworkCase:
    bus_ids: tuple  # external labels, position = internal index
    branches: tuple
    slack: int = 0
    voltages: np.ndarray | None = None
    base_mva: float = 100.0
    loads: np.ndarray | None = None  # nominal MW per bus, optional

    def __post_init__(self):
        nb = len(self.bus_ids)
        if nb < 2:
            raise InvalidInputError("a network needs at least two buses")
        if not 0 <= self.slack < nb:
            raise InvalidInputError(f"slack bus index {self.slack} out of range")
        volts = np.ones(nb) if self.voltages is None else np.asarray(self.voltages, float)
        if volts.shape != (nb,) or np.any(volts <= 0):
            raise InvalidInputError("voltage magnitudes must be positive, one per bus")
        object.__setattr__(self, "voltages", volts)
        if self.loads is not None:
            object.__setattr__(self, "loads", np.asarray(self.loads, float))
        for br in self.branches:
            if not (0 <= br.from_bus < nb and 0 <= br.to_bus < nb) or br.from_bus == br.to_bus:
                raise InvalidInputError(f"bad branch endpoints {br.from_bus}-{br.to_bus}")
            if br.capacity <= 0:
                raise InvalidInputError("branch capacities must be positive")
        if not self._connected():
            raise InvalidInputError("network is not connected")

    @property
    def bus_count(self) -> int:
        return len(self.bus_ids)

    def bus_index(self, label) -> int:
        try:
            return self.bus_ids.index(label)
        except ValueError:
            raise InvalidInputError(f"unknown bus {label!r}") from None

    @property
    def capacities(self) -> np.ndarray:
        return np.array([br.capacity for br in self.branches])

    def _connected(self) -> bool:
        nb = len(self.bus_ids)
        adj = [[] for _ in range(nb)]
        for br in self.branches:
            adj[br.from_bus].append(br.to_bus)
            adj[br.to_bus].append(br.from_bus)
        seen = {0}
        stack = [0]
        while stack:
            for j in adj[stack.pop()]:
                if j not in seen:
                    seen.add(j)
                    stack.append(j)
        return len(seen) == nb

    def admittance_matrices(self):
        """Symmetric bus-by-bus conductance and susceptance magnitude matrices."""
        nb = self.bus_count
        g = np.zeros((nb, nb))
        b = np.zeros((nb, nb))
        for br in self.branches:
            g[br.from_bus, br.to_bus] += br.g
            g[br.to_bus, br.from_bus] += br.g
            b[br.from_bus, br.to_bus] += br.b
            b[br.to_bus, br.from_bus] += br.b
        return g, b


@dataclass(frozen=True, eq=False)
class LossModel:
    Gstar: np.ndarray
    Bstar: np.ndarray
    X: np.ndarray
    M: np.ndarray  # X'G*X + (X'G*X)', per-unit
    P_LV: float  # MW
    base_mva: float

    @property
    def A(self) -> np.ndarray:
        return 0.5 * self.M

    @property
    def bus_count(self) -> int:
        return self.Gstar.shape[0]


@dataclass(frozen=True, eq=False)
class PTDFTable:
    factors: np.ndarray  # branch x bus

    def flows(self, injections) -> np.ndarray:
        return self.factors @ np.asarray(injections, float)


def _reduced_inverse(Bstar: np.ndarray, slack: int) -> np.ndarray:
    nb = Bstar.shape[0]
    keep = np.array([i for i in range(nb) if i != slack])
    red = Bstar[np.ix_(keep, keep)]
    if np.linalg.matrix_rank(red) < red.shape[0]:
        raise SingularNetworkError("reduced susceptance matrix is singular")
    X = np.zeros_like(Bstar)
    X[np.ix_(keep, keep)] = np.linalg.inv(red)
    return X


def build_loss_model(case: NetworkCase) -> LossModel:
    g, b = case.admittance_matrices()
    U = case.voltages
    uu = np.outer(U, U)
    Gstar = -uu * g
    np.fill_diagonal(Gstar, (uu * g).sum(axis=1))
    Bstar = uu * b
    np.fill_diagonal(Bstar, -(uu * b).sum(axis=1))
    X = _reduced_inverse(Bstar, case.slack)
    A = X.T @ Gstar @ X
    M = A + A.T
    # voltage-magnitude term, each branch counted once
    p_lv = sum(br.g * (U[br.from_bus] - U[br.to_bus]) ** 2 for br in case.branches)
    return LossModel(Gstar, Bstar, X, M, float(p_lv) * case.base_mva, case.base_mva)


def eval_loss(model: LossModel, injections) -> float:
    """System loss in MW for per-bus net injections in MW."""
    p = np.asarray(injections, float) / model.base_mva
    return float(0.5 * p @ model.M @ p) * model.base_mva + model.P_LV


def eval_loss_many(model: LossModel, injections: np.ndarray) -> np.ndarray:
    p = np.asarray(injections, float) / model.base_mva
    return 0.5 * np.einsum("ti,ij,tj->t", p, model.M, p) * model.base_mva + model.P_LV


def loss_gradient(model: LossModel, injections) -> np.ndarray:
    """d(P_loss)/dP in MW/MW."""
    p = np.asarray(injections, float) / model.base_mva
    return model.M @ p


def loss_hessian(model: LossModel) -> np.ndarray:
    """d2(P_loss)/dP2 in 1/MW."""
    return model.M / model.base_mva


def loss_qf_arrays(model: LossModel, central: np.ndarray, sens: np.ndarray):
    """Loss quadratic forms for a batch of operating points.

    ``central`` is ``(T, nb)`` net injections at the noise midpoints and
    ``sens`` is ``(T, nb, k)``: MW change of each bus injection per unit of
    each noise symbol.  Returns ``(c, lin, quad)`` with shapes ``(T,)``,
    ``(T, k)``, ``(T, k, k)``.  The expansion is exact because the loss is
    quadratic in the injections.
    """
    central = np.atleast_2d(central)
    c = eval_loss_many(model, central)
    grad = (central / model.base_mva) @ model.M  # (T, nb); M symmetric
    lin = np.einsum("tb,tbk->tk", grad, sens)
    H = model.M / model.base_mva
    quad = 0.5 * np.einsum("tbi,bc,tcj->tij", sens, H, sens)
    return c, lin, quad


def _split_bus_qfs(bus_qfs: Sequence[QuadraticForm], nb: int):
    if len(bus_qfs) != nb:
        raise InvalidInputError(f"expected {nb} bus injections, got {len(bus_qfs)}")
    k = bus_qfs[0].size
    central = np.array([q.central for q in bus_qfs])
    sens = np.zeros((nb, k))
    for i, q in enumerate(bus_qfs):
        if q.size != k:
            raise InvalidInputError("bus injections use different noise bases")
        sens[i] = q.linear
    return central, sens


def loss_qf(model: LossModel, bus_qfs: Sequence[QuadraticForm]) -> QuadraticForm:
    """Loss QF from first-order bus injection QFs (second-order parts are ignored)."""
    central, sens = _split_bus_qfs(bus_qfs, model.bus_count)
    c, lin, quad = loss_qf_arrays(model, central[None, :], sens[None, :, :])
    return QuadraticForm(c[0], lin[0], quad[0])


def build_ptdf(case: NetworkCase) -> PTDFTable:
    """DC power transfer distribution factors; positive flow runs from -> to."""
    _, b = case.admittance_matrices()
    U = case.voltages
    nb = case.bus_count
    uu = np.outer(U, U)
    Bstar = uu * b
    np.fill_diagonal(Bstar, -(uu * b).sum(axis=1))
    X = _reduced_inverse(Bstar, case.slack)
    K = np.zeros((len(case.branches), nb))
    for i, br in enumerate(case.branches):
        l, k = br.from_bus, br.to_bus
        # X comes from the negative-diagonal B*, so flip to get from->to flow
        K[i] = (X[k] - X[l]) * (U[l] * U[k] * br.b)
    K[:, case.slack] = 0.0
    return PTDFTable(K)


def line_flow_qf(ptdf: PTDFTable, bus_qfs: Sequence[QuadraticForm], branch: int) -> QuadraticForm:
    weights = ptdf.factors[branch]
    if len(bus_qfs) != weights.size:
        raise InvalidInputError("one injection QF per bus required")
    k = bus_qfs[0].size
    out = QuadraticForm.zero(k)
    for w, q in zip(weights, bus_qfs):
        if w != 0.0:
            out = out + w * q
    return out


# ---------------------------------------------------------------------------
# case files


def read_case(path) -> NetworkCase:
    """Parse a sectioned text case file.

    Sections start with a keyword line: ``BASE <mva>``, ``SLACK <bus>``,
    ``BUS`` (rows ``id voltage [load_mw]``) and ``BRANCH [r x | g b]`` (rows
    ``from to v1 v2 capacity_mw``).  ``#`` starts a comment.
    """
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise CaseParseError(f"cannot read case file: {exc.strerror}", path) from None
    base = 100.0
    slack_label = None
    section = None
    branch_kind = "rx"
    buses, volts, loads, raw_branches = [], [], [], []
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        tok = line.split()
        key = tok[0].upper()
        try:
            if key == "BASE":
                base = float(tok[1])
                section = None
            elif key == "SLACK":
                slack_label = tok[1]
                section = None
            elif key == "BUS":
                section = "bus"
            elif key == "BRANCH":
                section = "branch"
                if len(tok) >= 3:
                    kind = (tok[1] + tok[2]).lower()
                    if kind not in ("rx", "gb"):
                        raise ValueError(f"unknown branch parameter kind {tok[1]} {tok[2]}")
                    branch_kind = kind
            elif section == "bus":
                buses.append(tok[0])
                volts.append(float(tok[1]) if len(tok) > 1 else 1.0)
                loads.append(float(tok[2]) if len(tok) > 2 else 0.0)
            elif section == "branch":
                if len(tok) < 5:
                    raise ValueError("branch rows need: from to v1 v2 capacity")
                raw_branches.append((tok[0], tok[1], float(tok[2]), float(tok[3]), float(tok[4]), lineno))
            else:
                raise ValueError(f"unexpected line outside a section: {line!r}")
        except (ValueError, IndexError) as exc:
            raise CaseParseError(str(exc), path, lineno) from None
    if not buses:
        raise CaseParseError("no BUS section", path)
    index = {label: i for i, label in enumerate(buses)}
    branches = []
    for f, t, v1, v2, cap, lineno in raw_branches:
        if f not in index or t not in index:
            raise CaseParseError(f"branch references unknown bus {f if f not in index else t}", path, lineno)
        if branch_kind == "rx":
            z2 = v1 * v1 + v2 * v2
            if z2 == 0:
                raise CaseParseError("zero-impedance branch", path, lineno)
            g, b = v1 / z2, v2 / z2
        else:
            g, b = v1, abs(v2)
        branches.append(Branch(index[f], index[t], g, b, cap))
    slack = index.get(slack_label, 0) if slack_label is not None else 0
    if slack_label is not None and slack_label not in index:
        raise CaseParseError(f"unknown slack bus {slack_label}", path)
    try:
        return NetworkCase(tuple(buses), tuple(branches), slack, np.array(volts), base, np.array(loads))
    except InvalidInputError as exc:
        raise CaseParseError(str(exc), path) from None
