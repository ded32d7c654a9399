"""Dempster-Shafer structures on the real line and their probability boxes.

A :class:`DSStructure` is a finite list of closed focal intervals with
masses summing to one.  Its :class:`PBox` view is the pair of step CDFs

* ``upper_cdf(t)`` = plausibility of ``(-inf, t]`` = mass of elements with ``lo <= t``
* ``lower_cdf(t)`` = belief of ``(-inf, t]``       = mass of elements with ``hi <= t``

Everything here is a pure function of immutable values.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from typing import Iterable, NamedTuple, Sequence

import numpy as np

from .errors import InvalidInputError, UnsupportedOperationError

DEFAULT_RESOLUTION = 100
MASS_TOL = 1e-9
# level tolerance used when inverting cumulative masses
_LEVEL_TOL = 1e-9


class FocalElement(NamedTuple):
    lo: float
    hi: float
    mass: float


def _readonly(a):
    a = np.array(a, dtype=float)
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class DSStructure:
    """Focal intervals ``[lo[i], hi[i]]`` with masses ``mass[i]``.

    Elements are stored sorted by ``lo`` with ties broken by ``hi``.
    """

    lo: np.ndarray
    hi: np.ndarray
    mass: np.ndarray

    def __post_init__(self):
        lo = np.asarray(self.lo, dtype=float).ravel()
        hi = np.asarray(self.hi, dtype=float).ravel()
        mass = np.asarray(self.mass, dtype=float).ravel()
        if not (lo.shape == hi.shape == mass.shape) or lo.size == 0:
            raise InvalidInputError("lo, hi and mass must be non-empty and equally long")
        if not (np.all(np.isfinite(lo)) and np.all(np.isfinite(hi)) and np.all(np.isfinite(mass))):
            raise InvalidInputError("focal elements must be finite")
        if np.any(lo > hi):
            raise InvalidInputError("focal element with lo > hi")
        if np.any(mass <= 0) or np.any(mass > 1 + MASS_TOL):
            raise InvalidInputError("focal masses must lie in (0, 1]")
        if abs(math.fsum(mass) - 1.0) > MASS_TOL:
            raise InvalidInputError(f"masses sum to {math.fsum(mass)!r}, expected 1")
        order = np.lexsort((hi, lo))
        object.__setattr__(self, "lo", _readonly(lo[order]))
        object.__setattr__(self, "hi", _readonly(hi[order]))
        object.__setattr__(self, "mass", _readonly(mass[order]))

    @classmethod
    def from_elements(cls, elements: Iterable[Sequence[float]]) -> "DSStructure":
        arr = np.array([tuple(e) for e in elements], dtype=float)
        if arr.ndim != 2 or arr.shape[1] != 3:
            raise InvalidInputError("elements must be (lo, hi, mass) triples")
        return cls(arr[:, 0], arr[:, 1], arr[:, 2])

    @classmethod
    def degenerate(cls, value: float, resolution: int = DEFAULT_RESOLUTION) -> "DSStructure":
        return cls.interval(value, value, resolution)

    @classmethod
    def interval(cls, lo: float, hi: float, resolution: int = DEFAULT_RESOLUTION) -> "DSStructure":
        n = int(resolution)
        return cls(np.full(n, lo), np.full(n, hi), np.full(n, 1.0 / n))

    def __len__(self):
        return self.lo.size

    def __iter__(self):
        for lo, hi, m in zip(self.lo, self.hi, self.mass):
            yield FocalElement(float(lo), float(hi), float(m))

    @property
    def elements(self) -> list[FocalElement]:
        return list(self)

    @property
    def support(self) -> tuple[float, float]:
        return float(self.lo.min()), float(self.hi.max())

    def is_degenerate(self) -> bool:
        return bool(np.all(self.lo == self.hi) and np.all(self.lo == self.lo[0]))

    def affine(self, scale: float, shift: float = 0.0) -> "DSStructure":
        """Image of the structure under ``x -> scale * x + shift``."""
        a = scale * self.lo + shift
        b = scale * self.hi + shift
        return DSStructure(np.minimum(a, b), np.maximum(a, b), self.mass)

    def to_pbox(self) -> "PBox":
        return to_pbox(self)

    def mean_bounds(self) -> tuple[float, float]:
        return float(self.mass @ self.lo), float(self.mass @ self.hi)


@dataclass(frozen=True, eq=False)
class PBox:
    """Bounding pair of step CDFs.

    ``left`` are the sorted left endpoints with cumulative masses
    ``left_cum`` (they generate the upper CDF); ``right``/``right_cum``
    generate the lower CDF.
    """

    left: np.ndarray
    left_cum: np.ndarray
    right: np.ndarray
    right_cum: np.ndarray

    @staticmethod
    def _eval(edges, cum, x, side):
        x = np.asarray(x, dtype=float)
        idx = np.searchsorted(edges, x, side=side)
        padded = np.concatenate(([0.0], cum))
        out = padded[idx]
        return float(out) if out.ndim == 0 else out

    def upper_cdf(self, x):
        return self._eval(self.left, self.left_cum, x, "right")

    def lower_cdf(self, x):
        return self._eval(self.right, self.right_cum, x, "right")

    def upper_cdf_left(self, x):
        """Left limit ``upper_cdf(x-)``: mass of elements with ``lo < x``."""
        return self._eval(self.left, self.left_cum, x, "left")

    def lower_cdf_left(self, x):
        return self._eval(self.right, self.right_cum, x, "left")

    @staticmethod
    def _quantile(edges, cum, p):
        p = np.asarray(p, dtype=float)
        idx = np.searchsorted(cum, p, side="left")
        out = edges[np.clip(idx, 0, edges.size - 1)]
        return float(out) if out.ndim == 0 else out

    def left_quantile(self, p):
        """Quantile of the upper CDF (the left bounding quantile)."""
        return self._quantile(self.left, self.left_cum, p)

    def right_quantile(self, p):
        """Quantile of the lower CDF (the right bounding quantile)."""
        return self._quantile(self.right, self.right_cum, p)

    @property
    def support(self) -> tuple[float, float]:
        return float(self.left[0]), float(self.right[-1])

    def knots(self) -> np.ndarray:
        return np.unique(np.concatenate((self.left, self.right)))

    def width_at(self, p: float) -> float:
        return self.right_quantile(p) - self.left_quantile(p)

    def to_ds(self, resolution: int = DEFAULT_RESOLUTION) -> DSStructure:
        left, right = _equiprobable_edges(self, resolution)
        return DSStructure(left, right, np.full(resolution, 1.0 / resolution))


def _cumulative(mass):
    cum = np.cumsum(mass)
    cum /= cum[-1]
    cum[-1] = 1.0
    return cum


def to_pbox(x: DSStructure) -> PBox:
    ro = np.argsort(x.hi, kind="stable")
    return PBox(
        left=_readonly(x.lo),
        left_cum=_readonly(_cumulative(x.mass)),
        right=_readonly(x.hi[ro]),
        right_cum=_readonly(_cumulative(x.mass[ro])),
    )


def _equiprobable_edges(pb: PBox, n: int):
    levels = np.arange(n, dtype=float) / n
    li = np.searchsorted(pb.left_cum, levels + _LEVEL_TOL, side="right")
    ri = np.searchsorted(pb.right_cum, levels + 1.0 / n - _LEVEL_TOL, side="left")
    left = pb.left[np.clip(li, 0, pb.left.size - 1)]
    right = pb.right[np.clip(ri, 0, pb.right.size - 1)]
    return np.minimum(left, right), right


def condense(x: DSStructure, resolution: int = DEFAULT_RESOLUTION) -> DSStructure:
    """Outer approximation of ``x`` by ``resolution`` equiprobable elements.

    Element ``k`` spans from the upper-CDF quantile just above ``k/n`` to the
    lower-CDF quantile at ``(k+1)/n``, so the result's P-box encloses the
    input's.
    """
    if resolution < 1:
        raise InvalidInputError("resolution must be positive")
    return to_pbox(x).to_ds(resolution)


# ---------------------------------------------------------------------------
# encoding of uncertain inputs


class WindFarmCDF:
    """Output-power CDF of a wind farm with Weibull wind speed and a cubic power curve.

    Probability atoms sit at 0 (speed below cut-in or above cut-out) and at
    the rated farm power (speed between rated and cut-out).
    """

    def __init__(self, shape, scale, rated_power, v_ci=3.0, v_r=12.0, v_co=25.0):
        vals = (shape, scale, rated_power, v_ci, v_r, v_co)
        if not all(math.isfinite(v) for v in vals):
            raise InvalidInputError("wind-farm parameters must be finite")
        if shape <= 0 or scale <= 0 or rated_power <= 0:
            raise InvalidInputError("shape, scale and rated power must be positive")
        if not (0 <= v_ci < v_r < v_co):
            raise InvalidInputError("need 0 <= v_ci < v_r < v_co")
        self.k = float(shape)
        self.lam = float(scale)
        self.rated = float(rated_power)
        self.v_ci, self.v_r, self.v_co = float(v_ci), float(v_r), float(v_co)
        self._tail = math.exp(-((self.v_co / self.lam) ** self.k))
        self._span = self.v_r**3 - self.v_ci**3

    @property
    def atom_zero(self) -> float:
        return 1.0 - math.exp(-((self.v_ci / self.lam) ** self.k)) + self._tail

    @property
    def atom_rated(self) -> float:
        return math.exp(-((self.v_r / self.lam) ** self.k)) - self._tail

    def cdf(self, x):
        x = np.asarray(x, dtype=float)
        frac = np.clip(x / self.rated, 0.0, 1.0)
        w = frac * self._span + self.v_ci**3
        mid = 1.0 + self._tail - np.exp(-(w ** (self.k / 3.0)) / self.lam**self.k)
        out = np.where(x < 0, 0.0, np.where(x >= self.rated, 1.0, mid))
        return float(out) if out.ndim == 0 else out

    def quantile(self, p):
        """Generalised inverse ``inf{x : F(x) >= p}`` restricted to ``[0, rated]``."""
        p = np.asarray(p, dtype=float)
        f0 = self.atom_zero
        f_top = 1.0 - self.atom_rated
        # keep log() in the branch where the analytic inverse applies
        inner = np.clip(1.0 + self._tail - p, 1e-300, 1.0 - f0 + self._tail)
        w = (-(self.lam**self.k) * np.log(inner)) ** (3.0 / self.k)
        x = self.rated * (w - self.v_ci**3) / self._span
        x = np.clip(x, 0.0, self.rated)
        out = np.where(p <= f0, 0.0, np.where(p > f_top, self.rated, x))
        return float(out) if out.ndim == 0 else out


KINDS = ("weibull-windfarm", "interval", "triangular-fuzzy", "point")


@dataclass(frozen=True)
class UncertainInputSpec:
    """Description of one uncertain input.

    ``params`` by kind:

    * weibull-windfarm: ``shape``, ``scale``, ``rated_power`` (farm, MW) or
      ``turbines`` and ``turbine_rated``; optional ``v_ci``, ``v_r``, ``v_co``
    * interval: ``lo``, ``hi``
    * triangular-fuzzy: ``a``, ``m``, ``b``
    * point: ``value``

    ``sign`` is the net-injection sensitivity (+1 generation, -1 load).
    ``hour_profile`` scales the input per hour; empty means 1.0 for every hour.
    """

    name: str
    kind: str
    params: dict
    bus: int = 0
    sign: float = 1.0
    hour_profile: tuple = ()

    def __post_init__(self):
        if self.kind not in KINDS:
            raise InvalidInputError(f"unknown input kind {self.kind!r}")
        for k, v in self.params.items():
            if not isinstance(v, (int, float)) or not math.isfinite(v):
                raise InvalidInputError(f"parameter {k} of {self.name} must be a finite number")
        p = self.params
        try:
            if self.kind == "interval" and p["lo"] > p["hi"]:
                raise InvalidInputError(f"{self.name}: interval lo > hi")
            if self.kind == "triangular-fuzzy" and not (p["a"] <= p["m"] <= p["b"]):
                raise InvalidInputError(f"{self.name}: triangular needs a <= m <= b")
            if self.kind == "point":
                p["value"]
            if self.kind == "weibull-windfarm":
                self.wind_cdf()
        except KeyError as exc:
            raise InvalidInputError(f"{self.name}: missing parameter {exc}") from None

    def wind_cdf(self) -> WindFarmCDF:
        p = self.params
        rated = p.get("rated_power")
        if rated is None:
            rated = p["turbines"] * p["turbine_rated"]
            if p["turbines"] < 1:
                raise InvalidInputError("turbine count must be >= 1")
        return WindFarmCDF(
            p["shape"], p["scale"], rated,
            p.get("v_ci", 3.0), p.get("v_r", 12.0), p.get("v_co", 25.0),
        )

    def scale_at(self, hour: int) -> float:
        if not self.hour_profile:
            return 1.0
        return float(self.hour_profile[hour])


def encode(spec: UncertainInputSpec, resolution: int = DEFAULT_RESOLUTION) -> DSStructure:
    """Equiprobable DS structure of ``resolution`` elements for an uncertain input."""
    if not isinstance(resolution, (int, np.integer)) or resolution < 2:
        raise InvalidInputError("resolution must be an integer >= 2")
    n = int(resolution)
    p = spec.params
    mass = np.full(n, 1.0 / n)
    if spec.kind == "weibull-windfarm":
        F = spec.wind_cdf()
        q = F.quantile(np.arange(n + 1) / n)
        q[0] = 0.0
        return DSStructure(q[:-1], q[1:], mass)
    if spec.kind == "interval":
        return DSStructure(np.full(n, p["lo"]), np.full(n, p["hi"]), mass)
    if spec.kind == "point":
        return DSStructure(np.full(n, p["value"]), np.full(n, p["value"]), mass)
    alpha = np.arange(1, n + 1) / n
    a, m, b = p["a"], p["m"], p["b"]
    return DSStructure(a + alpha * (m - a), b - alpha * (b - m), mass)


# ---------------------------------------------------------------------------
# arithmetic


def _interval_op(alo, ahi, blo, bhi, op):
    if op == "+":
        return alo + blo, ahi + bhi
    if op == "-":
        return alo - bhi, ahi - blo
    if op == "*":
        c = np.stack([alo * blo, alo * bhi, ahi * blo, ahi * bhi])
        return c.min(axis=0), c.max(axis=0)
    raise UnsupportedOperationError(f"unsupported operator {op!r}")


def combine_independent(x: DSStructure, y: DSStructure, op: str,
                        resolution: int | None = DEFAULT_RESOLUTION) -> DSStructure:
    """Random-set product of independent ``x`` and ``y`` under ``op``.

    Pass ``resolution=None`` to get the raw ``len(x) * len(y)`` structure.
    """
    lo, hi = _interval_op(x.lo[:, None], x.hi[:, None], y.lo[None, :], y.hi[None, :], op)
    mass = np.outer(x.mass, y.mass)
    raw = DSStructure(lo.ravel(), hi.ravel(), mass.ravel())
    if resolution is None:
        return raw
    return condense(raw, resolution)


def _negate(pb: PBox) -> PBox:
    """P-box of ``-X``: element ``[lo, hi]`` maps to ``[-hi, -lo]``."""
    lm = np.diff(np.concatenate(([0.0], pb.left_cum)))
    rm = np.diff(np.concatenate(([0.0], pb.right_cum)))
    return PBox(
        left=_readonly(-pb.right[::-1]),
        left_cum=_readonly(_cumulative(rm[::-1])),
        right=_readonly(-pb.left[::-1]),
        right_cum=_readonly(_cumulative(lm[::-1])),
    )


def convolve_dependent(x: PBox, y: PBox, op: str, mode: str,
                       resolution: int = DEFAULT_RESOLUTION) -> PBox:
    """Combine two P-boxes under perfect, opposite or unknown dependence.

    ``op`` must be monotone in each argument over the supports: ``+`` and
    ``-`` always qualify, ``*`` only for non-negative supports.
    """
    if mode not in ("perfect", "opposite", "unknown"):
        raise InvalidInputError(f"unknown dependence mode {mode!r}")
    if op not in ("+", "-", "*"):
        raise UnsupportedOperationError(f"unsupported operator {op!r}")
    if op == "*" and (x.left[0] < 0 or y.left[0] < 0):
        raise UnsupportedOperationError("'*' is not monotone over supports containing negatives")
    n = int(resolution)
    if op == "-":
        # x - y = x + (-y); negating y flips comonotone and countermonotone
        y = _negate(y)
        op = "+"
        mode = {"perfect": "opposite", "opposite": "perfect"}.get(mode, mode)
    xl, xr = _equiprobable_edges(x, n)
    yl, yr = _equiprobable_edges(y, n)
    f = np.add if op == "+" else np.multiply
    if mode == "perfect":
        zl, zr = f(xl, yl), f(xr, yr)
    elif mode == "opposite":
        zl, zr = f(xl, yl[::-1]), f(xr, yr[::-1])
    else:
        # discrete Williamson-Downs bounds on the equiprobable grid
        i = np.arange(n)
        zl = np.empty(n)
        zr = np.empty(n)
        for k in range(n):
            a = i[: k + 1]
            zl[k] = np.max(f(xl[a], yl[k - a]))
            b = i[k:]
            zr[k] = np.min(f(xr[b], yr[n - 1 + k - b]))
    return to_pbox(DSStructure(np.minimum(zl, zr), zr, np.full(n, 1.0 / n)))


# ---------------------------------------------------------------------------
# queries


def _quantile_grid(a: PBox, b: PBox) -> np.ndarray:
    knots = np.unique(np.concatenate(([0.0, 1.0], a.left_cum, a.right_cum, b.left_cum, b.right_cum)))
    keep = np.concatenate(([True], np.diff(knots) > _LEVEL_TOL))
    knots = knots[keep]
    knots[-1] = 1.0
    return 0.5 * (knots[:-1] + knots[1:])


def quantile_dominates(a: PBox, b: PBox) -> bool:
    """True iff ``a`` is better (smaller) than ``b`` in the quantile order.

    Both bounding quantile functions of ``a`` must be everywhere ``<=`` those
    of ``b`` and strictly smaller somewhere.  Quantiles are step functions,
    so checking one point inside every interval between knots is exhaustive.
    """
    p = _quantile_grid(a, b)
    al, ar = a.left_quantile(p), a.right_quantile(p)
    bl, br = b.left_quantile(p), b.right_quantile(p)
    if np.any(al > bl) or np.any(ar > br):
        return False
    return bool(np.any(al < bl) or np.any(ar < br))


def satisfaction_bounds(x: DSStructure | PBox, threshold: float, sense: str) -> tuple[float, float]:
    """Lower and upper probability that ``x <= threshold`` (or ``>=``)."""
    pb = x if isinstance(x, PBox) else to_pbox(x)
    if sense in ("<=", "≤", "le"):
        return pb.lower_cdf(threshold), pb.upper_cdf(threshold)
    if sense in (">=", "≥", "ge"):
        return 1.0 - pb.upper_cdf_left(threshold), 1.0 - pb.lower_cdf_left(threshold)
    raise InvalidInputError(f"unknown sense {sense!r}")


def two_sided_lower_probability(x: DSStructure | PBox, lo: float, hi: float) -> float:
    """Lower probability of ``lo <= x <= hi`` implied by the P-box."""
    pb = x if isinstance(x, PBox) else to_pbox(x)
    return max(0.0, pb.lower_cdf(hi) - pb.upper_cdf_left(lo))


# ---------------------------------------------------------------------------
# CSV serialisation


def _fmt(v: float) -> str:
    return repr(float(v))


def write_ds_csv(x: DSStructure, path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["lo", "hi", "mass"])
        for e in x:
            w.writerow([_fmt(e.lo), _fmt(e.hi), _fmt(e.mass)])


def read_ds_csv(path) -> DSStructure:
    with open(path, newline="") as fh:
        rows = list(csv.DictReader(fh))
    return DSStructure.from_elements((float(r["lo"]), float(r["hi"]), float(r["mass"])) for r in rows)


def write_pbox_csv(pb: PBox, path) -> None:
    xs = pb.knots()
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["x", "lowerCDF", "upperCDF"])
        for x, lo, up in zip(xs, pb.lower_cdf(xs), pb.upper_cdf(xs)):
            w.writerow([_fmt(x), _fmt(lo), _fmt(up)])
