"""Quadratic forms over normalized Dempster-Shafer noise symbols.

An uncertain quantity is written ``x0 + X1 @ eps + eps @ X2 @ eps`` where each
noise symbol ``eps_i`` carries its own DS structure on ``[-1, 1]``.  Sums,
scalings and products follow the second-order recipe exactly; third and
fourth order terms of a product are dropped.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Mapping, Sequence

import numpy as np

from .ds import DEFAULT_RESOLUTION, DSStructure
from .errors import InvalidInputError

# product-mass tolerance for the equal-mass condensation shortcut
_EQUAL_MASS_RTOL = 1e-12
_LEVEL_TOL = 1e-9


@dataclass(frozen=True, eq=False)
class NoiseVector:
    """Ordered noise symbols with the midpoints/radii that normalize them."""

    names: tuple
    symbols: tuple  # DSStructure per symbol, in normalized units
    midpoints: np.ndarray
    radii: np.ndarray

    @classmethod
    def from_inputs(cls, inputs: Mapping[str, DSStructure]) -> "NoiseVector":
        names, syms, mids, rads = [], [], [], []
        for name, ds in inputs.items():
            lo, hi = ds.support
            mid, rad = 0.5 * (lo + hi), 0.5 * (hi - lo)
            names.append(name)
            mids.append(mid)
            rads.append(rad)
            if rad > 0:
                syms.append(ds.affine(1.0 / rad, -mid / rad))
            else:
                syms.append(DSStructure.degenerate(0.0, len(ds)))
        return cls(tuple(names), tuple(syms), np.array(mids, float), np.array(rads, float))

    @classmethod
    def empty(cls) -> "NoiseVector":
        return cls((), (), np.zeros(0), np.zeros(0))

    def __len__(self):
        return len(self.names)

    def index(self, name: str) -> int:
        try:
            return self.names.index(name)
        except ValueError:
            raise InvalidInputError(f"unknown noise symbol {name!r}") from None

    def denormalize(self, name: str, eps: float) -> float:
        i = self.index(name)
        return float(self.midpoints[i] + self.radii[i] * eps)


@dataclass(frozen=True, eq=False)
class QuadraticForm:
    central: float
    linear: np.ndarray
    quadratic: np.ndarray

    def __post_init__(self):
        lin = np.array(self.linear, dtype=float).ravel()
        quad = np.array(self.quadratic, dtype=float).reshape(lin.size, lin.size)
        central = float(self.central)
        if not (np.isfinite(central) and np.all(np.isfinite(lin)) and np.all(np.isfinite(quad))):
            raise InvalidInputError("quadratic-form coefficients must be finite")
        quad = 0.5 * (quad + quad.T)
        lin.setflags(write=False)
        quad.setflags(write=False)
        object.__setattr__(self, "central", central)
        object.__setattr__(self, "linear", lin)
        object.__setattr__(self, "quadratic", quad)

    @classmethod
    def constant(cls, value: float, size: int) -> "QuadraticForm":
        return cls(value, np.zeros(size), np.zeros((size, size)))

    @classmethod
    def zero(cls, size: int) -> "QuadraticForm":
        return cls.constant(0.0, size)

    @property
    def size(self) -> int:
        return self.linear.size

    def is_constant(self) -> bool:
        return not (np.any(self.linear) or np.any(self.quadratic))

    def __call__(self, eps) -> float:
        e = np.asarray(eps, dtype=float)
        return self.central + self.linear @ e + e @ self.quadratic @ e

    def evaluate_many(self, eps: np.ndarray) -> np.ndarray:
        e = np.asarray(eps, dtype=float)
        return self.central + e @ self.linear + np.einsum("ni,ij,nj->n", e, self.quadratic, e)

    def __add__(self, other):
        if isinstance(other, QuadraticForm):
            return qf_add(self, other)
        return QuadraticForm(self.central + float(other), self.linear, self.quadratic)

    __radd__ = __add__

    def __sub__(self, other):
        if isinstance(other, QuadraticForm):
            return qf_sub(self, other)
        return QuadraticForm(self.central - float(other), self.linear, self.quadratic)

    def __rsub__(self, other):
        return qf_scale(-1.0, self) + other

    def __neg__(self):
        return qf_scale(-1.0, self)

    def __mul__(self, other):
        if isinstance(other, QuadraticForm):
            return qf_mul(self, other)
        return qf_scale(other, self)

    __rmul__ = __mul__

    def to_text(self) -> str:
        """Debug text used by golden-file tests."""
        lines = [f"central {self.central!r}", "linear " + " ".join(repr(float(v)) for v in self.linear)]
        for row in self.quadratic:
            lines.append("quadratic " + " ".join(repr(float(v)) for v in row))
        return "\n".join(lines) + "\n"


def _check_basis(x: QuadraticForm, y: QuadraticForm):
    if x.size != y.size:
        raise InvalidInputError(f"basis mismatch: {x.size} vs {y.size} noise symbols")


def qf_add(x: QuadraticForm, y: QuadraticForm) -> QuadraticForm:
    _check_basis(x, y)
    return QuadraticForm(x.central + y.central, x.linear + y.linear, x.quadratic + y.quadratic)


def qf_sub(x: QuadraticForm, y: QuadraticForm) -> QuadraticForm:
    _check_basis(x, y)
    return QuadraticForm(x.central - y.central, x.linear - y.linear, x.quadratic - y.quadratic)


def qf_scale(alpha: float, x: QuadraticForm) -> QuadraticForm:
    alpha = float(alpha)
    if not np.isfinite(alpha):
        raise InvalidInputError("scale factor must be finite")
    return QuadraticForm(alpha * x.central, alpha * x.linear, alpha * x.quadratic)


def qf_mul(x: QuadraticForm, y: QuadraticForm) -> QuadraticForm:
    """Second-order product; terms of order three and four are truncated."""
    _check_basis(x, y)
    x0, y0 = x.central, y.central
    quad = y0 * x.quadratic + x0 * y.quadratic + np.outer(x.linear, y.linear)
    return QuadraticForm(x0 * y0, y0 * x.linear + x0 * y.linear, quad)


def qf_sum(forms: Sequence[QuadraticForm], size: int) -> QuadraticForm:
    out = QuadraticForm.zero(size)
    for f in forms:
        out = qf_add(out, f)
    return out


def qf_from_input(name: str, noise: NoiseVector, scale: float = 1.0) -> QuadraticForm:
    """First-order lifting of one input; ``scale`` applies an hourly profile factor."""
    i = noise.index(name)
    lin = np.zeros(len(noise))
    lin[i] = scale * noise.radii[i]
    return QuadraticForm(scale * noise.midpoints[i], lin, np.zeros((len(noise), len(noise))))


# ---------------------------------------------------------------------------
# conversion to DS structures


def _symbol_elements(ds: DSStructure):
    """Focal elements of a symbol; identical-element structures collapse to one element."""
    if np.all(ds.lo == ds.lo[0]) and np.all(ds.hi == ds.hi[0]):
        return ds.lo[:1].copy(), ds.hi[:1].copy(), np.ones(1)
    return ds.lo.copy(), ds.hi.copy(), ds.mass.copy()


def _univariate_range(lin, sq, a, b):
    """Exact range of ``lin*e + sq*e**2`` over each ``[a_j, b_j]``; batched over rows."""
    lin = lin[:, None]
    sq = sq[:, None]
    fa = lin * a + sq * a * a
    fb = lin * b + sq * b * b
    lo = np.minimum(fa, fb)
    hi = np.maximum(fa, fb)
    if np.any(sq != 0):
        with np.errstate(divide="ignore", invalid="ignore"):
            vert = np.where(sq != 0, -lin / (2.0 * sq), np.nan)
            fv = np.where(sq != 0, -lin * lin / (4.0 * sq), 0.0)
        inside = (vert > a) & (vert < b)
        lo = np.where(inside, np.minimum(lo, fv), lo)
        hi = np.where(inside, np.maximum(hi, fv), hi)
    return lo, hi


def batch_condense(lo: np.ndarray, hi: np.ndarray, mass: np.ndarray, n: int):
    """Row-wise outer condensation of ``B`` DS structures sharing masses.

    ``lo``/``hi`` are ``(B, N)``; returns equiprobable ``(B, n)`` edges.
    """
    B, N = lo.shape
    uniform = np.allclose(mass, mass[0], rtol=_EQUAL_MASS_RTOL, atol=0.0)
    if uniform and N % n == 0:
        step = N // n
        sl = np.sort(lo, axis=1)
        sh = np.sort(hi, axis=1)
        k = np.arange(n)
        left, right = sl[:, k * step], sh[:, (k + 1) * step - 1]
        return np.minimum(left, right), right
    mass = mass / mass.sum()
    offs = np.arange(B, dtype=float)[:, None]
    ioff = np.arange(B)[:, None] * N
    levels = np.arange(n, dtype=float)[None, :] / n

    def pick(vals, target, side):
        order = np.argsort(vals, axis=1, kind="stable")
        sv = np.take_along_axis(vals, order, axis=1)
        cum = np.cumsum(mass[order], axis=1)
        cum /= cum[:, -1:]
        idx = np.searchsorted((cum + offs).ravel(), (target + offs).ravel(), side=side)
        idx = np.clip(idx.reshape(B, n) - ioff, 0, N - 1)
        return np.take_along_axis(sv, idx, axis=1)

    left = pick(lo, levels + _LEVEL_TOL, "right")
    right = pick(hi, levels + 1.0 / n - _LEVEL_TOL, "left")
    return np.minimum(left, right), right


def batch_qf_to_ds(central, linear, quadratic, noise: NoiseVector,
                   resolution: int = DEFAULT_RESOLUTION):
    """Propagate ``B`` quadratic forms on a common basis to DS structures.

    Returns ``(lo, hi)`` arrays of shape ``(B, resolution)``; every element
    carries mass ``1/resolution``.

    Symbols are accumulated one at a time (fewest distinct focal elements
    first).  Each joint element gets the sum of exact univariate term ranges
    plus vertex-enumerated bilinear ranges.  Joint element boxes are kept as
    long as the product count stays within ``resolution``; past that the
    accumulated structure is condensed and bilinear terms against already
    absorbed symbols are ranged over those symbols' full supports.
    """
    central = np.atleast_1d(np.asarray(central, dtype=float))
    linear = np.asarray(linear, dtype=float).reshape(central.size, -1)
    quadratic = np.asarray(quadratic, dtype=float).reshape(central.size, linear.shape[1], linear.shape[1])
    B, k = linear.shape
    n = int(resolution)
    if k != len(noise):
        raise InvalidInputError(f"basis mismatch: {k} coefficients, {len(noise)} noise symbols")
    quadratic = 0.5 * (quadratic + np.swapaxes(quadratic, 1, 2))

    elems = {}
    active = []
    for s in range(k):
        if not (np.any(linear[:, s]) or np.any(quadratic[:, s, :])):
            continue
        a, b, m = _symbol_elements(noise.symbols[s])
        elems[s] = (a, b, m)
        active.append(s)
    if not active:
        c = np.repeat(central[:, None], n, axis=1)
        return c, c.copy()
    active.sort(key=lambda s: elems[s][0].size)

    s0 = active[0]
    a0, b0, m0 = elems[s0]
    acc_lo, acc_hi = _univariate_range(linear[:, s0], quadratic[:, s0, s0], a0, b0)
    acc_mass = m0
    boxes = {s0: np.arange(a0.size)}  # element index per absorbed symbol, None once condensed
    absorbed = [s0]

    for pos, s in enumerate(active[1:], start=1):
        a, b, m = elems[s]
        tl, th = _univariate_range(linear[:, s], quadratic[:, s, s], a, b)
        lo = acc_lo[:, :, None] + tl[:, None, :]
        hi = acc_hi[:, :, None] + th[:, None, :]
        for r in absorbed:
            c = 2.0 * quadratic[:, r, s]
            if not np.any(c):
                continue
            ar, br, _ = elems[r]
            if boxes[r] is not None:
                ra, rb = ar[boxes[r]], br[boxes[r]]
            else:
                ra = np.full(acc_mass.size, ar.min())
                rb = np.full(acc_mass.size, br.max())
            p = np.stack([np.outer(ra, a), np.outer(ra, b), np.outer(rb, a), np.outer(rb, b)])
            pmin, pmax = p.min(axis=0), p.max(axis=0)
            cpos = np.maximum(c, 0.0)[:, None, None]
            cneg = np.minimum(c, 0.0)[:, None, None]
            lo += cpos * pmin
            lo += cneg * pmax
            hi += cpos * pmax
            hi += cneg * pmin
        count = acc_mass.size * a.size
        acc_lo = lo.reshape(B, count)
        acc_hi = hi.reshape(B, count)
        acc_mass = np.outer(acc_mass, m).ravel()
        for r in absorbed:
            if boxes[r] is not None:
                boxes[r] = np.repeat(boxes[r], a.size)
        boxes[s] = np.tile(np.arange(a.size), count // a.size)
        absorbed.append(s)
        more = pos < len(active) - 1
        if more and count > n:
            acc_lo, acc_hi = batch_condense(acc_lo, acc_hi, acc_mass, n)
            acc_mass = np.full(n, 1.0 / n)
            boxes = {r: None for r in absorbed}

    lo, hi = batch_condense(acc_lo, acc_hi, acc_mass, n)
    return central[:, None] + lo, central[:, None] + hi


def qf_to_ds(x: QuadraticForm, noise: NoiseVector, resolution: int = DEFAULT_RESOLUTION) -> DSStructure:
    lo, hi = batch_qf_to_ds(np.array([x.central]), x.linear[None, :], x.quadratic[None, :, :], noise, resolution)
    return DSStructure(lo[0], hi[0], np.full(resolution, 1.0 / resolution))


def sample_noise(noise: NoiseVector, size: int, rng: np.random.Generator) -> np.ndarray:
    """Random noise values: a focal element per symbol by mass, uniform inside it."""
    out = np.empty((size, len(noise)))
    for j, ds in enumerate(noise.symbols):
        pick = rng.choice(len(ds), size=size, p=ds.mass / ds.mass.sum())
        out[:, j] = rng.uniform(ds.lo[pick], ds.hi[pick])
    return out
