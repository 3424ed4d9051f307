"""Compactly supported / Gaussian amplitudes, closed under differentiation.

An amplitude on C^n x R^r is a finite sum of terms

    poly(v) * exp(-v^T Q v) * prod_k profile_k(|v_block|),

with rational polynomial coefficients, a rational PSD quadratic form, and
radial cutoff factors built from one fixed mollifier profile.  The class is
closed under d/dv_i, multiplication, rescaling v -> tau v, and admits exact
evaluation of mixed derivatives at a point, which is what the stationary
phase layers need.

Axis layout: the 2n phase-space coordinates come first, interleaved
(x_1, y_1, ..., x_n, y_n), followed by the r Lie-algebra coordinates.

The cutoff profile is

    Phi(u) = int_u^1 m(s) ds / int_{-1}^1 m(s) ds,
    m(s)   = exp(beta (1 - 1/(1 - s^2))),

composed with u = (2 t^2 - rin^2 - rout^2) / (rout^2 - rin^2), an affine
function of the squared radius.  Phi is flat at both ends, so the bump is
C-infinity even across the inner radius; derivatives of the mollifier are
m^(k) = m P_k / (1-s^2)^(2k) with integer polynomials P_k computed once.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from fractions import Fraction

import numpy as np

from ._exact import Poly, QQi, as_fraction
from .errors import CapabilityError, DataError, DomainError, PreconditionError

PROFILE_ORDER_CAP = 12

_GL64_X, _GL64_W = np.polynomial.legendre.leggauss(64)


# ---------------------------------------------------------------------------
# mollifier profile


def _poly_diff(c):
    return [i * c[i] for i in range(1, len(c))] or [0]


def _poly_mul(a, b):
    out = [0] * (len(a) + len(b) - 1)
    for i, x in enumerate(a):
        for j, y in enumerate(b):
            out[i + j] += x * y
    return out


def _poly_add(a, b):
    n = max(len(a), len(b))
    a = a + [0] * (n - len(a))
    b = b + [0] * (n - len(b))
    return [x + y for x, y in zip(a, b)]


_PK_CACHE: dict[int, list[list[int]]] = {}


def _mollifier_polys(beta: int) -> list[list[int]]:
    """P_k for m^(k) = m P_k / (1-s^2)^(2k), k = 0..PROFILE_ORDER_CAP-1."""
    if beta not in _PK_CACHE:
        one_minus = [1, 0, -1]
        polys = [[1]]
        for k in range(PROFILE_ORDER_CAP - 1):
            p = polys[-1]
            inner = _poly_add(_poly_mul(_poly_diff(p), one_minus),
                              _poly_mul([0, 4 * k], p))
            nxt = _poly_add(_poly_mul(inner, one_minus),
                            _poly_mul([0, -2 * beta], p))
            polys.append(nxt)
        _PK_CACHE[beta] = polys
    return _PK_CACHE[beta]


_NORM_CACHE: dict[int, float] = {}


def _mollifier_norm(beta: int) -> float:
    if beta not in _NORM_CACHE:
        s = _GL64_X
        vals = np.exp(beta * (1.0 - 1.0 / (1.0 - s * s)))
        _NORM_CACHE[beta] = float(_GL64_W @ vals)
    return _NORM_CACHE[beta]


def profile_value(u, order: int = 0, beta: int = 1):
    """Phi^(order)(u) for the falling profile: 1 below u = -1, 0 above u = 1."""
    u = np.asarray(u, dtype=float)
    scalar = u.ndim == 0
    u = np.atleast_1d(u)
    out = np.zeros_like(u)
    if order == 0:
        out[u <= -1.0] = 1.0
        mid = (u > -1.0) & (u < 1.0)
        if np.any(mid):
            um = u[mid]
            half = 0.5 * (1.0 - um)
            s = half[:, None] * _GL64_X[None, :] + 0.5 * (1.0 + um)[:, None]
            m = np.exp(beta * (1.0 - 1.0 / (1.0 - s * s)))
            out[mid] = half * (m @ _GL64_W) / _mollifier_norm(beta)
        return out[0] if scalar else out
    if order > PROFILE_ORDER_CAP:
        raise CapabilityError(
            f"profile derivatives are tabulated up to order {PROFILE_ORDER_CAP}")
    mid = np.abs(u) < 1.0
    if np.any(mid):
        um = u[mid]
        g = 1.0 - um * um
        k = order - 1
        pk = np.polynomial.polynomial.polyval(
            um, np.array(_mollifier_polys(beta)[k], dtype=float))
        # evaluate m / g^(2k) in log space so g -> 0 underflows cleanly
        with np.errstate(over="ignore"):
            mag = np.exp(beta * (1.0 - 1.0 / g) - 2.0 * k * np.log(g))
        out[mid] = -mag * pk / _mollifier_norm(beta)
    return out[0] if scalar else out


# ---------------------------------------------------------------------------
# amplitude terms


@dataclass(frozen=True)
class BumpFactor:
    """Radial cutoff factor Phi^(order)(u(t^2)) on one coordinate block.

    ``rising`` flips a plain cutoff (order 0) to 1 - Phi, which vanishes near
    the origin; derivative factors are always stored in falling form.
    """

    block: str
    rin2: Fraction
    rout2: Fraction
    order: int = 0
    beta: int = 1
    rising: bool = False

    def __post_init__(self):
        if self.block not in ("p", "X"):
            raise PreconditionError(f"unknown bump block {self.block!r}")
        if not 0 <= self.rin2 < self.rout2:
            raise PreconditionError("bump needs 0 <= rin < rout")
        if self.rising and self.order != 0:
            raise PreconditionError("rising form applies to order 0 only")


@dataclass(frozen=True)
class Term:
    poly: Poly
    quad: tuple[tuple[Fraction, ...], ...]
    bumps: tuple[BumpFactor, ...]


def _zero_quad(dim: int):
    z = Fraction(0)
    return tuple(tuple(z for _ in range(dim)) for _ in range(dim))


def _check_psd(quad) -> None:
    q = np.array([[float(x) for x in row] for row in quad])
    if q.shape[0] != q.shape[1] or not np.array_equal(q, q.T):
        raise PreconditionError("quadratic form must be square and symmetric")
    if q.shape[0] and float(np.min(np.linalg.eigvalsh(q))) < -1e-9:
        raise PreconditionError("quadratic form must be positive semidefinite")


@dataclass(frozen=True)
class AmplitudeExpr:
    """Finite sum of poly * gaussian * bump terms on C^n x R^r."""

    complex_dim: int
    torus_rank: int
    terms: tuple[Term, ...]

    @property
    def dim(self) -> int:
        return 2 * self.complex_dim + self.torus_rank

    def block_axes(self, block: str) -> range:
        if block == "p":
            return range(2 * self.complex_dim)
        if block == "X":
            return range(2 * self.complex_dim, self.dim)
        raise PreconditionError(f"unknown block {block!r}")

    # -- algebra ------------------------------------------------------------

    def _like(self, other) -> "AmplitudeExpr":
        if not isinstance(other, AmplitudeExpr):
            c = QQi(as_fraction(other), 0) if not isinstance(other, QQi) else other
            return constant(self.complex_dim, self.torus_rank, c)
        if (other.complex_dim, other.torus_rank) != (self.complex_dim, self.torus_rank):
            raise PreconditionError("amplitude dimensions do not match")
        return other

    def __add__(self, other):
        other = self._like(other)
        return AmplitudeExpr(self.complex_dim, self.torus_rank,
                             self.terms + other.terms)

    __radd__ = __add__

    def __neg__(self):
        return AmplitudeExpr(
            self.complex_dim, self.torus_rank,
            tuple(Term(-t.poly, t.quad, t.bumps) for t in self.terms))

    def __sub__(self, other):
        return self + (-self._like(other))

    def __rsub__(self, other):
        return self._like(other) + (-self)

    def __mul__(self, other):
        other = self._like(other)
        terms = []
        for a in self.terms:
            for b in other.terms:
                quad = tuple(tuple(x + y for x, y in zip(ra, rb))
                             for ra, rb in zip(a.quad, b.quad))
                terms.append(Term(a.poly * b.poly, quad, a.bumps + b.bumps))
        return AmplitudeExpr(self.complex_dim, self.torus_rank, tuple(terms))

    __rmul__ = __mul__

    # -- evaluation ---------------------------------------------------------

    def is_real(self) -> bool:
        return all(c.im == 0 for t in self.terms for c in t.poly.terms.values())

    def evaluate(self, pts):
        arr = np.asarray(pts, dtype=float)
        single = arr.ndim == 1
        flat = arr.reshape(-1, self.dim)
        dtype = float if self.is_real() else complex
        out = np.zeros(flat.shape[0], dtype=dtype)
        for t in self.terms:
            out += self._term_values(t, flat, dtype)
        if single:
            return out[0]
        return out.reshape(arr.shape[:-1])

    def _term_values(self, t: Term, flat, dtype):
        acc = np.zeros(flat.shape[0], dtype=dtype)
        for exps, c in t.poly.terms.items():
            cval = float(c.re) if dtype is float else complex(c)
            mono = np.full(flat.shape[0], cval, dtype=dtype)
            for k, e in enumerate(exps):
                if e:
                    mono *= flat[:, k] ** e
            acc += mono
        q = np.array([[float(x) for x in row] for row in t.quad])
        if np.any(q):
            acc = acc * np.exp(-np.einsum("ni,ij,nj->n", flat, q, flat))
        for b in t.bumps:
            axes = list(self.block_axes(b.block))
            t2 = np.sum(flat[:, axes] ** 2, axis=1)
            rin2, rout2 = float(b.rin2), float(b.rout2)
            u = (2.0 * t2 - rin2 - rout2) / (rout2 - rin2)
            v = profile_value(u, b.order, b.beta)
            acc = acc * (1.0 - v if b.rising else v)
        return acc

    # -- calculus -----------------------------------------------------------

    def differentiate(self, axis: int) -> "AmplitudeExpr":
        if not 0 <= axis < self.dim:
            raise PreconditionError(f"axis {axis} out of range")
        terms = []
        for t in self.terms:
            dp = t.poly.diff(axis)
            if not dp.is_zero():
                terms.append(Term(dp, t.quad, t.bumps))
            lin = Poly.const(self.dim, QQi(0, 0))
            for j in range(self.dim):
                q = t.quad[axis][j]
                if q:
                    lin = lin + Poly.var(self.dim, j) * QQi(-2 * q, 0)
            if not lin.is_zero():
                terms.append(Term(t.poly * lin, t.quad, t.bumps))
            for i, b in enumerate(t.bumps):
                if axis not in self.block_axes(b.block):
                    continue
                if b.order + 1 > PROFILE_ORDER_CAP:
                    raise CapabilityError(
                        f"bump derivative order {b.order + 1} exceeds the "
                        f"tabulated cap {PROFILE_ORDER_CAP}")
                chain = Fraction(4, 1) / (b.rout2 - b.rin2)
                if b.rising:
                    chain = -chain
                mono = Poly.var(self.dim, axis) * QQi(chain, 0)
                nb = replace(b, order=b.order + 1, rising=False)
                terms.append(Term(t.poly * mono, t.quad,
                                  t.bumps[:i] + (nb,) + t.bumps[i + 1:]))
        return AmplitudeExpr(self.complex_dim, self.torus_rank,
                             _merge_terms(terms))

    def rescale_p(self, tau: Fraction) -> "AmplitudeExpr":
        """Exact substitution of tau * w for the phase-space block."""
        tau = as_fraction(tau)
        if tau <= 0:
            raise PreconditionError("rescaling factor must be positive")
        np_axes = 2 * self.complex_dim
        factors = [tau] * np_axes + [Fraction(1)] * self.torus_rank
        terms = []
        for t in self.terms:
            quad = tuple(tuple(t.quad[i][j] * factors[i] * factors[j]
                               for j in range(self.dim))
                         for i in range(self.dim))
            bumps = tuple(
                replace(b, rin2=b.rin2 / tau**2, rout2=b.rout2 / tau**2)
                if b.block == "p" else b
                for b in t.bumps)
            terms.append(Term(t.poly.scale_vars(factors), quad, bumps))
        return AmplitudeExpr(self.complex_dim, self.torus_rank, tuple(terms))

    def simplify(self) -> "AmplitudeExpr":
        """Merge terms sharing a Gaussian and cutoff structure."""
        return AmplitudeExpr(self.complex_dim, self.torus_rank,
                             _merge_terms(self.terms))


def _merge_terms(terms) -> tuple[Term, ...]:
    merged: dict[tuple, Poly] = {}
    keys: list[tuple] = []
    for t in terms:
        key = (t.quad, t.bumps)
        if key in merged:
            merged[key] = merged[key] + t.poly
        else:
            merged[key] = t.poly
            keys.append(key)
    out = tuple(Term(merged[k], k[0], k[1]) for k in keys
                if not merged[k].is_zero())
    if not out:
        dim = terms[0].poly.nvars if terms else 0
        out = (Term(Poly.const(dim, QQi(0, 0)), _zero_quad(dim), ()),)
    return out


# ---------------------------------------------------------------------------
# constructors


def _unit_term(dim: int) -> Term:
    return Term(Poly.const(dim, QQi(1, 0)), _zero_quad(dim), ())


def constant(n: int, r: int, c) -> AmplitudeExpr:
    dim = 2 * n + r
    c = c if isinstance(c, QQi) else QQi(as_fraction(c), 0)
    return AmplitudeExpr(n, r, (Term(Poly.const(dim, c), _zero_quad(dim), ()),))


def gauss_block(n: int, r: int, block: str, c=1) -> AmplitudeExpr:
    """exp(-c |v_block|^2)."""
    c = as_fraction(c)
    if c <= 0:
        raise PreconditionError("gaussian coefficient must be positive")
    dim = 2 * n + r
    base = AmplitudeExpr(n, r, (_unit_term(dim),))
    quad = [[Fraction(0)] * dim for _ in range(dim)]
    for i in base.block_axes(block):
        quad[i][i] = c
    _check_psd(quad)
    t = Term(Poly.const(dim, QQi(1, 0)), tuple(tuple(row) for row in quad), ())
    return AmplitudeExpr(n, r, (t,))


def gauss_quad(n: int, r: int, quad) -> AmplitudeExpr:
    """exp(-v^T Q v) for an explicit rational PSD matrix."""
    dim = 2 * n + r
    q = tuple(tuple(as_fraction(x) for x in row) for row in quad)
    if len(q) != dim or any(len(row) != dim for row in q):
        raise PreconditionError(f"quadratic form must be {dim} x {dim}")
    _check_psd(q)
    return AmplitudeExpr(n, r, (Term(Poly.const(dim, QQi(1, 0)), q, ()),))


def bump_block(n: int, r: int, block: str, rin, rout,
               beta: int = 1, rising: bool = False) -> AmplitudeExpr:
    rin, rout = as_fraction(rin), as_fraction(rout)
    f = BumpFactor(block, rin * rin, rout * rout, 0, beta, rising)
    dim = 2 * n + r
    return AmplitudeExpr(n, r, (Term(Poly.const(dim, QQi(1, 0)),
                                     _zero_quad(dim), (f,)),))


def poly_amplitude(n: int, r: int, poly: Poly) -> AmplitudeExpr:
    dim = 2 * n + r
    if poly.nvars != dim:
        raise PreconditionError("polynomial arity does not match the model")
    return AmplitudeExpr(n, r, (Term(poly, _zero_quad(dim), ()),))


def shell_cutoff(n: int, r: int, block: str = "p", beta: int = 1) -> AmplitudeExpr:
    """One dyadic shell factor: equals phi(t/2) - phi(t) for the standard
    cutoff phi (1 on t <= 1/4, 0 on t >= 1/2), written as the product of a
    rising and a falling profile so its annulus support is explicit."""
    rise = bump_block(n, r, block, Fraction(1, 4), Fraction(1, 2), beta, rising=True)
    fall = bump_block(n, r, block, Fraction(1, 2), Fraction(1), beta)
    return rise * fall


def head_cutoff(n: int, r: int, block: str = "p", beta: int = 1) -> AmplitudeExpr:
    """phi(t/2): 1 on t <= 1/2, 0 on t >= 1."""
    return bump_block(n, r, block, Fraction(1, 2), Fraction(1), beta)


def mixed_pairing_derivative(a: AmplitudeExpr, k: int,
                             pairs: int | None = None) -> AmplitudeExpr:
    """(sum_i d/dB_i d/dxi_i)^k with B_i, xi_i the interleaved pair axes."""
    m = a.complex_dim if pairs is None else pairs
    out = a
    for _ in range(k):
        nxt = None
        for i in range(m):
            piece = out.differentiate(2 * i).differentiate(2 * i + 1)
            nxt = piece if nxt is None else nxt + piece
        out = nxt
    return out


# ---------------------------------------------------------------------------
# support geometry


@dataclass(frozen=True)
class SupportBox:
    """Per-axis half-widths outside which |a| stays below the cutoff, plus,
    when the phase-space block carries radial cutoffs, the annulus radii of
    its support."""

    halfwidths: tuple[float, ...]
    p_radius: tuple[float, float] | None = None


def _axis_gauss_coeffs(quad, dim: int) -> list[float]:
    q = np.array([[float(x) for x in row] for row in quad])
    if not np.any(q):
        return [0.0] * dim
    off = q - np.diag(np.diag(q))
    if not np.any(off):
        return [float(q[i, i]) for i in range(dim)]
    if float(np.min(np.linalg.eigvalsh(q))) > 1e-12:
        inv = np.linalg.inv(q)
        return [1.0 / float(inv[i, i]) for i in range(dim)]
    # singular with cross terms: only claim decay on axes decoupled from
    # the kernel
    return [float(q[i, i]) if not np.any(off[i]) else 0.0 for i in range(dim)]


def support_box(a: AmplitudeExpr, cutoff: float = 1e-14) -> SupportBox:
    if not 0 < cutoff < 1:
        raise PreconditionError("cutoff must lie in (0, 1)")
    dim = a.dim
    widths = [0.0] * dim
    p_lo, p_hi = [], []
    for t in a.terms:
        coeff_sum = sum(math.hypot(float(c.re), float(c.im))
                        for c in t.poly.terms.values())
        T = -math.log(cutoff) + math.log(max(coeff_sum, 1.0))
        cs = _axis_gauss_coeffs(t.quad, dim)
        degs = [t.poly.degree_in(k) for k in range(dim)]
        caps = [math.inf] * dim
        for b in t.bumps:
            if b.rising:
                continue
            ro = math.sqrt(float(b.rout2))
            for i in a.block_axes(b.block):
                caps[i] = min(caps[i], ro)
        R = [0.0] * dim
        for i in range(dim):
            if cs[i] > 0:
                R[i] = math.sqrt(T / cs[i])
            elif math.isfinite(caps[i]):
                R[i] = caps[i]
            else:
                raise DomainError(
                    f"axis {i} has neither gaussian decay nor a radial cutoff")
        for _ in range(6):
            logs = sum(d * math.log1p(r) for d, r in zip(degs, R))
            for i in range(dim):
                if cs[i] > 0:
                    R[i] = min(math.sqrt((T + logs) / cs[i]), caps[i])
        widths = [max(w, r) for w, r in zip(widths, R)]
        lo, hi = 0.0, math.inf
        saw_p_bump = False
        for b in t.bumps:
            if b.block != "p":
                continue
            saw_p_bump = True
            if b.rising or b.order >= 1:
                lo = max(lo, math.sqrt(float(b.rin2)))
            if not b.rising:
                hi = min(hi, math.sqrt(float(b.rout2)))
        if saw_p_bump:
            if not math.isfinite(hi):
                hi = math.sqrt(sum(R[i] ** 2 for i in a.block_axes("p")))
            p_lo.append(lo)
            p_hi.append(hi)
    radius = (min(p_lo), max(p_hi)) if len(p_lo) == len(a.terms) and p_lo else None
    return SupportBox(tuple(widths), radius)


def sup_abs(a: AmplitudeExpr, box: SupportBox | None = None,
            points_per_axis: int = 9, budget: int = 200000,
            safety: float = 2.0) -> float:
    """Upper estimate of sup |a| from a tensor probe grid times a safety
    factor; coarse by design, used only inside remainder bounds."""
    if box is None:
        box = support_box(a)
    dim = a.dim
    npts = points_per_axis
    while npts > 3 and npts ** dim > budget:
        npts -= 2
    axes = [np.linspace(-w, w, npts) if w > 0 else np.zeros(1)
            for w in box.halfwidths]
    grid = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1).reshape(-1, dim)
    vals = np.abs(a.evaluate(grid))
    return safety * float(np.max(vals))


# ---------------------------------------------------------------------------
# expression grammar

_FUNCS = ("gauss", "bump", "poly")


class _Tokens:
    def __init__(self, text: str):
        self.text = text
        self.pos = 0
        self.toks: list[tuple[str, str, int]] = []
        self._scan()
        self.i = 0

    def _scan(self):
        t, i = self.text, 0
        while i < len(t):
            ch = t[i]
            if ch.isspace():
                i += 1
                continue
            if ch.isdigit() or (ch == "." and i + 1 < len(t) and t[i + 1].isdigit()):
                j = i
                while j < len(t) and (t[j].isdigit() or t[j] == "."):
                    j += 1
                self.toks.append(("num", t[i:j], i))
                i = j
                continue
            if ch.isalpha() or ch == "_":
                j = i
                while j < len(t) and (t[j].isalnum() or t[j] == "_"):
                    j += 1
                self.toks.append(("name", t[i:j], i))
                i = j
                continue
            if ch in "+-*/^(),":
                self.toks.append((ch, ch, i))
                i += 1
                continue
            raise DataError(f"unexpected character {ch!r} at offset {i}")
        self.toks.append(("end", "", len(t)))

    def peek(self) -> tuple[str, str, int]:
        return self.toks[self.i]

    def take(self, kind: str | None = None) -> tuple[str, str, int]:
        tok = self.toks[self.i]
        if kind is not None and tok[0] != kind:
            raise DataError(
                f"expected {kind} at offset {tok[2]}, found {tok[1]!r}")
        self.i += 1
        return tok


class _Parser:
    """Sums and products of gauss/bump/poly factors and rational constants."""

    def __init__(self, text: str, n: int, r: int):
        self.toks = _Tokens(text)
        self.n = n
        self.r = r

    def parse(self) -> AmplitudeExpr:
        e = self._expr(in_poly=False)
        tok = self.toks.peek()
        if tok[0] != "end":
            raise DataError(f"trailing input at offset {tok[2]}: {tok[1]!r}")
        return e

    def _expr(self, in_poly: bool) -> AmplitudeExpr:
        sign = 1
        if self.toks.peek()[0] in "+-":
            sign = -1 if self.toks.take()[0] == "-" else 1
        acc = self._product(in_poly)
        if sign < 0:
            acc = -acc
        while self.toks.peek()[0] in "+-":
            op = self.toks.take()[0]
            rhs = self._product(in_poly)
            acc = acc - rhs if op == "-" else acc + rhs
        return acc

    def _product(self, in_poly: bool) -> AmplitudeExpr:
        acc = self._power(in_poly)
        while self.toks.peek()[0] == "*":
            self.toks.take()
            acc = acc * self._power(in_poly)
        return acc

    def _power(self, in_poly: bool) -> AmplitudeExpr:
        base = self._atom(in_poly)
        if self.toks.peek()[0] == "^":
            self.toks.take()
            tok = self.toks.take("num")
            if "." in tok[1]:
                raise DataError(f"exponent at offset {tok[2]} must be an integer")
            k = int(tok[1])
            if k < 0:
                raise DataError(f"negative exponent at offset {tok[2]}")
            acc = constant(self.n, self.r, 1)
            for _ in range(k):
                acc = acc * base
            return acc
        return base

    def _number(self) -> Fraction:
        tok = self.toks.take("num")
        val = Fraction(tok[1]) if "." not in tok[1] else Fraction(tok[1])
        if self.toks.peek()[0] == "/":
            self.toks.take()
            den = self.toks.take("num")
            if "." in den[1]:
                raise DataError(f"denominator at offset {den[2]} must be an integer")
            val = val / Fraction(int(den[1]))
        return val

    def _signed_number(self) -> Fraction:
        sign = 1
        if self.toks.peek()[0] in "+-":
            sign = -1 if self.toks.take()[0] == "-" else 1
        return sign * self._number()

    def _atom(self, in_poly: bool) -> AmplitudeExpr:
        tok = self.toks.peek()
        if tok[0] == "num":
            return constant(self.n, self.r, self._number())
        if tok[0] == "(":
            self.toks.take()
            e = self._expr(in_poly)
            self.toks.take(")")
            return e
        if tok[0] == "-":
            self.toks.take()
            return -self._atom(in_poly)
        if tok[0] == "name":
            name = tok[1]
            if name in _FUNCS:
                if in_poly:
                    raise DataError(
                        f"{name} is not allowed inside poly(...) at offset {tok[2]}")
                return self._call()
            if in_poly:
                return self._variable()
            raise DataError(
                f"bare name {name!r} at offset {tok[2]}; monomials belong "
                f"inside poly(...)")
        raise DataError(f"unexpected token {tok[1]!r} at offset {tok[2]}")

    def _variable(self) -> AmplitudeExpr:
        tok = self.toks.take("name")
        name = tok[1]
        dim = 2 * self.n + self.r
        if name.startswith("p") and name[1:].isdigit():
            k = int(name[1:])
            if not 1 <= k <= 2 * self.n:
                raise DataError(
                    f"{name} at offset {tok[2]}: phase-space index must be "
                    f"in 1..{2 * self.n}")
            return poly_amplitude(self.n, self.r, Poly.var(dim, k - 1))
        if name.startswith("X") and name[1:].isdigit():
            k = int(name[1:])
            if not 1 <= k <= self.r:
                raise DataError(
                    f"{name} at offset {tok[2]}: parameter index must be "
                    f"in 1..{self.r}")
            return poly_amplitude(self.n, self.r, Poly.var(dim, 2 * self.n + k - 1))
        raise DataError(f"unknown variable {name!r} at offset {tok[2]}")

    def _call(self) -> AmplitudeExpr:
        fname = self.toks.take("name")[1]
        self.toks.take("(")
        if fname == "poly":
            e = self._expr(in_poly=True)
            self.toks.take(")")
            for t in e.terms:
                if t.bumps or any(any(row) for row in t.quad):
                    raise DataError("poly(...) must stay polynomial")
            return e
        btok = self.toks.take("name")
        block = btok[1]
        if block not in ("p", "X"):
            raise DataError(
                f"first argument of {fname} at offset {btok[2]} must be p or X")
        args = []
        while self.toks.peek()[0] == ",":
            self.toks.take()
            args.append(self._signed_number())
        self.toks.take(")")
        try:
            if fname == "gauss":
                if len(args) > 1:
                    raise DataError("gauss takes at most one coefficient")
                return gauss_block(self.n, self.r, block, args[0] if args else 1)
            if len(args) not in (2, 3):
                raise DataError("bump takes radii (rin, rout) and an optional beta")
            beta = int(args[2]) if len(args) == 3 else 1
            if len(args) == 3 and args[2] != beta or beta < 1:
                raise DataError("bump steepness must be a positive integer")
            return bump_block(self.n, self.r, block, args[0], args[1], beta)
        except PreconditionError as exc:
            raise DataError(f"{fname} at offset {btok[2]}: {exc}") from exc


def parse_amplitude(text: str, complex_dim: int, torus_rank: int) -> AmplitudeExpr:
    """Parse the amplitude grammar: sums and products of gauss(p),
    gauss(X, c), bump(p, rin, rout), poly(...), and rational constants."""
    return _Parser(text, complex_dim, torus_rank).parse()
