"""Exact arithmetic kernels shared by the geometry and residue layers.

Everything here is plain Python over ``fractions.Fraction``: Gaussian
rationals, sparse multivariate polynomials, integer Smith normal form and
unimodular completions.  Floats enter only when a caller asks for them.
"""

from __future__ import annotations

import math
from fractions import Fraction
from typing import Iterable, Sequence


def as_fraction(x) -> Fraction:
    if isinstance(x, Fraction):
        return x
    if isinstance(x, int):
        return Fraction(x)
    if isinstance(x, str):
        return Fraction(x)
    if isinstance(x, float):
        # exact binary value; callers wanting decimal semantics pass strings
        return Fraction(x)
    raise TypeError(f"cannot coerce {type(x).__name__} to Fraction")


def frac_str(q: Fraction) -> str:
    q = Fraction(q)
    return f"{q.numerator}/{q.denominator}" if q.denominator != 1 else str(q.numerator)


class QQi:
    """Gaussian rational a + b*i with exact field arithmetic."""

    __slots__ = ("re", "im")

    def __init__(self, re=0, im=0):
        self.re = as_fraction(re)
        self.im = as_fraction(im)

    @staticmethod
    def coerce(x) -> "QQi":
        if isinstance(x, QQi):
            return x
        return QQi(as_fraction(x))

    def __add__(self, other):
        o = QQi.coerce(other)
        return QQi(self.re + o.re, self.im + o.im)

    __radd__ = __add__

    def __sub__(self, other):
        o = QQi.coerce(other)
        return QQi(self.re - o.re, self.im - o.im)

    def __rsub__(self, other):
        return QQi.coerce(other) - self

    def __mul__(self, other):
        o = QQi.coerce(other)
        return QQi(self.re * o.re - self.im * o.im, self.re * o.im + self.im * o.re)

    __rmul__ = __mul__

    def __truediv__(self, other):
        o = QQi.coerce(other)
        n = o.re * o.re + o.im * o.im
        if n == 0:
            raise ZeroDivisionError("division by zero in QQi")
        return QQi((self.re * o.re + self.im * o.im) / n,
                   (self.im * o.re - self.re * o.im) / n)

    def __rtruediv__(self, other):
        return QQi.coerce(other) / self

    def __neg__(self):
        return QQi(-self.re, -self.im)

    def __eq__(self, other):
        try:
            o = QQi.coerce(other)
        except TypeError:
            return NotImplemented
        return self.re == o.re and self.im == o.im

    def __hash__(self):
        return hash((self.re, self.im))

    def __bool__(self):
        return self.re != 0 or self.im != 0

    def conjugate(self) -> "QQi":
        return QQi(self.re, -self.im)

    @property
    def is_real(self) -> bool:
        return self.im == 0

    def __complex__(self):
        return complex(self.re) + 1j * complex(self.im)

    def __repr__(self):
        if self.im == 0:
            return frac_str(self.re)
        if self.re == 0:
            return f"{frac_str(self.im)}i"
        sign = "+" if self.im > 0 else "-"
        return f"{frac_str(self.re)}{sign}{frac_str(abs(self.im))}i"


ZERO = QQi(0)
ONE = QQi(1)
I = QQi(0, 1)


class Poly:
    """Sparse multivariate polynomial with QQi coefficients.

    Terms map exponent tuples to coefficients; zero coefficients are pruned
    eagerly so equality is structural.
    """

    __slots__ = ("nvars", "terms")

    def __init__(self, nvars: int, terms: dict | None = None):
        self.nvars = int(nvars)
        self.terms: dict[tuple, QQi] = {}
        if terms:
            for exps, c in terms.items():
                c = QQi.coerce(c)
                if c:
                    e = tuple(int(k) for k in exps)
                    if len(e) != self.nvars:
                        raise ValueError("exponent arity mismatch")
                    self.terms[e] = self.terms.get(e, ZERO) + c
            self.terms = {e: c for e, c in self.terms.items() if c}

    @staticmethod
    def const(nvars: int, c) -> "Poly":
        return Poly(nvars, {(0,) * nvars: QQi.coerce(c)})

    @staticmethod
    def var(nvars: int, k: int) -> "Poly":
        e = [0] * nvars
        e[k] = 1
        return Poly(nvars, {tuple(e): ONE})

    def is_zero(self) -> bool:
        return not self.terms

    def degree(self) -> int:
        return max((sum(e) for e in self.terms), default=0)

    def degree_in(self, k: int) -> int:
        return max((e[k] for e in self.terms), default=0)

    def __add__(self, other):
        o = self._coerce(other)
        t = dict(self.terms)
        for e, c in o.terms.items():
            s = t.get(e, ZERO) + c
            if s:
                t[e] = s
            else:
                t.pop(e, None)
        out = Poly(self.nvars)
        out.terms = t
        return out

    __radd__ = __add__

    def __sub__(self, other):
        return self + (-self._coerce(other))

    def __rsub__(self, other):
        return self._coerce(other) - self

    def __neg__(self):
        out = Poly(self.nvars)
        out.terms = {e: -c for e, c in self.terms.items()}
        return out

    def __mul__(self, other):
        o = self._coerce(other)
        t: dict[tuple, QQi] = {}
        for e1, c1 in self.terms.items():
            for e2, c2 in o.terms.items():
                e = tuple(a + b for a, b in zip(e1, e2))
                s = t.get(e, ZERO) + c1 * c2
                if s:
                    t[e] = s
                else:
                    t.pop(e, None)
        out = Poly(self.nvars)
        out.terms = t
        return out

    __rmul__ = __mul__

    def _coerce(self, other) -> "Poly":
        if isinstance(other, Poly):
            if other.nvars != self.nvars:
                raise ValueError("polynomial arity mismatch")
            return other
        return Poly.const(self.nvars, other)

    def __eq__(self, other):
        if not isinstance(other, Poly):
            return NotImplemented
        return self.nvars == other.nvars and self.terms == other.terms

    def __hash__(self):
        return hash((self.nvars, frozenset(self.terms.items())))

    def diff(self, k: int) -> "Poly":
        t: dict[tuple, QQi] = {}
        for e, c in self.terms.items():
            if e[k] == 0:
                continue
            e2 = list(e)
            e2[k] -= 1
            t[tuple(e2)] = c * e[k]
        out = Poly(self.nvars)
        out.terms = t
        return out

    def eval(self, point: Sequence) -> QQi:
        vals = [QQi.coerce(p) for p in point]
        acc = ZERO
        for e, c in self.terms.items():
            term = c
            for k, p in enumerate(e):
                for _ in range(p):
                    term = term * vals[k]
            acc = acc + term
        return acc

    def eval_complex(self, point: Sequence[complex]) -> complex:
        acc = 0j
        for e, c in self.terms.items():
            term = complex(c)
            for k, p in enumerate(e):
                if p:
                    term *= point[k] ** p
            acc += term
        return acc

    def substitute(self, k: int, value) -> "Poly":
        """Replace variable k by an exact constant; arity is preserved."""
        v = QQi.coerce(value)
        t: dict[tuple, QQi] = {}
        for e, c in self.terms.items():
            term = c
            for _ in range(e[k]):
                term = term * v
            e2 = list(e)
            e2[k] = 0
            key = tuple(e2)
            s = t.get(key, ZERO) + term
            if s:
                t[key] = s
            else:
                t.pop(key, None)
        out = Poly(self.nvars)
        out.terms = t
        return out

    def scale_vars(self, factors: Sequence) -> "Poly":
        """x_k -> factors[k] * x_k, exactly."""
        fr = [QQi.coerce(f) for f in factors]
        t: dict[tuple, QQi] = {}
        for e, c in self.terms.items():
            term = c
            for k, p in enumerate(e):
                for _ in range(p):
                    term = term * fr[k]
            if term:
                t[e] = t.get(e, ZERO) + term
        out = Poly(self.nvars)
        out.terms = {e: c for e, c in t.items() if c}
        return out

    def shift_1var(self, c) -> "Poly":
        """One-variable substitution x -> x + c (exact Taylor shift)."""
        if self.nvars != 1:
            raise ValueError("shift_1var needs a univariate polynomial")
        cc = QQi.coerce(c)
        out = Poly(1)
        for (e,), coef in self.terms.items():
            # binomial expansion of (x + c)^e
            binom = ONE
            for j in range(e + 1):
                power = ONE
                for _ in range(e - j):
                    power = power * cc
                out = out + Poly(1, {(j,): coef * binom * power})
                binom = binom * Fraction(e - j, j + 1)
        return out

    def coeffs_1var(self) -> list[QQi]:
        if self.nvars != 1:
            raise ValueError("univariate only")
        d = self.degree()
        out = [ZERO] * (d + 1)
        for (e,), c in self.terms.items():
            out[e] = c
        return out

    def __repr__(self):
        if not self.terms:
            return "Poly(0)"
        bits = []
        for e in sorted(self.terms, key=lambda t: (sum(t), t)):
            mono = "*".join(f"x{k}^{p}" for k, p in enumerate(e) if p) or "1"
            bits.append(f"({self.terms[e]})*{mono}")
        return " + ".join(bits)


def divmod_1var(num: Poly, den: Poly) -> tuple[Poly, Poly]:
    """Exact univariate polynomial division: num = q*den + r, deg r < deg den."""
    if den.is_zero():
        raise ZeroDivisionError("polynomial division by zero")
    q = Poly(1)
    r = num
    dd = den.degree()
    lead = den.terms[(dd,)]
    while not r.is_zero() and r.degree() >= dd:
        dr = r.degree()
        c = r.terms[(dr,)] / lead
        mono = Poly(1, {(dr - dd,): c})
        q = q + mono
        r = r - mono * den
    return q, r


def gcd_list(vals: Iterable[int]) -> int:
    g = 0
    for v in vals:
        g = math.gcd(g, int(v))
    return g


def smith_invariant_factors(rows: Sequence[Sequence[int]]) -> list[int]:
    """Nonzero invariant factors d_1 | d_2 | ... of an integer matrix."""
    a = [[int(x) for x in row] for row in rows]
    m = len(a)
    n = len(a[0]) if m else 0
    factors: list[int] = []
    top = 0
    left = 0
    while top < m and left < n:
        # locate smallest nonzero pivot in the remaining block
        piv = None
        for i in range(top, m):
            for j in range(left, n):
                if a[i][j] != 0 and (piv is None or abs(a[i][j]) < abs(a[piv[0]][piv[1]])):
                    piv = (i, j)
        if piv is None:
            break
        pi, pj = piv
        a[top], a[pi] = a[pi], a[top]
        for row in a:
            row[left], row[pj] = row[pj], row[left]
        dirty = False
        for i in range(top + 1, m):
            if a[i][left] % a[top][left] != 0:
                dirty = True
            q = a[i][left] // a[top][left]
            if q:
                for j in range(left, n):
                    a[i][j] -= q * a[top][j]
            if a[i][left] != 0:
                dirty = True
        for j in range(left + 1, n):
            if a[top][j] % a[top][left] != 0:
                dirty = True
            q = a[top][j] // a[top][left]
            if q:
                for i in range(top, m):
                    a[i][j] -= q * a[i][left]
            if a[top][j] != 0:
                dirty = True
        if dirty:
            continue
        factors.append(abs(a[top][left]))
        top += 1
        left += 1
    # enforce the divisibility chain
    for i in range(len(factors)):
        for j in range(i + 1, len(factors)):
            g = math.gcd(factors[i], factors[j])
            lcm = factors[i] * factors[j] // g if g else 0
            factors[i], factors[j] = g, lcm
    return sorted(f for f in factors if f != 0)


def integer_rank(rows: Sequence[Sequence[int]]) -> int:
    return len(smith_invariant_factors(rows))


def rational_nullspace(rows: Sequence[Sequence[int]], ncols: int) -> list[list[Fraction]]:
    """Exact basis of {y : A y = 0} for an integer matrix A with ncols columns."""
    a = [[Fraction(x) for x in row] for row in rows]
    m = len(a)
    pivots: list[int] = []
    r = 0
    for j in range(ncols):
        piv = next((i for i in range(r, m) if a[i][j] != 0), None)
        if piv is None:
            continue
        a[r], a[piv] = a[piv], a[r]
        inv = 1 / a[r][j]
        a[r] = [x * inv for x in a[r]]
        for i in range(m):
            if i != r and a[i][j] != 0:
                f = a[i][j]
                a[i] = [x - f * y for x, y in zip(a[i], a[r])]
        pivots.append(j)
        r += 1
        if r == m:
            break
    free = [j for j in range(ncols) if j not in pivots]
    basis = []
    for f in free:
        v = [Fraction(0)] * ncols
        v[f] = Fraction(1)
        for i, p in enumerate(pivots):
            v[p] = -a[i][f]
        basis.append(v)
    return basis


def unimodular_completion(vec: Sequence[int]) -> list[list[int]]:
    """Integer matrix B with first column vec and det B = +-1.

    vec must be primitive (gcd of entries 1).
    """
    a = [int(x) for x in vec]
    n = len(a)
    if gcd_list(a) != 1:
        raise ValueError("vector is not primitive")
    # Reduce a to e1 by elementary row ops while applying the inverse column
    # ops to B, so that B stays the inverse of the accumulated reduction.
    b = [[1 if i == j else 0 for j in range(n)] for i in range(n)]
    v = list(a)

    def col_axpy(dst: int, src: int, q: int) -> None:
        for i in range(n):
            b[i][dst] += q * b[i][src]

    while True:
        nz = [i for i in range(n) if v[i] != 0]
        if len(nz) == 1:
            break
        p = min(nz, key=lambda i: abs(v[i]))
        for i in nz:
            if i == p:
                continue
            q = v[i] // v[p]
            if q:
                v[i] -= q * v[p]
                # row op row_i -= q row_p  =>  col op col_p += q col_i
                col_axpy(p, i, q)
    k = next(i for i in range(n) if v[i] != 0)
    if k != 0:
        v[0], v[k] = v[k], v[0]
        for i in range(n):
            b[i][0], b[i][k] = b[i][k], b[i][0]
    if v[0] < 0:
        v[0] = -v[0]
        for i in range(n):
            b[i][0] = -b[i][0]
    assert v[0] == 1, "reduction of a primitive vector must end at 1"
    for i in range(n):
        assert b[i][0] == a[i]
    return b


def invert_unimodular(b: Sequence[Sequence[int]]) -> list[list[Fraction]]:
    """Exact inverse of a square integer matrix via Gauss-Jordan."""
    n = len(b)
    a = [[Fraction(b[i][j]) for j in range(n)] + [Fraction(1 if j == i else 0) for j in range(n)]
         for i in range(n)]
    for col in range(n):
        piv = next(i for i in range(col, n) if a[i][col] != 0)
        a[col], a[piv] = a[piv], a[col]
        inv = 1 / a[col][col]
        a[col] = [x * inv for x in a[col]]
        for i in range(n):
            if i != col and a[i][col] != 0:
                f = a[i][col]
                a[i] = [x - f * y for x, y in zip(a[i], a[col])]
    return [row[n:] for row in a]


def hermite_normal_form(rows: Sequence[Sequence[int]], ncols: int) -> tuple[tuple[int, ...], ...]:
    """Row-style HNF of the lattice spanned by integer rows.

    Pivots are positive, entries above a pivot lie in [0, pivot), and zero
    rows are dropped, so equal lattices give identical tuples.
    """
    a = [[int(x) for x in row] for row in rows]
    top = 0
    for col in range(ncols):
        piv = None
        for i in range(top, len(a)):
            if a[i][col] != 0 and (piv is None or abs(a[i][col]) < abs(a[piv][col])):
                piv = i
        if piv is None:
            continue
        a[top], a[piv] = a[piv], a[top]
        # euclidean reduction below the pivot until the column clears
        while True:
            done = True
            for i in range(top + 1, len(a)):
                if a[i][col] != 0:
                    q = a[i][col] // a[top][col]
                    a[i] = [x - q * y for x, y in zip(a[i], a[top])]
                    if a[i][col] != 0:
                        a[top], a[i] = a[i], a[top]
                        done = False
            if done:
                break
        if a[top][col] < 0:
            a[top] = [-x for x in a[top]]
        for i in range(top):
            q = a[i][col] // a[top][col]
            if q:
                a[i] = [x - q * y for x, y in zip(a[i], a[top])]
        top += 1
    return tuple(tuple(row) for row in a[:top] if any(row))


def lattice_contains(hnf: Sequence[Sequence[int]], vec: Sequence[int]) -> bool:
    """Whether an integer vector lies in the lattice given by its HNF rows."""
    v = [int(x) for x in vec]
    for row in hnf:
        col = next(j for j, x in enumerate(row) if x != 0)
        if v[col] % row[col] != 0:
            return False
        q = v[col] // row[col]
        v = [x - q * y for x, y in zip(v, row)]
    return not any(v)
