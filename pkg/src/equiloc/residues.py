"""Exact fixed-point localization on the Fourier side.

Isolated fixed points of a torus action contribute rational functions
u_F(Y) = e^{i<J_F,Y>} rho(Y) / prod_q i<lambda_q,Y> whose sum transforms,
under F[u](xi) = int e^{-i xi Y} u(Y) dY, into a piecewise polynomial
measure: the pushforward of Liouville measure under the momentum map.
Limits of that measure along a direction eta recover the residues that
assemble reduced-space integrals.

Conventions are pinned by one golden example: the unit sphere with the
height momentum map must produce the sum (e^{iY} - e^{-iY})/(iY) and the
measure 2*pi on (-1, 1).  Every one-sided transform sign below derives
from that calibration.

Gaussian-regularized masses on linear models shift the poles off the
real axis; the transform then acquires exponential factors e^{b(xi-a)}
on each piece.  All breakpoints, rates, and coefficients stay in exact
rational arithmetic, with powers of 2*pi tracked symbolically, so that
chamber constancy is literal equality.
"""

from __future__ import annotations

import math
from bisect import bisect_left, bisect_right
from dataclasses import dataclass
from fractions import Fraction
from typing import Callable, Sequence

import numpy as np

from ._exact import Poly, QQi, as_fraction, divmod_1var, frac_str
from .desing import _octave_edges, _panel_nodes
from .errors import (
    CapabilityError,
    DomainError,
    InternalConsistencyError,
    PreconditionError,
    UnsupportedModelError,
)
from .models import LinearHamiltonianModel

MAX_RANK = 2

_I = QQi(0, 1)
_MINUS_I = QQi(0, -1)


def _covector(v) -> tuple[Fraction, ...]:
    if isinstance(v, (int, float, Fraction)):
        return (as_fraction(v),)
    return tuple(as_fraction(x) for x in v)


@dataclass(frozen=True)
class FixedPointDatum:
    """One fixed-point component: momentum value and normal weights.

    ``chern`` holds names of nilpotent curvature generators for positive
    dimensional components; computations here require dim_F = 0.
    """

    label: str
    dim_F: int
    J_at_F: tuple[Fraction, ...]
    weights: tuple[tuple[Fraction, ...], ...]
    chern: tuple[str, ...] = ()

    def __post_init__(self):
        if self.dim_F < 0 or self.dim_F % 2:
            raise PreconditionError("component dimension must be even and nonnegative")
        object.__setattr__(self, "J_at_F", _covector(self.J_at_F))
        object.__setattr__(self, "weights",
                           tuple(_covector(w) for w in self.weights))
        for w in self.weights:
            if not any(w):
                raise PreconditionError(f"zero normal weight on {self.label!r}")
            if len(w) != len(self.J_at_F):
                raise PreconditionError("weight rank mismatch")
        if self.dim_F == 0 and self.chern:
            raise PreconditionError("a point carries no curvature generators")


@dataclass(frozen=True)
class DenomFactor:
    """One denominator factor (<covector, Y> - i*imag_shift)^multiplicity."""

    covector: tuple[Fraction, ...]
    multiplicity: int = 1
    imag_shift: Fraction = Fraction(0)

    def __post_init__(self):
        object.__setattr__(self, "covector", _covector(self.covector))
        object.__setattr__(self, "imag_shift", as_fraction(self.imag_shift))
        if not any(self.covector):
            raise PreconditionError("denominator covector vanishes")
        if self.multiplicity < 1:
            raise PreconditionError("multiplicity must be positive")


@dataclass(frozen=True)
class RationalExpTerm:
    """e^{i<exponent,Y>} * numerator(Y) / prod of denominator factors.

    ``two_pi_power`` scales the term by (2*pi)**power; keeping the power
    symbolic lets downstream residues stay exact.
    """

    exponent: tuple[Fraction, ...]
    numerator: Poly
    denominator: tuple[DenomFactor, ...]
    two_pi_power: int = 0

    def __post_init__(self):
        object.__setattr__(self, "exponent", _covector(self.exponent))
        rank = len(self.exponent)
        if self.numerator.nvars != rank:
            raise PreconditionError("numerator variable count must match the rank")
        for fac in self.denominator:
            if len(fac.covector) != rank:
                raise PreconditionError("denominator rank mismatch")

    @property
    def rank(self) -> int:
        return len(self.exponent)


@dataclass(frozen=True)
class ConeLambda:
    """Simplicial reference cone; fixes boundary-value sides of transforms."""

    rays: tuple[tuple[Fraction, ...], ...]

    def __post_init__(self):
        object.__setattr__(self, "rays", tuple(_covector(r) for r in self.rays))
        if not self.rays or len(self.rays) != len(self.rays[0]):
            raise PreconditionError("need exactly rank many generating rays")
        if len(self.rays) > MAX_RANK:
            raise CapabilityError("cones are supported up to rank 2")

    @property
    def rank(self) -> int:
        return len(self.rays)

    def side(self, covector: Sequence) -> int:
        """Constant sign of the covector on the open cone, or a wall error."""
        cov = _covector(covector)
        signs = set()
        for ray in self.rays:
            dot = sum(c * r for c, r in zip(cov, ray))
            if dot:
                signs.add(1 if dot > 0 else -1)
        if len(signs) != 1:
            raise DomainError(
                f"the cone meets the hyperplane of {tuple(map(str, cov))}")
        return signs.pop()

    def contains(self, point: Sequence) -> bool:
        pt = _covector(point)
        if self.rank == 1:
            return bool(pt[0]) and (pt[0] > 0) == (self.rays[0][0] > 0)
        (a, b), (c, d) = self.rays
        det = a * d - b * c
        if det == 0:
            raise PreconditionError("degenerate cone rays")
        s = (pt[0] * d - pt[1] * c) / det
        t = (a * pt[1] - b * pt[0]) / det
        return s > 0 and t > 0


@dataclass(frozen=True)
class ExpPiece:
    """poly(xi) * e^{rate*(xi - anchor)} on one interval."""

    rate: Fraction
    anchor: Fraction
    poly: Poly


@dataclass(frozen=True)
class Box:
    """Rank-2 orthant piece: support {sides[k]*(xi_k - corner[k]) > 0}."""

    corner: tuple[Fraction, Fraction]
    sides: tuple[int, int]
    rates: tuple[Fraction, Fraction]
    anchors: tuple[Fraction, Fraction]
    poly: Poly


@dataclass(frozen=True)
class PiecewisePolyMeasure:
    """Piecewise polynomial (times exponential) measure with point atoms.

    Rank 1 stores sorted breakpoints and one tuple of ExpPiece summands per
    open interval; rank 2 stores orthant boxes.  Atoms are
    (point, derivative order, weight) triples.  Every coefficient is scaled
    by (2*pi)**two_pi_power.
    """

    rank: int
    two_pi_power: int
    breakpoints: tuple[Fraction, ...] = ()
    pieces: tuple[tuple[ExpPiece, ...], ...] = ((),)
    atoms: tuple[tuple[Fraction, int, QQi], ...] = ()
    boxes: tuple[Box, ...] = ()
    has_delta_derivatives: bool = False

    def density(self, x) -> complex:
        """Pointwise density; undefined exactly on breakpoints and walls."""
        scale = (2.0 * math.pi) ** self.two_pi_power
        if self.rank == 1:
            xf = float(x)
            idx = bisect_left([float(b) for b in self.breakpoints], xf)
            total = 0j
            for comp in self.pieces[idx]:
                val = comp.poly.eval_complex((xf,))
                total += val * math.exp(float(comp.rate) * (xf - float(comp.anchor)))
            return total * scale
        x1, x2 = float(x[0]), float(x[1])
        total = 0j
        for box in self.boxes:
            if all(s * (v - float(c)) > 0
                   for s, v, c in zip(box.sides, (x1, x2), box.corner)):
                damp = sum(float(r) * (v - float(a))
                           for r, v, a in zip(box.rates, (x1, x2), box.anchors))
                total += box.poly.eval_complex((x1, x2)) * math.exp(damp)
        return total * scale

    def is_zero(self) -> bool:
        return (not self.atoms and not self.boxes
                and all(not piece for piece in self.pieces))

    def table_rows(self) -> list[str]:
        """Human-readable breakpoint/coefficient table with exact entries."""
        rows = [f"two_pi_power {self.two_pi_power}"]
        if self.rank == 1:
            bounds = ["-inf"] + [frac_str(b) for b in self.breakpoints] + ["inf"]
            for lo, hi, comps in zip(bounds, bounds[1:], self.pieces):
                body = " + ".join(
                    f"[{_poly_str(c.poly)}]*exp({frac_str(c.rate)}*"
                    f"(xi-{frac_str(c.anchor)}))" if c.rate else
                    f"[{_poly_str(c.poly)}]"
                    for c in comps) or "0"
                rows.append(f"piece ({lo}, {hi}): {body}")
        else:
            for box in self.boxes:
                corner = ", ".join(frac_str(c) for c in box.corner)
                sides = ", ".join("+" if s > 0 else "-" for s in box.sides)
                rows.append(f"box corner ({corner}) sides ({sides}): "
                            f"[{_poly_str(box.poly)}]")
        for point, order, weight in self.atoms:
            rows.append(f"atom at {frac_str(point)} order {order}: "
                        f"{weight!r}")
        return rows


def _poly_str(p: Poly) -> str:
    if p.is_zero():
        return "0"
    bits = []
    for expo in sorted(p.terms, key=lambda t: (sum(t), t)):
        c = p.terms[expo]
        mono = "*".join(f"xi{k + 1}^{e}" for k, e in enumerate(expo) if e)
        val = frac_str(c.re) if c.is_real else f"({frac_str(c.re)}+{frac_str(c.im)}i)"
        bits.append(f"{val}*{mono}" if mono else val)
    return " + ".join(bits)


ZERO_MEASURE = PiecewisePolyMeasure(rank=1, two_pi_power=0)


def _truncate(p: Poly, max_degree: int) -> Poly:
    kept = {e: c for e, c in p.terms.items() if sum(e) <= max_degree}
    return Poly(p.nvars, kept)


def euler_class_inverse(F: FixedPointDatum, Y: Sequence):
    """Inverse equivariant Euler class of the normal bundle at Y.

    Scalar 1/prod lambda_q(Y) for a point; for positive-dimensional
    components a polynomial in the curvature generators truncated at half
    the component dimension.
    """
    point = _covector(Y)
    values = []
    for w in F.weights:
        lam = sum(a * y for a, y in zip(w, point))
        if lam == 0:
            raise DomainError(
                f"Y lies on the weight hyperplane of {tuple(map(str, w))}")
        values.append(lam)
    if F.dim_F == 0:
        out = Fraction(1)
        for lam in values:
            out /= lam
        return out
    ngen = len(F.chern)
    cap = F.dim_F // 2
    out = Poly.const(ngen, QQi(1))
    for q, lam in enumerate(values):
        inv = Poly.const(ngen, QQi(1 / lam))
        if q < ngen:
            # geometric series for (c_q + lam)^{-1} in the nilpotent ring
            ratio = Poly(ngen, {_unit(ngen, q): QQi(-1 / lam)})
            series = Poly.const(ngen, QQi(1))
            power = Poly.const(ngen, QQi(1))
            for _ in range(cap):
                power = _truncate(power * ratio, cap)
                series = series + power
            inv = inv * series
        out = _truncate(out * inv, cap)
    return out


def _unit(n: int, k: int) -> tuple[int, ...]:
    e = [0] * n
    e[k] = 1
    return tuple(e)


def localization_sum(data: Sequence[FixedPointDatum], rho, Y) -> complex:
    """Sum of fixed-point contributions e^{i<J,Y>} rho / prod i lambda(Y)."""
    point = tuple(float(y) for y in (Y if isinstance(Y, (tuple, list)) else (Y,)))
    total = 0j
    for F in data:
        if F.dim_F != 0:
            raise CapabilityError("positive-dimensional components are not integrated")
        denom = 1 + 0j
        for w in F.weights:
            lam = sum(float(a) * y for a, y in zip(w, point))
            if lam == 0.0:
                raise DomainError(
                    f"Y lies on the weight hyperplane of {tuple(map(str, w))}")
            denom *= 1j * lam
        jval = sum(float(a) * y for a, y in zip(F.J_at_F, point))
        weight = rho(point) if callable(rho) else rho
        total += complex(weight) * complex(math.cos(jval), math.sin(jval)) / denom
    return total


def term_value(terms: Sequence[RationalExpTerm], Y) -> complex:
    """Numeric evaluation of a rational-exponential sum at a real point."""
    point = tuple(float(y) for y in (Y if isinstance(Y, (tuple, list)) else (Y,)))
    total = 0j
    for term in terms:
        den = 1 + 0j
        for fac in term.denominator:
            dot = sum(float(a) * y for a, y in zip(fac.covector, point))
            den *= (dot - 1j * float(fac.imag_shift)) ** fac.multiplicity
        lam = sum(float(a) * y for a, y in zip(term.exponent, point))
        num = term.numerator.eval_complex(point)
        total += (complex(math.cos(lam), math.sin(lam)) * num / den
                  * (2.0 * math.pi) ** term.two_pi_power)
    return total


def _series_inverse(coeffs: list[QQi], order: int) -> list[QQi]:
    if not coeffs or not coeffs[0]:
        raise InternalConsistencyError("series inversion needs a unit constant term")
    inv = [QQi(1) / coeffs[0]]
    for k in range(1, order + 1):
        acc = QQi(0)
        for j in range(1, k + 1):
            if j < len(coeffs):
                acc = acc + coeffs[j] * inv[k - j]
        inv.append(-acc / coeffs[0])
    return inv


def _poly_from_coeffs(coeffs: Sequence[QQi]) -> Poly:
    return Poly(1, {(k,): c for k, c in enumerate(coeffs) if c})


def _one_sided_poly(weight: QQi, mult: int, sigma: int, start: Fraction) -> Poly:
    # F[1/(Y + i*sigma*0)^m] = 2pi (-i s)^m (s xi)^{m-1}/(m-1)! 1_{s xi>0},
    # shifted to start; the 2pi goes into the measure's power
    front = weight
    for _ in range(mult):
        front = front * QQi(0, -sigma)
    front = front * Fraction(sigma ** (mult - 1), math.factorial(mult - 1))
    shifted = Poly.var(1, 0) - Poly.const(1, QQi(start))
    out = Poly.const(1, front)
    for _ in range(mult - 1):
        out = out * shifted
    return out


def _transform_axis(term_num: list[QQi], poles: dict[Fraction, int],
                    start: Fraction, sigma0: int):
    """One-variable transform: returns (pieces, atoms) before assembly.

    ``term_num`` are ascending numerator coefficients, ``poles`` maps the
    pole location gamma (factor Y - i*gamma) to its multiplicity.
    """
    den = [QQi(1)]
    for gamma, mult in poles.items():
        for _ in range(mult):
            den = [  # multiply by (Y - i*gamma)
                (den[k - 1] if k else QQi(0))
                + (den[k] * QQi(0, -gamma) if k < len(den) else QQi(0))
                for k in range(len(den) + 1)]
    num = Poly(1, {(k,): c for k, c in enumerate(term_num) if c})
    denom_poly = _poly_from_coeffs(den)
    quot, rem = divmod_1var(num, denom_poly)
    atoms = []
    for (k,), c in quot.terms.items():
        weight = c
        for _ in range(k):
            weight = weight * _I
        atoms.append((start, k, weight))
    pieces = []
    rem_coeffs = rem.coeffs_1var() if not rem.is_zero() else []
    if rem_coeffs:
        rem_poly = _poly_from_coeffs(rem_coeffs)
        for gamma, mult in poles.items():
            shifted = rem_poly.shift_1var(QQi(0, gamma))
            other = [QQi(1)]
            for g2, m2 in poles.items():
                if g2 == gamma:
                    continue
                base = [QQi(0, gamma - g2), QQi(1)]
                for _ in range(m2):
                    other = _series_mul(other, base, mult)
            inv = _series_inverse(other, mult - 1)
            svals = _series_mul(shifted.coeffs_1var(), inv, mult - 1)
            for t in range(mult):
                b = svals[t] if t < len(svals) else QQi(0)
                if not b:
                    continue
                power = mult - t
                sigma = sigma0 if gamma == 0 else (-1 if gamma > 0 else 1)
                pieces.append((start, sigma, gamma,
                               _one_sided_poly(b, power, sigma, start)))
    return pieces, atoms


def _series_mul(a: Sequence[QQi], b: Sequence[QQi], order: int) -> list[QQi]:
    out = [QQi(0)] * (order + 1)
    for i, ai in enumerate(a):
        if i > order or not ai:
            continue
        for j, bj in enumerate(b):
            if i + j > order:
                break
            out[i + j] = out[i + j] + ai * bj
    return out


def _assemble_rank1(power: int, raw_pieces, raw_atoms) -> PiecewisePolyMeasure:
    starts = sorted({p[0] for p in raw_pieces})
    intervals: list[dict[tuple[Fraction, Fraction], Poly]] = \
        [{} for _ in range(len(starts) + 1)]
    for start, sigma, rate, poly in raw_pieces:
        pos = starts.index(start)
        covered = range(pos + 1, len(starts) + 1) if sigma > 0 else range(pos + 1)
        for idx in covered:
            key = (rate, start if rate else Fraction(0))
            intervals[idx][key] = intervals[idx].get(key, Poly(1)) + poly
    pieces = tuple(
        tuple(ExpPiece(rate, anchor, poly)
              for (rate, anchor), poly in sorted(seg.items())
              if not poly.is_zero())
        for seg in intervals)
    # drop breakpoints that never change the density
    keep_breaks, keep_pieces = [], [pieces[0]]
    for bp, nxt in zip(starts, pieces[1:]):
        if nxt != keep_pieces[-1]:
            keep_breaks.append(bp)
            keep_pieces.append(nxt)
    atom_map: dict[tuple[Fraction, int], QQi] = {}
    for point, order, weight in raw_atoms:
        key = (point, order)
        atom_map[key] = atom_map.get(key, QQi(0)) + weight
    atoms = tuple((pt, order, w) for (pt, order), w in sorted(atom_map.items()) if w)
    return PiecewisePolyMeasure(
        rank=1, two_pi_power=power + 1,
        breakpoints=tuple(keep_breaks), pieces=tuple(keep_pieces),
        atoms=atoms,
        has_delta_derivatives=any(order > 0 for _, order, _ in atoms))


def fourier_piecewise(terms: Sequence[RationalExpTerm],
                      cone: ConeLambda,
                      flag: tuple[int, ...] | None = None) -> PiecewisePolyMeasure:
    """Transform a rational-exponential sum into its piecewise measure.

    Rank 1 splits each term into one-sided pole contributions with the
    boundary-value side fixed by the cone.  Rank 2 iterates the
    one-variable transform along ``flag`` and requires every denominator
    factor to involve a single flag coordinate.
    """
    terms = [t for t in terms if not t.numerator.is_zero()]
    if not terms:
        return ZERO_MEASURE
    rank = terms[0].rank
    if rank > MAX_RANK:
        raise CapabilityError("transforms are supported up to rank 2")
    if cone.rank != rank:
        raise PreconditionError("cone rank must match the terms")
    powers = {t.two_pi_power for t in terms}
    if len(powers) != 1:
        raise PreconditionError("terms carry mismatched transcendental prefactors")
    power = powers.pop()
    if any(t.rank != rank for t in terms):
        raise PreconditionError("terms mix ranks")

    if rank == 1:
        raw_pieces, raw_atoms = [], []
        for term in terms:
            const = Fraction(1)
            poles: dict[Fraction, int] = {}
            for fac in term.denominator:
                a = fac.covector[0]
                const *= a ** fac.multiplicity
                gamma = fac.imag_shift / a
                poles[gamma] = poles.get(gamma, 0) + fac.multiplicity
            sigma0 = cone.side((1,)) if Fraction(0) in poles else 1
            coeffs = [c / const for c in term.numerator.coeffs_1var()]
            pieces, atoms = _transform_axis(coeffs, poles,
                                            term.exponent[0], sigma0)
            raw_pieces.extend(pieces)
            raw_atoms.extend(atoms)
        return _assemble_rank1(power, raw_pieces, raw_atoms)

    return _transform_rank2(terms, cone, flag or (0, 1), power)


def _transform_rank2(terms, cone: ConeLambda, flag, power) -> PiecewisePolyMeasure:
    if sorted(flag) != [0, 1]:
        raise PreconditionError("the flag must order both coordinates")
    box_map: dict[tuple, Poly] = {}
    for term in terms:
        axis_poles: list[dict[Fraction, int]] = [{}, {}]
        axis_const = [Fraction(1), Fraction(1)]
        for fac in term.denominator:
            live = [k for k in range(2) if fac.covector[k]]
            if len(live) != 1:
                raise CapabilityError(
                    "rank-2 transforms need denominators split by the flag")
            k = live[0]
            a = fac.covector[k]
            axis_const[k] *= a ** fac.multiplicity
            gamma = fac.imag_shift / a
            axis_poles[k][gamma] = axis_poles[k].get(gamma, 0) + fac.multiplicity
        for expo, coeff in term.numerator.terms.items():
            axis_data = []
            for k in flag:
                unit = [QQi(0)] * expo[k] + [QQi(1)]
                if k == flag[0]:
                    unit[expo[k]] = coeff / (axis_const[0] * axis_const[1])
                sigma0 = (cone.side(_unit(2, k))
                          if Fraction(0) in axis_poles[k] else 1)
                pieces, atoms = _transform_axis(unit, axis_poles[k],
                                                term.exponent[k], sigma0)
                if atoms:
                    raise CapabilityError(
                        "rank-2 transforms with distributional atoms are not supported")
                axis_data.append(pieces)
            for p1 in axis_data[0]:
                for p2 in axis_data[1]:
                    by_axis = {flag[0]: p1, flag[1]: p2}
                    corner = tuple(by_axis[k][0] for k in range(2))
                    sides = tuple(by_axis[k][1] for k in range(2))
                    rates = tuple(by_axis[k][2] for k in range(2))
                    anchors = tuple(by_axis[k][0] if by_axis[k][2] else Fraction(0)
                                    for k in range(2))
                    poly = (_embed_axis(by_axis[0][3], 0)
                            * _embed_axis(by_axis[1][3], 1))
                    key = (corner, sides, rates, anchors)
                    box_map[key] = box_map.get(key, Poly(2)) + poly
    boxes = tuple(Box(*key, poly) for key, poly in sorted(
        box_map.items(), key=lambda kv: repr(kv[0])) if not poly.is_zero())
    return PiecewisePolyMeasure(rank=2, two_pi_power=power + 2,
                                breakpoints=(), pieces=((),), boxes=boxes)


def _embed_axis(p: Poly, axis: int) -> Poly:
    out = Poly(2)
    for (e,), c in p.terms.items():
        expo = [0, 0]
        expo[axis] = e
        out = out + Poly(2, {tuple(expo): c})
    return out


def jk_residue(U: PiecewisePolyMeasure, eta) -> float:
    """Limit of the measure density along t*eta as t goes to 0 from above."""
    direction = _covector(eta)
    if len(direction) != U.rank:
        raise PreconditionError("direction rank must match the measure")
    scale = (2.0 * math.pi) ** U.two_pi_power
    if U.rank == 1:
        e = direction[0]
        if e == 0 and (Fraction(0) in U.breakpoints
                       or any(pt == 0 for pt, _, _ in U.atoms)):
            raise DomainError("the direction lies on the wall xi = 0")
        if e >= 0:
            idx = bisect_right(U.breakpoints, Fraction(0))
        else:
            idx = bisect_left(U.breakpoints, Fraction(0))
        comps = U.pieces[idx]
        return scale * _limit_value(comps)
    total = 0.0
    for box in U.boxes:
        active = True
        for k in range(2):
            c, s, e = box.corner[k], box.sides[k], direction[k]
            if c == 0:
                if e == 0:
                    raise DomainError(f"the direction lies on the wall xi_{k + 1} = 0")
                if s * e < 0:
                    active = False
            elif s * c > 0:
                active = False
        if active:
            const = box.poly.eval((Fraction(0), Fraction(0)))
            if const.im != 0:
                raise DomainError("the residue limit is not real")
            damp = sum(float(r) * (0.0 - float(a))
                       for r, a in zip(box.rates, box.anchors))
            total += float(const.re) * math.exp(damp)
    return scale * total


def _limit_value(comps: tuple[ExpPiece, ...]) -> float:
    total = 0.0
    for comp in comps:
        const = comp.poly.eval((Fraction(0),))
        if const.im != 0:
            raise DomainError("the residue limit is not real")
        expo = comp.rate * (0 - comp.anchor)
        total += float(const.re) * (1.0 if expo == 0 else math.exp(float(expo)))
    return total


@dataclass(frozen=True)
class CompactGroupData:
    """Root data and volumes of a compact connected group."""

    rank: int
    positive_roots: tuple[tuple[Fraction, ...], ...]
    weyl_order: int
    vol_T: float
    vol_G: float

    def __post_init__(self):
        object.__setattr__(self, "positive_roots",
                           tuple(_covector(r) for r in self.positive_roots))

    @property
    def dim(self) -> int:
        return self.rank + 2 * len(self.positive_roots)


def su2_group() -> CompactGroupData:
    """SU(2) with the inner product <A, B> = -2 tr(AB).

    That normalization gives the circle subgroup length 4*pi and the group
    volume 16*pi^2; the single positive root is Y -> Y in the induced
    coordinate on the Cartan line.
    """
    return CompactGroupData(rank=1, positive_roots=((1,),), weyl_order=2,
                            vol_T=4.0 * math.pi,
                            vol_G=16.0 * math.pi ** 2)


def torus_group(rank: int, vol: float | None = None) -> CompactGroupData:
    vol = float(vol) if vol is not None else (2.0 * math.pi) ** rank
    return CompactGroupData(rank=rank, positive_roots=(), weyl_order=1,
                            vol_T=vol, vol_G=vol)


def weyl_lie_algebra_integral(G: CompactGroupData, f: Callable[..., float],
                              radius: float = 10.0, order: int = 120) -> float:
    """Reduce an Ad-invariant integral to the Cartan algebra.

    Computes vol_G / (|W| vol_T) times the integral of f * Phi^2 over
    [-radius, radius]^rank, Phi being the product of positive roots.
    The integrand must be negligible outside that window.
    """
    if G.rank > MAX_RANK:
        raise CapabilityError("Weyl reduction is implemented up to rank 2")
    from .oscillatory import _gl
    x, w = _gl(order)
    nodes = radius * x
    weights = radius * w
    prefactor = G.vol_G / (G.weyl_order * G.vol_T)
    roots = [tuple(float(a) for a in r) for r in G.positive_roots]
    if G.rank == 1:
        total = 0.0
        for y, wy in zip(nodes, weights):
            phi = 1.0
            for r in roots:
                phi *= r[0] * y
            total += wy * f(y) * phi * phi
        return prefactor * total
    total = 0.0
    for y1, w1 in zip(nodes, weights):
        for y2, w2 in zip(nodes, weights):
            phi = 1.0
            for r in roots:
                phi *= r[0] * y1 + r[1] * y2
            total += w1 * w2 * f(y1, y2) * phi * phi
    return prefactor * total


def sphere_fixed_points() -> list[FixedPointDatum]:
    """Height-function circle action on the unit sphere: two poles."""
    return [
        FixedPointDatum("north", 0, (Fraction(1),), ((Fraction(1),),)),
        FixedPointDatum("south", 0, (Fraction(-1),), ((Fraction(-1),),)),
    ]


def _fixed_point_terms(data: Sequence[FixedPointDatum],
                       power: int) -> list[RationalExpTerm]:
    out = []
    for F in data:
        if F.dim_F != 0:
            raise CapabilityError("positive-dimensional components are not transformed")
        num = QQi(1)
        for _ in F.weights:
            num = num * _MINUS_I
        out.append(RationalExpTerm(
            exponent=F.J_at_F,
            numerator=Poly.const(len(F.J_at_F), num),
            denominator=tuple(DenomFactor(w) for w in F.weights),
            two_pi_power=power))
    return out


def _pointing_vector(weights) -> tuple[Fraction, ...] | None:
    rank = len(weights[0])
    if rank == 1:
        signs = {1 if w[0] > 0 else -1 for w in weights}
        if len(signs) == 1:
            return (Fraction(-signs.pop()),)
        return None
    candidates = []
    for w in weights:
        candidates.append((w[1], -w[0]))
        candidates.append((-w[1], w[0]))
        candidates.append((-w[0], -w[1]))
    total = tuple(-sum(w[k] for w in weights) for k in range(2))
    candidates.append(total)
    candidates.extend([(Fraction(a), Fraction(b))
                       for a in (-1, 0, 1) for b in (-1, 0, 1) if a or b])
    for z in candidates:
        if all(sum(a * b for a, b in zip(w, z)) < 0 for w in weights):
            return tuple(as_fraction(c) for c in z)
    return None


def _default_cone(weights, rates_given: bool) -> ConeLambda:
    rank = len(weights[0])
    z = _pointing_vector(weights)
    if z is None:
        if not rates_given:
            raise PreconditionError(
                "the momentum image spans every half-space, so the "
                "pushforward is not locally finite")
        z = tuple([Fraction(1)] + [Fraction(0)] * (rank - 1)) if rank == 1 \
            else (Fraction(1), Fraction(0))
    if rank == 1:
        return ConeLambda((z,))
    # second ray: small rotation of z keeping every weight strictly one-sided
    for denom in (4, 16, 64, 256):
        z2 = (z[0] - z[1] / denom, z[1] + z[0] / denom)
        if all(sum(a * b for a, b in zip(w, z2)) < 0 for w in weights) \
                or rates_given:
            return ConeLambda((z, z2))
    raise InternalConsistencyError("no admissible second ray found")


def dh_measure(source, rates: Sequence | None = None,
               cone: ConeLambda | None = None,
               flag: tuple[int, ...] | None = None) -> PiecewisePolyMeasure:
    """Pushforward of Liouville measure under the momentum map.

    ``source`` is either a list of fixed-point data or a linear model.  For
    a model, optional ``rates`` c_j multiply the mass by
    exp(-sum c_j |z_j|^2), shifting each pole off the real axis; without
    rates the weights must span a pointed cone so the pushforward is
    locally finite.
    """
    if isinstance(source, LinearHamiltonianModel):
        model = source
        if model.torus_rank > MAX_RANK:
            raise CapabilityError("transforms are supported up to rank 2")
        weights = [_covector(w) for w in model.weights]
        if any(not any(w) for w in weights):
            raise CapabilityError("a zero weight makes the fixed locus non-isolated")
        n, r = model.complex_dim, model.torus_rank
        if rates is not None:
            rates = [as_fraction(c) for c in rates]
            if len(rates) != n or any(c <= 0 for c in rates):
                raise PreconditionError("need one positive rate per coordinate")
        num = QQi(1)
        for _ in range(n):
            num = num * _MINUS_I
        factors = tuple(
            DenomFactor(w, 1, 2 * rates[j] if rates is not None else Fraction(0))
            for j, w in enumerate(weights))
        term = RationalExpTerm(
            exponent=tuple([Fraction(0)] * r),
            numerator=Poly.const(r, num),
            denominator=factors,
            two_pi_power=n - r)
        if cone is None:
            cone = _default_cone(weights, rates is not None)
        return fourier_piecewise([term], cone, flag)

    data = list(source)
    if not data:
        return ZERO_MEASURE
    if rates is not None:
        raise PreconditionError("regularization rates apply to linear models only")
    rank = len(data[0].J_at_F)
    half_dims = {F.dim_F // 2 + len(F.weights) for F in data}
    if len(half_dims) != 1:
        raise PreconditionError("fixed-point data mix ambient dimensions")
    n = half_dims.pop()
    terms = _fixed_point_terms(data, n - rank)
    if cone is None:
        measures = []
        if rank == 1:
            cones = [ConeLambda(((Fraction(1),),)), ConeLambda(((Fraction(-1),),))]
        else:
            cones = [ConeLambda(((Fraction(1), Fraction(0)),
                                 (Fraction(1), Fraction(1)))),
                     ConeLambda(((Fraction(-1), Fraction(0)),
                                 (Fraction(-1), Fraction(-1))))]
        for c in cones:
            measures.append(fourier_piecewise(terms, c, flag))
        # opposite cones may pick different box decompositions of the same
        # measure, so rank 2 compares densities instead of representations
        agree = measures[0] == measures[1] or (
            rank == 2 and _boxes_agree(measures[0], measures[1]))
        if not agree:
            raise DomainError(
                "the fixed-point data does not determine a locally finite pushforward")
        return measures[0]
    return fourier_piecewise(terms, cone, flag)


def _boxes_agree(a: PiecewisePolyMeasure, b: PiecewisePolyMeasure) -> bool:
    """Exact pointwise agreement of two rate-free box decompositions."""
    if a.two_pi_power != b.two_pi_power:
        return False
    if any(any(r for r in box.rates) for U in (a, b) for box in U.boxes):
        return a == b
    axes = []
    for k in range(2):
        corners = sorted({box.corner[k] for U in (a, b) for box in U.boxes})
        if not corners:
            axes.append([Fraction(0)])
            continue
        pts = [corners[0] - 1, corners[-1] + 1]
        for lo, hi in zip(corners, corners[1:]):
            if lo != hi:
                pts.extend([lo + (hi - lo) / 3, lo + (hi - lo) / 2])
        axes.append(pts)

    def value(U: PiecewisePolyMeasure, pt) -> QQi:
        total = QQi(0)
        for box in U.boxes:
            if all(s * (x - c) > 0
                   for s, x, c in zip(box.sides, pt, box.corner)):
                total = total + box.poly.eval(pt)
        return total

    return all(value(a, (x1, x2)) == value(b, (x1, x2))
               for x1 in axes[0] for x2 in axes[1])


def residue_formula_check(model: LinearHamiltonianModel,
                          rates: Sequence,
                          scale=1,
                          eta=Fraction(1, 2),
                          cone: ConeLambda | None = None):
    """Compare a reduced-space integral with its residue evaluation.

    The model must be the rank-1 hyperbolic pair with weights (1, -1); the
    invariant mass is scale * exp(-c_1 |z_1|^2 - c_2 |z_2|^2).  Returns
    (lhs, rhs, |lhs - rhs|) where lhs integrates over the reduced cone
    chart and rhs takes the residue of the transformed fixed-point sum.
    """
    if model.torus_rank != 1 or model.complex_dim != 2:
        raise UnsupportedModelError("the check covers the rank-1 pair (1, -1)")
    w = sorted(w[0] for w in model.weights)
    if w != [-1, 1]:
        raise UnsupportedModelError("the check covers the rank-1 pair (1, -1)")
    c1, c2 = (as_fraction(c) for c in rates)
    if c1 <= 0 or c2 <= 0:
        raise PreconditionError("need positive regularization rates")
    scale = as_fraction(scale)

    # reduced chart: the zero fiber is the diagonal u_1 = u_2 = u with
    # measure pi du, and the degree factors contribute (-2 pi i)(-i)
    rho = float(c1 + c2)
    nodes, wts = _panel_nodes(_octave_edges(0.0, 60.0 / rho), 16)
    chart = float(np.exp(-rho * nodes) @ wts)
    lhs = -2.0 * math.pi ** 2 * float(scale) * chart

    # each coordinate contributes 2 pi / (i w_j (Y - i b_j)); pulling the i
    # into the written factor (w_j Y - 2 i c_j) leaves (-i)^n i^{-n} = +1
    num = QQi(1) * scale
    den = tuple(DenomFactor((as_fraction(wj[0]),), 1, 2 * (c1, c2)[j])
                for j, wj in enumerate(model.weights))
    term = RationalExpTerm(exponent=(Fraction(0),),
                           numerator=Poly.const(1, num),
                           denominator=den,
                           two_pi_power=2)
    if cone is None:
        cone = ConeLambda(((Fraction(1),),))
    measure = fourier_piecewise([term], cone)
    rhs = jk_residue(measure, eta) / (1 * 2.0 * math.pi)
    return lhs, rhs, abs(lhs - rhs)
