"""Dyadic resolution of a torus momentum map near its singular zero set.

The zero fiber of the momentum map of a linear circle or torus action is a
cone, smooth away from the tip.  This module splits an amplitude into dyadic
radial shells, rescales each shell to unit size, and recurses until every
remaining piece meets the zero fiber only in its smooth part.  It also
catalogs the isotropy strata of the reduced zero set, evaluates the leading
coefficient of the induced small parameter expansion, and fits the order of
the remainder against numerically evaluated oscillatory integrals.

Points of the phase-space block are graded by the square radius; level l of
the dyadic resolution lives at radii around 2**-l.  Rescaling a shell back
to unit radius multiplies the small parameter by 4**l and the integral by
4**-l per complex coordinate, which is the recursion the asymptotics rest
on.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction

import numpy as np

from ._exact import hermite_normal_form, lattice_contains
from .amplitudes import (
    AmplitudeExpr,
    SupportBox,
    profile_value,
    shell_cutoff,
    support_box,
)
from .errors import (
    CapabilityError,
    DomainError,
    InternalConsistencyError,
    PreconditionError,
    UnsupportedModelError,
)
from .models import LinearHamiltonianModel
from .oscillatory import (
    FitResult,
    QuadratureSpec,
    _gl,
    brute_force_I,
    fit_order,
    gaussian_exact_I,
)

MAX_SUBSET_DIM = 14
MAX_ANGLE_POINTS = 20000
SMOOTH_ANGLE_ORDER = 48
SINGULAR_LEVEL_TOL = 1e-12


# ---------------------------------------------------------------------------
# dyadic shells


@dataclass(frozen=True)
class DyadicPartition:
    """Dyadic resolution of the phase-space radius.

    ``phi`` is the reference cutoff, 1 up to radius 1/4 and 0 from radius
    1/2 on; one shell is ``sigma(t) = phi(t/2) - phi(t)``, supported on
    radii in (1/4, 1), and level l carries ``sigma(t / tau(l))`` with
    ``tau(l) = 2**-l``.  ``beta`` selects the mollifier profile.
    """

    beta: int = 1

    def __post_init__(self) -> None:
        if self.beta < 1:
            raise PreconditionError("profile parameter must be at least 1")

    def phi(self, t):
        t2 = np.square(np.asarray(t, dtype=float))
        u = (2.0 * t2 - 5.0 / 16.0) / (3.0 / 16.0)
        return profile_value(u, 0, self.beta)

    def sigma(self, t):
        t = np.asarray(t, dtype=float)
        return self.phi(0.5 * t) - self.phi(t)

    def tau(self, level: int) -> float:
        if level < 0:
            raise PreconditionError("dyadic levels start at 0")
        return 0.5 ** level


def dyadic_weights(partition: DyadicPartition, w) -> dict[int, float]:
    """Nonzero shell weights sigma(|w| / tau(l)) at one phase-space point.

    At most two consecutive levels contribute, and for 0 < |w| <= 1/2 the
    weights sum to 1 because the shells telescope to the reference cutoff.
    """
    arr = np.asarray(w, dtype=float)
    radius = float(np.sqrt(np.sum(arr * arr)))
    if radius == 0.0:
        raise DomainError("the origin lies below every dyadic level")
    if radius > 0.5:
        raise PreconditionError("dyadic weights cover the ball |w| <= 1/2")
    base = max(0, int(math.floor(-math.log2(radius))) - 2)
    out: dict[int, float] = {}
    for level in range(base, base + 4):
        val = float(partition.sigma(radius * 2.0 ** level))
        if val > 0.0:
            out[level] = val
    return out


def rescale_amplitude(a: AmplitudeExpr, level: int,
                      partition: DyadicPartition | None = None) -> AmplitudeExpr:
    """Level-l shell piece pulled back to the unit shell.

    The result is a(tau_l w) times one shell cutoff; its oscillatory
    integral at parameter 4**l mu, scaled by tau_l**(2n), equals the
    integral of the original amplitude times the level-l shell at mu.
    """
    if level < 0:
        raise PreconditionError("dyadic levels start at 0")
    beta = (partition or DyadicPartition()).beta
    scaled = a.rescale_p(Fraction(1, 2 ** level))
    return scaled * shell_cutoff(a.complex_dim, a.torus_rank, "p", beta)


# ---------------------------------------------------------------------------
# isotropy strata of the reduced zero set


@dataclass(frozen=True)
class StratumRecord:
    """One isotropy class of the zero fiber modulo the torus.

    ``lattice`` is the canonical basis of the weight lattice spanned by the
    active rows, ``stratum_dim`` the dimension of the stratum in the reduced
    space, and ``gap`` its codimension below the regular stratum.
    """

    label: str
    algebra_dim: int
    finite_order: int
    stratum_dim: int
    gap: int
    lattice: tuple[tuple[int, ...], ...]
    active_sets: tuple[tuple[int, ...], ...]


@dataclass(frozen=True)
class StrataCatalog:
    records: tuple[StratumRecord, ...]
    lambda_a: int
    chain_counts_differ: bool

    @property
    def regular(self) -> StratumRecord:
        return self.records[0]

    @property
    def singular(self) -> tuple[StratumRecord, ...]:
        return tuple(rec for rec in self.records if rec.gap > 0)


def _positively_null(rows) -> bool:
    """Whether some strictly positive combination of the rows vanishes."""
    vs = [tuple(int(x) for x in row) for row in rows
          if any(x != 0 for x in row)]
    if not vs:
        return True
    if len(vs[0]) == 1:
        return any(v[0] > 0 for v in vs) and any(v[0] < 0 for v in vs)
    b = vs[0]
    if all(v[0] * b[1] - v[1] * b[0] == 0 for v in vs):
        signs = [v[0] * b[0] + v[1] * b[1] for v in vs]
        return any(s > 0 for s in signs) and any(s < 0 for s in signs)
    # full-rank case: infeasible exactly when a closed half-plane holds all
    # rows with at least one strictly inside; its boundary can be rotated
    # onto a row normal, so checking the two normals per row is complete
    for v in vs:
        for h in ((-v[1], v[0]), (v[1], -v[0])):
            dots = [h[0] * u[0] + h[1] * u[1] for u in vs]
            if all(d >= 0 for d in dots) and any(d > 0 for d in dots):
                return False
    return True


def _class_label(algebra_dim: int, order: int) -> str:
    if algebra_dim == 0:
        return "trivial" if order == 1 else f"Z/{order}"
    core = "S^1" if algebra_dim == 1 else f"T^{algebra_dim}"
    return core if order == 1 else f"{core} x Z/{order}"


def strata_catalog(model: LinearHamiltonianModel,
                   support: SupportBox | None = None) -> StrataCatalog:
    """Isotropy classes of the zero fiber restricted to a support region.

    Classes are grouped by the lattice spanned by the weight rows active on
    the stratum; the regular class must have finite stabilizer.  The
    returned ``lambda_a`` bounds the depth of any chain of strata whose
    dimension drops by 2 at every step.
    """
    n, r = model.complex_dim, model.torus_rank
    if n > MAX_SUBSET_DIM:
        raise CapabilityError(
            f"stratum enumeration covers at most {MAX_SUBSET_DIM} coordinates")
    if r > 2:
        raise CapabilityError(
            "positive solvability of the active rows is decided exactly "
            "only through parameter rank 2")
    include_origin = (support is None or support.p_radius is None
                      or support.p_radius[0] <= 1e-12)
    classes: dict[tuple, dict] = {}
    for mask in range(1 << n):
        active = tuple(j for j in range(n) if mask >> j & 1)
        if not active and not include_origin:
            continue
        rows = [model.weights[j] for j in active]
        if not _positively_null(rows):
            continue
        key = hermite_normal_form(rows, r)
        dim = 2 * len(active) - 2 * len(key)
        entry = classes.setdefault(key, {"dim": dim, "sets": []})
        entry["dim"] = max(entry["dim"], dim)
        entry["sets"].append(active)
    if not classes:
        raise InternalConsistencyError("the zero fiber misses the support")
    reg_key = max(classes, key=lambda k: classes[k]["dim"])
    if not all(lattice_contains(reg_key, row)
               for key in classes for row in key):
        raise UnsupportedModelError(
            "the top stratum does not dominate every isotropy class")
    reg_dim = classes[reg_key]["dim"]
    records = []
    for key, entry in classes.items():
        rank = len(key)
        factors = _lattice_torsion(key)
        order = 1
        for d in factors:
            order *= d
        algebra_dim = r - rank
        gap = reg_dim - entry["dim"]
        if gap < 0 or gap % 2:
            raise InternalConsistencyError("stratum gaps must be even")
        records.append(StratumRecord(
            label=_class_label(algebra_dim, order),
            algebra_dim=algebra_dim,
            finite_order=order,
            stratum_dim=entry["dim"],
            gap=gap,
            lattice=key,
            active_sets=tuple(sorted(entry["sets"]))))
    records.sort(key=lambda rec: (-rec.stratum_dim, rec.label))
    if records[0].algebra_dim > 0:
        raise UnsupportedModelError(
            "the regular stratum carries a positive-dimensional stabilizer")
    member_count = sum(1 for rec in records if rec.gap == 2)
    link_count = _longest_even_chain(records)
    return StrataCatalog(
        records=tuple(records),
        lambda_a=max(member_count, link_count),
        chain_counts_differ=member_count != link_count)


def _lattice_torsion(key) -> list[int]:
    # diagonal of the HNF gives the elementary divisors up to association;
    # the stabilizer order only needs their product
    return [abs(row[next(j for j, x in enumerate(row) if x)]) for row in key]


def _longest_even_chain(records) -> int:
    order = {rec.lattice: i for i, rec in enumerate(records)}
    memo: dict[int, int] = {}

    def deepest(i: int) -> int:
        if i in memo:
            return memo[i]
        best = 0
        for j, rec in enumerate(records):
            if j == i or rec.stratum_dim != records[i].stratum_dim - 2:
                continue
            if rec.lattice == records[i].lattice:
                continue
            if all(lattice_contains(records[i].lattice, row)
                   for row in rec.lattice):
                best = max(best, 1 + deepest(j))
        memo[i] = best
        return best

    del order
    return deepest(0)


# ---------------------------------------------------------------------------
# leading coefficient on the reduced zero set


def _orbit_average(a: AmplitudeExpr):
    """Evaluator of the torus average of a at X = 0 on batches of square
    radii, exact for polynomial angle dependence."""
    n = a.complex_dim
    dim = a.dim
    degs = [0] * n
    smooth = [False] * n
    for t in a.terms:
        for exps in t.poly.terms:
            for j in range(n):
                degs[j] = max(degs[j], exps[2 * j] + exps[2 * j + 1])
        q = t.quad
        for j in range(n):
            x, y = 2 * j, 2 * j + 1
            if q[x][x] != q[y][y] or q[x][y] != 0:
                smooth[j] = True
            for k in range(2 * n):
                if k not in (x, y) and (q[x][k] != 0 or q[y][k] != 0):
                    smooth[j] = True
    counts = [SMOOTH_ANGLE_ORDER if smooth[j] else degs[j] + 1
              for j in range(n)]
    total = 1
    for c in counts:
        total *= c
    if total > MAX_ANGLE_POINTS:
        raise CapabilityError(
            f"orbit averaging needs {total} angle nodes, cap {MAX_ANGLE_POINTS}")
    grids = [np.arange(c) * (2.0 * math.pi / c) for c in counts]
    mesh = np.meshgrid(*grids, indexing="ij") if n else []
    cos = np.stack([np.cos(m).ravel() for m in mesh], axis=1)
    sin = np.stack([np.sin(m).ravel() for m in mesh], axis=1)
    nang = cos.shape[0]

    def evaluate(svals: np.ndarray):
        radii = np.sqrt(np.maximum(svals, 0.0))
        pts = np.zeros((svals.shape[0], nang, dim))
        for j in range(n):
            pts[:, :, 2 * j] = radii[:, None, j] * cos[None, :, j]
            pts[:, :, 2 * j + 1] = radii[:, None, j] * sin[None, :, j]
        vals = a.evaluate(pts.reshape(-1, dim)).reshape(svals.shape[0], nang)
        return vals.mean(axis=1)

    return evaluate


def _octave_edges(lo: float, hi: float, breaks=()) -> list[float]:
    """Panel edges on [lo, hi]: doubling widths from the left end, refined
    by the given interior break points."""
    edges = {lo, hi}
    width = min(1.0, hi - lo)
    pos = lo
    while pos + width < hi:
        pos += width
        edges.add(pos)
        width *= 2.0
    for b in breaks:
        if lo + 1e-14 < b < hi - 1e-14:
            edges.add(b)
    return sorted(edges)


def _panel_nodes(edges, order: int):
    x, wts = _gl(order)
    nodes, weights = [], []
    for a, b in zip(edges[:-1], edges[1:]):
        half, mid = 0.5 * (b - a), 0.5 * (b + a)
        nodes.append(half * x + mid)
        weights.append(half * wts)
    return np.concatenate(nodes), np.concatenate(weights)


def _slice_integral(model: LinearHamiltonianModel, a: AmplitudeExpr,
                    level: float) -> float:
    """Integral of the torus-averaged amplitude over the level slice
    {s >= 0, sum_j w_j s_j = level} of square radii, including the chart
    measure, the orbit volume, and the slice volume factor pi**(n-1)."""
    n = model.complex_dim
    w = [float(model.weights[j][0]) for j in range(n)]
    box = support_box(a)
    caps = [box.halfwidths[2 * j] ** 2 + box.halfwidths[2 * j + 1] ** 2
            for j in range(n)]
    F = _orbit_average(a)
    pivot = max(range(n), key=lambda j: abs(w[j]))
    wp = w[pivot]
    rest = [j for j in range(n) if j != pivot]
    weighted = [j for j in rest if w[j] != 0.0]
    if weighted:
        inner = weighted[-1]
        outer = [j for j in rest if j != inner]
    else:
        inner = rest[-1] if rest else None
        outer = rest[:-1]
    sq_bounds = sorted({float(b.rin2) for t in a.terms for b in t.bumps
                        if b.block == "p"}
                       | {float(b.rout2) for t in a.terms for b in t.bumps
                          if b.block == "p"})

    def inner_integral(budget: float, prefix: dict[int, float]) -> float:
        if inner is None:
            sp = budget / wp
            if sp < 0.0:
                return 0.0
            point = np.zeros((1, n))
            point[0, pivot] = sp
            return float(np.real(F(point)[0]))
        wk = w[inner]
        cap = caps[inner]
        if wk == 0.0:
            sp = budget / wp
            if sp < 0.0:
                return 0.0
            lo, hi = 0.0, cap
        elif (wp > 0.0) == (wk > 0.0):
            lo, hi = 0.0, min(cap, budget / wk)
        else:
            lo, hi = max(0.0, budget / wk), cap
        if hi <= lo:
            return 0.0
        # square radius along the line is affine in t; split panels where
        # it crosses a cutoff transition radius
        base = sum(prefix.values()) + budget / wp
        slope = 1.0 - (wk / wp if wk else 0.0)
        breaks = []
        for b in sq_bounds:
            if slope != 0.0:
                breaks.append((b - base) / slope)
        nodes, wts = _panel_nodes(_octave_edges(lo, hi, breaks), 16)
        svals = np.zeros((nodes.size, n))
        for j, val in prefix.items():
            svals[:, j] = val
        svals[:, inner] = nodes
        svals[:, pivot] = (budget - wk * nodes) / wp if wk else budget / wp
        return float(np.real(F(svals)) @ wts)

    kink_sets: list[set[float]] = [
        {0.0, w[inner] * caps[inner]} if inner is not None and w[inner]
        else set()]
    for v in reversed(outer):
        prev = kink_sets[0]
        kink_sets.insert(0, prev | {k + w[v] * caps[v] for k in prev})

    def recurse(idx: int, budget: float, prefix: dict[int, float]) -> float:
        if idx == len(outer):
            return inner_integral(budget, prefix)
        v = outer[idx]
        breaks = [(budget - k) / w[v] for k in kink_sets[idx + 1] if w[v]]
        nodes, wts = _panel_nodes(_octave_edges(0.0, caps[v], breaks), 16)
        total = 0.0
        for t, wt in zip(nodes, wts):
            prefix[v] = float(t)
            total += wt * recurse(idx + 1, budget - w[v] * t, prefix)
        del prefix[v]
        return total

    value = recurse(0, level, {})
    return 2.0 * math.pi ** n / abs(wp) * value


def leading_term_L0(model: LinearHamiltonianModel, a: AmplitudeExpr) -> float:
    """Coefficient of the leading power of the small parameter: the orbit
    volume times the integral of the reduced amplitude over the regular
    part of the reduced zero set."""
    if model.torus_rank != 1:
        raise UnsupportedModelError(
            "the reduced zero set chart is implemented for one-parameter "
            "actions")
    strata_catalog(model, support_box(a))
    return _slice_integral(model, a, 0.0)


def leading_term_regular(model: LinearHamiltonianModel, a: AmplitudeExpr,
                         eta) -> float:
    """Leading coefficient at a regular level of the momentum map.

    For a one-parameter action the only singular level is zero, where the
    fiber meets the fixed point; every other level gives the same chart as
    the zero-level coefficient shifted to the slice sum w_j s_j = -2 eta.
    """
    if model.torus_rank != 1:
        raise UnsupportedModelError(
            "regular level coefficients are implemented for one-parameter "
            "actions")
    eta = float(np.asarray(eta, dtype=float).reshape(()))
    if abs(eta) <= SINGULAR_LEVEL_TOL:
        raise PreconditionError(
            "the level is singular: the fiber contains the fixed point")
    return _slice_integral(model, a, -2.0 * eta)


# ---------------------------------------------------------------------------
# recursive resolution


@dataclass(frozen=True)
class DesingNode:
    """One localization step: the amplitude in the current chart, its
    stratum catalog, and one child per singular stratum peeled off."""

    label: str
    depth: int
    amplitude: AmplitudeExpr
    catalog: StrataCatalog
    children: tuple["DesingNode", ...]

    def realized_depth(self) -> int:
        if not self.children:
            return self.depth
        return max(child.realized_depth() for child in self.children)


def format_tree(node: DesingNode) -> str:
    lines = []

    def walk(nd: DesingNode) -> None:
        sing = ", ".join(rec.label for rec in nd.catalog.singular) or "none"
        lines.append("{}{} (regular {}, singular {})".format(
            "  " * nd.depth, nd.label, nd.catalog.regular.label, sing))
        for child in nd.children:
            walk(child)

    walk(node)
    return "\n".join(lines)


@dataclass(frozen=True)
class AsymptoticResult:
    """Outcome of a resolution run: the structural exponents, the leading
    coefficient, the oracle table (mu, integral, prediction), and the
    remainder-order fit."""

    kappa: int
    L0: float
    lambda_a: int
    chain_counts_differ: bool
    depth: int
    table: tuple[tuple[float, complex, float], ...]
    alpha: float
    beta: float
    fit: FitResult
    tree: DesingNode


def _grow_tree(model, amp, catalog, partition, depth_cap, depth,
               label) -> DesingNode:
    children = []
    parent_keys = {rec.lattice for rec in catalog.singular}
    for rec in catalog.singular:
        if rec.active_sets != ((),):
            raise UnsupportedModelError(
                "localization is implemented for singular loci at the "
                "origin only")
        if depth + 1 > depth_cap:
            raise InternalConsistencyError(
                f"resolution exceeded the depth cap {depth_cap}")
        child_amp = rescale_amplitude(amp, 0, partition)
        child_cat = strata_catalog(model, support_box(child_amp))
        child_keys = {crec.lattice for crec in child_cat.singular}
        if not child_keys < parent_keys:
            raise InternalConsistencyError(
                "shell localization did not shrink the singular set")
        children.append(_grow_tree(model, child_amp, child_cat, partition,
                                   depth_cap, depth + 1, rec.label))
    return DesingNode(label, depth, amp, catalog, tuple(children))


def desingularize(model: LinearHamiltonianModel, a: AmplitudeExpr,
                  mus=None, depth_cap: int = 8,
                  partition: DyadicPartition | None = None,
                  spec: QuadratureSpec | None = None) -> AsymptoticResult:
    """Resolve the zero fiber, evaluate the leading coefficient, and fit
    the remainder order against the oscillatory-integral oracle.

    The remainder |I(mu) - (2 pi mu)**kappa L0| is fitted as
    alpha log mu + beta log log(1/mu) + const over the given mu grid.
    """
    partition = partition or DyadicPartition()
    catalog = strata_catalog(model, support_box(a))
    if model.torus_rank != 1:
        raise UnsupportedModelError(
            "resolution is implemented for one-parameter actions")
    kappa = model.torus_rank - catalog.regular.algebra_dim
    L0 = _slice_integral(model, a, 0.0)
    tree = _grow_tree(model, a, catalog, partition, depth_cap, 0, "root")
    depth = tree.realized_depth()
    if depth > catalog.lambda_a + 1:
        raise InternalConsistencyError(
            "realized resolution depth exceeds the chain bound")
    grid = np.geomspace(0.01, 0.2, 5) if mus is None else \
        np.asarray(mus, dtype=float).ravel()
    rows = []
    resid = []
    for mu in grid:
        try:
            val = gaussian_exact_I(model, a, float(mu), spec)
        except CapabilityError:
            val = brute_force_I(model, a, float(mu), spec)
        pred = (2.0 * math.pi * float(mu)) ** kappa * L0
        rows.append((float(mu), complex(val), pred))
        resid.append(abs(complex(val) - pred))
    fit = fit_order(grid, resid, with_log=True)
    return AsymptoticResult(
        kappa=kappa, L0=L0, lambda_a=catalog.lambda_a,
        chain_counts_differ=catalog.chain_counts_differ, depth=depth,
        table=tuple(rows), alpha=fit.alpha, beta=fit.beta, fit=fit,
        tree=tree)


def homogeneity_check(model: LinearHamiltonianModel, w, X, c: float) -> float:
    """Absolute defect of the quadratic scaling law of the phase: the phase
    at c*w differs from c**2 times the phase at w by exactly zero for
    binary scale factors."""
    arr = np.asarray(w, dtype=float)
    c = float(c)
    return abs(model.phase(c * arr, X) - c * c * model.phase(arr, X))
