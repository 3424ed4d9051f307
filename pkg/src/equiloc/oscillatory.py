"""Oscillatory torus integrals and their stationary-phase layers.

The central object is

    I(mu) = int_{C^n x R^r} a(p, X) exp(i (J(p) - eta) . X / mu) dp dX,

with J the momentum map of a linear torus action.  ``brute_force_I`` is the
direct quadrature oracle with three strategies picked from the amplitude's
structure; ``gaussian_exact_I`` integrates the phase-space directions in
closed form when the amplitude is a Gaussian there, leaving an r-dimensional
parameter integral; ``inner_sp_expansion`` is the stationary-phase expansion
of the model pairing phase <B, xi> with an explicit remainder bound; and
``fit_order`` recovers power laws (optionally with a logarithm) from decay
tables.

All quadrature is composite Gauss-Legendre with panels sized so that no
panel sees more than a fixed number of oscillation periods at the local
frequency.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from functools import lru_cache

import numpy as np

from ._exact import Poly
from ._kernels import radial_phase_sum
from .amplitudes import (
    AmplitudeExpr,
    SupportBox,
    Term,
    mixed_pairing_derivative,
    profile_value,
    sup_abs,
    support_box,
)
from .errors import (
    CapabilityError,
    DataError,
    DomainError,
    PreconditionError,
    ResolutionError,
)
from .models import LinearHamiltonianModel

MAX_AXIS_NODES = 400_000
MAX_GRID_POINTS = 50_000_000
SP_ORDER_CAP = 6


@dataclass(frozen=True)
class QuadratureSpec:
    """Quadrature policy: panel order, oscillation safety factors, support
    truncation level, and an optional per-axis node override."""

    nodes: int | None = None
    rule: str = "gl16"
    guard: float = 6.0
    panel_periods: float = 2.5
    cutoff: float = 1e-14
    adaptive_tol: float = 1e-10

    @property
    def order(self) -> int:
        if not self.rule.startswith("gl"):
            raise DataError(f"unknown quadrature rule {self.rule!r}")
        try:
            n = int(self.rule[2:])
        except ValueError:
            raise DataError(f"unknown quadrature rule {self.rule!r}") from None
        if not 2 <= n <= 64:
            raise DataError("quadrature order must be between 2 and 64")
        return n


DEFAULT_SPEC = QuadratureSpec()


@lru_cache(maxsize=None)
def _gl(order: int):
    return np.polynomial.legendre.leggauss(order)


def _composite_panels(lo: float, hi: float, panels: int, order: int):
    x, w = _gl(order)
    edges = np.linspace(lo, hi, panels + 1)
    half = 0.5 * np.diff(edges)
    mid = 0.5 * (edges[:-1] + edges[1:])
    nodes = (half[:, None] * x[None, :] + mid[:, None]).ravel()
    weights = (half[:, None] * w[None, :]).ravel()
    return nodes, weights


def _axis_rule(lo: float, hi: float, freq_max: float, spec: QuadratureSpec,
               label: str):
    """Composite rule on [lo, hi] for an integrand oscillating at up to
    ``freq_max`` periods per unit length anywhere on the axis."""
    length = hi - lo
    periods = freq_max * length
    order = spec.order
    if spec.nodes is not None:
        need = int(math.ceil(spec.guard * periods))
        if spec.nodes < need:
            raise ResolutionError(
                f"axis {label}: {periods:.1f} oscillation periods need at "
                f"least {need} nodes, got {spec.nodes}")
        panels = max(4, int(math.ceil(spec.nodes / order)))
    else:
        panels = max(4, int(math.ceil(periods / spec.panel_periods)))
    if panels * order > MAX_AXIS_NODES:
        raise ResolutionError(
            f"axis {label}: {panels * order} nodes exceed the "
            f"{MAX_AXIS_NODES} cap; reduce the support or increase mu")
    return _composite_panels(lo, hi, panels, order)


# ---------------------------------------------------------------------------
# amplitude structure analysis


@dataclass(frozen=True)
class _SubTerm:
    """One monomial slice of a term, split into phase-space and parameter
    factors."""

    pexps: tuple[int, ...]
    pdiag: tuple[Fraction, ...]
    pbumps: tuple
    xamp: AmplitudeExpr          # coefficient, X-monomial, X-gaussian, X-bumps
    pair_b: tuple[Fraction, ...] | None   # set when the p-gaussian is pair-equal


def _split_terms(a: AmplitudeExpr) -> list[_SubTerm] | None:
    """Decompose into separable sub-terms; None when quadratic cross terms
    couple the phase-space block to itself or to the parameters."""
    np_ = 2 * a.complex_dim
    r = a.torus_rank
    out = []
    for t in a.terms:
        for i in range(a.dim):
            for j in range(a.dim):
                if i != j and t.quad[i][j] != 0 and (i < np_ or j < np_):
                    return None
        pdiag = tuple(t.quad[i][i] for i in range(np_))
        xquad = tuple(tuple(t.quad[np_ + i][np_ + j] for j in range(r))
                      for i in range(r))
        pbumps = tuple(b for b in t.bumps if b.block == "p")
        xbumps = tuple(b for b in t.bumps if b.block == "X")
        pair_b = None
        if all(pdiag[2 * j] == pdiag[2 * j + 1] for j in range(a.complex_dim)):
            pair_b = tuple(pdiag[2 * j] for j in range(a.complex_dim))
        for exps, c in t.poly.terms.items():
            xpoly = Poly(r, {tuple(exps[np_:]): c})
            xterm = Term(xpoly, xquad, xbumps)
            out.append(_SubTerm(tuple(exps[:np_]), pdiag, pbumps,
                                AmplitudeExpr(0, r, (xterm,)), pair_b))
    return out


def _capabilities(subs: list[_SubTerm] | None) -> set[str]:
    caps = {"grid"}
    if subs is not None:
        if all(not s.pbumps for s in subs):
            caps.add("separable")
        if all(s.pair_b is not None and not any(s.pexps) for s in subs):
            caps.add("radial")
    return caps


def _pair_s_bound(sub: _SubTerm, model: LinearHamiltonianModel,
                  box: SupportBox, cutoff: float) -> list[float]:
    """Per-pair bound on |z_j|^2 over the support of one sub-term."""
    n = model.complex_dim
    T = -math.log(cutoff)
    caps = [math.inf] * n
    for b in sub.pbumps:
        if not b.rising:
            for j in range(n):
                caps[j] = min(caps[j], float(b.rout2))
    out = []
    for j in range(n):
        if sub.pair_b is not None and sub.pair_b[j] > 0:
            s = min(T / float(sub.pair_b[j]), caps[j])
        elif math.isfinite(caps[j]):
            s = caps[j]
        else:
            s = box.halfwidths[2 * j] ** 2 + box.halfwidths[2 * j + 1] ** 2
        out.append(s)
    return out


def _momentum_bound(model: LinearHamiltonianModel, s_bounds) -> np.ndarray:
    """Component-wise max of |J_k| over {0 <= s <= s_bounds}; the positive
    and negative weight parts cannot cancel, so take the larger."""
    w = model.weight_array.astype(float)
    s = np.asarray(s_bounds, dtype=float)
    pos = 0.5 * np.sum(np.where(w > 0, w, 0.0) * s[:, None], axis=0)
    neg = 0.5 * np.sum(np.where(w < 0, -w, 0.0) * s[:, None], axis=0)
    return np.maximum(pos, neg)


def _x_axes(model: LinearHamiltonianModel, box: SupportBox, jmax, eta,
            mu: float, spec: QuadratureSpec):
    n, r = model.complex_dim, model.torus_rank
    axes = []
    for k in range(r):
        L = box.halfwidths[2 * n + k]
        if not math.isfinite(L) or L <= 0:
            raise DomainError(f"parameter axis X{k + 1} has no support bound")
        freq = (jmax[k] + abs(eta[k])) / (2.0 * math.pi * mu)
        axes.append(_axis_rule(-L, L, freq, spec, f"X{k + 1}"))
    return axes


def _tensor_grid(axes):
    """Tensor product of 1-D rules: points (N, d) and combined weights (N,)."""
    mesh = np.meshgrid(*[nd for nd, _ in axes], indexing="ij")
    pts = np.stack([m.ravel() for m in mesh], axis=-1)
    wts = axes[0][1]
    for _, w in axes[1:]:
        wts = np.multiply.outer(wts, w)
    return pts, np.asarray(wts).ravel()


# ---------------------------------------------------------------------------
# brute-force quadrature


def brute_force_I(model: LinearHamiltonianModel, a: AmplitudeExpr, mu: float,
                  spec: QuadratureSpec | None = None, eta=None,
                  mode: str | None = None) -> complex:
    """Direct quadrature of I(mu).

    Strategies: ``radial`` integrates each z_j line in polar form (pi ds per
    pair) with radial cutoffs folded through a lookup-table kernel;
    ``separable`` factorizes the phase-space integral axis by axis;
    ``grid`` is the full tensor fallback.  The cheapest applicable strategy
    is chosen unless ``mode`` forces one."""
    if spec is None:
        spec = DEFAULT_SPEC
    if (a.complex_dim, a.torus_rank) != (model.complex_dim, model.torus_rank):
        raise PreconditionError("amplitude and model dimensions do not match")
    if mu <= 0:
        raise PreconditionError("mu must be positive")
    eta = np.zeros(model.torus_rank) if eta is None else \
        np.asarray(eta, dtype=float).reshape(model.torus_rank)
    box = support_box(a, spec.cutoff)
    subs = _split_terms(a)
    caps = _capabilities(subs)
    if mode is None:
        mode = "radial" if "radial" in caps else \
            "separable" if "separable" in caps else "grid"
    elif mode not in ("radial", "separable", "grid"):
        raise PreconditionError(f"unknown quadrature mode {mode!r}")
    elif mode not in caps:
        raise CapabilityError(
            f"amplitude structure does not admit the {mode!r} strategy")
    if mode == "radial":
        return _integrate_radial(model, subs, box, spec, mu, eta)
    if mode == "separable":
        return _integrate_separable(model, subs, box, spec, mu, eta)
    return _integrate_grid(model, a, box, spec, mu, eta)


def _x_part_values(sub: _SubTerm, xpts, xwts, mu: float, eta) -> np.ndarray:
    vals = np.asarray(sub.xamp.evaluate(xpts), dtype=complex)
    return vals * np.exp(-1j * (xpts @ eta) / mu) * xwts


def _bump_table(sub: _SubTerm, t2max: float, size: int = 4097):
    t2 = np.linspace(0.0, t2max, size)
    table = np.ones(size)
    for b in sub.pbumps:
        rin2, rout2 = float(b.rin2), float(b.rout2)
        u = (2.0 * t2 - rin2 - rout2) / (rout2 - rin2)
        v = profile_value(u, b.order, b.beta)
        table *= (1.0 - v) if b.rising else v
    return t2, table


def _s_rules(model: LinearHamiltonianModel, s_bounds, box_L, mu: float,
             spec: QuadratureSpec):
    w = model.weight_array.astype(float)
    rules = []
    for j in range(model.complex_dim):
        a_max = float(np.sum(np.abs(w[j]) * box_L))
        freq = a_max / (4.0 * math.pi * mu)
        rules.append(_axis_rule(0.0, float(s_bounds[j]), freq, spec,
                                f"s{j + 1}"))
    return rules


def _integrate_radial(model, subs, box, spec, mu, eta) -> complex:
    n, r = model.complex_dim, model.torus_rank
    s_all = np.max([_pair_s_bound(s, model, box, spec.cutoff) for s in subs],
                   axis=0)
    jmax = _momentum_bound(model, s_all)
    xpts, xwts = _tensor_grid(_x_axes(model, box, jmax, eta, mu, spec))
    w = model.weight_array.astype(float)
    box_L = np.array([box.halfwidths[2 * n + k] for k in range(r)])
    total = 0j
    for sub in subs:
        sb = _pair_s_bound(sub, model, box, spec.cutoff)
        rules = _s_rules(model, sb, box_L, mu, spec)
        xvals = _x_part_values(sub, xpts, xwts, mu, eta)
        avals = xpts @ w.T                      # (NX, n) pairings <w_j, X>
        base = [wt * np.exp(-float(sub.pair_b[j]) * nd)
                for j, (nd, wt) in enumerate(rules)]
        if sub.pbumps:
            t2g, table = _bump_table(sub, float(np.sum(sb)))
            dt = float(t2g[1] - t2g[0])
            offs = np.zeros(n + 1, dtype=np.int64)
            for j in range(n):
                offs[j + 1] = offs[j] + rules[j][0].size
            s_flat = np.concatenate([nd for nd, _ in rules])
            acc = np.empty(xpts.shape[0], dtype=complex)
            for ix in range(xpts.shape[0]):
                pw = np.concatenate([
                    base[j] * np.exp((-1j * avals[ix, j] / (2.0 * mu))
                                     * rules[j][0])
                    for j in range(n)])
                acc[ix] = radial_phase_sum(s_flat, pw, offs, table, 0.0, dt)
            total += math.pi ** n * np.sum(xvals * acc)
        else:
            prod = np.empty(xpts.shape[0], dtype=complex)
            widest = max(nd.size for nd, _ in rules)
            chunk = max(1, (1 << 22) // widest)
            for start in range(0, xpts.shape[0], chunk):
                sl = slice(start, min(start + chunk, xpts.shape[0]))
                block = np.ones(sl.stop - sl.start, dtype=complex)
                for j in range(n):
                    nd = rules[j][0]
                    ph = np.exp(np.outer(avals[sl, j], nd)
                                * (-1j / (2.0 * mu)))
                    block *= ph @ base[j]
                prod[sl] = block
            total += math.pi ** n * np.sum(xvals * prod)
    return complex(total)


def _integrate_separable(model, subs, box, spec, mu, eta) -> complex:
    n, r = model.complex_dim, model.torus_rank
    s_all = np.max([_pair_s_bound(s, model, box, spec.cutoff) for s in subs],
                   axis=0)
    jmax = _momentum_bound(model, s_all)
    xpts, xwts = _tensor_grid(_x_axes(model, box, jmax, eta, mu, spec))
    w = model.weight_array.astype(float)
    box_L = np.array([box.halfwidths[2 * n + k] for k in range(r)])
    rules = []
    for i in range(2 * n):
        a_max = float(np.sum(np.abs(w[i // 2]) * box_L))
        R = box.halfwidths[i]
        freq = a_max * R / (2.0 * math.pi * mu)     # chirp edge frequency
        rules.append(_axis_rule(-R, R, freq, spec, f"p{i + 1}"))
    total = 0j
    widest = max(nd.size for nd, _ in rules)
    chunk = max(1, (1 << 22) // widest)
    for sub in subs:
        xvals = _x_part_values(sub, xpts, xwts, mu, eta)
        avals = xpts @ w.T
        vecs = [wt * nd ** sub.pexps[i]
                * np.exp(-float(sub.pdiag[i]) * nd * nd)
                for i, (nd, wt) in enumerate(rules)]
        prod = np.empty(xpts.shape[0], dtype=complex)
        for start in range(0, xpts.shape[0], chunk):
            sl = slice(start, min(start + chunk, xpts.shape[0]))
            block = np.ones(sl.stop - sl.start, dtype=complex)
            for i in range(2 * n):
                nd = rules[i][0]
                ph = np.exp(np.outer(avals[sl, i // 2], nd * nd)
                            * (-1j / (2.0 * mu)))
                block *= ph @ vecs[i]
            prod[sl] = block
        total += np.sum(xvals * prod)
    return complex(total)


def _integrate_grid(model, a, box, spec, mu, eta) -> complex:
    n, r = model.complex_dim, model.torus_rank
    w = model.weight_array.astype(float)
    s_bounds = np.array([box.halfwidths[2 * j] ** 2
                         + box.halfwidths[2 * j + 1] ** 2 for j in range(n)])
    jmax = _momentum_bound(model, s_bounds)
    box_L = np.array([box.halfwidths[2 * n + k] for k in range(r)])
    axes = []
    for i in range(2 * n):
        a_max = float(np.sum(np.abs(w[i // 2]) * box_L))
        R = box.halfwidths[i]
        freq = a_max * R / (2.0 * math.pi * mu)
        axes.append(_axis_rule(-R, R, freq, spec, f"p{i + 1}"))
    axes.extend(_x_axes(model, box, jmax, eta, mu, spec))
    counts = [nd.size for nd, _ in axes]
    total_pts = math.prod(counts)
    if total_pts > MAX_GRID_POINTS:
        raise ResolutionError(
            f"full tensor grid needs {total_pts} points (cap "
            f"{MAX_GRID_POINTS}); use a separable or radial amplitude")
    node_arrs = [nd for nd, _ in axes]
    wt_arrs = [wt for _, wt in axes]
    acc = 0j
    chunk = 1 << 18
    for start in range(0, total_pts, chunk):
        idx_flat = np.arange(start, min(start + chunk, total_pts))
        idx = np.array(np.unravel_index(idx_flat, counts)).T
        pts = np.empty((idx_flat.size, 2 * n + r))
        wts = np.ones(idx_flat.size)
        for d in range(2 * n + r):
            pts[:, d] = node_arrs[d][idx[:, d]]
            wts *= wt_arrs[d][idx[:, d]]
        s = pts[:, 0:2 * n:2] ** 2 + pts[:, 1:2 * n:2] ** 2
        J = -0.5 * (s @ w)
        phase = np.exp(1j * np.sum((J - eta) * pts[:, 2 * n:], axis=1) / mu)
        acc += np.sum(wts * np.asarray(a.evaluate(pts), dtype=complex) * phase)
    return complex(acc)


# ---------------------------------------------------------------------------
# exact Gaussian route


def _octave_panels(umax: float, width_cap: float) -> list[tuple[float, float]]:
    """[0,1], [1,2], [2,4], ... up to umax, each split to the width cap."""
    top = max(umax, 1e-6)
    edges = [0.0, min(1.0, top)]
    while edges[-1] < top:
        edges.append(min(2.0 * edges[-1], top))
    out = []
    for lo, hi in zip(edges[:-1], edges[1:]):
        k = max(1, int(math.ceil((hi - lo) / width_cap)))
        for i in range(k):
            out.append((lo + (hi - lo) * i / k, lo + (hi - lo) * (i + 1) / k))
    return out


def _adaptive_panel(f, lo: float, hi: float, tol: float, depth: int = 0):
    x8, w8 = _gl(8)
    x16, w16 = _gl(16)
    half, mid = 0.5 * (hi - lo), 0.5 * (hi + lo)
    coarse = half * (w8 @ f(half * x8 + mid))
    fine = half * (w16 @ f(half * x16 + mid))
    if abs(fine - coarse) <= tol or depth >= 24:
        return fine
    m = 0.5 * (lo + hi)
    return (_adaptive_panel(f, lo, m, 0.5 * tol, depth + 1)
            + _adaptive_panel(f, m, hi, 0.5 * tol, depth + 1))


def gaussian_exact_I(model: LinearHamiltonianModel, a: AmplitudeExpr, mu: float,
                     spec: QuadratureSpec | None = None, eta=None) -> complex:
    """I(mu) with the phase-space Gaussian integrated in closed form,

        int_C exp(-b |z|^2) exp(-i c |z|^2 / (2 mu)) dz
            = pi / (b + i c / (2 mu)),

    leaving the parameter integral.  That integral is evaluated after the
    substitution X = 2 mu u on mirrored octave panels with adaptive
    refinement, so the cost is uniform in mu."""
    if spec is None:
        spec = DEFAULT_SPEC
    if (a.complex_dim, a.torus_rank) != (model.complex_dim, model.torus_rank):
        raise PreconditionError("amplitude and model dimensions do not match")
    if mu <= 0:
        raise PreconditionError("mu must be positive")
    r = model.torus_rank
    if r > 2:
        raise CapabilityError(
            "closed-form phase-space reduction is implemented for up to two "
            "parameter directions")
    eta = np.zeros(r) if eta is None else \
        np.asarray(eta, dtype=float).reshape(r)
    subs = _split_terms(a)
    if subs is None:
        raise CapabilityError(
            "amplitude couples phase-space axes; no closed-form reduction")
    for s in subs:
        if any(s.pexps) or s.pbumps or s.pair_b is None:
            raise CapabilityError(
                "closed-form reduction needs a pure pair-diagonal Gaussian "
                "in the phase-space block")
        if any(b <= 0 for b in s.pair_b):
            raise CapabilityError(
                "phase-space Gaussian must be damped in every pair")
    box = support_box(a, spec.cutoff)
    n = model.complex_dim
    w = model.weight_array.astype(float)
    umax = max(box.halfwidths[2 * n + k] for k in range(r)) / (2.0 * mu)
    eta_rate = float(np.max(np.abs(eta))) if r else 0.0
    width_cap = min(2.5 * math.pi / max(2.0 * eta_rate, 1e-30), 64.0)
    total = 0j
    for sub in subs:
        bs = np.array([float(b) for b in sub.pair_b])
        if r == 1:
            def f(u, _sub=sub, _bs=bs):
                vals = np.asarray(
                    _sub.xamp.evaluate((2.0 * mu * u)[:, None]),
                    dtype=complex)
                vals = vals * np.exp(-2j * eta[0] * u)
                for j in range(n):
                    vals = vals * (math.pi / (_bs[j] + 1j * w[j, 0] * u))
                return vals

            val = 0j
            for lo, hi in _octave_panels(umax, width_cap):
                val += _adaptive_panel(f, lo, hi, spec.adaptive_tol)
                val += _adaptive_panel(lambda u, _f=f: _f(-u), lo, hi,
                                       spec.adaptive_tol)
            total += (2.0 * mu) * val
        else:
            def f2(u1, u2, _sub=sub, _bs=bs):
                grid = np.stack(np.broadcast_arrays(u1, u2), axis=-1)
                flat = grid.reshape(-1, 2)
                vals = np.asarray(_sub.xamp.evaluate(2.0 * mu * flat),
                                  dtype=complex)
                vals = vals * np.exp(-2j * (flat @ eta))
                au = flat @ w.T
                for j in range(n):
                    vals = vals * (math.pi / (_bs[j] + 1j * au[:, j]))
                return vals.reshape(grid.shape[:-1])

            panels = _octave_panels(umax, width_cap)
            signed = panels + [(-hi, -lo) for lo, hi in panels]
            x24, w24 = _gl(24)
            val = 0j
            for lo1, hi1 in signed:
                h1, m1 = 0.5 * (hi1 - lo1), 0.5 * (hi1 + lo1)
                u1 = h1 * x24 + m1
                for lo2, hi2 in signed:
                    h2, m2 = 0.5 * (hi2 - lo2), 0.5 * (hi2 + lo2)
                    u2 = h2 * x24 + m2
                    vals = f2(u1[:, None], u2[None, :])
                    val += h1 * h2 * (w24 @ vals @ w24)
            total += (2.0 * mu) ** 2 * val
    return complex(total)


# ---------------------------------------------------------------------------
# stationary phase at the model pairing phase


@dataclass(frozen=True)
class ExpansionResult:
    """Stationary-phase data: pairing derivatives D_k, partial sums through
    order K at each nu, and a sup-norm remainder bound."""

    pairs: int
    order: int
    derivatives: tuple[complex, ...]
    nus: tuple[float, ...]
    partial_sums: tuple[complex, ...]
    remainder_bounds: tuple[float, ...]


def inner_sp_expansion(a: AmplitudeExpr, order: int, nus) -> ExpansionResult:
    """Stationary-phase expansion of int a exp(i <B, xi> / nu) dB dxi:

        I(nu) ~ (2 pi nu)^m sum_{k<=K} (i nu)^k / k! D_k,
        D_k = (sum_i d/dB_i d/dxi_i)^k a  at the origin,

    with partial sums inclusive of k = K and the remainder bounded by
    2 (2 pi nu)^m nu^K times the sum of derivative sups through total
    order 2K + m + 1."""
    if a.torus_rank != 0:
        raise PreconditionError(
            "the pairing expansion acts on pair coordinates only")
    if not 0 <= order <= SP_ORDER_CAP:
        raise PreconditionError(f"expansion order must be in 0..{SP_ORDER_CAP}")
    m = a.complex_dim
    nus = tuple(float(v) for v in np.atleast_1d(nus))
    if any(v <= 0 for v in nus):
        raise PreconditionError("nu values must be positive")

    origin = np.zeros(a.dim)
    derivs = [complex(mixed_pairing_derivative(a, k).evaluate(origin))
              for k in range(order + 1)]
    sums = [(2.0 * math.pi * nu) ** m
            * sum((1j * nu) ** k / math.factorial(k) * derivs[k]
                  for k in range(order + 1))
            for nu in nus]

    # derivative sups memoized over the multi-index lattice |alpha| <= 2K+m+1
    partials: dict[tuple[int, ...], AmplitudeExpr] = {(0,) * a.dim: a}
    sup_total = sup_abs(a)
    frontier = [(0,) * a.dim]
    for _ in range(2 * order + m + 1):
        new = []
        for alpha in frontier:
            for i in range(a.dim):
                beta = alpha[:i] + (alpha[i] + 1,) + alpha[i + 1:]
                if beta in partials:
                    continue
                partials[beta] = partials[alpha].differentiate(i)
                sup_total += sup_abs(partials[beta])
                new.append(beta)
        frontier = new
    bounds = tuple(2.0 * (2.0 * math.pi * nu) ** m * nu ** order * sup_total
                   for nu in nus)
    return ExpansionResult(m, order, tuple(derivs), nus, tuple(sums), bounds)


# ---------------------------------------------------------------------------
# decay-order recovery


@dataclass(frozen=True)
class FitResult:
    """Power-law fit r(mu) ~ C mu^alpha log(1/mu)^beta."""

    alpha: float
    beta: float
    log_coeff: float
    with_log: bool
    max_log_misfit: float

    @property
    def coeff(self) -> float:
        return math.exp(self.log_coeff)


def fit_order(mus, values, with_log: bool = False) -> FitResult:
    """Least-squares recovery of the decay exponent, and optionally a log
    power, from strictly positive samples of a vanishing quantity."""
    mus = np.asarray(mus, dtype=float)
    values = np.asarray(values, dtype=float)
    if mus.size != values.size or mus.size < 4:
        raise DataError("order fit needs at least 4 matched samples")
    if np.any(values <= 0):
        raise DataError("order fit needs strictly positive values")
    if np.any(mus <= 0) or (with_log and np.any(mus >= 1)):
        raise DataError("mu samples must lie in (0, 1) for a log fit")
    logv = np.log(values)
    cols = [np.log(mus), np.ones_like(mus)]
    if with_log:
        cols.insert(1, np.log(np.log(1.0 / mus)))
    A = np.stack(cols, axis=1)
    coef, *_ = np.linalg.lstsq(A, logv, rcond=None)
    misfit = float(np.max(np.abs(A @ coef - logv)))
    if with_log:
        alpha, beta, logc = coef
    else:
        (alpha, logc), beta = coef, 0.0
    return FitResult(float(alpha), float(beta), float(logc),
                            with_log, misfit)
