"""Scenario runner tying the library together behind one command.

A scenario is a plain-text config of ``key = value`` lines describing a
model, an amplitude, a mu grid, and one task.  Running it produces a
fixed set of artifacts in the output directory:

* ``result.csv``   task data rows under a ``# equiloc-schema v1`` header
* ``measure.txt``  exact pushforward table (measure-producing tasks)
* ``tree.txt``     resolution tree dump (``desing``)
* ``*.svg``        diagnostic plots
* ``manifest.txt`` config hash, backend, file digests, check outcomes

Identical configs give byte-identical data files; the manifest records
everything needed to reproduce a run.  The process exits 0 only if every
in-scenario consistency check passed, 1 on a failed check, 2 on bad
input.
"""

from __future__ import annotations

import argparse
import hashlib
import math
import re
import sys
from dataclasses import dataclass, field
from datetime import datetime, timezone
from fractions import Fraction
from importlib import metadata
from pathlib import Path

import numpy as np

from ._exact import Poly, QQi, frac_str
from ._kernels import backend
from .amplitudes import AmplitudeExpr, parse_amplitude
from .desing import DyadicPartition, desingularize, dyadic_weights, format_tree
from .errors import CapabilityError, DataError, EquilocError, PreconditionError
from .models import LinearHamiltonianModel, SphereModel
from .oscillatory import (DEFAULT_SPEC, QuadratureSpec, brute_force_I,
                          gaussian_exact_I)
from .oscillatory import fit_order as _log_log_fit
from .residues import (ConeLambda, ExpPiece, FixedPointDatum,
                       PiecewisePolyMeasure, dh_measure, jk_residue,
                       residue_formula_check, sphere_fixed_points, su2_group,
                       torus_group, weyl_lie_algebra_integral)

_MEASURE_MAGIC = "# equiloc-measure v1"
_SCHEMA_MAGIC = "# equiloc-schema v1"
_MANIFEST_MAGIC = "# equiloc-manifest v1"

_TASKS = ("check", "desing", "dh", "oscint", "residue", "weyl")

_COMMON_KEYS = {"task", "out", "seed", "quad.nodes", "quad.rule",
                "quad.guard", "quad.adaptive_tol"}
_MODEL_KEYS = {"model.kind", "model.weights", "model.grid"}
_TASK_KEYS = {
    "oscint": _MODEL_KEYS | {"amplitude", "mu", "eta"},
    "desing": _MODEL_KEYS | {"amplitude", "mu", "depth_cap"},
    "residue": _MODEL_KEYS | {"rates", "eta", "cone", "flag"},
    "dh": _MODEL_KEYS | {"rates", "cone", "flag"},
    "weyl": {"group", "group.rank"},
    "check": {"model.kind", "model.weights", "rates", "scale", "eta", "cone"},
}
_FP_KEY = re.compile(r"fp\[(\d+)\]\.(J|weights|dim)\Z")
_INT_RE = re.compile(r"[+-]?\d+\Z")
_FRACTION_RE = re.compile(r"[+-]?\d+/\d+\Z")
_NAME_RE = re.compile(r"[A-Za-z_][A-Za-z0-9_]*\Z")


# --------------------------------------------------------------------------
# config parsing


def _parse_scalar(tok: str, lineno: int):
    tok = tok.strip()
    if _FRACTION_RE.match(tok):
        return Fraction(tok)
    if _INT_RE.match(tok):
        return int(tok)
    try:
        return float(tok)
    except ValueError:
        pass
    if _NAME_RE.match(tok):
        return tok
    raise DataError(f"line {lineno}: cannot parse value {tok!r}")


def _parse_value(text: str, lineno: int):
    """One config value: scalar, or bracketed list with arbitrary nesting."""
    text = text.strip()
    if not text.startswith("["):
        return _parse_scalar(text, lineno)
    if not text.endswith("]"):
        raise DataError(f"line {lineno}: unterminated list")
    body = text[1:-1]
    items: list[str] = []
    depth, start = 0, 0
    for pos, ch in enumerate(body):
        if ch == "[":
            depth += 1
        elif ch == "]":
            depth -= 1
            if depth < 0:
                raise DataError(f"line {lineno}: unbalanced brackets")
        elif ch == "," and depth == 0:
            items.append(body[start:pos])
            start = pos + 1
    if depth:
        raise DataError(f"line {lineno}: unbalanced brackets")
    tail = body[start:]
    if items or tail.strip():
        items.append(tail)
    return tuple(_parse_value(item, lineno) for item in items)


def _exact_number(value, lineno: int, what: str) -> Fraction:
    if isinstance(value, bool) or not isinstance(value, (int, Fraction)):
        raise DataError(
            f"line {lineno}: {what} must be exact (an integer or p/q)")
    return Fraction(value)


def _covector_value(value, lineno: int, rank: int, what: str):
    items = value if isinstance(value, tuple) else (value,)
    if len(items) == 1 and isinstance(items[0], tuple):
        items = items[0]
    if len(items) != rank or any(isinstance(x, tuple) for x in items):
        raise DataError(f"line {lineno}: {what} must have {rank} components")
    return tuple(_exact_number(x, lineno, what) for x in items)


def _direction_list(value, lineno: int, rank: int):
    items = value if isinstance(value, tuple) else (value,)
    if not items:
        raise DataError(f"line {lineno}: need at least one direction")
    out = []
    for item in items:
        cov = item if isinstance(item, tuple) else (item,)
        if len(cov) != rank or any(isinstance(x, tuple) for x in cov):
            raise DataError(
                f"line {lineno}: each direction must have {rank} components"
                + ("; nest them like [[1, 2]]" if rank > 1 else ""))
        out.append(tuple(_exact_number(x, lineno, "directions") for x in cov))
    return tuple(out)


def _weight_rows(value, lineno: int):
    if not isinstance(value, tuple) or not value or \
            not all(isinstance(r, tuple) for r in value):
        raise DataError(
            f"line {lineno}: model.weights must be a list of per-pair "
            "weight rows, like [[1], [-1]]")
    rows = []
    for row in value:
        if not row or not all(isinstance(x, int) and not isinstance(x, bool)
                              for x in row):
            raise DataError(
                f"line {lineno}: weight entries must be integers")
        rows.append(tuple(row))
    if len({len(r) for r in rows}) != 1:
        raise DataError(f"line {lineno}: weight rows differ in length")
    return tuple(rows)


@dataclass(frozen=True)
class ScenarioConfig:
    """Fully validated scenario: the task plus everything it consumes."""

    task: str
    out: str | None
    seed: int
    spec: QuadratureSpec
    model: LinearHamiltonianModel | SphereModel | None
    amplitude: AmplitudeExpr | None
    amplitude_text: str | None
    mus: tuple[float, ...]
    etas: tuple[tuple[Fraction, ...], ...]
    rates: tuple[Fraction, ...] | None
    cone: ConeLambda | None
    flag: tuple[int, int] | None
    scale: Fraction
    depth_cap: int
    group_kind: str | None
    group_rank: int
    fixed_points: tuple[FixedPointDatum, ...]
    hash_text: str


def load_config(path, task: str | None = None, out: str | None = None,
                mus=None) -> ScenarioConfig:
    """Parse and validate one scenario file.

    The format is line-oriented ``key = value``; ``#`` starts a comment,
    lists use brackets, and rationals are written ``p/q``.  Keys are
    checked against the task so a typo fails loudly with its line number.
    ``task``, ``out``, and ``mus`` override the corresponding file keys.
    """
    text = Path(path).read_text(encoding="utf-8")
    entries: dict[str, tuple[str, int]] = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        stripped = raw.split("#", 1)[0].strip()
        if not stripped:
            continue
        key, sep, value = stripped.partition("=")
        key, value = key.strip(), value.strip()
        if not sep or not key:
            raise DataError(f"line {lineno}: expected 'key = value'")
        if not value:
            raise DataError(f"line {lineno}: empty value for {key!r}")
        if key in entries:
            raise DataError(f"line {lineno}: duplicate key {key!r} "
                            f"(first set on line {entries[key][1]})")
        entries[key] = (value, lineno)

    file_task = entries.get("task")
    if file_task is not None and file_task[0] not in _TASKS:
        raise DataError(
            f"line {file_task[1]}: unknown task {file_task[0]!r}")
    if task is not None and task not in _TASKS:
        raise DataError(f"unknown task {task!r}")
    if task is not None and file_task is not None and task != file_task[0]:
        raise DataError(
            f"line {file_task[1]}: config is for task {file_task[0]!r}, "
            f"not {task!r}")
    final_task = task or (file_task[0] if file_task else None)
    if final_task is None:
        raise DataError("no task given in the config or on the command line")

    allowed = _COMMON_KEYS | _TASK_KEYS[final_task]
    fp_allowed = final_task in ("dh", "residue")
    for key, (_, lineno) in entries.items():
        if key in allowed or (fp_allowed and _FP_KEY.match(key)):
            continue
        raise DataError(f"line {lineno}: key {key!r} does not apply to "
                        f"task {final_task!r}")

    def parsed(key: str):
        ent = entries.get(key)
        if ent is None:
            return None
        return _parse_value(ent[0], ent[1]), ent[1]

    def need(key: str):
        ent = parsed(key)
        if ent is None:
            raise DataError(f"task {final_task!r} needs the key {key!r}")
        return ent

    qkw: dict = {}
    if (ent := parsed("quad.nodes")) is not None:
        v, ln = ent
        if isinstance(v, bool) or not isinstance(v, int):
            raise DataError(f"line {ln}: quad.nodes must be an integer")
        qkw["nodes"] = v
    if (ent := parsed("quad.rule")) is not None:
        v, ln = ent
        if not isinstance(v, str):
            raise DataError(f"line {ln}: quad.rule must be a name like gl16")
        qkw["rule"] = v
    for key, attr in (("quad.guard", "guard"),
                      ("quad.adaptive_tol", "adaptive_tol")):
        if (ent := parsed(key)) is not None:
            v, ln = ent
            if isinstance(v, (bool, str, tuple)):
                raise DataError(f"line {ln}: {key} must be a number")
            qkw[attr] = float(v)
    spec = QuadratureSpec(**qkw) if qkw else DEFAULT_SPEC
    try:
        spec.order
    except DataError as exc:
        raise DataError(f"quadrature spec: {exc}") from exc

    seed = 0
    if (ent := parsed("seed")) is not None:
        v, ln = ent
        if isinstance(v, bool) or not isinstance(v, int) or v < 0:
            raise DataError(f"line {ln}: seed must be a nonnegative integer")
        seed = v

    depth_cap = 8
    if (ent := parsed("depth_cap")) is not None:
        v, ln = ent
        if isinstance(v, bool) or not isinstance(v, int) or v < 1:
            raise DataError(f"line {ln}: depth_cap must be a positive integer")
        depth_cap = v

    scale = Fraction(1)
    if (ent := parsed("scale")) is not None:
        v, ln = ent
        scale = _exact_number(v, ln, "scale")

    model: LinearHamiltonianModel | SphereModel | None = None
    rank: int | None = None
    if (kent := parsed("model.kind")) is not None:
        kind, kln = kent
        if kind == "torus_linear":
            if "model.grid" in entries:
                raise DataError(
                    f"line {entries['model.grid'][1]}: model.grid applies "
                    "to the sphere model only")
            wv, wln = need("model.weights")
            rows = _weight_rows(wv, wln)
            try:
                model = LinearHamiltonianModel(len(rows), len(rows[0]), rows)
            except PreconditionError as exc:
                raise DataError(f"line {wln}: {exc}") from exc
            rank = model.torus_rank
        elif kind == "sphere":
            if "model.weights" in entries:
                raise DataError(
                    f"line {entries['model.weights'][1]}: model.weights "
                    "applies to the linear model only")
            grid = 200
            if (gent := parsed("model.grid")) is not None:
                gv, gln = gent
                if isinstance(gv, bool) or not isinstance(gv, int) or gv < 8:
                    raise DataError(
                        f"line {gln}: model.grid must be an integer >= 8")
                grid = gv
            model = SphereModel(grid=grid)
            rank = 1
        else:
            raise DataError(f"line {kln}: unknown model.kind {kind!r} "
                            "(torus_linear or sphere)")

    fixed_points: tuple[FixedPointDatum, ...] = ()
    fp_entries: dict[int, dict[str, tuple]] = {}
    for key, (rawv, ln) in entries.items():
        m = _FP_KEY.match(key)
        if m:
            fp_entries.setdefault(int(m.group(1)), {})[m.group(2)] = (
                _parse_value(rawv, ln), ln)
    if fp_entries:
        first_ln = min(ln for rec in fp_entries.values()
                       for _, ln in rec.values())
        if model is not None:
            raise DataError(f"line {first_ln}: give either a model or "
                            "explicit fixed-point data, not both")
        indices = sorted(fp_entries)
        if indices != list(range(1, len(indices) + 1)):
            raise DataError("fixed-point indices must run 1..N without gaps")
        data = []
        for idx in indices:
            rec = fp_entries[idx]
            if "J" not in rec or "weights" not in rec:
                raise DataError(f"fixed point {idx} needs fp[{idx}].J "
                                f"and fp[{idx}].weights")
            jv, jln = rec["J"]
            jtup = jv if isinstance(jv, tuple) else (jv,)
            J = tuple(_exact_number(x, jln, f"fp[{idx}].J") for x in jtup)
            wv, wln = rec["weights"]
            wtup = wv if isinstance(wv, tuple) else (wv,)
            if wtup and not any(isinstance(r, tuple) for r in wtup):
                wtup = tuple((x,) for x in wtup)
            weights = tuple(
                tuple(_exact_number(x, wln, f"fp[{idx}].weights")
                      for x in (row if isinstance(row, tuple) else (row,)))
                for row in wtup)
            dim = 0
            if "dim" in rec:
                dv, dln = rec["dim"]
                if isinstance(dv, bool) or not isinstance(dv, int):
                    raise DataError(
                        f"line {dln}: fp[{idx}].dim must be an integer")
                dim = dv
            try:
                data.append(FixedPointDatum(f"fp{idx}", dim, J, weights))
            except (PreconditionError, DataError) as exc:
                raise DataError(f"fixed point {idx}: {exc}") from exc
        fixed_points = tuple(data)
        rank = len(fixed_points[0].J_at_F)

    if final_task in ("oscint", "desing", "check"):
        if not isinstance(model, LinearHamiltonianModel):
            raise DataError(
                f"task {final_task!r} needs model.kind = torus_linear")
    if final_task in ("dh", "residue") and model is None and not fixed_points:
        raise DataError(
            f"task {final_task!r} needs a model or fixed-point data")

    amplitude = None
    amplitude_text = None
    if final_task in ("oscint", "desing"):
        ent = entries.get("amplitude")
        if ent is None:
            raise DataError(f"task {final_task!r} needs an amplitude")
        amplitude_text, aln = ent
        try:
            amplitude = parse_amplitude(amplitude_text, model.complex_dim,
                                        model.torus_rank)
        except DataError as exc:
            raise DataError(f"line {aln}: amplitude: {exc}") from exc

    mu_tuple: tuple[float, ...] = ()
    if mus is not None:
        if final_task not in ("oscint", "desing"):
            raise DataError(
                f"a mu override does not apply to task {final_task!r}")
        mu_tuple = tuple(float(m) for m in mus)
        if not mu_tuple or any(not m > 0 for m in mu_tuple):
            raise DataError("overriding mu values must be positive")
    elif final_task in ("oscint", "desing"):
        mv, mln = need("mu")
        items = mv if isinstance(mv, tuple) else (mv,)
        vals = []
        for item in items:
            if isinstance(item, (bool, str, tuple)):
                raise DataError(f"line {mln}: mu entries must be numbers")
            fv = float(item)
            if not fv > 0:
                raise DataError(f"line {mln}: mu entries must be positive")
            vals.append(fv)
        if not vals:
            raise DataError(f"line {mln}: need at least one mu")
        mu_tuple = tuple(vals)

    rates = None
    if (ent := parsed("rates")) is not None:
        v, ln = ent
        items = v if isinstance(v, tuple) else (v,)
        rates = tuple(_exact_number(x, ln, "rates") for x in items)
    if final_task == "check" and rates is None:
        raise DataError("task 'check' needs regularization rates")

    cone = None
    if (ent := parsed("cone")) is not None:
        v, ln = ent
        items = v if isinstance(v, tuple) else (v,)
        rays = tuple(item if isinstance(item, tuple) else (item,)
                     for item in items)
        try:
            cone = ConeLambda(tuple(
                tuple(_exact_number(x, ln, "cone") for x in ray)
                for ray in rays))
        except (PreconditionError, CapabilityError) as exc:
            raise DataError(f"line {ln}: cone: {exc}") from exc

    flag = None
    if (ent := parsed("flag")) is not None:
        v, ln = ent
        if not (isinstance(v, tuple) and len(v) == 2
                and all(isinstance(x, int) and not isinstance(x, bool)
                        for x in v)):
            raise DataError(f"line {ln}: flag must be two axis indices, "
                            "like [1, 0]")
        flag = (v[0], v[1])

    etas: tuple[tuple[Fraction, ...], ...] = ()
    if final_task == "residue":
        v, ln = need("eta")
        etas = _direction_list(v, ln, rank or 1)
    elif final_task in ("oscint", "check"):
        if (ent := parsed("eta")) is not None:
            v, ln = ent
            etas = (_covector_value(v, ln, rank or 1, "eta"),)

    group_kind = None
    group_rank = 0
    if final_task == "weyl":
        gv, gln = need("group")
        if gv == "su2":
            if (rent := parsed("group.rank")) is not None and rent[0] != 1:
                raise DataError(f"line {rent[1]}: su2 has rank 1")
            group_kind, group_rank = "su2", 1
        elif gv == "torus":
            rv, rln = need("group.rank")
            if isinstance(rv, bool) or not isinstance(rv, int) \
                    or not 1 <= rv <= 2:
                raise DataError(f"line {rln}: torus rank must be 1 or 2")
            group_kind, group_rank = "torus", rv
        else:
            raise DataError(
                f"line {gln}: unknown group {gv!r} (su2 or torus)")

    effective = {k: v for k, (v, _) in entries.items() if k != "out"}
    effective["task"] = final_task
    if mus is not None:
        effective["mu"] = "[" + ", ".join(repr(m) for m in mu_tuple) + "]"
    hash_text = "\n".join(f"{k} = {effective[k]}" for k in sorted(effective))

    out_dir = out if out is not None else \
        (entries["out"][0] if "out" in entries else None)

    return ScenarioConfig(
        task=final_task, out=out_dir, seed=seed, spec=spec, model=model,
        amplitude=amplitude, amplitude_text=amplitude_text, mus=mu_tuple,
        etas=etas, rates=rates, cone=cone, flag=flag, scale=scale,
        depth_cap=depth_cap, group_kind=group_kind, group_rank=group_rank,
        fixed_points=fixed_points, hash_text=hash_text)


# --------------------------------------------------------------------------
# order fitting


def fit_order(table, with_log: bool = False):
    """Power-law order of a positive (mu, value) table.

    Fits ``c * mu**alpha`` (times ``log(1/mu)**beta`` when ``with_log``)
    in log space and returns ``(alpha, beta, c, r_squared)``.  A table of
    identical values is an exact flat fit; all-zero values short-circuit
    to ``(0.0, 0.0, 0.0, 1.0)`` since nothing remains to fit.
    """
    rows = [(float(m), float(v)) for m, v in table]
    mus = np.array([m for m, _ in rows], dtype=float)
    vals = np.array([v for _, v in rows], dtype=float)
    if len(rows) >= 1 and np.all(vals == 0.0):
        return 0.0, 0.0, 0.0, 1.0
    res = _log_log_fit(mus, vals, with_log=with_log)
    logs = np.log(vals)
    pred = res.log_coeff + res.alpha * np.log(mus)
    if res.with_log:
        pred = pred + res.beta * np.log(np.log(1.0 / mus))
    ss_res = float(np.sum((logs - pred) ** 2))
    ss_tot = float(np.sum((logs - np.mean(logs)) ** 2))
    # variance at the rounding floor of the logs means a flat table
    floor = len(rows) * (8.0 * np.finfo(float).eps
                         * (1.0 + float(np.max(np.abs(logs))))) ** 2
    r_squared = 1.0 if ss_tot <= floor else 1.0 - ss_res / ss_tot
    return res.alpha, res.beta, res.coeff, r_squared


# --------------------------------------------------------------------------
# exact measure serialization


def _fmt_qqi(c: QQi) -> str:
    return f"{frac_str(c.re)},{frac_str(c.im)}"


def _parse_qqi(tok: str, where: str) -> QQi:
    parts = tok.split(",")
    if len(parts) != 2:
        raise DataError(f"{where}: expected a re,im coefficient, got {tok!r}")
    try:
        return QQi(Fraction(parts[0]), Fraction(parts[1]))
    except (ValueError, ZeroDivisionError) as exc:
        raise DataError(f"{where}: {exc}") from exc


def _fmt_poly1(p: Poly) -> str:
    deg = max((e[0] for e in p.terms), default=0)
    return " ".join(_fmt_qqi(p.terms.get((k,), QQi(0)))
                    for k in range(deg + 1))


def _fmt_poly2(p: Poly) -> str:
    if not p.terms:
        return "0"
    return " ".join(f"{e[0]},{e[1]}:{_fmt_qqi(c)}"
                    for e, c in sorted(p.terms.items()))


def measure_to_text(measure: PiecewisePolyMeasure) -> str:
    """Exact line-oriented form; ``parse_measure_text`` inverts it."""
    lines = [_MEASURE_MAGIC,
             f"rank {measure.rank}",
             f"two_pi_power {measure.two_pi_power}"]
    if measure.rank == 1:
        lines.append(("breakpoints " + " ".join(
            frac_str(b) for b in measure.breakpoints)).rstrip())
        for idx, comps in enumerate(measure.pieces):
            for comp in comps:
                lines.append(f"piece {idx} rate {frac_str(comp.rate)} "
                             f"anchor {frac_str(comp.anchor)} "
                             f"coeffs {_fmt_poly1(comp.poly)}")
        for point, order, weight in measure.atoms:
            lines.append(
                f"atom {frac_str(point)} {order} {_fmt_qqi(weight)}")
    else:
        for box in measure.boxes:
            lines.append(
                "box corner {} sides {} rates {} anchors {} poly {}".format(
                    " ".join(frac_str(c) for c in box.corner),
                    " ".join(str(s) for s in box.sides),
                    " ".join(frac_str(r) for r in box.rates),
                    " ".join(frac_str(a) for a in box.anchors),
                    _fmt_poly2(box.poly)))
    return "\n".join(lines) + "\n"


def parse_measure_text(text: str) -> PiecewisePolyMeasure:
    """Rebuild a measure from ``measure_to_text`` output."""
    from .residues import Box

    lines = [ln.strip() for ln in text.splitlines() if ln.strip()]
    if not lines or lines[0] != _MEASURE_MAGIC:
        raise DataError("not a measure table (missing magic line)")
    rank = None
    power = None
    breaks = None
    pieces_map: dict[int, list[ExpPiece]] = {}
    atoms: list[tuple[Fraction, int, QQi]] = []
    boxes: list = []
    for lineno, line in enumerate(lines[1:], 2):
        toks = line.split()
        where = f"measure table line {lineno}"
        head = toks[0]
        try:
            if head == "rank":
                rank = int(toks[1])
            elif head == "two_pi_power":
                power = int(toks[1])
            elif head == "breakpoints":
                breaks = tuple(Fraction(t) for t in toks[1:])
            elif head == "piece":
                if toks[2] != "rate" or toks[4] != "anchor" \
                        or toks[6] != "coeffs":
                    raise DataError(f"{where}: malformed piece record")
                idx = int(toks[1])
                rate = Fraction(toks[3])
                anchor = Fraction(toks[5])
                coeffs = [_parse_qqi(t, where) for t in toks[7:]]
                poly = Poly(1, {(k,): c for k, c in enumerate(coeffs)})
                pieces_map.setdefault(idx, []).append(
                    ExpPiece(rate, anchor, poly))
            elif head == "atom":
                atoms.append((Fraction(toks[1]), int(toks[2]),
                              _parse_qqi(toks[3], where)))
            elif head == "box":
                if toks[1] != "corner" or toks[4] != "sides" \
                        or toks[7] != "rates" or toks[10] != "anchors" \
                        or toks[13] != "poly":
                    raise DataError(f"{where}: malformed box record")
                corner = (Fraction(toks[2]), Fraction(toks[3]))
                sides = (int(toks[5]), int(toks[6]))
                rates = (Fraction(toks[8]), Fraction(toks[9]))
                anchors = (Fraction(toks[11]), Fraction(toks[12]))
                terms: dict = {}
                if toks[14:] != ["0"]:
                    for tok in toks[14:]:
                        exps, _, coeff = tok.partition(":")
                        e1, _, e2 = exps.partition(",")
                        terms[(int(e1), int(e2))] = _parse_qqi(coeff, where)
                boxes.append(Box(corner, sides, rates, anchors,
                                 Poly(2, terms)))
            else:
                raise DataError(f"{where}: unknown record {head!r}")
        except (IndexError, ValueError, ZeroDivisionError) as exc:
            raise DataError(f"{where}: {exc}") from exc
    if rank not in (1, 2) or power is None:
        raise DataError("measure table is missing rank or two_pi_power")
    if rank == 2:
        if breaks is not None or pieces_map or atoms:
            raise DataError("rank-2 tables hold boxes only")
        return PiecewisePolyMeasure(rank=2, two_pi_power=power,
                                    boxes=tuple(boxes))
    if breaks is None:
        raise DataError("rank-1 tables need a breakpoints line")
    if boxes:
        raise DataError("rank-1 tables hold pieces, not boxes")
    n_intervals = len(breaks) + 1
    if any(not 0 <= idx < n_intervals for idx in pieces_map):
        raise DataError("piece index outside the breakpoint intervals")
    pieces = tuple(tuple(pieces_map.get(idx, ()))
                   for idx in range(n_intervals))
    return PiecewisePolyMeasure(
        rank=1, two_pi_power=power, breakpoints=breaks, pieces=pieces,
        atoms=tuple(atoms),
        has_delta_derivatives=any(order > 0 for _, order, _ in atoms))


# --------------------------------------------------------------------------
# result rows


def _fmt_cell(value) -> str:
    if isinstance(value, (bool, np.bool_)):
        return str(int(value))
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if isinstance(value, (float, np.floating)):
        return repr(float(value))
    return str(value)


def parse_result_csv(path):
    """Read a result table back as ``(header, rows)`` with typed cells."""
    lines = Path(path).read_text(encoding="utf-8").splitlines()
    if not lines or lines[0] != _SCHEMA_MAGIC:
        raise DataError(f"{path}: missing schema header")
    if len(lines) < 2:
        raise DataError(f"{path}: missing column row")
    header = tuple(lines[1].split(","))
    rows = []
    for line in lines[2:]:
        if not line:
            continue
        cells: list = []
        for tok in line.split(","):
            if _INT_RE.match(tok):
                cells.append(int(tok))
            else:
                try:
                    cells.append(float(tok))
                except ValueError:
                    cells.append(tok)
        rows.append(tuple(cells))
    return header, rows


def _csv_round_trips(path, header, rows) -> bool:
    try:
        back_header, back_rows = parse_result_csv(path)
    except (DataError, OSError):
        return False
    if back_header != tuple(header) or len(back_rows) != len(rows):
        return False
    for ours, theirs in zip(rows, back_rows):
        if len(ours) != len(theirs):
            return False
        for a, b in zip(ours, theirs):
            if isinstance(a, str) or isinstance(b, str):
                if str(a) != str(b):
                    return False
            elif float(a) != float(b):
                return False
    return True


# --------------------------------------------------------------------------
# plots


@dataclass(frozen=True)
class _PlotSpec:
    name: str
    xlabel: str
    ylabel: str
    series: tuple
    xscale: str = "linear"
    yscale: str = "linear"


def _write_plot(path: Path, plot: _PlotSpec) -> None:
    import matplotlib
    matplotlib.use("Agg", force=True)
    import matplotlib.pyplot as plt
    with plt.rc_context({"svg.hashsalt": "equiloc"}):
        fig, ax = plt.subplots(figsize=(5.2, 3.6), constrained_layout=True)
        for label, xs, ys, fmt in plot.series:
            ax.plot(xs, ys, fmt, label=label, markersize=4)
        ax.set_xscale(plot.xscale)
        ax.set_yscale(plot.yscale)
        ax.set_xlabel(plot.xlabel)
        ax.set_ylabel(plot.ylabel)
        if len(plot.series) > 1:
            ax.legend(frameon=False, fontsize=8)
        ax.grid(True, alpha=0.3)
        fig.savefig(path, format="svg", metadata={"Date": None})
        plt.close(fig)


# --------------------------------------------------------------------------
# manifest


@dataclass(frozen=True)
class RunManifest:
    """Reproducibility record for one scenario run."""

    task: str
    version: str
    backend: str
    created: str
    scenario_hash: str
    out_dir: Path
    files: tuple[tuple[str, str], ...]
    summary: tuple[tuple[str, str], ...]
    checks: tuple[tuple[str, bool, str], ...]

    @property
    def passed(self) -> bool:
        return all(ok for _, ok, _ in self.checks)

    def to_text(self) -> str:
        lines = [_MANIFEST_MAGIC,
                 f"task = {self.task}",
                 f"version = {self.version}",
                 f"backend = {self.backend}",
                 f"created = {self.created}",
                 f"scenario_hash = {self.scenario_hash}"]
        lines += [f"file = {name} sha256={digest}"
                  for name, digest in self.files]
        lines += [f"summary.{key} = {val}" for key, val in self.summary]
        lines += ["check.{} = {} ({})".format(
            name, "pass" if ok else "FAIL", detail)
            for name, ok, detail in self.checks]
        lines.append(f"status = {'pass' if self.passed else 'FAIL'}")
        return "\n".join(lines) + "\n"


@dataclass
class _TaskOutput:
    header: tuple[str, ...]
    rows: list
    summary: list
    checks: list
    measure: PiecewisePolyMeasure | None = None
    tree: str | None = None
    plots: tuple[_PlotSpec, ...] = ()


# --------------------------------------------------------------------------
# task runners


def _amplitude_is_zero(a: AmplitudeExpr) -> bool:
    return all(not term.poly.terms for term in a.terms)


def _run_oscint(cfg: ScenarioConfig) -> _TaskOutput:
    model, amp = cfg.model, cfg.amplitude
    eta = np.array([float(x) for x in cfg.etas[0]], dtype=float) \
        if cfg.etas else None
    header = ("mu", "re", "im", "rule", "nodes")
    if _amplitude_is_zero(amp):
        rows = [(mu, 0.0, 0.0, "zero", 0) for mu in cfg.mus]
        return _TaskOutput(header, rows, [("routes", "zero")],
                           [("dual_route", True,
                             "amplitude is identically zero")])
    try:
        gaussian_exact_I(model, amp, cfg.mus[0], spec=cfg.spec, eta=eta)
        closed = True
    except CapabilityError:
        closed = False
    rows = []
    for mu in cfg.mus:
        if closed:
            val = gaussian_exact_I(model, amp, mu, spec=cfg.spec, eta=eta)
            rows.append((mu, val.real, val.imag, "gauss", 0))
        else:
            val = brute_force_I(model, amp, mu, spec=cfg.spec, eta=eta)
            rows.append((mu, val.real, val.imag, cfg.spec.rule,
                         cfg.spec.order))
    checks = []
    if closed:
        probe = [row for row in rows if row[0] >= 0.05][:3]
        if probe:
            worst = 0.0
            for mu, re_, im_, _, _ in probe:
                other = brute_force_I(model, amp, mu, spec=cfg.spec, eta=eta)
                worst = max(worst, abs(complex(re_, im_) - other)
                            / max(1.0, abs(other)))
            checks.append(("dual_route", worst <= 1e-5,
                           f"closed form vs quadrature at {len(probe)} mu, "
                           f"max rel err {worst:.3g}"))
        else:
            checks.append(("dual_route", True,
                           "no mu large enough for a cross-check"))
    else:
        checks.append(("dual_route", True,
                       "no closed form for this amplitude; "
                       "single quadrature route"))
    summary = [("routes", "gauss" if closed else cfg.spec.rule)]
    pts = [(row[0], math.hypot(row[1], row[2])) for row in rows
           if math.hypot(row[1], row[2]) > 0]
    plots = ()
    if pts:
        plots = (_PlotSpec("integral.svg", "mu", "|I(mu)|",
                           (("computed", [p[0] for p in pts],
                             [p[1] for p in pts], "o-"),),
                           xscale="log", yscale="log"),)
    return _TaskOutput(header, rows, summary, checks, plots=plots)


def _partition_unity_check(cfg: ScenarioConfig) -> tuple[str, bool, str]:
    rng = np.random.default_rng(cfg.seed)
    part = DyadicPartition()
    dim = 2 * cfg.model.complex_dim + cfg.model.torus_rank
    worst = 0.0
    for _ in range(1000):
        w = rng.normal(size=dim)
        w *= rng.uniform(0.02, 0.5) / float(np.linalg.norm(w))
        worst = max(worst,
                    abs(sum(dyadic_weights(part, w).values()) - 1.0))
    return ("partition_unity", worst <= 1e-12,
            f"max deviation {worst:.3g} over 1000 shell points")


def _run_desing(cfg: ScenarioConfig) -> _TaskOutput:
    header = ("mu", "re", "im", "predicted", "residual")
    if _amplitude_is_zero(cfg.amplitude):
        rows = [(mu, 0.0, 0.0, 0.0, 0.0) for mu in cfg.mus]
        checks = [("termination", True, "amplitude is identically zero"),
                  _partition_unity_check(cfg)]
        return _TaskOutput(header, rows, [("L0", "0.0")], checks)
    res = desingularize(cfg.model, cfg.amplitude, mus=cfg.mus,
                        depth_cap=cfg.depth_cap, spec=cfg.spec)
    rows = [(mu, val.real, val.imag, pred, abs(val - pred))
            for mu, val, pred in res.table]
    summary = [("kappa", str(res.kappa)),
               ("L0", repr(res.L0)),
               ("lambda_a", str(res.lambda_a)),
               ("depth", str(res.depth)),
               ("alpha", repr(res.alpha)),
               ("beta", repr(res.beta)),
               ("chain_counts_differ",
                str(res.chain_counts_differ).lower())]
    bound = res.lambda_a + 1
    checks = [("termination", res.depth <= bound,
               f"resolution depth {res.depth} within chain bound {bound}"),
              _partition_unity_check(cfg),
              ("order_fit", res.alpha >= res.kappa + 0.5,
               f"remainder order {res.alpha:.3f} above leading order "
               f"{res.kappa}")]
    plots = ()
    pts = [(row[0], row[4]) for row in rows if row[4] > 0]
    if pts and res.fit is not None:
        xs = np.geomspace(min(p[0] for p in pts), max(p[0] for p in pts), 50)
        ys = res.fit.coeff * xs ** res.alpha
        if res.fit.with_log:
            ys = ys * np.log(1.0 / xs) ** res.beta
        plots = (_PlotSpec(
            "residual.svg", "mu", "|I(mu) - prediction|",
            (("residual", [p[0] for p in pts], [p[1] for p in pts], "o"),
             (f"order {res.alpha:.2f} fit", list(xs), list(ys), "-")),
            xscale="log", yscale="log"),)
    return _TaskOutput(header, rows, summary, checks,
                       tree=format_tree(res.tree), plots=plots)


def _measure_bundle(cfg: ScenarioConfig):
    if cfg.fixed_points:
        source, label = cfg.fixed_points, "fixed-point data"
    elif isinstance(cfg.model, SphereModel):
        source, label = sphere_fixed_points(), "sphere fixed points"
    else:
        source, label = cfg.model, "linear model"
    measure = dh_measure(source, rates=cfg.rates, cone=cfg.cone,
                         flag=cfg.flag)
    checks = [("measure_round_trip",
               parse_measure_text(measure_to_text(measure)) == measure,
               "serialized table parses back to the same measure")]
    model_route = not cfg.fixed_points and \
        isinstance(cfg.model, LinearHamiltonianModel)
    if not model_route:
        checks.append(("cone_independence", True,
                       "verified against the opposite cone internally"))
    elif cfg.rates and measure.rank == 1:
        base = cfg.cone or ConeLambda(((Fraction(1),),))
        opposite = ConeLambda(tuple(tuple(-x for x in ray)
                                    for ray in base.rays))
        alt = dh_measure(source, rates=cfg.rates, cone=opposite,
                         flag=cfg.flag)
        checks.append(("cone_independence", alt == measure,
                       "the opposite reference cone gives the same measure"))
    elif cfg.rates and measure.rank == 2 and cfg.flag is None:
        alt = dh_measure(source, rates=cfg.rates, cone=cfg.cone, flag=(1, 0))
        checks.append(("flag_independence", alt == measure,
                       "iterated transform order does not matter"))
    else:
        checks.append(("cone_independence", True,
                       "skipped: the boundary prescription is fixed by "
                       "the momentum cone"))
    return measure, label, checks


def _density_rows(measure: PiecewisePolyMeasure):
    if measure.rank == 1:
        if measure.breakpoints:
            lo = float(min(measure.breakpoints)) - 1.0
            hi = float(max(measure.breakpoints)) + 1.0
        else:
            lo, hi = -1.0, 1.0
        header = ("xi", "re", "im")
        rows = []
        for x in np.linspace(lo, hi, 101):
            d = measure.density(float(x))
            rows.append((float(x), d.real, d.imag))
        return header, rows
    corners = [box.corner for box in measure.boxes]
    if corners:
        lo1 = float(min(c[0] for c in corners)) - 1.0
        hi1 = float(max(c[0] for c in corners)) + 1.0
        lo2 = float(min(c[1] for c in corners)) - 1.0
        hi2 = float(max(c[1] for c in corners)) + 1.0
    else:
        lo1, hi1, lo2, hi2 = -1.0, 1.0, -1.0, 1.0
    header = ("xi1", "xi2", "re", "im")
    rows = []
    for x1 in np.linspace(lo1, hi1, 9):
        for x2 in np.linspace(lo2, hi2, 9):
            d = measure.density((float(x1), float(x2)))
            rows.append((float(x1), float(x2), d.real, d.imag))
    return header, rows


def _measure_summary(measure: PiecewisePolyMeasure, label: str):
    summary = [("source", label),
               ("rank", str(measure.rank)),
               ("two_pi_power", str(measure.two_pi_power))]
    if measure.rank == 1:
        summary.append(("breakpoints", " ".join(
            frac_str(b) for b in measure.breakpoints) or "none"))
        summary.append(("atoms", str(len(measure.atoms))))
    else:
        summary.append(("boxes", str(len(measure.boxes))))
    return summary


def _density_plot(measure: PiecewisePolyMeasure, rows) -> tuple:
    if measure.rank != 1:
        return ()
    xs = [row[0] for row in rows]
    ys = [row[1] for row in rows]
    return (_PlotSpec("measure.svg", "xi", "density",
                      (("density", xs, ys, "-"),)),)


def _run_dh(cfg: ScenarioConfig) -> _TaskOutput:
    measure, label, checks = _measure_bundle(cfg)
    header, rows = _density_rows(measure)
    return _TaskOutput(header, rows, _measure_summary(measure, label),
                       checks, measure=measure,
                       plots=_density_plot(measure, rows))


def _run_residue(cfg: ScenarioConfig) -> _TaskOutput:
    measure, label, checks = _measure_bundle(cfg)
    values = [jk_residue(measure, eta) for eta in cfg.etas]
    if measure.rank == 1:
        header = ("eta", "value")
        rows = [(float(e[0]), v) for e, v in zip(cfg.etas, values)]
    else:
        header = ("eta1", "eta2", "value")
        rows = [(float(e[0]), float(e[1]), v)
                for e, v in zip(cfg.etas, values)]
    if len(values) > 1:
        spread = max(values) - min(values)
        checks.append(("chamber_independence", spread == 0.0,
                       f"{len(values)} chambers, spread {spread:.3g}"))
    summary = _measure_summary(measure, label)
    summary.append(("values", " ".join(repr(v) for v in values)))
    _, density = _density_rows(measure)
    return _TaskOutput(header, rows, summary, checks, measure=measure,
                       plots=_density_plot(measure, density))


def _run_weyl(cfg: ScenarioConfig) -> _TaskOutput:
    if cfg.group_kind == "su2":
        group, label = su2_group(), "su2"
        oracle = math.pi ** 1.5
    else:
        group, label = torus_group(cfg.group_rank), f"torus{cfg.group_rank}"
        oracle = math.pi ** (cfg.group_rank / 2.0)

    def gauss(*ys: float) -> float:
        return math.exp(-sum(y * y for y in ys))

    value = float(weyl_lie_algebra_integral(group, gauss))
    err = abs(value - oracle)
    header = ("group", "rank", "value", "oracle", "abs_err")
    rows = [(label, group.rank, value, oracle, err)]
    summary = [("group", label), ("value", repr(value)),
               ("oracle", repr(oracle))]
    checks = [("matches_oracle", err <= 1e-6 * oracle,
               f"gaussian moment vs closed form, abs err {err:.3g}")]
    return _TaskOutput(header, rows, summary, checks)


def _run_check(cfg: ScenarioConfig) -> _TaskOutput:
    eta = cfg.etas[0][0] if cfg.etas else Fraction(1, 2)
    lhs, rhs, gap = residue_formula_check(cfg.model, cfg.rates,
                                          scale=cfg.scale, eta=eta,
                                          cone=cfg.cone)
    lhs_c, rhs_c = complex(lhs), complex(rhs)
    header = ("lhs_re", "lhs_im", "rhs_re", "rhs_im", "gap")
    rows = [(lhs_c.real, lhs_c.imag, rhs_c.real, rhs_c.imag, float(gap))]
    tol = 1e-6 * max(1.0, abs(lhs_c))
    checks = [("residue_identity", float(gap) <= tol,
               f"reduced integral vs residue, gap {float(gap):.3g} "
               f"(tol {tol:.3g})")]
    summary = [("lhs", repr(lhs_c)), ("rhs", repr(rhs_c)),
               ("gap", repr(float(gap)))]
    return _TaskOutput(header, rows, summary, checks)


_RUNNERS = {
    "oscint": _run_oscint,
    "desing": _run_desing,
    "dh": _run_dh,
    "residue": _run_residue,
    "weyl": _run_weyl,
    "check": _run_check,
}


# --------------------------------------------------------------------------
# execution


def _version() -> str:
    try:
        return metadata.version("equiloc")
    except metadata.PackageNotFoundError:
        return "unknown"


def run_scenario(cfg: ScenarioConfig) -> RunManifest:
    """Execute one scenario, write its artifacts, and return the manifest."""
    out_dir = Path(cfg.out) if cfg.out else Path("runs") / cfg.task
    out_dir.mkdir(parents=True, exist_ok=True)
    result = _RUNNERS[cfg.task](cfg)
    written: list[tuple[str, str]] = []

    def emit(name: str, data: str) -> None:
        blob = data.encode("utf-8")
        (out_dir / name).write_bytes(blob)
        written.append((name, hashlib.sha256(blob).hexdigest()))

    csv_lines = [_SCHEMA_MAGIC, ",".join(result.header)]
    csv_lines += [",".join(_fmt_cell(c) for c in row) for row in result.rows]
    emit("result.csv", "\n".join(csv_lines) + "\n")
    if result.measure is not None:
        emit("measure.txt", measure_to_text(result.measure))
    if result.tree is not None:
        emit("tree.txt", result.tree.rstrip("\n") + "\n")
    for plot in result.plots:
        path = out_dir / plot.name
        _write_plot(path, plot)
        blob = path.read_bytes()
        written.append((plot.name, hashlib.sha256(blob).hexdigest()))
    checks = list(result.checks)
    checks.append(("round_trip",
                   _csv_round_trips(out_dir / "result.csv", result.header,
                                    result.rows),
                   "result.csv parses back to the written values"))
    manifest = RunManifest(
        task=cfg.task,
        version=_version(),
        backend=backend(),
        created=datetime.now(timezone.utc).strftime("%Y-%m-%dT%H:%M:%SZ"),
        scenario_hash=hashlib.sha256(cfg.hash_text.encode()).hexdigest(),
        out_dir=out_dir,
        files=tuple(written),
        summary=tuple((k, str(v)) for k, v in result.summary),
        checks=tuple(checks))
    (out_dir / "manifest.txt").write_text(manifest.to_text(),
                                          encoding="utf-8")
    return manifest


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="equiloc",
        description="Run equivariant localization scenarios from a "
                    "config file.")
    parser.add_argument("task", choices=_TASKS)
    parser.add_argument("--config", required=True,
                        help="scenario config file")
    parser.add_argument("--out", help="output directory override")
    parser.add_argument("--mu", help="comma-separated mu grid override")
    ns = parser.parse_args(argv)
    try:
        mus = None
        if ns.mu is not None:
            try:
                mus = tuple(float(tok) for tok in ns.mu.split(","))
            except ValueError:
                raise DataError(f"--mu: cannot parse {ns.mu!r}") from None
        cfg = load_config(ns.config, task=ns.task, out=ns.out, mus=mus)
        manifest = run_scenario(cfg)
    except (EquilocError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    for name, ok, detail in manifest.checks:
        print(f"[{'pass' if ok else 'FAIL'}] {name}: {detail}")
    print(("all checks passed" if manifest.passed else "checks FAILED")
          + f"; artifacts in {manifest.out_dir}")
    return 0 if manifest.passed else 1


if __name__ == "__main__":
    sys.exit(main())
