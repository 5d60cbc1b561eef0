"""JSON instance files.

``emit`` writes the canonical form: states and effects as real coordinate
vectors, groups as multiplication tables, state-space maps as real
matrices. Floats use Python's shortest round-trip repr, so
``parse_text(emit(x))`` rebuilds ``x`` bit for bit. ``parse_text`` also
accepts the friendlier inputs people write by hand: kets or density
matrices with complex entries as ``[re, im]``, named groups, unitaries,
and group generators.
"""

from __future__ import annotations

import hashlib
import json
import math
import re
from pathlib import Path
from typing import Any

import numpy as np

from . import classes, kernel
from .discrimination import DiscriminationInstance, Measurement, StatePreparation
from .errors import OptDiscrimError, ParseError, ValidationError
from .models import ClassicalModel, PolytopeModel, QuantumModel, gbit_square, is_quantum, quantum_dims, unitary_action, vectorize
from .symmetry import FiniteGroup, OutcomeAction, StateSpaceAction, SymmetrySetup, from_generators

VERSION = 1
CLASS_TAGS = ("all", "sequential", "locc", "separable", "pt")
SOLVER_KEYS = {"method", "tolerance", "max_iter", "seed", "trials"}
MATCH_TOL = 1e-12


# ---------------------------------------------------------------------------
# Helpers


class _Ctx:
    """Source text, used to anchor field errors to a line."""

    def __init__(self, text: str):
        self.lines = text.splitlines()

    def line_of(self, field: str) -> int | None:
        key = '"' + field.split(".")[-1].split("[")[0] + '"'
        for k, line in enumerate(self.lines, 1):
            if key in line:
                return k
        return None

    def error(self, field: str, msg: str) -> ParseError:
        line = self.line_of(field)
        where = f"line {line}, " if line else ""
        return ParseError(f"{where}field {field}: {msg}", line, field)


def _num(x, ctx: _Ctx, field: str) -> complex:
    if isinstance(x, bool):
        raise ctx.error(field, "expected a number, got a boolean")
    if isinstance(x, (int, float)):
        return x
    if isinstance(x, list) and len(x) == 2 and all(isinstance(v, (int, float)) and not isinstance(v, bool) for v in x):
        return complex(x[0], x[1])
    raise ctx.error(field, f"expected a number or [re, im] pair, got {x!r}")


def _array(x, ctx: _Ctx, field: str, ndim: int | None = None) -> np.ndarray:
    def walk(v, path):
        if isinstance(v, list) and v and not (
            len(v) == 2 and all(isinstance(t, (int, float)) and not isinstance(t, bool) for t in v) and _depth_hint(path)
        ):
            return [walk(t, f"{path}[{k}]") for k, t in enumerate(v)]
        return _num(v, ctx, path)

    def _depth_hint(path):
        # a trailing 2-list is a complex pair only at the innermost level
        return ndim is not None and path.count("[") - field.count("[") >= ndim

    try:
        out = np.array(walk(x, field))
    except ValueError as exc:
        raise ctx.error(field, f"ragged array ({exc})") from exc
    if ndim is not None and out.ndim != ndim:
        raise ctx.error(field, f"expected a {ndim}-dimensional array, got shape {out.shape}")
    if out.dtype == object:
        raise ctx.error(field, "ragged array")
    if not np.all(np.isfinite(out)):
        raise ctx.error(field, "non-finite entry")
    return out


def _real(a: np.ndarray, ctx: _Ctx, field: str) -> np.ndarray:
    if np.iscomplexobj(a):
        if np.max(np.abs(a.imag), initial=0.0) > 0:
            raise ctx.error(field, "expected real entries")
        a = a.real
    return np.asarray(a, dtype=float)


def _get(d: dict, key: str, ctx: _Ctx, field: str, required: bool = True):
    if not isinstance(d, dict):
        raise ctx.error(field, "expected an object")
    if key not in d:
        if required:
            raise ctx.error(f"{field}.{key}", "missing")
        return None
    return d[key]


def _int(x, ctx: _Ctx, field: str, lo: int = 1) -> int:
    if isinstance(x, bool) or not isinstance(x, int) or x < lo:
        raise ctx.error(field, f"expected an integer >= {lo}")
    return x


def _float_out(x: float) -> float:
    x = float(x)
    if not math.isfinite(x):
        raise OptDiscrimError(f"cannot serialize non-finite value {x}")
    return x


def to_list(a) -> Any:
    a = np.asarray(a, dtype=float)
    if a.ndim == 0:
        return _float_out(a)
    return [to_list(r) for r in a] if a.ndim > 1 else [_float_out(v) for v in a]


# ---------------------------------------------------------------------------
# Systems


def _model_system(sec, ctx: _Ctx) -> kernel.System:
    kind = _get(sec, "kind", ctx, "model")
    if kind == "quantum":
        dims = _get(sec, "dims", ctx, "model")
        if not isinstance(dims, list) or not 1 <= len(dims) <= 2:
            raise ctx.error("model.dims", "expected one or two dimensions")
        dims = [_int(d, ctx, "model.dims") for d in dims]
        if len(dims) == 1:
            return kernel.System("A", QuantumModel(dims[0]))
        return kernel.tensor(kernel.System("A", QuantumModel(dims[0])), kernel.System("B", QuantumModel(dims[1])))
    if kind == "classical":
        return kernel.System("A", ClassicalModel(_int(_get(sec, "dim", ctx, "model"), ctx, "model.dim")))
    if kind in ("gbit", "gbit-square"):
        return kernel.System("A", gbit_square())
    if kind == "polytope":
        states = _real(_array(_get(sec, "states", ctx, "model"), ctx, "model.states", 2), ctx, "model.states")
        unit = _real(_array(_get(sec, "unit", ctx, "model"), ctx, "model.unit", 1), ctx, "model.unit")
        try:
            return kernel.System("A", PolytopeModel(states, unit, name=sec.get("name", "polytope")))
        except (ValueError, OptDiscrimError) as exc:
            raise ctx.error("model", str(exc)) from exc
    raise ctx.error("model.kind", f"unknown model kind {kind!r}")


def _model_doc(system: kernel.System) -> dict:
    m = system.model
    if is_quantum(m):
        return {"kind": "quantum", "dims": list(quantum_dims(m))}
    if isinstance(m, ClassicalModel):
        return {"kind": "classical", "dim": m.M}
    if isinstance(m, PolytopeModel):
        if m == gbit_square():
            return {"kind": "gbit-square"}
        return {"kind": "polytope", "name": m.name, "states": to_list(m.states), "unit": to_list(m.unit)}
    raise OptDiscrimError(f"cannot serialize model {m!r}")


_ATOM = re.compile(r"^([^:]+):([qc])(\d+)$")


def _atom(raw, ctx: _Ctx, field: str) -> kernel.System:
    m = _ATOM.match(raw) if isinstance(raw, str) else None
    if not m:
        raise ctx.error(field, f"bad system atom {raw!r}; expected label:qN or label:cN")
    n = int(m.group(3))
    model = QuantumModel(n) if m.group(2) == "q" else ClassicalModel(n)
    return kernel.System(m.group(1), model)


def _atom_doc(s: kernel.System) -> list[str]:
    out = []
    for a in s.atoms:
        if isinstance(a.model, QuantumModel):
            out.append(f"{a.label}:q{a.model.N}")
        elif isinstance(a.model, ClassicalModel):
            out.append(f"{a.label}:c{a.model.M}")
        else:
            raise OptDiscrimError(f"cannot serialize system atom {a}")
    return out


# ---------------------------------------------------------------------------
# Vectors: states and effects


def _vectors(sec, key: str, system: kernel.System, ctx: _Ctx, field: str, allow_ket: bool) -> np.ndarray:
    enc = sec.get("encoding", "vector") if isinstance(sec, dict) else None
    raw = _get(sec, key, ctx, field)
    f = f"{field}.{key}"
    if enc == "vector":
        out = _real(_array(raw, ctx, f, 2), ctx, f)
    elif enc in ("ket", "density"):
        if not is_quantum(system.model):
            raise ctx.error(f"{field}.encoding", f"{enc} encoding needs a quantum model")
        dims = quantum_dims(system.model)
        n = int(np.prod(dims))
        if enc == "ket":
            if not allow_ket:
                raise ctx.error(f"{field}.encoding", "ket encoding is only allowed for states")
            kets = _array(raw, ctx, f, 2).astype(complex)
            if kets.shape[1] != n:
                raise ctx.error(f, f"kets must have length {n}")
            norms = np.linalg.norm(kets, axis=1)
            if np.any(norms == 0):
                raise ctx.error(f, "zero ket")
            kets = kets / norms[:, None]
            out = np.array([vectorize(np.outer(k, k.conj()), dims) for k in kets])
        else:
            mats = _array(raw, ctx, f, 3).astype(complex)
            if mats.shape[1:] != (n, n):
                raise ctx.error(f, f"density matrices must be {n}x{n}")
            if np.max(np.abs(mats - np.conj(np.swapaxes(mats, 1, 2))), initial=0.0) > 1e-10:
                raise ctx.error(f, "matrices are not Hermitian")
            out = np.array([vectorize(m, dims) for m in mats])
    else:
        raise ctx.error(f"{field}.encoding", f"unknown encoding {enc!r}")
    if out.shape[1] != system.dim:
        raise ctx.error(f, f"vectors of length {out.shape[1]} for a system of dimension {system.dim}")
    return out


def _preparation(sec, system: kernel.System, ctx: _Ctx) -> StatePreparation:
    states = _vectors(sec, "states", system, ctx, "preparation", allow_ket=True)
    priors = sec.get("priors")
    if priors is not None:
        pri = _real(_array(priors, ctx, "preparation.priors", 1), ctx, "preparation.priors")
        if pri.shape[0] != states.shape[0]:
            raise ctx.error("preparation.priors", "one prior per state is required")
        if np.any(pri < 0):
            raise ValidationError("preparation has a negative prior", "priors nonnegative")
        norms = states @ system.model.unit_effect()
        if np.any(np.abs(norms - 1.0) > 1e-10):
            raise ValidationError("with priors given, states must be normalized", "states normalized")
        prep = StatePreparation.from_priors(system, pri, states)
    else:
        prep = StatePreparation(system, states)
    bad = prep.problems()
    if bad:
        raise ValidationError(bad[0], bad[0].split(":")[0])
    return prep


# ---------------------------------------------------------------------------
# Symmetry


def _group(sec, ctx: _Ctx) -> FiniteGroup:
    if "table" in sec:
        table = _array(sec["table"], ctx, "symmetry.group.table", 2)
        if not np.all(table == np.round(table)):
            raise ctx.error("symmetry.group.table", "entries must be integers")
        try:
            return FiniteGroup.from_table(table.astype(int).tolist())
        except (ValueError, OptDiscrimError) as exc:
            raise ValidationError(str(exc), "group laws") from exc
    name = _get(sec, "name", ctx, "symmetry.group")
    if name == "trivial":
        return FiniteGroup.trivial()
    if name in ("cyclic", "dihedral"):
        n = _int(_get(sec, "n", ctx, "symmetry.group"), ctx, "symmetry.group.n")
        return FiniteGroup.cyclic(n) if name == "cyclic" else FiniteGroup.dihedral(n)
    raise ctx.error("symmetry.group.name", f"unknown group {name!r}")


def _maps(sec, system: kernel.System, ctx: _Ctx, field: str) -> list[np.ndarray]:
    if "matrices" in sec:
        mats = _real(_array(sec["matrices"], ctx, f"{field}.matrices", 3), ctx, f"{field}.matrices")
        return list(mats)
    if "unitaries" in sec:
        if not is_quantum(system.model):
            raise ctx.error(f"{field}.unitaries", "unitaries need a quantum model")
        dims = quantum_dims(system.model)
        us = _array(sec["unitaries"], ctx, f"{field}.unitaries", 3).astype(complex)
        anti = sec.get("antiunitary", [False] * len(us))
        if not isinstance(anti, list) or len(anti) != len(us) or not all(isinstance(a, bool) for a in anti):
            raise ctx.error(f"{field}.antiunitary", "expected one boolean per unitary")
        return [unitary_action(u, antiunitary=a, dims=dims) for u, a in zip(us, anti)]
    raise ctx.error(field, "expected matrices or unitaries")


def _perms(raw, ctx: _Ctx, field: str) -> list[tuple[int, ...]]:
    if not isinstance(raw, list) or not all(isinstance(p, list) for p in raw):
        raise ctx.error(field, "expected a list of permutations")
    out = []
    for k, p in enumerate(raw):
        if not all(isinstance(v, int) and not isinstance(v, bool) for v in p) or sorted(p) != list(range(len(p))):
            raise ctx.error(f"{field}[{k}]", f"not a permutation: {p!r}")
        out.append(tuple(p))
    return out


def _symmetry(sec, system: kernel.System, M: int, ctx: _Ctx) -> SymmetrySetup:
    if "generators" in sec:
        gen = sec["generators"]
        perms = _perms(_get(gen, "tau", ctx, "symmetry.generators"), ctx, "symmetry.generators.tau")
        maps = _maps(_get(gen, "pibar", ctx, "symmetry.generators"), system, ctx, "symmetry.generators.pibar")
        if len(perms) != len(maps):
            raise ctx.error("symmetry.generators", "tau and pibar need the same number of generators")
        try:
            setup = from_generators(perms, maps, system=system)
        except OptDiscrimError as exc:
            raise ValidationError(str(exc), "group closure") from exc
    else:
        group = _group(_get(sec, "group", ctx, "symmetry"), ctx)
        perms = _perms(_get(sec, "tau", ctx, "symmetry"), ctx, "symmetry.tau")
        maps = _maps(_get(sec, "pibar", ctx, "symmetry"), system, ctx, "symmetry.pibar")
        if len(perms) != group.order or len(maps) != group.order:
            raise ValidationError(
                f"group of order {group.order} needs that many outcome permutations and maps", "action size"
            )
        try:
            setup = SymmetrySetup(group, OutcomeAction(group, perms), StateSpaceAction(group, maps), system=system)
        except (ValueError, OptDiscrimError) as exc:
            raise ValidationError(str(exc), "action shape") from exc
    if setup.tau.M != M:
        raise ValidationError(f"outcome permutations act on {setup.tau.M} labels, preparation has {M}", "outcome count")
    if any(P.shape != (system.dim, system.dim) for P in setup.pibar.maps):
        raise ValidationError("state-space maps have the wrong shape", "map shape")
    rep = setup.report
    if not rep.valid:
        raise ValidationError(rep.first, rep.first)
    return setup


def _symmetry_doc(s: SymmetrySetup) -> dict:
    return {
        "group": {"table": [list(r) for r in s.group.mult]},
        "tau": [list(p) for p in s.tau.perms],
        "pibar": {"matrices": [to_list(P) for P in s.pibar.maps]},
    }


# ---------------------------------------------------------------------------
# Classes


def parties(system: kernel.System) -> tuple[kernel.System, kernel.System]:
    atoms = system.atoms
    if len(atoms) != 2:
        raise ValidationError("measurement classes need a bipartite system", "bipartite system")
    return atoms[0], atoms[1]


def _step(sec, ctx: _Ctx, field: str) -> kernel.ExtendedProcess:
    ins = _get(sec, "input", ctx, field)
    outs = _get(sec, "output", ctx, field)
    if not isinstance(ins, list) or not isinstance(outs, list):
        raise ctx.error(field, "input and output must be lists of atoms")
    i_sys = kernel.tensor_all([_atom(a, ctx, f"{field}.input") for a in ins])
    o_sys = kernel.tensor_all([_atom(a, ctx, f"{field}.output") for a in outs])
    mat = _real(_array(_get(sec, "matrix", ctx, field), ctx, f"{field}.matrix", 2), ctx, f"{field}.matrix")
    try:
        return kernel.ExtendedProcess(i_sys, o_sys, mat)
    except OptDiscrimError as exc:
        raise ctx.error(f"{field}.matrix", str(exc)) from exc


def _class(sec, system: kernel.System, ctx: _Ctx):
    tag = _get(sec, "tag", ctx, "class")
    if tag not in CLASS_TAGS:
        raise ctx.error("class.tag", f"unknown class {tag!r}; expected one of {', '.join(CLASS_TAGS)}")
    if tag in ("all", "pt"):
        if tag == "pt":
            parties(system)
        return tag, None
    A, B = parties(system)
    try:
        if tag == "sequential":
            a = _vectors(sec, "a", A, ctx, "class", allow_ket=False)
            raw = _get(sec, "branches", ctx, "class")
            if not isinstance(raw, list):
                raise ctx.error("class.branches", "expected a list of measurements")
            branches = [
                _vectors({"encoding": sec.get("encoding", "vector"), "effects": b}, "effects", B, ctx, f"class.branches[{k}]", False)
                for k, b in enumerate(raw)
            ]
            data = classes.SequentialMeasurement(A, B, a, branches)
        elif tag == "separable":
            raw = _get(sec, "terms", ctx, "class")
            if not isinstance(raw, list):
                raise ctx.error("class.terms", "expected one term list per outcome")
            terms = []
            for m, ts in enumerate(raw):
                row = []
                for k, t in enumerate(ts):
                    f = f"class.terms[{m}][{k}]"
                    w = _num(_get(t, "weight", ctx, f), ctx, f"{f}.weight")
                    al = _real(_array(_get(t, "alpha", ctx, f), ctx, f"{f}.alpha", 1), ctx, f)
                    be = _real(_array(_get(t, "beta", ctx, f), ctx, f"{f}.beta", 1), ctx, f)
                    if al.shape[0] != A.dim or be.shape[0] != B.dim:
                        raise ctx.error(f, "local factor has the wrong length")
                    row.append((float(np.real(w)), al, be))
                terms.append(row)
            data = classes.SeparableMeasurement(A, B, terms)
        else:
            a_raw, b_raw = _get(sec, "a_steps", ctx, "class"), _get(sec, "b_steps", ctx, "class")
            a_steps = [_step(s, ctx, f"class.a_steps[{k}]") for k, s in enumerate(a_raw)]
            b_steps = [_step(s, ctx, f"class.b_steps[{k}]") for k, s in enumerate(b_raw)]
            data = classes.LoccMeasurement(A, B, a_steps, b_steps)
    except ParseError:
        raise
    except OptDiscrimError as exc:
        raise ValidationError(f"class {tag}: {exc}", f"{tag} structure") from exc
    bad = data.problems()
    if bad:
        raise ValidationError(f"class {tag}: {bad[0]}", f"{tag} validity")
    return tag, data


def _class_doc(tag: str, data) -> dict:
    doc: dict = {"tag": tag}
    if isinstance(data, classes.SequentialMeasurement):
        doc.update(a=to_list(data.a), branches=[to_list(b) for b in data.branches])
    elif isinstance(data, classes.SeparableMeasurement):
        doc["terms"] = [
            [{"weight": _float_out(w), "alpha": to_list(a), "beta": to_list(b)} for w, a, b in ts] for ts in data.terms
        ]
    elif isinstance(data, classes.LoccMeasurement):
        def step(s):
            return {"input": _atom_doc(s.input), "output": _atom_doc(s.output), "matrix": to_list(s.matrix)}

        doc.update(a_steps=[step(s) for s in data.a_steps], b_steps=[step(s) for s in data.b_steps])
    return doc


# ---------------------------------------------------------------------------
# Entry points


def parse_text(text: str) -> DiscriminationInstance:
    ctx = _Ctx(text)
    if not text.strip():
        raise ParseError("empty instance file", 1, None)
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ParseError(f"line {exc.lineno}: invalid JSON ({exc.msg})", exc.lineno, None) from exc
    if not isinstance(doc, dict):
        raise ParseError("instance file must hold a JSON object", 1, None)
    version = doc.get("version")
    if version != VERSION:
        raise ctx.error("version", f"unsupported version {version!r}; expected {VERSION}")
    system = _model_system(_get(doc, "model", ctx, "instance"), ctx)
    prep = _preparation(_get(doc, "preparation", ctx, "instance"), system, ctx)
    setup = _symmetry(doc["symmetry"], system, prep.M, ctx) if doc.get("symmetry") is not None else None

    meas = None
    if doc.get("measurement") is not None:
        effs = _vectors(doc["measurement"], "effects", system, ctx, "measurement", allow_ket=False)
        meas = Measurement(system, effs)
        if not meas.is_valid():
            raise ValidationError("measurement effects do not form a measurement", "measurement normalization")

    tag, data = "all", None
    if doc.get("class") is not None:
        tag, data = _class(doc["class"], system, ctx)
    if data is not None:
        built = data.measurement()
        if meas is None:
            meas = built
        elif np.max(np.abs(built.effects - meas.effects)) > MATCH_TOL:
            raise ValidationError("class decomposition does not reproduce the measurement", "class reconstruction")
    if tag == "pt" and meas is None:
        raise ValidationError("class pt needs a measurement section", "pt measurement")

    opts = doc.get("solver") or {}
    if not isinstance(opts, dict) or not set(opts) <= SOLVER_KEYS:
        raise ctx.error("solver", f"unknown solver option(s): {sorted(set(opts) - SOLVER_KEYS)}")
    name = doc.get("name", "")
    if not isinstance(name, str):
        raise ctx.error("name", "expected a string")
    return DiscriminationInstance(prep, setup, tag, meas, data, dict(opts), name)


def parse_instance(path) -> DiscriminationInstance:
    p = Path(path)
    try:
        text = p.read_text(encoding="utf-8")
    except FileNotFoundError as exc:
        raise ParseError(f"no such file: {p}", None, None) from exc
    except UnicodeDecodeError as exc:
        raise ParseError(f"{p} is not UTF-8", None, None) from exc
    return parse_text(text)


def to_document(inst: DiscriminationInstance) -> dict:
    doc: dict = {"version": VERSION}
    if inst.name:
        doc["name"] = inst.name
    doc["model"] = _model_doc(inst.system)
    doc["preparation"] = {"encoding": "vector", "states": to_list(inst.preparation.states)}
    if inst.symmetry is not None:
        doc["symmetry"] = _symmetry_doc(inst.symmetry)
    if inst.measurement is not None:
        doc["measurement"] = {"encoding": "vector", "effects": to_list(inst.measurement.effects)}
    if inst.class_tag != "all":
        doc["class"] = _class_doc(inst.class_tag, inst.class_data)
    if inst.options:
        doc["solver"] = dict(inst.options)
    return doc


def emit(inst: DiscriminationInstance) -> str:
    return json.dumps(to_document(inst), indent=1, allow_nan=False) + "\n"


def instance_hash(inst: DiscriminationInstance) -> str:
    canon = json.dumps(to_document(inst), sort_keys=True, separators=(",", ":"), allow_nan=False)
    return hashlib.sha256(canon.encode()).hexdigest()


def same_instance(a: DiscriminationInstance, b: DiscriminationInstance) -> bool:
    """Exact equality of everything the file format carries."""
    return to_document(a) == to_document(b)
