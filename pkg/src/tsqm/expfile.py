"""JSON experiment files.

Layout::

    {
      "name": "three-box-ii",
      "dim": 3,
      "basis_labels": ["A", "B", "C"],
      "pre": [[1, 0], [1, 0], [1, 0]],
      "post": [[1, 0], [1, 0], [-1, 0]],
      "steps": [
        {"measure": {"label": "A|B∪C",
                     "outcomes": [{"label": "A", "basis": ["A"]},
                                  {"label": "B∪C", "basis": [1, 2]}]},
         "efficiency": {"A": 1.0}}
      ],
      "contexts": [ ...extra contexts for the element-of-reality scan... ]
    }

Complex numbers are ``[re, im]`` pairs (plain reals also accepted);
matrices are row-major nested lists.  Kets are normalized on load.  A
context outcome is given by ``basis`` (indices or basis labels), ``ket``
(rank-1) or ``projector`` (full matrix).  ``post`` postselects on a ket;
``post_context`` + ``accept`` postselect on an arbitrary outcome; omitting
both disables postselection.  Steps are ``{"evolve": matrix}`` or
``{"measure": context, "efficiency": {label: eta} | eta}``.
"""

from __future__ import annotations

import json
from pathlib import Path
from typing import Any

import numpy as np

from .config import TOL
from .errors import DimensionMismatch, InvariantViolation, ParseError, UnknownOutcome, ValidationError, ZeroVector
from .ensemble import DetectorModel, Evolve, ExperimentSpec, Measure, ray_of
from .experiments import postselection_context
from .hilbert import Projector, StateVector, UnitaryOperator, normalize, projector_onto, subspace_projector
from .measure import MeasurementContext, trivial_context


class _Reader:
    def __init__(self, source: str):
        self.source = source
        self.dim: int | None = None
        self.labels: list[str] | None = None

    def fail(self, where: str, msg: str):
        raise ParseError(f"{self.source}:{where}", msg)

    def invalid(self, where: str, invariant: str, detail: str = ""):
        raise ValidationError(invariant, f"{self.source}:{where}", detail)

    def get(self, obj: dict, key: str, where: str, required: bool = True):
        if not isinstance(obj, dict):
            self.fail(where, "expected an object")
        if key not in obj:
            if required:
                self.fail(where, f"missing field {key!r}")
            return None
        return obj[key]

    def number(self, x: Any, where: str) -> complex:
        if isinstance(x, bool):
            self.fail(where, "expected a number or [re, im]")
        if isinstance(x, (int, float)):
            return complex(x)
        if isinstance(x, list) and len(x) == 2 and all(isinstance(v, (int, float)) and not isinstance(v, bool) for v in x):
            return complex(x[0], x[1])
        self.fail(where, "expected a number or [re, im]")

    def vector(self, x: Any, where: str) -> np.ndarray:
        if not isinstance(x, list) or not x:
            self.fail(where, "expected a non-empty list of amplitudes")
        v = np.array([self.number(c, f"{where}[{i}]") for i, c in enumerate(x)])
        if self.dim is not None and v.size != self.dim:
            self.invalid(where, "dimension", f"{v.size} amplitudes, dim is {self.dim}")
        return v

    def ket(self, x: Any, where: str) -> StateVector:
        v = self.vector(x, where)
        try:
            state = StateVector(v)
            # already-unit kets are kept verbatim so files round-trip bit for bit
            return state if state.is_normalized(TOL.unit_norm) else normalize(state)
        except ZeroVector:
            self.invalid(where, "nonzero-norm", "zero vector")

    def matrix(self, x: Any, where: str) -> np.ndarray:
        if not isinstance(x, list) or not x:
            self.fail(where, "expected a non-empty list of rows")
        rows = []
        for r, row in enumerate(x):
            if not isinstance(row, list):
                self.fail(f"{where}[{r}]", "expected a row list")
            rows.append([self.number(c, f"{where}[{r}][{k}]") for k, c in enumerate(row)])
        if any(len(row) != len(rows) for row in rows):
            self.invalid(where, "square", f"{len(rows)} rows of lengths {[len(r) for r in rows]}")
        if self.dim is not None and len(rows) != self.dim:
            self.invalid(where, "dimension", f"{len(rows)}x{len(rows)} matrix, dim is {self.dim}")
        return np.array(rows, dtype=np.complex128)

    def index(self, x: Any, where: str) -> int:
        if isinstance(x, str):
            if not self.labels or x not in self.labels:
                self.invalid(where, "basis-label", f"unknown basis label {x!r}")
            return self.labels.index(x)
        if isinstance(x, int) and not isinstance(x, bool):
            if not 0 <= x < self.dim:
                self.invalid(where, "basis-index", f"index {x} outside 0..{self.dim - 1}")
            return x
        self.fail(where, "expected a basis index or label")

    def context(self, x: Any, where: str) -> MeasurementContext:
        label = self.get(x, "label", where)
        outcomes = self.get(x, "outcomes", where)
        if not isinstance(outcomes, list) or not outcomes:
            self.fail(f"{where}.outcomes", "expected a non-empty list")
        items = []
        for i, o in enumerate(outcomes):
            w = f"{where}.outcomes[{i}]"
            name = self.get(o, "label", w)
            forms = [k for k in ("basis", "ket", "projector") if k in o]
            if len(forms) != 1:
                self.fail(w, "give exactly one of 'basis', 'ket', 'projector'")
            form = forms[0]
            try:
                if form == "basis":
                    idx = o["basis"]
                    if not isinstance(idx, list) or not idx:
                        self.fail(f"{w}.basis", "expected a non-empty list")
                    p = subspace_projector(self.dim, [self.index(k, f"{w}.basis[{j}]") for j, k in enumerate(idx)])
                elif form == "ket":
                    p = projector_onto(self.ket(o["ket"], f"{w}.ket"))
                else:
                    p = Projector(self.matrix(o["projector"], f"{w}.projector"))
            except InvariantViolation as e:
                self.invalid(f"{w}.{form}", e.invariant, e.detail)
            items.append((name, p))
        try:
            return MeasurementContext(str(label), items)
        except InvariantViolation as e:
            self.invalid(where, e.invariant, e.detail)

    def detector(self, x: Any, labels: list[str], where: str) -> DetectorModel:
        if x is None:
            return DetectorModel()
        if isinstance(x, (int, float)) and not isinstance(x, bool):
            pairs = {}
            default = float(x)
        elif isinstance(x, dict):
            pairs, default = {}, 1.0
            for k, v in x.items():
                if k not in labels:
                    self.invalid(f"{where}.{k}", "known-outcome", f"no outcome {k!r} in this context")
                if isinstance(v, bool) or not isinstance(v, (int, float)):
                    self.fail(f"{where}.{k}", "expected a number")
                pairs[k] = float(v)
        else:
            self.fail(where, "expected a number or an object of label: efficiency")
        try:
            return DetectorModel(pairs, default)
        except InvariantViolation as e:
            self.invalid(where, e.invariant, e.detail)


def parse_document(doc: Any, source: str = "<document>") -> ExperimentSpec:
    r = _Reader(source)
    if not isinstance(doc, dict):
        r.fail("$", "top level must be an object")
    dim = r.get(doc, "dim", "$")
    if isinstance(dim, bool) or not isinstance(dim, int) or dim < 1:
        r.fail("$.dim", "expected a positive integer")
    r.dim = dim
    labels = r.get(doc, "basis_labels", "$", required=False)
    if labels is not None:
        if not isinstance(labels, list) or not all(isinstance(s, str) for s in labels):
            r.fail("$.basis_labels", "expected a list of strings")
        if len(labels) != dim:
            r.invalid("$.basis_labels", "dimension", f"{len(labels)} labels, dim is {dim}")
        r.labels = labels
    pre = r.ket(r.get(doc, "pre", "$"), "$.pre")

    if "post" in doc and "post_context" in doc:
        r.fail("$", "give either 'post' or 'post_context', not both")
    if "post" in doc:
        post_ctx = postselection_context(r.ket(doc["post"], "$.post"))
        accept = "post"
    elif "post_context" in doc:
        post_ctx = r.context(doc["post_context"], "$.post_context")
        accept = r.get(doc, "accept", "$")
        if accept not in post_ctx:
            r.invalid("$.accept", "known-outcome", f"{accept!r} not in post_context")
    else:
        post_ctx = trivial_context(dim)
        accept = "all"

    steps_doc = r.get(doc, "steps", "$", required=False) or []
    if not isinstance(steps_doc, list):
        r.fail("$.steps", "expected a list")
    steps = []
    for k, s in enumerate(steps_doc):
        w = f"$.steps[{k}]"
        if not isinstance(s, dict) or len({"evolve", "measure"} & set(s)) != 1:
            r.fail(w, "a step is {'evolve': matrix} or {'measure': context}")
        if "evolve" in s:
            try:
                steps.append(Evolve(UnitaryOperator(r.matrix(s["evolve"], f"{w}.evolve"))))
            except InvariantViolation as e:
                r.invalid(f"{w}.evolve", e.invariant, e.detail)
        else:
            ctx = r.context(s["measure"], f"{w}.measure")
            steps.append(Measure(ctx, r.detector(s.get("efficiency"), ctx.labels, f"{w}.efficiency")))

    extra = r.get(doc, "contexts", "$", required=False) or []
    if not isinstance(extra, list):
        r.fail("$.contexts", "expected a list")
    scan = [r.context(c, f"$.contexts[{i}]") for i, c in enumerate(extra)]

    name = doc.get("name", Path(source).stem)
    try:
        return ExperimentSpec(str(name), pre, tuple(steps), post_ctx, accept,
                              tuple(labels) if labels else None, tuple(scan))
    except (InvariantViolation, DimensionMismatch, UnknownOutcome) as e:
        r.invalid("$", getattr(e, "invariant", type(e).__name__), str(e))


def loads_experiment(text: str, source: str = "<string>") -> ExperimentSpec:
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as e:
        raise ParseError(f"{source}:{e.lineno}:{e.colno}", e.msg) from None
    return parse_document(doc, source)


def shipped_experiment(name: str) -> Path:
    """Path of the JSON file shipped with the package for a canned experiment."""
    path = Path(__file__).parent / "data" / f"{name}.json"
    if not path.is_file():
        raise FileNotFoundError(f"no shipped experiment named {name!r}")
    return path


def parse_experiment(path: str | Path) -> ExperimentSpec:
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as e:
        raise ParseError(str(path), f"cannot read file: {e.strerror}") from None
    return loads_experiment(text, str(path))


def parse_contexts(path: str | Path, dim: int, basis_labels=None) -> list[MeasurementContext]:
    """Read a standalone JSON list of contexts (for scans)."""
    path = Path(path)
    try:
        doc = json.loads(path.read_text(encoding="utf-8"))
    except OSError as e:
        raise ParseError(str(path), f"cannot read file: {e.strerror}") from None
    except json.JSONDecodeError as e:
        raise ParseError(f"{path}:{e.lineno}:{e.colno}", e.msg) from None
    r = _Reader(str(path))
    r.dim = dim
    r.labels = list(basis_labels) if basis_labels else None
    if isinstance(doc, dict):
        doc = doc.get("contexts")
    if not isinstance(doc, list) or not doc:
        r.fail("$", "expected a non-empty list of contexts")
    return [r.context(c, f"$[{i}]") for i, c in enumerate(doc)]


# -- writing --------------------------------------------------------------------

def _c(z: complex) -> list[float]:
    z = complex(z)
    return [z.real, z.imag]


def _vec(a: np.ndarray) -> list:
    return [_c(z) for z in a]


def _mat(m: np.ndarray) -> list:
    return [[_c(z) for z in row] for row in m]


def _outcome_doc(name: str, p: Projector, labels) -> dict:
    m = p.matrix
    diag = np.diag(m)
    if np.array_equal(m, np.diag(diag)) and np.all((diag == 0) | (diag == 1)):
        idx = [int(i) for i in np.flatnonzero(diag == 1)]
        return {"label": name, "basis": [labels[i] for i in idx] if labels else idx}
    if p.rank() == 1:
        return {"label": name, "ket": _vec(ray_of(p).amplitudes)}
    return {"label": name, "projector": _mat(m)}


def _context_doc(ctx: MeasurementContext, labels) -> dict:
    return {"label": ctx.label, "outcomes": [_outcome_doc(n, p, labels) for n, p in ctx]}


def to_document(spec: ExperimentSpec) -> dict:
    labels = list(spec.basis_labels) if spec.basis_labels else None
    doc: dict[str, Any] = {"name": spec.name, "dim": spec.dim}
    if labels:
        doc["basis_labels"] = labels
    doc["pre"] = _vec(spec.pre_state.amplitudes)
    pc = spec.post_context
    if pc.labels == ["post", "not_post"] and spec.accept_outcome == "post" and pc.projector("post").rank() == 1:
        doc["post"] = _vec(spec.post_state().amplitudes)
    elif spec.postselects:
        doc["post_context"] = _context_doc(pc, labels)
        doc["accept"] = spec.accept_outcome
    steps = []
    for s in spec.steps:
        if isinstance(s, Evolve):
            steps.append({"evolve": _mat(s.unitary.matrix)})
        else:
            entry: dict[str, Any] = {"measure": _context_doc(s.context, labels)}
            if not s.detector.is_perfect(s.context.labels):
                entry["efficiency"] = {n: s.detector.for_outcome(n) for n in s.context.labels}
            steps.append(entry)
    doc["steps"] = steps
    if spec.scan_contexts:
        doc["contexts"] = [_context_doc(c, labels) for c in spec.scan_contexts]
    return doc


def _is_leafy(x: Any) -> bool:
    """Lists of scalars or of ``[re, im]`` pairs are written on one line."""
    if not isinstance(x, list):
        return False
    return all(not isinstance(v, (list, dict)) for v in x) or all(
        isinstance(v, list) and all(not isinstance(w, (list, dict)) for w in v) for v in x
    )


def _render(x: Any, indent: int) -> str:
    pad = "  " * (indent + 1)
    if isinstance(x, dict):
        if not x:
            return "{}"
        body = ",\n".join(f"{pad}{json.dumps(k, ensure_ascii=False)}: {_render(v, indent + 1)}" for k, v in x.items())
        return "{\n" + body + "\n" + "  " * indent + "}"
    if isinstance(x, list) and x and not _is_leafy(x):
        body = ",\n".join(pad + _render(v, indent + 1) for v in x)
        return "[\n" + body + "\n" + "  " * indent + "]"
    return json.dumps(x, ensure_ascii=False, separators=(", ", ": "))


def dumps_experiment(spec: ExperimentSpec) -> str:
    return _render(to_document(spec), 0) + "\n"


def dump_experiment(spec: ExperimentSpec, path: str | Path) -> None:
    Path(path).write_text(dumps_experiment(spec), encoding="utf-8")
