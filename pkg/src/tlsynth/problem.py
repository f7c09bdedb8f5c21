"""Problem files: a YAML document describing system, predicates, formula and parameters.

Schema (all keys required unless marked optional)::

    dimension: N
    state_space: {lo: [..N], hi: [..N]}
    dynamics:                       # h(x) = sum coeff * prod x_k^monomial_k
      - {monomial: [0|1 ..N], coeff: [..N]}
    B: [[..m] ..N]
    inputs: {lo: [..m], hi: [..m], G: [[..m]], g: [..]}   # lo/hi or G/g, or both
    propositions: [names]           # optional; fixes the letter order
    predicates: {name: [{lo: [..N], hi: [..N]}, ...]}
    default: name                   # labels cells outside every predicate box
    formula: "text"
    T: float
    d: float
    eps: float
    mode: full | deterministic      # optional, default full
    seed: int                       # optional, default 0
    max_exit_size: int              # optional, caps exit-set size in full mode
    sim: {step, event_tol, max_time}                                   # optional
    refinement: {swarm_size, pso_iters, inertia, cognitive, social, max_rounds}  # optional
"""

from __future__ import annotations

from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path
from typing import Any

import yaml

from .abstraction import MODES
from .formula import Formula, FormulaError, Proposition, parse, propositions
from .geometry import (ControlSystem, GeometryError, InputSet, MultiAffineField, PartitionGrid, Rect,
                       initial_grid)
from .refinement import RefinementConfig
from .sim import SimConfig


class ProblemError(ValueError):
    pass


class ParseError(ProblemError):
    def __init__(self, message: str, line: int | None = None, field: str | None = None):
        where = []
        if line is not None:
            where.append(f"line {line}")
        if field is not None:
            where.append(f"field {field!r}")
        super().__init__(f"{message} ({', '.join(where)})" if where else message)
        self.line = line
        self.field = field


class ValidationError(ProblemError):
    pass


@dataclass
class ProblemSpec:
    system: ControlSystem
    props: list[Proposition]
    predicates: dict[int, list[Rect]]
    default: int
    formula_text: str
    formula: Formula
    T: float
    d: float
    eps: float
    mode: str = "full"
    seed: int = 0
    max_exit_size: int | None = None
    sim: SimConfig = field(default_factory=SimConfig)
    refinement: dict[str, Any] = field(default_factory=dict)

    @property
    def names(self) -> list[str]:
        return [p.name for p in self.props]

    def grid(self) -> PartitionGrid:
        return initial_grid(self.system.X, self.predicates, self.default)

    def refinement_config(self, mode: str | None = None, seed: int | None = None) -> RefinementConfig:
        return RefinementConfig(d=self.d, T=self.T, eps=self.eps, mode=mode or self.mode,
                                seed=self.seed if seed is None else seed,
                                max_exit_size=self.max_exit_size, **self.refinement)


def case_study_path() -> Path:
    return Path(str(resources.files("tlsynth") / "problems" / "case_study.yaml"))


def load(path) -> ProblemSpec:
    text = Path(path).read_text()
    try:
        doc = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        mark = getattr(exc, "problem_mark", None)
        raise ParseError(f"malformed YAML: {getattr(exc, 'problem', exc)}",
                         line=None if mark is None else mark.line + 1) from exc
    if not isinstance(doc, dict):
        raise ParseError("top level must be a mapping")
    return from_dict(doc)


def _get(doc: dict, key: str, where: str = ""):
    if key not in doc:
        raise ParseError("missing key", field=where + key)
    return doc[key]


def _floats(value, name: str, length: int | None = None) -> tuple[float, ...]:
    try:
        out = tuple(float(v) for v in value)
    except (TypeError, ValueError) as exc:
        raise ParseError("expected a list of numbers", field=name) from exc
    if length is not None and len(out) != length:
        raise ValidationError(f"{name} must have {length} entries, got {len(out)}")
    return out


def _box(value, name: str, n: int) -> Rect:
    if not isinstance(value, dict):
        raise ParseError("a box needs 'lo' and 'hi'", field=name)
    lo = _floats(_get(value, "lo", name + "."), name + ".lo", n)
    hi = _floats(_get(value, "hi", name + "."), name + ".hi", n)
    try:
        return Rect(lo, hi)
    except GeometryError as exc:
        raise ValidationError(f"{name}: {exc}") from exc


def _positive(doc: dict, key: str) -> float:
    v = _get(doc, key)
    try:
        v = float(v)
    except (TypeError, ValueError) as exc:
        raise ParseError("expected a number", field=key) from exc
    if not v > 0:
        raise ValidationError(f"{key} must be positive, got {v}")
    return v


def from_dict(doc: dict) -> ProblemSpec:
    n = _get(doc, "dimension")
    if not isinstance(n, int) or n < 1:
        raise ValidationError("dimension must be a positive integer")
    X = _box(_get(doc, "state_space"), "state_space", n)

    terms = {}
    for k, term in enumerate(_get(doc, "dynamics")):
        name = f"dynamics[{k}]"
        if not isinstance(term, dict):
            raise ParseError("each term needs 'monomial' and 'coeff'", field=name)
        mono = tuple(int(e) for e in _get(term, "monomial", name + "."))
        if mono in terms:
            raise ValidationError(f"{name}: duplicate monomial {mono}")
        terms[mono] = _floats(_get(term, "coeff", name + "."), name + ".coeff", n)
    try:
        h = MultiAffineField(n, n, terms)
    except GeometryError as exc:
        raise ValidationError(f"dynamics: {exc}") from exc

    B = [_floats(row, "B", None) for row in _get(doc, "B")]
    inputs = _get(doc, "inputs")
    if not isinstance(inputs, dict):
        raise ParseError("expected a mapping", field="inputs")
    m = len(B[0]) if B else 0
    lo = _floats(inputs["lo"], "inputs.lo", m) if "lo" in inputs else None
    hi = _floats(inputs["hi"], "inputs.hi", m) if "hi" in inputs else None
    G = tuple(_floats(r, "inputs.G", m) for r in inputs.get("G", []))
    g = _floats(inputs.get("g", []), "inputs.g", len(G))
    if lo is not None and hi is not None and any(a > b for a, b in zip(lo, hi)):
        raise ValidationError("inputs.lo must not exceed inputs.hi")
    if (lo is None or hi is None) and not G:
        raise ValidationError("the input set must be bounded: give lo and hi or halfspaces G, g")
    try:
        system = ControlSystem(h, B, InputSet(lo, hi, G, g), X)
    except GeometryError as exc:
        raise ValidationError(str(exc)) from exc

    preds_doc = _get(doc, "predicates")
    if not isinstance(preds_doc, dict):
        raise ParseError("expected a mapping of name -> boxes", field="predicates")
    default_name = str(_get(doc, "default"))
    names = [str(x) for x in doc.get("propositions", [])]
    if not names:
        names = [str(k) for k in preds_doc] + [default_name]
    if len(set(names)) != len(names):
        raise ValidationError("proposition names must be unique")
    index = {name: i for i, name in enumerate(names)}
    for name in list(preds_doc) + [default_name]:
        if str(name) not in index:
            raise ValidationError(f"proposition {name!r} is not declared in 'propositions'")
    if default_name in preds_doc:
        raise ValidationError("the default proposition cannot own predicate boxes")
    predicates = {}
    for name, boxes in preds_doc.items():
        predicates[index[str(name)]] = [_box(b, f"predicates.{name}[{k}]", n) for k, b in enumerate(boxes)]
    try:
        initial_grid(X, predicates, index[default_name])
    except GeometryError as exc:
        raise ValidationError(str(exc)) from exc

    props = [Proposition(name, i) for i, name in enumerate(names)]
    formula_text = str(_get(doc, "formula"))
    try:
        formula = parse(formula_text, props)
    except FormulaError as exc:
        raise ValidationError(f"formula: {exc}") from exc
    unused = propositions(formula) - set(range(len(props)))
    if unused:
        raise ValidationError(f"formula uses undeclared propositions {sorted(unused)}")

    mode = str(doc.get("mode", "full"))
    if mode not in MODES:
        raise ValidationError(f"mode must be one of {MODES}")
    try:
        sim = SimConfig(**(doc.get("sim") or {}))
    except (TypeError, ValueError) as exc:
        raise ValidationError(f"sim: {exc}") from exc
    refinement = dict(doc.get("refinement") or {})
    allowed = {"swarm_size", "pso_iters", "inertia", "cognitive", "social", "max_rounds"}
    if set(refinement) - allowed:
        raise ValidationError(f"refinement: unknown keys {sorted(set(refinement) - allowed)}")
    spec = ProblemSpec(system=system, props=props, predicates=predicates, default=index[default_name],
                       formula_text=formula_text, formula=formula,
                       T=_positive(doc, "T"), d=_positive(doc, "d"), eps=_positive(doc, "eps"),
                       mode=mode, seed=int(doc.get("seed", 0)),
                       max_exit_size=doc.get("max_exit_size"), sim=sim, refinement=refinement)
    try:
        spec.refinement_config()
    except (TypeError, ValueError) as exc:
        raise ValidationError(f"refinement: {exc}") from exc
    return spec
