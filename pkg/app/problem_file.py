"""JSON problem files: schema, loading and canonical dumping.

Complex numbers are [re, im] pairs (plain numbers are accepted as real),
matrices are row-major nested lists. See docs/PROBLEM_FILE.md.
"""

from __future__ import annotations

import json
import logging
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Annotated, Any, Literal, Optional, Union

import numpy as np
from pydantic import AfterValidator, BaseModel, ConfigDict, Field, ValidationError, model_validator

from app.boundary import BoundaryOperator, BoundaryTerm, IntegralTerm, PointTerm
from app.coefficients import CoefficientFunction, Interval
from app.errors import BvpError, ProblemFileError, ShapeMismatch
from app.export import decode_complex, dumps_json, encode_complex
from app.limits import (
    CONVERGENCE_TOL,
    DEFAULT_K_VALUES,
    PerturbationSequence,
    SobolevNorm,
    boundary_family,
    coefficient_family,
    constant_family,
)
from app.matfun import ExampleParams
from app.ode_core import DifferentialSystem
from app.tolerances import Tolerances, get_profile, tolerances_from_env

logger = logging.getLogger(__name__)

SCHEMA_VERSION = "1"


def _check_tree(value: Any) -> Any:
    """Nested lists whose leaves are numbers; shapes are checked when the array is built."""
    if isinstance(value, bool):
        raise ValueError("Booleans are not numbers here")
    if isinstance(value, (int, float)):
        return value
    if isinstance(value, list) and value:
        for item in value:
            _check_tree(item)
        return value
    raise ValueError(f"Expected a number or a non-empty nested list, got {value!r}")


NumericTree = Annotated[Any, AfterValidator(_check_tree)]
Exponent = Union[Literal["inf"], Annotated[float, Field(ge=1.0)]]


class _Model(BaseModel):
    model_config = ConfigDict(extra="forbid")


class IntervalModel(_Model):
    a: float
    b: float

    @model_validator(mode="after")
    def _ordered(self) -> "IntervalModel":
        if not (math.isfinite(self.a) and math.isfinite(self.b) and self.a < self.b):
            raise ValueError(f"interval needs finite a < b, got [{self.a}, {self.b}]")
        return self


class ConstantCoefficientModel(_Model):
    kind: Literal["constant"]
    value: NumericTree


class PolynomialCoefficientModel(_Model):
    kind: Literal["polynomial"]
    coefficients: NumericTree


class SampledCoefficientModel(_Model):
    kind: Literal["sampled"]
    grid: list[float] = Field(min_length=2)
    values: NumericTree
    order: int = Field(default=3, ge=1)


CoefficientModel = Annotated[
    Union[ConstantCoefficientModel, PolynomialCoefficientModel, SampledCoefficientModel],
    Field(discriminator="kind"),
]


class PointTermModel(_Model):
    type: Literal["point"]
    point: float
    order: float = Field(ge=0)
    alpha: NumericTree


class IntegralTermModel(_Model):
    type: Literal["integral"]
    derivative_order: int = Field(ge=0)
    kernel: CoefficientModel


TermModel = Annotated[Union[PointTermModel, IntegralTermModel], Field(discriminator="type")]


class BoundaryModel(_Model):
    l: Optional[int] = Field(default=None, ge=1)
    terms: list[TermModel] = Field(min_length=1)


class NormModel(_Model):
    n: Optional[int] = Field(default=None, ge=0)
    p: Optional[Exponent] = None


class PerturbationModel(_Model):
    family: Literal["coefficient", "boundary", "constant"]
    rate: float = Field(default=1.0, gt=0)
    k_values: list[int] = Field(default_factory=lambda: list(DEFAULT_K_VALUES), min_length=1)
    # coefficient: one m x m matrix (or null) per A_j; boundary: one l x m matrix (or null) per term
    deltas: list[Optional[NumericTree]] = Field(default_factory=list)
    expect_converge: bool = False
    convergence_tol: float = Field(default=CONVERGENCE_TOL, gt=0)
    norm: NormModel = Field(default_factory=NormModel)


class TolerancesModel(_Model):
    profile: Optional[str] = None
    rtol: Optional[float] = Field(default=None, gt=0)
    atol: Optional[float] = Field(default=None, gt=0)
    quad_tol: Optional[float] = Field(default=None, gt=0)
    rank_tol: Optional[float] = Field(default=None, gt=0)
    rank_atol: Optional[float] = Field(default=None, ge=0)
    consistency_tol: Optional[float] = Field(default=None, gt=0)
    gl_nodes: Optional[int] = Field(default=None, ge=2)
    max_panels: Optional[int] = Field(default=None, ge=1)


class ProblemFileModel(_Model):
    version: Literal["1"]
    interval: IntervalModel
    m: int = Field(ge=1)
    r: int = Field(ge=1)
    n: int = Field(ge=0)
    p: Exponent = 2.0
    coefficients: list[CoefficientModel]
    boundary: BoundaryModel
    f: Optional[CoefficientModel] = None
    c: Optional[NumericTree] = None
    perturbation: Optional[PerturbationModel] = None
    tolerances: TolerancesModel = Field(default_factory=TolerancesModel)

    @model_validator(mode="after")
    def _orders(self) -> "ProblemFileModel":
        if len(self.coefficients) != self.r:
            raise ValueError(f"order r={self.r} needs {self.r} coefficients, got {len(self.coefficients)}")
        return self


class ExamplePointModel(_Model):
    point: float
    order: float = Field(ge=0)
    alpha: NumericTree


class ExampleParamsModel(_Model):
    version: Literal["1"] = "1"
    interval: IntervalModel
    n: int = Field(ge=0)
    A: Optional[NumericTree] = None
    alphas: list[NumericTree] = Field(default_factory=list)
    betas: list[NumericTree] = Field(default_factory=list)
    point_terms: list[ExamplePointModel] = Field(default_factory=list)
    phi: Optional[CoefficientModel] = None


# -- building -------------------------------------------------------------------


def _array(data: Any, ndim: int, shape: tuple[int, ...] | None, what: str) -> np.ndarray:
    try:
        arr = decode_complex(data, ndim)
    except ValueError as e:
        raise ProblemFileError(f"{what}: {e}") from e
    if shape is not None and arr.shape != shape:
        raise ProblemFileError(f"{what} has shape {arr.shape}, expected {shape}")
    return arr


def _coefficient(model: Any, interval: Interval, shape: tuple[int, ...], what: str) -> CoefficientFunction:
    rank = len(shape)
    if model.kind == "constant":
        return CoefficientFunction.constant(_array(model.value, rank, shape, what), interval)
    if model.kind == "polynomial":
        coeffs = _array(model.coefficients, rank + 1, None, what)
        if coeffs.shape[1:] != shape:
            raise ProblemFileError(f"{what} has terms of shape {coeffs.shape[1:]}, expected {shape}")
        return CoefficientFunction.polynomial(coeffs, interval)
    values = _array(model.values, rank + 1, (len(model.grid),) + shape, what)
    return CoefficientFunction.sampled(model.grid, values, interval, model.order)


def _infer_l(model: BoundaryModel) -> int:
    if model.l is not None:
        return model.l
    first = model.terms[0]
    data = first.alpha if isinstance(first, PointTermModel) else None
    if data is None:
        kernel = first.kernel
        data = {"constant": lambda: kernel.value, "polynomial": lambda: kernel.coefficients[0],
                "sampled": lambda: kernel.values[0]}[kernel.kind]()
    if not isinstance(data, list):
        raise ProblemFileError("Cannot infer l from the first boundary term; give boundary.l")
    return len(data)


def _exponent(p: Any) -> float:
    return math.inf if p == "inf" else float(p)


@dataclass(eq=False)
class Problem:
    """A loaded problem file: L, B and everything the subcommands need."""

    system: DifferentialSystem
    B: BoundaryOperator
    p: float
    tolerances: Tolerances
    f: CoefficientFunction | None = None
    c: np.ndarray | None = None
    perturbation: PerturbationModel | None = None
    tolerance_overrides: TolerancesModel | None = None

    def norm(self) -> SobolevNorm:
        norm_model = self.perturbation.norm if self.perturbation is not None else NormModel()
        n = self.system.n if norm_model.n is None else norm_model.n
        return SobolevNorm(n, self.p if norm_model.p is None else _exponent(norm_model.p))

    def sequence(self) -> PerturbationSequence:
        if self.perturbation is None:
            raise ProblemFileError("Problem file has no perturbation block")
        block = self.perturbation
        system, B = self.system, self.B
        try:
            if block.family == "constant":
                return constant_family(system, B, k_values=block.k_values)
            if block.family == "coefficient":
                deltas = [
                    None if d is None else _array(d, 2, (system.m, system.m), f"perturbation.deltas[{j}]")
                    for j, d in enumerate(block.deltas)
                ]
                return coefficient_family(system, B, deltas, rate=block.rate, k_values=block.k_values)
            deltas = [
                None if d is None else _array(d, 2, (B.l, system.m), f"perturbation.deltas[{j}]")
                for j, d in enumerate(block.deltas)
            ]
            return boundary_family(system, B, deltas, rate=block.rate, k_values=block.k_values)
        except ShapeMismatch as e:
            raise ProblemFileError(f"perturbation: {e}") from e

    def to_dict(self) -> dict[str, Any]:
        """Canonical form: every array as nested [re, im] pairs, defaults spelled out."""
        system = self.system.to_dict()
        out: dict[str, Any] = {
            "version": SCHEMA_VERSION,
            "interval": system["interval"],
            "m": system["m"],
            "r": system["r"],
            "n": system["n"],
            "p": "inf" if math.isinf(self.p) else self.p,
            "coefficients": system["coefficients"],
            "boundary": {"l": self.B.l, "terms": [t.to_dict() for t in self.B.terms]},
        }
        if self.f is not None:
            out["f"] = self.f.to_dict()
        if self.c is not None:
            out["c"] = encode_complex(self.c)
        if self.perturbation is not None:
            out["perturbation"] = self.perturbation.model_dump(mode="json")
        if self.tolerance_overrides is not None:
            out["tolerances"] = self.tolerance_overrides.model_dump(mode="json", exclude_none=True)
        return out


def file_tolerances(model: TolerancesModel) -> Tolerances:
    """The file's profile (or the environment's) with the file's explicit values on top."""
    base = get_profile(model.profile) if model.profile else tolerances_from_env()
    return base.updated(**model.model_dump(exclude={"profile"}))


def build_problem(model: ProblemFileModel) -> Problem:
    interval = Interval(model.interval.a, model.interval.b)
    m = model.m
    try:
        coefficients = tuple(
            _coefficient(c, interval, (m, m), f"coefficients[{k}]") for k, c in enumerate(model.coefficients)
        )
        system = DifferentialSystem(interval, m, model.r, model.n, coefficients)
        l = _infer_l(model.boundary)
        terms: list[BoundaryTerm] = []
        for idx, term in enumerate(model.boundary.terms):
            what = f"boundary.terms[{idx}]"
            if isinstance(term, PointTermModel):
                terms.append(PointTerm(term.point, term.order, _array(term.alpha, 2, (l, m), what)))
            else:
                terms.append(IntegralTerm(_coefficient(term.kernel, interval, (l, m), what), term.derivative_order))
        B = BoundaryOperator(l, tuple(terms), system.signature, interval)
        f = None if model.f is None else _coefficient(model.f, interval, (m,), "f")
        if f is not None and not f.supports(model.n):
            raise ProblemFileError(
                f"f supplies {f.max_derivative} derivatives, smoothness index n={model.n} needs {model.n}"
            )
        c = None if model.c is None else _array(model.c, 1, (l,), "c")
        tolerances = file_tolerances(model.tolerances)
    except ProblemFileError:
        raise
    except BvpError as e:
        raise ProblemFileError(str(e)) from e
    return Problem(system, B, _exponent(model.p), tolerances, f, c, model.perturbation, model.tolerances)


def _read(path: Path) -> Any:
    text = Path(path).read_text(encoding="utf-8")
    try:
        return json.loads(text)
    except json.JSONDecodeError as e:
        raise ProblemFileError(f"{path}: not valid JSON ({e})") from e


def _validate(model_cls: type[_Model], payload: Any, source: str) -> Any:
    try:
        return model_cls.model_validate(payload)
    except ValidationError as e:
        raise ProblemFileError(f"{source}: {e}") from e


def parse_problem(payload: Any, source: str = "<problem>") -> Problem:
    return build_problem(_validate(ProblemFileModel, payload, source))


def load_problem(path: Path) -> Problem:
    """Read, validate and build a problem file. OSError propagates unchanged."""
    problem = parse_problem(_read(path), str(path))
    logger.debug("Loaded %s: signature %s, l=%d", path, problem.system.signature, problem.B.l)
    return problem


def dump_problem(problem: Problem) -> str:
    return dumps_json(problem.to_dict())


def parse_example_params(payload: Any, source: str = "<params>") -> ExampleParams:
    model: ExampleParamsModel = _validate(ExampleParamsModel, payload, source)
    interval = Interval(model.interval.a, model.interval.b)
    try:
        A = None if model.A is None else _array(model.A, 2, None, "A")
        alphas = tuple(_array(a, 2, None, f"alphas[{k}]") for k, a in enumerate(model.alphas))
        betas = tuple(_array(b, 2, None, f"betas[{k}]") for k, b in enumerate(model.betas))
        points = tuple(
            (p.point, p.order, _array(p.alpha, 2, None, f"point_terms[{k}]"))
            for k, p in enumerate(model.point_terms)
        )
        phi = None
        if model.phi is not None:
            mats = list(alphas) + list(betas) + [p[2] for p in points]
            if not mats:
                raise ProblemFileError("phi needs at least one alpha matrix to fix its shape")
            phi = _coefficient(model.phi, interval, mats[0].shape, "phi")
        params = ExampleParams(interval, model.n, A, alphas, betas, points, phi)
    except ProblemFileError:
        raise
    except BvpError as e:
        raise ProblemFileError(str(e)) from e
    return params


def load_example_params(path: Path) -> ExampleParams:
    return parse_example_params(_read(path), str(path))
