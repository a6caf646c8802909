"""Closed-form scalar fields K(x1..x5) on the ambient space of S^4.

Expressions are parsed into an immutable tree. Derivative trees are produced
structurally (one tree per partial derivative), and all trees evaluate on
arrays of points with shape (..., 5).

Grammar (highest precedence first)::

    atom     := number | x1..x5 | exp(expr) | sin(expr) | cos(expr) | ( expr )
    power    := atom ^ integer          (right associative)
    unary    := - power | + power
    product  := unary (* | /) unary ...
    sum      := product (+ | -) product ...
"""

import logging
import math
import re
from abc import ABC, abstractmethod
from dataclasses import dataclass, field
from typing import List, Optional, Sequence, Tuple

import numpy as np
import pyparsing as pp
from scipy.optimize import minimize

from ..utils.constants import (
    AMBIENT_DIM,
    DEFAULT_SEED,
    DENOMINATOR_TOL,
    POSITIVITY_POLISH,
    POSITIVITY_SAMPLES,
    SPHERE_DIM,
)
from ..utils.exceptions import (
    EvaluationDomain,
    FieldSyntaxError,
    NotPositive,
    UnknownIdentifier,
)
from ..utils.geo_utils import normalize, sobol_sphere_points
from .SphereModel import ManifoldModel, SpherePoint, TangentFrame

logger = logging.getLogger(__name__)

FUNCTIONS = ("exp", "sin", "cos")
_VARIABLE_RE = re.compile(r"^x([1-5])$")


# Expression tree ======================================================================


class Node(ABC):
    @abstractmethod
    def evaluate(self, X: np.ndarray, strict: bool) -> np.ndarray:
        ...

    @abstractmethod
    def diff(self, k: int) -> "Node":
        """Partial derivative with respect to x_{k+1}."""

    @abstractmethod
    def substitute(self, variables: Sequence["Node"]) -> "Node":
        ...


@dataclass(frozen=True)
class Const(Node):
    value: float

    def evaluate(self, X, strict):
        return np.full(X.shape[:-1], self.value)

    def diff(self, k):
        return ZERO

    def substitute(self, variables):
        return self

    def __str__(self):
        return repr(self.value) if self.value >= 0 else f"({self.value!r})"


ZERO = Const(0.0)
ONE = Const(1.0)


@dataclass(frozen=True)
class Var(Node):
    index: int  # 0-based

    def evaluate(self, X, strict):
        return X[..., self.index]

    def diff(self, k):
        return ONE if k == self.index else ZERO

    def substitute(self, variables):
        return variables[self.index]

    def __str__(self):
        return f"x{self.index + 1}"


@dataclass(frozen=True)
class Neg(Node):
    arg: Node

    def evaluate(self, X, strict):
        return -self.arg.evaluate(X, strict)

    def diff(self, k):
        return neg(self.arg.diff(k))

    def substitute(self, variables):
        return neg(self.arg.substitute(variables))

    def __str__(self):
        return f"(-{self.arg})"


@dataclass(frozen=True)
class Add(Node):
    left: Node
    right: Node

    def evaluate(self, X, strict):
        return self.left.evaluate(X, strict) + self.right.evaluate(X, strict)

    def diff(self, k):
        return add(self.left.diff(k), self.right.diff(k))

    def substitute(self, variables):
        return add(self.left.substitute(variables), self.right.substitute(variables))

    def __str__(self):
        return f"({self.left} + {self.right})"


@dataclass(frozen=True)
class Sub(Node):
    left: Node
    right: Node

    def evaluate(self, X, strict):
        return self.left.evaluate(X, strict) - self.right.evaluate(X, strict)

    def diff(self, k):
        return sub(self.left.diff(k), self.right.diff(k))

    def substitute(self, variables):
        return sub(self.left.substitute(variables), self.right.substitute(variables))

    def __str__(self):
        return f"({self.left} - {self.right})"


@dataclass(frozen=True)
class Mul(Node):
    left: Node
    right: Node

    def evaluate(self, X, strict):
        return self.left.evaluate(X, strict) * self.right.evaluate(X, strict)

    def diff(self, k):
        return add(mul(self.left.diff(k), self.right), mul(self.left, self.right.diff(k)))

    def substitute(self, variables):
        return mul(self.left.substitute(variables), self.right.substitute(variables))

    def __str__(self):
        return f"({self.left} * {self.right})"


def _checked_denominator(den: np.ndarray, X: np.ndarray, strict: bool) -> np.ndarray:
    bad = np.abs(den) < DENOMINATOR_TOL
    if np.any(bad):
        if strict:
            idx = np.argwhere(bad)[0]
            point = X[tuple(idx)] if X.ndim > 1 else X
            raise EvaluationDomain(np.asarray(point).tolist())
        den = np.where(bad, np.nan, den)
    return den


@dataclass(frozen=True)
class Div(Node):
    left: Node
    right: Node

    def evaluate(self, X, strict):
        den = _checked_denominator(self.right.evaluate(X, strict), X, strict)
        return self.left.evaluate(X, strict) / den

    def diff(self, k):
        # (u'v - uv') / v^2
        num = sub(mul(self.left.diff(k), self.right), mul(self.left, self.right.diff(k)))
        return div(num, power(self.right, 2))

    def substitute(self, variables):
        return div(self.left.substitute(variables), self.right.substitute(variables))

    def __str__(self):
        return f"({self.left} / {self.right})"


@dataclass(frozen=True)
class Pow(Node):
    base: Node
    exponent: int

    def evaluate(self, X, strict):
        b = self.base.evaluate(X, strict)
        if self.exponent < 0:
            b = _checked_denominator(b, X, strict)
            return 1.0 / b ** (-self.exponent)
        return b**self.exponent

    def diff(self, k):
        return mul(mul(Const(float(self.exponent)), power(self.base, self.exponent - 1)), self.base.diff(k))

    def substitute(self, variables):
        return power(self.base.substitute(variables), self.exponent)

    def __str__(self):
        return f"({self.base}^{self.exponent})" if self.exponent >= 0 else f"({self.base}^({self.exponent}))"


@dataclass(frozen=True)
class Func(Node):
    name: str
    arg: Node

    def evaluate(self, X, strict):
        return _UFUNCS[self.name](self.arg.evaluate(X, strict))

    def diff(self, k):
        inner = self.arg.diff(k)
        if self.name == "exp":
            outer = self
        elif self.name == "sin":
            outer = func("cos", self.arg)
        else:
            outer = neg(func("sin", self.arg))
        return mul(outer, inner)

    def substitute(self, variables):
        return func(self.name, self.arg.substitute(variables))

    def __str__(self):
        return f"{self.name}({self.arg})"


_UFUNCS = {"exp": np.exp, "sin": np.sin, "cos": np.cos}
_MATHFUNCS = {"exp": math.exp, "sin": math.sin, "cos": math.cos}


# constant-folding constructors


def _is_const(n: Node, value: Optional[float] = None) -> bool:
    return isinstance(n, Const) and (value is None or n.value == value)


def neg(a: Node) -> Node:
    if _is_const(a):
        return Const(-a.value)
    if isinstance(a, Neg):
        return a.arg
    return Neg(a)


def add(a: Node, b: Node) -> Node:
    if _is_const(a) and _is_const(b):
        return Const(a.value + b.value)
    if _is_const(a, 0.0):
        return b
    if _is_const(b, 0.0):
        return a
    return Add(a, b)


def sub(a: Node, b: Node) -> Node:
    if _is_const(a) and _is_const(b):
        return Const(a.value - b.value)
    if _is_const(b, 0.0):
        return a
    if _is_const(a, 0.0):
        return neg(b)
    return Sub(a, b)


def mul(a: Node, b: Node) -> Node:
    if _is_const(a) and _is_const(b):
        return Const(a.value * b.value)
    if _is_const(a, 0.0) or _is_const(b, 0.0):
        return ZERO
    if _is_const(a, 1.0):
        return b
    if _is_const(b, 1.0):
        return a
    return Mul(a, b)


def div(a: Node, b: Node) -> Node:
    if _is_const(a, 0.0) and not _is_const(b, 0.0):
        return ZERO
    if _is_const(b, 1.0):
        return a
    if _is_const(a) and _is_const(b) and b.value != 0.0:
        return Const(a.value / b.value)
    return Div(a, b)


def power(a: Node, n: int) -> Node:
    if n == 0:
        return ONE
    if n == 1:
        return a
    if _is_const(a) and (n > 0 or a.value != 0.0):
        return Const(float(a.value) ** n)
    return Pow(a, n)


def func(name: str, a: Node) -> Node:
    if _is_const(a):
        return Const(_MATHFUNCS[name](a.value))
    return Func(name, a)


# Parser ===============================================================================


pp.ParserElement.enable_packrat()

_OPERAND_EXPECTED = ("number", "x1..x5", "exp(", "sin(", "cos(", "(", "-", "+")
_OPERATOR_EXPECTED = ("+", "-", "*", "/", "^", ")", "end of input")


def _fold_unary(s, loc, toks):
    items = list(toks[0])
    node = items[-1]
    for op in reversed(items[:-1]):
        if op == "-":
            node = neg(node)
    return node


def _fold_left(s, loc, toks):
    items = list(toks[0])
    node = items[0]
    for op, rhs in zip(items[1::2], items[2::2]):
        node = {"+": add, "-": sub, "*": mul, "/": div}[op](node, rhs)
    return node


def _fold_power(s, loc, toks):
    items = list(toks[0])
    node = items[-1]
    for base in reversed(items[:-1:2]):
        node = _integer_power(base, node, s, loc)
    return node


def _integer_power(base: Node, exponent: Node, s: str, loc: int) -> Node:
    if not _is_const(exponent) or float(exponent.value) != int(exponent.value):
        raise FieldSyntaxError(s, loc, ["integer exponent"])
    return power(base, int(exponent.value))


def _number(s, loc, toks):
    return Const(float(toks[0]))


def _identifier(s, loc, toks):
    m = _VARIABLE_RE.match(toks[0])
    if m is None:
        raise UnknownIdentifier(toks[0], loc)
    return Var(int(m.group(1)) - 1)


def _call(s, loc, toks):
    return func(toks[0], toks[1])


def _build_grammar() -> pp.ParserElement:
    expr = pp.Forward()
    number = pp.Regex(r"(\d+\.\d*|\.\d+|\d+)([eE][+-]?\d+)?").set_parse_action(_number)
    lpar, rpar = pp.Suppress("("), pp.Suppress(")")
    call = (pp.MatchFirst([pp.Keyword(f) for f in FUNCTIONS]) + lpar + expr + rpar).set_parse_action(_call)
    identifier = pp.Word(pp.alphas + "_", pp.alphanums + "_").set_parse_action(_identifier)
    operand = number | call | identifier
    expr <<= pp.infix_notation(
        operand,
        [
            (pp.Literal("^"), 2, pp.OpAssoc.RIGHT, _fold_power),
            (pp.one_of("- +"), 1, pp.OpAssoc.RIGHT, _fold_unary),
            (pp.one_of("* /"), 2, pp.OpAssoc.LEFT, _fold_left),
            (pp.one_of("+ -"), 2, pp.OpAssoc.LEFT, _fold_left),
        ],
    )
    return expr


_GRAMMAR = _build_grammar()


def _expected_at(src: str, loc: int) -> Tuple[str, ...]:
    before = src[:loc].rstrip()
    if not before or before[-1] in "+-*/^(":
        return _OPERAND_EXPECTED
    return _OPERATOR_EXPECTED


# Field ================================================================================


@dataclass(frozen=True)
class IntrinsicDerivatives:
    """Derivatives of K restricted to S^4, in the components of a TangentFrame."""

    value: float
    grad: np.ndarray
    hess: np.ndarray
    laplace_beltrami: float


class ScalarField:
    """Parsed scalar field K with structural first and second derivatives.

    Parameters
    ----------
    ast : Node
        Expression tree over x1..x5.
    source : str
        Source text the tree was parsed from (or a rendering of it).
    """

    def __init__(self, ast: Node, source: str):
        self.ast = ast
        self.source = source
        self._grad_trees = tuple(ast.diff(k) for k in range(AMBIENT_DIM))
        hess = [[None] * AMBIENT_DIM for _ in range(AMBIENT_DIM)]
        for i in range(AMBIENT_DIM):
            for j in range(i, AMBIENT_DIM):
                hess[i][j] = self._grad_trees[i].diff(j)
                hess[j][i] = hess[i][j]
        self._hess_trees = tuple(tuple(row) for row in hess)

    def __repr__(self):
        return f"ScalarField({self.source!r})"

    def __eq__(self, other):
        return isinstance(other, ScalarField) and self.ast == other.ast

    def __hash__(self):
        return hash(self.ast)

    @property
    def is_constant(self) -> bool:
        return isinstance(self.ast, Const)

    @property
    def is_affine(self) -> bool:
        return all(_is_const(t, 0.0) for row in self._hess_trees for t in row)

    def value(self, X: np.ndarray, strict: bool = True) -> np.ndarray:
        X = np.asarray(X, dtype=float)
        return self.ast.evaluate(X, strict)

    def gradient(self, X: np.ndarray, strict: bool = True) -> np.ndarray:
        X = np.asarray(X, dtype=float)
        return np.stack([t.evaluate(X, strict) for t in self._grad_trees], axis=-1)

    def hessian(self, X: np.ndarray, strict: bool = True) -> np.ndarray:
        X = np.asarray(X, dtype=float)
        out = np.empty(X.shape[:-1] + (AMBIENT_DIM, AMBIENT_DIM))
        for i in range(AMBIENT_DIM):
            for j in range(i, AMBIENT_DIM):
                out[..., i, j] = self._hess_trees[i][j].evaluate(X, strict)
                out[..., j, i] = out[..., i, j]
        return out

    def __call__(self, p) -> float:
        return float(self.value(np.asarray(p, dtype=float)))

    # derived fields, used for covariance checks

    def scaled(self, c: float) -> "ScalarField":
        return ScalarField(mul(Const(float(c)), self.ast), f"{c!r}*({self.source})")

    def rotated(self, Q: np.ndarray) -> "ScalarField":
        """The field x -> K(Q^T x), whose critical set is Q times that of K."""
        Q = np.asarray(Q, dtype=float)
        variables = []
        for k in range(AMBIENT_DIM):
            term = ZERO
            for j in range(AMBIENT_DIM):
                term = add(term, mul(Const(float(Q[j, k])), Var(j)))
            variables.append(term)
        ast = self.ast.substitute(variables)
        return ScalarField(ast, str(ast))


def parse_field(src: str) -> ScalarField:
    """Parse an expression for K over x1..x5.

    Raises
    ------
    FieldSyntaxError
        With the failing position and the set of tokens expected there.
    UnknownIdentifier
        For names other than x1..x5 and the functions exp, sin, cos.
    """
    if src is None or not src.strip():
        raise FieldSyntaxError(src or "", 0, _OPERAND_EXPECTED)
    try:
        ast = _GRAMMAR.parse_string(src, parse_all=True)[0]
    except pp.ParseBaseException as e:
        raise FieldSyntaxError(src, e.loc, _expected_at(src, e.loc)) from None
    return ScalarField(ast, src.strip())


def ambient_derivatives(f: ScalarField, p) -> Tuple[float, np.ndarray, np.ndarray]:
    """Value, 5-gradient and 5x5 Hessian of K at an ambient point p."""
    p = np.asarray(p, dtype=float)
    return float(f.value(p)), f.gradient(p), f.hessian(p)


def intrinsic_derivatives(f: ScalarField, a: SpherePoint, frame: TangentFrame) -> IntrinsicDerivatives:
    """Restriction of K to S^4 at a, in the components of `frame`.

    hess_ij = v_i^T H v_j - <grad K, a> delta_ij, where the second term is the
    second fundamental form of the unit sphere.
    """
    value, grad, hess = ambient_derivatives(f, a.coords)
    V = frame.vectors
    g = V @ grad
    h = V @ hess @ V.T - float(np.dot(grad, a.coords)) * np.eye(SPHERE_DIM)
    h = 0.5 * (h + h.T)
    return IntrinsicDerivatives(value=value, grad=g, hess=h, laplace_beltrami=float(np.trace(h)))


@dataclass(frozen=True)
class PositivityReport:
    min_value: float
    location: List[float]
    samples: int
    polished: int = field(default=POSITIVITY_POLISH)

    def to_dict(self) -> dict:
        return {
            "min_value": self.min_value,
            "location": self.location,
            "samples": self.samples,
            "polished": self.polished,
        }


def _sphere_objective(f: ScalarField):
    def fun(z):
        n = np.linalg.norm(z)
        x = z / n
        return float(f.value(x)), (f.gradient(x) - np.dot(f.gradient(x), x) * x) / n

    return fun


def validate_positivity(
    f: ScalarField,
    model: ManifoldModel,
    samples: int = POSITIVITY_SAMPLES,
    seed: int = DEFAULT_SEED,
    polish: int = POSITIVITY_POLISH,
) -> PositivityReport:
    """Estimate min K over S^4 and reject fields that are not positive.

    A Sobol sample of the sphere is evaluated; the `polish` worst samples are
    refined by BFGS on z -> K(z/|z|).
    """
    if samples < 1:
        raise ValueError(f"samples must be >= 1, got {samples}.")
    X = sobol_sphere_points(samples, seed)
    values = f.value(X, strict=False)
    values = np.where(np.isfinite(values), values, -np.inf)
    worst = np.argsort(values, kind="stable")[: min(polish, samples)]

    best_value = float(values[worst[0]])
    best_x = X[worst[0]]
    fun = _sphere_objective(f)
    for idx in worst:
        if not np.isfinite(values[idx]):
            continue
        try:
            res = minimize(fun, X[idx], jac=True, method="BFGS", options={"gtol": 1e-12, "maxiter": 500})
        except EvaluationDomain:
            logger.debug(f"positivity polish from sample {idx} hit a pole of K; skipped")
            continue
        x = normalize(res.x)
        v = float(f.value(x, strict=False))
        if np.isfinite(v) and v < best_value:
            best_value, best_x = v, x

    logger.info(f"min K over S^4 ~ {best_value:.6g} ({model.name}, {samples} samples)")
    if not best_value > 0:
        raise NotPositive(best_value, best_x.tolist())
    return PositivityReport(
        min_value=best_value,
        location=best_x.tolist(),
        samples=samples,
        polished=int(len(worst)),
    )
