"""
Observables Module
==================
Hölder observables u and positive weights psi with norm certificates.

Variants:
- LocallyConstant: table of rationals indexed by admissible words (shifts)
- ClosedForm: expression over x (circle) or x, y (torus) built from
  + - *, rational constants, cos2pi, sin2pi and abs
- DistToOrbitPow: eps * d(., O)^alpha
- Sum, Scale, BirkhoffAverage, IterateComposition, GridFunction

Values are exact rationals wherever the arithmetic allows and floats
otherwise. Certificates give upper bounds for ||u||_0 and [u]_alpha.
"""

import math
import re
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Any, Dict, List, Optional, Sequence, Tuple, Union

import numpy as np
import structlog

from ..errors import InadmissibleWordError, KindMismatchError, ObservableError
from .dynamics import (
    Point,
    SymbolPoint,
    SystemDescriptor,
    SystemKind,
    admissible_words,
    apply,
    check_point,
    distance,
    format_word,
    iterate,
    random_point,
)

logger = structlog.get_logger("Observables")

Real = Union[Fraction, float]
Word = Tuple[int, ...]

# Comparison tolerance for float valued observables.
FLOAT_TOL = 1e-12

# Grid resolution used to tighten closed form bounds (2^16 samples).
CERT_GRID_BITS = 16


def power(base: Real, alpha: Real) -> Real:
    """base ** alpha, exact when alpha == 1."""
    if alpha == 1 or base == 0 or base == 1:
        return base
    return float(base) ** float(alpha)


def as_real(value: Any) -> Real:
    """Parse "p/q" strings and ints into Fractions, keep floats."""
    if isinstance(value, float):
        return value
    try:
        return Fraction(value)
    except (TypeError, ValueError) as exc:
        raise ObservableError(f"not a number: {value!r}") from exc


def _num(value: Real) -> Union[str, float]:
    return str(value) if isinstance(value, Fraction) else float(value)


# =============================================================================
# CERTIFICATES
# =============================================================================

@dataclass(frozen=True)
class HolderCertificate:
    """Upper bounds for the sup norm and the alpha-Hölder seminorm."""
    alpha: Real
    sup_norm: Real
    seminorm: Real
    exact: bool = False

    @property
    def norm(self) -> Real:
        return self.sup_norm + self.seminorm

    def to_dict(self) -> Dict[str, Any]:
        return {
            "alpha": _num(self.alpha),
            "sup_norm": _num(self.sup_norm),
            "seminorm": _num(self.seminorm),
            "norm": _num(self.norm),
            "exact": self.exact,
        }


# =============================================================================
# OBSERVABLE BASE
# =============================================================================

class Observable:
    """Base class for observables. Subclasses are immutable."""

    type_name = "observable"

    def value(self, system: SystemDescriptor, point: Point) -> Real:
        raise NotImplementedError

    def values(self, system: SystemDescriptor, xs: np.ndarray) -> np.ndarray:
        """Float evaluation on an array of circle coordinates."""
        raise KindMismatchError("circle-evaluable observable", self.type_name)

    def bounds(self, system: SystemDescriptor) -> Tuple[Real, Real]:
        """(lower, upper) bounds of the observable on X."""
        raise NotImplementedError

    def seminorm(self, system: SystemDescriptor, alpha: Real) -> Real:
        raise NotImplementedError

    def check(self, system: SystemDescriptor) -> None:
        """Raise unless the observable can be evaluated on ``system``."""

    @property
    def exact(self) -> bool:
        return False

    def certify(self, system: SystemDescriptor, alpha: Real) -> HolderCertificate:
        self.check(system)
        lo, hi = self.bounds(system)
        return HolderCertificate(
            alpha=alpha,
            sup_norm=max(abs(lo), abs(hi)),
            seminorm=self.seminorm(system, alpha),
            exact=self.exact,
        )

    def to_dict(self) -> Dict[str, Any]:
        raise NotImplementedError


# =============================================================================
# LOCALLY CONSTANT
# =============================================================================

def parse_word(text: Union[str, Sequence[int]]) -> Word:
    if isinstance(text, str):
        text = text.strip()
        if "," in text:
            return tuple(int(s) for s in text.split(",") if s.strip())
        return tuple(int(c) for c in text)
    return tuple(int(s) for s in text)


@dataclass(frozen=True)
class LocallyConstant(Observable):
    """u(x) = table[x_0 ... x_{r-1}] on a shift space."""
    depth: int
    table: Tuple[Tuple[Word, Fraction], ...]
    _index: Dict[Word, Real] = field(default_factory=dict, compare=False, repr=False)

    type_name = "locally_constant"

    @classmethod
    def from_table(cls, table: Dict[Any, Any], depth: Optional[int] = None) -> "LocallyConstant":
        items = {parse_word(k): as_real(v) for k, v in table.items()}
        if not items:
            raise ObservableError("locally constant table is empty")
        lengths = {len(w) for w in items}
        if len(lengths) != 1:
            raise ObservableError("table words must share one length", lengths=sorted(lengths))
        r = lengths.pop()
        if depth is not None and depth != r:
            raise ObservableError(f"table words have length {r}, depth says {depth}")
        if r < 1:
            raise ObservableError("depth must be >= 1")
        return cls(depth=r, table=tuple(sorted(items.items())))

    @property
    def mapping(self) -> Dict[Word, Real]:
        return dict(self.table)

    @property
    def exact(self) -> bool:
        return all(isinstance(v, Fraction) for _, v in self.table)

    def lookup(self, word: Word) -> Real:
        if not self._index:
            self._index.update(self.table)
        try:
            return self._index[word]
        except KeyError:
            raise InadmissibleWordError(list(word), "word missing from table") from None

    def check(self, system: SystemDescriptor) -> None:
        if not system.is_shift:
            raise KindMismatchError("symbolic system", system.kind.value)
        expected = set(admissible_words(system, self.depth))
        got = {w for w, _ in self.table}
        if expected != got:
            missing = sorted(expected - got)
            extra = sorted(got - expected)
            raise ObservableError(
                "table must cover exactly the admissible words",
                missing=[format_word(w) for w in missing],
                extra=[format_word(w) for w in extra],
            )

    def value(self, system: SystemDescriptor, point: Point) -> Real:
        if not isinstance(point, SymbolPoint):
            raise KindMismatchError("SymbolPoint", type(point).__name__)
        return self.lookup(point.head(self.depth))

    def bounds(self, system: SystemDescriptor) -> Tuple[Real, Real]:
        vals = [v for _, v in self.table]
        return min(vals), max(vals)

    def seminorm(self, system: SystemDescriptor, alpha: Real) -> Real:
        lo, hi = self.bounds(system)
        return (hi - lo) * power(Fraction(2 ** self.depth), alpha)

    def to_dict(self) -> Dict[str, Any]:
        return {
            "type": self.type_name,
            "depth": self.depth,
            "table": {format_word(w): _num(v) for w, v in self.table},
        }


# =============================================================================
# CLOSED FORM EXPRESSIONS
# =============================================================================

_COS_EXACT = {
    Fraction(0): Fraction(1), Fraction(1, 6): Fraction(1, 2), Fraction(1, 4): Fraction(0),
    Fraction(1, 3): Fraction(-1, 2), Fraction(1, 2): Fraction(-1), Fraction(2, 3): Fraction(-1, 2),
    Fraction(3, 4): Fraction(0), Fraction(5, 6): Fraction(1, 2),
}
_SIN_EXACT = {
    Fraction(0): Fraction(0), Fraction(1, 12): Fraction(1, 2), Fraction(1, 4): Fraction(1),
    Fraction(5, 12): Fraction(1, 2), Fraction(1, 2): Fraction(0), Fraction(7, 12): Fraction(-1, 2),
    Fraction(3, 4): Fraction(-1), Fraction(11, 12): Fraction(-1, 2),
}


def _interval_mul(a: Tuple[Real, Real], b: Tuple[Real, Real]) -> Tuple[Real, Real]:
    products = [a[0] * b[0], a[0] * b[1], a[1] * b[0], a[1] * b[1]]
    return min(products), max(products)


def _sup(interval: Tuple[Real, Real]) -> Real:
    return max(abs(interval[0]), abs(interval[1]))


class Expr:
    """Expression tree node."""

    def evaluate(self, env: Dict[str, Fraction]) -> Real:
        raise NotImplementedError

    def evaluate_array(self, env: Dict[str, np.ndarray]) -> np.ndarray:
        raise NotImplementedError

    def interval(self) -> Tuple[Real, Real]:
        raise NotImplementedError

    def lipschitz(self) -> Real:
        """Bound on the sum of partial derivative sups."""
        raise NotImplementedError

    def variables(self) -> frozenset:
        return frozenset()


@dataclass(frozen=True)
class Var(Expr):
    name: str

    def evaluate(self, env):
        return env[self.name]

    def evaluate_array(self, env):
        return env[self.name]

    def interval(self):
        return Fraction(0), Fraction(1)

    def lipschitz(self):
        return Fraction(1)

    def variables(self):
        return frozenset({self.name})

    def __str__(self):
        return self.name


@dataclass(frozen=True)
class Const(Expr):
    value: Real

    def evaluate(self, env):
        return self.value

    def evaluate_array(self, env):
        return float(self.value)

    def interval(self):
        return self.value, self.value

    def lipschitz(self):
        return Fraction(0)

    def __str__(self):
        if isinstance(self.value, Fraction) and self.value.denominator == 1:
            return str(self.value.numerator)
        return f"({self.value})"


@dataclass(frozen=True)
class _Binary(Expr):
    left: Expr
    right: Expr

    def variables(self):
        return self.left.variables() | self.right.variables()


class Add(_Binary):
    def evaluate(self, env):
        return self.left.evaluate(env) + self.right.evaluate(env)

    def evaluate_array(self, env):
        return self.left.evaluate_array(env) + self.right.evaluate_array(env)

    def interval(self):
        a, b = self.left.interval(), self.right.interval()
        return a[0] + b[0], a[1] + b[1]

    def lipschitz(self):
        return self.left.lipschitz() + self.right.lipschitz()

    def __str__(self):
        return f"({self.left} + {self.right})"


class Sub(_Binary):
    def evaluate(self, env):
        return self.left.evaluate(env) - self.right.evaluate(env)

    def evaluate_array(self, env):
        return self.left.evaluate_array(env) - self.right.evaluate_array(env)

    def interval(self):
        a, b = self.left.interval(), self.right.interval()
        return a[0] - b[1], a[1] - b[0]

    def lipschitz(self):
        return self.left.lipschitz() + self.right.lipschitz()

    def __str__(self):
        return f"({self.left} - {self.right})"


class Mul(_Binary):
    def evaluate(self, env):
        return self.left.evaluate(env) * self.right.evaluate(env)

    def evaluate_array(self, env):
        return self.left.evaluate_array(env) * self.right.evaluate_array(env)

    def interval(self):
        return _interval_mul(self.left.interval(), self.right.interval())

    def lipschitz(self):
        return (_sup(self.left.interval()) * self.right.lipschitz()
                + _sup(self.right.interval()) * self.left.lipschitz())

    def __str__(self):
        return f"({self.left} * {self.right})"


@dataclass(frozen=True)
class _Unary(Expr):
    arg: Expr

    def variables(self):
        return self.arg.variables()


class Neg(_Unary):
    def evaluate(self, env):
        return -self.arg.evaluate(env)

    def evaluate_array(self, env):
        return -self.arg.evaluate_array(env)

    def interval(self):
        lo, hi = self.arg.interval()
        return -hi, -lo

    def lipschitz(self):
        return self.arg.lipschitz()

    def __str__(self):
        return f"-{self.arg}"


class Abs(_Unary):
    def evaluate(self, env):
        return abs(self.arg.evaluate(env))

    def evaluate_array(self, env):
        return np.abs(self.arg.evaluate_array(env))

    def interval(self):
        lo, hi = self.arg.interval()
        if lo >= 0:
            return lo, hi
        if hi <= 0:
            return -hi, -lo
        return Fraction(0), max(-lo, hi)

    def lipschitz(self):
        return self.arg.lipschitz()

    def __str__(self):
        return f"abs({self.arg})"


class _Trig(_Unary):
    exact_table: Dict[Fraction, Fraction] = {}
    func = staticmethod(math.cos)
    array_func = staticmethod(np.cos)
    name = ""

    def evaluate(self, env):
        t = self.arg.evaluate(env)
        if isinstance(t, Fraction):
            t = t % 1
            if t in self.exact_table:
                return self.exact_table[t]
            return self.func(2 * math.pi * float(t))
        return self.func(2 * math.pi * (t % 1.0))

    def evaluate_array(self, env):
        return self.array_func(2 * np.pi * np.mod(self.arg.evaluate_array(env), 1.0))

    def interval(self):
        if not self.arg.variables():
            v = self.evaluate({})
            return v, v
        return Fraction(-1), Fraction(1)

    def lipschitz(self):
        inner = self.arg.lipschitz()
        return 0 if inner == 0 else 2 * math.pi * float(inner)

    def __str__(self):
        return f"{self.name}({self.arg})"


class Cos2Pi(_Trig):
    exact_table = _COS_EXACT
    func = staticmethod(math.cos)
    array_func = staticmethod(np.cos)
    name = "cos2pi"


class Sin2Pi(_Trig):
    exact_table = _SIN_EXACT
    func = staticmethod(math.sin)
    array_func = staticmethod(np.sin)
    name = "sin2pi"


_TOKEN = re.compile(r"\s*(?:(\d+(?:\.\d+)?)|([A-Za-z_][A-Za-z_0-9]*)|(\S))")
_FUNCS = {"cos2pi": Cos2Pi, "sin2pi": Sin2Pi, "abs": Abs}


class _Parser:
    """Recursive descent parser for closed form expressions."""

    def __init__(self, text: str):
        self.text = text
        self.tokens: List[Tuple[str, str]] = []
        pos = 0
        text = text.replace("−", "-")
        while pos < len(text):
            match = _TOKEN.match(text, pos)
            if not match or match.end() == pos:
                break
            pos = match.end()
            number, name, symbol = match.groups()
            if number is not None:
                self.tokens.append(("num", number))
            elif name is not None:
                self.tokens.append(("name", name))
            elif symbol is not None:
                self.tokens.append(("sym", symbol))
        self.i = 0

    def _peek(self) -> Optional[Tuple[str, str]]:
        return self.tokens[self.i] if self.i < len(self.tokens) else None

    def _take(self, symbol: Optional[str] = None) -> Tuple[str, str]:
        tok = self._peek()
        if tok is None or (symbol is not None and tok[1] != symbol):
            raise ObservableError(f"cannot parse expression {self.text!r}", expected=symbol)
        self.i += 1
        return tok

    def parse(self) -> Expr:
        expr = self._expr()
        if self._peek() is not None:
            raise ObservableError(f"trailing input in expression {self.text!r}")
        return expr

    def _expr(self) -> Expr:
        node = self._term()
        while self._peek() and self._peek()[1] in "+-":
            op = self._take()[1]
            rhs = self._term()
            node = Add(node, rhs) if op == "+" else Sub(node, rhs)
        return node

    def _term(self) -> Expr:
        node = self._factor()
        while self._peek() and self._peek()[1] in "*/":
            op = self._take()[1]
            rhs = self._factor()
            if op == "*":
                node = Mul(node, rhs)
                continue
            if not isinstance(rhs, Const) or rhs.value == 0:
                raise ObservableError("division is only allowed by nonzero constants")
            if isinstance(node, Const):
                node = Const(Fraction(node.value) / Fraction(rhs.value))
            else:
                node = Mul(node, Const(1 / Fraction(rhs.value)))
        return node

    def _factor(self) -> Expr:
        tok = self._peek()
        if tok and tok[1] == "-":
            self._take()
            inner = self._factor()
            if isinstance(inner, Const):
                return Const(-inner.value)
            return Neg(inner)
        return self._atom()

    def _atom(self) -> Expr:
        kind, text = self._take()
        if kind == "num":
            return Const(Fraction(text))
        if kind == "name":
            if text in ("x", "y"):
                return Var(text)
            if text in _FUNCS:
                self._take("(")
                arg = self._expr()
                self._take(")")
                return _FUNCS[text](arg)
            raise ObservableError(f"unknown name {text!r} in expression")
        if text == "(":
            inner = self._expr()
            self._take(")")
            return inner
        raise ObservableError(f"unexpected {text!r} in expression {self.text!r}")


def parse_expression(text: str) -> Expr:
    return _Parser(text).parse()


@dataclass(frozen=True)
class ClosedForm(Observable):
    """Closed form observable on circle or torus coordinates."""
    expr: Expr
    _cache: Dict[Any, Any] = field(default_factory=dict, compare=False, repr=False)

    type_name = "closed_form"

    @classmethod
    def parse(cls, text: str) -> "ClosedForm":
        return cls(parse_expression(text))

    @classmethod
    def constant(cls, value: Real) -> "ClosedForm":
        return cls(Const(value))

    @property
    def exact(self) -> bool:
        return not self.expr.variables() and isinstance(self.expr.evaluate({}), Fraction)

    def check(self, system: SystemDescriptor) -> None:
        names = self.expr.variables()
        if system.kind == SystemKind.CIRCLE:
            allowed = {"x"}
        elif system.kind == SystemKind.TORUS_CAT:
            allowed = {"x", "y"}
        else:
            allowed = set()
        if not names <= allowed:
            raise KindMismatchError(
                f"expression in {sorted(allowed) or 'no variables'}", ",".join(sorted(names))
            )

    def _env(self, point: Point) -> Dict[str, Fraction]:
        if hasattr(point, "y"):
            return {"x": point.x, "y": point.y}
        if hasattr(point, "x"):
            return {"x": point.x}
        return {}

    def value(self, system: SystemDescriptor, point: Point) -> Real:
        self.check(system)
        return self.expr.evaluate(self._env(point))

    def values(self, system: SystemDescriptor, xs: np.ndarray) -> np.ndarray:
        if system.kind != SystemKind.CIRCLE and self.expr.variables():
            raise KindMismatchError("circle", system.kind.value)
        out = self.expr.evaluate_array({"x": xs})
        return np.broadcast_to(np.asarray(out, dtype=float), np.shape(xs)).copy()

    def _grid(self, system: SystemDescriptor) -> Tuple[np.ndarray, float]:
        """Sample values on the certification grid and return (values, step)."""
        key = ("grid", system.kind)
        if key in self._cache:
            return self._cache[key]
        if system.kind == SystemKind.TORUS_CAT:
            side = 2 ** (CERT_GRID_BITS // 2)
            g = np.arange(side) / side
            X, Y = np.meshgrid(g, g, indexing="ij")
            vals = np.asarray(self.expr.evaluate_array({"x": X, "y": Y}), dtype=float)
            shifted_x = np.asarray(self.expr.evaluate_array({"x": X + 1, "y": Y}), dtype=float)
            shifted_y = np.asarray(self.expr.evaluate_array({"x": X, "y": Y + 1}), dtype=float)
            periodic = (np.allclose(vals, shifted_x, atol=1e-9)
                        and np.allclose(vals, shifted_y, atol=1e-9))
            step = 1.0 / side
        else:
            n = 2 ** CERT_GRID_BITS
            g = np.arange(n) / n
            vals = np.broadcast_to(np.asarray(self.expr.evaluate_array({"x": g}), dtype=float), g.shape)
            shifted = np.broadcast_to(np.asarray(self.expr.evaluate_array({"x": g + 1}), dtype=float), g.shape)
            periodic = np.allclose(vals, shifted, atol=1e-9)
            step = 1.0 / n
        if not periodic:
            raise ObservableError(f"expression {self.expr} is not 1-periodic; no Hölder certificate")
        self._cache[key] = (vals, step)
        return vals, step

    def bounds(self, system: SystemDescriptor) -> Tuple[Real, Real]:
        lo, hi = self.expr.interval()
        names = self.expr.variables()
        if not names:
            return lo, hi
        vals, step = self._grid(system)
        slack = float(self.expr.lipschitz()) * step / 2
        return max(lo, float(vals.min()) - slack), min(hi, float(vals.max()) + slack)

    def seminorm(self, system: SystemDescriptor, alpha: Real) -> Real:
        lip = self.expr.lipschitz()
        if lip == 0:
            return Fraction(0)
        if self.expr.variables():
            self._grid(system)
        if alpha == 1:
            return lip
        return float(lip) * float(system.diameter) ** (1 - float(alpha))

    def to_dict(self) -> Dict[str, Any]:
        return {"type": self.type_name, "expr": str(self.expr)}


# =============================================================================
# DISTANCE TO AN ORBIT
# =============================================================================

@dataclass(frozen=True)
class DistToOrbitPow(Observable):
    """eps * d(x, O)^alpha."""
    orbit: Tuple[Point, ...]
    alpha: Real = Fraction(1)
    epsilon: Real = Fraction(1)

    type_name = "dist_to_orbit_pow"

    def __post_init__(self):
        if not self.orbit:
            raise ObservableError("distance observable needs a nonempty orbit")
        if not 0 < self.alpha <= 1:
            raise ObservableError("alpha must lie in (0, 1]", alpha=self.alpha)
        if self.epsilon < 0:
            raise ObservableError("epsilon must be nonnegative", epsilon=self.epsilon)

    @property
    def exact(self) -> bool:
        return self.alpha == 1 and isinstance(self.epsilon, Fraction)

    def check(self, system: SystemDescriptor) -> None:
        for z in self.orbit:
            check_point(system, z)

    def distance_to_orbit(self, system: SystemDescriptor, point: Point) -> Fraction:
        return min(distance(system, point, z) for z in self.orbit)

    def value(self, system: SystemDescriptor, point: Point) -> Real:
        if self.epsilon == 0:
            return Fraction(0)
        return self.epsilon * power(self.distance_to_orbit(system, point), self.alpha)

    def values(self, system: SystemDescriptor, xs: np.ndarray) -> np.ndarray:
        if system.kind != SystemKind.CIRCLE:
            raise KindMismatchError("circle", system.kind.value)
        zs = np.array([float(z.x) for z in self.orbit])
        diff = np.abs(np.asarray(xs, dtype=float)[..., None] - zs) % 1.0
        d = np.minimum(diff, 1.0 - diff).min(axis=-1)
        return float(self.epsilon) * d ** float(self.alpha)

    def bounds(self, system: SystemDescriptor) -> Tuple[Real, Real]:
        return Fraction(0), self.epsilon * power(system.diameter, self.alpha)

    def seminorm(self, system: SystemDescriptor, alpha: Real) -> Real:
        # |d^a(x,O) - d^a(y,O)| <= d(x,y)^a for a <= 1
        if alpha == self.alpha:
            return self.epsilon
        if alpha < self.alpha:
            return self.epsilon * power(system.diameter, self.alpha - alpha)
        raise ObservableError("certificate exponent exceeds the distance exponent",
                              alpha=alpha, exponent=self.alpha)

    def to_dict(self) -> Dict[str, Any]:
        return {
            "type": self.type_name,
            "orbit": [z.to_dict() for z in self.orbit],
            "alpha": _num(self.alpha),
            "epsilon": _num(self.epsilon),
        }


# =============================================================================
# COMBINATORS
# =============================================================================

@dataclass(frozen=True)
class Sum(Observable):
    terms: Tuple[Observable, ...]

    type_name = "sum"

    @property
    def exact(self) -> bool:
        return all(t.exact for t in self.terms)

    def check(self, system):
        for t in self.terms:
            t.check(system)

    def value(self, system, point):
        total: Real = Fraction(0)
        for t in self.terms:
            total += t.value(system, point)
        return total

    def values(self, system, xs):
        out = np.zeros(np.shape(xs))
        for t in self.terms:
            out = out + t.values(system, xs)
        return out

    def bounds(self, system):
        lo: Real = Fraction(0)
        hi: Real = Fraction(0)
        for t in self.terms:
            a, b = t.bounds(system)
            lo, hi = lo + a, hi + b
        return lo, hi

    def seminorm(self, system, alpha):
        total: Real = Fraction(0)
        for t in self.terms:
            total += t.seminorm(system, alpha)
        return total

    def to_dict(self):
        return {"type": self.type_name, "terms": [t.to_dict() for t in self.terms]}


@dataclass(frozen=True)
class Scale(Observable):
    factor: Real
    inner: Observable

    type_name = "scale"

    @property
    def exact(self) -> bool:
        return isinstance(self.factor, Fraction) and self.inner.exact

    def check(self, system):
        self.inner.check(system)

    def value(self, system, point):
        return self.factor * self.inner.value(system, point)

    def values(self, system, xs):
        return float(self.factor) * self.inner.values(system, xs)

    def bounds(self, system):
        lo, hi = self.inner.bounds(system)
        a, b = self.factor * lo, self.factor * hi
        return min(a, b), max(a, b)

    def seminorm(self, system, alpha):
        return abs(self.factor) * self.inner.seminorm(system, alpha)

    def to_dict(self):
        return {"type": self.type_name, "factor": _num(self.factor), "inner": self.inner.to_dict()}


@dataclass(frozen=True)
class IterateComposition(Observable):
    """u o T^K."""
    inner: Observable
    K: int

    type_name = "iterate_composition"

    @property
    def exact(self) -> bool:
        return self.inner.exact

    def check(self, system):
        self.inner.check(system)

    def value(self, system, point):
        return self.inner.value(system, iterate(system, point, self.K))

    def values(self, system, xs):
        if system.kind != SystemKind.CIRCLE:
            raise KindMismatchError("circle", system.kind.value)
        return self.inner.values(system, np.mod(np.asarray(xs) * system.k ** self.K, 1.0))

    def bounds(self, system):
        return self.inner.bounds(system)

    def seminorm(self, system, alpha):
        return self.inner.seminorm(system, alpha) * power(system.lip ** self.K, alpha)

    def to_dict(self):
        return {"type": self.type_name, "K": self.K, "inner": self.inner.to_dict()}


@dataclass(frozen=True)
class BirkhoffAverage(Observable):
    """u_K = (1/K) sum_{i<K} u o T^i."""
    inner: Observable
    K: int

    type_name = "birkhoff_average"

    @property
    def exact(self) -> bool:
        return self.inner.exact

    def check(self, system):
        self.inner.check(system)

    def value(self, system, point):
        total: Real = Fraction(0)
        for _ in range(self.K):
            total += self.inner.value(system, point)
            point = apply(system, point)
        return total / self.K

    def values(self, system, xs):
        if system.kind != SystemKind.CIRCLE:
            raise KindMismatchError("circle", system.kind.value)
        xs = np.asarray(xs, dtype=float)
        total = np.zeros(xs.shape)
        for i in range(self.K):
            total = total + self.inner.values(system, np.mod(xs * system.k ** i, 1.0))
        return total / self.K

    def bounds(self, system):
        return self.inner.bounds(system)

    def seminorm(self, system, alpha):
        growth = sum(power(system.lip ** i, alpha) for i in range(self.K))
        return self.inner.seminorm(system, alpha) * growth / self.K

    def to_dict(self):
        return {"type": self.type_name, "K": self.K, "inner": self.inner.to_dict()}


@dataclass(frozen=True, eq=False)
class GridFunction(Observable):
    """Periodic piecewise linear interpolant of values at x_j = j/n on the circle."""
    grid: np.ndarray

    type_name = "grid_function"

    @property
    def n(self) -> int:
        return len(self.grid)

    def check(self, system):
        if system.kind != SystemKind.CIRCLE:
            raise KindMismatchError("circle", system.kind.value)

    def value(self, system, point):
        self.check(system)
        return float(self.values(system, np.array([float(point.x)]))[0])

    def values(self, system, xs):
        nodes = np.arange(self.n) / self.n
        return np.interp(np.mod(np.asarray(xs, dtype=float), 1.0), nodes, self.grid, period=1.0)

    def bounds(self, system):
        return float(self.grid.min()), float(self.grid.max())

    def lipschitz(self) -> float:
        return float(np.abs(np.diff(np.append(self.grid, self.grid[0]))).max() * self.n)

    def seminorm(self, system, alpha):
        lip = self.lipschitz()
        if alpha == 1:
            return lip
        return lip * float(system.diameter) ** (1 - float(alpha))

    def to_dict(self):
        return {"type": self.type_name, "values": [float(v) for v in self.grid]}


# =============================================================================
# OPERATIONS
# =============================================================================

def evaluate(u: Observable, system: SystemDescriptor, point: Point) -> Real:
    """u(x); exact when the observable and point allow it."""
    check_point(system, point)
    u.check(system)
    return u.value(system, point)


def birkhoff_average_k(u: Observable, system: SystemDescriptor, K: int) -> Observable:
    """u_K; an exact deeper table for locally constant data on shifts."""
    if K < 1:
        raise ObservableError("K must be >= 1", K=K)
    if K == 1:
        return u
    if isinstance(u, LocallyConstant) and system.is_shift:
        r = u.depth
        table = {}
        for w in admissible_words(system, r + K - 1):
            table[w] = sum((u.lookup(w[i:i + r]) for i in range(K)), Fraction(0)) / K
        return LocallyConstant(depth=r + K - 1, table=tuple(sorted(table.items())))
    return BirkhoffAverage(u, K)


def zero_observable() -> ClosedForm:
    return ClosedForm.constant(Fraction(0))


def is_zero(u: Observable) -> bool:
    if isinstance(u, ClosedForm):
        return not u.expr.variables() and u.expr.evaluate({}) == 0
    if isinstance(u, LocallyConstant):
        return all(v == 0 for _, v in u.table)
    if isinstance(u, Scale):
        return u.factor == 0 or is_zero(u.inner)
    if isinstance(u, Sum):
        return all(is_zero(t) for t in u.terms)
    return False


# =============================================================================
# WEIGHTS
# =============================================================================

@dataclass(frozen=True)
class Weight:
    """A strictly positive observable psi with a certified lower bound."""
    psi: Observable
    psi_min: Real
    cert: HolderCertificate

    def averaged(self, system: SystemDescriptor, K: int) -> Observable:
        return birkhoff_average_k(self.psi, system, K)

    def to_dict(self) -> Dict[str, Any]:
        return {"psi": self.psi.to_dict(), "psi_min": _num(self.psi_min), "cert": self.cert.to_dict()}


def certify_weight(system: SystemDescriptor, psi: Observable, alpha: Real) -> Weight:
    cert = psi.certify(system, alpha)
    lo, _ = psi.bounds(system)
    if lo <= 0:
        raise ObservableError("weight must be bounded below by a positive constant", psi_min=lo)
    return Weight(psi=psi, psi_min=lo, cert=cert)


def audit_certificate(
    system: SystemDescriptor,
    u: Observable,
    cert: HolderCertificate,
    rng: np.random.Generator,
    samples: int = 10_000,
) -> List[Dict[str, Any]]:
    """Sample exact pairs and return every violation of the certificate."""
    violations = []
    for _ in range(samples):
        x = random_point(system, rng)
        y = random_point(system, rng)
        ux, uy = u.value(system, x), u.value(system, y)
        slack = FLOAT_TOL if not cert.exact else 0
        if abs(ux) > cert.sup_norm + slack:
            violations.append({"kind": "sup", "x": str(x), "value": _num(ux)})
        d = distance(system, x, y)
        if abs(ux - uy) > cert.seminorm * power(d, cert.alpha) + slack:
            violations.append({"kind": "holder", "x": str(x), "y": str(y)})
    return violations


# =============================================================================
# RANDOM PERTURBATIONS
# =============================================================================

def _scale_into(
    u: Observable, system: SystemDescriptor, alpha: Real, sup_cap: Real, seminorm_cap: Real,
    shrink: Fraction,
) -> Observable:
    cert = u.certify(system, alpha)
    ratios = []
    if cert.sup_norm > 0:
        ratios.append(Fraction(sup_cap) / Fraction(cert.sup_norm))
    if cert.seminorm > 0:
        ratios.append(Fraction(seminorm_cap) / Fraction(cert.seminorm))
    if not ratios:
        return u
    factor = min(ratios) * shrink
    if isinstance(u, LocallyConstant):
        return LocallyConstant(depth=u.depth, table=tuple((w, v * factor) for w, v in u.table))
    return Scale(factor, u)


def random_perturbation(
    system: SystemDescriptor,
    rng: np.random.Generator,
    sup_cap: Real,
    seminorm_cap: Real,
    alpha: Real = Fraction(1),
    depth: int = 2,
    degree: int = 3,
) -> Observable:
    """
    Random h with ||h||_0 < sup_cap and [h]_alpha < seminorm_cap.

    Shifts get a locally constant table, the circle and the torus a
    trigonometric polynomial with rational coefficients.
    """
    if sup_cap <= 0 or seminorm_cap <= 0:
        return zero_observable()
    shrink = Fraction(int(rng.integers(1, 1000)), 1000)
    if system.is_shift:
        table = {w: Fraction(int(rng.integers(-1000, 1001)), 1000)
                 for w in admissible_words(system, depth)}
        h: Observable = LocallyConstant(depth=depth, table=tuple(sorted(table.items())))
    else:
        names = ["x"] if system.kind == SystemKind.CIRCLE else ["x", "y"]
        expr: Expr = Const(Fraction(int(rng.integers(-1000, 1001)), 1000))
        for j in range(1, degree + 1):
            for name in names:
                arg = Mul(Const(Fraction(j)), Var(name))
                a = Fraction(int(rng.integers(-1000, 1001)), 1000)
                b = Fraction(int(rng.integers(-1000, 1001)), 1000)
                expr = Add(expr, Add(Mul(Const(a), Cos2Pi(arg)), Mul(Const(b), Sin2Pi(arg))))
        h = ClosedForm(expr)
    if is_zero(h):
        return h
    return _scale_into(h, system, alpha, sup_cap, seminorm_cap, shrink)


# =============================================================================
# SERIALIZATION
# =============================================================================

def observable_from_dict(data: Dict[str, Any], system: Optional[SystemDescriptor] = None) -> Observable:
    """Inverse of ``to_dict``; ``system`` is needed to parse orbit points."""
    from ..serialization import point_from_json  # avoid import cycle

    if isinstance(data, str):
        return ClosedForm.parse(data)
    if isinstance(data, (int, float)):
        return ClosedForm.constant(as_real(data))
    kind = data.get("type")
    if kind == "locally_constant":
        if "table" not in data:
            raise ObservableError("locally constant observable needs a table")
        return LocallyConstant.from_table(data["table"], data.get("depth"))
    if kind == "closed_form":
        return ClosedForm.parse(str(data["expr"]))
    if kind == "constant":
        return ClosedForm.constant(as_real(data["value"]))
    if kind == "dist_to_orbit_pow":
        if system is None:
            raise ObservableError("a system is needed to read orbit points")
        orbit = tuple(point_from_json(system, p) for p in data["orbit"])
        return DistToOrbitPow(orbit, as_real(data.get("alpha", "1")), as_real(data.get("epsilon", "1")))
    if kind == "sum":
        return Sum(tuple(observable_from_dict(t, system) for t in data["terms"]))
    if kind == "scale":
        return Scale(as_real(data["factor"]), observable_from_dict(data["inner"], system))
    if kind == "birkhoff_average":
        return BirkhoffAverage(observable_from_dict(data["inner"], system), int(data["K"]))
    if kind == "iterate_composition":
        return IterateComposition(observable_from_dict(data["inner"], system), int(data["K"]))
    if kind == "grid_function":
        return GridFunction(np.asarray(data["values"], dtype=float))
    raise ObservableError(f"unknown observable type {kind!r}")
