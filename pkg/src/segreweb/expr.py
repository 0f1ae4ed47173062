"""Expression trees over named coordinates with exact rational constants.

Every scalar function in the package (web functions, potentials, ODE right-hand
sides, form coefficients) is an :class:`Expr`.  Nodes are immutable; derivatives
and free-variable sets are cached on the node, so trees produced by repeated
differentiation share structure and behave as DAGs during evaluation.
"""

from __future__ import annotations

import math
import re
from fractions import Fraction
from typing import Iterable, Mapping, Sequence, Union

Number = Union[int, Fraction, float]

FUNCTIONS = ("sin", "cos", "exp", "log")


class ExprError(Exception):
    """Base class for expression errors."""


class ParseError(ExprError):
    def __init__(self, message: str, offset: int):
        super().__init__(f"{message} at offset {offset}")
        self.offset = offset


class UnknownIdentifierError(ParseError):
    def __init__(self, name: str, offset: int, coords: Sequence[str]):
        super().__init__(
            f"unknown identifier {name!r} (declared coordinates: {', '.join(coords)})",
            offset,
        )
        self.name = name
        self.coords = tuple(coords)


class EvaluationError(ExprError):
    pass


class UnboundVariableError(EvaluationError):
    def __init__(self, name: str):
        super().__init__(f"variable {name!r} is not bound by the point")
        self.name = name


class DivisionByZeroError(EvaluationError):
    def __init__(self, subexpr: "Expr"):
        super().__init__(f"division by zero in {subexpr}")
        self.subexpr = subexpr


class NotPolynomialError(ExprError):
    pass


class Expr:
    __slots__ = ("_hash", "_vars", "_dcache")

    # subclasses set _key() and children
    def _init(self, key: tuple) -> None:
        self._hash = hash(key)
        self._vars = None
        self._dcache = {}

    def __hash__(self) -> int:
        return self._hash

    def __eq__(self, other: object) -> bool:
        if self is other:
            return True
        if type(self) is not type(other) or self._hash != other._hash:
            return False
        return self._fields() == other._fields()

    def _fields(self) -> tuple:
        raise NotImplementedError

    @property
    def children(self) -> tuple["Expr", ...]:
        return ()

    def free_vars(self) -> frozenset[str]:
        if self._vars is None:
            out: frozenset[str] = frozenset()
            for c in self.children:
                out = out | c.free_vars()
            self._vars = out
        return self._vars

    # arithmetic sugar goes through the simplifying constructors
    def __add__(self, other):
        return add(self, as_expr(other))

    def __radd__(self, other):
        return add(as_expr(other), self)

    def __sub__(self, other):
        return sub(self, as_expr(other))

    def __rsub__(self, other):
        return sub(as_expr(other), self)

    def __mul__(self, other):
        return mul(self, as_expr(other))

    def __rmul__(self, other):
        return mul(as_expr(other), self)

    def __truediv__(self, other):
        return div(self, as_expr(other))

    def __rtruediv__(self, other):
        return div(as_expr(other), self)

    def __neg__(self):
        return neg(self)

    def __pow__(self, n: int):
        return power(self, n)

    def __repr__(self) -> str:
        return f"Expr({to_string(self)!r})"

    def __str__(self) -> str:
        return to_string(self)

    def diff(self, var: str) -> "Expr":
        return differentiate(self, var)

    def subs(self, mapping: Mapping[str, "Expr"]) -> "Expr":
        return substitute(self, mapping)


class Const(Expr):
    __slots__ = ("value",)

    def __init__(self, value: Union[int, Fraction]):
        if isinstance(value, float):
            raise TypeError("Const holds exact rationals only")
        self.value = Fraction(value)
        self._init(("c", self.value))
        self._vars = frozenset()

    def _fields(self):
        return (self.value,)


class Var(Expr):
    __slots__ = ("name",)

    def __init__(self, name: str):
        self.name = name
        self._init(("v", name))
        self._vars = frozenset((name,))

    def _fields(self):
        return (self.name,)


class Neg(Expr):
    __slots__ = ("arg",)

    def __init__(self, arg: Expr):
        self.arg = arg
        self._init(("neg", arg._hash))

    @property
    def children(self):
        return (self.arg,)

    def _fields(self):
        return (self.arg,)


class _Binary(Expr):
    __slots__ = ("left", "right")
    tag = ""

    def __init__(self, left: Expr, right: Expr):
        self.left = left
        self.right = right
        self._init((self.tag, left._hash, right._hash))

    @property
    def children(self):
        return (self.left, self.right)

    def _fields(self):
        return (self.left, self.right)


class Add(_Binary):
    __slots__ = ()
    tag = "+"


class Sub(_Binary):
    __slots__ = ()
    tag = "-"


class Mul(_Binary):
    __slots__ = ()
    tag = "*"


class Div(_Binary):
    __slots__ = ()
    tag = "/"

    def __init__(self, left: Expr, right: Expr):
        if isinstance(right, Const) and right.value == 0:
            raise ZeroDivisionError("division by the literal constant 0")
        super().__init__(left, right)


class Pow(Expr):
    __slots__ = ("base", "exp")

    def __init__(self, base: Expr, exp: int):
        if not isinstance(exp, int) or isinstance(exp, bool):
            raise TypeError("Pow exponent must be an integer")
        self.base = base
        self.exp = exp
        self._init(("^", base._hash, exp))

    @property
    def children(self):
        return (self.base,)

    def _fields(self):
        return (self.base, self.exp)


class Func(Expr):
    __slots__ = ("name", "arg")

    def __init__(self, name: str, arg: Expr):
        if name not in FUNCTIONS:
            raise ValueError(f"unsupported function {name!r}")
        self.name = name
        self.arg = arg
        self._init(("f", name, arg._hash))

    @property
    def children(self):
        return (self.arg,)

    def _fields(self):
        return (self.name, self.arg)


ZERO = Const(0)
ONE = Const(1)


def as_expr(value) -> Expr:
    if isinstance(value, Expr):
        return value
    if isinstance(value, (int, Fraction)):
        return Const(value)
    if isinstance(value, str):
        return parse(value)
    raise TypeError(f"cannot convert {type(value).__name__} to Expr")


def is_const(e: Expr, value=None) -> bool:
    return isinstance(e, Const) and (value is None or e.value == value)


# ---------------------------------------------------------------------------
# simplifying constructors (constant folding, 0/1 absorption)


def neg(a: Expr) -> Expr:
    if isinstance(a, Const):
        return Const(-a.value)
    if isinstance(a, Neg):
        return a.arg
    return Neg(a)


def add(a: Expr, b: Expr) -> Expr:
    if isinstance(a, Const) and isinstance(b, Const):
        return Const(a.value + b.value)
    if is_const(a, 0):
        return b
    if is_const(b, 0):
        return a
    if isinstance(b, Neg):
        return sub(a, b.arg)
    return Add(a, b)


def sub(a: Expr, b: Expr) -> Expr:
    if isinstance(a, Const) and isinstance(b, Const):
        return Const(a.value - b.value)
    if is_const(b, 0):
        return a
    if is_const(a, 0):
        return neg(b)
    if a == b:
        return ZERO
    if isinstance(b, Neg):
        return add(a, b.arg)
    return Sub(a, b)


def mul(a: Expr, b: Expr) -> Expr:
    if isinstance(a, Const) and isinstance(b, Const):
        return Const(a.value * b.value)
    if is_const(a, 0) or is_const(b, 0):
        return ZERO
    if is_const(a, 1):
        return b
    if is_const(b, 1):
        return a
    if is_const(a, -1):
        return neg(b)
    if is_const(b, -1):
        return neg(a)
    if isinstance(a, Neg) and isinstance(b, Neg):
        return mul(a.arg, b.arg)
    if isinstance(a, Neg):
        return neg(mul(a.arg, b))
    if isinstance(b, Neg):
        return neg(mul(a, b.arg))
    return Mul(a, b)


def div(a: Expr, b: Expr) -> Expr:
    if is_const(b, 0):
        raise ZeroDivisionError("division by the literal constant 0")
    if isinstance(a, Const) and isinstance(b, Const):
        return Const(a.value / b.value)
    if is_const(a, 0):
        return ZERO
    if is_const(b, 1):
        return a
    if is_const(b, -1):
        return neg(a)
    if a == b:
        return ONE
    if isinstance(a, Neg):
        return neg(div(a.arg, b))
    return Div(a, b)


def power(a: Expr, n: int) -> Expr:
    if n == 0:
        return ONE
    if n == 1:
        return a
    if isinstance(a, Const):
        if a.value == 0 and n < 0:
            raise ZeroDivisionError("0 raised to a negative power")
        return Const(a.value**n)
    if isinstance(a, Pow):
        return power(a.base, a.exp * n)
    return Pow(a, n)


def func(name: str, a: Expr) -> Expr:
    if isinstance(a, Const):
        if a.value == 0 and name in ("sin",):
            return ZERO
        if a.value == 0 and name in ("cos", "exp"):
            return ONE
        if a.value == 1 and name == "log":
            return ZERO
    return Func(name, a)


def sum_exprs(terms: Iterable[Expr]) -> Expr:
    """Balanced sum; keeps tree depth logarithmic in the number of terms."""
    items = [t for t in terms if not is_const(t, 0)]
    if not items:
        return ZERO
    while len(items) > 1:
        nxt = [add(items[i], items[i + 1]) for i in range(0, len(items) - 1, 2)]
        if len(items) % 2:
            nxt.append(items[-1])
        items = nxt
    return items[0]


def var(name: str) -> Var:
    return Var(name)


def sin(a) -> Expr:
    return func("sin", as_expr(a))


def cos(a) -> Expr:
    return func("cos", as_expr(a))


def exp(a) -> Expr:
    return func("exp", as_expr(a))


def log(a) -> Expr:
    return func("log", as_expr(a))


def simplify(e: Expr) -> Expr:
    """Rebuild ``e`` bottom-up through the simplifying constructors."""
    memo: dict[int, Expr] = {}

    def go(n: Expr) -> Expr:
        key = id(n)
        if key in memo:
            return memo[key]
        if isinstance(n, (Const, Var)):
            out = n
        elif isinstance(n, Neg):
            out = neg(go(n.arg))
        elif isinstance(n, Add):
            out = add(go(n.left), go(n.right))
        elif isinstance(n, Sub):
            out = sub(go(n.left), go(n.right))
        elif isinstance(n, Mul):
            out = mul(go(n.left), go(n.right))
        elif isinstance(n, Div):
            out = div(go(n.left), go(n.right))
        elif isinstance(n, Pow):
            out = power(go(n.base), n.exp)
        else:
            out = func(n.name, go(n.arg))
        memo[key] = out
        return out

    return go(e)


# ---------------------------------------------------------------------------
# parsing

_TOKEN = re.compile(r"\s*(?:(\d+)|([a-zA-Z][a-zA-Z0-9_]*)|(.))")


class _Parser:
    def __init__(self, source: str, coords: Sequence[str]):
        self.src = source
        self.coords = tuple(coords)
        self.allowed = set(coords)
        self.tokens: list[tuple[str, str, int]] = []
        pos = 0
        while pos < len(source):
            m = _TOKEN.match(source, pos)
            if m is None or m.end() == pos:
                break
            if m.group(1) is not None:
                self.tokens.append(("int", m.group(1), m.start(1)))
            elif m.group(2) is not None:
                self.tokens.append(("name", m.group(2), m.start(2)))
            elif m.group(3) is not None:
                ch = m.group(3)
                if ch not in "+-*/^()":
                    raise ParseError(f"unexpected character {ch!r}", m.start(3))
                self.tokens.append(("op", ch, m.start(3)))
            pos = m.end()
        self.tokens.append(("end", "", len(source)))
        self.i = 0

    def peek(self) -> tuple[str, str, int]:
        return self.tokens[self.i]

    def take(self) -> tuple[str, str, int]:
        tok = self.tokens[self.i]
        self.i += 1
        return tok

    def expect(self, text: str) -> None:
        kind, value, off = self.take()
        if value != text or kind != "op":
            raise ParseError(f"expected {text!r}", off)

    def parse(self) -> Expr:
        e = self.expr()
        kind, value, off = self.peek()
        if kind != "end":
            raise ParseError(f"unexpected token {value!r}", off)
        return e

    def expr(self) -> Expr:
        e = self.term()
        while self.peek()[1] in ("+", "-") and self.peek()[0] == "op":
            op = self.take()[1]
            rhs = self.term()
            e = Add(e, rhs) if op == "+" else Sub(e, rhs)
        return e

    def term(self) -> Expr:
        e = self.unary()
        while self.peek()[1] in ("*", "/") and self.peek()[0] == "op":
            op, off = self.take()[1:]
            rhs = self.unary()
            if op == "*":
                e = Mul(e, rhs)
            else:
                if is_const(rhs, 0):
                    raise ParseError("division by the literal constant 0", off)
                e = Div(e, rhs)
        return e

    def unary(self) -> Expr:
        kind, value, _ = self.peek()
        if kind == "op" and value in ("-", "+"):
            self.take()
            inner = self.unary()
            return Neg(inner) if value == "-" else inner
        return self.factor()

    def factor(self) -> Expr:
        base = self.base()
        if self.peek()[0] == "op" and self.peek()[1] == "^":
            self.take()
            sign = 1
            if self.peek()[0] == "op" and self.peek()[1] == "-":
                self.take()
                sign = -1
            kind, value, off = self.take()
            if kind != "int":
                raise ParseError("expected integer exponent", off)
            return Pow(base, sign * int(value))
        return base

    def base(self) -> Expr:
        kind, value, off = self.take()
        if kind == "int":
            nxt = self.peek()
            if nxt[0] == "op" and nxt[1] == "/" and self.tokens[self.i + 1][0] == "int":
                self.take()
                _, den, den_off = self.take()
                if int(den) == 0:
                    raise ParseError("zero denominator in rational literal", den_off)
                return Const(Fraction(int(value), int(den)))
            return Const(int(value))
        if kind == "name":
            nxt = self.peek()
            if nxt[0] == "op" and nxt[1] == "(":
                if value not in FUNCTIONS:
                    raise UnknownIdentifierError(value, off, self.coords)
                self.take()
                arg = self.expr()
                self.expect(")")
                return Func(value, arg)
            if value not in self.allowed:
                raise UnknownIdentifierError(value, off, self.coords)
            return Var(value)
        if kind == "op" and value == "(":
            e = self.expr()
            self.expect(")")
            return e
        if kind == "end":
            raise ParseError("unexpected end of input", off)
        raise ParseError(f"unexpected token {value!r}", off)


def parse(source: str, coords: Sequence[str] | None = None) -> Expr:
    """Parse infix ``source`` into an AST over the declared ``coords``.

    When ``coords`` is ``None`` any identifier is accepted as a variable.
    Offsets in errors are 0-based character positions.
    """
    if coords is None:
        names = set(re.findall(r"[a-zA-Z][a-zA-Z0-9_]*", source)) - set(FUNCTIONS)
        coords = sorted(names)
    return _Parser(source, coords).parse()


# ---------------------------------------------------------------------------
# printing

_PREC = {Add: 1, Sub: 1, Mul: 2, Div: 2, Neg: 3, Pow: 4}


def _prec(e: Expr) -> int:
    if isinstance(e, Const):
        if e.value < 0:
            return 3
        return 2 if e.value.denominator != 1 else 5
    return _PREC.get(type(e), 5)


def to_string(e: Expr) -> str:
    """Render ``e`` in the parser's grammar; re-parsing is pointwise equal."""

    def wrap(child: Expr, need: int, tail_div: bool) -> str:
        if _prec(child) < need:
            return f"({go(child, False)})"
        return go(child, tail_div)

    def go(n: Expr, tail_div: bool) -> str:
        # tail_div: the rendered text is followed by '/', so a bare integer
        # literal would fuse with the divisor into a rational literal
        if isinstance(n, Const):
            v = n.value
            s = str(v.numerator) if v.denominator == 1 else f"{v.numerator}/{v.denominator}"
            return f"({s})" if tail_div and v.denominator == 1 and v >= 0 else s
        if isinstance(n, Var):
            return n.name
        if isinstance(n, Neg):
            return "-" + wrap(n.arg, 3, tail_div)
        if isinstance(n, Add):
            return f"{wrap(n.left, 1, False)} + {wrap(n.right, 2, tail_div)}"
        if isinstance(n, Sub):
            return f"{wrap(n.left, 1, False)} - {wrap(n.right, 2, tail_div)}"
        if isinstance(n, Mul):
            return f"{wrap(n.left, 2, False)}*{wrap(n.right, 2, tail_div)}"
        if isinstance(n, Div):
            return f"{wrap(n.left, 2, True)}/{wrap(n.right, 3, tail_div)}"
        if isinstance(n, Pow):
            return f"{wrap(n.base, 5, False)}^{n.exp}"
        if isinstance(n, Func):
            return f"{n.name}({go(n.arg, False)})"
        raise TypeError(type(n))

    return go(e, False)


# ---------------------------------------------------------------------------
# differentiation


def differentiate(e: Expr, v: str) -> Expr:
    """Exact partial derivative of ``e`` with respect to the variable ``v``."""
    if v not in e.free_vars():
        return ZERO
    cached = e._dcache.get(v)
    if cached is not None:
        return cached
    if isinstance(e, Var):
        out = ONE
    elif isinstance(e, Neg):
        out = neg(differentiate(e.arg, v))
    elif isinstance(e, Add):
        out = add(differentiate(e.left, v), differentiate(e.right, v))
    elif isinstance(e, Sub):
        out = sub(differentiate(e.left, v), differentiate(e.right, v))
    elif isinstance(e, Mul):
        a, b = e.left, e.right
        out = add(mul(differentiate(a, v), b), mul(a, differentiate(b, v)))
    elif isinstance(e, Div):
        a, b = e.left, e.right
        da, db = differentiate(a, v), differentiate(b, v)
        if is_const(db, 0):
            out = div(da, b)
        else:
            out = div(sub(mul(da, b), mul(a, db)), power(b, 2))
    elif isinstance(e, Pow):
        n, b = e.exp, e.base
        db = differentiate(b, v)
        if n > 0:
            out = mul(mul(Const(n), power(b, n - 1)), db)
        else:
            # quotient rule on 1/b^k
            k = -n
            out = neg(div(mul(mul(Const(k), power(b, k - 1)), db), power(b, 2 * k)))
    elif isinstance(e, Func):
        a = e.arg
        da = differentiate(a, v)
        if e.name == "sin":
            out = mul(func("cos", a), da)
        elif e.name == "cos":
            out = neg(mul(func("sin", a), da))
        elif e.name == "exp":
            out = mul(e, da)
        else:
            out = div(da, a)
    else:  # pragma: no cover
        raise TypeError(type(e))
    e._dcache[v] = out
    return out


def diff_multi(e: Expr, variables: Iterable[str]) -> Expr:
    for v in variables:
        e = differentiate(e, v)
    return e


def substitute(e: Expr, mapping: Mapping[str, Expr]) -> Expr:
    """Replace variables by expressions (simultaneously)."""
    mapping = {k: as_expr(v) for k, v in mapping.items()}
    memo: dict[int, Expr] = {}

    def go(n: Expr) -> Expr:
        if not (n.free_vars() & mapping.keys()):
            return n
        key = id(n)
        if key in memo:
            return memo[key]
        if isinstance(n, Var):
            out = mapping[n.name]
        elif isinstance(n, Neg):
            out = neg(go(n.arg))
        elif isinstance(n, Add):
            out = add(go(n.left), go(n.right))
        elif isinstance(n, Sub):
            out = sub(go(n.left), go(n.right))
        elif isinstance(n, Mul):
            out = mul(go(n.left), go(n.right))
        elif isinstance(n, Div):
            out = div(go(n.left), go(n.right))
        elif isinstance(n, Pow):
            out = power(go(n.base), n.exp)
        else:
            out = func(n.name, go(n.arg))
        memo[key] = out
        return out

    return go(e)


# ---------------------------------------------------------------------------
# evaluation


def _coerce_point(p: Mapping[str, Number]) -> dict[str, Union[Fraction, float]]:
    out = {}
    for k, v in p.items():
        if isinstance(v, float):
            out[k] = v
        elif isinstance(v, (int, Fraction)):
            out[k] = Fraction(v)
        else:
            out[k] = float(v)
    return out


class Evaluator:
    """Evaluates many expressions at one point, sharing a memo table."""

    def __init__(self, point: Mapping[str, Number]):
        self.point = _coerce_point(point)
        self.memo: dict[int, Union[Fraction, float]] = {}
        self._keep: list[Expr] = []

    def __call__(self, e: Expr) -> Union[Fraction, float]:
        return self._eval(e)

    def _eval(self, n: Expr):
        key = id(n)
        memo = self.memo
        if key in memo:
            return memo[key]
        if isinstance(n, Const):
            out = n.value
        elif isinstance(n, Var):
            try:
                out = self.point[n.name]
            except KeyError:
                raise UnboundVariableError(n.name) from None
        elif isinstance(n, Neg):
            out = -self._eval(n.arg)
        elif isinstance(n, Add):
            out = self._eval(n.left) + self._eval(n.right)
        elif isinstance(n, Sub):
            out = self._eval(n.left) - self._eval(n.right)
        elif isinstance(n, Mul):
            a = self._eval(n.left)
            out = 0 * a if a == 0 and not isinstance(a, float) else a * self._eval(n.right)
        elif isinstance(n, Div):
            b = self._eval(n.right)
            if b == 0:
                raise DivisionByZeroError(n)
            out = self._eval(n.left) / b
        elif isinstance(n, Pow):
            b = self._eval(n.base)
            if n.exp < 0 and b == 0:
                raise DivisionByZeroError(n)
            out = b**n.exp
            if isinstance(b, Fraction) and not isinstance(out, Fraction):
                out = Fraction(out)
        elif isinstance(n, Func):
            a = float(self._eval(n.arg))
            if n.name == "sin":
                out = math.sin(a)
            elif n.name == "cos":
                out = math.cos(a)
            elif n.name == "exp":
                out = math.exp(a)
            else:
                if a <= 0:
                    raise EvaluationError(f"log of non-positive value in {n}")
                out = math.log(a)
        else:  # pragma: no cover
            raise TypeError(type(n))
        memo[key] = out
        # keep nodes alive so ids stay unique while the memo lives
        self._keep.append(n)
        return out


def evaluate(e: Expr, p: Mapping[str, Number]) -> Union[Fraction, float]:
    """Value of ``e`` at ``p``; exact for rational data without transcendental nodes."""
    return Evaluator(p)(e)


def fd_derivative(e: Expr, v: str, p: Mapping[str, Number], h: float = 1e-4) -> float:
    """Second-order central difference of ``e`` along ``v`` at ``p``."""
    base = {k: float(x) for k, x in p.items()}
    if v not in base:
        base[v] = 0.0
    plus = dict(base)
    minus = dict(base)
    plus[v] = base[v] + h
    minus[v] = base[v] - h
    return (float(evaluate(e, plus)) - float(evaluate(e, minus))) / (2 * h)


def has_transcendental(e: Expr) -> bool:
    seen: set[int] = set()
    stack = [e]
    while stack:
        n = stack.pop()
        if id(n) in seen:
            continue
        seen.add(id(n))
        if isinstance(n, Func):
            return True
        stack.extend(n.children)
    return False


def count_nodes(e: Expr) -> int:
    seen: set[int] = set()
    stack = [e]
    while stack:
        n = stack.pop()
        if id(n) in seen:
            continue
        seen.add(id(n))
        stack.extend(n.children)
    return len(seen)
