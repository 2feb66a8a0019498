"""Expression language for user-defined symbols and phases.

    expr   = term { ("+" | "-") term } ;
    term   = unary { ("*" | "/") unary } ;
    unary  = ("-" | "+") unary | power ;
    power  = atom [ "^" unary ] ;
    atom   = number | "pi" | scalar | call | "(" expr ")" ;
    scalar = "x" digits | "k" digits ;
    call   = ("exp" | "sin" | "cos" | "sqrt") "(" expr ")"
           | ("jb" | "norm2") "(" vector ")" ;
    vector = "x" | "k" | "[" expr { "," expr } "]" ;

Covariables are k1..ks. Positions are x1..xd, unless the text mentions x0,
in which case they are x0..x(d-1) (time-first numbering).
"""
import dataclasses
import math
import re

import numpy as np

from .errors import ParseError
from .jet import Jet
from .utils import setup_config, setup_logger

config = setup_config()
logger = setup_logger(__name__, config)

TOKEN_RE = re.compile(
    r"\s*(?:(?P<number>(?:\d+\.?\d*|\.\d+)(?:[eE][-+]?\d+)?)"
    r"|(?P<name>[A-Za-z_][A-Za-z_0-9]*)"
    r"|(?P<op>[-+*/^(),\[\]]))"
)
SCALAR_RE = re.compile(r"^(?P<kind>[xk])(?P<index>\d+)$")
SCALAR_FUNCTIONS = ("exp", "sin", "cos", "sqrt")
VECTOR_FUNCTIONS = ("jb", "norm2")
PRECEDENCE = {"+": 1, "-": 1, "*": 2, "/": 2, "neg": 3, "^": 4}


@dataclasses.dataclass(frozen=True)
class Token:
    kind: str
    text: str
    position: int


def tokenize(text):
    tokens = []
    position = 0
    while position < len(text):
        if text[position:].strip() == "":
            break
        match = TOKEN_RE.match(text, position)
        if match is None or match.end() == position:
            offset = len(text[position:]) - len(text[position:].lstrip())
            raise ParseError(
                f"Unexpected character {text[position + offset]!r}",
                position + offset,
            )
        kind = match.lastgroup
        tokens.append(Token(kind, match.group(kind), match.start(kind)))
        position = match.end()
    tokens.append(Token("end", "", len(text)))
    return tokens


@dataclasses.dataclass(frozen=True)
class Num:
    value: float

    def evaluate(self, x, k):
        return self.value

    def to_text(self):
        if self.value == math.pi:
            return "pi"
        return repr(float(self.value))


@dataclasses.dataclass(frozen=True)
class Var:
    kind: str
    index: int
    label: str

    def evaluate(self, x, k):
        return (x if self.kind == "x" else k)[self.index]

    def to_text(self):
        return self.label


@dataclasses.dataclass(frozen=True)
class Vector:
    kind: str | None
    items: tuple = ()

    def components(self, x, k):
        if self.kind == "x":
            return list(x)
        if self.kind == "k":
            return list(k)
        return [item.evaluate(x, k) for item in self.items]

    def to_text(self):
        if self.kind is not None:
            return self.kind
        return "[" + ", ".join(item.to_text() for item in self.items) + "]"


@dataclasses.dataclass(frozen=True)
class Neg:
    operand: object

    def evaluate(self, x, k):
        return -self.operand.evaluate(x, k)

    def to_text(self):
        return "-" + _wrap(self.operand, PRECEDENCE["neg"])


@dataclasses.dataclass(frozen=True)
class BinOp:
    op: str
    left: object
    right: object

    def evaluate(self, x, k):
        left = self.left.evaluate(x, k)
        right = self.right.evaluate(x, k)
        if self.op == "+":
            return left + right
        if self.op == "-":
            return left - right
        if self.op == "*":
            return left * right
        if self.op == "/":
            return left / right
        return _power(left, right)

    def to_text(self):
        prec = PRECEDENCE[self.op]
        if self.op == "^":
            return (
                _wrap(self.left, prec + 1)
                + "^"
                + _wrap(self.right, PRECEDENCE["neg"])
            )
        right_prec = prec + 1 if self.op in ("-", "/") else prec
        return (
            _wrap(self.left, prec)
            + f" {self.op} "
            + _wrap(self.right, right_prec)
        )


@dataclasses.dataclass(frozen=True)
class Call:
    name: str
    arg: object

    def evaluate(self, x, k):
        if self.name in VECTOR_FUNCTIONS:
            squares = sum(c * c for c in self.arg.components(x, k))
            if self.name == "norm2":
                return squares
            return _apply("sqrt", 1.0 + squares)
        return _apply(self.name, self.arg.evaluate(x, k))

    def to_text(self):
        return f"{self.name}({self.arg.to_text()})"


def _node_precedence(node):
    if isinstance(node, BinOp):
        return PRECEDENCE[node.op]
    if isinstance(node, Neg):
        return PRECEDENCE["neg"]
    return 10


def _wrap(node, min_prec):
    text = node.to_text()
    if _node_precedence(node) < min_prec:
        return f"({text})"
    return text


def _apply(name, value):
    if isinstance(value, Jet):
        return getattr(value, name)()
    return getattr(np, name)(value)


def _power(base, exponent):
    if isinstance(exponent, Jet):
        if isinstance(base, Jet):
            return base**exponent
        return (exponent * np.log(base)).exp()
    return base**exponent


def _sign_class(node):
    """'pos', 'nonneg' or None when the sign cannot be read off the tree."""
    if isinstance(node, Num):
        if node.value > 0:
            return "pos"
        return "nonneg" if node.value == 0 else None
    if isinstance(node, Call):
        if node.name in ("jb", "exp"):
            return "pos"
        if node.name == "norm2":
            return "nonneg"
        if node.name == "sqrt":
            return _sign_class(node.arg)
        return None
    if isinstance(node, BinOp):
        left, right = _sign_class(node.left), _sign_class(node.right)
        if node.op == "^":
            if left == "pos":
                return "pos"
            exponent = node.right
            if isinstance(exponent, Num) and exponent.value % 2 == 0:
                return "nonneg"
            return None
        if node.op == "+":
            if "pos" in (left, right) and None not in (left, right):
                return "pos"
            if left == right == "nonneg":
                return "nonneg"
            return None
        if node.op in ("*", "/") and left and right:
            return "pos" if left == right == "pos" else "nonneg"
    return None


def nonvanishing(node):
    if _sign_class(node) == "pos":
        return True
    if isinstance(node, Num):
        return node.value != 0
    if isinstance(node, Neg):
        return nonvanishing(node.operand)
    if isinstance(node, BinOp) and node.op in ("*", "/"):
        return nonvanishing(node.left) and nonvanishing(node.right)
    if isinstance(node, BinOp) and node.op == "^":
        return nonvanishing(node.left)
    return False


class Parser:
    def __init__(self, text, dims, assume_nonvanishing=False):
        self.text = text
        self.d, self.s = dims
        self.assume_nonvanishing = assume_nonvanishing
        self.tokens = tokenize(text)
        self.pos = 0
        self.x_offset = 0 if re.search(r"\bx0\b", text) else 1

    @property
    def current(self):
        return self.tokens[self.pos]

    def advance(self):
        token = self.current
        self.pos += 1
        return token

    def expect(self, text):
        token = self.current
        if token.text != text:
            found = token.text or "end of input"
            raise ParseError(
                f"Expected {text!r}, found {found!r}", token.position
            )
        return self.advance()

    def parse(self):
        if self.current.kind == "end":
            raise ParseError("Empty expression", 0)
        node = self.expr()
        if self.current.kind != "end":
            raise ParseError(
                f"Unexpected token {self.current.text!r}",
                self.current.position,
            )
        return node

    def expr(self):
        node = self.term()
        while self.current.text in ("+", "-"):
            op = self.advance().text
            node = BinOp(op, node, self.term())
        return node

    def term(self):
        node = self.unary()
        while self.current.text in ("*", "/"):
            token = self.advance()
            right = self.unary()
            if token.text == "/":
                self.check_denominator(right, token.position)
            node = BinOp(token.text, node, right)
        return node

    def unary(self):
        if self.current.text == "-":
            self.advance()
            return Neg(self.unary())
        if self.current.text == "+":
            self.advance()
            return self.unary()
        return self.power()

    def power(self):
        base = self.atom()
        if self.current.text != "^":
            return base
        token = self.advance()
        exponent = self.unary()
        negative = isinstance(exponent, Neg) or (
            isinstance(exponent, Num)
            and not (exponent.value >= 0 and exponent.value.is_integer())
        )
        if negative or not isinstance(exponent, Num):
            self.check_denominator(base, token.position)
        return BinOp("^", base, exponent)

    def check_denominator(self, node, position):
        if self.assume_nonvanishing or nonvanishing(node):
            return
        raise ParseError(
            "Division by a subexpression that may vanish; use jb(...)^p "
            "or pass assume_nonvanishing",
            position,
        )

    def atom(self):
        token = self.current
        if token.kind == "number":
            self.advance()
            return Num(float(token.text))
        if token.text == "(":
            self.advance()
            node = self.expr()
            self.expect(")")
            return node
        if token.kind == "name":
            return self.named(token)
        found = token.text or "end of input"
        raise ParseError(f"Unexpected token {found!r}", token.position)

    def named(self, token):
        self.advance()
        if token.text == "pi":
            return Num(math.pi)
        if token.text in SCALAR_FUNCTIONS:
            self.expect("(")
            arg = self.expr()
            self.expect(")")
            return Call(token.text, arg)
        if token.text in VECTOR_FUNCTIONS:
            self.expect("(")
            arg = self.vector()
            self.expect(")")
            return Call(token.text, arg)
        if token.text in ("x", "k"):
            raise ParseError(
                f"Vector {token.text!r} used as a scalar", token.position
            )
        match = SCALAR_RE.match(token.text)
        if match is None:
            raise ParseError(f"Unknown name {token.text!r}", token.position)
        return self.variable(match, token)

    def variable(self, match, token):
        kind = match.group("kind")
        number = int(match.group("index"))
        offset = self.x_offset if kind == "x" else 1
        count = self.d if kind == "x" else self.s
        index = number - offset
        if not 0 <= index < count:
            raise ParseError(
                f"Variable {token.text} out of range for dimension {count}",
                token.position,
            )
        return Var(kind, index, token.text)

    def vector(self):
        token = self.current
        if token.text in ("x", "k"):
            self.advance()
            return Vector(token.text)
        if token.text == "[":
            self.advance()
            items = [self.expr()]
            while self.current.text == ",":
                self.advance()
                items.append(self.expr())
            self.expect("]")
            return Vector(None, tuple(items))
        raise ParseError(
            "Expected a vector (x, k or [...])", token.position
        )


@dataclasses.dataclass(frozen=True)
class Expression:
    text: str
    dims: tuple
    tree: object

    def evaluate(self, x_jets, k_jets):
        return self.tree.evaluate(x_jets, k_jets)

    def to_text(self):
        return self.tree.to_text()


def parse_expression(text, dims, assume_nonvanishing=False):
    tree = Parser(text, dims, assume_nonvanishing).parse()
    logger.debug(f"Parsed {text!r} for dims {dims}")
    return Expression(text=text, dims=tuple(dims), tree=tree)
