"""Symbolic 256-bit words: expression trees, constant folding, and tree queries.

Values come in three shapes: Concrete (a known 256-bit word), Symbol (an
environment input such as CALLVALUE or a storage read, optionally carrying
argument expressions like the SLOAD slot), and Apply (an operator over child
expressions). Trees are immutable; equality and hashing are structural.

There is deliberately no SMT solving here. Feasibility is decided by the
shortcut used throughout the analyzer: a condition is infeasible only when it
folds to the concrete word 0, and satisfiable otherwise.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterator, Union

WORD_BITS = 256
WORD_MOD = 1 << WORD_BITS
WORD_MAX = WORD_MOD - 1
_SIGN_BIT = 1 << (WORD_BITS - 1)

DEFAULT_DEPTH_CAP = 64

# tag for nodes that replaced a subtree deeper than the cap
OPAQUE_TAG = "OPAQUE"


@dataclass(frozen=True, slots=True)
class Concrete:
    value: int
    depth: int = field(default=1, init=False, compare=False)
    folded: bool = field(default=True, init=False, compare=False)
    hval: int = field(default=0, init=False, compare=False)

    def __post_init__(self) -> None:
        object.__setattr__(self, "value", self.value & WORD_MAX)
        object.__setattr__(self, "hval", hash(("C", self.value)))

    def __hash__(self) -> int:
        return self.hval

    def __str__(self) -> str:
        return str(self.value) if self.value < 1 << 20 else hex(self.value)


@dataclass(frozen=True, slots=True)
class Symbol:
    tag: str
    uid: int
    args: tuple["SymbolicValue", ...] = ()
    depth: int = field(default=1, init=False, compare=False)
    folded: bool = field(default=False, init=False, compare=False)
    hval: int = field(default=0, init=False, compare=False)

    def __post_init__(self) -> None:
        d = 1 + max((a.depth for a in self.args), default=0)
        object.__setattr__(self, "depth", d)
        object.__setattr__(self, "folded", all(a.folded for a in self.args))
        object.__setattr__(self, "hval", hash(("S", self.tag, self.uid, self.args)))

    def __hash__(self) -> int:
        return self.hval

    def __str__(self) -> str:
        inner = ", ".join(str(a) for a in self.args)
        return f"{self.tag}({inner})#{self.uid}" if self.args else f"{self.tag}#{self.uid}"


@dataclass(frozen=True, slots=True)
class Apply:
    tag: str
    args: tuple["SymbolicValue", ...]
    depth: int = field(default=1, init=False, compare=False)
    folded: bool = field(default=False, init=False, compare=False)
    hval: int = field(default=0, init=False, compare=False)

    def __post_init__(self) -> None:
        d = 1 + max((a.depth for a in self.args), default=0)
        object.__setattr__(self, "depth", d)
        object.__setattr__(self, "hval", hash(("A", self.tag, self.args)))

    def __hash__(self) -> int:
        return self.hval

    def __str__(self) -> str:
        return f"{self.tag}({', '.join(str(a) for a in self.args)})"


SymbolicValue = Union[Concrete, Symbol, Apply]

ZERO = Concrete(0)
ONE = Concrete(1)


def _to_signed(v: int) -> int:
    return v - WORD_MOD if v & _SIGN_BIT else v


def _sdiv(a: int, b: int) -> int:
    if b == 0:
        return 0
    sa, sb = _to_signed(a), _to_signed(b)
    q = abs(sa) // abs(sb)
    if (sa < 0) != (sb < 0):
        q = -q
    return q & WORD_MAX


def _smod(a: int, b: int) -> int:
    if b == 0:
        return 0
    sa, sb = _to_signed(a), _to_signed(b)
    r = abs(sa) % abs(sb)
    return (-r if sa < 0 else r) & WORD_MAX


def _byte(i: int, x: int) -> int:
    if i >= 32:
        return 0
    return (x >> (8 * (31 - i))) & 0xFF


def _signextend(k: int, x: int) -> int:
    if k >= 31:
        return x
    bit = 8 * (k + 1) - 1
    if x & (1 << bit):
        return x | (WORD_MAX ^ ((1 << (bit + 1)) - 1))
    return x & ((1 << (bit + 1)) - 1)


def _sar(shift: int, x: int) -> int:
    s = _to_signed(x)
    if shift >= WORD_BITS:
        return WORD_MAX if s < 0 else 0
    return (s >> shift) & WORD_MAX


# Concrete evaluation per operator, over already-masked words. Argument order
# matches EVM pop order (first-popped first).
_EVAL = {
    "ADD": lambda a, b: (a + b) & WORD_MAX,
    "MUL": lambda a, b: (a * b) & WORD_MAX,
    "SUB": lambda a, b: (a - b) & WORD_MAX,
    "DIV": lambda a, b: a // b if b else 0,
    "SDIV": _sdiv,
    "MOD": lambda a, b: a % b if b else 0,
    "SMOD": _smod,
    "EXP": lambda a, b: pow(a, b, WORD_MOD),
    "SIGNEXTEND": _signextend,
    "AND": lambda a, b: a & b,
    "OR": lambda a, b: a | b,
    "XOR": lambda a, b: a ^ b,
    "NOT": lambda a: a ^ WORD_MAX,
    "SHL": lambda s, x: (x << s) & WORD_MAX if s < WORD_BITS else 0,
    "SHR": lambda s, x: x >> s if s < WORD_BITS else 0,
    "SAR": _sar,
    "LT": lambda a, b: int(a < b),
    "GT": lambda a, b: int(a > b),
    "SLT": lambda a, b: int(_to_signed(a) < _to_signed(b)),
    "SGT": lambda a, b: int(_to_signed(a) > _to_signed(b)),
    "EQ": lambda a, b: int(a == b),
    "ISZERO": lambda a: int(a == 0),
    "BYTE": _byte,
    "ADDMOD": lambda a, b, n: (a + b) % n if n else 0,
    "MULMOD": lambda a, b, n: (a * b) % n if n else 0,
}

FOLDABLE_OPS = frozenset(_EVAL)

COMPARISON_OPS = frozenset({"LT", "GT", "SLT", "SGT", "EQ"})


def fold(expr: SymbolicValue) -> SymbolicValue:
    """Reduce every all-concrete operator application to a Concrete word.

    Semantics-preserving under 256-bit modular arithmetic and idempotent.
    Division and modulo by zero fold to 0, as the machine defines them.
    Fully-reduced trees carry a marker, so re-folding is constant time.
    """
    if expr.folded:
        return expr
    if isinstance(expr, Symbol):
        args = tuple(fold(a) for a in expr.args)
        result = expr if args == expr.args else Symbol(expr.tag, expr.uid, args)
    else:
        args = tuple(fold(a) for a in expr.args)
        fn = _EVAL.get(expr.tag)
        if fn is not None and all(isinstance(a, Concrete) for a in args):
            return Concrete(fn(*(a.value for a in args)))
        result = expr if args == expr.args else Apply(expr.tag, args)
    object.__setattr__(result, "folded", True)
    return result


def is_statically_false(cond: SymbolicValue) -> bool:
    """Solver-free feasibility shortcut: only the concrete word 0 is
    unsatisfiable; every other condition counts as satisfiable."""
    return isinstance(cond, Concrete) and cond.value == 0


def walk(expr: SymbolicValue) -> Iterator[SymbolicValue]:
    """Yield every node of the tree, root first."""
    stack = [expr]
    while stack:
        node = stack.pop()
        yield node
        if isinstance(node, (Symbol, Apply)):
            stack.extend(node.args)


def contains_tag(expr: SymbolicValue, tag: str) -> bool:
    """True iff any Symbol or Apply node in the tree carries the tag."""
    return any(
        isinstance(n, (Symbol, Apply)) and n.tag == tag for n in walk(expr)
    )


def contains_any_tag(expr: SymbolicValue, tags: frozenset[str] | set[str]) -> bool:
    return any(
        isinstance(n, (Symbol, Apply)) and n.tag in tags for n in walk(expr)
    )


def contains_literal(expr: SymbolicValue, value: int) -> bool:
    """True iff a Concrete node with exactly this value appears in the tree."""
    value &= WORD_MAX
    return any(isinstance(n, Concrete) and n.value == value for n in walk(expr))


def contains_node(expr: SymbolicValue, node: SymbolicValue) -> bool:
    """True iff a structurally equal node appears anywhere in the tree."""
    return any(n == node for n in walk(expr))


def node_count(expr: SymbolicValue) -> int:
    return sum(1 for _ in walk(expr))


def slot_ids(expr: SymbolicValue) -> set[SymbolicValue]:
    """Slot expressions of every storage read (SLOAD node) in the tree.

    Slots compare structurally after folding; there is no semantic equality.
    """
    out: set[SymbolicValue] = set()
    for n in walk(expr):
        if isinstance(n, (Symbol, Apply)) and n.tag == "SLOAD" and n.args:
            out.add(fold(n.args[0]))
    return out


class ExprBuilder:
    """Per-analysis factory for symbolic values.

    Symbol ids are scoped to one builder, so two analyses never share state.
    Environment inputs that are fixed for the whole execution (CALLER,
    CALLVALUE, block fields, ...) are memoized so repeated reads produce the
    same node; that is what lets storage slots derived from them compare
    structurally across program points. Inputs that genuinely vary (GAS, call
    results, unknown memory) get a fresh id every time.

    Trees are capped at `depth_cap`: an application that would exceed it is
    replaced by a fresh opaque Symbol, keeping every downstream traversal
    bounded.
    """

    def __init__(self, depth_cap: int = DEFAULT_DEPTH_CAP) -> None:
        self.depth_cap = depth_cap
        self._next_uid = 0
        self._memo: dict[tuple[str, tuple[SymbolicValue, ...]], Symbol] = {}

    def _uid(self) -> int:
        self._next_uid += 1
        return self._next_uid

    def fresh_symbol(self, tag: str, args: tuple[SymbolicValue, ...] = ()) -> Symbol:
        return Symbol(tag, self._uid(), args)

    def memo_symbol(self, tag: str, args: tuple[SymbolicValue, ...] = ()) -> Symbol:
        key = (tag, args)
        sym = self._memo.get(key)
        if sym is None:
            sym = self.fresh_symbol(tag, args)
            self._memo[key] = sym
        return sym

    def apply(self, op: str, args: tuple[SymbolicValue, ...]) -> SymbolicValue:
        result = fold(Apply(op, args))
        if result.depth > self.depth_cap:
            return self.fresh_symbol(OPAQUE_TAG)
        return result


def render(expr: SymbolicValue, ids: bool = True) -> str:
    """Human-readable functional notation, e.g. ISZERO(GT(CALLDATALOAD(0)#1, 10)).

    Operator arguments print in pop order (first-popped first). With
    `ids=False` the per-analysis symbol numbers are omitted, which gives a
    rendering that does not depend on path-exploration order.
    """
    if ids:
        return str(expr)
    if isinstance(expr, Concrete):
        return str(expr)
    inner = ", ".join(render(a, ids=False) for a in expr.args)
    if isinstance(expr, Symbol) and not expr.args:
        return expr.tag
    return f"{expr.tag}({inner})"
