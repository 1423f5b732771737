"""Expression trees over {+, *, F, a, b, c}.

An expression is a nested tuple (see eqsearch._kernel for the exact shape)
with exactly one focus marker ('F', child). The textual exchange format is
a prefix s-expression, e.g. "(* a (F (+ b c)))".
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from random import Random

Expr = "str | tuple"  # 'a'|'b'|'c' | ('F', e) | ('+', l, r) | ('*', l, r)

VARIABLES = ('a', 'b', 'c')

# one-hot slot for each node symbol
NODE_CODES = {'+': 0, '*': 1, 'F': 2, 'a': 3, 'b': 4, 'c': 5}
CODE_SYMBOLS = {v: k for k, v in NODE_CODES.items()}
INPUT_DIM = 6


class ExprError(Exception):
    pass


class ExprSyntaxError(ExprError):
    """Malformed token stream."""


class FocusCountError(ExprError):
    """Expression does not contain exactly one focus marker."""


class InfeasibleRangeError(ExprError):
    """Requested random-expression height range cannot be met."""


_TOKEN_RE = re.compile(r'[()+*F]|[abc]|\S')


def _tokenize(text):
    tokens = _TOKEN_RE.findall(text)
    for tok in tokens:
        if tok not in ('(', ')', '+', '*', 'F', 'a', 'b', 'c'):
            raise ExprSyntaxError(f"unexpected token {tok!r}")
    return tokens


def parse(text: str):
    """Parse the prefix s-expression grammar into an expression tree."""
    tokens = _tokenize(text)
    pos = 0

    def need(i):
        if i >= len(tokens):
            raise ExprSyntaxError("unexpected end of input")
        return tokens[i]

    def expr(i):
        tok = need(i)
        if tok in VARIABLES:
            return tok, i + 1
        if tok != '(':
            raise ExprSyntaxError(f"expected '(' or variable, got {tok!r}")
        head = need(i + 1)
        if head in ('+', '*'):
            left, j = expr(i + 2)
            right, j = expr(j)
        elif head == 'F':
            child, j = expr(i + 2)
        else:
            raise ExprSyntaxError(f"expected operator after '(', got {head!r}")
        if need(j) != ')':
            raise ExprSyntaxError(f"expected ')', got {tokens[j]!r}")
        if head == 'F':
            return ('F', child), j + 1
        return (head, left, right), j + 1

    tree, pos = expr(0)
    if pos != len(tokens):
        raise ExprSyntaxError(f"trailing tokens: {' '.join(tokens[pos:])!r}")
    n = focus_count(tree)
    if n != 1:
        raise FocusCountError(f"expected exactly one focus marker, found {n}")
    return tree


def to_string(e) -> str:
    """Canonical textual form; parse(to_string(e)) == e."""
    if isinstance(e, str):
        return e
    if e[0] == 'F':
        return f"(F {to_string(e[1])})"
    return f"({e[0]} {to_string(e[1])} {to_string(e[2])})"


def focus_count(e) -> int:
    if isinstance(e, str):
        return 0
    if e[0] == 'F':
        return 1 + focus_count(e[1])
    return focus_count(e[1]) + focus_count(e[2])


def is_well_formed(e) -> bool:
    """Structural validity plus the single-focus invariant."""
    def shape_ok(node, under_focus):
        if isinstance(node, str):
            return node in VARIABLES
        if not isinstance(node, tuple):
            return False
        if node[0] == 'F':
            return (len(node) == 2 and not under_focus
                    and shape_ok(node[1], True))
        if node[0] in ('+', '*'):
            return (len(node) == 3 and shape_ok(node[1], False)
                    and shape_ok(node[2], False))
        return False

    return shape_ok(e, False) and focus_count(e) == 1


def length(e) -> int:
    """Number of nodes in the tree, focus marker included."""
    if isinstance(e, str):
        return 1
    if e[0] == 'F':
        return 1 + length(e[1])
    return 1 + length(e[1]) + length(e[2])


def height(e) -> int:
    """Length (edge count) of the longest root-to-leaf path."""
    if isinstance(e, str):
        return 0
    if e[0] == 'F':
        return 1 + height(e[1])
    return 1 + max(height(e[1]), height(e[2]))


DEFAULT_MODULUS = 2**31 - 1  # Mersenne prime


def evaluate(e, assignment, modulus: int = DEFAULT_MODULUS) -> int:
    """Value of e in Z/modulus, with the focus treated as identity."""
    if isinstance(e, str):
        return assignment[e] % modulus
    if e[0] == 'F':
        return evaluate(e[1], assignment, modulus)
    left = evaluate(e[1], assignment, modulus)
    right = evaluate(e[2], assignment, modulus)
    if e[0] == '+':
        return (left + right) % modulus
    return (left * right) % modulus


@dataclass(frozen=True)
class PostOrderSeq:
    """Post-order traversal as parallel (one-hot slot, arity) sequences."""

    values: tuple
    arities: tuple

    def __len__(self):
        return len(self.values)


def encode_postorder(e) -> PostOrderSeq:
    values = []
    arities = []

    def walk(node):
        if isinstance(node, str):
            values.append(NODE_CODES[node])
            arities.append(0)
        elif node[0] == 'F':
            walk(node[1])
            values.append(NODE_CODES['F'])
            arities.append(1)
        else:
            walk(node[1])
            walk(node[2])
            values.append(NODE_CODES[node[0]])
            arities.append(2)

    walk(e)
    return PostOrderSeq(tuple(values), tuple(arities))


def decode_postorder(seq: PostOrderSeq):
    """Inverse of encode_postorder."""
    stack = []
    for code, arity in zip(seq.values, seq.arities):
        symbol = CODE_SYMBOLS[code]
        if arity == 0:
            stack.append(symbol)
        elif arity == 1:
            child = stack.pop()
            stack.append((symbol, child))
        else:
            right = stack.pop()
            left = stack.pop()
            stack.append((symbol, left, right))
    if len(stack) != 1:
        raise ValueError(f"sequence leaves {len(stack)} roots on the stack")
    return stack[0]


def gen_random_expr(height_range, rng) -> tuple:
    """Random well-formed expression with the focus at the root.

    height_range is (lo, hi) inclusive, counting the focus node; rng is a
    seed or a random.Random instance.
    """
    lo, hi = height_range
    if lo < 2:
        raise InfeasibleRangeError(f"minimum height {lo} < 2")
    if hi < lo:
        raise InfeasibleRangeError(f"empty height range [{lo}, {hi}]")
    if not isinstance(rng, Random):
        rng = Random(rng)

    def subtree(h):
        # exact edge-height h, no focus
        if h == 0:
            return rng.choice(VARIABLES)
        op = rng.choice(('+', '*'))
        tall = subtree(h - 1)
        other = subtree(rng.randint(0, h - 1))
        if rng.random() < 0.5:
            return (op, tall, other)
        return (op, other, tall)

    # the focus contributes one edge, so the operator tree below it has
    # edge-height target - 1
    return ('F', subtree(rng.randint(lo, hi) - 1))
