"""Hot rewrite kernels: focus location, neighbor enumeration, layer expansion.

Expressions are immutable nested tuples:

    'a' | 'b' | 'c'            variable leaf
    ('F', child)               focus marker
    ('+', left, right)         addition
    ('*', left, right)         multiplication

This module is deliberately self-contained (no package imports) so it can
be compiled with Cython as eqsearch._kernel_c while staying importable as
plain Python. Transformation indices must stay in sync with
eqsearch.rewrite.Transformation.
"""

COMMUTE = 0
ASSOC_RIGHT = 1
ASSOC_LEFT = 2
DISTRIBUTE = 3
FACTOR = 4
FOCUS_UP = 5
FOCUS_LEFT = 6
FOCUS_RIGHT = 7


def find_focus(e, spine):
    """Locate the focus node, appending (op, side, sibling) spine entries.

    Returns the focus node ('F', child) or None if the subtree has no focus.
    """
    if isinstance(e, str):
        return None
    if e[0] == 'F':
        return e
    op = e[0]
    left = e[1]
    right = e[2]
    spine.append((op, 0, right))
    found = find_focus(left, spine)
    if found is not None:
        return found
    spine.pop()
    spine.append((op, 1, left))
    found = find_focus(right, spine)
    if found is not None:
        return found
    spine.pop()
    return None


def rebuild(spine, sub, upto):
    """Wrap sub with the first `upto` spine entries, innermost last."""
    i = upto - 1
    while i >= 0:
        op, side, sibling = spine[i]
        if side == 0:
            sub = (op, sub, sibling)
        else:
            sub = (op, sibling, sub)
        i -= 1
    return sub


def neighbors(e):
    """All applicable transformations of e, in canonical index order."""
    spine = []
    focus = find_focus(e, spine)
    child = focus[1]
    depth = len(spine)
    out = []
    if not isinstance(child, str):
        op = child[0]
        left = child[1]
        right = child[2]
        out.append((COMMUTE, rebuild(spine, ('F', (op, right, left)), depth)))
        if not isinstance(left, str) and left[0] == op:
            sub = ('F', (op, left[1], (op, left[2], right)))
            out.append((ASSOC_RIGHT, rebuild(spine, sub, depth)))
        if not isinstance(right, str) and right[0] == op:
            sub = ('F', (op, (op, left, right[1]), right[2]))
            out.append((ASSOC_LEFT, rebuild(spine, sub, depth)))
        if op == '*' and not isinstance(right, str) and right[0] == '+':
            sub = ('F', ('+', ('*', left, right[1]), ('*', left, right[2])))
            out.append((DISTRIBUTE, rebuild(spine, sub, depth)))
        if (op == '+'
                and not isinstance(left, str) and left[0] == '*'
                and not isinstance(right, str) and right[0] == '*'
                and left[1] == right[1]):
            sub = ('F', ('*', left[1], ('+', left[2], right[2])))
            out.append((FACTOR, rebuild(spine, sub, depth)))
    if depth > 0:
        op, side, sibling = spine[depth - 1]
        if side == 0:
            sub = ('F', (op, child, sibling))
        else:
            sub = ('F', (op, sibling, child))
        out.append((FOCUS_UP, rebuild(spine, sub, depth - 1)))
    if not isinstance(child, str):
        op = child[0]
        left = child[1]
        right = child[2]
        out.append((FOCUS_LEFT, rebuild(spine, (op, ('F', left), right), depth)))
        out.append((FOCUS_RIGHT, rebuild(spine, (op, left, ('F', right)), depth)))
    return out


def apply_transformation(e, kind):
    """Apply one transformation at the focus; None when it does not match."""
    for k, result in neighbors(e):
        if k == kind:
            return result
    return None


def expand_layer(frontier, visited):
    """One BFS layer: unvisited neighbors of frontier, marking them visited."""
    nxt = []
    for e in frontier:
        for _, n in neighbors(e):
            if n not in visited:
                visited.add(n)
                nxt.append(n)
    return nxt


def expand_layer_meeting(frontier, visited, other_visited):
    """Bidirectional BFS layer; returns (next_frontier, met).

    met is True as soon as a generated node is already visited from the
    other direction, in which case expansion stops early.
    """
    nxt = []
    for e in frontier:
        for _, n in neighbors(e):
            if n in other_visited:
                return nxt, True
            if n not in visited:
                visited.add(n)
                nxt.append(n)
    return nxt, False
