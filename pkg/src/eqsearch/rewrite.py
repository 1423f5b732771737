"""The eight focused rewrite rules: application, neighbors, certificates.

The hot kernels live in eqsearch._kernel; a Cython-compiled build of the
same source (eqsearch._kernel_c) is preferred when present.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import IntEnum

try:
    from . import _kernel_c as kernel
    KERNEL_BACKEND = "compiled"
except ImportError:  # extension not built; interpreted fallback
    from . import _kernel as kernel
    KERNEL_BACKEND = "pure"


class Transformation(IntEnum):
    """Canonical rule ordering; indices double as classifier class labels."""

    COMMUTE = 0
    ASSOC_RIGHT = 1
    ASSOC_LEFT = 2
    DISTRIBUTE = 3
    FACTOR = 4
    FOCUS_UP = 5
    FOCUS_LEFT = 6
    FOCUS_RIGHT = 7


TRANSFORMATION_NAMES = (
    'commute', 'assoc_right', 'assoc_left', 'distribute',
    'factor', 'focus_up', 'focus_left', 'focus_right',
)
NUM_TRANSFORMATIONS = 8

# inverse rule for every rule; applying t then INVERSES[t] is the identity
INVERSES = {
    Transformation.COMMUTE: Transformation.COMMUTE,
    Transformation.ASSOC_RIGHT: Transformation.ASSOC_LEFT,
    Transformation.ASSOC_LEFT: Transformation.ASSOC_RIGHT,
    Transformation.DISTRIBUTE: Transformation.FACTOR,
    Transformation.FACTOR: Transformation.DISTRIBUTE,
    Transformation.FOCUS_UP: None,  # focus_left or focus_right, position-dependent
    Transformation.FOCUS_LEFT: Transformation.FOCUS_UP,
    Transformation.FOCUS_RIGHT: Transformation.FOCUS_UP,
}


def transformation_from_name(name: str) -> Transformation:
    try:
        return Transformation(TRANSFORMATION_NAMES.index(name))
    except ValueError:
        raise ValueError(f"unknown transformation name {name!r}") from None


def apply(e, t: Transformation):
    """Result of applying t at the focus of e, or None when inapplicable."""
    return kernel.apply_transformation(e, int(t))


def neighbors(e):
    """All applicable (Transformation, result) pairs in canonical order."""
    return [(Transformation(k), n) for k, n in kernel.neighbors(e)]


class StepFailed(Exception):
    """A path step did not apply; .index is the offending position."""

    def __init__(self, index, transformation):
        self.index = index
        self.transformation = transformation
        super().__init__(
            f"step {index} ({TRANSFORMATION_NAMES[transformation]}) not applicable")


def apply_path(e, path):
    """Apply a sequence of transformations; raises StepFailed."""
    for i, t in enumerate(path):
        nxt = kernel.apply_transformation(e, int(t))
        if nxt is None:
            raise StepFailed(i, int(t))
        e = nxt
    return e


@dataclass(frozen=True)
class Verdict:
    valid: bool
    reason: str = ""

    def __bool__(self):
        return self.valid


def check_certificate(source, target, path) -> Verdict:
    """Replay the path on source and compare with target structurally."""
    try:
        final = apply_path(source, path)
    except StepFailed as err:
        return Verdict(False, str(err))
    if final != target:
        return Verdict(False, "final expression does not match target")
    return Verdict(True)


def path_to_lines(path) -> str:
    """One transformation name per line; the certificate exchange format."""
    return "".join(TRANSFORMATION_NAMES[int(t)] + "\n" for t in path)


def path_from_lines(text: str):
    path = []
    for line in text.splitlines():
        line = line.strip()
        if line:
            path.append(transformation_from_name(line))
    return path
