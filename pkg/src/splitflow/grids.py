"""Uniform two-sided time grids.

Every sampled object in the library lives on a :class:`TimeGrid`: a uniform
grid with step ``h`` that contains ``t = 0`` exactly and reaches into both
half-lines.  Node arithmetic is done on integer indices (``t = n * h``) so
that shifts and window checks are exact.
"""

from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigurationError

_REL_TOL = 1e-9


def _as_node(t, h, what="time"):
    """Integer node index of ``t`` on a grid of step ``h``; error if off-grid."""
    q = t / h
    n = round(q)
    if abs(q - n) > _REL_TOL * max(1.0, abs(q)):
        raise ConfigurationError(f"{what} {t!r} is not a multiple of the grid step {h!r}")
    return int(n)


@dataclass(frozen=True)
class TimeGrid:
    """Uniform grid on [t_min, t_max] with step h, containing 0 exactly.

    Parameters
    ----------
    t_min, t_max : float
        Window endpoints, ``t_min < 0 < t_max``.  Both must be integer
        multiples of ``h``.
    h : float
        Grid step, ``h > 0``.
    """

    t_min: float
    t_max: float
    h: float
    n_min: int = field(init=False, repr=False, compare=False)
    n_max: int = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        if not (self.h > 0.0 and np.isfinite(self.h)):
            raise ConfigurationError(f"grid step must be positive, got {self.h!r}")
        if not (self.t_min < 0.0 < self.t_max):
            raise ConfigurationError(
                f"grid must straddle 0: got [{self.t_min!r}, {self.t_max!r}]"
            )
        object.__setattr__(self, "n_min", _as_node(self.t_min, self.h, "t_min"))
        object.__setattr__(self, "n_max", _as_node(self.t_max, self.h, "t_max"))

    @property
    def n_nodes(self):
        return self.n_max - self.n_min + 1

    def times(self):
        """All grid nodes as an array, in increasing order."""
        return np.arange(self.n_min, self.n_max + 1) * self.h

    def index_of(self, t):
        """Array offset of grid time ``t`` (0 for ``t_min``)."""
        n = _as_node(t, self.h, "time")
        if not self.n_min <= n <= self.n_max:
            raise ConfigurationError(f"time {t!r} outside grid [{self.t_min}, {self.t_max}]")
        return n - self.n_min

    def node_of(self, t):
        """Signed node index of grid time ``t`` (0 for ``t = 0``)."""
        return _as_node(t, self.h, "time")

    def contains(self, t):
        q = t / self.h
        n = round(q)
        return (
            abs(q - n) <= _REL_TOL * max(1.0, abs(q)) and self.n_min <= n <= self.n_max
        )

    def shifted(self, t):
        """The grid seen from a base point moved by ``t`` (a grid multiple)."""
        n = _as_node(t, self.h, "shift")
        return TimeGrid((self.n_min - n) * self.h, (self.n_max - n) * self.h, self.h)

    def widened(self, left, right):
        """Grow the window by ``left`` seconds leftwards and ``right`` rightwards."""
        nl = _as_node(left, self.h, "left extension")
        nr = _as_node(right, self.h, "right extension")
        if nl < 0 or nr < 0:
            raise ConfigurationError("extensions must be nonnegative")
        return TimeGrid((self.n_min - nl) * self.h, (self.n_max + nr) * self.h, self.h)

    def integer_nodes(self):
        """Integer times contained in the grid (used as shift base points)."""
        per = _as_node(1.0, self.h, "unit") if self.contains_unit() else None
        if per is None:
            raise ConfigurationError("grid step does not divide 1; no integer nodes")
        lo = -((-self.n_min) // per)
        hi = self.n_max // per
        return np.arange(lo, hi + 1)

    def contains_unit(self):
        q = 1.0 / self.h
        return abs(q - round(q)) <= _REL_TOL * max(1.0, q)
