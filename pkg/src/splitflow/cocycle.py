"""Linear cocycles over a driving flow, discrete and continuous.

A discrete cocycle is generated by a step-operator sequence ``n -> A_n`` (the
one-step maps along the driven base orbit); a continuous one by a
matrix-valued generator ``t -> G(t)`` of the linear ODE ``x' = G(t) x``.
Both expose the two-parameter evolution maps by composition.  Integration is
classical fixed-step RK4: generators met in practice are smooth in time and a
fixed step keeps runs bit-reproducible per seed.
"""

from dataclasses import dataclass
from typing import Callable

import numpy as np

from .errors import IntegrationError

DEFAULT_STEP = 1.0 / 64.0


def spectral_norm(m):
    """Largest singular value (the operator norm used throughout)."""
    return float(np.linalg.norm(np.asarray(m, float), 2))


@dataclass(frozen=True)
class DiscreteCocycle:
    """Step-operator view of a discrete linear cocycle.

    ``step(n)`` returns the d x d matrix applied between times n and n+1
    along the base orbit; it must be deterministic in n.
    """

    step: Callable[[int], np.ndarray]
    dim: int
    label: str = ""

    @staticmethod
    def constant(matrix, label=""):
        m = np.atleast_2d(np.asarray(matrix, float)).copy()
        return DiscreteCocycle(lambda n: m, m.shape[0], label)

    @staticmethod
    def from_sequence(mapping, fallback=None, label=""):
        """Cocycle from a dict node -> matrix, with optional default matrix."""
        some = next(iter(mapping.values()))
        d = np.atleast_2d(np.asarray(some, float)).shape[0]

        def step(n):
            if n in mapping:
                return np.atleast_2d(np.asarray(mapping[n], float))
            if fallback is None:
                raise KeyError(f"no step operator at node {n}")
            return np.atleast_2d(np.asarray(fallback, float))

        return DiscreteCocycle(step, d, label)

    def perturbed(self, b_step):
        """The cocycle with steps ``A_n + B_n``."""
        return DiscreteCocycle(
            lambda n: self.step(n) + b_step(n), self.dim, self.label + "+B"
        )


class EvolutionProcessView:
    """Two-parameter maps ``phi_{t,s} = phi(t-s, shift s)`` of a cocycle.

    The base point is the one baked into the cocycle's step/generator
    closures; this view only fixes the two-time convention.
    """

    def __init__(self, cocycle):
        self.cocycle = cocycle
        self.discrete = isinstance(cocycle, DiscreteCocycle)

    def map(self, t, s):
        if t < s:
            raise ValueError("evolution maps need t >= s")
        if self.discrete:
            return compose_discrete(self.cocycle, int(t - s), base=int(s))
        return propagator(self.cocycle, float(s), float(t - s))


def export_matrix_csv(matrix, file, label=""):
    """Write a matrix as a labeled CSV block for cross-tool inspection."""
    matrix = np.atleast_2d(np.asarray(matrix, float))
    close = False
    if isinstance(file, (str, bytes)):
        file = open(file, "w", newline="\n")
        close = True
    try:
        if label:
            file.write(f"# {label}\n")
        for row in matrix:
            file.write(",".join(repr(float(v)) for v in row) + "\n")
    finally:
        if close:
            file.close()


def as_step_sequence(b, dim):
    """Normalize a perturbation spec (callable, dict, matrix, scalar) to n -> matrix."""
    if callable(b):
        return lambda n: np.atleast_2d(np.asarray(b(n), float))
    if isinstance(b, dict):
        z = np.zeros((dim, dim))
        return lambda n: np.atleast_2d(np.asarray(b.get(n, z), float))
    m = np.asarray(b, float)
    if m.ndim == 0:
        m = m * np.eye(dim)
    m = np.atleast_2d(m)
    return lambda n: m


def compose_discrete(c, n, base=0):
    """Ordered product ``A_{base+n-1} ... A_{base}`` (identity for n = 0)."""
    if n < 0:
        raise ValueError("compose_discrete needs n >= 0")
    out = np.eye(c.dim)
    for k in range(base, base + n):
        out = c.step(k) @ out
    return out


@dataclass(frozen=True)
class ContinuousCocycle:
    """Generator view of a continuous linear cocycle ``x' = generator(t) x``.

    ``step`` is the RK4 integrator step; tighten it when an oracle demands
    more accuracy than the O(step^4) default.  ``time_invariant`` marks an
    autonomous generator so unit propagators are computed once.
    """

    generator: Callable[[float], np.ndarray]
    dim: int
    step: float = DEFAULT_STEP
    label: str = ""
    time_invariant: bool = False

    @staticmethod
    def constant(matrix, step=DEFAULT_STEP, label=""):
        m = np.atleast_2d(np.asarray(matrix, float)).copy()
        return ContinuousCocycle(lambda t: m, m.shape[0], step, label,
                                 time_invariant=True)

    def with_step(self, step):
        return ContinuousCocycle(self.generator, self.dim, step, self.label,
                                 self.time_invariant)


def _rk4_matrix(gen, t0, t1, y0, step, samples=None):
    """Integrate Y' = gen(t) Y from t0 to t1; optionally record snapshots.

    ``samples``: number of equispaced snapshot intervals in [t0, t1]; when
    given, returns (Y_end, times, snapshots) with snapshots[0] = Y(t0).
    """
    span = t1 - t0
    if span == 0:
        out = np.array(y0, float)
        if samples is None:
            return out
        return out, np.array([t0]), np.array([out])
    if samples is None:
        n = max(1, int(np.ceil(abs(span) / step - 1e-12)))
        bounds = np.linspace(t0, t1, n + 1)
        snaps = None
    else:
        per = max(1, int(np.ceil(abs(span) / (samples * step) - 1e-12)))
        n = per * samples
        bounds = np.linspace(t0, t1, n + 1)
        snaps = [np.array(y0, float)]
    y = np.array(y0, float)
    for i in range(n):
        ta, tb = bounds[i], bounds[i + 1]
        hh = tb - ta
        k1 = gen(ta) @ y
        k2 = gen(ta + hh / 2) @ (y + hh / 2 * k1)
        k3 = gen(ta + hh / 2) @ (y + hh / 2 * k2)
        k4 = gen(tb) @ (y + hh * k3)
        y = y + (hh / 6) * (k1 + 2 * k2 + 2 * k3 + k4)
        if snaps is not None and (i + 1) % per == 0:
            snaps.append(y.copy())
    if not np.all(np.isfinite(y)):
        raise IntegrationError(f"non-finite state while integrating [{t0}, {t1}]")
    if snaps is None:
        return y
    return y, np.linspace(t0, t1, samples + 1), np.array(snaps)


def integrate(c, t0, t1, x0):
    """Solve ``x' = generator(t) x`` from (t0, x0) to t1 (t1 >= t0)."""
    if t1 < t0:
        raise ValueError("integrate needs t1 >= t0")
    x0 = np.asarray(x0, float)
    scalar = x0.ndim == 0
    y = _rk4_matrix(c.generator, t0, t1, np.atleast_1d(x0), c.step)
    return float(y[0]) if scalar else y


def propagator(c, shift, duration, samples=None):
    """The matrix ``phi(duration)`` along the orbit started at base shift.

    Integrates the matrix ODE over [shift, shift + duration]; with
    ``samples`` also returns equispaced snapshots for norm scans.
    """
    if duration < 0:
        raise ValueError("propagator needs duration >= 0")
    eye = np.eye(c.dim)
    return _rk4_matrix(c.generator, shift, shift + duration, eye, c.step,
                       samples=samples)


def integrate_nonlinear(field, t0, t1, y0, step=DEFAULT_STEP):
    """RK4 for a nonlinear field ``y' = field(t, y)`` (oracles and demos)."""
    if t1 < t0:
        raise ValueError("integrate_nonlinear needs t1 >= t0")
    y = np.array(np.atleast_1d(y0), float)
    span = t1 - t0
    if span == 0:
        return y
    n = max(1, int(np.ceil(span / step - 1e-12)))
    bounds = np.linspace(t0, t1, n + 1)
    for i in range(n):
        ta, tb = bounds[i], bounds[i + 1]
        hh = tb - ta
        k1 = np.asarray(field(ta, y), float)
        k2 = np.asarray(field(ta + hh / 2, y + hh / 2 * k1), float)
        k3 = np.asarray(field(ta + hh / 2, y + hh / 2 * k2), float)
        k4 = np.asarray(field(tb, y + hh * k3), float)
        y = y + (hh / 6) * (k1 + 2 * k2 + 2 * k3 + k4)
    if not np.all(np.isfinite(y)):
        raise IntegrationError(f"non-finite state while integrating [{t0}, {t1}]")
    return y


def discretize(c):
    """Unit-time step operators ``n -> phi(1, shift n)``, memoized."""
    cache = {}

    def step(n):
        key = 0 if c.time_invariant else n
        if key not in cache:
            cache[key] = propagator(c, float(key), 1.0)
        return cache[key]

    return DiscreteCocycle(step, c.dim, label=c.label + "|unit")


def unit_scan(c, shift, samples_per_unit=64):
    """Norm snapshots of ``t -> phi(t, shift)`` for t in [0, 1]."""
    _, ts, snaps = propagator(c, shift, 1.0, samples=samples_per_unit)
    return ts, np.array([spectral_norm(m) for m in snaps]), snaps


def one_step_bound(c, window, samples_per_unit=64):
    """Sampled sup of ``|phi(t, shift)|`` over unit intervals in ``window``.

    The sup runs over integer shifts in the window and t in [0, 1] sampled at
    ``samples_per_unit`` points; the value is a sampled lower bound of the
    true supremum.
    """
    best = 0.0
    for n in window.integer_nodes()[:-1]:
        _, norms, _ = unit_scan(c, float(n), samples_per_unit)
        best = max(best, float(norms.max()))
    return best
