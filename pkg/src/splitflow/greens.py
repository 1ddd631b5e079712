"""Bounded solutions of perturbed linear difference equations.

Given a cocycle with a dichotomy certificate, the unique bounded solution of

    x_{n+1} = A_n x_n + B_n x_n + f_n,   {f_n} bounded,

is the fixed point of the kernel sum

    (Gamma_f x)(n) = sum_k G(n, k+1) (B_k x_k + f_k),

a contraction on bounded sequences whenever the perturbation is small
against the dichotomy constants.  The sum is truncated at the certified
geometric-tail length; Picard iteration then yields the solution together
with a residual certificate.  (A direct banded linear solve would work too;
the iteration mirrors the contraction argument and its residual is the
certificate, so the linear-solve route is kept as a test oracle only.)
"""

import math
from dataclasses import dataclass, field

import numpy as np

from .cocycle import as_step_sequence, spectral_norm
from .dichotomy import _range_basis
from .errors import ConfigurationError, ContractionMarginError, SplitflowError

DEFAULT_TRUNC_TOL = 1e-10
CONTRACTION_MARGIN = 0.9  # enforced bound on the contraction factor rho


def truncation_length(alpha, sup_bound, tol):
    """Smallest N with ``sup_bound * e^{-alpha N} / (1 - e^{-alpha}) <= tol``.

    The geometric tail of the kernel sum beyond N is below ``tol``.
    """
    if not alpha > 0.0:
        raise ValueError(f"decay exponent must be positive, got {alpha}")
    if not tol > 0.0:
        raise ValueError(f"tolerance must be positive, got {tol}")
    if sup_bound <= 0.0:
        return 0
    lim = sup_bound / (1.0 - math.exp(-alpha))
    if lim <= tol:
        return 0
    return int(math.ceil(math.log(lim / tol) / alpha))


@dataclass
class ForcingSequence:
    """Forcing on an integer window; zero outside the window by convention.

    ``values[i]`` is f at node ``n_min + i``; shape (W, d) for vector forcing
    or (W, d, r) for r simultaneous right-hand sides.
    """

    n_min: int
    n_max: int
    values: np.ndarray

    def __post_init__(self):
        self.values = np.asarray(self.values, float)
        w = self.n_max - self.n_min + 1
        if self.values.shape[0] != w or self.values.ndim not in (2, 3):
            raise ConfigurationError(
                f"forcing values must have shape (W, d[, r]) with W={w}, "
                f"got {self.values.shape}"
            )
        if not np.all(np.isfinite(self.values)):
            raise ConfigurationError("forcing values must be finite")

    @staticmethod
    def zeros(n_min, n_max, d, r=None):
        shape = (n_max - n_min + 1, d) if r is None else (n_max - n_min + 1, d, r)
        return ForcingSequence(n_min, n_max, np.zeros(shape))

    @staticmethod
    def impulse(n_min, n_max, node, payload):
        """Forcing equal to ``payload`` at ``node`` and zero elsewhere."""
        payload = np.asarray(payload, float)
        if not n_min <= node <= n_max:
            raise ConfigurationError(f"impulse node {node} outside window")
        f = ForcingSequence.zeros(n_min, n_max, payload.shape[0],
                                  None if payload.ndim == 1 else payload.shape[1])
        f.values[node - n_min] = payload
        return f

    @property
    def window(self):
        return (self.n_min, self.n_max)

    def sup_norm(self):
        return _seq_sup(self.values)


def _seq_sup(values):
    """Sup over nodes of the Euclidean (vector) or spectral (matrix) norm."""
    values = np.asarray(values, float)
    if len(values) == 0:
        return 0.0
    if values.ndim == 2:
        return float(np.max(np.linalg.norm(values, axis=1)))
    return float(max(spectral_norm(v) for v in values))


class GreenBand:
    """Banded table of Green-kernel values over an integer window.

    For every source node ``m`` in [n_lo+1, n_hi+1] the table holds
    ``G(m+j, m)`` for forward offsets j in [0, band] and ``G(m-j, m)`` for
    backward offsets j in [1, band], targets clipped to [n_lo, n_hi].
    Source index i corresponds to m = n_lo + 1 + i, matching the index of
    the forcing entry k = m - 1 it multiplies.
    """

    def __init__(self, cocycle, cert, n_lo, n_hi, band):
        self.n_lo, self.n_hi, self.band = n_lo, n_hi, band
        d = cocycle.dim
        self.d = d
        w = n_hi - n_lo + 1
        steps = {n: np.atleast_2d(np.asarray(cocycle.step(n), float))
                 for n in range(n_lo, n_hi + 1)}
        proj_s = {m: cert.proj_s(m) for m in range(n_lo, n_hi + 2)}

        self.fwd = np.zeros((band + 1, w + 1, d, d))
        for i, m in enumerate(range(n_lo + 1, n_hi + 2)):
            jmax = min(n_hi - m, band)
            if jmax < 0:
                continue
            cur = proj_s[m]
            self.fwd[0, i] = cur
            for j in range(1, jmax + 1):
                # re-project onto the stable range: kills round-off
                # components that would grow along the unstable directions
                cur = proj_s[m + j] @ (steps[m + j - 1] @ cur)
                self.fwd[j, i] = cur

        bases = {m: _range_basis(np.eye(d) - proj_s[m])
                 for m in range(n_lo, n_hi + 2)}
        back_step = {}
        for n in range(n_lo, n_hi + 1):
            bn, bn1 = bases[n], bases[n + 1]
            if bn1.shape[1] == 0:
                back_step[n] = np.zeros((d, d))
                continue
            if bn.shape[1] != bn1.shape[1]:
                raise SplitflowError(
                    f"unstable rank changes across node {n}; no backward branch"
                )
            wmat = bn1.T @ steps[n] @ bn
            sv = np.linalg.svd(wmat, compute_uv=False)
            if sv[-1] <= 1e-300:
                raise SplitflowError(
                    f"unstable-restricted step at node {n} is singular"
                )
            back_step[n] = bn @ np.linalg.inv(wmat) @ bn1.T

        self.bwd = np.zeros((band + 1, w + 1, d, d))
        for i, m in enumerate(range(n_lo + 1, n_hi + 2)):
            cur = -(np.eye(d) - proj_s[m])  # marching seed, not a kernel value
            jmax = min(m - n_lo, band)
            for j in range(1, jmax + 1):
                cur = back_step[m - j] @ cur
                self.bwd[j, i] = cur

    def apply(self, u):
        """``out(n) = sum_k G(n, k+1) u(k)`` over the band; u lives on the window."""
        w = self.n_hi - self.n_lo + 1
        out = np.zeros((w,) + u.shape[1:])
        for j in range(self.band + 1):
            imax = w - 2 - j  # largest source index whose target stays in window
            if imax >= 0:
                out[j + 1 : j + 2 + imax] += np.einsum(
                    "kab,kb...->ka...", self.fwd[j, : imax + 1], u[: imax + 1]
                )
        for j in range(1, self.band + 1):
            imin = j - 1  # smallest source index whose target stays in window
            if imin <= w - 1:
                out[: w - imin] += np.einsum(
                    "kab,kb...->ka...", self.bwd[j, imin:w], u[imin:w]
                )
        return out


def _delta_eff(cert, b_step, n_lo, n_hi):
    norms = [spectral_norm(b_step(n)) for n in range(n_lo, n_hi + 1)]
    return cert.bound * (max(norms) if norms else 0.0)


def _band_for(cert, delta_eff, f_sup, trunc_tol):
    e = math.exp(-cert.exponent)
    rho = min(delta_eff * (1.0 + e) / (1.0 - e), CONTRACTION_MARGIN)
    apriori = cert.bound * f_sup * (1.0 + e) / ((1.0 - e) * max(1.0 - rho, 1e-12))
    sup_term = 2.0 * (delta_eff * apriori + cert.bound * f_sup)  # both tails
    return truncation_length(cert.exponent, sup_term, trunc_tol)


def gamma_apply(cocycle, cert, b, f, x, trunc_tol=DEFAULT_TRUNC_TOL):
    """One application of the kernel sum to a candidate sequence.

    ``x`` has the forcing's window shape; the truncated series is evaluated
    at every window node.  Linear in (x, f).
    """
    n_lo, n_hi = f.window
    x = np.asarray(x, float)
    if x.shape != f.values.shape:
        raise ConfigurationError(
            f"candidate shape {x.shape} does not match forcing {f.values.shape}"
        )
    b_step = as_step_sequence(b, cocycle.dim)
    delta_eff = _delta_eff(cert, b_step, n_lo, n_hi)
    band = min(_band_for(cert, delta_eff, max(f.sup_norm(), _seq_sup(x)), trunc_tol),
               n_hi - n_lo + 1)
    gb = GreenBand(cocycle, cert, n_lo, n_hi, band)
    u = np.stack([b_step(n) @ x[i] for i, n in enumerate(range(n_lo, n_hi + 1))])
    return gb.apply(u + f.values)


@dataclass
class BoundedSolution:
    """Fixed point of the kernel contraction, with its residual certificate.

    Nodes within the truncation band of the window edges are
    edge-contaminated; ``interior`` is the clean sub-window.
    """

    n_min: int
    n_max: int
    values: np.ndarray
    residual: float
    iterations: int
    interior: tuple
    meta: dict = field(default_factory=dict)

    def value_at(self, n):
        return self.values[n - self.n_min]

    def interior_slice(self):
        lo, hi = self.interior
        return slice(lo - self.n_min, hi - self.n_min + 1)

    def sup_norm(self):
        return _seq_sup(self.values)

    def to_csv(self, file):
        close = False
        if isinstance(file, (str, bytes)):
            file = open(file, "w", newline="\n")
            close = True
        try:
            file.write(f"# residual={self.residual!r} iterations={self.iterations}\n")
            d = self.values.shape[1]
            file.write("n," + ",".join(f"x{i}" for i in range(d)) + "\n")
            for i, n in enumerate(range(self.n_min, self.n_max + 1)):
                row = ",".join(repr(float(v))
                               for v in np.atleast_1d(self.values[i]).ravel())
                file.write(f"{n},{row}\n")
        finally:
            if close:
                file.close()


def bounded_solution(cocycle, cert, b, f, tol=1e-8, trunc_tol=DEFAULT_TRUNC_TOL,
                     x0=None, max_iter=None):
    """Unique bounded solution of the perturbed nonhomogeneous equation.

    Requires the contraction margin
    ``rho = sup|B| * K * (1+e^{-a})/(1-e^{-a}) <= 0.9`` (the theory demands
    only < 1; the margin keeps iteration counts and downstream constants
    tame).  Returns the Picard fixed point with a certified sup-norm
    residual ``|Gamma_f x - x| <= tol``.
    """
    n_lo, n_hi = f.window
    b_step = as_step_sequence(b, cocycle.dim)
    delta_eff = _delta_eff(cert, b_step, n_lo, n_hi)
    e = math.exp(-cert.exponent)
    rho = delta_eff * (1.0 + e) / (1.0 - e)
    if rho > CONTRACTION_MARGIN:
        raise ContractionMarginError(
            f"contraction factor rho={rho:.4f} exceeds margin "
            f"{CONTRACTION_MARGIN}; the admissibility threshold on "
            f"sup|B|*K is {(1.0 - e) / (1.0 + e):.6f}",
            factor=rho, threshold=(1.0 - e) / (1.0 + e),
        )
    f_sup = f.sup_norm()
    band = min(_band_for(cert, delta_eff, f_sup, trunc_tol), n_hi - n_lo + 1)
    gb = GreenBand(cocycle, cert, n_lo, n_hi, band)

    def gamma(x):
        u = np.stack([b_step(n) @ x[i]
                      for i, n in enumerate(range(n_lo, n_hi + 1))])
        return gb.apply(u + f.values)

    x = np.zeros_like(f.values) if x0 is None else np.asarray(x0, float).copy()
    if max_iter is None:
        c0 = cert.bound * f_sup * (1.0 + e) / (1.0 - e) + _seq_sup(x)
        if rho > 0.0 and c0 > 0.0:
            max_iter = max(2, int(math.ceil(
                math.log(tol / (c0 + tol)) / math.log(rho))) + 20)
        else:
            max_iter = 3
    it = 0
    while it < max_iter:
        y = gamma(x)
        res = _seq_sup(y - x)
        x = y
        it += 1
        if res <= tol:
            break
    residual = _seq_sup(gamma(x) - x)
    if residual > tol:
        raise SplitflowError(
            f"Picard iteration did not certify residual {tol:g} "
            f"(got {residual:.3e} after {it} iterations)"
        )
    apriori = cert.bound * f_sup * (1.0 + e) / ((1.0 - e) * (1.0 - rho))
    sup = _seq_sup(x)
    if f_sup > 0.0 and sup > apriori * (1.0 + 1e-6) + 10.0 * (tol + trunc_tol):
        raise SplitflowError(
            f"a-priori bound violated: |x|={sup:.6g} > {apriori:.6g}"
        )
    interior = (n_lo + band, n_hi - band)
    return BoundedSolution(
        n_min=n_lo, n_max=n_hi, values=x, residual=residual, iterations=it,
        interior=interior,
        meta={"rho": rho, "delta_eff": delta_eff, "band": band,
              "apriori_bound": apriori, "sup_norm": sup},
    )


def impulse_response_projection(cocycle, cert, b, node, tol=1e-10,
                                trunc_tol=DEFAULT_TRUNC_TOL, margin=4):
    """Perturbed projections at ``node`` from unit-impulse bounded solutions.

    Solving with the impulse ``f_{node-1} = e_j`` and reading the bounded
    solution at the impulse node gives column j of the perturbed stable
    projection; the unstable one is its complement.  All d columns are
    solved at once.
    """
    d = cocycle.dim
    b_step = as_step_sequence(b, d)
    delta_eff = _delta_eff(cert, b_step, node - 2, node + 2)
    band = _band_for(cert, delta_eff, 1.0, trunc_tol)
    span = band + max(margin, 2)
    f = ForcingSequence.impulse(node - span, node + span, node - 1, np.eye(d))
    sol = bounded_solution(cocycle, cert, b, f, tol=tol, trunc_tol=trunc_tol)
    pi_s = sol.value_at(node)
    pi_u = np.eye(d) - pi_s
    idem = spectral_norm(pi_s @ pi_s - pi_s)
    if idem > 1e-4:
        raise SplitflowError(
            f"impulse projection at node {node} is far from idempotent "
            f"(residual {idem:.3e}); perturbation may be too large"
        )
    return pi_s, pi_u
