"""Random hyperbolic solutions of semilinear nonautonomous problems.

Around a hyperbolic equilibrium ``y0*`` of the autonomous field, a small
nonautonomous perturbation of the nonlinearity leaves a unique bounded
trajectory nearby: the fixed point of

    I(phi)(t) = int G_A(t, s) g(s, phi(s)) ds,
    g(t, phi) = f_eta(t, y0* + phi) - f0(y0*) - f0'(y0*) phi,

where ``G_A`` is the Green kernel of the frozen linearization ``A``.  The
kernel integral is discretized by composite trapezoid with an exponential
tail truncation, evaluated as a matrix-valued convolution via the FFT.  The
trajectory is then certified as hyperbolic by linearizing along it and
running the continuous robustness pipeline.

The admission thresholds mirror the contraction argument: each smallness
term gets the budget ``1/(6 M beta^{-1})`` out of the contraction constant,
and the measured factor must stay below ``1/2`` plus a margin.
"""

import json
import math
import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy.fft import irfft, next_fast_len, rfft
from scipy.linalg import expm

from .cocycle import ContinuousCocycle, spectral_norm
from .dichotomy import autonomous_certificate
from .errors import (ConfigurationError, ContractionMarginError,
                     RobustnessHypothesisError, SplitflowError, ThresholdError)

SMALLNESS_DIVISOR = 6.0     # per-term budget: 1/(6 M beta^{-1})
CONTRACTION_LIMIT = 0.75    # measured-factor bound: 1/2 from the proof + margin
SUP_OVER_LAMBDA = 4.0       # a-posteriori: sup distance <= 4 M beta^{-1} lambda

STATUS_CERTIFIED = "certified"
STATUS_BOUNDED = "bounded"
STATUS_FAILED = "failed"


@dataclass
class SemilinearProblem:
    """An autonomous semilinear field with a nonautonomous perturbation family.

    ``a_matrix`` is the linearization at the equilibrium (drift plus
    ``f0'(y0_star)``); ``f_eta(eta, t, y)`` the perturbed nonlinearity with
    the driving-noise realization baked into the callback; ``r_u`` the
    radius of the working neighborhood around ``y0_star``.  Analytic
    derivative callbacks are optional; central differences stand in.
    """

    a_matrix: np.ndarray
    f_eta: object
    f0: object
    y0_star: np.ndarray
    r_u: float
    f0_prime: object = None
    f_eta_dy: object = None
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        self.a_matrix = np.atleast_2d(np.asarray(self.a_matrix, float))
        self.y0_star = np.atleast_1d(np.asarray(self.y0_star, float))

    @property
    def dim(self):
        return self.a_matrix.shape[0]

    def validate(self, tol=1e-8):
        """Equilibrium residual of the full autonomous field, plus hyperbolicity."""
        d0 = self.d_f0(self.y0_star)
        drift = self.a_matrix - d0
        res = float(np.linalg.norm(drift @ self.y0_star
                                   + np.asarray(self.f0(self.y0_star), float)))
        if res > tol:
            raise ConfigurationError(
                f"y0_star is not an equilibrium (residual {res:.3e})"
            )
        autonomous_certificate(self.a_matrix)  # raises if not hyperbolic
        return res

    def d_f0(self, y):
        if self.f0_prime is not None:
            return np.atleast_2d(np.asarray(self.f0_prime(y), float))
        return _central_jacobian(self.f0, y)

    def d_f_eta(self, eta, t, y):
        if self.f_eta_dy is not None:
            return np.atleast_2d(np.asarray(self.f_eta_dy(eta, t, y), float))
        return _central_jacobian(lambda yy: self.f_eta(eta, t, yy), y)


def _central_jacobian(fn, y, rel_step=1e-5):
    y = np.atleast_1d(np.asarray(y, float))
    d = len(y)
    step = rel_step * (1.0 + np.linalg.norm(y))
    cols = []
    for j in range(d):
        e = np.zeros(d)
        e[j] = step
        cols.append((np.asarray(fn(y + e), float)
                     - np.asarray(fn(y - e), float)) / (2 * step))
    return np.column_stack(cols)


def _ball_cloud(center, radius, n, seed=20201102):
    """Deterministic point cloud in the closed ball, boundary included."""
    center = np.atleast_1d(np.asarray(center, float))
    d = len(center)
    rng = np.random.default_rng(seed)
    dirs = rng.standard_normal((n, d))
    dirs /= np.maximum(np.linalg.norm(dirs, axis=1)[:, None], 1e-12)
    radii = radius * rng.random(n) ** (1.0 / d)
    radii[: max(1, n // 4)] = radius  # pin a share to the boundary
    return center + dirs * radii[:, None]


def lambda_eta(p, eta, window, n_time=65, n_cloud=32):
    """Sampled sup of the perturbation distance over (time, neighborhood).

    The sup of ``|f_eta - f0| + |d_y f_eta - f0'|`` over the window times and
    a deterministic cloud in the working ball.
    """
    ts = np.linspace(window.t_min, window.t_max, n_time)
    xs = _ball_cloud(p.y0_star, p.r_u, n_cloud)
    worst = 0.0
    for x in xs:
        f0x = np.asarray(p.f0(x), float)
        d0x = p.d_f0(x)
        for t in ts:
            v = np.linalg.norm(np.asarray(p.f_eta(eta, t, x), float) - f0x)
            dv = spectral_norm(p.d_f_eta(eta, t, x) - d0x)
            if not np.isfinite(v) or not np.isfinite(dv):
                raise SplitflowError(f"non-finite field values at t={t}")
            worst = max(worst, v + dv)
    return worst


def rho_modulus(p, eps, n_cloud=32, n_dirs=8):
    """Sampled first-order remainder modulus of the autonomous nonlinearity."""
    if eps > p.r_u / 2:
        raise ValueError(f"rho_modulus needs eps <= r_u/2 = {p.r_u / 2:g}")
    if eps <= 0.0:
        return 0.0
    xs = _ball_cloud(p.y0_star, p.r_u - eps, n_cloud)
    rng = np.random.default_rng(787)
    worst = 0.0
    for x in xs:
        f0x = np.asarray(p.f0(x), float)
        d0x = p.d_f0(x)
        dirs = rng.standard_normal((n_dirs, p.dim))
        dirs /= np.maximum(np.linalg.norm(dirs, axis=1)[:, None], 1e-12)
        for u in dirs:
            for mag in (eps, eps / 2, eps / 8):
                h = mag * u
                rem = np.linalg.norm(np.asarray(p.f0(x + h), float)
                                     - f0x - d0x @ h)
                worst = max(worst, rem / mag)
    return worst


def _lip_dev(p, eps, n_dirs=24):
    """Sampled sup of ``|f0'(y0*+h) - f0'(y0*)|`` over ``|h| <= eps``."""
    if eps <= 0.0:
        return 0.0
    d0 = p.d_f0(p.y0_star)
    hs = _ball_cloud(np.zeros(p.dim), eps, n_dirs, seed=555)
    return max(spectral_norm(p.d_f0(p.y0_star + h) - d0) for h in hs)


def _bisect_largest(pred, lo, hi, steps=16):
    """Largest x in (lo, hi] with pred(x), assuming pred monotone."""
    if pred(hi):
        return hi
    good = lo
    for _ in range(steps):
        mid = 0.5 * (good + hi)
        if pred(mid):
            good = mid
        else:
            hi = mid
    return good


def neighborhood_thresholds(p, m_bound, beta, bisect_steps=16):
    """The admissible sizes (eps1, eps2, eps0) for the contraction budgets.

    ``eps1`` bounds the derivative deviation term, ``eps2`` the remainder
    modulus (capped at 1/2), and ``eps0 = min(eps1, eps2/2)`` is the largest
    neighborhood the argument supports.
    """
    key = ("thresholds", round(m_bound, 12), round(beta, 12))
    if key in p.meta:
        return p.meta[key]
    budget = beta / (SMALLNESS_DIVISOR * m_bound)
    eps1 = _bisect_largest(lambda e: _lip_dev(p, e) < budget, 0.0, p.r_u / 2,
                           bisect_steps)
    eps2 = _bisect_largest(lambda e: rho_modulus(p, e) < budget, 0.0,
                           min(p.r_u / 2, 0.5 - 1e-9), bisect_steps)
    out = (eps1, eps2, min(eps1, eps2 / 2))
    p.meta[key] = out
    return out


def eta_epsilon(p, eps, m_bound, beta, lambda_curve, eta_max=1.0,
                bisect_steps=16):
    """Largest admissible perturbation size for a target neighborhood ``eps``.

    Requires ``eps`` below the threshold ``eps0``; then bisects for the
    largest eta with ``lambda_curve(eta) < eps/(6 M beta^{-1})``.  Returns 0
    with a warning when even the smallest probed eta violates the bound.
    """
    eps1, eps2, eps0 = neighborhood_thresholds(p, m_bound, beta, bisect_steps)
    if eps >= eps0:
        which = "eps1" if eps1 <= eps2 / 2 else "eps2"
        raise ThresholdError(
            f"eps={eps:g} is not below eps0={eps0:g} (binding: {which}, "
            f"eps1={eps1:g}, eps2={eps2:g})",
            which=which, limit=eps0,
        )
    target = eps * beta / (SMALLNESS_DIVISOR * m_bound)
    if lambda_curve(eta_max) < target:
        return eta_max
    tiny = eta_max * 2.0 ** (-bisect_steps)
    if lambda_curve(tiny) >= target:
        warnings.warn("no eta on the grid satisfies the smallness bound; "
                      "returning 0")
        return 0.0
    return _bisect_largest(lambda e: lambda_curve(e) < target, tiny, eta_max,
                           bisect_steps)


def kernel_tail_length(m_bound, beta, tail_tol):
    """Time span after which the kernel tail integral drops below ``tail_tol``."""
    return math.log(max(m_bound / (beta * tail_tol), 2.0)) / beta


class _AutonomousGreen:
    """Tabulated kernel ``G(t - s)`` of a hyperbolic constant generator."""

    def __init__(self, a_matrix, pi_s, h, n_off):
        d = a_matrix.shape[0]
        self.h, self.n_off, self.d = h, n_off, d
        pi_u = np.eye(d) - pi_s
        e_f = expm(a_matrix * h)
        e_b = expm(-a_matrix * h)
        fwd = np.zeros((n_off + 1, d, d))
        cur = pi_s.copy()
        for k in range(n_off + 1):
            fwd[k] = cur
            cur = pi_s @ (e_f @ cur)  # re-project: kills unstable round-off
        bwd = np.zeros((n_off + 1, d, d))
        cur = -pi_u.copy()
        for k in range(1, n_off + 1):
            cur = -(pi_u @ (e_b @ (-cur)))
            bwd[k] = cur
        # composite trapezoid split at the kernel jump: the coincidence node
        # carries the average of the one-sided limits, (Pi^s - Pi^u)/2
        fwd[0] = 0.5 * (pi_s - pi_u)
        # stacked offsets -n_off .. n_off for the convolution
        self.table = np.concatenate([bwd[1:][::-1], fwd], axis=0)

    def convolve(self, u, weights):
        """``h * sum_j G[i-j] w_j u_j`` for u of shape (N, d)."""
        n = u.shape[0]
        uw = u * weights[:, None]
        n_fft = next_fast_len(n + 2 * self.n_off + 1)
        gf = rfft(self.table, n_fft, axis=0)
        uf = rfft(uw, n_fft, axis=0)
        yf = np.einsum("fab,fb->fa", gf, uf)
        y = irfft(yf, n_fft, axis=0)[self.n_off : self.n_off + n]
        return self.h * y


@dataclass
class HyperbolicSolutionCertificate:
    """A bounded trajectory near the equilibrium, with its certificates.

    ``status`` is three-valued: ``certified`` (linearized dichotomy verified),
    ``bounded`` (trajectory found, hyperbolicity unverified), ``failed``.
    Nodes within the kernel-tail length of the window edges are
    edge-contaminated; ``interior`` indexes the clean region.
    """

    times: np.ndarray
    trajectory: np.ndarray
    interior: slice
    sup_distance: float
    fixed_point_residual: float
    iterations: int
    eta: float
    eps_used: float
    lambda_value: float
    contraction_factor: float
    status: str
    autonomous_cert: object
    y0_star: np.ndarray
    b_sup: float = None
    linearization_certificate: object = None
    linearization_report: object = None
    meta: dict = field(default_factory=dict)

    def xi_star(self, t):
        """Trajectory value at ``t`` (componentwise linear interpolation)."""
        t = np.asarray(t, float)
        cols = [np.interp(t, self.times, self.trajectory[:, j])
                for j in range(self.trajectory.shape[1])]
        return np.stack(cols, axis=-1)

    def interior_times(self):
        return self.times[self.interior]

    def to_json(self, indent=2, trajectory_stride=0):
        body = {
            "status": self.status,
            "eta": self.eta,
            "eps_used": self.eps_used,
            "lambda": self.lambda_value,
            "sup_distance": self.sup_distance,
            "fixed_point_residual": self.fixed_point_residual,
            "iterations": self.iterations,
            "contraction_factor": self.contraction_factor,
            "b_sup": self.b_sup,
            "autonomous": {"bound": self.autonomous_cert.bound,
                           "exponent": self.autonomous_cert.exponent},
            "linearization": None,
        }
        if self.linearization_certificate is not None:
            body["linearization"] = {
                "bound": self.linearization_certificate.bound,
                "exponent": self.linearization_certificate.exponent,
            }
        if self.linearization_report is not None:
            body["linearization_passed"] = bool(self.linearization_report.passed)
        if trajectory_stride:
            sl = slice(None, None, trajectory_stride)
            body["trajectory_t"] = [float(t) for t in self.times[sl]]
            body["trajectory"] = [[float(v) for v in row]
                                  for row in self.trajectory[sl]]
        return json.dumps(body, indent=indent)

    def trajectory_csv(self, file):
        close = False
        if isinstance(file, (str, bytes)):
            file = open(file, "w", newline="\n")
            close = True
        try:
            d = self.trajectory.shape[1]
            file.write("t," + ",".join(f"y{i}" for i in range(d)) + "\n")
            for t, row in zip(self.times, self.trajectory):
                file.write(f"{t!r}," + ",".join(repr(float(v)) for v in row) + "\n")
        finally:
            if close:
                file.close()


def find_hyperbolic_solution(p, eta, window, tol=1e-8, tail_tol=1e-9,
                             x0=None, max_iter=None, n_time=65, n_cloud=32):
    """Bounded trajectory near ``y0_star`` by kernel-contraction iteration.

    Verifies the contraction budget before iterating: the measured factor
    ``2 M beta^{-1} (lambda + rho(eps) + lip(eps))`` must stay below
    ``CONTRACTION_LIMIT`` and the self-map inequality must close, else a
    :class:`ContractionMarginError` reports the numbers.  The returned
    certificate has ``status='bounded'`` (hyperbolicity is certified
    separately by :func:`certify_hyperbolic`).
    """
    cert_a = autonomous_certificate(p.a_matrix)
    m_bound, beta = cert_a.bound, cert_a.exponent
    lam = lambda_eta(p, eta, window, n_time=n_time, n_cloud=n_cloud)
    eps1, eps2, eps0 = neighborhood_thresholds(p, m_bound, beta)
    if eps0 <= 0.0:
        raise ThresholdError("no admissible neighborhood: eps0 = 0",
                             which="eps0", limit=0.0)
    budget = beta / (SMALLNESS_DIVISOR * m_bound)
    if lam == 0.0:
        eps_used = eps0 / 2
    else:
        eps_needed = lam * SMALLNESS_DIVISOR * m_bound / beta
        if eps_needed >= eps0 * (1.0 - 1e-9):
            raise ContractionMarginError(
                f"lambda(eta)={lam:.4g} needs eps >= {eps_needed:.4g} but the "
                f"thresholds cap eps0 at {eps0:.4g}",
                factor=lam / (eps0 * budget), threshold=1.0,
            )
        eps_used = min(0.999 * eps0, 1.5 * eps_needed)
    rho_eps = rho_modulus(p, min(eps_used, p.r_u / 2))
    lip_eps = _lip_dev(p, eps_used)
    factor = 2.0 * (m_bound / beta) * (lam + rho_eps + lip_eps)
    if factor > CONTRACTION_LIMIT:
        raise ContractionMarginError(
            f"measured contraction factor {factor:.4f} exceeds "
            f"{CONTRACTION_LIMIT}", factor=factor, threshold=CONTRACTION_LIMIT,
        )
    selfmap = 2.0 * (m_bound / beta) * (lam + rho_eps * eps_used)
    if selfmap >= eps_used:
        raise ContractionMarginError(
            f"self-map bound {selfmap:.4g} does not close below eps="
            f"{eps_used:.4g}", factor=selfmap / eps_used, threshold=1.0,
        )

    h = window.h
    times = window.times()
    n = len(times)
    n_off = int(math.ceil(kernel_tail_length(m_bound, beta, tail_tol) / h))
    if 2 * n_off >= n:
        raise ConfigurationError(
            f"window too short for the kernel tail: need > {2 * n_off} nodes, "
            f"have {n}"
        )
    green = _AutonomousGreen(p.a_matrix, cert_a.proj_s(0), h, n_off)
    weights = np.ones(n)
    weights[0] = weights[-1] = 0.5
    f0_star = np.asarray(p.f0(p.y0_star), float)
    d0_star = p.d_f0(p.y0_star)

    def g_all(phi):
        out = np.empty_like(phi)
        for i, t in enumerate(times):
            out[i] = (np.asarray(p.f_eta(eta, t, p.y0_star + phi[i]), float)
                      - f0_star - d0_star @ phi[i])
        return out

    phi = np.zeros((n, p.dim)) if x0 is None else np.array(x0, float)
    if max_iter is None:
        first = 2.0 * (m_bound / beta) * max(lam, tol)
        if factor > 0.0:
            max_iter = max(3, int(math.ceil(
                math.log(tol / (first + tol)) / math.log(max(factor, 1e-6))))
                + 15)
        else:
            max_iter = 3
    it = 0
    while it < max_iter:
        nxt = green.convolve(g_all(phi), weights)
        res = float(np.max(np.linalg.norm(nxt - phi, axis=1)))
        phi = nxt
        it += 1
        if res <= tol:
            break
    residual = float(np.max(np.linalg.norm(
        green.convolve(g_all(phi), weights) - phi, axis=1)))
    if residual > tol:
        raise SplitflowError(
            f"kernel iteration did not certify residual {tol:g} "
            f"(got {residual:.3e} after {it} iterations)"
        )
    interior = slice(n_off, n - n_off)
    sup_dist = float(np.max(np.linalg.norm(phi[interior], axis=1)))
    status = STATUS_BOUNDED
    if sup_dist >= eps_used:
        warnings.warn(
            f"sup distance {sup_dist:.4g} is not below eps={eps_used:.4g}"
        )
        status = STATUS_FAILED
    return HyperbolicSolutionCertificate(
        times=times, trajectory=p.y0_star + phi, interior=interior,
        sup_distance=sup_dist, fixed_point_residual=residual, iterations=it,
        eta=eta, eps_used=eps_used, lambda_value=lam,
        contraction_factor=factor, status=status, autonomous_cert=cert_a,
        y0_star=p.y0_star,
        meta={"eps1": eps1, "eps2": eps2, "eps0": eps0, "tail_tol": tail_tol,
              "kernel_offsets": n_off, "window": [window.t_min, window.t_max],
              "rho_eps": rho_eps, "lip_eps": lip_eps, "selfmap": selfmap},
    )


def linearize_along(p, cert, step=None, b_sup_stride=8):
    """Variational cocycle along the certified trajectory.

    Generator ``A + B(t)`` with
    ``B(t) = d_y f_eta(eta, t, xi*(t)) - f0'(y0*)``; the window sup of
    ``|B|`` is recorded on the certificate.
    """
    d0_star = p.d_f0(p.y0_star)
    eta = cert.eta

    def gen(t):
        return p.a_matrix + p.d_f_eta(eta, t, cert.xi_star(t)) - d0_star

    sub = cert.times[cert.interior][::b_sup_stride]
    b_sup = max(
        spectral_norm(p.d_f_eta(eta, t, cert.xi_star(t)) - d0_star)
        for t in sub
    ) if len(sub) else 0.0
    cert.b_sup = float(b_sup)
    h = cert.times[1] - cert.times[0]
    return ContinuousCocycle(gen, p.dim,
                             step=step if step else min(h, 1.0 / 64.0),
                             label="linearized")


def certify_hyperbolic(p, cert, n_half=5, slack=1.2, tol=1e-9,
                       trunc_tol=1e-9, samples_per_unit=16, step=None):
    """Attach a dichotomy certificate of the linearization along ``cert``.

    Runs the continuous robustness pipeline with the frozen linearization as
    the base; a threshold violation downgrades the status to ``bounded``
    (hyperbolicity unverified) instead of raising.  ``n_half`` asks for
    projection nodes on [-n_half, n_half], shrunk automatically to what the
    trajectory window supports.
    """
    from .greens import _band_for
    from .robustness import robust_dichotomy_continuous

    h_grid = cert.times[1] - cert.times[0]
    base_cc = ContinuousCocycle.constant(
        p.a_matrix, step=step if step else min(1.0 / 64.0, h_grid))
    pert_cc = linearize_along(p, cert, step=step)

    pad = _band_for(cert.autonomous_cert,
                    cert.autonomous_cert.bound * max(cert.b_sup, 1e-12),
                    1.0, trunc_tol) + 10
    # the kernel band may touch edge-contaminated trajectory values (they
    # enter with exponentially small weight); the projection nodes themselves
    # must sit in the clean interior
    t_int = cert.interior_times()
    reach = int(min(-cert.times[0], cert.times[-1]) - pad - 2)
    clean = int(min(-t_int[0], t_int[-1]) - 1) if len(t_int) else -1
    use_half = min(n_half, reach, clean)
    if use_half < 1:
        cert.status = STATUS_BOUNDED
        cert.meta["certification"] = {
            "error": f"trajectory window too short for certification "
                     f"(needs half-width >= {pad + 2})"
        }
        return cert
    try:
        lin_cert = robust_dichotomy_continuous(
            base_cc, cert.autonomous_cert, pert_cc, (-use_half, use_half),
            slack=slack, tol=tol, trunc_tol=trunc_tol,
            samples_per_unit=samples_per_unit,
        )
    except (RobustnessHypothesisError, ContractionMarginError) as exc:
        cert.status = STATUS_BOUNDED
        cert.meta["certification"] = {
            "error": str(exc),
            "measured": getattr(exc, "measured", None),
            "threshold": getattr(exc, "threshold", None),
        }
        return cert
    report = lin_cert.meta.get("verification_continuous")
    cert.linearization_certificate = lin_cert
    cert.linearization_report = report
    cert.status = STATUS_CERTIFIED if (report is None or report.passed) \
        else STATUS_BOUNDED
    return cert
