"""Perturbed-dichotomy constants and the robustness pipelines.

The discrete pipeline: measure the one-step perturbation size against the
admissibility threshold, rebuild the projection family from unit-impulse
bounded solutions, attach the explicit perturbed constants, and verify the
result.  The continuous pipeline discretizes at unit time, runs the discrete
pipeline, and lifts the certificate back with the intra-unit envelope
factor.  Both emit certificates that are then *checked*, not trusted.
"""

import json
import math
from dataclasses import dataclass

import numpy as np

from .cocycle import (DiscreteCocycle, discretize, propagator, spectral_norm)
from .dichotomy import (DichotomyCertificate, _window_nodes,
                        verify_dichotomy)
from .errors import RobustnessHypothesisError, SplitflowError
from .greens import impulse_response_projection

SAFETY = 0.9  # applied to the strict thresholds: finite-window sups run low


def delta_threshold(alpha):
    """Admissible perturbation size ``(1 - e^{-alpha}) / (1 + e^{-alpha})``."""
    if not alpha > 0.0:
        raise ValueError(f"exponent must be positive, got {alpha}")
    e = math.exp(-alpha)
    return (1.0 - e) / (1.0 + e)


def gronwall_constants(a, delta, d_const):
    """Decay rates ``(a_tilde, b_tilde)`` of the discrete Gronwall estimate.

    Requires ``delta < (1/D) (1-e^{-a})/(1+e^{-a})`` and a nonnegative
    radicand; violations raise ``ValueError`` naming the condition.
    """
    if not a > 0.0 or d_const <= 0.0:
        raise ValueError("need a > 0 and D > 0")
    if delta < 0.0 or delta >= delta_threshold(a) / d_const:
        raise ValueError(
            f"Gronwall condition delta < D^-1 (1-e^-a)/(1+e^-a) fails: "
            f"delta={delta}, limit={delta_threshold(a) / d_const:.6g}"
        )
    rad = math.cosh(a) ** 2 - 1.0 - 2.0 * delta * math.sinh(a)
    if rad < 0.0:
        raise ValueError(f"Gronwall radicand is negative ({rad:.3e})")
    a_tilde = -math.log(math.cosh(a) - math.sqrt(rad))
    b_tilde = a_tilde + math.log(1.0 + 2.0 * delta * d_const * math.sinh(a))
    return a_tilde, b_tilde


@dataclass(frozen=True)
class RobustConstants:
    """Explicit constants of the perturbed dichotomy."""

    K: float
    alpha: float
    delta: float
    rho: float
    alpha_tilde: float
    beta_tilde: float
    D1: float
    D2: float
    M: float

    def as_dict(self):
        return {
            "K": self.K, "alpha": self.alpha, "delta": self.delta,
            "rho": self.rho, "alpha_tilde": self.alpha_tilde,
            "beta_tilde": self.beta_tilde, "D1": self.D1, "D2": self.D2,
            "M": self.M,
        }


def robust_constants(k_bound, alpha, delta):
    """Perturbed bound and exponent from the base constants and delta.

    ``delta`` must sit strictly below :func:`delta_threshold`; all the
    closed forms then evaluate to finite values with ``M >= K``,
    ``0 < alpha_tilde <= alpha`` and ``beta_tilde >= alpha_tilde``.
    """
    if k_bound < 1.0:
        raise ValueError(f"bound must be >= 1, got {k_bound}")
    thr = delta_threshold(alpha)
    if delta < 0.0 or delta >= thr:
        raise RobustnessHypothesisError(
            f"delta={delta:.6g} is not below the threshold {thr:.6g}",
            measured=delta, threshold=thr,
        )
    e = math.exp(-alpha)
    rho = delta * (1.0 + e) / (1.0 - e)
    a_tilde, b_tilde = gronwall_constants(alpha, delta, 1.0)
    den1 = 1.0 - delta * e / (1.0 - math.exp(-(alpha + a_tilde)))
    den2 = 1.0 - delta * math.exp(-b_tilde) / (1.0 - math.exp(-(alpha + b_tilde)))
    if den1 <= 0.0 or den2 <= 0.0:
        raise SplitflowError("perturbed-constant denominators are not positive; "
                             "delta too close to the threshold")
    d1, d2 = 1.0 / den1, 1.0 / den2
    m = k_bound * (1.0 + delta / ((1.0 - rho) * (1.0 - e))) * max(d1, d2)
    return RobustConstants(K=k_bound, alpha=alpha, delta=delta, rho=rho,
                           alpha_tilde=a_tilde, beta_tilde=b_tilde,
                           D1=d1, D2=d2, M=m)


def _difference_step(base, perturbed):
    def b_step(n):
        return np.atleast_2d(np.asarray(perturbed.step(n), float)) \
            - np.atleast_2d(np.asarray(base.step(n), float))
    return b_step


def robust_dichotomy_discrete(base, base_cert, perturbed, window, *,
                              slack=1.1, safety=SAFETY, tol=1e-10,
                              trunc_tol=1e-10, verify=True):
    """Perturbed dichotomy certificate for a nearby discrete cocycle.

    Measures ``delta_eff = sup_n K |psi_1(n) - phi_1(n)|`` over the band the
    impulse solves will touch, requires it below ``safety`` times the
    threshold, rebuilds projections by unit impulses against the *base*
    Green kernel, and attaches the perturbed constants.  The emitted
    certificate is verified against the perturbed cocycle unless
    ``verify=False``.
    """
    nodes = _window_nodes(window)
    n_lo, n_hi = nodes[0], nodes[-1]
    k_bound, alpha = base_cert.bound, base_cert.exponent
    b_step = _difference_step(base, perturbed)

    probe = max(
        spectral_norm(b_step(n)) for n in range(n_lo, n_hi + 1)
    )
    from .greens import _band_for  # local import: sizing shared with the solver

    band0 = _band_for(base_cert, k_bound * probe, 1.0, trunc_tol) + 8
    lo, hi = n_lo - band0, n_hi + band0
    delta_eff = k_bound * max(
        spectral_norm(b_step(n)) for n in range(lo, hi + 1)
    )
    thr = delta_threshold(alpha)
    if delta_eff > safety * thr:
        raise RobustnessHypothesisError(
            f"measured delta_eff={delta_eff:.6g} exceeds {safety:g} x "
            f"threshold={thr:.6g}",
            measured=delta_eff, threshold=safety * thr,
        )
    consts = robust_constants(k_bound, alpha, delta_eff)
    projections = {}
    for n in nodes:
        pi_s, _ = impulse_response_projection(
            base, base_cert, b_step, n, tol=tol, trunc_tol=trunc_tol
        )
        projections[n] = pi_s
    cert = DichotomyCertificate(
        bound=max(consts.M, 1.0), exponent=consts.alpha_tilde, discrete=True,
        projections=projections,
        meta={"constants": consts.as_dict(), "delta_eff": delta_eff,
              "threshold": thr, "safety": safety,
              "window": [n_lo, n_hi], "beta_tilde": consts.beta_tilde},
    )
    if verify:
        report = verify_dichotomy(perturbed, cert, (n_lo, n_hi), slack=slack)
        cert.meta["verification"] = report
    return cert


def _unit_snapshots(cc, shifts, samples_per_unit):
    out = {}
    shared = None
    for n in shifts:
        if cc.time_invariant:
            if shared is None:
                _, _, shared = propagator(cc, 0.0, 1.0, samples=samples_per_unit)
            out[n] = shared
        else:
            _, _, snaps = propagator(cc, float(n), 1.0, samples=samples_per_unit)
            out[n] = snaps
    return out


def lift_certificate(cc, discrete_cert, window, samples_per_unit=64):
    """Continuous certificate from a discrete one via the intra-unit envelope.

    The lifted bound is ``K_hat = K * sup_{0<=t<=1} |phi(t)| e^{alpha t}``,
    with the sup sampled over the window's integer shifts (the observed
    envelope; for autonomous flows it coincides with the base-point scan).
    """
    nodes = _window_nodes(window)
    alpha = discrete_cert.exponent
    snaps = _unit_snapshots(cc, nodes[:-1], samples_per_unit)
    env = 1.0
    ts = np.linspace(0.0, 1.0, samples_per_unit + 1)
    for n in nodes[:-1]:
        norms = np.array([spectral_norm(m) for m in snaps[n]])
        env = max(env, float(np.max(norms * np.exp(alpha * ts))))
    k_hat = discrete_cert.bound * env
    if discrete_cert.constant_projection is not None:
        proj_kwargs = {"constant_projection": discrete_cert.constant_projection}
    else:
        proj_kwargs = {"projections": dict(discrete_cert.projections)}
    return DichotomyCertificate(
        bound=k_hat, exponent=alpha, discrete=False,
        meta={**discrete_cert.meta, "lift_envelope": env,
              "discrete_bound": discrete_cert.bound},
        **proj_kwargs,
    )


def robust_dichotomy_continuous(base_cc, base_cert, perturbed_cc, window, *,
                                slack=1.2, safety=SAFETY, tol=1e-10,
                                trunc_tol=1e-10, samples_per_unit=16,
                                verify=True):
    """Perturbed continuous certificate: discretize, robustify, lift.

    The hypothesis is measured as the sampled sup over unit intervals of the
    flow distance; it must stay below ``safety * threshold / K``.  The
    emitted certificate carries the discrete perturbed constants and the
    lifted bound ``M_hat = M * sup_{0<=t<=1} |psi(t)| e^{alpha_tilde t}``.
    """
    nodes = _window_nodes(window)
    n_lo, n_hi = nodes[0], nodes[-1]
    k_bound, alpha = base_cert.bound, base_cert.exponent
    base_d = discretize(base_cc)
    pert_d = discretize(perturbed_cc)

    snaps_b = _unit_snapshots(base_cc, nodes[:-1], samples_per_unit)
    snaps_p = _unit_snapshots(perturbed_cc, nodes[:-1], samples_per_unit)
    d_unit = max(
        max(spectral_norm(a - b) for a, b in zip(snaps_b[n], snaps_p[n]))
        for n in nodes[:-1]
    )
    allowed = safety * delta_threshold(alpha) / k_bound
    if d_unit > allowed:
        raise RobustnessHypothesisError(
            f"unit-interval flow distance {d_unit:.6g} exceeds "
            f"{safety:g} x threshold/K = {allowed:.6g}",
            measured=d_unit, threshold=allowed,
        )
    # base certificate transfers to the discretization with the same constants
    base_cert_d = DichotomyCertificate(
        bound=k_bound, exponent=alpha, discrete=True,
        constant_projection=base_cert.constant_projection,
        projections=None if base_cert.constant_projection is not None
        else dict(base_cert.projections),
        meta=dict(base_cert.meta),
    )
    cert_d = robust_dichotomy_discrete(
        base_d, base_cert_d, pert_d, (n_lo, n_hi),
        slack=1.0 + (slack - 1.0) / 2.0, safety=safety, tol=tol,
        trunc_tol=trunc_tol, verify=verify,
    )
    a_tilde = cert_d.exponent
    ts = np.linspace(0.0, 1.0, samples_per_unit + 1)
    env = 1.0
    for n in nodes[:-1]:
        norms = np.array([spectral_norm(m) for m in snaps_p[n]])
        env = max(env, float(np.max(norms * np.exp(a_tilde * ts))))
    m_hat = cert_d.bound * env
    cert = DichotomyCertificate(
        bound=m_hat, exponent=a_tilde, discrete=False,
        projections=dict(cert_d.projections),
        meta={**cert_d.meta, "lift_envelope": env, "d_unit": d_unit,
              "discrete_bound": cert_d.bound},
    )
    if verify:
        report = verify_dichotomy(perturbed_cc, cert, (n_lo, n_hi), slack=slack,
                                  samples_per_unit=max(4, samples_per_unit // 2))
        cert.meta["verification_continuous"] = report
    return cert


@dataclass
class LinearPerturbationVerdict:
    """Outcome of the integral-smallness check for a linear random term."""

    eps_measured: float
    eps_cutoff: float
    satisfied: bool
    L: float
    delta_allowed: float

    def as_dict(self):
        return {"eps_measured": self.eps_measured, "eps_cutoff": self.eps_cutoff,
                "satisfied": bool(self.satisfied), "L": self.L,
                "delta_allowed": self.delta_allowed}


def linear_random_perturbation_check(a_matrix, b_fn, window, *,
                                     samples_per_unit=32, safety=SAFETY,
                                     gap_margin=0.1):
    """Measure ``sup_{0<=t<=1} |int_0^t B|`` and compare with the cutoff.

    ``b_fn(t)`` returns the perturbation matrix at absolute time t.  The
    cutoff is the eps solving ``eps * L^2 e^{L eps} = delta_allowed``, where
    L is the unit-interval envelope of the unperturbed flow and
    ``delta_allowed`` the continuous robustness threshold; the Gronwall
    chain then bounds the perturbed flow distance by the threshold.
    """
    from .dichotomy import autonomous_certificate

    cert = autonomous_certificate(a_matrix, margin=gap_margin)
    k_bound, alpha = cert.bound, cert.exponent
    from scipy.linalg import expm

    ts = np.linspace(0.0, 1.0, samples_per_unit + 1)
    l_env = max(spectral_norm(expm(np.atleast_2d(a_matrix) * t)) for t in ts)

    nodes = _window_nodes(window)
    eps_measured = 0.0
    for n in nodes[:-1]:
        grid_t = n + ts
        mats = np.array([np.atleast_2d(np.asarray(b_fn(t), float))
                         for t in grid_t])
        acc = np.zeros_like(mats[0])
        for i in range(len(ts) - 1):
            acc = acc + 0.5 * (ts[1] - ts[0]) * (mats[i] + mats[i + 1])
            eps_measured = max(eps_measured, spectral_norm(acc))
    delta_allowed = safety * delta_threshold(alpha) / k_bound

    def chain(eps):
        return eps * l_env * l_env * math.exp(l_env * eps)

    lo, hi = 0.0, 1.0
    while chain(hi) < delta_allowed and hi < 1e6:
        hi *= 2.0
    for _ in range(80):
        mid = 0.5 * (lo + hi)
        if chain(mid) < delta_allowed:
            lo = mid
        else:
            hi = mid
    eps_cutoff = lo
    return LinearPerturbationVerdict(
        eps_measured=eps_measured, eps_cutoff=eps_cutoff,
        satisfied=eps_measured < eps_cutoff, L=l_env,
        delta_allowed=delta_allowed,
    )


def subspace_decay_diagnostic(cocycle, cert, window, rate_slack=0.05):
    """Log-linear decay fits of the projected orbits (range characterization).

    Columns of the stable projection must have forward orbits decaying at
    least at rate ``alpha_tilde`` (minus the slack); unstable columns must
    extend to backward orbits decaying at rate ``beta_tilde`` when walked
    backward.  Fits run over the given window from its center node.
    """
    nodes = _window_nodes(window)
    n0 = nodes[len(nodes) // 2]
    alpha = cert.exponent
    beta = cert.meta.get("beta_tilde", alpha)
    d = cert.dim
    discrete = isinstance(cocycle, DiscreteCocycle)

    def step(n):
        if discrete:
            return np.atleast_2d(np.asarray(cocycle.step(n), float))
        return propagator(cocycle, float(n), 1.0)

    out = {}
    ks = np.arange(0, nodes[-1] - n0 + 1)
    m = np.eye(d)
    norms = []
    for k in ks:
        norms.append(spectral_norm(m @ cert.proj_s(n0)))
        if n0 + k < nodes[-1]:
            m = step(n0 + int(k)) @ m
    norms = np.array(norms)
    if norms[0] > 0 and np.all(norms > 0):
        slope = np.polyfit(ks, np.log(norms), 1)[0]
        out["forward"] = {"slope": float(slope),
                          "required": -alpha * (1.0 - rate_slack),
                          "passed": slope <= -alpha * (1.0 - rate_slack)}
    else:
        out["forward"] = {"slope": -math.inf, "required": -alpha, "passed": True}

    pu = cert.proj_u(n0)
    from .dichotomy import _range_basis

    b0 = _range_basis(pu)
    if b0.shape[1] == 0:
        out["backward"] = {"slope": -math.inf, "required": -beta, "passed": True}
        return out
    ks = np.arange(0, n0 - nodes[0] + 1)
    cur = pu
    norms = []
    for k in ks:
        norms.append(spectral_norm(cur))
        n = n0 - int(k) - 1
        if n < nodes[0]:
            break
        bn = _range_basis(cert.proj_u(n))
        bn1 = _range_basis(cert.proj_u(n + 1))
        w = bn1.T @ step(n) @ bn
        cur = (bn @ np.linalg.inv(w) @ bn1.T) @ cur
    norms = np.array(norms)
    kk = np.arange(len(norms))
    slope = np.polyfit(kk, np.log(norms), 1)[0]
    out["backward"] = {"slope": float(slope),
                       "required": -beta * (1.0 - rate_slack),
                       "passed": slope <= -beta * (1.0 - rate_slack)}
    return out


def robustness_report_json(cert, indent=2):
    """Machine-readable robustness report: thresholds, constants, residuals."""
    meta = cert.meta
    rep = meta.get("verification") or meta.get("verification_continuous")
    body = {
        "delta_eff": meta.get("delta_eff"),
        "threshold": meta.get("threshold"),
        "safety": meta.get("safety"),
        "constants": meta.get("constants"),
        "bound": cert.bound,
        "exponent": cert.exponent,
        "axioms": None if rep is None else json.loads(rep.to_json())["axioms"],
        "passed": None if rep is None else bool(rep.passed),
    }
    return json.dumps(body, indent=indent)
