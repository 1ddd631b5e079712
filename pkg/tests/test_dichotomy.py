import numpy as np
import pytest
from scipy.linalg import expm

from splitflow import (ContinuousCocycle, DiscreteCocycle,
                       DichotomyCertificate, GreenKernel, NonHyperbolicError,
                       autonomous_certificate, autonomous_certificate_discrete,
                       green_eval, paper_projection_bound, projection_distance,
                       spectral_norm, spectral_projection,
                       spectral_projection_discrete, verify_dichotomy)
from conftest import riesz_projector_oracle


class TestSpectralProjection:
    def test_diagonal(self):
        pi_u, gap = spectral_projection(np.diag([-1.0, 2.0]))
        assert np.allclose(pi_u, np.diag([0.0, 1.0]), atol=1e-12)
        assert gap == 1.0

    def test_hurwitz_gives_zero(self):
        a = np.array([[-1.0, 3.0], [0.0, -2.0]])
        pi_u, _ = spectral_projection(a)
        assert np.allclose(pi_u, 0.0, atol=1e-14)

    def test_all_unstable_gives_identity(self):
        pi_u, _ = spectral_projection(np.diag([0.5, 2.0]))
        assert np.allclose(pi_u, np.eye(2), atol=1e-14)

    def test_coupled_saddle_eigen_oracle(self):
        a = np.array([[0.0, 1.0], [2.0, -1.0]])  # eigenvalues 1, -2
        pi_u, gap = spectral_projection(a)
        assert abs(gap - 1.0) < 1e-12
        # oblique projector onto span{(1,1)} along span{(1,-2)}
        want = np.array([[2.0, 1.0], [2.0, 1.0]]) / 3.0
        assert np.allclose(pi_u, want, atol=1e-12)
        assert spectral_norm(pi_u @ pi_u - pi_u) < 1e-12
        assert spectral_norm(pi_u @ a - a @ pi_u) < 1e-12

    def test_matches_contour_integral_oracle(self, rng):
        for _ in range(6):
            a = rng.standard_normal((4, 4))
            try:
                pi_u, _ = spectral_projection(a)
            except NonHyperbolicError:
                continue
            want = riesz_projector_oracle(a)
            assert spectral_norm(pi_u - want) < 1e-8

    def test_near_axis_raises(self):
        with pytest.raises(NonHyperbolicError):
            spectral_projection(np.diag([1e-12, -1.0]))
        with pytest.raises(NonHyperbolicError):
            spectral_projection(np.array([[0.0, 1.0], [-1.0, 0.0]]))

    def test_discrete_unit_circle(self):
        pi_u, gap = spectral_projection_discrete(np.diag([0.5, 2.0]))
        assert np.allclose(pi_u, np.diag([0.0, 1.0]), atol=1e-12)
        assert abs(gap - np.log(2.0)) < 1e-12
        with pytest.raises(NonHyperbolicError):
            spectral_projection_discrete(np.diag([1.0, 0.5]))


class TestAutonomousCertificate:
    def test_diagonal_saddle(self):
        cert = autonomous_certificate(np.diag([-1.0, 1.0]))
        assert cert.bound == 1.0
        assert abs(cert.exponent - 0.9) < 1e-12
        assert np.allclose(cert.proj_s(0), np.diag([1.0, 0.0]), atol=1e-12)

    def test_pure_decay(self):
        cert = autonomous_certificate(-np.eye(2))
        assert np.allclose(cert.proj_s(0), np.eye(2))
        assert np.allclose(cert.proj_u(0), 0.0)
        assert cert.bound == 1.0

    def test_jordan_block_needs_transient_headroom(self):
        a = np.array([[-1.0, 1.0], [0.0, -1.0]])
        cert = autonomous_certificate(a)
        assert cert.bound > 1.0
        # dense-scan oracle of sup |e^{At}| e^{alpha t}
        ts = np.linspace(0.0, 40.0, 4001)
        scan = max(spectral_norm(expm(a * t)) * np.exp(cert.exponent * t)
                   for t in ts)
        assert cert.bound >= scan * (1.0 - 1e-6)
        assert cert.bound <= scan * 1.02  # ceil to 3 significant digits

    def test_discrete_variant(self):
        cert = autonomous_certificate_discrete(np.diag([0.5, 2.0]))
        assert cert.discrete
        assert abs(cert.exponent - 0.9 * np.log(2.0)) < 1e-12


class TestVerify:
    def test_autonomous_passes(self):
        a = np.diag([-1.0, 1.0])
        cert = autonomous_certificate(a)
        rep = verify_dichotomy(ContinuousCocycle.constant(a), cert, (-3, 3),
                               slack=1.01)
        assert rep.passed
        assert rep.axioms["commutation"]["residual"] < 1e-10

    def test_normal_matrices_slack(self, rng):
        for _ in range(3):
            q, _ = np.linalg.qr(rng.standard_normal((3, 3)))
            a = q @ np.diag([-2.0, -0.5, 1.5]) @ q.T
            cert = autonomous_certificate(a)
            rep = verify_dichotomy(ContinuousCocycle.constant(a), cert,
                                   (-2, 2), slack=1.05)
            assert rep.passed

    def test_jordan_slack(self):
        a = np.array([[-1.0, 1.0], [0.0, -1.0]])
        cert = autonomous_certificate(a)
        rep = verify_dichotomy(ContinuousCocycle.constant(a), cert, (-2, 2),
                               slack=1.5)
        assert rep.passed

    def test_doubled_exponent_fails(self):
        a = np.diag([-1.0, 1.0])
        cert = autonomous_certificate(a)
        bad = DichotomyCertificate.constant(cert.proj_s(0), cert.bound,
                                            2.0 * cert.exponent, discrete=False)
        rep = verify_dichotomy(ContinuousCocycle.constant(a), bad, (-3, 3),
                               slack=1.01)
        assert not rep.passed
        assert not rep.axioms["forward_decay"]["passed"]

    def test_unstable_projection_identity_fails_backward(self):
        saddle = DiscreteCocycle.constant(np.diag([0.5, 2.0]))
        bad = DichotomyCertificate.constant(np.zeros((2, 2)), 1.0,
                                            np.log(2.0), discrete=True)
        rep = verify_dichotomy(saddle, bad, (-3, 3), slack=1.05)
        assert not rep.passed
        assert not rep.axioms["backward_decay"]["passed"]

    def test_stable_projection_identity_fails_forward(self):
        saddle = DiscreteCocycle.constant(np.diag([0.5, 2.0]))
        bad = DichotomyCertificate.constant(np.eye(2), 1.0, np.log(2.0),
                                            discrete=True)
        rep = verify_dichotomy(saddle, bad, (-3, 3), slack=1.05)
        assert not rep.passed
        assert not rep.axioms["forward_decay"]["passed"]

    def test_report_serializes(self):
        a = np.diag([-1.0, 1.0])
        cert = autonomous_certificate(a)
        rep = verify_dichotomy(ContinuousCocycle.constant(a), cert, (-2, 2))
        import json

        body = json.loads(rep.to_json())
        assert body["passed"] is True
        assert set(body["axioms"]) == {"commutation", "forward_decay",
                                       "backward_decay", "invertibility"}


class TestGreenKernel:
    def test_stable_scalar(self):
        c = DiscreteCocycle.constant([[0.5]])
        cert = DichotomyCertificate.constant([[1.0]], 1.0, np.log(2.0),
                                             discrete=True)
        g = GreenKernel(c, cert)
        for n in range(0, 6):
            assert green_eval(g, n, 0)[0, 0] == 0.5 ** n
        for n in range(-4, 0):
            assert green_eval(g, n, 0)[0, 0] == 0.0

    def test_unstable_scalar(self):
        c = DiscreteCocycle.constant([[2.0]])
        cert = DichotomyCertificate.constant([[0.0]], 1.0, np.log(2.0),
                                             discrete=True)
        g = GreenKernel(c, cert)
        for n in range(0, 5):
            assert green_eval(g, n, 0)[0, 0] == 0.0
        for n in range(-4, 0):
            assert abs(green_eval(g, n, 0)[0, 0] - (-(2.0 ** n))) < 1e-15

    def test_jump_identity(self):
        c = DiscreteCocycle.constant(np.diag([0.5, 2.0]))
        cert = DichotomyCertificate.constant(np.diag([1.0, 0.0]), 1.0,
                                             np.log(2.0), discrete=True)
        g = GreenKernel(c, cert)
        for s in (-2, 0, 3):
            assert g.jump_residual(s) < 1e-15

    def test_bounded_solution_representation_exact(self):
        # stable scalar with impulse forcing: sum_k G(n, k+1) f_k is the
        # explicit geometric solution, exactly in powers of two
        c = DiscreteCocycle.constant([[0.5]])
        cert = DichotomyCertificate.constant([[1.0]], 1.0, np.log(2.0),
                                             discrete=True)
        g = GreenKernel(c, cert)
        z = 1.0
        for n in range(0, 8):
            val = sum(green_eval(g, n, k + 1)[0, 0] * (z if k == -1 else 0.0)
                      for k in range(-5, 8))
            assert val == 0.5 ** n


class TestProjectionDistance:
    def test_identical_is_zero(self):
        cert = autonomous_certificate(np.diag([-1.0, 1.0]))
        assert projection_distance(cert, cert, (-4, 4)) == 0.0

    def test_paper_bound_closed_form(self):
        got = paper_projection_bound(np.log(2.0), np.log(2.0), 0.01)
        assert abs(got - 0.01 * (0.5 + 0.5) / (1.0 - 0.25)) < 1e-15
        assert abs(got - 0.013333333333333334) < 1e-12

    def test_rotated_saddle_within_bound(self):
        d_mat = np.diag([0.5, 2.0])
        eps = 0.01
        rot = np.array([[np.cos(eps), -np.sin(eps)],
                        [np.sin(eps), np.cos(eps)]])
        cert_a = autonomous_certificate_discrete(d_mat)
        cert_b = autonomous_certificate_discrete(rot @ d_mat)
        dist = projection_distance(cert_a, cert_b, (-3, 3))
        # hypothesis constant: sup K |phi_1 - psi_1|
        eps_hyp = max(cert_a.bound, cert_b.bound) * spectral_norm(rot @ d_mat - d_mat)
        bound = paper_projection_bound(cert_a.exponent, cert_b.exponent, eps_hyp)
        assert dist <= bound

    def test_window_mismatch_rejected(self):
        cert = autonomous_certificate(np.diag([-1.0, 1.0]))
        node_cert = DichotomyCertificate(
            bound=1.0, exponent=0.5, discrete=True,
            projections={0: np.diag([1.0, 0.0])})
        from splitflow import ConfigurationError

        with pytest.raises(ConfigurationError):
            projection_distance(cert, node_cert, (-2, 2))
