import json
import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from sectoria import contour_calculus as cc
from sectoria import model_spaces as ms
from sectoria import operator_core as oc
from sectoria.errors import InvalidInputError, MarginError, ResolventSingularError


def diag(*v):
    return oc.from_matrix(np.diag(np.array(v, dtype=complex)))


RANDOM4 = oc.make_family("random_accretive", {"n": 4}, seed=3)
RANDOM5 = oc.make_family("random_accretive", {"n": 5}, seed=6)


class TestCharFn:
    def test_vanishes_at_scalar(self):
        C = ms.CharFn(diag(2.5, 2.5), 0.5)
        assert np.abs(C.delta(2.5)).max() < 1e-12

    def test_unit_example(self):
        d = ms.char_fn(ms.CharFn(diag(1), 1.0), 1j)
        assert d[0, 0] == pytest.approx(-1j, abs=1e-14)

    def test_forms_agree(self):
        C = ms.CharFn(RANDOM4, 0.6)
        for z in (1 + 1j, 0.3, 4 * np.exp(-1.2j)):
            assert np.abs(C.delta(z, "quotient") - C.delta(z, "resolvent")).max() < 1e-12

    def test_inverse_at_boundary_points(self):
        theta = 2.0
        C = ms.CharFn(RANDOM4, 0.7)
        r = np.geomspace(0.05, 20, 16)
        for z in np.concatenate([r * np.exp(1j * theta * 0.99), r * np.exp(-1j * theta * 0.99)]):
            if 0.7 * abs(np.angle(z)) < math.pi / 2:
                assert np.abs(C.delta(z) @ C.inverse(z) - np.eye(4)).max() < 1e-10

    def test_inverse_example_zero(self):
        assert np.abs(ms.inv_char_fn(ms.CharFn(diag(1), 1.0), -1.0)).max() < 1e-14

    def test_inverse_singular(self):
        with pytest.raises(ResolventSingularError):
            ms.CharFn(diag(4.0), 0.5).inverse(4.0)

    def test_angle_preconditions(self):
        C = ms.CharFn(diag(1), 0.8)
        with pytest.raises(InvalidInputError):
            C.delta(np.exp(2.5j))
        C.inverse(np.exp(2.5j))
        with pytest.raises(InvalidInputError):
            ms.CharFn(diag(1), -1)

    @given(st.floats(0.1, 0.7), st.floats(-1.4, 1.4), st.floats(0.05, 20))
    def test_delta_inverse_is_identity(self, alpha, arg, rad):
        z = rad * np.exp(1j * arg)
        if alpha * abs(arg) >= math.pi / 2:
            return
        C = ms.CharFn(RANDOM4, alpha)
        D, Dt = C.delta(z), C.inverse(z)
        assert np.abs(D @ Dt - np.eye(4)).max() < 1e-9
        assert np.abs(Dt @ D - np.eye(4)).max() < 1e-9


class TestObservation:
    def test_scalar_examples(self):
        assert ms.observation_map(diag(1), [1], 2)[0] == pytest.approx(1)
        assert ms.observation_map(diag(4), [1], -2)[0] == pytest.approx(-1 / 3)

    def test_round_trip(self):
        x = np.array([1, -1j, 2, 0.5])
        lam = -1.3 + 0.4j
        ox = ms.observation_map(RANDOM4, x, lam)
        S = cc.fractional_power(RANDOM4, 0.5)
        back = (lam * np.eye(4) - RANDOM4.matrix) @ np.linalg.solve(S, ox)
        assert np.abs(back - x).max() < 1e-8

    def test_vectorised_matches_pointwise(self):
        x = np.arange(4) + 0j
        zs = [-1, 2j, -3 - 1j]
        vals = ms.observation_values(RANDOM4, x, zs)
        for z, v in zip(zs, vals):
            assert np.allclose(v, ms.observation_map(RANDOM4, x, z), atol=1e-13)


class TestControlMap:
    def test_resolvent_function_closed_form(self):
        v = ms.control_map(diag(1), ms.resolvent_function(-1, [1.0]), theta=2.0)
        assert v[0] == pytest.approx(-1, abs=1e-10)

    def test_resolvent_function_general(self):
        A = RANDOM4
        x = np.array([1, 2j, -1, 0.5])
        lam = 3 * np.exp(2.8j)
        v = ms.control_map(A, ms.resolvent_function(lam, x), theta=2.0)
        expect = 2 * cc.fractional_power(A, 0.5) @ np.linalg.solve(lam * np.eye(4) - A.matrix, x)
        assert np.linalg.norm(v - expect) < 1e-9 * np.linalg.norm(expect)

    def test_sampled_input_matches_closed_form(self):
        f = ms.resolvent_function(-2.0, np.ones(4))
        c = ms.model_contour(RANDOM4, 2.2, [f])
        sampled = ms.control_map(RANDOM4, f.on(c))
        exact = ms.control_map(RANDOM4, f, theta=2.2)
        assert np.linalg.norm(sampled - exact) < 1e-8 * np.linalg.norm(exact)

    def test_boundary_function_json_round_trip(self):
        f = ms.resolvent_function(-2.0, [1.0, 1j])
        b = f.on(ms.model_contour(diag(1, 2), 2.0, [f]))
        back = ms.BoundaryFunction.from_dict(json.loads(json.dumps(b.to_dict())))
        assert np.array_equal(back.samples, b.samples)
        assert back.l2_norm() == b.l2_norm()

    def test_corrected_log_weight_identity(self):
        """W(Lambda_k(z)^{-r} z^{-1/2} x) equals 2 Lambda_k(A)^{-r} x for k = +-1."""
        A = diag(2, 5)
        for k in (1, -1):
            for r in (0.6, 1.0):
                rep = ms.w1_check(A, r, 2.0, k=k, factor=2.0, tol=1e-4)
                assert rep.passed, rep.residuals

    def test_corrected_log_weight_identity_non_normal(self):
        A = oc.make_family("jordan_shifted", {"n": 2, "lam": 2, "eps": 1})
        assert ms.w1_check(A, 1.0, 2.2, k=1, factor=2.0).passed


class TestCauchy:
    THETA = 2.0

    def test_interior_reproduces(self):
        f = ms.resolvent_function(-1.0, [1.0, 2.0])
        z = 1.5 * np.exp(0.5j)
        assert np.abs(ms.cauchy_transform(f, z, "interior", self.THETA) - f(z)).max() < 1e-10

    def test_exterior_annihilates_interior_class(self):
        f = ms.resolvent_function(-1.0, [1.0, 2.0])
        assert np.abs(ms.cauchy_transform(f, -0.5 + 0.2j, "exterior", self.THETA)).max() < 1e-10

    def test_interior_annihilates_exterior_class(self):
        g = ms.rational_function([1.0 + 0.2j], [[1.0, 0.0]])
        assert np.abs(ms.cauchy_transform(g, 0.5, "interior", self.THETA)).max() < 1e-10

    def test_margin_enforced(self):
        f = ms.resolvent_function(-1.0, [1.0])
        with pytest.raises(MarginError):
            ms.cauchy_transform(f, np.exp(1j * (self.THETA + 0.01)), "exterior", self.THETA)

    @given(st.floats(-0.9, 0.9), st.floats(0.3, 3.0), st.floats(0.1, 0.9))
    def test_projections_split_mixed_function(self, s_in, r_in, t_out):
        a = ms.resolvent_function(-2.0 + 0.5j, [1.0, -1j])
        b = ms.rational_function([1.0 + 0.5j], [[0.5, 2.0]])
        mixed = ms.AnalyticFunction(
            lambda z: a.evaluate(z) + b.evaluate(z), 2, a.singularities + b.singularities, (0.0, 1.0)
        )
        zi = r_in * np.exp(1j * s_in * (self.THETA - 0.1))
        ze = 2 * np.exp(1j * (self.THETA + 0.1 + t_out))
        assert np.abs(ms.cauchy_transform(mixed, zi, "interior", self.THETA) - a(zi)).max() < 1e-9
        assert np.abs(ms.cauchy_transform(mixed, ze, "exterior", self.THETA) - b(ze)).max() < 1e-9


class TestHankelAndFactorization:
    def test_zero_input(self):
        f = ms.resolvent_function(-1.0, np.zeros(4))
        out = ms.hankel_apply(ms.CharFn(RANDOM4, 0.5), f, -1.0 + 0.5j, theta=2.0)
        assert np.abs(out).max() == 0

    def test_alpha_independence_example(self):
        theta = 2 * math.pi / 3
        ev = ms.make_eval_set(RANDOM4, theta)
        rep = ms.alpha_independence_check(RANDOM4, theta, [0.5, 1.0], eval_set=ev)
        assert rep.residuals["max_relative"] < 1e-4

    def test_factorization_closed_form_diag(self):
        A = diag(1, 2)
        x = np.array([1.0, 1.0])
        rep = ms.verify_factorization(A, 3 * math.pi / 4, 0.5, u=ms.resolvent_function(-1.0, x))
        assert rep.residuals["max_relative"] < 1e-5
        # O W u at lambda has the closed form 2 A (lam-A)^{-1} (lam0-A)^{-1} x
        lam = complex(rep.params["eval_points"][0])
        Wu = ms.control_map(A, ms.resolvent_function(-1.0, x), theta=3 * math.pi / 4)
        ow = ms.observation_map(A, Wu, lam)
        closed = 2 * np.array([a / ((lam - a) * (-1 - a)) for a in (1, 2)])
        assert np.abs(ow - closed).max() < 1e-10

    def test_jordan(self):
        A = oc.make_family("jordan_shifted", {"n": 3, "lam": 1, "eps": 2})
        assert ms.verify_factorization(A, 2.3, 0.4).passed

    def test_kernel_membership_rejects_bad_alpha(self):
        with pytest.raises(InvalidInputError):
            ms.kernel_membership_check(RANDOM4, 2.0, 0.9)

    def test_near_spectrum_nodes_fail_loudly(self):
        # All eigenvalues sit on the contour: every node pair is near sigma(A^alpha).
        A = oc.make_family("complex_diagonal", {"values": [np.exp(0.5j)]})
        C = ms.CharFn(A, 1.0)
        zs = np.exp(0.5j) * np.ones(10)
        _, bad = C.inverse_nodes(zs)
        assert bad.all()


class TestSpectrum:
    def test_diag_example(self):
        rep = ms.char_fn_spectrum_check(ms.CharFn(diag(1, 2), 0.5), [1.0, 2.0, 1.5])
        flags = [row["singular"] for row in rep.grid["probes"]]
        assert flags == [True, True, False] and rep.passed

    def test_identity_only_singular_at_one(self):
        C = ms.CharFn(diag(1, 1, 1), 0.5)
        for z in (1.0, 0.5, 2 * np.exp(0.7j)):
            d = np.linalg.det(C.delta(z))
            w = z**0.5
            assert d == pytest.approx(((1 - w) / (0.5 * (1 + w))) ** 3, abs=1e-12)
        assert ms.char_fn_spectrum_check(C, [1.0, 0.5, 2.0]).passed

    def test_boundary_bounded_below(self):
        rep = ms.char_fn_spectrum_check(ms.CharFn(RANDOM4, 0.5))
        assert rep.constants["boundary_min_singular"] > 1e-3


class TestIntertwining:
    def test_model_resolvent_examples(self):
        c = np.array([1.0, 2.0])
        assert np.abs(ms.model_resolvent(lambda w: c, -2.0, 3.0)).max() == 0
        f = lambda w: c / (w + 1)
        w = 0.7 + 0.2j
        assert np.abs(ms.model_resolvent(f, -2.0, w) - c / (w + 1)).max() < 1e-14
        with pytest.raises(InvalidInputError):
            ms.model_resolvent(f, 1.0, 1.0)

    def test_obs_scalar_example(self):
        rep = ms.obs_intertwining_check(diag(1), [1.0], -1.0, [-2.0])
        assert rep.residuals["max_relative"] < 1e-15

    def test_obs_random(self):
        rep = ms.obs_intertwining_check(RANDOM5, np.ones(5), -1.0 + 0.3j, [-2.0, 3j, -0.5 - 2j])
        assert rep.residuals["max_relative"] < 1e-9

    def test_obs_rejects_equal_points(self):
        with pytest.raises(InvalidInputError):
            ms.obs_intertwining_check(diag(1), [1.0], -1.0, [-1.0])

    def test_ctr_closed_form(self):
        A = diag(1, 3)
        rep = ms.ctr_intertwining_check(A, ms.resolvent_function(-2.0, [1.0, 1.0]), -1.0 + 0.2j, 2.5)
        assert rep.residuals["relative"] < 1e-6

    def test_ctr_double_pole(self):
        u = ms.rational_function([-2.0], [[1.0, 1j, 0, 0]], orders=[2])
        rep = ms.ctr_intertwining_check(RANDOM4, u, -1.0, 2.5)
        assert rep.residuals["relative"] < 1e-5

    def test_ctr_homogeneous(self):
        A = diag(1, 3)
        base = ms.ctr_intertwining_check(A, ms.resolvent_function(-2.0, [1.0, 1.0]), -1.0, 2.5)
        scaled = ms.ctr_intertwining_check(A, ms.resolvent_function(-2.0, [7.0, 7.0]), -1.0, 2.5)
        assert scaled.residuals["relative"] == pytest.approx(base.residuals["relative"], abs=1e-13)

    def test_ctr_interior_lambda_rejected(self):
        with pytest.raises(MarginError):
            ms.ctr_intertwining_check(diag(1), ms.resolvent_function(-2.0, [1.0]), 1.0, 2.5)


class TestPairing:
    def test_interior_interior_is_zero(self):
        f = ms.resolvent_function(-1.0, [1.0, 2.0])
        g = ms.resolvent_function(-3.0 + 1j, [0.5, -1j])
        assert abs(ms.boundary_pairing(f, g, theta=2.0)) < 1e-12

    def test_residue_formula(self):
        x, c = np.array([1.0, 2j]), np.array([0.5, 1.0])
        mu, nu = -2.0 + 0.3j, 1.5 - 0.4j
        val = ms.boundary_pairing(ms.resolvent_function(mu, x), ms.rational_function([nu], [c]), theta=2.0)
        assert val == pytest.approx(np.vdot(c, x) / (mu - np.conj(nu)), abs=1e-12)

    def test_zero(self):
        f = ms.resolvent_function(-1.0, [1.0])
        g = ms.rational_function([1.0], [[0.0]])
        assert ms.boundary_pairing(f, g, theta=2.0) == 0

    def test_sampled_contour_mismatch(self):
        f = ms.resolvent_function(-1.0, [1.0])
        a = f.on(ms.model_contour(diag(1), 2.0, [f]))
        b = f.on(ms.model_contour(diag(1), 2.1, [f]))
        with pytest.raises(InvalidInputError):
            ms.boundary_pairing(a, b)


class TestEvalSet:
    def test_margin_and_radii(self):
        ev = ms.make_eval_set(RANDOM4, 2.5)
        assert len(ev.exterior_points) >= 8
        ms.check_radii(RANDOM4, ev.exterior_points + ev.interior_points)

    def test_bad_point_rejected(self):
        with pytest.raises(MarginError):
            ms.EvalSet(2.0, (np.exp(2.02j),))

    def test_theta_range(self):
        with pytest.raises(InvalidInputError):
            ms.verify_factorization(RANDOM4, 3.2, 0.5)
