import math

import numpy as np
import pytest
import sympy

from ergconc.expressions import pack_from_expression
from ergconc.model import (
    CarreSourceObservable,
    MissingJacobianError,
    StandardGaussian,
    SymmetrizedBernoulli,
    TestFunctionPack,
    VarianceProxies,
    builtin_cosine_model,
    carre_source,
    carre_source_gradient,
    confluence_form,
    estimate_confluence_alpha,
    generator_apply,
    get_model,
    innovation_moment_report,
    theta_lipschitz_bound,
)
from ergconc.montecarlo import RngPolicy

MODEL, PACK = builtin_cosine_model()


# --- generator --------------------------------------------------------------


def test_generator_at_zero():
    assert generator_apply(MODEL, PACK, np.array([0.0])) == pytest.approx(-0.5, abs=1e-15)


def test_generator_at_half_pi():
    got = generator_apply(MODEL, PACK, np.array([math.pi / 2]))
    assert got == pytest.approx(math.pi / 4, rel=1e-12)


def test_generator_against_symbolic_oracle():
    # Independent route: differentiate phi symbolically and assemble the
    # generator with sympy.
    x = sympy.Symbol("x")
    phi = sympy.cos(x)
    a_phi = (-x / 2) * sympy.diff(phi, x) + sympy.Rational(1, 2) * sympy.cos(x) ** 2 * sympy.diff(
        phi, x, 2
    )
    for point in (1.0, -0.3, 2.7, 10.0):
        want = float(a_phi.subs(x, point))
        got = generator_apply(MODEL, PACK, np.array([point]))
        assert got == pytest.approx(want, rel=1e-12)


def test_generator_is_linear_in_the_pack():
    rng = np.random.default_rng(5)
    pack2 = pack_from_expression(1, "sin(x1) + x1^2 / 10")
    c = 2.25
    combined = TestFunctionPack(
        phi=lambda x: PACK.phi(x) + c * pack2.phi(x),
        grad_phi=lambda x: PACK.grad_phi(x) + c * pack2.grad_phi(x),
        hess_phi=lambda x: PACK.hess_phi(x) + c * pack2.hess_phi(x),
    )
    pts = rng.uniform(-5, 5, size=(64, 1))
    lhs = generator_apply(MODEL, combined, pts)
    rhs = generator_apply(MODEL, PACK, pts) + c * generator_apply(MODEL, pack2, pts)
    np.testing.assert_allclose(lhs, rhs, rtol=1e-12)


def test_generator_batch_matches_pointwise():
    pts = np.linspace(-3, 3, 17).reshape(-1, 1)
    batch = generator_apply(MODEL, PACK, pts)
    single = [generator_apply(MODEL, PACK, p) for p in pts]
    np.testing.assert_array_equal(batch, single)


# --- carre du champ source --------------------------------------------------


def test_carre_source_values():
    assert carre_source(MODEL, PACK, np.array([0.0])) == 0.0
    assert carre_source(MODEL, PACK, np.array([math.pi / 4])) == pytest.approx(0.25, rel=1e-12)
    want = math.cos(1.0) ** 2 * math.sin(1.0) ** 2
    assert carre_source(MODEL, PACK, np.array([1.0])) == pytest.approx(want, rel=1e-12)
    assert want == pytest.approx(0.20678, abs=5e-6)


def test_carre_source_nonnegative_everywhere():
    pts = np.linspace(-20, 20, 4001).reshape(-1, 1)
    assert np.all(carre_source(MODEL, PACK, pts) >= 0.0)


def test_builtin_source_lipschitz_constant():
    # |d/dx cos^2 sin^2| = |sin 4x| / 2 <= 1/2 on a dense grid.
    pts = np.linspace(-10, 10, 400_001).reshape(-1, 1)
    grads = carre_source_gradient(MODEL, PACK, pts)
    sup = float(np.abs(grads).max())
    assert sup <= 0.5 + 1e-6
    assert sup == pytest.approx(0.5, abs=1e-6)


def test_carre_gradient_matches_finite_differences():
    rng = np.random.default_rng(11)
    pts = rng.uniform(-6, 6, size=40)
    h = 1e-6
    for pt in pts:
        fd = (
            carre_source(MODEL, PACK, np.array([pt + h]))
            - carre_source(MODEL, PACK, np.array([pt - h]))
        ) / (2 * h)
        exact = carre_source_gradient(MODEL, PACK, np.array([pt]))[0]
        assert exact == pytest.approx(fd, rel=1e-5, abs=1e-8)


# --- test-function pack invariants -------------------------------------------


@pytest.mark.parametrize(
    "pack", [PACK, pack_from_expression(1, "exp(-x1^2/4) + tanh(x1)")], ids=["cosine", "expr"]
)
def test_pack_derivatives_match_finite_differences(pack):
    rng = np.random.default_rng(3)
    pts = rng.uniform(-10, 10, size=100)
    h = 1e-5
    for pt in pts:
        fd_grad = (pack.phi(np.array([pt + h])) - pack.phi(np.array([pt - h]))) / (2 * h)
        grad = pack.grad_phi(np.array([pt]))[0]
        assert grad == pytest.approx(fd_grad, rel=1e-6, abs=1e-9)
        fd_hess = (pack.grad_phi(np.array([pt + h]))[0] - pack.grad_phi(np.array([pt - h]))[0]) / (
            2 * h
        )
        hess = pack.hess_phi(np.array([pt]))[0, 0]
        assert hess == pytest.approx(fd_hess, rel=1e-6, abs=1e-9)


def test_hessian_is_symmetric_for_a_2d_pack():
    pack = pack_from_expression(2, "sin(x1) * cos(x2) + x1 * x2")
    pts = np.random.default_rng(7).uniform(-3, 3, size=(50, 2))
    h = pack.hess_phi(pts)
    np.testing.assert_allclose(h, np.swapaxes(h, -1, -2), atol=1e-14)


# --- confluence --------------------------------------------------------------


def test_confluence_form_closed_form_in_1d():
    # The form reduces to -xi^2/2 + (p-1)/2 sin^2(x) xi^2.
    rng = np.random.default_rng(13)
    for _ in range(50):
        x = rng.uniform(-7, 7)
        p = rng.uniform(1.0, 2.0)
        want = -0.5 + 0.5 * (p - 1.0) * math.sin(x) ** 2
        got = confluence_form(MODEL, np.array([x]), np.array([1.0]), p)
        assert got == pytest.approx(want, rel=1e-12, abs=1e-12)


def test_confluence_form_examples():
    assert confluence_form(MODEL, np.array([0.0]), np.array([1.0]), 1.0) == pytest.approx(-0.5)
    got = confluence_form(MODEL, np.array([math.pi / 2]), np.array([1.0]), 2.0)
    assert got == pytest.approx(0.0, abs=1e-12)
    # p = 3/2 stays below -1/4 everywhere.
    pts = np.linspace(-10, 10, 10_001).reshape(-1, 1)
    vals = confluence_form(MODEL, pts, np.array([1.0]), 1.5)
    assert np.all(vals <= -0.25 + 1e-12)


def test_confluence_form_xi_scale_invariance_in_1d():
    rng = np.random.default_rng(17)
    base = confluence_form(MODEL, np.array([0.8]), np.array([1.0]), 1.5)
    for _ in range(25):
        xi = rng.uniform(-10, 10)
        if abs(xi) < 1e-3:
            continue
        scaled = confluence_form(MODEL, np.array([0.8]), np.array([xi]), 1.5) / xi**2
        assert scaled == pytest.approx(base, rel=1e-12)


def test_confluence_form_zero_xi_rejected():
    with pytest.raises(ValueError):
        confluence_form(MODEL, np.array([0.0]), np.array([0.0]), 1.5)


def test_estimate_confluence_alpha_certifies_p_three_halves():
    est = estimate_confluence_alpha(MODEL, 1.5)
    assert est.certified
    assert est.alpha == pytest.approx(0.25, abs=1e-9)


def test_estimate_confluence_alpha_p_one():
    est = estimate_confluence_alpha(MODEL, 1.0)
    assert est.certified
    assert est.alpha == pytest.approx(0.5, abs=1e-9)


def test_estimate_confluence_alpha_p_two_not_certified():
    est = estimate_confluence_alpha(MODEL, 2.0)
    assert not est.certified
    assert est.alpha == pytest.approx(0.0, abs=1e-9)


def test_confluence_requires_jacobians():
    from ergconc.model import DiffusionModel

    bare = DiffusionModel(d=1, r=1, b=MODEL.b, sigma=MODEL.sigma)
    with pytest.raises(MissingJacobianError):
        confluence_form(bare, np.array([0.0]), np.array([1.0]), 1.5)
    with pytest.raises(MissingJacobianError):
        carre_source_gradient(bare, PACK, np.array([0.0]))


# --- Poisson gradient bound ---------------------------------------------------


def test_theta_lipschitz_bound():
    assert theta_lipschitz_bound(0.5, 0.25) == 2.0
    assert theta_lipschitz_bound(0.0, 0.123) == 0.0
    assert theta_lipschitz_bound(1.0, 0.5) == 2.0
    with pytest.raises(ValueError):
        theta_lipschitz_bound(0.5, 0.0)
    with pytest.raises(ValueError):
        theta_lipschitz_bound(-1.0, 0.5)


# --- built-in model and registry ----------------------------------------------


def test_builtin_coefficients():
    assert MODEL.b(np.array([2.0]))[0] == -1.0
    assert MODEL.sigma(np.array([0.0]))[0, 0] == 1.0
    assert PACK.phi(np.array([0.0])) == 1.0
    pts = np.random.default_rng(1).uniform(-5, 5, (10, 1))
    np.testing.assert_array_equal(MODEL.jac_b(pts), np.full((10, 1, 1), -0.5))


def test_registry_round_trip():
    bundle = get_model("cosine-ou")
    assert bundle.model.name == "cosine-ou"
    assert bundle.source_lip == 0.5
    assert bundle.proxies.theta_lip == 2.0
    with pytest.raises(KeyError):
        get_model("no-such-model")


def test_variance_proxies_validation():
    with pytest.raises(ValueError):
        VarianceProxies(
            nu_carre=-0.1, nu_sigma2=0.4, sigma_sup=1, grad_phi_sup=1, theta_lip=2, alpha=0.25
        )
    with pytest.raises(ValueError):
        # violates the Cauchy-Schwarz cap nu_carre <= sigma_sup^2 grad_phi_sup^2
        VarianceProxies(
            nu_carre=1.5, nu_sigma2=0.4, sigma_sup=1, grad_phi_sup=1, theta_lip=2, alpha=0.25
        )
    with pytest.raises(ValueError):
        VarianceProxies(
            nu_carre=0.1, nu_sigma2=0.4, sigma_sup=1, grad_phi_sup=1, theta_lip=2, alpha=0.0
        )


# --- innovation laws -----------------------------------------------------------


@pytest.mark.parametrize("law", [StandardGaussian(), SymmetrizedBernoulli()])
def test_innovation_moments_within_four_standard_errors(law):
    gen = RngPolicy(master_seed=2024).stream(1 << 40)
    report = innovation_moment_report(law, r=2, gen=gen, samples=1_000_000)
    assert report["max_abs_z"] <= 4.0


def test_bernoulli_values_are_signs():
    law = SymmetrizedBernoulli()
    draws = law.draw(np.random.default_rng(0), (1000, 3))
    assert set(np.unique(draws)) == {-1.0, 1.0}
    assert draws.dtype == np.float64


def test_observable_wrappers_match_free_functions():
    pts = np.random.default_rng(23).uniform(-4, 4, (32, 1))
    np.testing.assert_array_equal(
        CarreSourceObservable(MODEL, PACK)(pts), carre_source(MODEL, PACK, pts)
    )
