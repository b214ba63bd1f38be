import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from chdyn import DomainError, PreconditionError
from chdyn.potentials import (
    YosidaParams,
    beta_hat,
    check_compatibility,
    coercivity_check,
    fit_domination,
    make_graph,
    make_split,
    minimal_section,
    moreau_envelope,
    resolvent,
    yosida,
    yosida_derivative,
)

CUBIC, LOG, OBST = make_graph("regular"), make_graph("log"), make_graph("obstacle")
GRAPHS = [CUBIC, LOG, OBST]

# roots frozen from a 30-digit mpmath solve of s + lam * beta(s) = r
LOG_ROOT_L1_R2 = 0.603314728562856544963746895468
LOG_ROOT_L01_R05 = 0.412319481113882882119276435482
CUBIC_ROOT_L01_R3 = 2.08873014510179536410976959889


def test_resolvent_examples():
    assert resolvent(OBST, 0.5, 1.5) == 1.0
    assert resolvent(CUBIC, 1.0, 2.0) == pytest.approx(1.0, abs=1e-14)
    assert resolvent(LOG, 0.3, 0.0) == 0.0
    assert resolvent(LOG, 1.0, 2.0) == pytest.approx(LOG_ROOT_L1_R2, abs=1e-12)
    assert resolvent(LOG, 0.1, -0.5) == pytest.approx(-LOG_ROOT_L01_R05, abs=1e-12)
    assert resolvent(CUBIC, 0.1, 3.0) == pytest.approx(CUBIC_ROOT_L01_R3, abs=1e-12)


def test_resolvent_preserves_shape():
    assert np.shape(resolvent(LOG, 0.1, 0.4)) == ()
    assert resolvent(CUBIC, 0.1, np.zeros((3, 2))).shape == (3, 2)


def test_yosida_examples():
    assert yosida(OBST, 0.5, 1.5) == pytest.approx(1.0, abs=1e-15)
    for g in GRAPHS:
        assert yosida(g, 0.2, 0.0) == 0.0
    assert yosida(CUBIC, 1.0, 2.0) == pytest.approx(1.0, abs=1e-13)
    assert abs(yosida(CUBIC, 1.0, 2.0)) <= abs(minimal_section(CUBIC, 2.0))


def test_envelope_examples():
    for g in GRAPHS:
        assert moreau_envelope(g, 0.3, 0.0) == 0.0
    assert moreau_envelope(OBST, 0.5, 1.5) == pytest.approx(0.25, abs=1e-15)
    assert moreau_envelope(CUBIC, 1.0, 2.0) == pytest.approx(0.75, abs=1e-13)
    assert moreau_envelope(CUBIC, 1.0, 2.0) <= beta_hat(CUBIC, 2.0)


def test_minimal_section_examples():
    assert minimal_section(OBST, 0.3) == 0.0
    assert minimal_section(CUBIC, 2.0) == 8.0
    with pytest.raises(DomainError):
        minimal_section(LOG, 1.0)
    assert minimal_section(LOG, 0.5) == pytest.approx(np.log(3.0))


def test_beta_hat_outside_domain_is_infinite():
    assert beta_hat(LOG, 1.2) == np.inf
    assert beta_hat(OBST, -1.01) == np.inf
    assert beta_hat(LOG, 1.0) == pytest.approx(2 * np.log(2))


def test_splits():
    s = make_split("regular")
    r = np.linspace(-2, 2, 9)
    np.testing.assert_allclose(s.f(r), 0.25 * (r * r - 1) ** 2, atol=1e-14)
    log = make_split("log", 1.5)
    assert log.pi(0.5) == pytest.approx(-1.5)
    with pytest.raises(PreconditionError):
        make_split("log", 0.9)
    with pytest.raises(PreconditionError):
        make_split("obstacle", 0.0)


def test_yosida_params():
    p = YosidaParams(0.1, 2.0)
    assert p.boundary_step == pytest.approx(0.2)
    with pytest.raises(PreconditionError):
        YosidaParams(1.5)
    with pytest.raises(PreconditionError):
        YosidaParams(0.1, 0.0)


def test_unknown_graph():
    with pytest.raises(ValueError):
        make_graph("quintic")


def test_compatibility_identical_graphs():
    rep = check_compatibility("log", "log", 1.0, 0.0, np.linspace(-0.99, 0.99, 201))
    assert rep.raw_violation == 0.0 and rep.yosida_violation == 0.0 and rep.passed


def test_fit_domination_cubic_against_log():
    samples = np.linspace(-0.999, 0.999, 4001)
    eta, C = fit_domination("regular", "log", samples)
    assert np.isfinite(eta) and np.isfinite(C)
    # the fitted pair satisfies the inequality on an independent dense sample
    dense = np.linspace(-0.999, 0.999, 20011)
    lhs = np.abs(dense**3)
    rhs = eta * np.abs(np.log((1 + dense) / (1 - dense))) + C
    assert np.all(lhs <= rhs + 1e-3)


@pytest.mark.parametrize("eps", [0.5, 0.1, 0.01])
def test_obstacle_pair_shares_sign(eps):
    rep = check_compatibility("obstacle", "obstacle", 1.0, 0.0, np.linspace(-3, 3, 601), eps)
    assert rep.same_sign and rep.c_eta == 0.0


def test_coercivity():
    samples = np.linspace(-4, 4, 2001)
    d0, c0 = coercivity_check("obstacle", 0.1, 0.0, samples)
    assert d0 == 1.0 and c0 == pytest.approx(0.0, abs=1e-12)
    d0, c0 = coercivity_check("log", 0.1, 0.0, samples)
    assert d0 > 0 and c0 > 0
    with pytest.raises(PreconditionError):
        coercivity_check("log", 0.1, 1.0, samples)


# -- properties -------------------------------------------------------------

_r = st.floats(-5, 5, allow_nan=False)
_step = st.floats(1e-3, 1.0)
_graph = st.sampled_from(GRAPHS)


@settings(max_examples=200, deadline=None)
@given(_graph, _step, _r, _r)
def test_yosida_monotone_and_lipschitz(g, lam, a, b):
    ya, yb = yosida(g, lam, a), yosida(g, lam, b)
    assert (ya - yb) * (a - b) >= -1e-12
    assert abs(ya - yb) <= abs(a - b) / lam * (1 + 1e-10) + 1e-10


@settings(max_examples=200, deadline=None)
@given(_graph, _step, _r)
def test_resolvent_solves_inclusion(g, lam, r):
    s = float(resolvent(g, lam, r))
    z = float(yosida(g, lam, r))
    if g is OBST:
        assert s == min(max(r, -1.0), 1.0)
    elif g is LOG:
        # z lies in beta(s), checked through the well-conditioned inverse s = tanh(z/2)
        assert abs(np.tanh(0.5 * z) - s) < 1e-12
    else:
        assert abs(s**3 - z) < 1e-10 * (1 + abs(z))


@settings(max_examples=200, deadline=None)
@given(_graph, _step, st.floats(-0.999, 0.999))
def test_regularized_bounded_by_original(g, lam, r):
    assert abs(yosida(g, lam, r)) <= abs(minimal_section(g, r)) + 1e-10
    env = moreau_envelope(g, lam, r)
    assert -1e-14 <= env <= beta_hat(g, r) + 1e-10


@settings(max_examples=100, deadline=None)
@given(_graph, st.floats(0.01, 1.0), st.floats(-3, 3))
def test_derivative_matches_difference_quotient(g, lam, r):
    if g is OBST and abs(abs(r) - 1) < 1e-4:
        return
    h = 1e-6
    fd = (yosida(g, lam, r + h) - yosida(g, lam, r - h)) / (2 * h)
    assert yosida_derivative(g, lam, r) == pytest.approx(fd, rel=1e-5, abs=1e-5)
