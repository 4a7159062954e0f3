from types import SimpleNamespace

import numpy as np
import pytest

from ohco.adversaries import (BanditObservation, CurlCycleAdversary, LinearHiddenSequence, LossRound,
                              QuadraticHiddenSequence, bandit_query, comparator_curl, comparator_field,
                              curl_cycle_round, rectangle_circulation)
from ohco.domains import Ball, Box
from ohco.errors import CertificateError, FeasibilityError, SizingError, TrajectoryEscape, ValidationError
from ohco.geometry import gallery_pair
from ohco.lab import lower_bound_experiment
from ohco.learners import LearnerState, bandit_estimate, ogd_update

import oracles

ZU = np.array([np.cos(np.pi / 6), np.sin(np.pi / 6)])


def exp_setup():
    q, _ = gallery_pair("exponential")
    return q, Box([0.5, 0.5], [1.0, 1.0])


# ------------------------------------------------------------------ seeded sequences

def test_linear_sequence_replay():
    q, Y = exp_setup()
    a = LinearHiddenSequence(Y, q, 0, 1.0).round(1)
    b = LinearHiddenSequence(Y, q, 0, 1.0).round(1)
    np.testing.assert_array_equal(a.c, b.c)
    assert not np.array_equal(a.c, LinearHiddenSequence(Y, q, 1, 1.0).round(1).c)


def test_linear_sequence_norms():
    q, Y = exp_setup()
    s = LinearHiddenSequence(Y, q, 3, 2.0)
    assert s.lipschitz == pytest.approx(1.0)  # max e^x on [log .5, 0]
    _, _, c = s.params(0, 5000)
    np.testing.assert_allclose(np.linalg.norm(c, axis=1), 2.0 / s.lipschitz, rtol=1e-14)


def test_linear_sequence_gradients_bounded():
    q, Y = exp_setup()
    s = LinearHiddenSequence(Y, q, 3, 2.0)
    x = Box(*q.x_box).sample(np.random.default_rng(0), 300)
    for t in range(1, 50):
        g = s.round(t).original_grad(x)
        assert np.linalg.norm(g, axis=1).max() <= 2.0 + 1e-12


def test_random_access_matches_streaming():
    q, Y = exp_setup()
    s = QuadraticHiddenSequence(Y, q, 5, mu_max=0.3, linear_radius=0.2)
    streamed = list(s.rounds(5000))
    for t in (1, 4096, 4097, 5000):
        r = s.round(t)
        np.testing.assert_array_equal(r.c, streamed[t - 1].c)
        np.testing.assert_array_equal(r.w, streamed[t - 1].w)
        assert r.mu == streamed[t - 1].mu


def test_oblivious_prefix_independent_of_horizon():
    q, Y = exp_setup()
    s = LinearHiddenSequence(Y, q, 9, 1.0)
    a = s.totals(1000)
    b = LinearHiddenSequence(Y, q, 9, 1.0).totals(1000)
    np.testing.assert_array_equal(a.s_c, b.s_c)


def test_totals_match_rounds():
    q, Y = exp_setup()
    s = QuadraticHiddenSequence(Y, q, 2, mu_max=0.5, linear_radius=0.3)
    tot = s.totals(300)
    z = np.array([0.7, 0.6])
    direct = sum(r.hidden_value(z) for r in s.rounds(300))
    assert tot.value(z) == pytest.approx(direct, rel=1e-12)


def test_identity_fixed_slope_drifts_to_face():
    q, _ = gallery_pair("identity")
    X = Box([0, 0], [1, 1])
    rnd = LossRound(q, [1.0, 0.0])
    st = LearnerState("OGD", [0.5, 0.5], eta=0.1)
    for _ in range(10):
        st = ogd_update(st, rnd.original_grad(st.iterate), X)
    np.testing.assert_allclose(st.iterate, [0.0, 0.5], atol=1e-12)


def test_quadratic_zero_curvature_reduces_to_linear():
    q, Y = exp_setup()
    lin = LinearHiddenSequence(Y, q, 4, 1.0)
    quad = QuadraticHiddenSequence(Y, q, 4, mu_max=0.0, linear_radius=lin.radius)
    for t in (1, 17, 4100):
        a, b = lin.round(t), quad.round(t)
        np.testing.assert_array_equal(a.c, b.c)
        assert b.mu == 0.0


def test_quadratic_gradient_vanishes_at_center():
    q, Y = exp_setup()
    r = LossRound(q, np.zeros(2), 0.7, np.array([0.6, 0.8]))
    np.testing.assert_array_equal(r.hidden_grad(np.array([0.6, 0.8])), [0.0, 0.0])


def test_quadratic_needs_positive_smoothness():
    q, Y = exp_setup()
    with pytest.raises(ValidationError):
        QuadraticHiddenSequence(Y, q, 0, H=0.0)


@pytest.mark.parametrize("name", ["exponential", "quadratic"])
def test_reported_smoothness_bounds_finite_difference_hessians(name):
    q, _ = gallery_pair(name)
    X = Box(*q.x_box)
    Y = Box(*q.image_box(*q.x_box))
    s = QuadraticHiddenSequence(Y, q, 0, H=2.0, linear_radius=0.4)
    c = s.constants()
    assert c["H"] >= s.mu_max * s.lipschitz ** 2
    rng = np.random.default_rng(1)
    x = X.sample(rng, 1000)
    worst = 0.0
    h = 1e-5
    for i, t in enumerate(rng.integers(1, 5000, size=1000)):
        r = s.round(int(t))
        Hx = np.empty((2, 2))
        for k in range(2):
            e = np.zeros(2)
            e[k] = h
            Hx[:, k] = (r.original_grad(x[i] + e) - r.original_grad(x[i] - e)) / (2 * h)
        worst = max(worst, np.linalg.norm(Hx, 2))
    assert worst <= c["H"]


def test_reported_value_bound():
    q, _ = gallery_pair("exponential")
    Y = Box(*q.image_box(*q.x_box))
    s = QuadraticHiddenSequence(Y, q, 0, mu_max=0.5, linear_radius=0.4, drift=[0.1, -0.2])
    M = s.constants()["M_bound"]
    x = Box(*q.x_box).sample(np.random.default_rng(2), 500)
    for t in range(1, 200):
        assert np.abs(s.round(t).original_value(x)).max() <= M


def test_chain_rule_and_convexity():
    q, _ = gallery_pair("quadratic")
    X = Box(*q.x_box)
    Y = Box(*q.image_box(*q.x_box))
    s = QuadraticHiddenSequence(Y, q, 8, mu_max=1.0, linear_radius=0.5)
    rng = np.random.default_rng(3)
    x = X.sample(rng, 100)
    for t in range(1, 20):
        r = s.round(t)
        g = np.einsum("nij,ni->nj", q.jacobian(x), r.hidden_grad(q(x)))
        assert np.max(np.abs(r.original_grad(x) - g)) <= 1e-8
        a, b = Y.sample(rng, 100), Y.sample(rng, 100)
        mid = r.hidden_value(0.5 * (a + b))
        assert np.all(mid <= 0.5 * (r.hidden_value(a) + r.hidden_value(b)) + 1e-9)


# ------------------------------------------------------------------ curl cycle

def test_curl_cycle_slope_at_one_one():
    adv = CurlCycleAdversary(0.002)
    rnd = curl_cycle_round(adv, np.array([1.0, 1.0]))
    np.testing.assert_allclose(rnd.c, [-0.5, 0.0], atol=1e-15)
    assert adv.t == 1


def test_curl_cycle_schedule():
    adv = CurlCycleAdversary(0.002)
    assert (adv.n1, adv.n2, adv.N) == (100, 100, 400)
    np.testing.assert_array_equal(adv.direction(1), [1, 0])
    np.testing.assert_array_equal(adv.direction(101), [0, 1])
    np.testing.assert_array_equal(adv.direction(201), [-1, 0])
    np.testing.assert_array_equal(adv.direction(301), [0, -1])
    np.testing.assert_array_equal(adv.direction(401), [1, 0])


def test_instantaneous_regret_at_one_one():
    z = np.array([1.0, 1.0])
    want = -(1 - np.sqrt(3) / 2) / 2
    assert -comparator_field(z, ZU) @ np.array([1.0, 0.0]) == pytest.approx(want, abs=1e-15)
    assert want == pytest.approx(-0.0670, abs=1e-4)
    # same number from the losses themselves: ⟨s, z⟩ − ⟨s, z_u⟩
    adv = CurlCycleAdversary(0.002)
    rnd = adv.round(1, z)
    assert rnd.hidden_value(z) - rnd.hidden_value(adv.z_u) == pytest.approx(want, abs=1e-15)


def test_hidden_displacement_second_order():
    q, _ = gallery_pair("log_spiral")
    cs = []
    for eta in (0.004, 0.002, 0.001):
        adv = CurlCycleAdversary(eta)
        x = q.inverse(np.array([1.0, 1.0]))
        worst = 0.0
        for t in range(1, adv.N + 1):
            z = q(x)
            rnd = adv.round(t, z)
            x = x - eta * rnd.original_grad(x)
            worst = max(worst, np.linalg.norm(q(x) - z - eta * adv.direction(t)))
        cs.append(worst / eta ** 2)
    # the measured constant c in ‖r_t‖ ≤ cη² is stable as η shrinks
    assert max(cs) <= 0.5
    assert max(cs) / min(cs) <= 1.2


def test_curl_value_at_one_one():
    assert comparator_curl(np.array([1.0, 1.0]), ZU) == pytest.approx(0.5 * (0.5 - np.sqrt(3) / 2), abs=1e-15)
    assert 0.5 * (0.5 - np.sqrt(3) / 2) == pytest.approx(-0.1830, abs=1e-4)


def test_curl_formula_against_finite_differences():
    z = np.array([1.1, 1.05])
    h = 1e-6
    P = lambda p: comparator_field(p, ZU)[0]
    Qf = lambda p: comparator_field(p, ZU)[1]
    dQ1 = (Qf(z + [h, 0]) - Qf(z - [h, 0])) / (2 * h)
    dP2 = (P(z + [0, h]) - P(z - [0, h])) / (2 * h)
    assert comparator_curl(z, ZU) == pytest.approx(dQ1 - dP2, abs=1e-8)


def test_circulation_against_adaptive_quadrature():
    adv = CurlCycleAdversary(0.002)
    want = oracles.circulation_dblquad(adv.rectangle, adv.z_u)
    assert want == pytest.approx(-0.0055306369699, abs=1e-12)
    got = rectangle_circulation(adv)
    assert got == pytest.approx(want, abs=1e-8)
    assert abs(got + 0.0055) <= 5e-4
    a, b, alpha, beta = adv.rectangle
    assert got <= -adv.gamma * alpha * beta + 1e-8


def test_conservative_null_case():
    # z_u = 0 makes F_u(z) = z/‖z‖², the gradient of log‖z‖: zero curl, zero circulation
    fake = SimpleNamespace(rectangle=(1.0, 1.0, 0.2, 0.2), z_u=np.zeros(2))
    assert comparator_curl(np.array([1.3, 0.7]), np.zeros(2)) == 0.0
    assert rectangle_circulation(fake) == 0.0
    # boundary line integral of F(z) = z around the rectangle also vanishes
    s = np.linspace(0, 1, 2001)
    a, b, al, be = fake.rectangle
    path = np.concatenate([np.stack([a + al * s, np.full_like(s, b)], -1),
                           np.stack([np.full_like(s, a + al), b + be * s], -1),
                           np.stack([a + al * s[::-1], np.full_like(s, b + be)], -1),
                           np.stack([np.full_like(s, a), b + be * s[::-1]], -1)])
    mid = 0.5 * (path[1:] + path[:-1])
    assert abs(np.sum(mid * np.diff(path, axis=0))) <= 1e-12


def test_circulation_quadrature_guard():
    with pytest.raises(ValidationError):
        rectangle_circulation(CurlCycleAdversary(0.002), quadrature_n=8)


def test_curl_certificate_failure():
    with pytest.raises(CertificateError, match="curl"):
        CurlCycleAdversary(0.002, gamma=0.2)


def test_containment_failure():
    with pytest.raises(CertificateError, match="inside"):
        CurlCycleAdversary(0.002, rectangle=(2.5, 1.0, 0.5, 0.5))


def test_sizing_error():
    with pytest.raises(SizingError):
        CurlCycleAdversary(0.3)


def test_escape_error_carries_round():
    adv = CurlCycleAdversary(0.002)
    with pytest.raises(TrajectoryEscape) as e:
        adv.round(17, np.array([2.0, 2.0]))
    assert e.value.round_index == 17


def test_certificate_contents():
    cert = CurlCycleAdversary(0.002).certificate()
    assert cert["max_curl"] <= -0.06
    assert cert["I_R"] < 0
    assert cert["N"] == 400


@pytest.mark.parametrize("eta", [0.005, 0.002])
def test_trajectory_stays_in_buffer(eta):
    adv = CurlCycleAdversary(eta)
    res = lower_bound_experiment(adv, 5 * adv.N)
    z = adv.q(res.trace.iterates)
    assert np.all(z >= adv.K_lo) and np.all(z <= adv.K_hi)


def test_path_sum_gap_is_first_order():
    gaps = []
    for eta in (0.004, 0.002, 0.001):
        adv = CurlCycleAdversary(eta)
        res = lower_bound_experiment(adv, adv.N + 1)
        z = adv.q(res.trace.iterates)
        F = comparator_field(z[:-1], adv.z_u)
        gaps.append(np.sum(F * np.diff(z, axis=0)) - rectangle_circulation(adv))
    for a, b in zip(gaps, gaps[1:]):
        assert b / a == pytest.approx(0.5, rel=0.25)


@pytest.mark.parametrize("eta", [0.004, 0.002, 0.001])
def test_cycle_regret_positive_order_inverse_eta(eta):
    adv = CurlCycleAdversary(eta)
    res = lower_bound_experiment(adv, 2 * adv.N)
    c0 = 0.005
    assert np.all(res.cycle_sums >= c0 / eta)


# ------------------------------------------------------------------ bandit oracle

def test_bandit_one_dimensional_signs():
    q, _ = gallery_pair("identity", d=1)
    rnd = LossRound(q, [1.0])
    rng = np.random.default_rng(0)
    signs = np.array([bandit_query(rnd, np.zeros(1), 0.1, rng).direction[0] for _ in range(10_000)])
    assert set(np.unique(signs)) == {-1.0, 1.0}
    assert abs(np.mean(signs > 0) - 0.5) <= 0.02


def test_bandit_linear_value():
    q, _ = gallery_pair("identity")
    rnd = LossRound(q, [1.0, 0.0])
    obs = bandit_query(rnd, np.zeros(2), 0.1, np.random.default_rng(1))
    assert obs.value == pytest.approx(0.1 * obs.direction[0], abs=1e-16)
    assert np.linalg.norm(obs.direction) == pytest.approx(1.0, abs=1e-12)
    fixed = BanditObservation(np.array([0.1, 0.0]), rnd.original_value(np.array([0.1, 0.0])),
                              np.array([1.0, 0.0]), 0.1)
    assert fixed.value == pytest.approx(0.1)


def test_bandit_directions_centered():
    q, _ = gallery_pair("identity")
    rnd = LossRound(q, [1.0, 0.0])
    rng = np.random.default_rng(2)
    Z = np.array([bandit_query(rnd, np.zeros(2), 0.1, rng).direction for _ in range(10_000)])
    assert np.all(np.abs(Z.mean(axis=0)) <= 0.02)


def test_bandit_feasibility():
    q, _ = gallery_pair("identity")
    rnd = LossRound(q, [1.0, 0.0])
    with pytest.raises(FeasibilityError):
        bandit_query(rnd, np.array([0.95, 0.0]), 0.1, np.random.default_rng(0), X=Ball([0, 0], 1.0))
    with pytest.raises(ValidationError):
        bandit_query(rnd, np.zeros(2), 0.0, np.random.default_rng(0))


def test_estimator_mean_matches_smoothed_gradient():
    # E[(d/δ)ℓ(x+δζ)ζ] equals the ball-averaged gradient, computed by polar quadrature
    q, _ = gallery_pair("exponential")
    rnd = LossRound(q, [0.3, -0.2], 0.8, np.array([0.7, 0.9]))
    x = np.array([-0.3, -0.4])
    delta = 0.2
    want = oracles.smoothed_gradient_2d(rnd.original_grad, x, delta)
    rng = np.random.default_rng(11)
    n = 100_000
    zeta = rng.standard_normal((n, 2))
    zeta /= np.linalg.norm(zeta, axis=1, keepdims=True)
    obs = BanditObservation(x + delta * zeta, rnd.original_value(x + delta * zeta), zeta, delta)
    g = bandit_estimate(obs)
    se = g.std(axis=0, ddof=1) / np.sqrt(n)
    assert np.all(np.abs(g.mean(axis=0) - want) <= 3 * se)
