import numpy as np
import pytest
import sympy as sp
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.stats import qmc

from ohco.errors import BoundaryError, CompatibilityError, DomainError, GalleryError, ValidationError
from ohco.geometry import (GALLERY_NAMES, AssumptionConstants, MetricField, box_grid,
                           bregman_divergence, compatibility_check, euclidean_regularizer,
                           gallery_pair, log_barrier, reconstruct_regularizer)

import oracles

COMPATIBLE = ["identity", "quadratic", "exponential", "affine_mixed", "rank_one"]


def halton_in(q, n=100):
    lo, hi = q.x_box
    u = qmc.Halton(d=q.d, seed=3).random(n)
    return lo + u * (hi - lo)


def image_grid(q, n):
    lo, hi = q.x_box
    pad = 0.02 * (hi - lo)
    return q(box_grid(lo + pad, hi - pad, n))


@pytest.mark.parametrize("name", GALLERY_NAMES)
def test_round_trip(name):
    q, _ = gallery_pair(name)
    x = halton_in(q)
    assert np.max(np.abs(q.inverse(q(x)) - x)) <= 1e-9


@pytest.mark.parametrize("name", GALLERY_NAMES)
def test_jacobian_matches_central_differences(name):
    q, _ = gallery_pair(name)
    x = halton_in(q)
    assert np.max(np.abs(q.jacobian(x) - q.fd_jacobian(x, step=1e-5))) <= 1e-5


@pytest.mark.parametrize("name", GALLERY_NAMES)
def test_jacobian_invertible(name):
    q, _ = gallery_pair(name)
    sv = np.linalg.svd(q.jacobian(halton_in(q)), compute_uv=False)
    assert sv.min() > 1e-8


@pytest.mark.parametrize("name", COMPATIBLE)
def test_regularizer_hessian_symmetric_and_strongly_convex(name):
    q, R = gallery_pair(name)
    z = q(halton_in(q))
    H = R.hessian(z)
    assert np.max(np.abs(H - np.swapaxes(H, -1, -2))) <= 1e-10
    assert np.linalg.eigvalsh(H).min() >= 1 - 1e-6


@pytest.mark.parametrize("name", COMPATIBLE)
def test_metric_equals_regularizer_hessian(name):
    q, R = gallery_pair(name)
    z = image_grid(q, 10)
    M = MetricField.from_reparameterization(q)
    assert np.max(np.abs(M(z) - R.hessian(z))) <= 1e-6


@pytest.mark.parametrize("name", GALLERY_NAMES)
def test_metric_spd(name):
    q, _ = gallery_pair(name)
    M = MetricField.from_reparameterization(q)(image_grid(q, 6))
    assert np.max(np.abs(M - np.swapaxes(M, -1, -2))) <= 1e-12
    assert np.linalg.eigvalsh(M).min() > 0


def test_unknown_gallery_name_lists_valid_names():
    with pytest.raises(GalleryError, match="valid names: identity"):
        gallery_pair("exp")


def test_log_spiral_has_no_regularizer():
    assert gallery_pair("log_spiral")[1] is None


def test_identity_metric_and_hessian():
    q, R = gallery_pair("identity")
    z = np.array([0.3, 0.7])
    np.testing.assert_array_equal(MetricField.from_reparameterization(q)(z), np.eye(2))
    np.testing.assert_array_equal(R.hessian(z), np.eye(2))


def test_exponential_metric_1d():
    # M(z) = 1/z² = 0.25 at z = 2, the second derivative of −log z
    q, R = gallery_pair("exponential", d=1)
    M = MetricField.from_reparameterization(q)(np.array([2.0]))
    assert M.shape == (1, 1)
    assert M[0, 0] == pytest.approx(0.25, abs=1e-15)
    assert R.hessian(np.array([2.0]))[0, 0] == pytest.approx(0.25, abs=1e-15)


def test_log_spiral_metric_matches_symbolic():
    q, _ = gallery_pair("log_spiral")
    Ms = oracles.log_spiral_metric()
    got = MetricField.from_reparameterization(q)(np.array([1.0, 1.0]))
    want = np.array(Ms.subs({oracles.z1: 1, oracles.z2: 1}), dtype=float)
    np.testing.assert_allclose(got, want, atol=1e-14)
    np.testing.assert_allclose(got, 0.5 * np.eye(2), atol=1e-14)


def test_affine_metric_matches_symbolic():
    q, R = gallery_pair("affine_mixed")
    Ms = oracles.affine_exp_metric([[1, 1], [0, 1]], [0, 0])
    for z in ([0.7, 0.4], [0.6, 0.25], [0.9, 0.45]):
        want = np.array(Ms.subs({oracles.z1: z[0], oracles.z2: z[1]}), dtype=float)
        np.testing.assert_allclose(MetricField.from_reparameterization(q)(np.array(z)), want, atol=1e-12)
        np.testing.assert_allclose(R.hessian(np.array(z)), want, atol=1e-12)


def test_rank_one_hessian_matches_beta_formula():
    # ∇²R = I + β(aᵀz)aaᵀ with β such that (I + βaaᵀ)⁻¹ = J Jᵀ
    q, R = gallery_pair("rank_one")
    x = halton_in(q, 20)
    J = q.jacobian(x)
    np.testing.assert_allclose(np.linalg.inv(J @ np.swapaxes(J, -1, -2)), R.hessian(q(x)), atol=1e-12)


def test_rank_one_potential_derivatives_consistent():
    q, R = gallery_pair("rank_one")
    z = q(halton_in(q, 10))
    h = 1e-6
    for k in range(2):
        e = np.zeros(2)
        e[k] = h
        fd = (R.value(z + e) - R.value(z - e)) / (2 * h)
        np.testing.assert_allclose(fd, R.gradient(z)[:, k], atol=1e-7)
        fdg = (R.gradient(z + e) - R.gradient(z - e)) / (2 * h)
        np.testing.assert_allclose(fdg, R.hessian(z)[:, :, k], atol=1e-6)


def test_rank_one_scalar_map_bound():
    # 1 + s·h′ stays within [0.9, 1.1] for h = 0.1 sin, s = ‖a‖² = 1
    r = np.linspace(-10, 10, 2001)
    k = 1 + 0.1 * np.cos(r)
    assert k.min() >= 0.9 and k.max() <= 1.1


def test_rank_one_rejects_noninvertible_amplitude():
    with pytest.raises(GalleryError):
        gallery_pair("rank_one", amp=1.5)


# ------------------------------------------------------------------ bregman

def test_bregman_euclidean():
    R = euclidean_regularizer(2)
    assert bregman_divergence(R, np.array([1.0, 0.0]), np.zeros(2)) == 0.5


def test_bregman_log_barrier_zero_at_equal_points():
    R = log_barrier(1)
    assert bregman_divergence(R, np.array([1.0]), np.array([1.0])) == 0.0


def test_bregman_log_barrier_value():
    # oracle: R(2) − R(1) − R′(1)(2 − 1) = −log 2 + 1
    R = log_barrier(1)
    assert bregman_divergence(R, np.array([2.0]), np.array([1.0])) == pytest.approx(1 - np.log(2), abs=1e-15)
    assert 1 - np.log(2) == pytest.approx(0.3069, abs=1e-4)


def test_bregman_domain_error():
    with pytest.raises(DomainError):
        bregman_divergence(log_barrier(1), np.array([-1.0]), np.array([1.0]))


@pytest.mark.parametrize("name", COMPATIBLE)
@settings(max_examples=50, deadline=None)
@given(u=st.lists(st.floats(0, 1), min_size=4, max_size=4))
def test_bregman_nonnegative(name, u):
    q, R = gallery_pair(name)
    lo, hi = q.x_box
    a = q(lo + np.array(u[:2]) * (hi - lo))
    b = q(lo + np.array(u[2:]) * (hi - lo))
    D = bregman_divergence(R, a, b)
    assert D >= -1e-12
    if np.allclose(a, b, atol=1e-6):
        return
    assert D > 0
    assert bregman_divergence(R, a, a) == pytest.approx(0.0, abs=1e-10)


# ------------------------------------------------------------------ constants

def test_assumption_constants_validation():
    AssumptionConstants(G=2, G_F=1, D1=1, D=1, H=1, M_bound=1, d=2)
    with pytest.raises(ValidationError, match="G must exceed 1"):
        AssumptionConstants(G=1.0, G_F=1, D1=1, D=1, H=1, M_bound=1, d=2)
    with pytest.raises(ValidationError, match="H"):
        AssumptionConstants(G=2, G_F=1, D1=1, D=1, H=0, M_bound=1, d=2)


# ------------------------------------------------------------------ compatibility

def test_exponential_compatible_on_grid():
    q, _ = gallery_pair("exponential")
    rep = compatibility_check(MetricField.from_reparameterization(q), box_grid([1, 1], [3, 3], 9), fd_step=1e-4)
    assert rep.max_violation < 1e-6
    assert rep.compatible


def test_identity_field_violation_is_noise():
    q, _ = gallery_pair("identity")
    rep = compatibility_check(MetricField.from_reparameterization(q), box_grid([-1, -1], [1, 1], 7))
    assert rep.max_violation < 1e-9


def test_log_spiral_violation_at_one_one():
    q, _ = gallery_pair("log_spiral")
    rep = compatibility_check(MetricField.from_reparameterization(q), np.array([[1.0, 1.0]]))
    want, idx = oracles.max_cross_partial(oracles.log_spiral_metric(), (1, 1))
    assert want == pytest.approx(0.5, abs=1e-14)
    assert rep.max_violation == pytest.approx(want, abs=1e-6)
    # (1,1,2) in 1-based indices
    assert rep.violations[0, 0, 0, 1] == pytest.approx(0.5, abs=1e-6)
    assert not rep.compatible


def test_affine_symbolic_cross_partials_vanish():
    v, _ = oracles.max_cross_partial(oracles.affine_exp_metric([[1, 1], [0, 1]], [0, 0]), (0.7, 0.4))
    assert v == pytest.approx(0.0, abs=1e-12)


@pytest.mark.parametrize("name", COMPATIBLE)
def test_gallery_compatibility_verdicts(name):
    q, _ = gallery_pair(name)
    rep = compatibility_check(MetricField.from_reparameterization(q), image_grid(q, 9))
    assert rep.max_violation < 1e-6 and rep.compatible


def test_compat_report_rows():
    q, _ = gallery_pair("log_spiral")
    rep = compatibility_check(MetricField.from_reparameterization(q), np.array([[1.0, 1.0], [1.2, 1.1]]))
    rows = rep.rows()
    assert len(rows) == 2 and len(rows[0]) == 6
    assert rows[0][:2] == (1.0, 1.0)


def test_compat_boundary_error_names_point():
    q, _ = gallery_pair("exponential")
    with pytest.raises(BoundaryError, match=r"\[5e-05, 1.0\]") as e:
        compatibility_check(MetricField.from_reparameterization(q), np.array([[5e-5, 1.0]]))
    np.testing.assert_array_equal(e.value.point, [5e-5, 1.0])


# ------------------------------------------------------------------ reconstruction

def test_reconstruct_identity_value():
    q, _ = gallery_pair("identity")
    Rr = reconstruct_regularizer(MetricField.from_reparameterization(q), np.zeros(2))
    assert Rr.value(np.array([1.0, 1.0])) == pytest.approx(1.0, abs=1e-12)
    np.testing.assert_allclose(Rr.gradient(np.array([1.0, 1.0])), [1.0, 1.0], atol=1e-12)


def test_reconstruct_gauge():
    q, _ = gallery_pair("exponential")
    anchor = np.array([0.7, 0.8])
    Rr = reconstruct_regularizer(MetricField.from_reparameterization(q), anchor)
    assert Rr.value(anchor) == 0.0
    np.testing.assert_array_equal(Rr.gradient(anchor), [0.0, 0.0])


def test_reconstruct_exponential_1d():
    q, _ = gallery_pair("exponential", d=1)
    Rr = reconstruct_regularizer(MetricField.from_reparameterization(q), np.array([2.0]))
    assert abs(Rr.hessian(np.array([3.0]))[0, 0] - 1 / 9) <= 1e-4


def test_reconstruct_value_matches_gauged_log_barrier():
    # −log z gauged at 2: R(z) + log 2 − (z − 2)/2 ... with R′(2) = −1/2
    q, _ = gallery_pair("exponential", d=1)
    Rr = reconstruct_regularizer(MetricField.from_reparameterization(q), np.array([2.0]))
    z = 3.0
    want = -np.log(z) + np.log(2.0) + 0.5 * (z - 2.0)
    assert Rr.value(np.array([z])) == pytest.approx(want, abs=1e-8)


@pytest.mark.parametrize("name", ["quadratic", "exponential", "affine_mixed"])
def test_reconstruct_hessian_on_grid(name):
    q, R = gallery_pair(name)
    Mf = MetricField.from_reparameterization(q)
    grid = image_grid(q, 4)
    anchor = grid.mean(axis=0)
    Rr = reconstruct_regularizer(Mf, anchor, grid_resolution=200)
    assert np.max(np.abs(Rr.hessian(grid) - R.hessian(grid))) <= 1e-4
    assert Rr.path_gap(grid) <= 1e-6


def test_reconstruct_affine_against_symbolic_hessian():
    q, _ = gallery_pair("affine_mixed")
    expr = -sp.log(oracles.z1 - oracles.z2) - sp.log(oracles.z2)
    z = np.array([0.7, 0.4])
    Rr = reconstruct_regularizer(MetricField.from_reparameterization(q), np.array([0.65, 0.35]))
    assert np.max(np.abs(Rr.hessian(z) - oracles.hessian_numeric(expr, z))) <= 1e-4


def test_reconstruct_refuses_incompatible_field():
    q, _ = gallery_pair("log_spiral")
    with pytest.raises(CompatibilityError) as e:
        reconstruct_regularizer(MetricField.from_reparameterization(q), np.array([1.0, 1.0]))
    assert e.value.report.max_violation > 0.4


def test_reconstruct_path_leaving_domain():
    # the domain {z1 > z2 > 0} is convex, but the axis-0-first path to (0.3, 0.25)
    # passes through (0.3, 0.35), which lies outside it
    q, _ = gallery_pair("affine_mixed")
    Rr = reconstruct_regularizer(MetricField.from_reparameterization(q), np.array([0.65, 0.35]))
    with pytest.raises(BoundaryError):
        Rr.gradient(np.array([0.3, 0.25]))


def test_reconstruct_point_outside_domain():
    q, _ = gallery_pair("exponential")
    Rr = reconstruct_regularizer(MetricField.from_reparameterization(q), np.array([1.0, 1.0]))
    with pytest.raises(DomainError):
        Rr.gradient(np.array([-0.5, 1.0]))
