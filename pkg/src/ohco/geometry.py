"""Reparameterizations, regularizers and the metric they induce.

All maps are vectorized: points are arrays of shape ``(..., d)`` and
Jacobians/Hessians come back with shape ``(..., d, d)``.
"""
from dataclasses import dataclass

import numpy as np

from .errors import (BoundaryError, CompatibilityError, DomainError,
                     GalleryError, ValidationError)

GALLERY_NAMES = ("identity", "quadratic", "exponential", "affine_mixed",
                 "rank_one", "log_spiral")


def _arr(x):
    return np.asarray(x, dtype=float)


def _eye_like(x, d):
    return np.broadcast_to(np.eye(d), x.shape[:-1] + (d, d)).copy()


def _diag(v):
    out = np.zeros(v.shape + (v.shape[-1],))
    idx = np.arange(v.shape[-1])
    out[..., idx, idx] = v
    return out


class Reparameterization:
    """A smooth bijection ``q`` from decision space X to hidden space Y.

    ``x_box`` is the default decision box ``(lo, hi)`` of the gallery
    member. ``hidden_domain`` is the natural domain of ``q⁻¹`` as a
    predicate on hidden points. ``image_box`` maps a decision box to its
    hidden image when that image is itself a box, and is ``None`` otherwise.
    """

    def __init__(self, name, d, forward, inverse, jacobian=None, x_box=None,
                 hidden_domain=None, image_box=None, second=None):
        self.name = name
        self.d = int(d)
        self._forward = forward
        self._inverse = inverse
        self._jacobian = jacobian
        self.analytic_flag = jacobian is not None
        if x_box is not None:
            x_box = (_arr(x_box[0]), _arr(x_box[1]))
        self.x_box = x_box
        self._hidden_domain = hidden_domain
        self._image_box = image_box
        self._second = second

    def __repr__(self):
        return f"Reparameterization({self.name!r}, d={self.d})"

    def forward(self, x):
        return self._forward(_arr(x))

    __call__ = forward

    def inverse(self, z):
        z = _arr(z)
        if not np.all(self.in_hidden_domain(z)):
            raise DomainError(f"{self.name}: point outside the domain of the inverse map")
        return self._inverse(z)

    def jacobian(self, x):
        x = _arr(x)
        if self._jacobian is None:
            return self.fd_jacobian(x)
        return self._jacobian(x)

    def fd_jacobian(self, x, step=1e-5):
        """Central-difference Jacobian, ``J[..., i, j] = ∂q_i/∂x_j``."""
        x = _arr(x)
        J = np.empty(x.shape + (self.d,))
        for j in range(self.d):
            h = step * np.maximum(1.0, np.abs(x[..., j]))
            xp = x.copy()
            xm = x.copy()
            xp[..., j] += h
            xm[..., j] -= h
            J[..., :, j] = (self._forward(xp) - self._forward(xm)) / (2 * h[..., None])
        return J

    def second_derivative(self, x):
        """``∂²q_i/∂x_j∂x_k`` as an array ``(..., i, j, k)``."""
        x = _arr(x)
        if self._second is not None:
            return self._second(x)
        out = np.empty(x.shape + (self.d, self.d))
        for k in range(self.d):
            h = 1e-5 * np.maximum(1.0, np.abs(x[..., k]))
            xp = x.copy()
            xm = x.copy()
            xp[..., k] += h
            xm[..., k] -= h
            out[..., k] = (self.jacobian(xp) - self.jacobian(xm)) / (2 * h[..., None, None])
        return out

    def in_hidden_domain(self, z):
        z = _arr(z)
        if self._hidden_domain is None:
            return np.ones(z.shape[:-1], dtype=bool)
        return self._hidden_domain(z)

    def image_box(self, lo, hi):
        """Hidden image of the box ``[lo, hi]`` as ``(lo, hi)``, or ``None``."""
        if self._image_box is None:
            return None
        return self._image_box(_arr(lo), _arr(hi))


class Regularizer:
    """A strictly convex potential with gradient and Hessian oracles."""

    def __init__(self, name, d, value, gradient, hessian, in_domain=None):
        self.name = name
        self.d = int(d)
        self._value = value
        self._gradient = gradient
        self._hessian = hessian
        self._in_domain = in_domain

    def __repr__(self):
        return f"Regularizer({self.name!r}, d={self.d})"

    def in_domain(self, z):
        z = _arr(z)
        if self._in_domain is None:
            return np.ones(z.shape[:-1], dtype=bool)
        return self._in_domain(z)

    def _check(self, z):
        z = _arr(z)
        if self._in_domain is not None and not np.all(self._in_domain(z)):
            raise DomainError(f"{self.name}: point outside the regularizer domain")
        return z

    def value(self, z):
        return self._value(self._check(z))

    def gradient(self, z):
        return self._gradient(self._check(z))

    def hessian(self, z):
        return self._hessian(self._check(z))


def bregman_divergence(R, z, w):
    """``D_R(z‖w) = R(z) − R(w) − ⟨∇R(w), z − w⟩`` (vectorized)."""
    z = _arr(z)
    w = _arr(w)
    return R.value(z) - R.value(w) - np.sum(R.gradient(w) * (z - w), axis=-1)


class MetricField:
    """Matrix field on hidden space. Built from ``q`` it is ``[J_q J_qᵀ]⁻¹ ∘ q⁻¹``."""

    def __init__(self, evaluate, d, in_domain=None, source=None, name=""):
        self._evaluate = evaluate
        self.d = int(d)
        self._in_domain = in_domain
        self.source = source
        self.name = name

    @classmethod
    def from_reparameterization(cls, q):
        def evaluate(z):
            Jinv = np.linalg.inv(q.jacobian(q.inverse(z)))
            return np.swapaxes(Jinv, -1, -2) @ Jinv
        return cls(evaluate, q.d, in_domain=q.in_hidden_domain, source=q, name=q.name)

    @classmethod
    def from_regularizer(cls, R):
        return cls(R.hessian, R.d, in_domain=R.in_domain, source=R, name=R.name)

    def in_domain(self, z):
        z = _arr(z)
        if self._in_domain is None:
            return np.ones(z.shape[:-1], dtype=bool)
        return self._in_domain(z)

    def evaluate(self, z):
        return self._evaluate(_arr(z))

    __call__ = evaluate


@dataclass(frozen=True)
class AssumptionConstants:
    """Constants entering the step-size formulas."""

    G: float
    G_F: float
    D1: float
    D: float
    H: float
    M_bound: float
    d: int

    def __post_init__(self):
        bad = [k for k in ("G", "G_F", "D1", "D", "H", "M_bound")
               if not (np.isfinite(getattr(self, k)) and getattr(self, k) > 0)]
        if bad:
            raise ValidationError(f"constants must be finite and positive: {', '.join(bad)}")
        if not self.G > 1:
            raise ValidationError("G must exceed 1")
        if int(self.d) != self.d or self.d < 1:
            raise ValidationError("d must be a positive integer")


# --------------------------------------------------------------------------
# gallery

def _increasing_image(f):
    return lambda lo, hi: (f(lo), f(hi))


def _positive(z):
    return np.all(z > 0, axis=-1)


def euclidean_regularizer(d):
    return Regularizer(
        "euclidean", d,
        lambda z: 0.5 * np.sum(z * z, axis=-1),
        lambda z: z.copy(),
        lambda z: _eye_like(z, d))


def _identity(d):
    q = Reparameterization(
        "identity", d, lambda x: x.copy(), lambda z: z.copy(),
        lambda x: _eye_like(x, d),
        x_box=(-np.ones(d), np.ones(d)),
        image_box=lambda lo, hi: (lo.copy(), hi.copy()),
        second=lambda x: np.zeros(x.shape + (d, d)))
    return q, euclidean_regularizer(d)


def _quadratic(d):
    def second(x):
        out = np.zeros(x.shape + (d, d))
        i = np.arange(d)
        out[..., i, i, i] = 2.0
        return out
    q = Reparameterization(
        "quadratic", d, lambda x: x * x, np.sqrt, lambda x: _diag(2 * x),
        x_box=(np.full(d, 0.2), np.full(d, 0.5)), hidden_domain=_positive,
        image_box=_increasing_image(lambda x: x * x), second=second)
    R = Regularizer(
        "entropy", d,
        lambda z: 0.25 * np.sum(z * np.log(z), axis=-1),
        lambda z: 0.25 * (np.log(z) + 1.0),
        lambda z: _diag(0.25 / z), in_domain=_positive)
    return q, R


def log_barrier(d):
    return Regularizer(
        "log_barrier", d,
        lambda z: -np.sum(np.log(z), axis=-1),
        lambda z: -1.0 / z,
        lambda z: _diag(1.0 / (z * z)), in_domain=_positive)


def _exponential(d):
    def second(x):
        out = np.zeros(x.shape + (d, d))
        i = np.arange(d)
        out[..., i, i, i] = np.exp(x)
        return out
    q = Reparameterization(
        "exponential", d, np.exp, np.log, lambda x: _diag(np.exp(x)),
        x_box=(np.full(d, np.log(0.5)), np.zeros(d)), hidden_domain=_positive,
        image_box=_increasing_image(np.exp), second=second)
    return q, log_barrier(d)


def _affine_mixed(A=None, b=None):
    A = np.array([[1.0, 1.0], [0.0, 1.0]]) if A is None else _arr(A)
    d = A.shape[0]
    b = np.zeros(d) if b is None else _arr(b)
    Ainv = np.linalg.inv(A)

    def xi(z):
        return (z - b) @ Ainv.T

    q = Reparameterization(
        "affine_mixed", d,
        lambda x: np.exp(x) @ A.T + b,
        lambda z: np.log(xi(z)),
        lambda x: A * np.exp(x)[..., None, :],
        x_box=(np.full(d, np.log(0.2)), np.full(d, np.log(0.5))),
        hidden_domain=lambda z: np.all(xi(z) > 0, axis=-1))
    R = Regularizer(
        "affine_log_barrier", d,
        lambda z: -np.sum(np.log(xi(z)), axis=-1),
        lambda z: -(1.0 / xi(z)) @ Ainv,
        lambda z: Ainv.T @ _diag(1.0 / xi(z) ** 2) @ Ainv,
        in_domain=lambda z: np.all(xi(z) > 0, axis=-1))
    return q, R


_GL_NODES, _GL_WEIGHTS = np.polynomial.legendre.leggauss(64)


def _rank_one(a=None, amp=0.1, x_box=None):
    a = np.array([1.0, 1.0]) / np.sqrt(2.0) if a is None else _arr(a)
    d = a.size
    s = float(a @ a)
    if abs(amp) * s >= 1:
        raise GalleryError("rank_one needs |amp|·‖a‖² < 1 so that 1 + s·h′ stays positive")

    def h(r):
        return amp * np.sin(r)

    def dh(r):
        return amp * np.cos(r)

    def ginv(t):
        # g(r) = r + s·h(r) is increasing, Newton from r = t converges quickly
        r = np.array(t, dtype=float, copy=True)
        for _ in range(60):
            step = (r + s * h(r) - t) / (1 + s * dh(r))
            r = r - step
            if np.all(np.abs(step) <= 1e-15 * np.maximum(1.0, np.abs(r))):
                break
        return r

    def inverse(z):
        r = ginv(z @ a)
        return z - h(r)[..., None] * a

    def beta(t):
        k = 1 + s * dh(ginv(t))
        return (k ** -2 - 1) / s

    def _psi_parts(t):
        # integrate in the r variable: dτ = (1 + s·h′(ρ)) dρ
        t = _arr(t)
        r = ginv(t)
        half = 0.5 * r
        rho = half[..., None] * (_GL_NODES + 1.0)
        k = 1 + s * dh(rho)
        dens = (1.0 / k - k) / s
        w = half[..., None] * _GL_WEIGHTS
        dpsi = np.sum(w * dens, axis=-1)
        tau = rho + s * h(rho)
        psi = np.sum(w * (t[..., None] - tau) * dens, axis=-1)
        return psi, dpsi

    if x_box is None and d == 2 and np.allclose(a, np.array([1.0, 1.0]) / np.sqrt(2.0)):
        x_box = (np.full(2, 1.2), np.full(2, 3.2))
    image_box = None
    axis = np.flatnonzero(a)
    if axis.size == 1 and a[axis[0]] == 1.0:
        k = axis[0]

        def image_box(lo, hi):
            lo2, hi2 = lo.copy(), hi.copy()
            lo2[k] += h(lo[k])
            hi2[k] += h(hi[k])
            return lo2, hi2

    def forward(x):
        return x + h(x @ a)[..., None] * a

    def jacobian(x):
        return _eye_like(x, d) + dh(x @ a)[..., None, None] * np.outer(a, a)

    def second(x):
        return -amp * np.sin(x @ a)[..., None, None, None] * np.einsum("i,j,k->ijk", a, a, a)

    q = Reparameterization("rank_one", d, forward, inverse, jacobian,
                           x_box=x_box, image_box=image_box, second=second)
    R = Regularizer(
        "rank_one_potential", d,
        lambda z: 0.5 * np.sum(z * z, axis=-1) + _psi_parts(z @ a)[0],
        lambda z: z + _psi_parts(z @ a)[1][..., None] * a,
        lambda z: _eye_like(z, d) + beta(z @ a)[..., None, None] * np.outer(a, a))
    q.beta = beta
    return q, R


def _log_spiral():
    def forward(x):
        r = np.exp(x[..., 0])
        return np.stack([r * np.cos(x[..., 1]), r * np.sin(x[..., 1])], axis=-1)

    def inverse(z):
        return np.stack([0.5 * np.log(np.sum(z * z, axis=-1)),
                         np.arctan2(z[..., 1], z[..., 0])], axis=-1)

    def jacobian(x):
        r = np.exp(x[..., 0])
        c, s = np.cos(x[..., 1]), np.sin(x[..., 1])
        return np.stack([np.stack([r * c, -r * s], -1),
                         np.stack([r * s, r * c], -1)], -2)

    q = Reparameterization(
        "log_spiral", 2, forward, inverse, jacobian,
        x_box=(np.array([0.0, np.pi / 6]), np.array([np.log(3.0), np.pi / 3])),
        hidden_domain=lambda z: np.sum(z * z, axis=-1) > 0)
    return q, None


def gallery_pair(name, d=None, **options):
    """Return ``(q, R)`` for a gallery member. ``R`` is ``None`` when no
    compatible regularizer exists.

    ``d`` applies to identity, quadratic and exponential (default 2).
    ``rank_one`` accepts ``a``, ``amp`` and ``x_box``; ``affine_mixed``
    accepts ``A`` and ``b``.
    """
    if name not in GALLERY_NAMES:
        raise GalleryError(f"unknown gallery member {name!r}; valid names: {', '.join(GALLERY_NAMES)}")
    if name in ("identity", "quadratic", "exponential"):
        if options:
            raise GalleryError(f"{name} takes no options")
        dd = 2 if d is None else int(d)
        return {"identity": _identity, "quadratic": _quadratic,
                "exponential": _exponential}[name](dd)
    if name == "affine_mixed":
        q, R = _affine_mixed(**options)
    elif name == "rank_one":
        q, R = _rank_one(**options)
    else:
        if options:
            raise GalleryError("log_spiral takes no options")
        q, R = _log_spiral()
    if d is not None and int(d) != q.d:
        raise GalleryError(f"{name} has dimension {q.d}, not {d}")
    return q, R


# --------------------------------------------------------------------------
# compatibility

@dataclass
class CompatReport:
    """Outcome of the cross-partial test.

    ``violations[n, i, j, k] = |∂_k M_ij − ∂_j M_ik|`` at ``points[n]``;
    indices are 0-based.
    """

    points: np.ndarray
    violations: np.ndarray
    tolerance: float
    fd_step: float

    @property
    def max_violation(self):
        return float(self.violations.max()) if self.violations.size else 0.0

    @property
    def argmax(self):
        return np.unravel_index(int(np.argmax(self.violations)), self.violations.shape)

    @property
    def location(self):
        return self.points[self.argmax[0]]

    @property
    def indices(self):
        return tuple(int(v) for v in self.argmax[1:])

    @property
    def compatible(self):
        return self.max_violation < self.tolerance

    def rows(self):
        """One row per point at its worst index triple: ``(*z, i, j, k, violation)``."""
        out = []
        d = self.points.shape[1]
        for n, z in enumerate(self.points):
            v = self.violations[n]
            i, j, k = np.unravel_index(int(np.argmax(v)), v.shape)
            out.append(tuple(float(c) for c in z) + (int(i), int(j), int(k), float(v[i, j, k])))
        return out


def _check_stencil(M, grid, h):
    d = grid.shape[1]
    ok = M.in_domain(grid)
    for k in range(d):
        for sign in (1.0, -1.0):
            zz = grid.copy()
            zz[:, k] += sign * h[:, k]
            ok &= M.in_domain(zz)
    if not np.all(ok):
        bad = grid[np.flatnonzero(~ok)[0]]
        raise BoundaryError(f"grid point {bad.tolist()} is within fd_step of the domain boundary",
                            point=bad)


def compatibility_check(M, grid, fd_step=1e-4, tol=1e-5):
    """Central-difference test of ``∂_k M_ij = ∂_j M_ik`` on ``grid``."""
    grid = np.atleast_2d(_arr(grid))
    N, d = grid.shape
    h = fd_step * np.maximum(1.0, np.abs(grid))
    _check_stencil(M, grid, h)
    dM = np.empty((N, d, d, d))
    for k in range(d):
        zp = grid.copy()
        zm = grid.copy()
        zp[:, k] += h[:, k]
        zm[:, k] -= h[:, k]
        dM[:, k] = (M(zp) - M(zm)) / (2 * h[:, k, None, None])
    # dM[n, k, i, j] = ∂_k M_ij ; V[n, i, j, k] = |∂_k M_ij − ∂_j M_ik|
    a = np.transpose(dM, (0, 2, 3, 1))
    b = np.transpose(dM, (0, 2, 1, 3))
    return CompatReport(grid, np.abs(a - b), float(tol), float(fd_step))


def box_grid(lo, hi, n):
    """Tensor grid with ``n`` points per axis, in 'ij' order."""
    lo, hi = _arr(lo), _arr(hi)
    axes = [np.linspace(l, u, n) for l, u in zip(lo, hi)]
    mesh = np.meshgrid(*axes, indexing="ij")
    return np.stack([m.ravel() for m in mesh], axis=-1)


# --------------------------------------------------------------------------
# reconstruction

class ReconstructedRegularizer(Regularizer):
    """Potential recovered from a compatible metric field by path integration.

    Gradient: integrate the rows of ``M`` along axis-aligned segments from
    the anchor (coordinate order ``0..d-1``) with the composite trapezoid
    rule plus its Euler-Maclaurin end correction. Value: integrate the
    gradient the same way. Hessian: central differences of the gradient.
    """

    def __init__(self, M, anchor, resolution, fd_step=1e-5, name=None):
        self.field = M
        self.anchor = _arr(anchor)
        self.resolution = int(resolution)
        self.fd_step = fd_step
        d = M.d
        s = np.linspace(0.0, 1.0, self.resolution + 1)
        w = np.full(self.resolution + 1, 1.0 / self.resolution)
        w[0] = w[-1] = 0.5 / self.resolution
        self._s, self._w = s, w
        super().__init__(name or f"reconstructed_{M.name}", d, self._value_impl,
                         self._grad_impl, self._hess_impl, in_domain=M.in_domain)

    def _segments(self, z, order):
        """Yield ``(k, pts, length)`` for each axis segment of the path to ``z``."""
        p = np.broadcast_to(self.anchor, z.shape).copy()
        for k in order:
            length = z[:, k] - p[:, k]
            pts = np.repeat(p[:, None, :], self._s.size, axis=1)
            pts[:, :, k] = p[:, k, None] + length[:, None] * self._s
            if not np.all(self.field.in_domain(pts)):
                raise BoundaryError("integration path leaves the domain of the metric field",
                                    point=z[np.flatnonzero(~np.all(self.field.in_domain(pts), axis=1))[0]])
            yield k, pts, length
            p[:, k] = z[:, k]

    def path_gradient(self, z, order=None):
        z = np.atleast_2d(_arr(z))
        order = range(self.d) if order is None else order
        g = np.zeros(z.shape)
        for k, pts, length in self._segments(z, order):
            Mv = self.field(pts)
            g += np.einsum("m,nmi->ni", self._w, Mv[..., :, k]) * length[:, None]
            # Euler-Maclaurin end correction: −(h²/12)(f′(end) − f′(start))
            slope = self._axis_derivative(pts[:, -1], k) - self._axis_derivative(pts[:, 0], k)
            h = length / self.resolution
            g -= (h * h / 12.0)[:, None] * slope[:, :, k]
        return g

    def _axis_derivative(self, p, k):
        eps = 1e-5 * np.maximum(1.0, np.abs(p[:, k]))
        pp = p.copy()
        pm = p.copy()
        pp[:, k] += eps
        pm[:, k] -= eps
        ok_p = self.field.in_domain(pp)
        ok_m = self.field.in_domain(pm)
        lo = np.where(ok_m, -1.0, 0.0)
        hi = np.where(ok_p, 1.0, 0.0)
        pm[:, k] = p[:, k] + lo * eps
        pp[:, k] = p[:, k] + hi * eps
        return (self.field(pp) - self.field(pm)) / ((hi - lo) * eps)[:, None, None]

    def path_gap(self, z):
        """Max gap between forward and reversed coordinate orders (a path-independence diagnostic)."""
        z = np.atleast_2d(_arr(z))
        fwd = self.path_gradient(z)
        rev = self.path_gradient(z, order=range(self.d - 1, -1, -1))
        return float(np.max(np.abs(fwd - rev)))

    def _grad_impl(self, z):
        z = _arr(z)
        return self.path_gradient(z.reshape(-1, self.d)).reshape(z.shape)

    def _value_impl(self, z):
        z = _arr(z)
        flat = z.reshape(-1, self.d)
        val = np.zeros(flat.shape[0])
        for k, pts, length in self._segments(flat, range(self.d)):
            g = self.path_gradient(pts.reshape(-1, self.d)).reshape(pts.shape)
            val += (g[..., k] @ self._w) * length
            # the axis derivative of g_k is M_kk, so the end correction is exact here
            h = length / self.resolution
            val -= h * h / 12.0 * (self.field(pts[:, -1])[:, k, k] - self.field(pts[:, 0])[:, k, k])
        return val.reshape(z.shape[:-1])

    def _hess_impl(self, z):
        z = _arr(z)
        flat = z.reshape(-1, self.d)
        H = np.empty(flat.shape + (self.d,))
        for j in range(self.d):
            h = self.fd_step * np.maximum(1.0, np.abs(flat[:, j]))
            zp = flat.copy()
            zm = flat.copy()
            zp[:, j] += h
            zm[:, j] -= h
            H[:, :, j] = (self.path_gradient(zp) - self.path_gradient(zm)) / (2 * h[:, None])
        H = 0.5 * (H + np.swapaxes(H, -1, -2))
        return H.reshape(z.shape + (self.d,))


def reconstruct_regularizer(M, anchor, grid_resolution=200, extent=None,
                            fd_step=1e-4, tol=1e-5, check_points=4, hessian_step=1e-5):
    """Recover ``R`` with ``∇²R = M`` and the gauge ``R(anchor) = 0``, ``∇R(anchor) = 0``.

    The field is first tested for compatibility on a ``check_points``-per-axis
    grid over ``extent = (lo, hi)`` (a small cube around the anchor when not
    given); a failing field is refused with the report attached.
    """
    anchor = np.atleast_1d(_arr(anchor))
    if anchor.size != M.d:
        raise ValidationError("anchor dimension does not match the metric field")
    if not np.all(M.in_domain(anchor)):
        raise BoundaryError(f"anchor {anchor.tolist()} outside the domain", point=anchor)
    if extent is None:
        r = 0.05 * np.maximum(1.0, np.abs(anchor))
        lo, hi = anchor - r, anchor + r
    else:
        lo, hi = _arr(extent[0]), _arr(extent[1])
        pad = 2 * fd_step * np.maximum(1.0, np.maximum(np.abs(lo), np.abs(hi)))
        lo, hi = lo + pad, hi - pad
    report = compatibility_check(M, box_grid(lo, hi, check_points), fd_step=fd_step, tol=tol)
    if not report.compatible:
        raise CompatibilityError(
            f"metric field fails the cross-partial test (violation {report.max_violation:.3g} "
            f"at {report.location.tolist()}, indices {report.indices})", report=report)
    return ReconstructedRegularizer(M, anchor, grid_resolution, fd_step=hessian_step)
