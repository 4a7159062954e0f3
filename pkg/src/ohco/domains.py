"""Convex sets (boxes, balls, scalings), Euclidean and Bregman projections."""
import numpy as np
from scipy.optimize import brentq

from .errors import DomainError, NumericError, ValidationError


class ConvexSet:
    d = 0

    def contains(self, x, tol=1e-10):
        raise NotImplementedError

    def project(self, x):
        raise NotImplementedError

    def sample(self, rng, n):
        raise NotImplementedError

    def resolve(self):
        return self

    def scaled(self, factor):
        return Scaled(self, factor)


class Box(ConvexSet):
    kind = "box"

    def __init__(self, lo, hi):
        lo = np.atleast_1d(np.asarray(lo, dtype=float))
        hi = np.atleast_1d(np.asarray(hi, dtype=float))
        if lo.shape != hi.shape or lo.ndim != 1:
            raise ValidationError("box bounds must be vectors of equal length")
        if not np.all(lo < hi):
            raise ValidationError("box needs lo < hi componentwise")
        self.lo, self.hi = lo, hi
        self.d = lo.size

    def __repr__(self):
        return f"Box({self.lo.tolist()}, {self.hi.tolist()})"

    def describe(self):
        return f"box(lo={self.lo.tolist()}, hi={self.hi.tolist()})"

    def contains(self, x, tol=1e-10):
        x = np.asarray(x, dtype=float)
        return np.all((x >= self.lo - tol) & (x <= self.hi + tol), axis=-1)

    def project(self, x):
        return np.clip(np.asarray(x, dtype=float), self.lo, self.hi)

    def sample(self, rng, n):
        return rng.uniform(self.lo, self.hi, size=(n, self.d))

    def vertices(self):
        corners = np.array(np.meshgrid(*zip(self.lo, self.hi), indexing="ij"))
        return corners.reshape(self.d, -1).T

    def boundary_sample(self, rng, n):
        x = self.sample(rng, n)
        k = rng.integers(0, self.d, size=n)
        side = rng.integers(0, 2, size=n).astype(bool)
        x[np.arange(n), k] = np.where(side, self.hi[k], self.lo[k])
        return x

    @property
    def diameter(self):
        return float(np.linalg.norm(self.hi - self.lo))

    @property
    def max_norm(self):
        return float(np.linalg.norm(np.maximum(np.abs(self.lo), np.abs(self.hi))))

    def bounds(self):
        return self.lo, self.hi


class Ball(ConvexSet):
    kind = "ball"

    def __init__(self, center, radius):
        self.center = np.atleast_1d(np.asarray(center, dtype=float))
        self.radius = float(radius)
        if not self.radius > 0:
            raise ValidationError("ball radius must be positive")
        self.d = self.center.size

    def __repr__(self):
        return f"Ball({self.center.tolist()}, {self.radius})"

    def describe(self):
        return f"ball(center={self.center.tolist()}, radius={self.radius!r})"

    def contains(self, x, tol=1e-10):
        x = np.asarray(x, dtype=float)
        return np.linalg.norm(x - self.center, axis=-1) <= self.radius + tol

    def project(self, x):
        x = np.asarray(x, dtype=float)
        v = x - self.center
        n = np.linalg.norm(v, axis=-1, keepdims=True)
        scale = np.minimum(1.0, self.radius / np.maximum(n, 1e-300))
        return self.center + v * scale

    def sample(self, rng, n):
        v = rng.standard_normal((n, self.d))
        v /= np.linalg.norm(v, axis=-1, keepdims=True)
        r = self.radius * rng.uniform(size=(n, 1)) ** (1.0 / self.d)
        return self.center + r * v

    def boundary_sample(self, rng, n):
        v = rng.standard_normal((n, self.d))
        v /= np.linalg.norm(v, axis=-1, keepdims=True)
        return self.center + self.radius * v

    @property
    def diameter(self):
        return 2 * self.radius

    @property
    def max_norm(self):
        return float(np.linalg.norm(self.center) + self.radius)

    def bounds(self):
        return self.center - self.radius, self.center + self.radius


class Scaled(ConvexSet):
    """``factor · base``; with ``factor = 1 − δ`` this is the shrunken set used under bandit feedback."""

    kind = "scaled"

    def __init__(self, base, factor):
        factor = float(factor)
        if not 0 < factor <= 1:
            raise ValidationError("scaling factor must lie in (0, 1]")
        self.base = base
        self.factor = factor
        self.d = base.d
        b = base.resolve()
        if isinstance(b, Box):
            self._concrete = Box(factor * b.lo, factor * b.hi)
        else:
            self._concrete = Ball(factor * b.center, factor * b.radius)

    def __repr__(self):
        return f"Scaled({self.base!r}, {self.factor})"

    def describe(self):
        return f"scaled({self.base.describe()}, factor={self.factor!r})"

    def resolve(self):
        return self._concrete

    def contains(self, x, tol=1e-10):
        return self._concrete.contains(x, tol)

    def project(self, x):
        return self._concrete.project(x)

    def sample(self, rng, n):
        return self._concrete.sample(rng, n)

    def boundary_sample(self, rng, n):
        return self._concrete.boundary_sample(rng, n)

    @property
    def diameter(self):
        return self._concrete.diameter

    @property
    def max_norm(self):
        return self._concrete.max_norm

    def bounds(self):
        return self._concrete.bounds()


def shrunken(X, delta):
    """``X_δ = (1 − δ)X``, requiring ``0 ∈ X`` and the unit ball inside ``X``."""
    if not 0 <= delta < 1:
        raise ValidationError("delta must lie in [0, 1)")
    check_bandit_domain(X)
    return Scaled(X, 1.0 - delta)


def check_bandit_domain(X):
    S = X.resolve()
    if isinstance(S, Box):
        ok = np.all(S.lo <= -1.0) and np.all(S.hi >= 1.0)
    else:
        ok = np.linalg.norm(S.center) + 1.0 <= S.radius + 1e-12
    if not ok:
        raise ValidationError("bandit domain must contain the unit ball centred at the origin")


def euclidean_project(S, x):
    """Nearest point of ``S`` to ``x`` in the Euclidean norm."""
    x = np.asarray(x, dtype=float)
    if x.shape[-1] != S.d:
        raise ValidationError("dimension mismatch between point and set")
    return S.project(x)


# --------------------------------------------------------------------------
# mirror-map solver: argmin_{y ∈ S} R(y) − ⟨θ, y⟩

def _newton_unconstrained(R, theta, y0, tol, max_iter):
    """Damped Newton on ∇R(y) = θ, staying inside the domain of R."""
    y = np.array(y0, dtype=float)
    for _ in range(max_iter):
        r = R.gradient(y) - theta
        res = np.max(np.abs(r))
        if res <= tol:
            return y, res
        step = np.linalg.solve(R.hessian(y), r)
        t = 1.0
        f0 = R.value(y) - theta @ y
        while True:
            cand = y - t * step
            if np.all(R.in_domain(cand)):
                f1 = R.value(cand) - theta @ cand
                if f1 <= f0 - 1e-4 * t * (r @ step) or t < 1e-12:
                    break
                # near the solution f is flat to rounding; judge by the residual instead
                if res < 1e-6 and np.max(np.abs(R.gradient(cand) - theta)) < res:
                    break
            t *= 0.5
            if t < 1e-14:
                raise NumericError("line search failed in mirror inversion", residual=res)
        y = cand
    res = np.max(np.abs(R.gradient(y) - theta))
    return y, res


def _box_projected_newton(R, theta, box, y0, tol, max_iter):
    """Projected Newton with an active set for bound constraints."""
    lo, hi = box.lo, box.hi
    y = box.project(y0)
    if not np.all(R.in_domain(y)):
        raise DomainError("box leaves the domain of the regularizer")

    def f(v):
        return R.value(v) - theta @ v

    res = np.inf
    for _ in range(max_iter):
        g = R.gradient(y) - theta
        res = np.max(np.abs(y - box.project(y - g)))
        if res <= tol:
            return y, res
        eps = min(1e-9, res)
        active = ((y <= lo + eps) & (g > 0)) | ((y >= hi - eps) & (g < 0))
        free = ~active
        step = np.zeros_like(y)
        if np.any(free):
            Hff = R.hessian(y)[np.ix_(free, free)]
            step[free] = np.linalg.solve(Hff, g[free])
        step[active] = g[active]
        f0 = f(y)
        t = 1.0
        while True:
            cand = box.project(y - t * step)
            if np.all(R.in_domain(cand)):
                f1 = f(cand)
                if f1 <= f0 - 1e-4 * (g @ (y - cand)) or t < 1e-12:
                    break
            t *= 0.5
            if t < 1e-14:
                raise NumericError("projected Newton line search failed", residual=res)
        if np.array_equal(cand, y):
            break
        y = cand
    g = R.gradient(y) - theta
    res = np.max(np.abs(y - box.project(y - g)))
    return y, res


def _ball_dual(R, theta, ball, y0, tol, max_iter):
    """Solve the ball-constrained problem through its scalar multiplier."""
    c, rad = ball.center, ball.radius
    state = {"y": np.array(y0, dtype=float)}

    class _Shifted:
        # R(y) + λ‖y − c‖² with matching derivatives
        def __init__(self, lam):
            self.lam = lam

        def value(self, y):
            return R.value(y) + self.lam * np.sum((y - c) ** 2, axis=-1)

        def gradient(self, y):
            return R.gradient(y) + 2 * self.lam * (y - c)

        def hessian(self, y):
            return R.hessian(y) + 2 * self.lam * np.eye(c.size)

        def in_domain(self, y):
            return R.in_domain(y)

    def solve(lam):
        start = ball.project(state["y"])
        if not np.all(R.in_domain(start)):
            start = state["y"]
        try:
            y, res = _newton_unconstrained(_Shifted(lam), theta, start, tol, max_iter)
        except (NumericError, np.linalg.LinAlgError, FloatingPointError):
            return None
        if not (np.all(np.isfinite(y)) and res <= 1e-9):
            return None
        state["y"] = y
        return y

    def phi(lam):
        # a failed inner solve means the minimizer runs off; treat it as outside
        y = solve(lam)
        return 1.0 if y is None else float(np.linalg.norm(y - c) - rad)

    def kkt(y):
        return float(np.max(np.abs(y - ball.project(y - (R.gradient(y) - theta)))))

    with np.errstate(over="ignore", invalid="ignore", divide="ignore"):
        if phi(0.0) <= 0:
            y = state["y"]
            return y, kkt(y)
        hi = 1.0
        while phi(hi) > 0:
            hi *= 4.0
            if hi > 1e16:
                raise NumericError("could not bracket the ball multiplier")
        lam = brentq(phi, 0.0, hi, xtol=1e-15, rtol=4 * np.finfo(float).eps, maxiter=400)
        y = solve(lam)
        if y is None:
            y = solve(hi)
    if np.linalg.norm(y - c) > rad:
        y = c + (y - c) * (rad / np.linalg.norm(y - c))
    return y, kkt(y)


def mirror_argmin(S, R, theta, y0, tol=1e-12, max_iter=200):
    """``argmin_{y∈S} R(y) − ⟨θ, y⟩``; the common core of Bregman projection and mirror steps."""
    theta = np.asarray(theta, dtype=float)
    y0 = np.asarray(y0, dtype=float)
    base = S.resolve()
    try:
        # the unconstrained attempt may wander toward the barrier before giving up
        with np.errstate(over="ignore", invalid="ignore", divide="ignore"):
            y, res = _newton_unconstrained(R, theta, y0, tol, max_iter)
        if res <= tol * 10 and base.contains(y, tol=0.0):
            return y
    except (NumericError, np.linalg.LinAlgError):
        pass
    if isinstance(base, Box):
        y, res = _box_projected_newton(R, theta, base, y0, tol, max_iter)
    else:
        y, res = _ball_dual(R, theta, base, y0 if base.contains(y0) else base.center, tol, max_iter)
    if not res <= 1e-8:
        raise NumericError(f"constrained mirror solve did not converge (residual {res:.3g})", residual=res)
    return y


def bregman_project(S, R, x, tol=1e-12, max_iter=200):
    """``argmin_{y∈S} D_R(y‖x)``."""
    x = np.asarray(x, dtype=float)
    if not np.all(R.in_domain(x)):
        raise DomainError("point outside the regularizer domain")
    if S.contains(x, tol=0.0):
        return x.copy()
    y0 = S.project(x)
    return mirror_argmin(S, R, R.gradient(x), y0, tol, max_iter)


def omd_step(S, R, y, g, eta, tol=1e-12, max_iter=200):
    """One mirror-descent step ``argmin_{s∈S} ⟨g, s⟩ + D_R(s‖y)/η``."""
    if not eta > 0:
        raise ValidationError("eta must be positive")
    y = np.asarray(y, dtype=float)
    g = np.asarray(g, dtype=float)
    if not np.any(g):
        return y.copy()
    theta = R.gradient(y) - eta * g
    return mirror_argmin(S, R, theta, y, tol, max_iter)
