"""Loss sequences: seeded linear/quadratic hidden losses, the curl-cycle
adversary on the log-spiral map, and the one-point bandit oracle."""
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .domains import Box
from .errors import (CertificateError, FeasibilityError, SizingError,
                     TrajectoryEscape, ValidationError)
from .geometry import gallery_pair

BLOCK = 4096


class LossRound:
    """``h_t(z) = (μ/2)‖z − w‖² + ⟨c, z⟩`` and its pull-back ``ℓ_t = h_t ∘ q``.

    Parameters may carry a leading batch axis (one row per independent run);
    evaluation broadcasts against points of shape ``(..., d)``.
    """

    def __init__(self, q, c, mu=0.0, w=None, t=0):
        self.q = q
        self.c = np.asarray(c, dtype=float)
        self.mu = np.asarray(mu, dtype=float)
        self.w = np.zeros_like(self.c) if w is None else np.asarray(w, dtype=float)
        self.t = t

    def hidden_value(self, z):
        z = np.asarray(z, dtype=float)
        return 0.5 * self.mu * np.sum((z - self.w) ** 2, axis=-1) + np.sum(self.c * z, axis=-1)

    def hidden_grad(self, z):
        z = np.asarray(z, dtype=float)
        return self.mu[..., None] * (z - self.w) + self.c

    def original_value(self, x):
        return self.hidden_value(self.q(x))

    def original_grad(self, x):
        x = np.asarray(x, dtype=float)
        J = self.q.jacobian(x)
        return np.einsum("...ij,...i->...j", J, self.hidden_grad(self.q(x)))


@dataclass
class RoundTotals:
    """Sufficient statistics of a quadratic-family prefix: the hindsight
    objective is ``½Σμ‖z‖² − ⟨Σμw, z⟩ + ½Σμ‖w‖² + ⟨Σc, z⟩``."""

    T: int
    s_mu: np.ndarray
    s_mw: np.ndarray
    s_mww: np.ndarray
    s_c: np.ndarray
    mu_max: float = 0.0

    def value(self, z):
        z = np.asarray(z, dtype=float)
        return (0.5 * self.s_mu * np.sum(z * z, axis=-1) - z @ self.s_mw
                + 0.5 * self.s_mww + z @ self.s_c)

    def grad(self, z):
        return self.s_mu * np.asarray(z, dtype=float) - self.s_mw + self.s_c

    @classmethod
    def from_rounds(cls, rounds):
        rounds = list(rounds)
        d = rounds[0].c.shape[-1] if rounds else 0
        out = cls(len(rounds), 0.0, np.zeros(d), 0.0, np.zeros(d))
        for r in rounds:
            out.s_mu += float(r.mu)
            out.s_mw = out.s_mw + r.mu * r.w
            out.s_mww += float(r.mu * (r.w @ r.w))
            out.s_c = out.s_c + r.c
            out.mu_max = max(out.mu_max, float(r.mu))
        return out


def sphere(rng, n, d, radius=1.0):
    """``n`` points uniform on the sphere of the given radius (normalized Gaussians)."""
    v = rng.standard_normal((n, d))
    return radius * v / np.linalg.norm(v, axis=-1, keepdims=True)


def dense_sample(S, n=2048, seed=12345):
    """Interior, boundary and (for boxes) vertex points of ``S``."""
    rng = np.random.default_rng(seed)
    parts = [S.sample(rng, n), S.boundary_sample(rng, n // 2)]
    base = S.resolve()
    if isinstance(base, Box):
        parts.append(base.vertices())
    return np.concatenate(parts)


def jacobian_bounds(q, Y, n=2048):
    """``(max ‖J_q‖₂, max ‖∇²q‖_F)`` over the preimage of ``Y``."""
    x = q.inverse(dense_sample(Y, n))
    lip = float(np.max(np.linalg.norm(q.jacobian(x), ord=2, axis=(-2, -1))))
    curv = float(np.max(np.sqrt(np.sum(q.second_derivative(x) ** 2, axis=(-3, -2, -1)))))
    return lip, curv


class HiddenSequence:
    """Oblivious round generator; round ``t`` (1-based) depends only on ``(seed, t)``.

    Randomness is drawn per block of rounds from independent streams keyed by
    ``(seed, block, stream)``, so rounds can be fetched in any order.
    """

    def __init__(self, q, Y, seed):
        self.q = q
        self.Y = Y
        self.seed = int(seed)
        self.d = q.d
        self._block = lru_cache(maxsize=4)(self._make_block)

    def _rng(self, block, stream):
        return np.random.default_rng(np.random.SeedSequence(self.seed, spawn_key=(block, stream)))

    def _make_block(self, b):
        raise NotImplementedError

    def params(self, t0, t1):
        """Parameters ``(mu, w, c)`` for rounds ``t0+1 .. t1``."""
        if t1 <= t0:
            d = self.d
            return np.zeros(0), np.zeros((0, d)), np.zeros((0, d))
        out = [[], [], []]
        for b in range(t0 // BLOCK, (t1 - 1) // BLOCK + 1):
            mu, w, c = self._block(b)
            lo = max(t0 - b * BLOCK, 0)
            hi = min(t1 - b * BLOCK, BLOCK)
            for acc, arr in zip(out, (mu, w, c)):
                acc.append(arr[lo:hi])
        return tuple(np.concatenate(a) for a in out)

    def round(self, t):
        mu, w, c = self.params(t - 1, t)
        return LossRound(self.q, c[0], mu[0], w[0], t=t)

    def rounds(self, T):
        for t0 in range(0, T, BLOCK):
            mu, w, c = self.params(t0, min(T, t0 + BLOCK))
            for i in range(mu.size):
                yield LossRound(self.q, c[i], mu[i], w[i], t=t0 + i + 1)

    def __iter__(self):
        t = 0
        while True:
            t += 1
            yield self.round(t)

    def totals(self, T):
        d = self.d
        out = RoundTotals(T, 0.0, np.zeros(d), 0.0, np.zeros(d))
        for t0 in range(0, T, BLOCK):
            mu, w, c = self.params(t0, min(T, t0 + BLOCK))
            out.s_mu += float(mu.sum())
            out.s_mw = out.s_mw + mu @ w
            out.s_mww += float(mu @ np.sum(w * w, axis=-1))
            out.s_c = out.s_c + c.sum(axis=0)
            if mu.size:
                out.mu_max = max(out.mu_max, float(mu.max()))
        return out


class LinearHiddenSequence(HiddenSequence):
    """``h_t(z) = ⟨c_t, z⟩`` with ``c_t`` uniform on the sphere of radius ``grad_bound / L_q``."""

    def __init__(self, Y, q, seed, grad_bound, lipschitz=None):
        if not grad_bound > 0:
            raise ValidationError("grad_bound must be positive")
        super().__init__(q, Y, seed)
        lip, curv = jacobian_bounds(q, Y)
        self.lipschitz = float(lipschitz) if lipschitz is not None else lip
        self.curvature = curv
        self.grad_bound = float(grad_bound)
        self.radius = self.grad_bound / self.lipschitz

    def _make_block(self, b):
        c = sphere(self._rng(b, 0), BLOCK, self.d, self.radius)
        return np.zeros(BLOCK), np.zeros((BLOCK, self.d)), c

    def constants(self):
        return {"G_F": self.grad_bound, "H": self.radius * self.curvature,
                "M_bound": self.radius * self.Y.max_norm}


class QuadraticHiddenSequence(HiddenSequence):
    """``h_t(z) = (μ_t/2)‖z − w_t‖² + ⟨c_t, z⟩``.

    ``μ_t`` is uniform on ``[0, μ_max]`` with ``μ_max = H / L_q²`` (or given
    directly), ``w_t`` is uniform in ``Y`` and ``c_t = drift + ξ_t`` with
    ``ξ_t`` uniform on the sphere of radius ``linear_radius``. The linear
    part uses the same stream as :class:`LinearHiddenSequence`, so
    ``μ_max = 0`` with matching radius reproduces it exactly.
    """

    def __init__(self, Y, q, seed, H=None, mu_max=None, linear_radius=0.0,
                 drift=None, lipschitz=None):
        super().__init__(q, Y, seed)
        lip, curv = jacobian_bounds(q, Y)
        self.lipschitz = float(lipschitz) if lipschitz is not None else lip
        self.curvature = curv
        if mu_max is None:
            if H is None or not H > 0:
                raise ValidationError("smoothness H must be positive")
            mu_max = H / self.lipschitz ** 2
        if mu_max < 0:
            raise ValidationError("mu_max must be nonnegative")
        self.mu_max = float(mu_max)
        self.linear_radius = float(linear_radius)
        self.drift = np.zeros(self.d) if drift is None else np.asarray(drift, dtype=float)

    def _make_block(self, b):
        c = sphere(self._rng(b, 0), BLOCK, self.d, self.linear_radius) + self.drift
        mu = self._rng(b, 1).uniform(0.0, self.mu_max, BLOCK)
        w = self.Y.sample(self._rng(b, 2), BLOCK)
        return mu, w, c

    def hidden_grad_bound(self):
        return self.mu_max * self.Y.diameter + self.linear_radius + float(np.linalg.norm(self.drift))

    def constants(self):
        """Implied bounds over the domain: gradient ``G_F``, smoothness ``H`` and value ``M_bound``."""
        gh = self.hidden_grad_bound()
        cmax = self.linear_radius + float(np.linalg.norm(self.drift))
        return {
            "G_F": self.lipschitz * gh,
            "H": self.mu_max * self.lipschitz ** 2 + gh * self.curvature,
            "M_bound": 0.5 * self.mu_max * self.Y.diameter ** 2 + cmax * self.Y.max_norm,
        }


def linear_hidden_sequence(Y, q, seed, grad_bound):
    return LinearHiddenSequence(Y, q, seed, grad_bound)


def quadratic_hidden_sequence(Y, q, seed, H, **kwargs):
    return QuadraticHiddenSequence(Y, q, seed, H=H, **kwargs)


# --------------------------------------------------------------------------
# curl-cycle construction on the log-spiral map

def comparator_field(z, z_u):
    """``F_u(z) = (z − z_u)/‖z‖²``."""
    z = np.asarray(z, dtype=float)
    return (z - z_u) / np.sum(z * z, axis=-1, keepdims=True)


def comparator_curl(z, z_u):
    """``∂₁Q_u − ∂₂P_u = 2(z₁u₂ − z₂u₁)/‖z‖⁴`` for ``F_u = (P_u, Q_u)``."""
    z = np.asarray(z, dtype=float)
    r2 = np.sum(z * z, axis=-1)
    return 2 * (z[..., 0] * z_u[1] - z[..., 1] * z_u[0]) / r2 ** 2


class CurlCycleAdversary:
    """Linear hidden losses that steer OGD around a rectangle on which the
    comparator field has negative curl.

    Round ``t`` uses edge direction ``v_t`` (``e₁`` for ``n₁`` rounds, then
    ``e₂`` for ``n₂``, ``−e₁`` for ``n₁``, ``−e₂`` for ``n₂``, repeating)
    and slope ``s_t = −v_t/‖z_t‖²``.
    """

    def __init__(self, eta, rectangle=(1.0, 1.0, 0.2, 0.2), u=(0.0, np.pi / 6),
                 buffer=0.05, gamma=0.06, q=None, X=None, grid_n=41):
        if q is None:
            q, _ = gallery_pair("log_spiral")
        if X is None:
            X = Box(*q.x_box)
        self.q, self.X = q, X
        self.eta = float(eta)
        if not self.eta > 0:
            raise ValidationError("eta must be positive")
        a, b, alpha, beta = (float(v) for v in rectangle)
        self.rectangle = (a, b, alpha, beta)
        self.corners = np.array([[a, b], [a + alpha, b], [a + alpha, b + beta], [a, b + beta]])
        self.u = np.asarray(u, dtype=float)
        self.z_u = q(self.u)
        self.buffer = float(buffer)
        self.gamma = float(gamma)
        self.n1 = int(np.floor(alpha / self.eta + 1e-9))
        self.n2 = int(np.floor(beta / self.eta + 1e-9))
        if self.n1 == 0 or self.n2 == 0:
            raise SizingError("eta exceeds a rectangle side; edge step counts would be zero")
        self.N = 2 * self.n1 + 2 * self.n2
        self.K_lo = np.array([a, b]) - self.buffer
        self.K_hi = np.array([a + alpha, b + beta]) + self.buffer
        self._check_containment()
        grid = np.stack(np.meshgrid(np.linspace(a, a + alpha, grid_n),
                                    np.linspace(b, b + beta, grid_n), indexing="ij"), -1).reshape(-1, 2)
        self.max_curl = float(comparator_curl(grid, self.z_u).max())
        if not self.max_curl <= -self.gamma:
            raise CertificateError(
                f"curl certificate failed: max curl {self.max_curl:.4g} > -{self.gamma}")
        self.t = 0
        edges = np.array([[1.0, 0.0], [0.0, 1.0], [-1.0, 0.0], [0.0, -1.0]])
        self.schedule = np.repeat(edges, [self.n1, self.n2, self.n1, self.n2], axis=0)

    def _check_containment(self):
        lo, hi = self.K_lo, self.K_hi
        s = np.linspace(0, 1, 101)
        edges = np.concatenate([
            np.stack([lo[0] + s * (hi[0] - lo[0]), np.full_like(s, lo[1])], -1),
            np.stack([lo[0] + s * (hi[0] - lo[0]), np.full_like(s, hi[1])], -1),
            np.stack([np.full_like(s, lo[0]), lo[1] + s * (hi[1] - lo[1])], -1),
            np.stack([np.full_like(s, hi[0]), lo[1] + s * (hi[1] - lo[1])], -1)])
        x = self.q.inverse(edges)
        base = self.X.resolve()
        inside = np.all((x > base.lo) & (x < base.hi), axis=-1)
        if not np.all(inside):
            raise CertificateError("buffered rectangle is not inside the image of the interior of X")

    def direction(self, t):
        """Edge direction for round ``t`` (1-based)."""
        return self.schedule[(t - 1) % self.N]

    def in_buffer(self, z):
        z = np.asarray(z, dtype=float)
        return bool(np.all(z >= self.K_lo) and np.all(z <= self.K_hi))

    def round(self, t, z_t):
        z_t = np.asarray(z_t, dtype=float)
        if not self.in_buffer(z_t):
            raise TrajectoryEscape(f"hidden iterate left the buffer region at round {t}", t)
        v = self.direction(t)
        return LossRound(self.q, -v / float(z_t @ z_t), t=t)

    def circulation(self, quadrature_n=200):
        return rectangle_circulation(self, quadrature_n)

    def certificate(self):
        return {"max_curl": self.max_curl, "gamma": self.gamma,
                "I_R": rectangle_circulation(self), "n1": self.n1, "n2": self.n2, "N": self.N}


def curl_cycle_round(adv, z_t, t=None):
    """Next curl-cycle round. Without ``t`` the adversary's own counter advances."""
    if t is None:
        adv.t += 1
        t = adv.t
    return adv.round(t, z_t)


def rectangle_circulation(adv, quadrature_n=200):
    """Composite-trapezoid value of the area integral of the curl over the rectangle."""
    if quadrature_n < 16:
        raise ValidationError("quadrature_n must be at least 16")
    a, b, alpha, beta = adv.rectangle
    s1 = np.linspace(a, a + alpha, quadrature_n + 1)
    s2 = np.linspace(b, b + beta, quadrature_n + 1)
    Z = np.stack(np.meshgrid(s1, s2, indexing="ij"), -1)
    vals = comparator_curl(Z, adv.z_u)
    w1 = np.full(s1.size, alpha / quadrature_n)
    w1[[0, -1]] *= 0.5
    w2 = np.full(s2.size, beta / quadrature_n)
    w2[[0, -1]] *= 0.5
    return float(w1 @ vals @ w2)


# --------------------------------------------------------------------------
# bandit feedback

@dataclass
class BanditObservation:
    query: np.ndarray
    value: np.ndarray
    direction: np.ndarray
    delta: float


def bandit_query(round, x_t, delta, rng, X=None):
    """Evaluate ``ℓ_t`` at ``x_t + δζ`` with ``ζ`` uniform on the unit sphere."""
    if not delta > 0:
        raise ValidationError("delta must be positive")
    x_t = np.asarray(x_t, dtype=float)
    zeta = rng.standard_normal(x_t.shape)
    zeta /= np.linalg.norm(zeta, axis=-1, keepdims=True)
    x_hat = x_t + delta * zeta
    if X is not None and not np.all(X.contains(x_hat)):
        raise FeasibilityError("perturbed query left the decision set; X_delta is mis-sized")
    return BanditObservation(x_hat, round.original_value(x_hat), zeta, float(delta))
