"""Regret harness: constant audits, the hindsight comparator, batched runners,
the coupling and lower-bound experiments, the bandit regret decomposition and
log-log rate fits."""
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np
from scipy import stats
from scipy.optimize import minimize

from .adversaries import BLOCK, RoundTotals, dense_sample, sphere
from .domains import Ball, Box, check_bandit_domain, omd_step, shrunken
from .errors import (CompatibilityError, DiagnosticsUnavailable, FeasibilityError, NumericError,
                     OhcoError, OracleInconsistency, ValidationError)
from .geometry import (AssumptionConstants, MetricField, bregman_divergence,
                       box_grid, compatibility_check)
from .learners import StepSizePlan

# --------------------------------------------------------------------------
# audits


@dataclass
class GeometryAudit:
    """Measured smoothness parts of ``G`` plus the diameters ``D₁`` and ``D``."""

    parts: dict
    D1: float
    D: float
    strong_convexity: float

    @property
    def G(self):
        return max(max(self.parts.values()), float(np.nextafter(1.0, 2.0)))


def _directions(d, n, seed=7):
    u = sphere(np.random.default_rng(seed), n, d)
    return np.concatenate([np.eye(d), u])


def audit_geometry(q, R, X, n=2048, pairs=10_000, seed=0):
    """Measure every quantity bounded by ``G`` on a dense sample of ``X``.

    Parts: ``‖J_q‖``, ``‖J_q⁻¹‖``, ``sup_u ‖D_u J_{q⁻¹}‖``, ``‖∇R‖``,
    ``sup_u ‖D_u ∇²R‖`` and the Lipschitz constant of ``w ↦ D_R(z‖w)``.
    Norms are spectral. ``D₁`` is the largest divergence over sampled pairs.
    """
    x = dense_sample(X, n, seed=seed)
    z = q(x)
    J = q.jacobian(x)
    Jinv = np.linalg.inv(J)
    spec = lambda A: np.linalg.norm(A, ord=2, axis=(-2, -1))
    parts = {"lip_q": float(spec(J).max()), "inv_jac": float(spec(Jinv).max())}

    S2 = q.second_derivative(x)
    worst = 0.0
    for u in _directions(q.d, 32):
        w = Jinv @ u
        DJ = np.einsum("nijk,nk->nij", S2, w)
        worst = max(worst, float(spec(Jinv @ DJ @ Jinv).max()))
    parts["inv_second"] = worst

    parts["grad_R"] = float(np.linalg.norm(R.gradient(z), axis=-1).max())
    third = 0.0
    for u in _directions(q.d, 32):
        h = 1e-5 * np.maximum(1.0, np.abs(z).max(axis=-1, keepdims=True))
        Hp = R.hessian(z + h * u)
        Hm = R.hessian(z - h * u)
        third = max(third, float(spec((Hp - Hm) / (2 * h[..., None])).max()))
    parts["third_R"] = third

    rng = np.random.default_rng(seed + 1)
    i = rng.integers(0, len(z), pairs)
    j = rng.integers(0, len(z), pairs)
    base = X.resolve()
    if isinstance(base, Box):
        vz = q(base.vertices())
        vi, vj = np.meshgrid(np.arange(len(vz)), np.arange(len(vz)), indexing="ij")
        za = np.concatenate([z[i], vz[vi.ravel()]])
        zb = np.concatenate([z[j], vz[vj.ravel()]])
    else:
        za, zb = z[i], z[j]
    Hb = R.hessian(zb)
    parts["bregman_lip"] = float(np.linalg.norm(np.einsum("nij,nj->ni", Hb, zb - za), axis=-1).max())
    D1 = float(bregman_divergence(R, za, zb).max())
    sc = float(np.linalg.eigvalsh(R.hessian(z)).min())
    return GeometryAudit(parts, D1, float(X.max_norm), sc)


def assumption_constants(geometry, loss, d):
    """Combine a geometry audit with loss constants (``G_F``, ``H``, ``M_bound``)."""
    return AssumptionConstants(G=geometry.G, G_F=loss["G_F"], D1=geometry.D1, D=geometry.D,
                               H=max(loss["H"], 1e-12), M_bound=loss["M_bound"], d=d)


def hidden_set(q, X):
    """Hidden image of ``X`` when it is a box or ball, else ``None``."""
    base = X.resolve()
    if q.name == "identity":
        return base
    if isinstance(base, Box):
        img = q.image_box(base.lo, base.hi)
        if img is not None:
            return Box(*img)
    return None


# --------------------------------------------------------------------------
# hindsight comparator

def _totals(rounds):
    if isinstance(rounds, RoundTotals):
        return rounds
    return RoundTotals.from_rounds(rounds)


def _grid_points(Y, n):
    lo, hi = Y.bounds()
    pts = box_grid(lo, hi, n)
    pts = pts[Y.contains(pts, tol=0.0)]
    base = Y.resolve()
    if isinstance(base, Ball):
        ang = np.linspace(0.0, 2 * np.pi, 8 * n, endpoint=False)
        if base.d == 2:
            ring = base.center + base.radius * np.stack([np.cos(ang), np.sin(ang)], -1)
            pts = np.concatenate([pts, ring])
    return pts


def hindsight_comparator(rounds, Y, iterations=10_000, grid=400, rtol=1e-3, q=None, X=None):
    """Minimize the total hidden loss over ``Y``.

    Projected gradient with step ``1/(T·L̂)`` (``L̂`` the mean curvature) from
    the best point of a ``grid``-per-axis search, which for ``d ≤ 2`` doubles
    as a cross-check. With ``Y=None`` the problem is solved over ``X`` in
    decision space instead (``q`` and ``X`` required). Returns ``(z*, value)``.
    """
    tot = _totals(rounds)
    if Y is None:
        return _comparator_in_x(tot, q, X, grid)
    d = Y.d
    if tot.T == 0:
        return Y.project(np.zeros(d)), 0.0
    use_grid = d <= 2
    if use_grid:
        pts = _grid_points(Y, grid)
        vals = tot.value(pts)
        k = int(np.argmin(vals))
        z, grid_val = pts[k].copy(), float(vals[k])
    else:
        z = Y.project(np.zeros(d))
    L = tot.s_mu / tot.T
    step = 1.0 / (tot.T * L) if L > 0 else 1.0 / tot.T
    for _ in range(iterations):
        nz = Y.project(z - step * tot.grad(z))
        if np.max(np.abs(nz - z)) <= 1e-15 * max(1.0, np.max(np.abs(z))):
            z = nz
            break
        z = nz
    val = float(tot.value(z))
    if use_grid:
        scale = max(1.0, abs(val))
        if val > grid_val + 1e-9 * scale:
            z, val = pts[k].copy(), grid_val
        if grid_val - val > rtol * scale:
            raise OracleInconsistency(
                f"grid search ({grid_val:.6g}) and projected gradient ({val:.6g}) disagree")
    return z, val


def _comparator_in_x(tot, q, X, grid):
    if q is None or X is None:
        raise ValidationError("decision-space fallback needs q and X")
    base = X.resolve()
    if base.d > 2:
        raise ValidationError("decision-space fallback is limited to d <= 2")
    pts = _grid_points(base, grid)
    vals = tot.value(q(pts))
    k = int(np.argmin(vals))
    lo, hi = base.bounds()
    f = lambda x: float(tot.value(q(x)))
    res = minimize(f, pts[k], method="L-BFGS-B", bounds=list(zip(lo, hi)))
    x = res.x if res.fun <= vals[k] and base.contains(res.x) else pts[k]
    z = q(x)
    return z, float(tot.value(z))


# --------------------------------------------------------------------------
# traces

@dataclass
class RegretTrace:
    """Per-round record of one run. ``iterates`` are the points actually
    played (queries for bandit runs); ``comparator_losses`` are the round
    losses at the fixed comparator."""

    iterates: np.ndarray
    losses: np.ndarray
    comparator_losses: np.ndarray
    comparator: np.ndarray
    comparator_value: float
    header: dict = field(default_factory=dict)

    @property
    def T(self):
        return int(self.losses.size)

    @property
    def cum_loss(self):
        return np.cumsum(self.losses)

    @property
    def cumulative_regret(self):
        return np.cumsum(self.losses - self.comparator_losses)

    @property
    def regret(self):
        return float(self.losses.sum() - self.comparator_value) if self.T else 0.0

    def regret_at(self, t):
        return float(np.sum(self.losses[:t] - self.comparator_losses[:t]))

    def check(self, tol=1e-9):
        """Recompute the final regret from the rows."""
        if self.T == 0:
            return True
        a = self.cumulative_regret[-1]
        return abs(a - self.regret) <= tol * max(1.0, abs(self.regret))


def _stack_params(seqs, t0, t1):
    ps = [s.params(t0, t1) for s in seqs]
    mu = np.stack([p[0] for p in ps], axis=1)
    w = np.stack([p[1] for p in ps], axis=1)
    c = np.stack([p[2] for p in ps], axis=1)
    return mu, w, c


def _round_values(z, mu, w, c):
    return 0.5 * mu * np.sum((z - w) ** 2, axis=-1) + np.sum(c * z, axis=-1)


def _comparator_losses(seqs, T, zstar):
    out = np.empty((T, len(seqs)))
    for t0 in range(0, T, BLOCK):
        t1 = min(T, t0 + BLOCK)
        mu, w, c = _stack_params(seqs, t0, t1)
        out[t0:t1] = _round_values(zstar[None], mu, w, c)
    return out


def _health(x, t):
    if not np.all(np.isfinite(x)):
        raise NumericError(f"non-finite iterate at round {t}")


def default_start(X):
    base = X.resolve()
    if isinstance(base, Box):
        return 0.5 * (base.lo + base.hi)
    return base.center.copy()


@dataclass
class BatchRun:
    """Outcome of one horizon over several seeds."""

    seeds: list
    T: int
    plan: StepSizePlan
    regrets: np.ndarray
    comparators: np.ndarray
    comparator_values: np.ndarray
    traces: list = None
    extra: dict = field(default_factory=dict)

    @property
    def mean(self):
        return float(self.regrets.mean())

    @property
    def se(self):
        n = self.regrets.size
        return float(self.regrets.std(ddof=1) / np.sqrt(n)) if n > 1 else 0.0


def _comparators(seqs, T, Y, q, X):
    zs, vs = [], []
    for s in seqs:
        z, v = hindsight_comparator(s.totals(T), Y, q=q, X=X)
        zs.append(z)
        vs.append(v)
    return np.array(zs), np.array(vs)


def run_full_information_batch(q, X, sequences, T, plan, x1=None, Y="auto", record=True):
    """OGD on ``ℓ_t = h_t ∘ q`` for several independent sequences at once."""
    if not isinstance(plan, StepSizePlan):
        plan = StepSizePlan(float(plan))
    seqs = list(sequences)
    S, d = len(seqs), q.d
    Y = hidden_set(q, X) if isinstance(Y, str) else Y
    x = np.broadcast_to(default_start(X) if x1 is None else np.asarray(x1, float), (S, d)).copy()
    eta = plan.eta
    losses = np.empty((T, S))
    iters = np.empty((T, S, d)) if record else None
    for t0 in range(0, T, BLOCK):
        t1 = min(T, t0 + BLOCK)
        mu, w, c = _stack_params(seqs, t0, t1)
        for i in range(t1 - t0):
            z = q(x)
            diff = z - w[i]
            losses[t0 + i] = 0.5 * mu[i] * np.sum(diff * diff, -1) + np.sum(c[i] * z, -1)
            gh = mu[i, :, None] * diff + c[i]
            grad = np.einsum("sij,si->sj", q.jacobian(x), gh)
            if record:
                iters[t0 + i] = x
            x = X.project(x - eta * grad)
        _health(x, t1)
    zstar, vstar = _comparators(seqs, T, Y, q, X)
    regrets = losses.sum(axis=0) - vstar
    traces = None
    if record:
        comp = _comparator_losses(seqs, T, zstar)
        traces = [RegretTrace(iters[:, k], losses[:, k], comp[:, k], zstar[k], float(vstar[k]),
                              {"seed": seqs[k].seed, "T": T, **{f"plan.{a}": b for a, b in plan.header().items()}})
                  for k in range(S)]
    return BatchRun([s.seed for s in seqs], T, plan, regrets, zstar, vstar, traces, {"final": x})


def run_full_information(q, X, sequence, T, plan, x1=None, Y="auto"):
    """Single-seed OGD run returning its :class:`RegretTrace`."""
    if T == 0:
        d = q.d
        return RegretTrace(np.zeros((0, d)), np.zeros(0), np.zeros(0), np.zeros(d), 0.0, {"T": 0})
    return run_full_information_batch(q, X, [sequence], T, plan, x1, Y).traces[0]


def run_ghost_omd(R, Y, sequence, T, eta, y1):
    """Mirror descent directly on the hidden losses (diagnostic device). Returns the iterates."""
    y = np.asarray(y1, dtype=float).copy()
    out = np.empty((T, y.size))
    for t0 in range(0, T, BLOCK):
        t1 = min(T, t0 + BLOCK)
        mu, w, c = sequence.params(t0, t1)
        for i in range(t1 - t0):
            out[t0 + i] = y
            y = omd_step(Y, R, y, mu[i] * (y - w[i]) + c[i], eta)
    return out


# --------------------------------------------------------------------------
# bandit

def _learner_rng(seed):
    return np.random.default_rng(np.random.SeedSequence((int(seed), 0xB0D)))


def run_bandit_batch(q, X, sequences, T, plan, x1=None, Y="auto", diagnostics=False, record=False):
    """One-point bandit OGD over several seeds.

    Regret is charged at the queries ``x̂_t``. With ``diagnostics`` the
    four terms of the expected-regret decomposition are accumulated per seed
    using white-box access to ``h_t`` (never available to the learner).
    """
    check_bandit_domain(X)
    seqs = list(sequences)
    S, d = len(seqs), q.d
    delta, eta = plan.delta, plan.eta
    if not delta > 0:
        raise ValidationError("bandit runs need delta > 0")
    Xd = shrunken(X, delta)
    Y = hidden_set(q, X) if isinstance(Y, str) else Y
    x = np.broadcast_to(default_start(Xd) if x1 is None else np.asarray(x1, float), (S, d)).copy()
    rngs = [_learner_rng(s.seed) for s in seqs]
    zstar, vstar = _comparators(seqs, T, Y, q, X)
    if diagnostics:
        Yd = hidden_set(q, Xd)
        zd, vd = _comparators(seqs, T, Yd, q, Xd)
        terms = {k: np.zeros(S) for k in ("R1", "R3", "R4")}
    total = np.zeros(S)
    gmax = np.zeros(S)
    vmax = np.zeros(S)
    losses = np.empty((T, S)) if record else None
    queries = np.empty((T, S, d)) if record else None
    scale = d / delta
    for t0 in range(0, T, BLOCK):
        t1 = min(T, t0 + BLOCK)
        mu, w, c = _stack_params(seqs, t0, t1)
        zeta = np.stack([r.standard_normal((BLOCK, d)) for r in rngs], axis=1)[: t1 - t0]
        zeta /= np.linalg.norm(zeta, axis=-1, keepdims=True)
        for i in range(t1 - t0):
            xh = x + delta * zeta[i]
            if not np.all(X.contains(xh)):
                raise FeasibilityError(f"query left X at round {t0 + i + 1}")
            zh = q(xh)
            val = 0.5 * mu[i] * np.sum((zh - w[i]) ** 2, -1) + np.sum(c[i] * zh, -1)
            g = (scale * val)[:, None] * zeta[i]
            total += val
            np.maximum(vmax, np.abs(val), out=vmax)
            np.maximum(gmax, np.linalg.norm(g, axis=-1), out=gmax)
            if record:
                losses[t0 + i] = val
                queries[t0 + i] = xh
            if diagnostics:
                z = q(x)
                gt = np.linalg.solve(np.swapaxes(q.jacobian(x), -1, -2), g[..., None])[..., 0]
                gh = mu[i, :, None] * (z - w[i]) + c[i]
                terms["R1"] += np.sum(gt * (z - zd), -1)
                terms["R3"] += np.sum((gt - gh) * (zd - z), -1)
                terms["R4"] += val - (0.5 * mu[i] * np.sum((z - w[i]) ** 2, -1) + np.sum(c[i] * z, -1))
            x = Xd.project(x - eta * g)
        _health(x, t1)
    regrets = total - vstar
    extra = {"max_grad": gmax, "max_abs_value": vmax, "delta": delta, "final": x}
    if diagnostics:
        R2 = np.array([s.totals(T).value(zd[k]) for k, s in enumerate(seqs)]) - vstar
        extra["terms"] = {"R1": terms["R1"], "R2": R2, "R3": terms["R3"], "R4": terms["R4"]}
        extra["comparator_delta"] = zd
    traces = None
    if record:
        comp = _comparator_losses(seqs, T, zstar)
        traces = [RegretTrace(queries[:, k], losses[:, k], comp[:, k], zstar[k], float(vstar[k]),
                              {"seed": seqs[k].seed, "T": T, **{f"plan.{a}": b for a, b in plan.header().items()}})
                  for k in range(S)]
    return BatchRun([s.seed for s in seqs], T, plan, regrets, zstar, vstar, traces, extra)


def run_bandit(q, X, sequence, T, plan, x1=None, Y="auto"):
    """Single-seed bandit run returning its :class:`RegretTrace`."""
    return run_bandit_batch(q, X, [sequence], T, plan, x1, Y, record=True).traces[0]


@dataclass
class DecompositionReport:
    delta: float
    T: int
    means: dict
    ses: dict
    regret_mean: float
    regret_se: float
    bound_R2: float
    bound_R4: float

    @property
    def R2_ok(self):
        return self.means["R2"] <= self.bound_R2

    @property
    def R4_ok(self):
        return abs(self.means["R4"]) <= self.bound_R4

    @property
    def sum_terms(self):
        return sum(self.means.values())

    @property
    def sum_ok(self):
        return self.sum_terms >= self.regret_mean - 3 * self.regret_se


def bandit_decomposition(run, constants):
    """Seed averages of the four regret terms and the audits
    ``R2 ≤ δ·G_F·D·T`` and ``|R4| ≤ δ·G_F·T``."""
    terms = run.extra.get("terms")
    if terms is None:
        raise DiagnosticsUnavailable("run was made without white-box diagnostics")
    n = run.regrets.size
    se = lambda a: float(a.std(ddof=1) / np.sqrt(n)) if n > 1 else 0.0
    delta, T = run.plan.delta, run.T
    return DecompositionReport(
        delta, T, {k: float(v.mean()) for k, v in terms.items()},
        {k: se(v) for k, v in terms.items()}, run.mean, run.se,
        delta * constants.G_F * constants.D * T, delta * constants.G_F * T)


# --------------------------------------------------------------------------
# coupling

@dataclass
class CouplingResult:
    etas: np.ndarray
    max_errors: np.ndarray
    bounds: np.ndarray
    slope: float
    G: float
    G_F: float
    mode: str

    @property
    def within_bound(self):
        return bool(np.all(self.max_errors <= self.bounds))

    def rows(self):
        return [(float(e), float(m), float(b)) for e, m, b in zip(self.etas, self.max_errors, self.bounds)]


def coupling_experiment(q, R, X, Y, eta_list, n_states=100, seed=0, grad_mode="exact",
                        grad_scale=1.0, shrink=0.5, compat_tol=1e-5):
    """One OGD step versus one OMD step from coupled states ``y = q(x)``.

    ``exact``: both see the same linear hidden loss (``∇ℓ = J_qᵀc``).
    ``surrogate``: OGD uses a bounded vector ``g`` and OMD its hidden image
    ``J_q^{-T}g``. States are sampled from ``X`` shrunk by ``shrink`` about
    its centre so that steps stay interior.
    """
    if grad_mode not in ("exact", "surrogate"):
        raise ValidationError("grad_mode must be 'exact' or 'surrogate'")
    base = X.resolve()
    lo, hi = Y.bounds()
    pad = 0.02 * (hi - lo)
    report = compatibility_check(MetricField.from_reparameterization(q), box_grid(lo + pad, hi - pad, 5),
                                 tol=compat_tol)
    if not report.compatible:
        raise CompatibilityError("pair fails the compatibility check; coupling is not defined", report)
    rng = np.random.default_rng(seed)
    ctr = default_start(base)
    xs = ctr + shrink * (base.sample(rng, n_states) - ctr)
    dirs = sphere(rng, n_states, q.d, grad_scale)
    J = q.jacobian(xs)
    if grad_mode == "exact":
        g_x = np.einsum("nij,ni->nj", J, dirs)
        g_z = dirs
    else:
        g_x = dirs
        g_z = np.linalg.solve(np.swapaxes(J, -1, -2), dirs[..., None])[..., 0]
    GF = float(np.linalg.norm(g_x, axis=-1).max())
    G = audit_geometry(q, R, X).G
    etas = np.asarray(eta_list, dtype=float)
    errs = np.empty(etas.size)
    for a, eta in enumerate(etas):
        xn = base.project(xs - eta * g_x)
        worst = 0.0
        for k in range(n_states):
            y = omd_step(Y, R, q(xs[k]), g_z[k], eta)
            worst = max(worst, float(np.linalg.norm(q(xn[k]) - y)))
        errs[a] = worst
    if grad_mode == "exact":
        bounds = 6 * G ** 5 * GF ** 3 * etas ** 2
    else:
        bounds = G ** 5 * (5 * GF ** 2 + GF ** 3 * etas) * etas ** 2
    good = errs > 0
    slope = float(np.polyfit(np.log(etas[good]), np.log(errs[good]), 1)[0]) if good.sum() >= 2 else float("nan")
    return CouplingResult(etas, errs, bounds, slope, G, GF, grad_mode)


# --------------------------------------------------------------------------
# lower bound

@dataclass
class LowerBoundResult:
    trace: RegretTrace
    cycle_sums: np.ndarray
    eta: float
    N: int
    I_R: float

    def regret_at(self, t):
        return self.trace.regret_at(t)

    @property
    def predicted_cycle(self):
        return -self.I_R / self.eta


def lower_bound_experiment(adv, T, x1=None):
    """OGD against the curl-cycle adversary, regret measured against the
    construction's fixed comparator ``u``."""
    if T < adv.N:
        raise ValidationError(f"horizon {T} is shorter than one cycle ({adv.N} rounds)")
    q, X = adv.q, adv.X
    x = q.inverse(adv.corners[0]) if x1 is None else np.asarray(x1, dtype=float)
    zu = adv.z_u
    eta = adv.eta
    losses = np.empty(T)
    comp = np.empty(T)
    iters = np.empty((T, 2))
    for t in range(1, T + 1):
        z = q(x)
        r2 = float(z @ z)
        if not adv.in_buffer(z):
            adv.round(t, z)  # raises the escape error
        v = adv.direction(t)
        s = -v / r2
        losses[t - 1] = s @ z
        comp[t - 1] = s @ zu
        iters[t - 1] = x
        x = X.project(x - eta * (q.jacobian(x).T @ s))
    _health(x, T)
    per = losses - comp
    k = T // adv.N
    cycles = per[: k * adv.N].reshape(k, adv.N).sum(axis=1)
    header = {"eta": eta, "T": T, **{f"adversary.{a}": b for a, b in adv.certificate().items()}}
    trace = RegretTrace(iters, losses, comp, adv.u.copy(), float(comp.sum()), header)
    return LowerBoundResult(trace, cycles, eta, adv.N, header["adversary.I_R"])


# --------------------------------------------------------------------------
# rate fits

class FitError(OhcoError):
    exit_code = 3


@dataclass
class RateFit:
    horizons: np.ndarray
    regrets: np.ndarray
    slope: float
    intercept: float
    r_squared: float
    slope_stderr: float
    excluded: list

    def slope_ci(self, level=0.95):
        n = self.horizons.size
        if n <= 2:
            return (float("nan"), float("nan"))
        t = stats.t.ppf(0.5 + level / 2, n - 2)
        return (self.slope - t * self.slope_stderr, self.slope + t * self.slope_stderr)


def fit_rate(horizons, regrets, min_points=4):
    """Least-squares slope of ``log regret`` against ``log T``; nonpositive regrets are excluded."""
    h = np.asarray(horizons, dtype=float)
    r = np.asarray(regrets, dtype=float)
    keep = r > 0
    excluded = [float(v) for v in h[~keep]]
    if keep.sum() < min_points:
        raise FitError(f"need at least {min_points} positive regrets, got {int(keep.sum())}")
    res = stats.linregress(np.log(h[keep]), np.log(r[keep]))
    return RateFit(h[keep], r[keep], float(res.slope), float(res.intercept),
                   float(res.rvalue ** 2), float(res.stderr), excluded)


# --------------------------------------------------------------------------
# sweeps

def threads_from_env(default=1):
    try:
        return max(1, int(os.environ.get("OHCO_THREADS", default)))
    except ValueError:
        return default


def run_cells(fn, cells, threads=None):
    """Apply ``fn`` to every cell; results come back in cell order regardless of scheduling."""
    threads = threads_from_env() if threads is None else threads
    cells = list(cells)
    if threads <= 1 or len(cells) <= 1:
        return [fn(c) for c in cells]
    with ThreadPoolExecutor(max_workers=threads) as ex:
        return list(ex.map(fn, cells))
