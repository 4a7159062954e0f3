"""OGD, ghost OMD and one-point bandit OGD, plus the step-size calculators."""
from dataclasses import dataclass, field, replace

import numpy as np

from .domains import omd_step
from .errors import HorizonTooSmall, ValidationError

VARIANTS = ("OGD", "OMD", "BOGD")


@dataclass(frozen=True)
class LearnerState:
    """Iterate, step size and round counter of one learner.

    ``iterate`` lives in X (or ``X_δ``) for OGD/BOGD and in Y for OMD.
    Iterates may carry a leading batch axis.
    """

    variant: str
    iterate: np.ndarray
    eta: float
    delta: float = 0.0
    t: int = 0
    last_estimate: np.ndarray = field(default=None, repr=False)

    def __post_init__(self):
        if self.variant not in VARIANTS:
            raise ValidationError(f"unknown learner variant {self.variant!r}")
        if not self.eta > 0:
            raise ValidationError("eta must be positive")
        if self.variant == "BOGD" and not self.delta > 0:
            raise ValidationError("bandit learner needs delta > 0")
        object.__setattr__(self, "iterate", np.asarray(self.iterate, dtype=float))


@dataclass(frozen=True)
class StepSizePlan:
    eta: float
    delta: float = 0.0
    source: str = "manual"
    predicted_bound: float = float("nan")
    details: dict = field(default_factory=dict)

    def __post_init__(self):
        if not self.eta > 0:
            raise ValidationError("eta must be positive")
        if not 0 <= self.delta < 1:
            raise ValidationError("delta must lie in [0, 1)")
        if self.source not in ("theorem1", "theorem4", "manual"):
            raise ValidationError(f"unknown step-size source {self.source!r}")

    def header(self):
        out = {"eta": self.eta, "delta": self.delta, "source": self.source}
        if np.isfinite(self.predicted_bound):
            out["predicted_bound"] = self.predicted_bound
        out.update(self.details)
        return out


def _require(state, variant):
    if state.variant != variant:
        raise ValidationError(f"expected a {variant} learner, got {state.variant}")


def ogd_update(state, grad, X):
    """``x ← Π_X(x − η∇ℓ_t(x))``."""
    _require(state, "OGD")
    x = X.project(state.iterate - state.eta * np.asarray(grad, dtype=float))
    return replace(state, iterate=x, t=state.t + 1)


def omd_update(state, hidden_grad, Y, R):
    """Mirror step on the hidden loss: ``argmin ⟨∇h_t(y), ·⟩ + D_R(·‖y)/η``."""
    _require(state, "OMD")
    y = omd_step(Y, R, state.iterate, hidden_grad, state.eta)
    return replace(state, iterate=y, t=state.t + 1)


def bandit_estimate(obs, d=None):
    """One-point estimate ``g = (d/δ)·ℓ(x̂)·ζ``."""
    zeta = np.asarray(obs.direction, dtype=float)
    d = zeta.shape[-1] if d is None else d
    return (d / obs.delta) * np.asarray(obs.value, dtype=float)[..., None] * zeta


def bogd_update(state, obs, X_delta):
    """Gradient step with the one-point estimate, projected onto ``X_δ``."""
    _require(state, "BOGD")
    g = bandit_estimate(obs)
    x = X_delta.project(state.iterate - state.eta * g)
    return replace(state, iterate=x, t=state.t + 1, last_estimate=g)


def _positive(**kw):
    bad = [k for k, v in kw.items() if not (np.isfinite(v) and v > 0)]
    if bad:
        raise ValidationError(f"nonpositive constants: {', '.join(bad)}")


def theorem1_schedule(D1, G, G_F, T):
    """Full-information step ``√(D₁/(7G⁶G_F³T))`` and bound ``√(7D₁G⁶G_F³T)``."""
    _positive(D1=D1, G=G, G_F=G_F, T=T)
    eta = np.sqrt(D1 / (7 * G ** 6 * G_F ** 3 * T))
    return float(eta), float(np.sqrt(7 * D1 * G ** 6 * G_F ** 3 * T))


def plan_stepsize_theorem1(c, T):
    if T < 1:
        raise ValidationError("horizon must be at least 1")
    eta, bound = theorem1_schedule(c.D1, c.G, c.G_F, T)
    return StepSizePlan(eta, 0.0, "theorem1", bound)


def theorem4_constants(c):
    """``K₁ = G_F D + G²HD + G_F``, ``K₂ = 6d²G⁶M²``, ``K₃ = d³G⁶M³``."""
    K1 = c.G_F * c.D + c.G ** 2 * c.H * c.D + c.G_F
    K2 = 6 * c.d ** 2 * c.G ** 6 * c.M_bound ** 2
    K3 = c.d ** 3 * c.G ** 6 * c.M_bound ** 3
    return K1, K2, K3


def theorem4_schedule(K1, K2, D1, T):
    """``δ* = (4K₂D₁/(K₁²T))^{1/4}``, ``η* = (4D₁³/(K₁²K₂T³))^{1/4}``."""
    _positive(K1=K1, K2=K2, D1=D1, T=T)
    delta = (4 * K2 * D1 / (K1 ** 2 * T)) ** 0.25
    eta = (4 * D1 ** 3 / (K1 ** 2 * K2 * T ** 3)) ** 0.25
    return float(eta), float(delta)


def min_horizon_theorem4(K1, K2, D1):
    """Smallest integer horizon with ``δ* < 1``."""
    return int(np.floor(4 * K2 * D1 / K1 ** 2)) + 1


def plan_stepsize_theorem4(c, T):
    K1, K2, K3 = theorem4_constants(c)
    eta, delta = theorem4_schedule(K1, K2, c.D1, T)
    if delta >= 1:
        tmin = min_horizon_theorem4(K1, K2, c.D1)
        raise HorizonTooSmall(f"delta* = {delta:.4g} >= 1; need T >= {tmin}", tmin)
    coef = np.sqrt(c.d * c.M_bound * c.G ** 3 * K1 * (3 * np.sqrt(c.D1) + c.D1 ** 1.5))
    return StepSizePlan(eta, delta, "theorem4", float(coef * T ** 0.75),
                        {"K1": K1, "K2": K2, "K3": K3})
