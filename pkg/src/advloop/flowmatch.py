"""Flow-matching sampling kernel seeded from a variance-preserving schedule.

Implements the linear remap between a v-parameterized denoiser's coordinates
(discrete step t, state x_t, output v) and flow-matching coordinates
(continuous time in [0, 1), state, straight-line velocity), plus Euler
integration, classifier-free guidance mixing, and the interpolation MSE loss.

A closed-form Gaussian conditional-expectation field stands in for a trained
model so the conversion math and the sampler can be verified exactly.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Optional, Sequence

import numpy as np

T_F_MAX = 1.0 - 1e-6  # open-interval endpoint clamp for converted times

VelocityField = Callable[[np.ndarray, float], np.ndarray]


class Schedule:
    """Variance-preserving table of (alpha_t, sigma_t), t = 0 .. T-1.

    alpha decreases and sigma increases with t; alpha^2 + sigma^2 = 1 at
    every step. t = 0 is (nearly) clean data, t = T-1 (nearly) pure noise.
    """

    def __init__(self, alphas: Sequence[float], sigmas: Sequence[float]):
        alphas = np.asarray(alphas, dtype=float)
        sigmas = np.asarray(sigmas, dtype=float)
        if alphas.shape != sigmas.shape or alphas.ndim != 1 or len(alphas) < 2:
            raise ValueError("alphas and sigmas must be equal-length 1-D tables")
        residual = np.abs(alphas**2 + sigmas**2 - 1.0)
        if residual.max() > 1e-9:
            raise ValueError(f"alpha^2 + sigma^2 deviates from 1 by {residual.max():.3g}")
        if np.any(np.diff(alphas) > 0.0) or np.any(np.diff(sigmas) < 0.0):
            raise ValueError("alpha must be non-increasing and sigma non-decreasing")
        self.alphas = alphas
        self.sigmas = sigmas

    def __len__(self) -> int:
        return len(self.alphas)

    @classmethod
    def cosine(cls, T: int = 1000) -> "Schedule":
        t = np.arange(T)
        phase = 0.5 * math.pi * t / T
        return cls(np.cos(phase), np.sin(phase))

    def at(self, t: int):
        if not (0 <= t < len(self.alphas)):
            raise ValueError(f"step {t} outside [0, {len(self.alphas)})")
        return float(self.alphas[t]), float(self.sigmas[t])


@dataclass(frozen=True)
class FlowState:
    """Sample position on the flow-matching time axis."""

    t_f: float
    x: np.ndarray

    def __post_init__(self):
        if not (0.0 <= self.t_f <= 1.0):
            raise ValueError(f"t_f={self.t_f} outside [0, 1]")
        object.__setattr__(self, "x", np.asarray(self.x, dtype=float))


def dm_to_fm_time(sched: Schedule, t: int) -> float:
    """alpha / (alpha + sigma), clamped below 1 at the clean-data endpoint."""
    alpha, sigma = sched.at(t)
    return min(alpha / (alpha + sigma), T_F_MAX)


def dm_to_fm_state(sched: Schedule, t: int, x_t: np.ndarray) -> FlowState:
    alpha, sigma = sched.at(t)
    return FlowState(t_f=dm_to_fm_time(sched, t), x=np.asarray(x_t, dtype=float) / (alpha + sigma))


def v_dm_to_v_fm(sched: Schedule, t: int, x_t: np.ndarray, v_theta: np.ndarray) -> np.ndarray:
    """Straight-line velocity recovered from a v-parameterized denoiser output."""
    alpha, sigma = sched.at(t)
    x_t = np.asarray(x_t, dtype=float)
    v_theta = np.asarray(v_theta, dtype=float)
    return (alpha - sigma) * x_t - (alpha + sigma) * v_theta


def euler_step(state: FlowState, v: np.ndarray, dt_f: float) -> FlowState:
    if dt_f <= 0.0:
        raise ValueError("dt_f must be positive")
    if state.t_f + dt_f > 1.0 + 1e-9:
        raise ValueError(f"step to t_f={state.t_f + dt_f} exceeds 1")
    v = np.asarray(v, dtype=float)
    if v.shape != state.x.shape:
        raise ValueError("velocity shape mismatch")
    return FlowState(t_f=min(state.t_f + dt_f, 1.0), x=state.x + dt_f * v)


def cfg_combine(v_cond: np.ndarray, v_uncond: np.ndarray, scale: float) -> np.ndarray:
    v_cond = np.asarray(v_cond, dtype=float)
    v_uncond = np.asarray(v_uncond, dtype=float)
    if v_cond.shape != v_uncond.shape:
        raise ValueError("guidance inputs must share a shape")
    return v_uncond + scale * (v_cond - v_uncond)


def sample(
    field: VelocityField,
    n_steps: int,
    x0: np.ndarray,
    step_sizes: Optional[Sequence[float]] = None,
) -> np.ndarray:
    """Integrate the flow ODE from noise (t_f = 0) to data (t_f = 1).

    x0 may be a single vector or a (batch, dim) array; the field is evaluated
    at the shared scalar time. Deterministic given x0.
    """
    if n_steps < 1:
        raise ValueError("n_steps must be >= 1")
    if step_sizes is None:
        steps = np.full(n_steps, 1.0 / n_steps)
    else:
        steps = np.asarray(step_sizes, dtype=float)
        if len(steps) != n_steps:
            raise ValueError("step_sizes length must equal n_steps")
        if np.any(steps <= 0.0):
            raise ValueError("step sizes must be positive")
        if abs(steps.sum() - 1.0) > 1e-9:
            raise ValueError(f"step sizes sum to {steps.sum()}, expected 1")
    state = FlowState(t_f=0.0, x=np.array(x0, dtype=float, copy=True))
    for dt_f in steps:
        v = np.asarray(field(state.x, state.t_f), dtype=float)
        state = euler_step(state, v, float(dt_f))
    return state.x


def fm_loss(v_pred: np.ndarray, x1: np.ndarray, x0: np.ndarray) -> float:
    """Mean squared error against the straight-line interpolation target."""
    v_pred = np.asarray(v_pred, dtype=float)
    target = np.asarray(x1, dtype=float) - np.asarray(x0, dtype=float)
    if v_pred.shape != target.shape:
        raise ValueError("shape mismatch")
    return float(np.mean((v_pred - target) ** 2))


# ---------------------------------------------------------------------------
# analytic Gaussian stand-in for the learned model


def gaussian_oracle_velocity(mu: np.ndarray, s: float, x: np.ndarray, t_f: float) -> np.ndarray:
    """Exact conditional-expectation velocity for data ~ N(mu, s^2 I).

    With x_t = t x1 + (1 - t) x0, x0 ~ N(0, I) and x1 ~ N(mu, s^2 I), Gaussian
    conditioning gives

        E[x1 - x0 | x_t = x] = mu + (t s^2 - (1 - t)) / V(t) * (x - t mu),
        V(t) = t^2 s^2 + (1 - t)^2.
    """
    if s <= 0.0:
        raise ValueError("s must be positive")
    if not (0.0 <= t_f < 1.0):
        raise ValueError(f"t_f={t_f} outside [0, 1)")
    mu = np.asarray(mu, dtype=float)
    x = np.asarray(x, dtype=float)
    var = t_f**2 * s**2 + (1.0 - t_f) ** 2
    coeff = (t_f * s**2 - (1.0 - t_f)) / var
    return mu + coeff * (x - t_f * mu)


@dataclass(frozen=True)
class GaussianOracle:
    """Callable velocity field for a Gaussian target, with exact transport."""

    mu: np.ndarray
    s: float

    def __post_init__(self):
        object.__setattr__(self, "mu", np.asarray(self.mu, dtype=float))
        if self.s <= 0.0:
            raise ValueError("s must be positive")

    def __call__(self, x: np.ndarray, t_f: float) -> np.ndarray:
        return gaussian_oracle_velocity(self.mu, self.s, x, t_f)

    def endpoint(self, x0: np.ndarray) -> np.ndarray:
        """Exact ODE endpoint: the optimal-transport map mu + s * x0."""
        return self.mu + self.s * np.asarray(x0, dtype=float)


@dataclass(frozen=True)
class GaussianMixtureOracle:
    """Velocity field for an equal-spread Gaussian mixture target.

    Calling with condition=k gives the component-conditional field (what a
    conditioned model would output); condition=None marginalizes over
    components with posterior responsibilities, playing the unconditional
    role in classifier-free guidance.
    """

    mus: np.ndarray       # (K, d) component means
    s: float
    weights: Optional[np.ndarray] = None  # (K,), uniform when omitted

    def __post_init__(self):
        mus = np.atleast_2d(np.asarray(self.mus, dtype=float))
        object.__setattr__(self, "mus", mus)
        if self.s <= 0.0:
            raise ValueError("s must be positive")
        k = mus.shape[0]
        w = np.full(k, 1.0 / k) if self.weights is None else np.asarray(self.weights, dtype=float)
        if w.shape != (k,) or np.any(w <= 0.0):
            raise ValueError("weights must be positive, one per component")
        object.__setattr__(self, "weights", w / w.sum())

    def __call__(self, x: np.ndarray, t_f: float, condition: Optional[int] = None) -> np.ndarray:
        if condition is not None:
            return gaussian_oracle_velocity(self.mus[condition], self.s, x, t_f)
        x_arr = np.asarray(x, dtype=float)
        single = x_arr.ndim == 1
        x_arr = np.atleast_2d(x_arr)
        var = t_f**2 * self.s**2 + (1.0 - t_f) ** 2
        # responsibilities under each component's interpolation marginal
        d2 = ((x_arr[:, None, :] - t_f * self.mus[None, :, :]) ** 2).sum(axis=2)
        logits = np.log(self.weights)[None, :] - 0.5 * d2 / var
        logits -= logits.max(axis=1, keepdims=True)
        resp = np.exp(logits)
        resp /= resp.sum(axis=1, keepdims=True)
        fields = np.stack(
            [gaussian_oracle_velocity(mu, self.s, x_arr, t_f) for mu in self.mus], axis=1
        )
        out = (resp[:, :, None] * fields).sum(axis=1)
        return out[0] if single else out


def gaussian_dm_v_theta(sched: Schedule, mu: np.ndarray, s: float, x_t: np.ndarray, t: int) -> np.ndarray:
    """Exact v-parameterized denoiser output for the same Gaussian data.

    From x_t = alpha x0 + sigma xT (x0 the data, xT the noise),

        E[v | x_t] = -sigma mu + alpha sigma (1 - s^2) / V * (x_t - alpha mu),
        V = alpha^2 s^2 + sigma^2.
    """
    alpha, sigma = sched.at(t)
    mu = np.asarray(mu, dtype=float)
    x_t = np.asarray(x_t, dtype=float)
    var = alpha**2 * s**2 + sigma**2
    coeff = alpha * sigma * (1.0 - s**2) / var
    return -sigma * mu + coeff * (x_t - alpha * mu)


def endpoint_error_sweep(
    mu: np.ndarray,
    s: float,
    step_counts: Sequence[int],
    n_seeds: int = 10_000,
    seed: int = 0,
) -> list:
    """Euler endpoint error vs. the exact transport map, per step count.

    Uses one common batch of noise draws across step counts. Returns a list
    of (n_steps, mean_error, std_error) rows.
    """
    mu = np.asarray(mu, dtype=float)
    oracle = GaussianOracle(mu, s)
    rng = np.random.default_rng(seed)
    x0 = rng.standard_normal((n_seeds, mu.shape[0]))
    exact = oracle.endpoint(x0)
    rows = []
    for n in step_counts:
        out = sample(oracle, int(n), x0)
        err = np.hypot(*(out - exact).T) if mu.shape[0] == 2 else np.linalg.norm(out - exact, axis=1)
        rows.append((int(n), float(err.mean()), float(err.std())))
    return rows
