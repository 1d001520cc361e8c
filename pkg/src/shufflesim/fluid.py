"""Deterministic limit dynamics: quadratic ODE field and RK4 integrator.

The limiting fraction vector obeys dy_k/dt = d * y^T (gamma (.) C(k)) y,
a polynomial field on the unit hypercube, so a fixed-step classical
Runge-Kutta scheme is exact enough and, unlike adaptive steppers, gives
bit-reproducible output for a given (model, d, y0, T, step).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import IntegrationError
from .model import ModelSpec

SIMPLEX_TOL = 1e-9


@dataclass
class FluidPath:
    times: np.ndarray   # (n_steps + 1,) uniform grid from 0 to T
    states: np.ndarray  # (n_steps + 1, K)

    @property
    def horizon(self) -> float:
        return float(self.times[-1])

    def value_at(self, t) -> np.ndarray:
        """Linear interpolation between grid samples (vectorized in t)."""
        t = np.atleast_1d(np.asarray(t, dtype=np.float64))
        out = np.empty((len(t), self.states.shape[1]))
        for k in range(self.states.shape[1]):
            out[:, k] = np.interp(t, self.times, self.states[:, k])
        return out


def vector_field(spec: ModelSpec, d: float, y) -> np.ndarray:
    """Right-hand side f_k(y) = d * sum_{m,l} gamma[m,l] c[m,l,k] y_m y_l."""
    y = np.asarray(y, dtype=np.float64)
    weights = spec.gamma * np.outer(y, y)
    return d * np.tensordot(weights, spec.increments, axes=([0, 1], [0, 1]))


def integrate(spec: ModelSpec, d: float, y0, T: float, step: float) -> FluidPath:
    """Fixed-step RK4 from a simplex point; samples every `step` up to T.

    If `step` does not divide T exactly the actual step is shrunk to
    T/ceil(T/step) so the grid lands on T.  The path is verified to stay
    on the simplex to 1e-9 and inside the hypercube; tiny boundary
    excursions (<= 1e-9) are clamped, larger ones raise IntegrationError
    since they indicate an invalid increment tensor.
    """
    y = np.asarray(y0, dtype=np.float64).copy()
    if step <= 0:
        raise ValueError(f"step must be positive, got {step}")
    if T <= 0:
        raise ValueError(f"horizon must be positive, got {T}")
    if y.min() < -SIMPLEX_TOL or abs(y.sum() - 1.0) > 1e-6:
        raise ValueError(f"y0 must lie on the probability simplex, got {y0}")
    n = max(1, math.ceil(T / step - 1e-12))
    h = T / n
    times = np.linspace(0.0, T, n + 1)
    states = np.empty((n + 1, len(y)))
    states[0] = y
    for i in range(n):
        k1 = vector_field(spec, d, y)
        k2 = vector_field(spec, d, y + 0.5 * h * k1)
        k3 = vector_field(spec, d, y + 0.5 * h * k2)
        k4 = vector_field(spec, d, y + h * k3)
        y = y + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
        if abs(y.sum() - 1.0) > SIMPLEX_TOL:
            raise IntegrationError(
                f"simplex violated at t={times[i + 1]:g}: sum(y)-1 = {y.sum() - 1.0:g}")
        low, high = y.min(), y.max()
        if low < -SIMPLEX_TOL or high > 1.0 + SIMPLEX_TOL:
            raise IntegrationError(
                f"trajectory left [0,1]^K at t={times[i + 1]:g} "
                f"(min={low:g}, max={high:g}); check the increment tensor")
        np.clip(y, 0.0, 1.0, out=y)
        states[i + 1] = y
    return FluidPath(times=times, states=states)


def logistic_oracle(y0: float, d: float, gamma: float, t: float) -> float:
    """Closed-form infected fraction for the two-state contact rule.

    Solves dy/dt = d*gamma*y*(1-y):  y(t) = y0 / (y0 + (1-y0) e^{-d gamma t}).
    Serves as the independent oracle for the integrator tests.
    """
    if not 0.0 <= y0 <= 1.0:
        raise ValueError(f"y0 must be in [0, 1], got {y0}")
    return y0 / (y0 + (1.0 - y0) * math.exp(-d * gamma * t))
