"""Attack-success probability under periodic restarts.

Given the probability density F(t) of a successful attack on the
never-restarted system, restarting every delta_r time units replays the
first delta_r seconds of F in every cycle, scaled by the probability that
no earlier cycle succeeded:

    F_hat(t) = (1 - P_hat(k delta_r)) F(t - k delta_r),   k = floor(t/delta_r)
    P_hat(t) = P_hat(k delta_r) + (1 - P_hat(k delta_r)) P(t - k delta_r)

so the protected system depends only on the head of F before the first
restart.  At cycle boundaries the recurrence collapses to the geometric law
P_hat(k delta_r) = 1 - (1 - P(delta_r))^k.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Literal

import numpy as np
from scipy.special import ndtr

__all__ = [
    "TabulatedPdf",
    "cdf_of",
    "restarted_density",
    "restarted_cdf",
    "expected_damage_time",
    "normal_pdf",
    "mixture_pdf",
    "uniform_pdf",
]


@dataclass(frozen=True)
class TabulatedPdf:
    """Density sampled on the uniform grid t = 0, step, 2 step, ...

    Truncation below t=0 is allowed, so the total mass may be below one
    (the missing mass is "the attack never lands").
    """

    grid_step: float
    values: np.ndarray

    def __post_init__(self):
        if self.grid_step <= 0:
            raise ValueError("grid_step must be > 0")
        v = np.asarray(self.values, dtype=float).ravel()
        if v.size < 2:
            raise ValueError("need at least two grid points")
        if not np.all(np.isfinite(v)) or np.any(v < 0):
            raise ValueError("density must be finite and nonnegative")
        if np.trapezoid(v, dx=self.grid_step) > 1.0 + 1e-6:
            raise ValueError("density mass exceeds 1")
        v.flags.writeable = False
        object.__setattr__(self, "values", v)

    @property
    def times(self) -> np.ndarray:
        return np.arange(self.values.size) * self.grid_step

    @property
    def mass(self) -> float:
        return float(np.trapezoid(self.values, dx=self.grid_step))


def cdf_of(pdf: TabulatedPdf) -> np.ndarray:
    """Cumulative trapezoidal integral on the same grid, clipped to [0, 1]."""
    v = pdf.values
    seg = 0.5 * (v[:-1] + v[1:]) * pdf.grid_step
    out = np.concatenate([[0.0], np.cumsum(seg)])
    return np.minimum(out, 1.0)


def _snap_cycle(pdf: TabulatedPdf, delta_r: float) -> int:
    n = int(round(delta_r / pdf.grid_step))
    if n < 1:
        raise ValueError("delta_r below the grid step")
    return n


def _restarted_tables(pdf: TabulatedPdf, delta_r: float):
    """(F_hat values, P_hat values) built cycle by cycle; delta_r is snapped
    to the grid so the recurrence never interpolates."""
    if delta_r <= 0:
        raise ValueError("delta_r must be > 0")
    n = _snap_cycle(pdf, delta_r)
    F = pdf.values
    P = cdf_of(pdf)
    size = F.size
    f_hat = np.empty(size)
    p_hat = np.empty(size)
    survive = 1.0  # probability no attack landed in completed cycles
    for start in range(0, size, n):
        stop = min(start + n, size)
        m = stop - start
        f_hat[start:stop] = survive * F[:m]
        p_hat[start:stop] = (1.0 - survive) + survive * P[:m]
        if n < size:  # close the cycle at its boundary
            survive = survive * (1.0 - P[n])
    return f_hat, np.minimum(p_hat, 1.0)


def restarted_density(pdf: TabulatedPdf, delta_r: float) -> TabulatedPdf:
    """Density of a successful attack when the system restarts every
    delta_r."""
    f_hat, _ = _restarted_tables(pdf, delta_r)
    return TabulatedPdf(pdf.grid_step, f_hat)


def restarted_cdf(pdf: TabulatedPdf, delta_r: float) -> np.ndarray:
    """Cumulative attack-success probability with periodic restarts."""
    _, p_hat = _restarted_tables(pdf, delta_r)
    return p_hat


def expected_damage_time(pdf: TabulatedPdf,
                         mode: Literal["density", "cdf_literal"] = "density") -> float:
    """Expected time until successful damage.

    "density" is the standard expectation of the tabulated density,
    normalized by its mass.  "cdf_literal" evaluates the integral of
    t * P(t) dt instead — the CDF-weighted form some analyses print — and is
    kept selectable for comparison rather than silently corrected; it is not
    a mean and grows with the horizon.
    """
    t = pdf.times
    if mode == "density":
        mass = pdf.mass
        if mass <= 0.0:
            raise ValueError("zero-mass density has no expected time")
        return float(np.trapezoid(t * pdf.values, dx=pdf.grid_step) / mass)
    if mode == "cdf_literal":
        P = cdf_of(pdf)
        return float(np.trapezoid(t * P, dx=pdf.grid_step))
    raise ValueError(f"unknown mode {mode!r}")


# ---------------------------------------------------------------------------
# Density constructors (truncated at t = 0, not renormalized)
# ---------------------------------------------------------------------------

def normal_pdf(mu: float, sigma: float, horizon: float,
               step: float = 0.1) -> TabulatedPdf:
    """Normal density truncated at zero; mass below zero is dropped, so the
    total mass is 1 - Phi(-mu/sigma)."""
    if sigma <= 0:
        raise ValueError("sigma must be > 0")
    t = np.arange(0.0, horizon + 0.5 * step, step)
    v = np.exp(-0.5 * ((t - mu) / sigma) ** 2) / (sigma * math.sqrt(2 * math.pi))
    return TabulatedPdf(step, v)


def mixture_pdf(components, horizon: float, step: float = 0.1) -> TabulatedPdf:
    """Weighted mixture of normal components [(weight, mu, sigma), ...]."""
    t = np.arange(0.0, horizon + 0.5 * step, step)
    v = np.zeros_like(t)
    for weight, mu, sigma in components:
        if weight < 0 or sigma <= 0:
            raise ValueError("mixture needs weight >= 0 and sigma > 0")
        v += weight * np.exp(-0.5 * ((t - mu) / sigma) ** 2) / (sigma * math.sqrt(2 * math.pi))
    return TabulatedPdf(step, v)


def uniform_pdf(lo: float, hi: float, horizon: float,
                step: float = 0.1) -> TabulatedPdf:
    if not 0 <= lo < hi:
        raise ValueError("need 0 <= lo < hi")
    t = np.arange(0.0, horizon + 0.5 * step, step)
    v = np.where((t >= lo) & (t <= hi), 1.0 / (hi - lo), 0.0)
    return TabulatedPdf(step, v)


def normal_cdf_exact(mu: float, sigma: float, t) -> np.ndarray:
    """Closed-form CDF of the zero-truncated (unnormalized) normal: the
    independent oracle for the tabulated integration."""
    t = np.asarray(t, dtype=float)
    return ndtr((t - mu) / sigma) - ndtr((0.0 - mu) / sigma)
