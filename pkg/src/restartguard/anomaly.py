"""Multivariate anomaly detection with the T-squared distance.

A legitimate-behavior profile is the sample mean and covariance of K-signal
training vectors together with the distribution (mean, standard deviation)
of their squared Mahalanobis distances.  An observation is anomalous when
its own distance falls outside mean +/- lambda * std — the band is kept
two-sided on purpose, so extremely central observations are flagged too
whenever mu - lambda * sigma > 0.

Min-max scaling of raw signals to [0, 1] is an explicit preprocessing step
(`NormalizationBounds`), not something the profile math applies behind your
back; apply the same bounds to training data and observations.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, asdict
from typing import Literal, NamedTuple

import numpy as np

__all__ = [
    "NormalizationBounds",
    "SingularCovariance",
    "T2Profile",
    "Detection",
    "normalize",
    "build_profile",
    "detect",
]

_RCOND_LIMIT = 1e-12


class SingularCovariance(ValueError):
    pass


@dataclass(frozen=True)
class NormalizationBounds:
    """Per-signal [min, max] used for min-max scaling."""

    y_min: np.ndarray
    y_max: np.ndarray

    def __post_init__(self):
        lo = np.asarray(self.y_min, dtype=float).ravel()
        hi = np.asarray(self.y_max, dtype=float).ravel()
        if lo.shape != hi.shape:
            raise ValueError("bounds shape mismatch")
        if np.any(lo >= hi):
            raise ValueError("degenerate normalization bounds (min >= max)")
        lo.flags.writeable = False
        hi.flags.writeable = False
        object.__setattr__(self, "y_min", lo)
        object.__setattr__(self, "y_max", hi)

    @staticmethod
    def from_data(rows) -> "NormalizationBounds":
        rows = np.atleast_2d(np.asarray(rows, dtype=float))
        return NormalizationBounds(rows.min(axis=0), rows.max(axis=0))


def normalize(bounds: NormalizationBounds, y_raw) -> tuple[np.ndarray, bool]:
    """(y - min) / (max - min), clamped into [0, 1]; the flag reports
    whether any component fell outside the training range."""
    y = np.asarray(y_raw, dtype=float)
    scaled = (y - bounds.y_min) / (bounds.y_max - bounds.y_min)
    clipped = np.clip(scaled, 0.0, 1.0)
    return clipped, bool(np.any(clipped != scaled))


@dataclass(frozen=True)
class T2Profile:
    """Legitimate-behavior profile: signal range, mean, covariance (and its
    inverse), and the distance statistics with the confidence multiplier."""

    y_min: np.ndarray
    y_max: np.ndarray
    mean: np.ndarray
    covariance: np.ndarray
    covariance_inverse: np.ndarray
    mu_t: float
    sigma_t: float
    lambda_conf: float

    @property
    def dim(self) -> int:
        return self.mean.size

    @property
    def threshold(self) -> tuple[float, float]:
        half = self.lambda_conf * self.sigma_t
        return self.mu_t - half, self.mu_t + half

    def to_json(self, path) -> None:
        payload = {k: (v.tolist() if isinstance(v, np.ndarray) else v)
                   for k, v in asdict(self).items()}
        with open(path, "w") as fh:
            json.dump(payload, fh, indent=2)

    @staticmethod
    def from_json(path) -> "T2Profile":
        with open(path) as fh:
            d = json.load(fh)
        return T2Profile(**{k: (np.asarray(v) if isinstance(v, list) else v)
                            for k, v in d.items()})


def _t2(delta: np.ndarray, s_inv: np.ndarray) -> np.ndarray:
    return np.einsum("...i,ij,...j->...", delta, s_inv, delta)


def _name_dependent_signals(cov: np.ndarray) -> str:
    sd = np.sqrt(np.diag(cov))
    flat = np.nonzero(sd < 1e-15)[0]
    if flat.size:
        return f"constant signals {flat.tolist()}"
    corr = cov / np.outer(sd, sd)
    pairs = [(i, j) for i in range(cov.shape[0]) for j in range(i + 1, cov.shape[0])
             if abs(corr[i, j]) > 1.0 - 1e-9]
    if pairs:
        return f"linearly dependent signal pairs {pairs}"
    return "ill-conditioned covariance"


def build_profile(traces, lambda_conf: float,
                  bounds: NormalizationBounds | None = None) -> T2Profile:
    """Fit the profile to an (N, K) array of training signal vectors.

    Statistics are computed on the data exactly as given; pass data through
    `normalize` first if min-max scaling is wanted.  `bounds` seeds the
    stored signal range (defaults to the data's own min/max), which `detect`
    uses to clamp out-of-range observations.
    """
    data = np.atleast_2d(np.asarray(traces, dtype=float))
    n, k = data.shape
    if n <= k + 1:
        raise ValueError(f"need more than K+1 = {k + 1} training vectors, got {n}")
    mean = data.mean(axis=0)
    cov = np.cov(data, rowvar=False, ddof=1).reshape(k, k)
    # conditioning gate before inverting
    eigvals = np.linalg.eigvalsh(cov)
    if eigvals[0] <= 0 or eigvals[0] / eigvals[-1] < _RCOND_LIMIT:
        raise SingularCovariance(
            f"covariance not invertible: {_name_dependent_signals(cov)}")
    s_inv = np.linalg.inv(cov)
    t_vals = _t2(data - mean, s_inv)
    mu_t = float(t_vals.mean())
    sigma_t = float(t_vals.std(ddof=1))
    if bounds is None:
        # every column has positive variance here, so min < max holds
        bounds = NormalizationBounds(data.min(axis=0), data.max(axis=0))
    return T2Profile(bounds.y_min, bounds.y_max, mean, cov, s_inv,
                     mu_t, sigma_t, float(lambda_conf))


class Detection(NamedTuple):
    verdict: Literal["normal", "anomalous"]
    t2_value: float
    clamped: bool


def detect(profile: T2Profile, observation) -> Detection:
    """Score one observation against the profile.

    Out-of-range components are clamped to the training range first (the
    range is part of what training established).  The verdict is "normal"
    iff the distance lies inside [mu - lambda sigma, mu + lambda sigma].
    """
    y = np.asarray(observation, dtype=float).ravel()
    if y.size != profile.dim:
        raise ValueError(f"observation has {y.size} signals, profile {profile.dim}")
    yc = np.clip(y, profile.y_min, profile.y_max)
    clamped = bool(np.any(yc != y))
    t2 = float(_t2(yc - profile.mean, profile.covariance_inverse))
    lo, hi = profile.threshold
    verdict = "normal" if lo <= t2 <= hi else "anomalous"
    return Detection(verdict, t2, clamped)
