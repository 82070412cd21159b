"""Heat kernel and the d-dimensional Green function of -(1/2)Laplacian."""

from __future__ import annotations

import math

import numpy as np


def heat_kernel(t: float, x, d: int = 3) -> np.ndarray:
    """Gaussian density (2 pi t)^(-d/2) exp(-|x|^2 / 2t) of variance t."""
    if t <= 0:
        raise ValueError(f"heat kernel needs t > 0, got {t}")
    x = np.asarray(x, dtype=np.float64)
    if x.ndim and x.shape[-1] == d:
        sq = np.sum(x * x, axis=-1)
    else:
        sq = x * x
    return (2.0 * math.pi * t) ** (-d / 2.0) * np.exp(-sq / (2.0 * t))


def green_function(x, d: int = 3) -> np.ndarray:
    """∫_0^∞ G_s(x) ds = Gamma(d/2-1) / (2 pi^(d/2)) |x|^(2-d), d >= 3."""
    if d < 3:
        raise ValueError("green_function requires d >= 3")
    x = np.asarray(x, dtype=np.float64)
    if x.ndim and x.shape[-1] == d:
        r = np.sqrt(np.sum(x * x, axis=-1))
    else:
        r = np.abs(x)
    if np.any(r == 0):
        raise ValueError("green_function is singular at x = 0")
    return math.gamma(d / 2.0 - 1.0) / (2.0 * math.pi ** (d / 2.0)) * r ** (2.0 - d)
