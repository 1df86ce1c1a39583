"""Deterministic two-level curvature recursion and closed-form contrast quantities."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ._io import fmt, write_csv

__all__ = [
    "ContrastSummary",
    "MeanFieldTrajectory",
    "benchmark_trajectory",
    "contrast_summary",
    "f_n",
    "mean_field_map",
    "population_levels",
    "s_star",
]


def _check(n, p0, p1):
    if n < 2:
        raise ValueError(f"n must be >= 2, got {n}")
    if not (0 < p1 <= p0 < 1):
        raise ValueError(f"need 0 < p1 <= p0 < 1, got p0={p0}, p1={p1}")


def mean_field_map(n: int, p0: float, p1: float, a: float, b: float) -> tuple[float, float]:
    """One step of the two-weight map ``(w_in, w_out) -> (phi_in, phi_out)``."""
    _check(n, p0, p1)
    if not (a > 0 and b > 0):
        raise ValueError(f"mean-field inputs must be positive, got a={a}, b={b}")
    den = (n - 1) * p0 * a + n * p1 * b
    phi_in = ((n - 2) * p0 ** 2 * a + n * p1 ** 2 * b) / den
    phi_out = (2 * n - 2) * p0 * p1 * b / den
    return phi_in, phi_out


def population_levels(n: int, p0: float, p1: float) -> tuple[float, float]:
    """Curvature levels ``(w_in, w_out)`` of within and cross edges."""
    return mean_field_map(n, p0, p1, 1.0, 1.0)


def f_n(n: int, p0: float, p1: float, s):
    """Contrast map ``s_t -> s_{t+1}``."""
    return 2 * (n - 1) * p0 * p1 * s / ((n - 2) * p0 ** 2 + n * p1 ** 2 * s)


def s_star(n: int, p0: float, p1: float) -> float:
    return max(0.0, (2 * (n - 1) * p0 * p1 - (n - 2) * p0 ** 2) / (n * p1 ** 2))


def delta_n(n: int, p0: float, p1: float, s: float) -> float:
    """Population gap ``((n-1)p0 - n p1 s) / ((n-1)p0 + n p1 s)`` at contrast ``s``."""
    return ((n - 1) * p0 - n * p1 * s) / ((n - 1) * p0 + n * p1 * s)


@dataclass(frozen=True)
class MeanFieldTrajectory:
    n: int
    p0: float
    p1: float
    w_in: np.ndarray
    w_out: np.ndarray
    s: np.ndarray
    delta: np.ndarray
    s_star: float

    @property
    def T(self) -> int:
        return len(self.s) - 1

    @property
    def s_nonincreasing(self) -> bool:
        return bool(np.all(np.diff(self.s) <= 1e-15))

    @property
    def delta_nondecreasing(self) -> bool:
        return bool(np.all(np.diff(self.delta) >= -1e-15))

    def levels(self, t: int) -> tuple[float, float]:
        return float(self.w_in[t]), float(self.w_out[t])

    def to_csv(self, path) -> None:
        rows = [(t, fmt(a), fmt(b), fmt(s), fmt(d))
                for t, (a, b, s, d) in enumerate(zip(self.w_in, self.w_out, self.s, self.delta))]
        write_csv(path, ("t", "w_in", "w_out", "s", "delta"), rows)


def benchmark_trajectory(n: int, p0: float, p1: float, T: int) -> MeanFieldTrajectory:
    """Iterate the mean-field map from ``(1, 1)`` for ``T`` steps."""
    _check(n, p0, p1)
    if T < 0:
        raise ValueError("T must be nonnegative")
    w_in, w_out = [1.0], [1.0]
    for _ in range(T):
        a, b = mean_field_map(n, p0, p1, w_in[-1], w_out[-1])
        w_in.append(a)
        w_out.append(b)
    w_in, w_out = np.array(w_in), np.array(w_out)
    s = w_out / w_in
    delta = np.array([delta_n(n, p0, p1, x) for x in s])
    return MeanFieldTrajectory(n, p0, p1, w_in, w_out, s, delta, s_star(n, p0, p1))


@dataclass(frozen=True)
class ContrastSummary:
    r: float
    r_n0: float
    r_curv: float
    mf_gain: float
    w_in_pop: float
    w_out_pop: float


def contrast_summary(n: int, p0: float, p1: float) -> ContrastSummary:
    _check(n, p0, p1)
    r = (p0 - p1) / (p0 + p1)
    pb = (p0 + p1) / 2
    q = 1 - r + r * r
    return ContrastSummary(
        r=r,
        r_n0=delta_n(n, p0, p1, 1.0),
        r_curv=r / q,
        mf_gain=r * r * (1 - r) / q,
        w_in_pop=pb * (1 + r * r),
        w_out_pop=pb * (1 - r * r),
    )

