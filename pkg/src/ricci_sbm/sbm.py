"""Balanced two-block stochastic block model and its assumption window."""
from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass

import numpy as np

from .graph import Graph, Labels, build_graph

__all__ = ["SbmParams", "WindowReport", "check_window", "pair_uniforms", "sample_sbm"]

#: Finite-n stand-in for an asymptotic "much larger than".
WINDOW_RATIO = 2.0


@dataclass(frozen=True)
class SbmParams:
    """``n`` vertices per block, within/cross probabilities ``p0 > p1``."""

    n: int
    p0: float
    p1: float
    seed: int = 0

    def __post_init__(self):
        if int(self.n) != self.n or self.n < 2:
            raise ValueError(f"block size must be an integer >= 2, got {self.n}")
        if not 0 < self.p1 < self.p0 < 1:
            raise ValueError(f"need 0 < p1 < p0 < 1, got p0={self.p0}, p1={self.p1}")
        if int(self.seed) != self.seed or not 0 <= self.seed < 2 ** 64:
            raise ValueError(f"seed must be an unsigned 64-bit integer, got {self.seed}")

    @property
    def p_bar(self) -> float:
        return (self.p0 + self.p1) / 2


def pair_uniforms(seed: int, start: int, count: int) -> np.ndarray:
    """Uniforms for pairs ``start .. start+count-1`` of the counter-based stream.

    Pair ``k`` always receives element ``k`` of the Philox stream keyed by
    ``seed``, independent of how the pair range is chunked.
    """
    bg = np.random.Philox(key=seed)
    # one counter step yields four doubles
    bg.advance(start // 4)
    skip = start % 4
    return np.random.Generator(bg).random(count + skip)[skip:]


def _pair_index(n_vertices: int):
    iu, iv = np.triu_indices(n_vertices, k=1)
    return iu, iv


def sample_sbm(params: SbmParams, chunk: int = 1 << 20) -> tuple[Graph, Labels]:
    """Sample SBM(2n, p0, p1) with vertices ``0..n-1`` in block 1.

    Unordered pairs are enumerated lexicographically; pair ``k`` is an edge
    iff its uniform is below the block probability.
    """
    n = params.n
    nv = 2 * n
    iu, iv = _pair_index(nv)
    total = iu.size
    keep = np.zeros(total, dtype=bool)
    for lo in range(0, total, chunk):
        hi = min(total, lo + chunk)
        u = pair_uniforms(params.seed, lo, hi - lo)
        same = (iu[lo:hi] < n) == (iv[lo:hi] < n)
        keep[lo:hi] = u < np.where(same, params.p0, params.p1)
    edges = np.stack([iu[keep], iv[keep]], axis=1)
    return build_graph(nv, edges), Labels.balanced(n)


@dataclass(frozen=True)
class WindowReport:
    n: int
    p0: float
    p1: float
    rho: float
    T: int
    p_bar: float
    contrast_ratio: float
    rho_ok: bool
    p0_below: bool
    mdt_ratio: float
    mdt_ok: bool
    mdt_T_ratio: float
    mdt_T_ok: bool
    eps_n: float
    eta_n: float
    eta_nT: float
    d0: float
    d1: float

    @property
    def rho_check(self) -> bool:
        return self.rho_ok and self.p0_below

    @property
    def ok(self) -> bool:
        return self.rho_check and self.mdt_ok and self.mdt_T_ok

    def to_dict(self) -> dict:
        out = asdict(self)
        out["rho_check"] = self.rho_check
        out["threshold_ratio"] = WINDOW_RATIO
        return out

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)


def check_window(params: SbmParams, rho: float, T: int) -> WindowReport:
    """Evaluate the contrast window, density ratios and concentration rates."""
    from .meanfield import population_levels

    if not 0 < rho < 0.5:
        raise ValueError(f"rho must lie in (0, 1/2), got {rho}")
    if T < 1:
        raise ValueError(f"horizon T must be >= 1, got {T}")
    n, p0, p1 = params.n, params.p0, params.p1
    pb = params.p_bar
    ratio = p1 / p0
    logn = math.log(n)
    mdt = n * pb ** 3 / logn
    mdt_T = n * pb ** (2 * T + 1) / logn
    eps = math.sqrt(logn / (n * pb))
    w_in, w_out = population_levels(n, p0, p1)
    return WindowReport(
        n=n, p0=p0, p1=p1, rho=rho, T=T, p_bar=pb,
        contrast_ratio=ratio,
        rho_ok=rho <= ratio <= 1 - rho,
        p0_below=p0 <= 1 - rho,
        mdt_ratio=mdt, mdt_ok=mdt >= WINDOW_RATIO,
        mdt_T_ratio=mdt_T, mdt_T_ok=mdt_T >= WINDOW_RATIO,
        eps_n=eps, eta_n=eps / pb, eta_nT=eps / pb ** T,
        d0=(n - 1) * p0 + n * p1,
        d1=(n - 1) * p0 * w_in + n * p1 * w_out,
    )
