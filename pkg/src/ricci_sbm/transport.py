"""Exact 1-Wasserstein distance between finitely supported measures.

The ground metric is an integer-valued distance oracle (graph distances in
practice). The primal is solved as a min-cost transportation problem between
the atoms of the two measures; the returned node potentials are turned into a
Kantorovich-Rubinstein potential that certifies optimality.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Callable, Mapping

import numpy as np

from . import _backend

__all__ = [
    "SparseMeasure",
    "TransportError",
    "TransportResult",
    "as_distance",
    "kr_dual_check",
    "wasserstein1",
]

MASS_TOL = 1e-12


class TransportError(ValueError):
    """Raised for invalid measures, unreachable mass or missing certificates."""


@dataclass(frozen=True)
class SparseMeasure:
    """Probability measure with finite support.

    Zero-mass atoms are dropped. Masses may be floats, or all
    :class:`~fractions.Fraction` for exact arithmetic (``exact`` is then True).
    """

    atoms: Mapping[int, float]

    def __post_init__(self):
        atoms = {}
        for v, m in dict(self.atoms).items():
            if m < 0:
                raise TransportError(f"negative mass {m} at {v}")
            if m != 0:
                atoms[int(v)] = m
        exact = bool(atoms) and all(isinstance(m, (Fraction, int)) for m in atoms.values())
        total = sum(atoms.values())
        if exact and total != 1:
            raise TransportError(f"total mass is {total}, expected exactly 1")
        if not exact and abs(total - 1) > MASS_TOL:
            raise TransportError(f"total mass is {total!r}, expected 1 within {MASS_TOL}")
        object.__setattr__(self, "atoms", dict(sorted(atoms.items())))

    @property
    def exact(self) -> bool:
        return all(isinstance(m, (Fraction, int)) for m in self.atoms.values())

    @property
    def support(self) -> list[int]:
        return list(self.atoms)

    @classmethod
    def dirac(cls, v: int, exact: bool = False) -> "SparseMeasure":
        return cls({v: Fraction(1) if exact else 1.0})

    @classmethod
    def uniform(cls, vertices, exact: bool = False) -> "SparseMeasure":
        vertices = list(vertices)
        m = Fraction(1, len(vertices)) if exact else 1.0 / len(vertices)
        atoms: dict[int, float] = {}
        for v in vertices:
            atoms[v] = atoms.get(v, 0) + m
        return cls(atoms)

    def __getitem__(self, v):
        return self.atoms.get(v, 0)


@dataclass(frozen=True)
class TransportResult:
    cost: float
    plan: list[tuple[int, int, float]]
    dual_potentials: dict[int, float] | None = field(default=None)

    def to_json(self) -> str:
        def num(x):
            return str(x) if isinstance(x, Fraction) else float(x)

        doc = {
            "cost": num(self.cost),
            "plan": [[s, t, num(m)] for s, t, m in self.plan],
            "dual_potentials": None if self.dual_potentials is None
            else {str(k): num(v) for k, v in self.dual_potentials.items()},
        }
        return json.dumps(doc)


Distance = Callable[[int, int], float]


def as_distance(dist) -> Distance:
    """Normalize a distance oracle.

    Accepts a callable ``(u, v) -> distance`` or a square array indexed by
    vertex. Negative values (the graph module's beyond-cap sentinel) and
    ``None`` are read as infinite.
    """
    if callable(dist):
        base = dist
    else:
        arr = np.asarray(dist)

        def base(u, v):
            return arr[u, v]

    def d(u, v):
        val = base(u, v)
        if val is None or val < 0:
            return math.inf
        return val.item() if isinstance(val, np.generic) else val

    return d


def wasserstein1(mu: SparseMeasure, nu: SparseMeasure, dist, *, with_duals: bool = False,
                 exact: bool | None = None) -> TransportResult:
    """Exact W1 between ``mu`` and ``nu`` as a min-cost flow.

    Parameters
    ----------
    mu, nu : SparseMeasure
        Source and target measures.
    dist : callable or array
        Integer ground metric, see :func:`as_distance`.
    with_duals : bool
        Also return a 1-Lipschitz potential on the union of the supports.
    exact : bool, optional
        Use rational arithmetic (pure-Python kernel). Defaults to True when
        both measures carry Fraction masses.

    Raises
    ------
    TransportError
        If some source atom and target atom are at infinite distance
        ("unreachable mass"), or distances are not integers.
    """
    d = as_distance(dist)
    if exact is None:
        exact = mu.exact and nu.exact
    src, dst = mu.support, nu.support
    cost = np.empty((len(src), len(dst)), dtype=np.int64)
    for i, s in enumerate(src):
        for j, t in enumerate(dst):
            c = d(s, t)
            if not math.isfinite(c):
                raise TransportError(f"unreachable mass: d({s}, {t}) is infinite")
            if c != int(c):
                raise TransportError(f"non-integer distance d({s}, {t}) = {c}")
            cost[i, j] = int(c)

    if exact:
        supply = [Fraction(mu.atoms[s]) for s in src]
        demand = [Fraction(nu.atoms[t]) for t in dst]
        total, flow, ps, pd, _ = _backend.pure.transport(supply, demand, cost.tolist(), eps=0)
        flow_at = lambda i, j: flow[i][j]  # noqa: E731
    else:
        supply = np.array([float(mu.atoms[s]) for s in src])
        demand = np.array([float(nu.atoms[t]) for t in dst])
        total, flow, ps, pd, left = _backend.kernels.transport(supply, demand, cost)
        if left > 1e-10:
            raise TransportError(f"solver left {left} mass unshipped")
        total = float(total)
        flow_at = lambda i, j: float(flow[i][j])  # noqa: E731

    plan = [(s, t, flow_at(i, j)) for i, s in enumerate(src) for j, t in enumerate(dst)
            if flow_at(i, j) > 0]
    duals = None
    if with_duals:
        # f(z) = min_j d(z, t_j) - psi_j is 1-Lipschitz, >= phi on sources and
        # <= -psi on targets, so its KR objective is at least the primal cost.
        union = sorted(set(src) | set(dst))
        duals = {}
        for z in union:
            vals = [d(z, t) - pd[j] for j, t in enumerate(dst)]
            if any(not math.isfinite(v) for v in vals):
                raise TransportError(f"cannot certify: infinite distance from {z} to the target support")
            duals[z] = min(vals)
        if not exact:
            duals = {z: float(v) for z, v in duals.items()}
    return TransportResult(total, plan, duals)


def kr_dual_check(result: TransportResult, mu: SparseMeasure, nu: SparseMeasure, dist,
                  tol: float = 1e-9) -> bool:
    """Verify the Kantorovich-Rubinstein certificate carried by ``result``.

    True iff the potential is 1-Lipschitz on every pair of charged vertices and
    its dual objective matches the primal cost within ``tol``.
    """
    if result.dual_potentials is None:
        raise TransportError("no certificate: result carries no dual potentials")
    f = result.dual_potentials
    d = as_distance(dist)
    charged = sorted(set(mu.support) | set(nu.support))
    missing = [z for z in charged if z not in f]
    if missing:
        return False
    for a_idx, a in enumerate(charged):
        for b in charged[a_idx + 1:]:
            if abs(f[a] - f[b]) > d(a, b) + tol:
                return False
    objective = sum(f[z] * (mu[z] - nu[z]) for z in charged)
    return abs(objective - result.cost) <= tol
