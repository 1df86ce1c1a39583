"""Normalized Laplacians, bottom eigenpairs, sign rounding and perturbation checks."""
from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass

import numpy as np
import scipy.linalg

from .graph import Graph, Labels

__all__ = [
    "ClusteringResult",
    "NormalizedLaplacian",
    "PerturbationReport",
    "SpectralError",
    "SpectralSummary",
    "block_gap",
    "block_matrix",
    "block_spectrum",
    "block_vector",
    "eigs_bottom",
    "laplacian_from_matrix",
    "normalized_laplacian",
    "op_norm",
    "perturbation_diagnostics",
    "population_laplacian",
    "sign_cluster",
]

RESIDUAL_TOL = 1e-8


class SpectralError(ValueError):
    pass


@dataclass(frozen=True)
class NormalizedLaplacian:
    """``L = I - D^{-1/2} W D^{-1/2}`` with the weight matrix and degrees kept."""

    matrix: np.ndarray
    degrees: np.ndarray
    adjacency: np.ndarray

    @property
    def size(self) -> int:
        return self.matrix.shape[0]


def laplacian_from_matrix(W: np.ndarray) -> NormalizedLaplacian:
    W = np.asarray(W, dtype=np.float64)
    if W.ndim != 2 or W.shape[0] != W.shape[1]:
        raise SpectralError(f"weight matrix must be square, got shape {W.shape}")
    if not np.allclose(W, W.T, rtol=0, atol=1e-12):
        raise SpectralError("weight matrix is not symmetric")
    d = W.sum(axis=1)
    bad = np.flatnonzero(~(d > 0))
    if bad.size:
        raise SpectralError(f"vertex {int(bad[0])} has weighted degree {d[bad[0]]}; need > 0")
    s = 1.0 / np.sqrt(d)
    L = -(s[:, None] * W * s[None, :])
    L[np.diag_indices_from(L)] += 1.0
    L = (L + L.T) / 2
    return NormalizedLaplacian(L, d, W)


def normalized_laplacian(g: Graph, w=None) -> NormalizedLaplacian:
    return laplacian_from_matrix(g.adjacency_dense(w))


@dataclass(frozen=True)
class SpectralSummary:
    """Bottom ``k`` eigenvalues, the canonical ``v2`` and the gap ``lambda_3 - lambda_2``."""

    eigenvalues: np.ndarray
    v2: np.ndarray
    gap: float | None
    residual: float

    def to_dict(self) -> dict:
        return {
            "lambda": [float(f"{x:.12g}") for x in self.eigenvalues],
            "gap": None if self.gap is None else float(f"{self.gap:.12g}"),
            "residual": self.residual,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2)


def _canonical_sign(v: np.ndarray, reference: np.ndarray | None) -> np.ndarray:
    if reference is not None:
        return -v if float(v @ reference) < 0 else v
    nz = np.flatnonzero(np.abs(v) > 1e-12 * max(1.0, np.abs(v).max()))
    if nz.size and v[nz[0]] < 0:
        return -v
    return v


def eigs_bottom(L: NormalizedLaplacian, k: int = 3, reference: np.ndarray | None = None) -> SpectralSummary:
    """Bottom ``k`` eigenpairs from a dense symmetric solve.

    ``v2`` is signed to have nonnegative inner product with ``reference`` when
    given, otherwise so that its first nonzero coordinate is positive.
    """
    N = L.size
    if not 2 <= k <= N:
        raise SpectralError(f"need 2 <= k <= {N}, got {k}")
    if not np.isfinite(L.matrix).all():
        raise SpectralError("Laplacian has non-finite entries")
    vals, vecs = scipy.linalg.eigh(L.matrix, subset_by_index=[0, k - 1])
    if not (np.isfinite(vals).all() and np.isfinite(vecs).all()):
        raise SpectralError("eigensolver returned non-finite values")
    v2 = vecs[:, 1] / np.linalg.norm(vecs[:, 1])
    res = float(np.linalg.norm(L.matrix @ v2 - vals[1] * v2))
    if res > RESIDUAL_TOL:
        raise SpectralError(f"eigenvector residual {res:.3e} exceeds {RESIDUAL_TOL}")
    v2 = _canonical_sign(v2, reference)
    gap = float(vals[2] - vals[1]) if k >= 3 else None
    return SpectralSummary(vals, v2, gap, res)


def op_norm(M: np.ndarray) -> float:
    """Spectral norm of a symmetric matrix (largest absolute eigenvalue)."""
    M = np.asarray(M, dtype=np.float64)
    if M.size == 0:
        return 0.0
    ev = scipy.linalg.eigvalsh((M + M.T) / 2)
    return float(np.abs(ev).max())


def block_vector(labels: Labels) -> np.ndarray:
    """Unit block indicator ``f`` with ``+`` on block 1 and ``-`` on block 2."""
    a = np.asarray(labels.assignment)
    return np.where(a == 1, 1.0, -1.0) / math.sqrt(a.size)


def block_matrix(n: int, a: float, b: float) -> np.ndarray:
    """``a`` within blocks (zero diagonal), ``b`` across, blocks ``0..n-1`` and ``n..2n-1``."""
    W = np.full((2 * n, 2 * n), float(b))
    W[:n, :n] = a
    W[n:, n:] = a
    np.fill_diagonal(W, 0.0)
    return W


def block_spectrum(n: int, a: float, b: float) -> tuple[float, float, float]:
    """``(0, 1 - r_n, 1 + a/d)``: the distinct eigenvalues of the block Laplacian."""
    d = (n - 1) * a + n * b
    return 0.0, 1.0 - ((n - 1) * a - n * b) / d, 1.0 + a / d


def block_gap(n: int, a: float, b: float) -> float:
    """Exact ``lambda_3 - lambda_2`` of the block Laplacian when ``1 - r_n <= 1 + a/d``."""
    _, l2, l3 = block_spectrum(n, a, b)
    return l3 - l2


def population_laplacian(n: int, p0: float, p1: float, level="unweighted"):
    """Population Laplacian of the two-level block form and its spectrum.

    ``level`` is ``"unweighted"`` (weights 1) or a step ``t`` of the mean-field
    trajectory, in which case within/cross entries are ``p0 w_in^t`` and
    ``p1 w_out^t``.

    Returns
    -------
    (NormalizedLaplacian, SpectralSummary, dict)
        The dict holds the closed-form values ``lambda2``, ``lambda3``,
        ``gap_exact`` and ``gap_rn`` (the leading term ``r_n``).
    """
    from .meanfield import benchmark_trajectory

    if level == "unweighted":
        w_in = w_out = 1.0
    else:
        t = int(level)
        if t < 0:
            raise ValueError(f"trajectory step must be >= 0, got {level}")
        w_in, w_out = benchmark_trajectory(n, p0, p1, t).levels(t)
    a, b = p0 * w_in, p1 * w_out
    L = laplacian_from_matrix(block_matrix(n, a, b))
    labels = Labels.balanced(n)
    summary = eigs_bottom(L, 3, reference=block_vector(labels))
    _, l2, l3 = block_spectrum(n, a, b)
    closed = {"a": a, "b": b, "lambda2": l2, "lambda3": l3,
              "gap_exact": l3 - l2, "gap_rn": 1.0 - l2}
    return L, summary, closed


@dataclass(frozen=True)
class ClusteringResult:
    labels: np.ndarray
    err: float | None
    tan_angle_sq: float | None


def sign_cluster(v: np.ndarray, true_labels: Labels | None = None) -> ClusteringResult:
    """Round the centered vector ``Pi v`` by sign; zero entries go to block 1.

    With ``true_labels`` the labels are flipped globally to best agree with
    them, and ``err`` and ``tan^2`` of the angle to the block vector are set.
    """
    v = np.asarray(v, dtype=np.float64)
    c = v - v.mean()
    norm = np.linalg.norm(c)
    if not norm > 1e-12:
        raise SpectralError("degenerate eigenvector: parallel to the all-ones vector after centering")
    c /= norm
    pred = np.where(c >= 0, 1, 2)
    if true_labels is None:
        return ClusteringResult(pred, None, None)
    truth = np.asarray(true_labels.assignment)
    if truth.size != v.size:
        raise SpectralError(f"labels have length {truth.size}, vector has {v.size}")
    N = v.size
    mism = int(np.count_nonzero(pred != truth))
    if N - mism < mism:
        pred = 3 - pred
        mism = N - mism
    f = block_vector(true_labels)
    cos2 = float(c @ f) ** 2
    tan2 = math.inf if cos2 == 0 else max(0.0, 1.0 - cos2) / cos2
    return ClusteringResult(pred, mism / N, tan2)


@dataclass(frozen=True)
class PerturbationReport:
    """Weyl, Davis-Kahan and Laplacian-perturbation checks for one pair.

    ``dk_refgap_ok`` evaluates ``sin <= delta / gap_ref`` with the gap of the
    reference alone; that form can fail for large perturbations and is only
    reported. The asserted forms are ``dk_ok`` (separation from the perturbed
    spectrum) and ``dk_safe_ok`` (``2 delta / gap_ref``).
    """

    delta: float
    weyl_max_shift: float
    weyl_ok: bool
    sin_angle: float
    gap_ref: float
    dk_bound: float
    dk_refgap_ok: bool
    separation: float
    dk_sep_bound: float
    dk_ok: bool
    dk_safe_bound: float
    dk_safe_ok: bool
    lap_lhs: float
    lap_rhs: float
    lap_ok: bool

    @property
    def ok(self) -> bool:
        return self.weyl_ok and self.dk_ok and self.dk_safe_ok and self.lap_ok

    def to_dict(self) -> dict:
        return {k: (float(f"{v:.12g}") if isinstance(v, float) and math.isfinite(v) else v)
                for k, v in asdict(self).items()}

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, default=str)


def perturbation_diagnostics(L_emp: NormalizedLaplacian, L_ref: NormalizedLaplacian,
                             gap_ref: float | None = None, j: int = 1, tol: float = 1e-10
                             ) -> PerturbationReport:
    """Check the eigenvalue, eigenvector and Laplacian perturbation inequalities.

    ``j`` is the 0-based index of the tracked eigenpair (default: lambda_2).
    ``gap_ref`` defaults to the distance from ``lambda_j(L_ref)`` to the rest
    of its spectrum.
    """
    A, B = L_ref.matrix, L_emp.matrix
    if A.shape != B.shape:
        raise SpectralError(f"dimension mismatch {A.shape} vs {B.shape}")
    la, Ua = scipy.linalg.eigh(A)
    lb, Ub = scipy.linalg.eigh(B)
    delta = op_norm(B - A)
    shift = float(np.abs(la - lb).max())
    others = np.delete(la, j)
    if gap_ref is None:
        gap_ref = float(np.abs(others - la[j]).min())
    if not gap_ref > 0:
        raise SpectralError("reference gap must be positive")
    u, v = Ua[:, j], Ub[:, j]
    # residual norm keeps full precision for small angles
    sin = min(1.0, float(np.linalg.norm(u - (u @ v) * v)))
    sep = float(np.abs(np.delete(lb, j) - la[j]).min())
    sep_bound = math.inf if sep == 0 else delta / sep
    dk = delta / gap_ref
    m = float(min(L_emp.degrees.min(), L_ref.degrees.min()))
    Wd = op_norm(L_emp.adjacency - L_ref.adjacency)
    dd = float(np.abs(L_emp.degrees - L_ref.degrees).max())
    rhs = Wd / m + dd / m ** 2 * (op_norm(L_emp.adjacency) + op_norm(L_ref.adjacency))
    return PerturbationReport(
        delta=delta, weyl_max_shift=shift, weyl_ok=shift <= delta + tol,
        sin_angle=sin, gap_ref=gap_ref, dk_bound=dk, dk_refgap_ok=sin <= dk + tol,
        separation=sep, dk_sep_bound=sep_bound, dk_ok=sin <= sep_bound + tol,
        dk_safe_bound=2 * dk, dk_safe_ok=sin <= 2 * dk + tol,
        lap_lhs=delta, lap_rhs=rhs, lap_ok=delta <= rhs + tol,
    )
