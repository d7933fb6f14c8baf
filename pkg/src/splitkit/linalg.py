"""Small dense linear algebra in float64.

Matrices are plain numpy arrays. The factorization and eigenvalue loops run
in the kernel backend (compiled when available); the Lyapunov solve builds
the symmetric Kronecker system explicitly and hands it to LAPACK.
"""

from __future__ import annotations

import csv
import io
from pathlib import Path

import numpy as np

from . import kernels

__all__ = [
    "NotPositiveDefinite", "NoUniqueSolution", "cholesky_factor", "cholesky_solve",
    "sym_eig_extremes", "condition_number", "is_positive_definite",
    "gram_spectral_norm", "solve_lyapunov_like", "symmetric_kron_operator",
    "matrix_to_json", "matrix_from_json", "write_matrix_csv", "read_matrix_csv",
]


class NotPositiveDefinite(np.linalg.LinAlgError):
    """A matrix required to be symmetric positive definite is not."""


class NoUniqueSolution(np.linalg.LinAlgError):
    """The Lyapunov operator is singular (eigenvalue pair summing to zero)."""


def _as_square(S) -> np.ndarray:
    S = np.asarray(S, dtype=np.float64)
    if S.ndim != 2 or S.shape[0] != S.shape[1]:
        raise ValueError(f"expected a square matrix, got shape {S.shape}")
    return S


def cholesky_factor(S) -> np.ndarray:
    """Lower-triangular ``G`` with ``G @ G.T == S``.

    Raises :class:`NotPositiveDefinite` on a non-positive pivot.
    """
    S = _as_square(S)
    G, bad = kernels.cholesky(S)
    if bad >= 0:
        raise NotPositiveDefinite(f"non-positive pivot at index {bad}")
    return G


def cholesky_solve(G, rhs) -> np.ndarray:
    """Solve ``(G G^T) x = rhs`` by two triangular substitutions."""
    y = kernels.trisolve(G, np.asarray(rhs, dtype=np.float64), True)
    return kernels.trisolve(G, y, False)


def sym_eig_extremes(S) -> tuple[float, float]:
    """Smallest and largest eigenvalue of a symmetric matrix (cyclic Jacobi)."""
    S = _as_square(S)
    if S.shape[0] == 0:
        raise ValueError("empty matrix")
    eigs, _ = kernels.jacobi_eigvals(0.5 * (S + S.T))
    return float(eigs.min()), float(eigs.max())


def condition_number(S) -> float:
    lo, hi = sym_eig_extremes(S)
    if lo <= 0.0:
        raise NotPositiveDefinite(f"lambda_min = {lo:.3e} <= 0")
    return hi / lo


def is_positive_definite(S, rtol: float = 1e-12) -> bool:
    """``lambda_min > rtol * max(1, |lambda_max|)``; singular-to-rounding counts as not PD."""
    S = _as_square(S)
    d = np.diag(S)
    if np.count_nonzero(S - np.diag(d)) == 0:  # diagonal: no sweep needed
        lo, hi = float(d.min()), float(d.max())
    else:
        lo, hi = sym_eig_extremes(S)
    return lo > rtol * max(1.0, abs(hi))


def gram_spectral_norm(H) -> float:
    """``||H^T H||_2`` computed on the smaller of ``H^T H`` and ``H H^T``."""
    H = np.asarray(H, dtype=np.float64)
    gram = H @ H.T if H.shape[0] < H.shape[1] else H.T @ H
    return sym_eig_extremes(gram)[1]


def symmetric_kron_operator(M) -> np.ndarray:
    """Matrix of ``P -> P M + M^T P`` restricted to symmetric ``P``.

    Unknowns and equations are both indexed by the upper triangle
    ``(i, j), i <= j`` in row-major order.
    """
    M = _as_square(M)
    n = M.shape[0]
    iu, ju = np.triu_indices(n)
    K = np.empty((iu.size, iu.size))
    for col, (a, b) in enumerate(zip(iu, ju)):
        S = np.zeros((n, n))
        S[a, b] = 1.0
        S[b, a] = 1.0
        K[:, col] = (S @ M + M.T @ S)[iu, ju]
    return K


def solve_lyapunov_like(M, Q, eig_rtol: float = 1e-10) -> np.ndarray:
    """Symmetric ``P`` with ``P M + M^T P = -Q``.

    Raises :class:`NoUniqueSolution` when two eigenvalues of ``M`` sum to
    (numerically) zero, which makes the operator singular.
    """
    M = _as_square(M)
    Q = _as_square(Q)
    if Q.shape != M.shape:
        raise ValueError("M and Q must have the same shape")
    n = M.shape[0]
    lam = np.linalg.eigvals(M)
    pair_sums = np.abs(lam[:, None] + lam[None, :])
    scale = max(1.0, float(np.abs(lam).max()))
    if pair_sums.min() <= eig_rtol * scale:
        raise NoUniqueSolution(
            f"eigenvalues of M pair to {pair_sums.min():.2e} (need > {eig_rtol * scale:.1e})")
    iu, ju = np.triu_indices(n)
    K = symmetric_kron_operator(M)
    Qs = 0.5 * (Q + Q.T)
    try:
        p = np.linalg.solve(K, -Qs[iu, ju])
    except np.linalg.LinAlgError as exc:  # pragma: no cover - guarded above
        raise NoUniqueSolution(str(exc)) from exc
    P = np.zeros((n, n))
    P[iu, ju] = p
    P[ju, iu] = p
    return P


# -- matrix I/O -------------------------------------------------------------

def matrix_to_json(M) -> dict:
    M = np.atleast_2d(np.asarray(M, dtype=np.float64))
    return {"rows": int(M.shape[0]), "cols": int(M.shape[1]),
            "data": [float(x) for x in M.ravel()]}


def matrix_from_json(obj: dict) -> np.ndarray:
    rows, cols = int(obj["rows"]), int(obj["cols"])
    data = np.asarray(obj["data"], dtype=np.float64)
    if data.size != rows * cols:
        raise ValueError(f"data length {data.size} != {rows}x{cols}")
    return data.reshape(rows, cols)


def write_matrix_csv(M, path) -> None:
    M = np.atleast_2d(np.asarray(M, dtype=np.float64))
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    for row in M:
        w.writerow([repr(float(x)) for x in row])
    Path(path).write_text(buf.getvalue())


def read_matrix_csv(path) -> np.ndarray:
    with open(path, newline="") as fh:
        rows = [[float(x) for x in row] for row in csv.reader(fh) if row]
    if len({len(r) for r in rows}) > 1:
        raise ValueError("ragged CSV matrix")
    return np.array(rows, dtype=np.float64)
