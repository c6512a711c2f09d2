"""Conjugate gradients with nullspace deflation and smallest-eigenvalue
estimation for the assembled symmetric operators.

The solver stack is deliberately small: Jacobi-preconditioned CG (the
operators are symmetric positive semidefinite at desk scale), an optional
orthonormal deflation basis for singular problems, and block inverse
subspace iteration with a Rayleigh-Ritz projection per sweep that reuses the
CG solver for its inner solves.  Eigen-residuals are always reported, never
hidden; nullspace counting refuses to guess when no clear spectral gap is
found.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

SHIFT_GUARD = 1e-10  # PSD guard shift for inverse iteration solves
GAP_FACTOR = 100.0   # required eigenvalue ratio across the nullspace gap


class IncompatibleRhsError(ValueError):
    """The right-hand side had a deflated-subspace component larger than the
    caller's threshold."""


class GapNotFoundError(RuntimeError):
    """Nullspace counting could not certify a 100x spectral gap."""


@dataclass(frozen=True)
class SolveStats:
    iterations: int
    residual_norm: float
    converged: bool
    dropped_rhs_norm: float
    history: tuple[float, ...]


@dataclass(frozen=True)
class SpectrumReport:
    eigenvalues: np.ndarray   # ascending, k entries
    residuals: np.ndarray     # ||A v - theta v|| per reported pair
    lambda_null: float
    nullspace_dim: int        # eigenvalue estimates below lambda_null
    converged: np.ndarray     # per-pair residual test
    sweeps: int
    norm_scale: float         # inf-norm of the operator used for tolerances


def _as_matrix(operator) -> sp.csr_matrix:
    if isinstance(operator, sp.spmatrix):
        return operator.tocsr()
    matrix = getattr(operator, "matrix", None)
    if matrix is None:
        raise TypeError(f"cannot extract a sparse matrix from {type(operator)!r}")
    return matrix.tocsr()


def _project_out(basis: np.ndarray | None, v: np.ndarray) -> np.ndarray:
    if basis is None:
        return v
    return v - basis @ (basis.T @ v)


def cg_solve(
    operator,
    b: np.ndarray,
    tol: float = 1e-10,
    max_iter: int | None = None,
    deflation_basis: np.ndarray | None = None,
    rhs_drop_tol: float | None = None,
    x0: np.ndarray | None = None,
    callback=None,
) -> tuple[np.ndarray, SolveStats]:
    """Jacobi-preconditioned conjugate gradients on a symmetric PSD matrix.

    With a ``deflation_basis`` (orthonormal columns spanning the kernel, or
    any subspace to exclude) the right-hand side and all iterates are kept
    orthogonal to the basis; the dropped component of ``b`` is reported in
    the stats, and raises :class:`IncompatibleRhsError` if it exceeds
    ``rhs_drop_tol * ||b||`` (when a threshold is given).  On reaching
    ``max_iter`` the best iterate is returned with ``converged=False``.
    """
    a = _as_matrix(operator)
    n = a.shape[0]
    b = np.asarray(b, dtype=float).ravel()
    if b.shape != (n,):
        raise ValueError(f"rhs shape {b.shape} does not match operator size {n}")
    if max_iter is None:
        max_iter = max(1000, 2 * n)

    basis = None
    dropped = 0.0
    if deflation_basis is not None:
        basis = np.atleast_2d(np.asarray(deflation_basis, dtype=float))
        if basis.shape[0] != n:
            basis = basis.T
        dropped = float(np.linalg.norm(basis.T @ b))
        norm_b_in = float(np.linalg.norm(b))
        if rhs_drop_tol is not None and dropped > rhs_drop_tol * max(norm_b_in, 1e-300):
            raise IncompatibleRhsError(
                f"deflated component of rhs is {dropped:.3e} "
                f"({dropped / max(norm_b_in, 1e-300):.3e} of ||b||), "
                f"above threshold {rhs_drop_tol:g}"
            )
        b = _project_out(basis, b)

    diag = a.diagonal().copy()
    diag[diag <= 0.0] = 1.0
    minv = 1.0 / diag

    x = np.zeros(n) if x0 is None else _project_out(basis, np.asarray(x0, dtype=float).copy())
    norm_b = float(np.linalg.norm(b))
    target = tol * norm_b
    r = b - a @ x if x.any() else b.copy()
    r = _project_out(basis, r)
    res = float(np.linalg.norm(r))
    history = [res]
    if res <= target:
        return x, SolveStats(0, res, True, dropped, tuple(history))

    z = _project_out(basis, minv * r)
    p = z.copy()
    rz = float(r @ z)
    converged = False
    iterations = 0
    for iterations in range(1, max_iter + 1):
        ap = a @ p
        pap = float(p @ ap)
        if pap <= 0.0:
            # numerically null search direction: nothing further to extract
            break
        alpha = rz / pap
        x += alpha * p
        r -= alpha * ap
        if basis is not None:
            r = _project_out(basis, r)
            x = _project_out(basis, x)
        res = float(np.linalg.norm(r))
        history.append(res)
        if callback is not None:
            callback(iterations, x, r)
        if res <= target:
            converged = True
            break
        z = _project_out(basis, minv * r)
        rz_new = float(r @ z)
        p = z + (rz_new / rz) * p
        rz = rz_new

    if basis is not None:
        x = _project_out(basis, x)
    return x, SolveStats(iterations, res, converged, dropped, tuple(history))


def write_history_csv(stats: SolveStats, path) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["iteration", "residual"])
        for i, res in enumerate(stats.history):
            writer.writerow([i, repr(res)])


# ---------------------------------------------------------------------------
# smallest eigenvalues by block inverse subspace iteration
# ---------------------------------------------------------------------------


def smallest_eigs(
    operator,
    k: int,
    tol: float = 1e-8,
    max_sweeps: int = 60,
    seed: int = 0,
    lambda_null: float | None = None,
    deflation_basis: np.ndarray | None = None,
    inner_max_iter: int | None = None,
) -> SpectrumReport:
    """Estimate the ``k`` smallest eigenpairs of a symmetric PSD matrix.

    Block inverse subspace iteration with block size ``k + 2`` and a
    Rayleigh-Ritz projection per sweep; inner solves go through
    :func:`cg_solve` on the guard-shifted matrix ``A + 1e-10 I`` with a
    tolerance tied to the current eigen-residual, so early sweeps are cheap.
    Converged means the residual ``||A v - theta v||`` dropped below
    ``tol * ||A||_inf``; unconverged pairs are reported as such.
    """
    a = _as_matrix(operator)
    n = a.shape[0]
    if not 1 <= k <= n:
        raise ValueError(f"k must be in [1, {n}], got {k}")
    norm_scale = float(np.max(np.abs(a).sum(axis=1)))
    if lambda_null is None:
        lambda_null = 1e-9 * norm_scale
    m = min(n, k + 2)
    if inner_max_iter is None:
        inner_max_iter = max(200, int(4 * np.sqrt(n)))

    basis = None
    if deflation_basis is not None:
        basis = np.atleast_2d(np.asarray(deflation_basis, dtype=float))
        if basis.shape[0] != n:
            basis = basis.T

    shifted = (a + SHIFT_GUARD * sp.identity(n, format="csr")).tocsr()
    rng = np.random.default_rng(seed)
    block = _project_out(basis, rng.standard_normal((n, m)))
    block, _ = np.linalg.qr(block)

    theta = np.zeros(m)
    residuals = np.full(k, np.inf)
    sweeps = 0
    inner_tol = 1e-3
    for sweeps in range(1, max_sweeps + 1):
        new_block = np.empty_like(block)
        for j in range(m):
            y, _ = cg_solve(
                shifted,
                block[:, j],
                tol=inner_tol,
                max_iter=inner_max_iter,
                deflation_basis=basis,
            )
            new_block[:, j] = y if np.linalg.norm(y) > 0 else block[:, j]
        q, _ = np.linalg.qr(_project_out(basis, new_block))
        aq = a @ q
        h = q.T @ aq
        h = 0.5 * (h + h.T)
        theta, s = np.linalg.eigh(h)
        block = q @ s
        ax = aq @ s
        residuals = np.linalg.norm(ax[:, :k] - block[:, :k] * theta[:k], axis=0)
        worst = float(np.max(residuals))
        if worst <= tol * norm_scale:
            break
        inner_tol = float(np.clip(0.05 * worst / norm_scale, 1e-12, 1e-3))

    converged = residuals <= tol * norm_scale
    eigenvalues = theta[:k].copy()
    return SpectrumReport(
        eigenvalues=eigenvalues,
        residuals=residuals.copy(),
        lambda_null=float(lambda_null),
        nullspace_dim=int(np.sum(eigenvalues <= lambda_null)),
        converged=converged,
        sweeps=sweeps,
        norm_scale=norm_scale,
    )


def nullspace_dim(
    operator,
    lambda_null: float | None = None,
    k_start: int = 2,
    k_max: int = 64,
    seed: int = 0,
) -> int:
    """Count eigenvalues below ``lambda_null`` (default ``1e-9 ||A||_inf``),
    growing the window until a 100x gap certifies the count.

    Raises :class:`GapNotFoundError` instead of guessing when the window is
    exhausted or the spectrum near the threshold is ambiguous.
    """
    a = _as_matrix(operator)
    n = a.shape[0]
    norm_scale = float(np.max(np.abs(a).sum(axis=1)))
    lam_null = 1e-9 * norm_scale if lambda_null is None else lambda_null
    k = min(max(k_start, 2), n)
    while True:
        report = smallest_eigs(a, k, lambda_null=lam_null, seed=seed)
        vals = report.eigenvalues
        count = int(np.sum(vals <= lam_null))
        if count < k:
            nxt = vals[count]
            prev = vals[count - 1] if count > 0 else 0.0
            if nxt >= GAP_FACTOR * max(prev, lam_null / GAP_FACTOR):
                return count
            if k >= min(k_max, n):
                raise GapNotFoundError(
                    f"no {GAP_FACTOR:.0f}x gap near lambda_null={lam_null:.3e}: "
                    f"eigenvalues {vals[max(0, count - 1):count + 1]}"
                )
        if k >= min(k_max, n):
            raise GapNotFoundError(
                f"nullspace dimension at least {count}, window k={k} exhausted"
            )
        k = min(2 * k, min(k_max, n))
