"""Sparse operator assembly for the constraint-degenerate diffusion problem.

Two operators are assembled over the cell lattice:

* the negative orthogonal Laplacian, a symmetric PSD matrix built from
  per-face energy contributions.  At an axis-``a`` face the normal
  derivative is the compact two-cell difference and the tangential
  derivatives are second-order averages of neighboring central differences;
  the face tensor is the arithmetic mean of the two adjacent cell projection
  tensors ``P = I - what whatT``.  Summing ``w_f * (D_a u) (P row_a . g(u))``
  over the three face families and symmetrizing each mixed term yields a
  <= 27-point stencil that is exactly symmetric, reduces to the classical
  compact stencil whenever ``P`` is axis-aligned, and whose quadratic form
  is a midpoint quadrature of the projected-gradient energy.  Homogeneous
  wall data on Dirichlet axes enters through odd-reflection ghosts and
  half-weight wall faces; all cells remain degrees of freedom.

* the flux-form generator of the constrained diffusion equation,
  ``L u = 1/2 div[ w^2 P grad(u) + u c ]`` with ``c = w x curl w`` sampled at
  face centers.  It is generally non-symmetric; fluxes telescope, so column
  sums vanish on conservative (periodic / zero-normal-flux) configurations.
  Dirichlet-capable axes are closed with zero normal flux: the evolution
  conserves particle number, unlike the stationary boundary-value problem.

The stationary-form residual evaluator expands the same generator into
coefficient form (field force, field charge, magnitude gradients) as an
independent O(h^2) cross-check of the flux discretization.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from .fields import curl_from_jacobian, projector
from .grid import Grid, GridScalar, GridSamples, GridVector, divergence, gradient


@dataclass(frozen=True)
class SymmetricSparseOperator:
    """Row-compressed symmetric matrix representing the negative orthogonal
    Laplacian.

    ``matrix`` is scaled as a collocation operator: ``(matrix @ u)[i]``
    approximates ``-(div P grad u)(x_i)`` and its eigenvalues approximate the
    continuum spectrum.  The discrete projected-gradient form carries the
    cell volume: ``energy(u, v) = cell_volume * v . (matrix @ u)``.
    """

    grid: Grid
    matrix: sp.csr_matrix

    @property
    def shape(self):
        return self.matrix.shape

    @property
    def cell_volume(self) -> float:
        return self.grid.cell_volume

    def matvec(self, u: np.ndarray) -> np.ndarray:
        return self.matrix @ u

    def energy(self, u: np.ndarray, v: np.ndarray) -> float:
        """Discrete projected-gradient bilinear form (volume-weighted)."""
        return float(self.cell_volume * np.dot(v, self.matrix @ u))

    def asymmetry(self) -> float:
        d = self.matrix - self.matrix.T
        return 0.0 if d.nnz == 0 else float(np.max(np.abs(d.data)))

    def norm_inf(self) -> float:
        return float(np.max(np.abs(self.matrix).sum(axis=1)))

    def dump_coo(self, path) -> None:
        _dump_coo(self.matrix, path)


@dataclass(frozen=True)
class GeneratorOperator:
    """Sparse (generally non-symmetric) diffusion generator in flux form."""

    grid: Grid
    matrix: sp.csr_matrix

    @property
    def shape(self):
        return self.matrix.shape

    def matvec(self, u: np.ndarray) -> np.ndarray:
        return self.matrix @ u

    def asymmetry(self) -> float:
        d = self.matrix - self.matrix.T
        return 0.0 if d.nnz == 0 else float(np.max(np.abs(d.data)))

    def max_column_sum(self) -> float:
        return float(np.max(np.abs(np.asarray(self.matrix.sum(axis=0)).ravel())))

    def dump_coo(self, path) -> None:
        _dump_coo(self.matrix, path)


def _dump_coo(matrix: sp.csr_matrix, path) -> None:
    """Coordinate text dump: 'row col value' per line, shortest float repr."""
    coo = matrix.tocoo()
    with open(path, "w") as fh:
        for r, c, v in zip(coo.row, coo.col, coo.data):
            fh.write(f"{r} {c} {float(v)!r}\n")


# ---------------------------------------------------------------------------
# index plumbing
# ---------------------------------------------------------------------------


def _interior_face_cells(grid: Grid, axis: int):
    """Index triples (lists of 3 int arrays) of the lower/upper cells of
    every interior face of one family."""
    shape = list(grid.cells)
    n = grid.cells[axis]
    shape[axis] = n if grid.is_periodic(axis) else n - 1
    base = np.indices(shape)
    left = [base[0], base[1], base[2]]
    right = [c.copy() for c in left]
    right[axis] = right[axis] + 1
    if grid.is_periodic(axis):
        right[axis] = right[axis] % n
    return left, right


def _shifted(cells, axis: int, delta: int, grid: Grid, reflection: str):
    """Shift a cell-index triple along ``axis`` by ``delta`` (0 or +-1),
    mapping ghosts back onto cells.  Odd reflection flips the coefficient
    sign (zero wall data); even reflection keeps it (zero-flux wall)."""
    out = [c.copy() for c in cells]
    shifted = out[axis] + delta
    n = grid.cells[axis]
    sign = np.ones(shifted.shape)
    if grid.is_periodic(axis):
        out[axis] = shifted % n
    else:
        low = shifted < 0
        high = shifted > n - 1
        out[axis] = np.where(low, 0, np.where(high, n - 1, shifted))
        if reflection == "odd":
            sign = np.where(low | high, -1.0, 1.0)
    return out, sign


def _tangential_stamp(left, right, b_axis: int, grid: Grid, reflection: str):
    """Averaged central-difference stamp for the derivative along ``b_axis``
    at a face given by (left, right): four (cells, coeff) entries."""
    h = grid.spacing[b_axis]
    entries = []
    for cells in (left, right):
        for delta, base_coeff in ((+1, 1.0 / (4 * h)), (-1, -1.0 / (4 * h))):
            mapped, sign = _shifted(cells, b_axis, delta, grid, reflection)
            entries.append((mapped, base_coeff * sign))
    return entries


# ---------------------------------------------------------------------------
# negative orthogonal Laplacian
# ---------------------------------------------------------------------------


def assemble_perp_laplacian(grid: Grid, samples: GridSamples) -> SymmetricSparseOperator:
    if samples.grid != grid:
        raise ValueError("samples were taken on a different grid")
    if np.any(samples.geometry.undefined):
        raise ValueError("field samples contain near-null points; cannot assemble")
    ncells = grid.n_cells
    idx = np.arange(ncells).reshape(grid.cells)
    proj = samples.projectors  # (nx, ny, nz, 3, 3)
    parts = []

    for axis in range(3):
        h = grid.spacing[axis]
        left, right = _interior_face_cells(grid, axis)
        flat_l = idx[tuple(left)].ravel()
        flat_r = idx[tuple(right)].ravel()
        nfaces = flat_l.size
        p_face = 0.5 * (proj[tuple(left)] + proj[tuple(right)])
        p_face = p_face.reshape(nfaces, 3, 3)

        d_stamp = [(flat_l, np.full(nfaces, -1.0 / h)), (flat_r, np.full(nfaces, 1.0 / h))]
        rows, cols, vals = [], [], []

        # normal-normal term: w_f * P_aa * (D_a u)(D_a v), w_f = cell volume
        paa = p_face[:, axis, axis]
        for ci, vi in d_stamp:
            for cj, vj in d_stamp:
                rows.append(ci)
                cols.append(cj)
                vals.append(paa * vi * vj)

        # mixed terms, symmetrized: w_f * P_ab * (D_a u)(T_b v) /2 + transpose
        for b_axis in range(3):
            if b_axis == axis:
                continue
            pab = p_face[:, axis, b_axis]
            if not np.any(pab):
                continue
            t_entries = [
                (idx[tuple(cells)].ravel(), np.asarray(coeff).ravel())
                for cells, coeff in _tangential_stamp(left, right, b_axis, grid, "odd")
            ]
            for ci, vi in d_stamp:
                for cj, vj in t_entries:
                    half = 0.5 * pab * vi * vj
                    rows.append(ci)
                    cols.append(cj)
                    vals.append(half)
                    rows.append(cj)
                    cols.append(ci)
                    vals.append(half)

        # wall faces on Dirichlet axes: half-weight, normal gradient 2u/h,
        # tangential derivatives vanish on the homogeneous wall
        if not grid.is_periodic(axis):
            for side_index in (0, grid.cells[axis] - 1):
                shape = list(grid.cells)
                shape[axis] = 1
                base = np.indices(shape)
                cells = [base[0], base[1], base[2]]
                cells[axis] = np.full_like(cells[axis], side_index)
                flat = idx[tuple(cells)].ravel()
                paa_wall = proj[tuple(cells)].reshape(-1, 3, 3)[:, axis, axis]
                rows.append(flat)
                cols.append(flat)
                vals.append(0.5 * paa_wall * (2.0 / h) ** 2)

        rows = np.concatenate(rows)
        cols = np.concatenate(cols)
        vals = np.concatenate(vals)
        keep = vals != 0.0
        parts.append(
            sp.coo_matrix((vals[keep], (rows[keep], cols[keep])), shape=(ncells, ncells)).tocsr()
        )

    form = parts[0]
    for p in parts[1:]:
        form = form + p
    # per-face contributions are symmetric pairs; averaging removes the
    # summation-order ulps so A == A.T holds bitwise
    operator = form.multiply(1.0)  # copy
    operator = (operator + operator.T) * 0.5
    operator = operator.tocsr()
    op = SymmetricSparseOperator(grid=grid, matrix=operator)
    assert op.asymmetry() == 0.0
    return op


# ---------------------------------------------------------------------------
# diffusion generator (flux form)
# ---------------------------------------------------------------------------


def assemble_fpe_generator(grid: Grid, face_samples: dict) -> GeneratorOperator:
    ncells = grid.n_cells
    idx = np.arange(ncells).reshape(grid.cells)
    rows, cols, vals = [], [], []

    for axis in range(3):
        h = grid.spacing[axis]
        geo = face_samples[axis]
        w_face_all = geo.w
        jac_face_all = geo.jacobian
        left, right = _interior_face_cells(grid, axis)
        flat_l = idx[tuple(left)].ravel()
        flat_r = idx[tuple(right)].ravel()
        nfaces = flat_l.size

        # interior-face sample index along the family axis is left+1
        # (wrapping onto sample 0 for the periodic wrap face)
        face_cells = [c.copy() for c in left]
        face_cells[axis] = face_cells[axis] + 1
        if grid.is_periodic(axis):
            face_cells[axis] = face_cells[axis] % grid.cells[axis]
        sel = tuple(face_cells)
        w_f = w_face_all[sel].reshape(nfaces, 3)
        jac_f = jac_face_all[sel].reshape(nfaces, 3, 3)
        mag2 = np.einsum("fi,fi->f", w_f, w_f)
        # K = w^2 P = w^2 I - w wT ; advective coefficient c = w x curl w
        kten = mag2[:, None, None] * np.eye(3) - w_f[:, :, None] * w_f[:, None, :]
        c_vec = np.cross(w_f, curl_from_jacobian(jac_f))

        flux_entries = []  # (cells, coeff) of the +a flux at each face
        flux_entries.append((flat_l, -0.5 * kten[:, axis, axis] / h))
        flux_entries.append((flat_r, +0.5 * kten[:, axis, axis] / h))
        for b_axis in range(3):
            if b_axis == axis:
                continue
            kab = kten[:, axis, b_axis]
            if not np.any(kab):
                continue
            # zero-flux closure: even reflection for tangential neighbors
            for cells, coeff in _tangential_stamp(left, right, b_axis, grid, "even"):
                flux_entries.append(
                    (idx[tuple(cells)].ravel(), 0.5 * kab * np.asarray(coeff).ravel())
                )
        ca = c_vec[:, axis]
        if np.any(ca):
            flux_entries.append((flat_l, 0.25 * ca))
            flux_entries.append((flat_r, 0.25 * ca))

        # divergence: +F/h to the lower cell, -F/h to the upper cell
        for cj, coeff in flux_entries:
            rows.append(flat_l)
            cols.append(cj)
            vals.append(coeff / h)
            rows.append(flat_r)
            cols.append(cj)
            vals.append(-coeff / h)

    rows = np.concatenate(rows)
    cols = np.concatenate(cols)
    vals = np.concatenate(vals)
    keep = vals != 0.0
    matrix = sp.coo_matrix((vals[keep], (rows[keep], cols[keep])), shape=(ncells, ncells)).tocsr()
    return GeneratorOperator(grid=grid, matrix=matrix)


# ---------------------------------------------------------------------------
# expanded stationary residual (independent oracle for the generator)
# ---------------------------------------------------------------------------


def fpe_stationary_residual(u: GridScalar, samples: GridSamples, grid: Grid) -> GridScalar:
    """Coefficient-form evaluation of the stationary constrained-diffusion
    operator applied to ``u``.

    Matches ``2 (L u) / w^2`` of the flux-form generator to O(h^2) in the
    interior.  Field quantities are analytic; derivatives of ``u`` and the
    projected divergences are second-order discrete calculus.
    """
    if u.grid != grid or samples.grid != grid:
        raise ValueError("u and samples must live on the target grid")
    geo = samples.geometry
    proj = samples.projectors
    mag2 = geo.magnitude**2

    grad_u = gradient(u, boundary="one_sided").values
    perp_grad_u = np.einsum("...ij,...j->...i", proj, grad_u)
    lap_perp_u = divergence(GridVector(grid, perp_grad_u), boundary="one_sided").values

    # grad(w^2) = 2 J^T w analytically; project for the log-derivative terms
    grad_mag2 = 2.0 * np.einsum("...ij,...i->...j", geo.jacobian, geo.w)
    perp_grad_logw2 = np.einsum("...ij,...j->...i", proj, grad_mag2) / mag2[..., None]
    lap_perp_mag2 = divergence(
        GridVector(grid, np.einsum("...ij,...j->...i", proj, grad_mag2)),
        boundary="one_sided",
    ).values

    bhat = geo.field_force
    # first-order coefficient: b + 3 grad_perp(log w) = b + 3/2 grad_perp(log w^2)
    advect = bhat + 1.5 * perp_grad_logw2
    zeroth = (
        np.einsum("...i,...i->...", perp_grad_logw2, bhat)
        + geo.field_charge
        + lap_perp_mag2 / (2.0 * mag2)
    )
    residual = (
        lap_perp_u
        + np.einsum("...i,...i->...", advect, perp_grad_u)
        + zeroth * u.values
    )
    return GridScalar(grid, residual)
