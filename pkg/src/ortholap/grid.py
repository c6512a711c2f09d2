"""Structured cell-centered box grids with per-axis boundary conditions.

Cells are indexed ``[i, j, k]`` for ``(x, y, z)``; centers sit at
``corner + (i + 1/2) h``.  A ``dirichlet`` axis represents homogeneous data
on the wall planes via odd-reflection ghosts (so a sampled solution vanishes
on the wall to second order); a ``periodic`` axis wraps.

The module also provides the discrete calculus used as a diagnostic oracle
(gradient / divergence / curl, second-order central differences), the three
quadratic forms (plain L2, projected-gradient, and their sum) by midpoint
quadrature, the boundary-tangency report, and the bit-exact ``OLAP`` binary
dump for scalar and vector samples.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass

import numpy as np

from .fields import GeometrySample, VectorField, projector, sample_geometry

BC_PERIODIC = "periodic"
BC_DIRICHLET = "dirichlet"

_OLAP_MAGIC = b"OLAP"
_OLAP_VERSION = 1


class GridConfigError(ValueError):
    pass


@dataclass(frozen=True)
class Grid:
    cells: tuple[int, int, int]
    extent: tuple[float, float, float]
    origin: str = "corner"  # "corner" (box starts at 0) or "center" (box centered at 0)
    bc: tuple[str, str, str] = (BC_PERIODIC, BC_PERIODIC, BC_PERIODIC)

    def __post_init__(self):
        cells = tuple(int(n) for n in self.cells)
        extent = tuple(float(L) for L in self.extent)
        bc = tuple(self.bc)
        if len(cells) != 3 or any(n <= 0 for n in cells):
            raise GridConfigError(f"cell counts must be three positive integers, got {self.cells}")
        if len(extent) != 3 or any(not np.isfinite(L) or L <= 0 for L in extent):
            raise GridConfigError(f"extents must be three positive lengths, got {self.extent}")
        if self.origin not in ("corner", "center"):
            raise GridConfigError(f"origin must be 'corner' or 'center', got {self.origin!r}")
        if len(bc) != 3 or any(b not in (BC_PERIODIC, BC_DIRICHLET) for b in bc):
            raise GridConfigError(f"bc must be three of 'periodic'/'dirichlet', got {self.bc}")
        object.__setattr__(self, "cells", cells)
        object.__setattr__(self, "extent", extent)
        object.__setattr__(self, "bc", bc)

    # -- geometry ----------------------------------------------------------
    @property
    def spacing(self) -> tuple[float, float, float]:
        return tuple(L / n for L, n in zip(self.extent, self.cells))

    @property
    def corner(self) -> tuple[float, float, float]:
        if self.origin == "corner":
            return (0.0, 0.0, 0.0)
        return tuple(-L / 2 for L in self.extent)

    @property
    def cell_volume(self) -> float:
        hx, hy, hz = self.spacing
        return hx * hy * hz

    @property
    def n_cells(self) -> int:
        nx, ny, nz = self.cells
        return nx * ny * nz

    def is_periodic(self, axis: int) -> bool:
        return self.bc[axis] == BC_PERIODIC

    def axis_centers(self, axis: int) -> np.ndarray:
        h = self.spacing[axis]
        return self.corner[axis] + (np.arange(self.cells[axis]) + 0.5) * h

    def axis_faces(self, axis: int) -> np.ndarray:
        """Face-plane coordinates along ``axis``: n for periodic (wrap face
        counted once, at the lower wall), n+1 for dirichlet."""
        h = self.spacing[axis]
        n = self.cells[axis]
        count = n if self.is_periodic(axis) else n + 1
        return self.corner[axis] + np.arange(count) * h

    def cell_centers(self) -> np.ndarray:
        xs, ys, zs = (self.axis_centers(a) for a in range(3))
        gx, gy, gz = np.meshgrid(xs, ys, zs, indexing="ij")
        return np.stack([gx, gy, gz], axis=-1)

    def face_centers(self, axis: int) -> np.ndarray:
        coords = [self.axis_centers(a) for a in range(3)]
        coords[axis] = self.axis_faces(axis)
        gx, gy, gz = np.meshgrid(*coords, indexing="ij")
        return np.stack([gx, gy, gz], axis=-1)


def build_grid(cells, extent, origin="corner", bc=(BC_PERIODIC,) * 3) -> Grid:
    """Construct and validate a grid (thin convenience over ``Grid``)."""
    return Grid(tuple(cells), tuple(extent), origin, tuple(bc))


@dataclass(frozen=True)
class GridScalar:
    grid: Grid
    values: np.ndarray  # (nx, ny, nz)

    def __post_init__(self):
        vals = np.asarray(self.values, dtype=float)
        if vals.shape != self.grid.cells:
            raise ValueError(f"scalar shape {vals.shape} != grid cells {self.grid.cells}")
        if not np.all(np.isfinite(vals)):
            raise ValueError("scalar field contains non-finite values")
        object.__setattr__(self, "values", vals)


@dataclass(frozen=True)
class GridVector:
    grid: Grid
    values: np.ndarray  # (nx, ny, nz, 3)

    def __post_init__(self):
        vals = np.asarray(self.values, dtype=float)
        if vals.shape != self.grid.cells + (3,):
            raise ValueError(f"vector shape {vals.shape} != grid cells {self.grid.cells} x 3")
        if not np.all(np.isfinite(vals)):
            raise ValueError("vector field contains non-finite values")
        object.__setattr__(self, "values", vals)


def integrate(u: GridScalar) -> float:
    """Midpoint-rule volume integral."""
    return float(u.grid.cell_volume * np.sum(u.values))


# ---------------------------------------------------------------------------
# field sampling
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class GridSamples:
    """Geometry arrays on the cell-center lattice with recorded extrema."""

    grid: Grid
    geometry: GeometrySample
    min_magnitude: float
    argmin_magnitude: tuple[int, int, int]
    inf_abs_helicity: float
    argmin_abs_helicity: tuple[int, int, int]

    @property
    def w_field(self) -> GridVector:
        return GridVector(self.grid, self.geometry.w)

    @property
    def projectors(self) -> np.ndarray:
        return projector(self.geometry.unit)


def sample_on_grid(field: VectorField, grid: Grid, on_null: str = "raise") -> GridSamples:
    """Sample the field geometry at every cell center."""
    geo = sample_geometry(field, grid.cell_centers(), on_null=on_null)
    idx_mag = np.unravel_index(int(np.argmin(geo.magnitude)), grid.cells)
    abs_h = np.abs(geo.helicity)
    idx_h = np.unravel_index(int(np.argmin(abs_h)), grid.cells)
    return GridSamples(
        grid=grid,
        geometry=geo,
        min_magnitude=float(geo.magnitude[idx_mag]),
        argmin_magnitude=tuple(int(i) for i in idx_mag),
        inf_abs_helicity=float(abs_h[idx_h]),
        argmin_abs_helicity=tuple(int(i) for i in idx_h),
    )


def sample_on_faces(field: VectorField, grid: Grid, on_null: str = "raise") -> dict:
    """Sample the field geometry at the face centers of each axis family."""
    return {
        axis: sample_geometry(field, grid.face_centers(axis), on_null=on_null)
        for axis in range(3)
    }


# ---------------------------------------------------------------------------
# boundary tangency
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class TangencyEntry:
    face_set: str  # e.g. "x_lo"
    max_normal_component: float
    passed: bool


@dataclass(frozen=True)
class TangencyReport:
    entries: tuple[TangencyEntry, ...]
    tolerance: float

    @property
    def passed(self) -> bool:
        return all(e.passed for e in self.entries)


def tangency_report(field: VectorField, grid: Grid, tol: float = 1e-10) -> TangencyReport:
    """Max |n . what| over each Dirichlet wall's face centers.

    Empty report on a fully periodic grid (no boundary).  Uses the unit
    field, so the report is invariant under positive rescaling.
    """
    entries = []
    for axis in range(3):
        if grid.is_periodic(axis):
            continue
        centers = [grid.axis_centers(a) for a in range(3)]
        for side, coord in (("lo", grid.corner[axis]),
                            ("hi", grid.corner[axis] + grid.extent[axis])):
            coords = list(centers)
            coords[axis] = np.array([coord])
            gx, gy, gz = np.meshgrid(*coords, indexing="ij")
            pts = np.stack([gx, gy, gz], axis=-1)
            geo = sample_geometry(field, pts)
            worst = float(np.max(np.abs(geo.unit[..., axis])))
            name = f"{'xyz'[axis]}_{side}"
            entries.append(TangencyEntry(name, worst, worst <= tol))
    return TangencyReport(tuple(entries), tol)


# ---------------------------------------------------------------------------
# discrete calculus (diagnostic oracle)
# ---------------------------------------------------------------------------


def _axis_derivative(values: np.ndarray, grid: Grid, axis: int, boundary: str) -> np.ndarray:
    """Second-order derivative of a cell-centered array along one axis.

    ``boundary`` applies on non-periodic axes: ``one_sided`` (generic
    diagnostic fields) or ``odd`` (zero-trace solution fields, ghost value
    is the negated adjacent cell).
    """
    h = grid.spacing[axis]
    n = values.shape[axis]
    if grid.is_periodic(axis):
        return (np.roll(values, -1, axis=axis) - np.roll(values, 1, axis=axis)) / (2 * h)
    if n < 3:
        raise ValueError(f"axis {axis} needs at least 3 cells for one-sided differences")
    out = np.empty_like(values)
    sl = [slice(None)] * values.ndim

    def at(i):
        s = list(sl)
        s[axis] = i
        return tuple(s)

    out[at(slice(1, -1))] = (values[at(slice(2, None))] - values[at(slice(0, -2))]) / (2 * h)
    if boundary == "one_sided":
        out[at(0)] = (-3 * values[at(0)] + 4 * values[at(1)] - values[at(2)]) / (2 * h)
        out[at(-1)] = (3 * values[at(-1)] - 4 * values[at(-2)] + values[at(-3)]) / (2 * h)
    elif boundary == "odd":
        out[at(0)] = (values[at(1)] + values[at(0)]) / (2 * h)
        out[at(-1)] = -(values[at(-1)] + values[at(-2)]) / (2 * h)
    else:
        raise ValueError(f"boundary must be 'one_sided' or 'odd', got {boundary!r}")
    return out


def gradient(u: GridScalar, boundary: str = "one_sided") -> GridVector:
    g = np.stack(
        [_axis_derivative(u.values, u.grid, a, boundary) for a in range(3)], axis=-1
    )
    return GridVector(u.grid, g)


def divergence(f: GridVector, boundary: str = "one_sided") -> GridScalar:
    div = sum(
        _axis_derivative(f.values[..., a], f.grid, a, boundary) for a in range(3)
    )
    return GridScalar(f.grid, div)


def curl(f: GridVector, boundary: str = "one_sided") -> GridVector:
    d = lambda comp, axis: _axis_derivative(f.values[..., comp], f.grid, axis, boundary)
    out = np.stack(
        [d(2, 1) - d(1, 2), d(0, 2) - d(2, 0), d(1, 0) - d(0, 1)], axis=-1
    )
    return GridVector(f.grid, out)


# ---------------------------------------------------------------------------
# quadratic forms
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class InnerProducts:
    l2: float
    perp: float
    hperp: float


def inner_products(u: GridScalar, v: GridScalar, samples: GridSamples) -> InnerProducts:
    """Midpoint quadrature of the three bilinear forms.

    The projected form uses odd-reflection ghosts on Dirichlet axes, i.e. it
    is the form of the zero-trace discrete space.  Both gradients are
    projected before the dot product, which makes ``perp(u, v)`` bitwise
    symmetric in its arguments and ``perp(u, u)`` a sum of squares.
    """
    if u.grid != v.grid or u.grid != samples.grid:
        raise ValueError("u, v and samples must share one grid")
    dv = u.grid.cell_volume
    l2 = dv * float(np.sum(u.values * v.values))
    proj = samples.projectors
    gu = np.einsum("...ij,...j->...i", proj, gradient(u, boundary="odd").values)
    gv = np.einsum("...ij,...j->...i", proj, gradient(v, boundary="odd").values)
    perp = dv * float(np.sum(gu * gv))
    return InnerProducts(l2=l2, perp=perp, hperp=l2 + perp)


# ---------------------------------------------------------------------------
# OLAP binary dump
# ---------------------------------------------------------------------------


def write_olap(path, data: GridScalar | GridVector) -> None:
    """Write the bit-exact dump: magic ``OLAP``, u32 version=1, u32 kind
    (0 scalar / 1 vector), 3 x u64 dims, 3 x f64 extent, then the payload as
    little-endian f64 in x-fastest cell order (vector payload is three such
    component blocks: x, y, z)."""
    kind = 0 if isinstance(data, GridScalar) else 1
    grid = data.grid
    header = struct.pack(
        "<4sII3Q3d", _OLAP_MAGIC, _OLAP_VERSION, kind, *grid.cells, *grid.extent
    )
    with open(path, "wb") as fh:
        fh.write(header)
        if kind == 0:
            fh.write(np.ascontiguousarray(data.values, dtype="<f8").ravel(order="F").tobytes())
        else:
            for comp in range(3):
                fh.write(
                    np.ascontiguousarray(data.values[..., comp], dtype="<f8")
                    .ravel(order="F")
                    .tobytes()
                )


def read_olap(path, grid: Grid | None = None) -> GridScalar | GridVector:
    """Read an OLAP dump.  If ``grid`` is given its cells/extent must match
    and its boundary conditions are attached; otherwise a corner-origin
    fully periodic grid is assumed (the format does not store BCs)."""
    with open(path, "rb") as fh:
        header = fh.read(struct.calcsize("<4sII3Q3d"))
        magic, version, kind, nx, ny, nz, lx, ly, lz = struct.unpack("<4sII3Q3d", header)
        if magic != _OLAP_MAGIC:
            raise ValueError(f"bad magic {magic!r}")
        if version != _OLAP_VERSION:
            raise ValueError(f"unsupported version {version}")
        dims = (int(nx), int(ny), int(nz))
        extent = (lx, ly, lz)
        if grid is None:
            grid = Grid(dims, extent)
        elif grid.cells != dims or not np.allclose(grid.extent, extent):
            raise ValueError("grid does not match file dims/extent")
        count = dims[0] * dims[1] * dims[2]
        if kind == 0:
            payload = np.frombuffer(fh.read(8 * count), dtype="<f8")
            return GridScalar(grid, payload.reshape(dims, order="F"))
        comps = [
            np.frombuffer(fh.read(8 * count), dtype="<f8").reshape(dims, order="F")
            for _ in range(3)
        ]
        return GridVector(grid, np.stack(comps, axis=-1))
