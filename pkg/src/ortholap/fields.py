"""Constraining vector fields and their pointwise differential geometry.

A field object evaluates ``w`` and its Jacobian at arbitrary points; built-in
kinds carry exact analytic Jacobians, expression-defined kinds fall back to
central finite differences with a documented step.  From ``(w, Dw)`` the
geometry sampler derives everything the rest of the toolkit consumes: the
unit field, curl, helicity ``h = w . curl w``, the normalized helicity
``h/|w|^2``, the divergence of the unit field, the field force
``b = what x (curl what)`` and its divergence (the field charge).

All evaluators are pure and vectorized over a leading batch shape, so they
are safe to call from parallel workers.
"""

from __future__ import annotations

from dataclasses import dataclass, field as dc_field
from typing import Callable

import numpy as np

from . import expr as _expr

W_MIN_DEFAULT = 1e-8

# default finite-difference step: 1e-5 of a unit-box diagonal; field builders
# that know the actual domain rescale it (see cli.build_field_from_config)
FD_STEP_DEFAULT = 1e-5 * np.sqrt(3.0)


class NearNullFieldError(ValueError):
    """The field magnitude dropped below ``w_min`` at a sampled point,
    violating the standing non-vanishing assumption."""

    def __init__(self, magnitude: float, point, index=None):
        where = f" at point {np.asarray(point)}"
        if index is not None:
            where += f" (flat index {index})"
        super().__init__(f"|w| = {magnitude:.3e} below threshold{where}")
        self.magnitude = magnitude
        self.point = np.asarray(point)
        self.index = index


def _as_points(points) -> np.ndarray:
    pts = np.asarray(points, dtype=float)
    if pts.shape[-1] != 3:
        raise ValueError(f"points must have trailing dimension 3, got {pts.shape}")
    return pts


class VectorField:
    """Base class: analytic w with optionally analytic Jacobian."""

    #: "analytic" or "finite-difference"
    derivative_mode = "analytic"
    fd_step = FD_STEP_DEFAULT

    def w(self, points) -> np.ndarray:
        raise NotImplementedError

    def jacobian(self, points) -> np.ndarray:
        """J[..., i, j] = d w_i / d x_j."""
        return self._fd_jacobian(points)

    def _fd_jacobian(self, points) -> np.ndarray:
        pts = _as_points(points)
        jac = np.empty(pts.shape[:-1] + (3, 3))
        step = self.fd_step
        for axis in range(3):
            shift = np.zeros(3)
            shift[axis] = step
            jac[..., :, axis] = (self.w(pts + shift) - self.w(pts - shift)) / (2.0 * step)
        return jac


@dataclass(frozen=True)
class GradAxis(VectorField):
    """Constant coordinate gradient, e.g. w = (1,0,0) for axis 'x'."""

    axis: str = "x"

    def __post_init__(self):
        if self.axis not in ("x", "y", "z"):
            raise ValueError(f"axis must be x, y or z, got {self.axis!r}")

    def w(self, points):
        pts = _as_points(points)
        out = np.zeros_like(pts)
        out[..., "xyz".index(self.axis)] = 1.0
        return out

    def jacobian(self, points):
        pts = _as_points(points)
        return np.zeros(pts.shape[:-1] + (3, 3))


@dataclass(frozen=True)
class LinearShear(VectorField):
    """w = (1, z, 0); helicity -1 everywhere."""

    def w(self, points):
        pts = _as_points(points)
        out = np.zeros_like(pts)
        out[..., 0] = 1.0
        out[..., 1] = pts[..., 2]
        return out

    def jacobian(self, points):
        pts = _as_points(points)
        jac = np.zeros(pts.shape[:-1] + (3, 3))
        jac[..., 1, 2] = 1.0
        return jac


@dataclass(frozen=True)
class RotatingShear(VectorField):
    """w = (cos(alpha z), sin(alpha z), 0); unit-length Beltrami field with
    curl w = -alpha w."""

    alpha: float = 1.0

    def w(self, points):
        pts = _as_points(points)
        out = np.empty_like(pts)
        az = self.alpha * pts[..., 2]
        out[..., 0] = np.cos(az)
        out[..., 1] = np.sin(az)
        out[..., 2] = 0.0
        return out

    def jacobian(self, points):
        pts = _as_points(points)
        jac = np.zeros(pts.shape[:-1] + (3, 3))
        az = self.alpha * pts[..., 2]
        jac[..., 0, 2] = -self.alpha * np.sin(az)
        jac[..., 1, 2] = self.alpha * np.cos(az)
        return jac


@dataclass(frozen=True)
class ABCField(VectorField):
    """w = (A sin z + C cos y, B sin x + A cos z, C sin y + B cos x).

    Eigenfield of the curl (curl w = w); may have interior nulls depending
    on the coefficients, which the samplers detect rather than assume away.
    """

    a: float = 1.0
    b: float = 1.0
    c: float = 1.0

    def w(self, points):
        pts = _as_points(points)
        x, y, z = pts[..., 0], pts[..., 1], pts[..., 2]
        out = np.empty_like(pts)
        out[..., 0] = self.a * np.sin(z) + self.c * np.cos(y)
        out[..., 1] = self.b * np.sin(x) + self.a * np.cos(z)
        out[..., 2] = self.c * np.sin(y) + self.b * np.cos(x)
        return out

    def jacobian(self, points):
        pts = _as_points(points)
        x, y, z = pts[..., 0], pts[..., 1], pts[..., 2]
        jac = np.zeros(pts.shape[:-1] + (3, 3))
        jac[..., 0, 1] = -self.c * np.sin(y)
        jac[..., 0, 2] = self.a * np.cos(z)
        jac[..., 1, 0] = self.b * np.cos(x)
        jac[..., 1, 2] = -self.a * np.sin(z)
        jac[..., 2, 0] = -self.b * np.sin(x)
        jac[..., 2, 1] = self.c * np.cos(y)
        return jac


def _expr_gradient(tree, pts, step):
    grad = np.empty(pts.shape)
    for axis in range(3):
        shift = np.zeros(3)
        shift[axis] = step
        hi = pts + shift
        lo = pts - shift
        grad[..., axis] = (
            _expr.evaluate(tree, (hi[..., 0], hi[..., 1], hi[..., 2]))
            - _expr.evaluate(tree, (lo[..., 0], lo[..., 1], lo[..., 2]))
        ) / (2.0 * step)
    return grad


@dataclass(frozen=True)
class ClebschField(VectorField):
    """w = grad(phi) + psi grad(theta) from three scalar expressions."""

    phi: str
    psi: str
    theta: str
    fd_step: float = FD_STEP_DEFAULT
    derivative_mode = "finite-difference"
    _trees: tuple = dc_field(init=False, repr=False, compare=False, default=None)

    def __post_init__(self):
        trees = tuple(_expr.parse(s) for s in (self.phi, self.psi, self.theta))
        object.__setattr__(self, "_trees", trees)

    def w(self, points):
        pts = _as_points(points)
        tphi, tpsi, ttheta = self._trees
        psi_val = _expr.evaluate(tpsi, (pts[..., 0], pts[..., 1], pts[..., 2]))
        return _expr_gradient(tphi, pts, self.fd_step) + np.asarray(psi_val)[
            ..., None
        ] * _expr_gradient(ttheta, pts, self.fd_step)


@dataclass(frozen=True)
class CustomField(VectorField):
    """w given componentwise by three expressions."""

    wx: str
    wy: str
    wz: str
    fd_step: float = FD_STEP_DEFAULT
    derivative_mode = "finite-difference"
    _trees: tuple = dc_field(init=False, repr=False, compare=False, default=None)

    def __post_init__(self):
        trees = tuple(_expr.parse(s) for s in (self.wx, self.wy, self.wz))
        object.__setattr__(self, "_trees", trees)

    def w(self, points):
        pts = _as_points(points)
        coords = (pts[..., 0], pts[..., 1], pts[..., 2])
        out = np.empty(pts.shape)
        for i, tree in enumerate(self._trees):
            out[..., i] = _expr.evaluate(tree, coords)
        return out


@dataclass(frozen=True)
class ScaledField(VectorField):
    """w' = lam(x) w with a positive scalar factor.

    Direction-only quantities (unit field, normalized helicity, field force,
    field charge) are invariant under such scaling; the wrapper keeps the
    Jacobian analytic when a gradient callable is supplied.
    """

    base: VectorField
    factor: Callable[[np.ndarray], np.ndarray]
    factor_gradient: Callable[[np.ndarray], np.ndarray] | None = None

    def w(self, points):
        pts = _as_points(points)
        lam = np.asarray(self.factor(pts))
        return lam[..., None] * self.base.w(pts)

    def jacobian(self, points):
        if self.factor_gradient is None:
            return self._fd_jacobian(points)
        pts = _as_points(points)
        lam = np.asarray(self.factor(pts))
        glam = np.asarray(self.factor_gradient(pts))
        base_w = self.base.w(pts)
        base_jac = self.base.jacobian(pts)
        return lam[..., None, None] * base_jac + base_w[..., :, None] * glam[..., None, :]


_BUILTIN_KINDS = {
    "grad_axis": GradAxis,
    "linear_shear": LinearShear,
    "rotating_shear": RotatingShear,
    "abc": ABCField,
    "clebsch": ClebschField,
    "custom": CustomField,
}


def make_field(kind: str, **params) -> VectorField:
    """Instantiate a field from its config-file name and parameters."""
    if kind not in _BUILTIN_KINDS:
        raise ValueError(
            f"unknown field kind {kind!r}; expected one of {sorted(_BUILTIN_KINDS)}"
        )
    return _BUILTIN_KINDS[kind](**params)


# ---------------------------------------------------------------------------
# geometry sampling
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class GeometrySample:
    """Pointwise derived quantities of a field over a batch of points.

    Arrays share a leading batch shape; ``undefined`` marks points where
    ``|w| < w_min`` and the unit-field-derived entries are NaN (only in
    masking mode; the default sampling mode raises instead).
    """

    points: np.ndarray        # (..., 3)
    w: np.ndarray             # (..., 3)
    magnitude: np.ndarray     # (...,)
    unit: np.ndarray          # (..., 3)  w / |w|
    jacobian: np.ndarray      # (..., 3, 3)
    curl: np.ndarray          # (..., 3)
    helicity: np.ndarray      # (...,)    w . curl w
    helicity_unit: np.ndarray  # (...,)   helicity / |w|^2
    div_unit: np.ndarray      # (...,)    div (w/|w|)
    field_force: np.ndarray   # (..., 3)
    field_charge: np.ndarray  # (...,)    div of the field force
    undefined: np.ndarray     # (...,) bool


def curl_from_jacobian(jac: np.ndarray) -> np.ndarray:
    curl = np.empty(jac.shape[:-1])
    curl[..., 0] = jac[..., 2, 1] - jac[..., 1, 2]
    curl[..., 1] = jac[..., 0, 2] - jac[..., 2, 0]
    curl[..., 2] = jac[..., 1, 0] - jac[..., 0, 1]
    return curl


def _unit_quantities(w, mag, jac):
    """unit field, its curl, divergence, and the field force from (w, Dw)."""
    unit = w / mag[..., None]
    grad_mag = np.einsum("...ij,...i->...j", jac, w) / mag[..., None]
    curl = curl_from_jacobian(jac)
    curl_unit = curl / mag[..., None] - np.cross(grad_mag, w) / (mag**2)[..., None]
    trace = np.einsum("...ii->...", jac)
    div_unit = trace / mag - np.einsum("...i,...i->...", w, grad_mag) / mag**2
    field_force = np.cross(unit, curl_unit)
    return unit, curl, curl_unit, div_unit, field_force


def field_force_at(field: VectorField, points) -> np.ndarray:
    """b = what x (curl what) evaluated directly (used by the charge FD)."""
    pts = _as_points(points)
    w = field.w(pts)
    mag = np.linalg.norm(w, axis=-1)
    mag = np.maximum(mag, 1e-300)  # caller guarantees non-null centers
    jac = field.jacobian(pts)
    _, _, _, _, bhat = _unit_quantities(w, mag, jac)
    return bhat


def sample_geometry(
    field: VectorField,
    points,
    w_min: float = W_MIN_DEFAULT,
    on_null: str = "raise",
    charge_step: float | None = None,
) -> GeometrySample:
    """Evaluate all pointwise geometric quantities of ``field``.

    ``on_null`` chooses what happens where ``|w| < w_min``: ``"raise"`` (the
    default) raises :class:`NearNullFieldError` naming the worst point,
    ``"mask"`` leaves NaN in the unit-derived entries and flags the point in
    ``undefined``.  The field charge is a central difference of the analytic
    field force with step ``charge_step`` (default: the field's fd step).
    """
    pts = _as_points(points)
    w = field.w(pts)
    mag = np.linalg.norm(w, axis=-1)
    undefined = mag < w_min
    if np.any(undefined):
        if on_null == "raise":
            flat = np.argmin(np.where(undefined, mag, np.inf).ravel())
            bad_point = pts.reshape(-1, 3)[flat]
            raise NearNullFieldError(float(mag.ravel()[flat]), bad_point, int(flat))
        if on_null != "mask":
            raise ValueError(f"on_null must be 'raise' or 'mask', got {on_null!r}")
    jac = field.jacobian(pts)
    curl = curl_from_jacobian(jac)
    helicity = np.einsum("...i,...i->...", w, curl)

    safe_mag = np.where(undefined, 1.0, mag)
    unit, _, _, div_unit, bhat = _unit_quantities(w, safe_mag, jac)
    helicity_unit = helicity / safe_mag**2

    step = charge_step if charge_step is not None else field.fd_step
    charge = np.zeros(mag.shape)
    for axis in range(3):
        shift = np.zeros(3)
        shift[axis] = step
        charge += (
            field_force_at(field, pts + shift)[..., axis]
            - field_force_at(field, pts - shift)[..., axis]
        ) / (2.0 * step)

    if np.any(undefined):
        nan = np.nan
        unit = np.where(undefined[..., None], nan, unit)
        helicity_unit = np.where(undefined, nan, helicity_unit)
        div_unit = np.where(undefined, nan, div_unit)
        bhat = np.where(undefined[..., None], nan, bhat)
        charge = np.where(undefined, nan, charge)

    return GeometrySample(
        points=pts,
        w=w,
        magnitude=mag,
        unit=unit,
        jacobian=jac,
        curl=curl,
        helicity=helicity,
        helicity_unit=helicity_unit,
        div_unit=div_unit,
        field_force=bhat,
        field_charge=charge,
        undefined=undefined,
    )


def decompose_gradient(sample: GeometrySample, g) -> tuple[np.ndarray, np.ndarray]:
    """Split g into components perpendicular and parallel to the field.

    ``g_perp`` is computed as ``g - g_par`` so the pair reconstructs ``g`` to
    one rounding of the parallel part; ``g_perp . w`` vanishes to roundoff.
    """
    if np.any(sample.undefined):
        flat = int(np.argmax(sample.undefined.ravel()))
        raise NearNullFieldError(
            float(sample.magnitude.ravel()[flat]),
            sample.points.reshape(-1, 3)[flat],
            flat,
        )
    g = np.asarray(g, dtype=float)
    unit = sample.unit
    g_par = np.einsum("...i,...i->...", g, unit)[..., None] * unit
    return g - g_par, g_par


def projector(unit: np.ndarray) -> np.ndarray:
    """Orthogonal projection tensor P = I - what whatT (symmetric, P^2 = P)."""
    eye = np.eye(3)
    return eye - unit[..., :, None] * unit[..., None, :]
