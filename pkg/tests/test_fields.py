import numpy as np
import pytest

from ortholap.fields import (
    ABCField,
    ClebschField,
    CustomField,
    GradAxis,
    LinearShear,
    NearNullFieldError,
    RotatingShear,
    ScaledField,
    curl_from_jacobian,
    decompose_gradient,
    make_field,
    projector,
    sample_geometry,
)

BUILTINS = [
    GradAxis("x"),
    GradAxis("z"),
    LinearShear(),
    RotatingShear(1.0),
    RotatingShear(2.5),
    ABCField(1.0, 1.0, 1.0),
]


def fd_curl(field, pts, step=1e-6):
    """Independent curl oracle: central differences of the field values."""
    jac = np.empty(pts.shape[:-1] + (3, 3))
    for axis in range(3):
        shift = np.zeros(3)
        shift[axis] = step
        jac[..., :, axis] = (field.w(pts + shift) - field.w(pts - shift)) / (2 * step)
    return curl_from_jacobian(jac)


def probe_points(n=40, seed=3):
    rng = np.random.default_rng(seed)
    return rng.uniform(0.1, 0.9, size=(n, 3))


def test_rotating_shear_at_origin():
    s = sample_geometry(RotatingShear(1.0), np.zeros((1, 3)))
    assert np.allclose(s.w[0], [1, 0, 0], atol=1e-15)
    assert np.allclose(s.curl[0], [-1, 0, 0], atol=1e-15)
    assert s.helicity[0] == pytest.approx(-1.0, abs=1e-15)
    assert s.helicity_unit[0] == pytest.approx(-1.0, abs=1e-15)
    assert s.magnitude[0] == pytest.approx(1.0, abs=1e-15)
    assert np.allclose(s.field_force[0], 0.0, atol=1e-14)
    # cross-check the analytic curl with the finite-difference oracle
    oracle = fd_curl(RotatingShear(1.0), np.zeros((1, 3)))
    assert np.allclose(s.curl, oracle, atol=1e-9)


def test_grad_axis_trivial_geometry():
    s = sample_geometry(GradAxis("x"), probe_points())
    assert np.all(s.w[:, 0] == 1.0)
    assert np.all(s.curl == 0.0)
    assert np.all(s.helicity == 0.0)


def test_abc_is_curl_eigenfield():
    field = ABCField(1.0, 1.0, 1.0)
    s = sample_geometry(field, np.zeros((1, 3)))
    assert np.allclose(s.w[0], [1, 1, 1], atol=1e-15)
    assert np.allclose(s.curl[0], s.w[0], atol=1e-14)
    assert s.helicity[0] == pytest.approx(3.0, abs=1e-14)
    pts = probe_points()
    s = sample_geometry(field, pts)
    assert np.allclose(s.curl, s.w, atol=1e-12)
    assert np.allclose(s.curl, fd_curl(field, pts), atol=1e-8)


def test_decompose_gradient_axis_aligned():
    s = sample_geometry(GradAxis("x"), np.zeros((1, 3)))
    g_perp, g_par = decompose_gradient(s, np.array([[1.0, 2.0, 3.0]]))
    assert np.allclose(g_perp[0], [0, 2, 3], atol=1e-15)
    assert np.allclose(g_par[0], [1, 0, 0], atol=1e-15)


def test_decompose_gradient_parallel_and_orthogonal_inputs():
    field = RotatingShear(1.0)
    pts = probe_points(10)
    s = sample_geometry(field, pts)
    g_perp, _ = decompose_gradient(s, 5.0 * s.w)
    assert np.allclose(g_perp, 0.0, atol=1e-12)
    ortho = np.cross(s.w, np.array([0.0, 0.0, 1.0]))
    _, g_par = decompose_gradient(s, ortho)
    assert np.allclose(g_par, 0.0, atol=1e-12)


@pytest.mark.parametrize("field", BUILTINS, ids=lambda f: type(f).__name__)
def test_projection_identity_random(field):
    rng = np.random.default_rng(11)
    pts = probe_points(60)
    s = sample_geometry(field, pts)
    g = rng.standard_normal((60, 3))
    g_perp, g_par = decompose_gradient(s, g)
    # reconstruction exact to one rounding of the parallel part
    assert np.max(np.abs(g_perp + g_par - g)) <= 1e-15 * np.max(np.abs(g))
    dots = np.abs(np.einsum("ni,ni->n", g_perp, s.w))
    bound = 1e-12 * np.linalg.norm(g, axis=1) * s.magnitude
    assert np.all(dots <= bound + 1e-300)


@pytest.mark.parametrize("field", BUILTINS, ids=lambda f: type(f).__name__)
def test_direction_quantities_invariant_under_positive_scaling(field):
    lam = lambda pts: 2.0 + np.sin(pts[..., 0])
    dlam = lambda pts: np.stack(
        [np.cos(pts[..., 0]), np.zeros(pts.shape[:-1]), np.zeros(pts.shape[:-1])],
        axis=-1,
    )
    scaled = ScaledField(field, lam, dlam)
    pts = probe_points(50)
    s0 = sample_geometry(field, pts)
    s1 = sample_geometry(scaled, pts)
    assert np.allclose(s0.unit, s1.unit, atol=1e-12)
    assert np.allclose(s0.helicity_unit, s1.helicity_unit, atol=1e-8)
    assert np.allclose(s0.field_force, s1.field_force, atol=1e-8)
    assert np.allclose(s0.field_charge, s1.field_charge, atol=1e-6)
    assert np.allclose(s0.div_unit, s1.div_unit, atol=1e-8)


def test_helicity_scales_quadratically_with_constant_factor():
    lam = 3.5
    field = ABCField(1.0, 0.7, 0.4)
    scaled = ScaledField(field, lambda p: np.full(p.shape[:-1], lam),
                         lambda p: np.zeros(p.shape))
    pts = probe_points(30)
    h0 = sample_geometry(field, pts).helicity
    h1 = sample_geometry(scaled, pts).helicity
    assert np.allclose(h1, lam**2 * h0, rtol=1e-10)


def test_fd_jacobian_second_order_in_step():
    analytic = ABCField(1.0, 1.0, 1.0)
    pts = probe_points(25)
    exact = analytic.jacobian(pts)
    errors = []
    for step in (1e-3, 5e-4):
        fd = CustomField(
            "sin(z)+cos(y)", "sin(x)+cos(z)", "sin(y)+cos(x)", fd_step=step
        )
        errors.append(np.max(np.abs(fd.jacobian(pts) - exact)))
    assert errors[0] / errors[1] >= 3.5


def test_rotating_shear_is_beltrami():
    for alpha in (0.5, 1.0, 2.0):
        field = RotatingShear(alpha)
        s = sample_geometry(field, probe_points(40))
        assert np.max(np.abs(s.curl + alpha * s.w)) <= 1e-12


@pytest.mark.parametrize("field", BUILTINS, ids=lambda f: type(f).__name__)
def test_field_force_orthogonal_to_unit(field):
    s = sample_geometry(field, probe_points(40))
    dots = np.einsum("ni,ni->n", s.field_force, s.unit)
    assert np.max(np.abs(dots)) <= 1e-12


@pytest.mark.parametrize("field", BUILTINS, ids=lambda f: type(f).__name__)
def test_normalized_helicity_consistent(field):
    s = sample_geometry(field, probe_points(40))
    assert np.allclose(s.helicity_unit * s.magnitude**2, s.helicity, rtol=1e-10)


@pytest.mark.parametrize("field", [LinearShear(), RotatingShear(1.3), ABCField(1, 1, 1)],
                         ids=lambda f: type(f).__name__)
def test_unit_curl_decomposition_identity(field):
    # curl(what) = b x what + h_unit what, evaluated via an FD oracle on what
    pts = probe_points(30)
    s = sample_geometry(field, pts)

    class UnitField:
        fd_step = 1e-6

        def w(self, p):
            wv = field.w(p)
            return wv / np.linalg.norm(wv, axis=-1, keepdims=True)

    curl_unit = fd_curl(UnitField(), pts)
    rhs = np.cross(s.field_force, s.unit) + s.helicity_unit[..., None] * s.unit
    assert np.allclose(curl_unit, rhs, atol=1e-7)


def test_clebsch_matches_linear_shear():
    # phi=x, psi=z, theta=y gives w = (1, z, 0)
    field = ClebschField(phi="x", psi="z", theta="y")
    pts = probe_points(20)
    assert np.allclose(field.w(pts), LinearShear().w(pts), atol=1e-9)


def test_near_null_raises_with_point():
    field = CustomField("x", "-y", "0")
    pts = np.array([[0.5, 0.5, 0.0], [0.0, 0.0, 0.0]])
    with pytest.raises(NearNullFieldError) as err:
        sample_geometry(field, pts)
    assert err.value.index == 1
    # masking mode flags instead
    s = sample_geometry(field, pts, on_null="mask")
    assert s.undefined.tolist() == [False, True]
    assert np.isnan(s.helicity_unit[1]) and not np.isnan(s.helicity[1])


def test_make_field_factory():
    assert make_field("rotating_shear", alpha=2.0) == RotatingShear(2.0)
    with pytest.raises(ValueError, match="unknown field kind"):
        make_field("vortex")


def test_projector_properties():
    s = sample_geometry(RotatingShear(1.0), probe_points(20))
    p = projector(s.unit)
    assert np.allclose(p, np.swapaxes(p, -1, -2))
    assert np.allclose(np.einsum("nij,njk->nik", p, p), p, atol=1e-14)
    assert np.allclose(np.einsum("nij,nj->ni", p, s.w), 0.0, atol=1e-14)
