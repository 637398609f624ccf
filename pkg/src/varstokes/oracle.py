"""Independent reference solutions for validating the variational constructions.

Two families:

* the constant-viscosity fundamental solution (Stokeslet / pressurelet) and a
  plain surface-quadrature single layer built from it, completely separate
  from the finite element machinery;
* manufactured solutions: divergence-free velocity fields built as curls of
  windowed vector potentials, with body force derived from the strong form.

Conventions match the solved system  div(2 mu E(u)) - grad p = f,  so for a
point force F the pair (G F, P . F) satisfies  mu lap(u) - grad p = -F delta.
The window polynomial (1-s^2)^4 is used for all cutoffs; supports are chosen
with grid-aligned edges so cell integrands stay polynomial on every default
mesh level.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import AccuracyError, ConfigError
from .forms import ViscosityField
from .mesh import GeometrySpec, Mesh
from .quadrature import tri_rule, tri_rule_subdivided


# ---------------------------------------------------------------------------
# fundamental solution


def _rvec(x, y):
    r = np.atleast_2d(np.asarray(x, dtype=float)) - np.asarray(y, dtype=float)
    rn = np.linalg.norm(r, axis=-1)
    if np.any(rn == 0.0):
        raise AccuracyError("Stokeslet evaluated at its pole")
    return r, rn


def stokeslet(x, y, mu: float = 1.0) -> np.ndarray:
    """Velocity fundamental tensor G(x, y), shape (..., 3, 3)."""
    r, rn = _rvec(x, y)
    eye = np.eye(3)
    g = eye / rn[..., None, None] + r[..., :, None] * r[..., None, :] / rn[..., None, None] ** 3
    return g / (8.0 * np.pi * mu)


def pressurelet(x, y) -> np.ndarray:
    """Pressure fundamental vector P(x, y), shape (..., 3)."""
    r, rn = _rvec(x, y)
    return r / (4.0 * np.pi * rn[..., None] ** 3)


def stokeslet_velocity(x, y0, force, mu: float = 1.0) -> np.ndarray:
    return stokeslet(x, y0, mu) @ np.asarray(force, dtype=float)


def stokeslet_pressure(x, y0, force) -> np.ndarray:
    return pressurelet(x, y0) @ np.asarray(force, dtype=float)


def stokeslet_velocity_grad(x, y0, force, mu: float = 1.0) -> np.ndarray:
    """Jacobian d_a u_c of the Stokeslet velocity, shape (..., 3, 3)."""
    r, rn = _rvec(x, y0)
    f = np.asarray(force, dtype=float)
    rf = r @ f
    inv3 = rn**-3
    inv5 = rn**-5
    eye = np.eye(3)
    term = (
        -f[None, :, None] * r[..., None, :] * inv3[..., None, None]
        + (eye * rf[..., None, None]) * inv3[..., None, None]
        + r[..., :, None] * f[None, None, :] * inv3[..., None, None]
        - 3.0 * r[..., :, None] * r[..., None, :] * rf[..., None, None] * inv5[..., None, None]
    )
    return term / (8.0 * np.pi * mu)


def stokeslet_velocity_laplacian(x, y0, force, mu: float = 1.0) -> np.ndarray:
    r, rn = _rvec(x, y0)
    f = np.asarray(force, dtype=float)
    rf = r @ f
    return (f * rn[..., None] ** -3 - 3.0 * r * rf[..., None] * rn[..., None] ** -5) / (
        4.0 * np.pi * mu
    )


def stokeslet_pressure_grad(x, y0, force) -> np.ndarray:
    r, rn = _rvec(x, y0)
    f = np.asarray(force, dtype=float)
    rf = r @ f
    return (f * rn[..., None] ** -3 - 3.0 * r * rf[..., None] * rn[..., None] ** -5) / (4.0 * np.pi)


# ---------------------------------------------------------------------------
# classical single layer by surface quadrature


def distance_to_interface(points, a: float) -> np.ndarray:
    """Euclidean distance from points to the surface of the cube (-a, a)^3."""
    p = np.abs(np.atleast_2d(np.asarray(points, dtype=float)))
    outside = np.linalg.norm(np.maximum(p - a, 0.0), axis=1)
    inside = a - p.max(axis=1)
    return np.where(outside > 0.0, outside, inside)


def classical_single_layer(
    phi_func,
    mesh: Mesh,
    points,
    mu: float = 1.0,
    degree: int = 4,
    subdivisions: int = 0,
    min_distance: float | None = None,
) -> np.ndarray:
    """Surface quadrature of int_Gamma G(x, y) phi(y) dsigma_y at probe points.

    `phi_func(y)` returns density values (M, 3).  Each interface triangle uses
    the `degree` rule on 4**subdivisions sub-triangles; probes closer to the
    interface than `min_distance` are refused.
    """
    pts = np.atleast_2d(np.asarray(points, dtype=float))
    if min_distance is not None:
        d = distance_to_interface(pts, mesh.spec.a)
        if np.any(d < min_distance):
            worst = pts[np.argmin(d)]
            raise AccuracyError(
                f"probe {worst} is {d.min():.3g} from the interface; "
                f"quadrature requires at least {min_distance:.3g}"
            )
    if subdivisions:
        qp, qw = tri_rule_subdivided(degree, subdivisions)
    else:
        qp, qw = tri_rule(degree)
    p0 = mesh.vertices[mesh.gamma_faces[:, 0]]
    p1 = mesh.vertices[mesh.gamma_faces[:, 1]]
    p2 = mesh.vertices[mesh.gamma_faces[:, 2]]
    y = (
        p0[:, None, :]
        + qp[None, :, 0, None] * (p1 - p0)[:, None, :]
        + qp[None, :, 1, None] * (p2 - p0)[:, None, :]
    ).reshape(-1, 3)
    w = (2.0 * mesh.gamma_areas[:, None] * qw[None, :]).reshape(-1)
    dens = np.asarray(phi_func(y), dtype=float)
    out = np.empty((len(pts), 3))
    for i, xp in enumerate(pts):
        g = stokeslet(y, xp, mu)  # G symmetric in its arguments
        out[i] = np.einsum("q,qcj,qj->c", w, g, dens)
    return out


# ---------------------------------------------------------------------------
# windowed polynomials and manufactured solutions


class Window:
    """C^3 bump (1 - s^2)^4 on [c-h, c+h] with analytic derivatives."""

    def __init__(self, center: float, halfwidth: float):
        self.c = float(center)
        self.h = float(halfwidth)

    def _s(self, t):
        return (np.asarray(t, dtype=float) - self.c) / self.h

    def val(self, t):
        s = self._s(t)
        inside = np.abs(s) < 1.0
        return np.where(inside, (1.0 - s * s) ** 4, 0.0)

    def d1(self, t):
        s = self._s(t)
        inside = np.abs(s) < 1.0
        return np.where(inside, -8.0 * s * (1.0 - s * s) ** 3, 0.0) / self.h

    def d2(self, t):
        s = self._s(t)
        inside = np.abs(s) < 1.0
        return np.where(inside, (1.0 - s * s) ** 2 * (56.0 * s * s - 8.0), 0.0) / self.h**2

    def d3(self, t):
        s = self._s(t)
        inside = np.abs(s) < 1.0
        return np.where(inside, (1.0 - s * s) * (144.0 * s - 336.0 * s**3), 0.0) / self.h**3


@dataclass
class ManufacturedSolution:
    """Closed-form (u*, p*) with the body force of the strong form.

    `velocity`, `velocity_grad`, `pressure`, `pressure_grad`, `force` are
    vectorized callables on (N, 3) arrays; `force` is None for homogeneous
    cases.  `boundary` is the velocity restricted to the interface.
    """

    name: str
    mu: ViscosityField
    velocity: callable
    velocity_grad: callable
    pressure: callable
    force: callable | None

    def boundary(self, y):
        return self.velocity(y)


def _curl_bump(mu: ViscosityField, spec: GeometrySpec) -> ManufacturedSolution:
    if mu.kind == "checkerboard":
        raise ConfigError("curl-bump needs viscosity constant on the exterior region")
    c_minus = mu.params[0] if mu.kind == "const" else mu.params[1]
    a, R = spec.a, spec.R
    zmax = min(2.0 * a, R)
    X = Window(0.0, a)
    Y = Window(0.0, a)
    Z = Window(0.5 * (a + zmax), 0.5 * (zmax - a))
    Xp = Window(0.0, a)
    Yp = Window(0.0, a)
    Zp = Window(0.5 * (a + zmax), 0.5 * (zmax - a))
    s0, p0 = 10.0, 2.0

    def velocity(x):
        x = np.atleast_2d(x)
        u = np.zeros_like(x)
        u[:, 0] = s0 * X.val(x[:, 0]) * Y.d1(x[:, 1]) * Z.val(x[:, 2])
        u[:, 1] = -s0 * X.d1(x[:, 0]) * Y.val(x[:, 1]) * Z.val(x[:, 2])
        return u

    def velocity_grad(x):
        x = np.atleast_2d(x)
        g = np.zeros((len(x), 3, 3))
        xv, yv, zv = x[:, 0], x[:, 1], x[:, 2]
        g[:, 0, 0] = X.d1(xv) * Y.d1(yv) * Z.val(zv)
        g[:, 0, 1] = X.val(xv) * Y.d2(yv) * Z.val(zv)
        g[:, 0, 2] = X.val(xv) * Y.d1(yv) * Z.d1(zv)
        g[:, 1, 0] = -X.d2(xv) * Y.val(yv) * Z.val(zv)
        g[:, 1, 1] = -X.d1(xv) * Y.d1(yv) * Z.val(zv)
        g[:, 1, 2] = -X.d1(xv) * Y.val(yv) * Z.d1(zv)
        return s0 * g

    def pressure(x):
        x = np.atleast_2d(x)
        return p0 * Xp.val(x[:, 0]) * Yp.val(x[:, 1]) * Zp.val(x[:, 2])

    def force(x):
        x = np.atleast_2d(x)
        xv, yv, zv = x[:, 0], x[:, 1], x[:, 2]
        lap = np.zeros_like(x)
        lap[:, 0] = s0 * (
            X.d2(xv) * Y.d1(yv) * Z.val(zv)
            + X.val(xv) * Y.d3(yv) * Z.val(zv)
            + X.val(xv) * Y.d1(yv) * Z.d2(zv)
        )
        lap[:, 1] = -s0 * (
            X.d3(xv) * Y.val(yv) * Z.val(zv)
            + X.d1(xv) * Y.d2(yv) * Z.val(zv)
            + X.d1(xv) * Y.val(yv) * Z.d2(zv)
        )
        gp = np.zeros_like(x)
        gp[:, 0] = Xp.d1(xv) * Yp.val(yv) * Zp.val(zv)
        gp[:, 1] = Xp.val(xv) * Yp.d1(yv) * Zp.val(zv)
        gp[:, 2] = Xp.val(xv) * Yp.val(yv) * Zp.d1(zv)
        return c_minus * lap - p0 * gp

    return ManufacturedSolution(
        name="curl-bump",
        mu=mu,
        velocity=velocity,
        velocity_grad=velocity_grad,
        pressure=pressure,
        force=force,
    )


STOKESLET_CENTER = np.array([0.2, 0.1, -0.15])
STOKESLET_FORCE = np.array([1.0, 0.5, -0.25])


def _stokeslet_in(mu: ViscosityField, spec: GeometrySpec) -> ManufacturedSolution:
    if mu.kind != "const":
        raise ConfigError("stokeslet-in is exact only for constant viscosity")
    mu0 = mu.params[0]
    y0, f0 = STOKESLET_CENTER, STOKESLET_FORCE

    return ManufacturedSolution(
        name="stokeslet-in",
        mu=mu,
        velocity=lambda x: stokeslet_velocity(x, y0, f0, mu0),
        velocity_grad=lambda x: stokeslet_velocity_grad(x, y0, f0, mu0),
        pressure=lambda x: stokeslet_pressure(x, y0, f0),
        force=None,
    )


_REGISTRY = {"curl-bump": _curl_bump, "stokeslet-in": _stokeslet_in}


def manufactured(name: str, mu: ViscosityField, spec: GeometrySpec) -> ManufacturedSolution:
    try:
        builder = _REGISTRY[name]
    except KeyError:
        raise ConfigError(
            f"unknown manufactured case {name!r} (known: {', '.join(sorted(_REGISTRY))})"
        ) from None
    return builder(mu, spec)


def smooth_surface_density(name: str):
    """Closed-form densities on the interface for the classical comparison.

    All registry entries have zero net force, so the truncated variational
    potential is not polluted by the container effect on monopole fields.
    """
    if name == "quadrupole":
        return lambda y: np.stack(
            [y[:, 1] * y[:, 2], y[:, 0] * y[:, 2], y[:, 0] * y[:, 1]], axis=1
        )
    if name == "swirl":
        omega = np.array([0.3, -1.0, 0.6])
        return lambda y: np.cross(np.broadcast_to(omega, y.shape), y)
    raise ConfigError(f"unknown density {name!r} (known: quadrupole, swirl)")
