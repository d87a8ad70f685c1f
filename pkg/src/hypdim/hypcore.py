"""Hyperbolic geometry primitives in the unit ball and upper half-space models.

Conventions used throughout the package:

* boundary dimension ``n`` is 1 or 2, so hyperbolic space is the plane
  (``n = 1``) or 3-space (``n = 2``) and isometries are 2x2 matrices,
  real or complex respectively;
* half-space points are ``(x, t)`` with ``x`` in R^n and height ``t > 0``;
* ball points are vectors of length ``n + 1`` with Euclidean norm < 1;
* the two models are identified by the fixed involution
  ``sigma(p) = 2 (p + e) / |p + e|^2 - e`` (``e`` the unit vector on the
  height axis), which sends ``(0, 1)`` to the ball origin.

All functions are pure; the types below are frozen value objects.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.integrate import quad

SUPPORTED_DIMS = (1, 2)

DET_TOL = 1e-12


class DomainError(ValueError):
    """Input outside the mathematical domain of an operation."""


def _check_dim(n: int) -> None:
    if n not in SUPPORTED_DIMS:
        raise DomainError(f"boundary dimension must be 1 or 2, got {n}")


@dataclass(frozen=True)
class BallPoint:
    """Point of the open unit ball B^{n+1}, Euclidean coordinates."""

    coords: tuple[float, ...]

    def __post_init__(self):
        _check_dim(len(self.coords) - 1)
        if self.norm() >= 1.0:
            raise DomainError(f"ball point must have norm < 1, got {self.norm()}")

    @property
    def n(self) -> int:
        return len(self.coords) - 1

    def norm(self) -> float:
        return math.sqrt(sum(c * c for c in self.coords))

    def as_array(self) -> np.ndarray:
        return np.asarray(self.coords, dtype=float)


@dataclass(frozen=True)
class HalfSpacePoint:
    """Point (x, t) of the upper half-space H^{n+1}, t > 0."""

    base: tuple[float, ...]
    height: float

    def __post_init__(self):
        _check_dim(len(self.base))
        if not (self.height > 0.0) or not math.isfinite(self.height):
            raise DomainError(f"height must be positive and finite, got {self.height}")

    @property
    def n(self) -> int:
        return len(self.base)

    def as_array(self) -> np.ndarray:
        """Coordinates in R^{n+1} with the height last."""
        return np.asarray(tuple(self.base) + (self.height,), dtype=float)


@dataclass(frozen=True)
class BoundaryPoint:
    """Boundary point: unit vector on S^n, or R^n coordinates / infinity.

    Exactly one of ``sphere`` (length n+1 unit vector) and ``plane``
    (length n vector, or None with ``at_infinity=True``) is set; the two
    forms are related by the same Cayley involution as interior points.
    """

    sphere: tuple[float, ...] | None = None
    plane: tuple[float, ...] | None = None
    at_infinity: bool = False

    def __post_init__(self):
        forms = sum([self.sphere is not None, self.plane is not None, self.at_infinity])
        if forms != 1:
            raise DomainError("exactly one of sphere / plane / at_infinity must be set")
        if self.sphere is not None:
            _check_dim(len(self.sphere) - 1)
            nrm = math.sqrt(sum(c * c for c in self.sphere))
            if abs(nrm - 1.0) > 1e-9:
                raise DomainError(f"sphere form must be a unit vector, |v| = {nrm}")
        if self.plane is not None:
            _check_dim(len(self.plane))

    def require_finite(self) -> tuple[float, ...]:
        if self.at_infinity:
            raise DomainError("operation does not accept the boundary point at infinity")
        if self.plane is not None:
            return self.plane
        raise DomainError("boundary point is in sphere form; convert first")


@dataclass(frozen=True)
class Isometry:
    """Orientation-preserving isometry as a unit-determinant 2x2 matrix.

    Real entries act on the upper half-plane (n = 1) by z -> (az+b)/(cz+d);
    complex entries act on upper half-3-space (n = 2) through the Poincare
    extension.  Composition is matrix product.
    """

    a: complex
    b: complex
    c: complex
    d: complex
    label: str | None = None

    def __post_init__(self):
        det = self.a * self.d - self.b * self.c
        if abs(det - 1.0) > 1e-6:
            raise DomainError(f"isometry must have determinant 1, got {det}")

    @property
    def entries(self) -> tuple[complex, complex, complex, complex]:
        return (self.a, self.b, self.c, self.d)

    def det(self) -> complex:
        return self.a * self.d - self.b * self.c

    def compose(self, other: "Isometry") -> "Isometry":
        """Matrix product self @ other, renormalized to det 1."""
        a, b, c, d = _compose_entries(self.entries, other.entries)
        a, b, c, d = _renorm_entries((a, b, c, d))
        return Isometry(a, b, c, d)

    def inverse(self) -> "Isometry":
        return Isometry(self.d, -self.b, -self.c, self.a,
                        label=None if self.label is None else self.label + "^-1")

    def is_real(self, tol: float = 1e-9) -> bool:
        return all(abs(complex(e).imag) <= tol for e in self.entries)


@dataclass(frozen=True)
class Horoball:
    """Horoball tangent to the boundary sphere.

    ``size`` is the Euclidean diameter in the ball model; when the tangency
    is the point at infinity (half-space model) it is the height of the
    bounding horizontal plane instead.
    """

    tangency: BoundaryPoint
    size: float

    def __post_init__(self):
        if not self.size > 0:
            raise DomainError("horoball size must be positive")

    def contains_halfspace(self, p: HalfSpacePoint) -> bool:
        """Membership test in half-space coordinates."""
        if self.tangency.at_infinity:
            return p.height >= self.size
        x0 = np.asarray(self.tangency.require_finite(), dtype=float)
        # Euclidean ball of diameter `size` tangent at (x0, 0) from above.
        centre_h = self.size / 2.0
        dx = np.asarray(p.base, dtype=float) - x0
        return float(dx @ dx) + (p.height - centre_h) ** 2 <= centre_h ** 2 + 1e-15


@dataclass(frozen=True)
class Shadow:
    """Spherical cap cut out on S^n by geodesics from the antipode of x
    that pass within hyperbolic distance ell of x."""

    center: BallPoint
    radius: float
    axis: tuple[float, ...] = field(default=())      # unit vector on S^n
    angular_radius: float = 0.0                      # spherical (angle) radius

    @property
    def diameter(self) -> float:
        """Spherical diameter of the cap."""
        return 2.0 * self.angular_radius

    def contains_direction(self, u: np.ndarray) -> bool:
        u = np.asarray(u, dtype=float)
        axis = np.asarray(self.axis, dtype=float)
        dot = float(np.clip(u @ axis, -1.0, 1.0))
        return math.acos(dot) <= self.angular_radius + 1e-12


# ---------------------------------------------------------------------------
# matrix plumbing


def _compose_entries(m1, m2):
    a1, b1, c1, d1 = m1
    a2, b2, c2, d2 = m2
    return (a1 * a2 + b1 * c2, a1 * b2 + b1 * d2,
            c1 * a2 + d1 * c2, c1 * b2 + d1 * d2)


def _renorm_entries(m):
    a, b, c, d = m
    det = a * d - b * c
    s = complex(det) ** 0.5
    return (a / s, b / s, c / s, d / s)


def identity_isometry() -> Isometry:
    return Isometry(1.0, 0.0, 0.0, 1.0, label="id")


# ---------------------------------------------------------------------------
# distances and model conversion


def ball_distance(a: BallPoint, b: BallPoint) -> float:
    """d(a, b) = arccosh(1 + 2|a-b|^2 / ((1-|a|^2)(1-|b|^2)))."""
    av, bv = a.as_array(), b.as_array()
    diff = av - bv
    den = (1.0 - float(av @ av)) * (1.0 - float(bv @ bv))
    arg = 1.0 + 2.0 * float(diff @ diff) / den
    return math.acosh(max(arg, 1.0))


def halfspace_distance(p: HalfSpacePoint, q: HalfSpacePoint) -> float:
    """d(p, q) = arccosh(1 + (|x_p-x_q|^2 + (t_p-t_q)^2) / (2 t_p t_q))."""
    dx = np.asarray(p.base, dtype=float) - np.asarray(q.base, dtype=float)
    num = float(dx @ dx) + (p.height - q.height) ** 2
    arg = 1.0 + num / (2.0 * p.height * q.height)
    return math.acosh(max(arg, 1.0))


def halfspace_distance_arrays(points: np.ndarray, q: np.ndarray) -> np.ndarray:
    """Vectorized half-space distance from rows of ``points`` to point ``q``.

    ``points`` has shape (N, n+1) with heights in the last column.
    """
    pts = np.asarray(points, dtype=float)
    q = np.asarray(q, dtype=float)
    dx2 = np.sum((pts[:, :-1] - q[:-1]) ** 2, axis=1)
    num = dx2 + (pts[:, -1] - q[-1]) ** 2
    arg = 1.0 + num / (2.0 * pts[:, -1] * q[-1])
    return np.arccosh(np.maximum(arg, 1.0))


def _sigma(v: np.ndarray) -> np.ndarray:
    """Involution sigma(p) = 2 (p + e) / |p + e|^2 - e swapping the models."""
    e = np.zeros_like(v)
    e[-1] = 1.0
    w = v + e
    return 2.0 * w / float(w @ w) - e


def ball_from_halfspace(p: HalfSpacePoint) -> BallPoint:
    """Model map sending (0, 1) to the origin; a hyperbolic isometry."""
    q = _sigma(p.as_array())
    return BallPoint(tuple(q))


def halfspace_from_ball(b: BallPoint) -> HalfSpacePoint:
    q = _sigma(b.as_array())
    return HalfSpacePoint(tuple(q[:-1]), float(q[-1]))


def boundary_plane_from_sphere(xi: BoundaryPoint) -> BoundaryPoint:
    """Boundary restriction of the model map; the south pole goes to infinity."""
    if xi.sphere is None:
        return xi
    v = np.asarray(xi.sphere, dtype=float)
    e = np.zeros_like(v)
    e[-1] = 1.0
    w = v + e
    w2 = float(w @ w)
    if w2 < 1e-14:
        return BoundaryPoint(at_infinity=True)
    q = 2.0 * w / w2 - e
    return BoundaryPoint(plane=tuple(q[:-1]))


def boundary_sphere_from_plane(xi: BoundaryPoint) -> BoundaryPoint:
    if xi.sphere is not None:
        return xi
    if xi.at_infinity:
        v = [0.0] * 2
        v[-1] = -1.0
        return BoundaryPoint(sphere=tuple(v))
    x = np.asarray(xi.plane, dtype=float)
    v = np.append(x, 0.0)
    q = _sigma(v)
    q /= math.sqrt(float(q @ q))
    return BoundaryPoint(sphere=tuple(q))


# ---------------------------------------------------------------------------
# group action


def apply_isometry(g: Isometry, p: HalfSpacePoint) -> HalfSpacePoint:
    """Moebius action on the upper half-plane / Poincare extension to H^3.

    With z the base written as a real (n=1) or complex (n=2) number and
    t the height:

        D  = |cz + d|^2 + |c|^2 t^2
        z' = ((az + b) conj(cz + d) + a conj(c) t^2) / D
        t' = t / D
    """
    base, height = _apply_entries(g.entries, tuple(p.base), p.height, p.n)
    return HalfSpacePoint(base, height)


def _apply_entries(entries, base: tuple[float, ...], height: float, n: int):
    a, b, c, d = entries
    z = complex(base[0]) if n == 1 else complex(base[0], base[1])
    t = height
    u = c * z + d
    den = (u.real * u.real + u.imag * u.imag) + (c.real * c.real + c.imag * c.imag) * t * t
    znum = (a * z + b) * u.conjugate() + a * c.conjugate() * t * t
    zp = znum / den
    tp = t / den
    if n == 1:
        return (zp.real,), tp
    return (zp.real, zp.imag), tp


def boundary_action(g: Isometry, z: complex) -> complex:
    """Action on the boundary R^n (as real/complex number), z finite, gz finite."""
    num = g.a * z + g.b
    den = g.c * z + g.d
    if abs(den) < 1e-15:
        raise DomainError("image of boundary point is at infinity")
    return num / den


def fixed_points(g: Isometry) -> tuple[complex, complex]:
    """Attracting and repelling boundary fixed points of a loxodromic element.

    Eigenvalue lam with |lam| > 1 gives the attracting point (lam - d)/c.
    """
    if abs(g.c) < 1e-14:
        raise DomainError("element fixes infinity; no finite fixed-point pair")
    tr = g.a + g.d
    disc = (tr * tr - 4.0) ** 0.5
    lam1 = (tr + disc) / 2.0
    lam2 = (tr - disc) / 2.0
    if abs(lam1) < abs(lam2):
        lam1, lam2 = lam2, lam1
    if abs(abs(lam1) - 1.0) < 1e-12:
        raise DomainError("element is parabolic or elliptic; no attracting fixed point")
    return (lam1 - g.d) / g.c, (lam2 - g.d) / g.c


# ---------------------------------------------------------------------------
# boundary kernels and shadows


def poisson_kernel(z: BallPoint, xi: BoundaryPoint) -> float:
    """k(z, xi) = (1 - |z|^2) / |xi - z|^2; equals 1 at the origin."""
    xi_s = boundary_sphere_from_plane(xi)
    zv = z.as_array()
    xv = np.asarray(xi_s.sphere, dtype=float)
    if len(xv) != len(zv):
        raise DomainError("dimension mismatch between point and boundary point")
    diff = xv - zv
    return (1.0 - float(zv @ zv)) / float(diff @ diff)


def shadow(x: BallPoint, ell: float) -> Shadow:
    """Shadow S(x, ell): endpoints on S^n of geodesics from the antipode x*
    that meet the hyperbolic ball B(x, ell).

    Mapping the 2-plane slice through o and x to the upper half-plane with
    x* at infinity turns those geodesics into vertical lines, which gives
    the exact angular radius 2 arctan(((1-r)/(1+r)) sinh ell), r = |x|.
    """
    if ell <= 0:
        raise DomainError("shadow radius ell must be positive")
    r = x.norm()
    if r < 1e-14:
        raise DomainError("shadow undefined at the origin (no antipode)")
    h = (1.0 - r) / (1.0 + r)
    theta = 2.0 * math.atan(h * math.sinh(ell))
    axis = tuple(c / r for c in x.coords)
    return Shadow(center=x, radius=ell, axis=axis, angular_radius=theta)


def shadow_angular_radii(norms: np.ndarray, ell: float) -> np.ndarray:
    """Vectorized angular radius of S(x, ell) for ball points of given norms."""
    norms = np.asarray(norms, dtype=float)
    h = (1.0 - norms) / (1.0 + norms)
    return 2.0 * np.arctan(h * math.sinh(ell))


# ---------------------------------------------------------------------------
# horoball volume


def horoball_ball_volume(R: float, n: int, rel_tol: float = 1e-10) -> float:
    """Volume of B_R(z) inside the horoball touched by z, by adaptive quadrature.

    vol = pi^{n/2}/Gamma(n/2+1) * int_1^{e^R} (-y^2 + 2 y cosh R - 1)^{n/2} / y^{n+1} dy

    Evaluated after the substitution y = e^u, giving the equivalent smooth
    integrand (2 cosh R - 2 cosh u)^{n/2} e^{-nu/2} on [0, R].
    """
    _check_dim(n)
    if not R > 0:
        raise DomainError("radius R must be positive")
    cR = math.cosh(R)
    cn = math.pi ** (n / 2.0) / math.gamma(n / 2.0 + 1.0)

    def integrand(u: float) -> float:
        val = 2.0 * cR - 2.0 * math.cosh(u)
        if val <= 0.0:
            return 0.0
        return val ** (n / 2.0) * math.exp(-n * u / 2.0)

    value, _err = quad(integrand, 0.0, R, epsabs=0.0, epsrel=rel_tol, limit=200)
    return cn * value


def horoball_volume_halfplane_closed_form(R: float) -> float:
    """Closed form of the n = 1 horoball-ball volume.

    2 cosh R (pi/2 - arctan sqrt((cosh R - 1)/2)) + 2 sqrt(2 (cosh R - 1))
      - 2 (pi/2 + arctan sqrt((cosh R - 1)/2))
    """
    if not R > 0:
        raise DomainError("radius R must be positive")
    cR = math.cosh(R)
    s = math.sqrt((cR - 1.0) / 2.0)
    at = math.atan(s)
    return (2.0 * cR * (math.pi / 2.0 - at)
            + 2.0 * math.sqrt(2.0 * (cR - 1.0))
            - 2.0 * (math.pi / 2.0 + at))
