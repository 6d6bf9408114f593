"""Riemannian targets: embeddings with closest-point projections, and charts.

All operations take the component axis FIRST: a point batch is an array of
shape (K, ...) or (n, ...), so grid-shaped batches (K, N, N, N) and single
points (K,) go through the same code.

Embedded targets supply the projection P onto the manifold, its derivative
dP, the contracted second derivative hessP_contract (the second fundamental
form term of the flow), rho(p) = p - P(p), and closed-form geodesics.
Chart targets supply the metric, the contracted Christoffel symbols, and a
guard region that flows must not leave.
"""

import numpy as np

R2 = np.sqrt(0.5)  # radius of each Clifford circle factor


class TubeViolationError(Exception):
    """A point left the tubular neighborhood of an embedded target."""


class ChartGuardError(Exception):
    """A chart value left the admissible region."""


def _dot(a, b):
    return np.sum(a * b, axis=0)


def _norm(a):
    return np.sqrt(_dot(a, a))


def wrap_angle(x):
    """Wrap to (-pi, pi], ties toward +pi (deterministic shortest arc)."""
    return np.pi - np.mod(np.pi - np.asarray(x, dtype=float), 2.0 * np.pi)


def _radial_project(a, radius):
    return (radius / _norm(a)) * a


def _radial_dP(a, v, radius):
    r = _norm(a)
    n = a / r
    return (radius / r) * (v - n * _dot(n, v))


def _radial_hess(a, u, v, radius):
    # second derivative of a -> radius * a / |a|, contracted with (u, v)
    r = _norm(a)
    au = _dot(a, u)
    av = _dot(a, v)
    uv = _dot(u, v)
    c3 = radius / r ** 3
    c5 = 3.0 * radius / r ** 5
    return -c3 * (u * av + v * au + a * uv) + c5 * a * au * av


class EmbeddedTarget:
    """Base class; subclasses set K, tube_radius, curvature_sign, name."""

    K = None
    tube_radius = np.inf
    curvature_sign = "zero"
    name = ""

    def project(self, p):
        raise NotImplementedError

    def dP(self, p, v):
        raise NotImplementedError

    def hessP_contract(self, p, u, v):
        raise NotImplementedError

    def rho(self, p):
        return np.asarray(p, dtype=float) - self.project(p)

    def check_tube(self, p):
        """Raise TubeViolationError with the worst offender if outside."""
        off = _norm(self.rho(p))
        worst = float(np.max(off))
        if worst > self.tube_radius:
            idx = (
                tuple(int(t) for t in np.unravel_index(int(np.argmax(off)), np.shape(off)))
                if np.ndim(off)
                else ()
            )
            raise TubeViolationError(
                f"{self.name}: |rho| = {worst:.3e} exceeds tube radius "
                f"{self.tube_radius:g} at grid index {idx}"
            )
        return worst

    def target_distance(self, p, q):
        raise NotImplementedError

    def geodesic_interp(self, p, q, s):
        raise NotImplementedError


class EuclideanK(EmbeddedTarget):
    """Flat ambient space; the projection is the identity."""

    curvature_sign = "zero"

    def __init__(self, k=1):
        self.K = int(k)
        self.name = f"euclidean{self.K}"

    def project(self, p):
        return np.asarray(p, dtype=float).copy()

    def dP(self, p, v):
        return np.asarray(v, dtype=float).copy()

    def hessP_contract(self, p, u, v):
        return np.zeros_like(np.asarray(u, dtype=float))

    def rho(self, p):
        return np.zeros_like(np.asarray(p, dtype=float))

    def check_tube(self, p):
        return 0.0

    def target_distance(self, p, q):
        return _norm(np.asarray(q, dtype=float) - np.asarray(p, dtype=float))

    def geodesic_interp(self, p, q, s):
        p = np.asarray(p, dtype=float)
        q = np.asarray(q, dtype=float)
        return p + s * (q - p)


class Sphere2(EmbeddedTarget):
    """Unit 2-sphere in R^3; positively curved counter-test target."""

    K = 3
    tube_radius = 0.5
    curvature_sign = "positive"
    name = "sphere2"

    def project(self, p):
        return _radial_project(np.asarray(p, dtype=float), 1.0)

    def dP(self, p, v):
        return _radial_dP(np.asarray(p, dtype=float), np.asarray(v, dtype=float), 1.0)

    def hessP_contract(self, p, u, v):
        p = np.asarray(p, dtype=float)
        self.check_tube(p)
        return _radial_hess(p, np.asarray(u, dtype=float), np.asarray(v, dtype=float), 1.0)

    def target_distance(self, p, q):
        pn = self.project(p)
        qn = self.project(q)
        c = np.clip(_dot(pn, qn), -1.0, 1.0)
        return np.arccos(c)

    def geodesic_interp(self, p, q, s):
        """Great-circle arc; antipodal pairs route through the e3 axis
        (projected to the tangent space, e1 fallback at the poles)."""
        pn = self.project(p)
        qn = self.project(q)
        c = np.clip(_dot(pn, qn), -1.0, 1.0)
        ang = np.arccos(c)
        # tangent direction toward q, with the deterministic tie-break
        w = qn - c * pn
        wn = _norm(w)
        ref = np.zeros_like(pn)
        ref[2] = 1.0
        t3 = ref - _dot(ref, pn) * pn
        ref1 = np.zeros_like(pn)
        ref1[0] = 1.0
        t1 = ref1 - _dot(ref1, pn) * pn
        tie = np.where(_norm(t3) > 1e-8, t3, t1)
        w = np.where(wn > 1e-12, w / np.where(wn > 1e-12, wn, 1.0), tie / _norm(tie))
        return np.cos(s * ang) * pn + np.sin(s * ang) * w


class CliffordTorus(EmbeddedTarget):
    """Product of two circles of radius 1/sqrt(2) in R^4; flat."""

    K = 4
    tube_radius = 0.25
    curvature_sign = "zero"
    name = "clifford"

    @staticmethod
    def _blocks(p):
        p = np.asarray(p, dtype=float)
        return p[0:2], p[2:4]

    def project(self, p):
        a, b = self._blocks(p)
        return np.concatenate([_radial_project(a, R2), _radial_project(b, R2)], axis=0)

    def dP(self, p, v):
        a, b = self._blocks(p)
        va, vb = self._blocks(v)
        return np.concatenate([_radial_dP(a, va, R2), _radial_dP(b, vb, R2)], axis=0)

    def hessP_contract(self, p, u, v):
        p = np.asarray(p, dtype=float)
        self.check_tube(p)
        a, b = self._blocks(p)
        ua, ub = self._blocks(u)
        va, vb = self._blocks(v)
        return np.concatenate(
            [_radial_hess(a, ua, va, R2), _radial_hess(b, ub, vb, R2)], axis=0
        )

    def angles(self, p):
        a, b = self._blocks(p)
        return np.stack([np.arctan2(a[1], a[0]), np.arctan2(b[1], b[0])])

    def from_angles(self, t):
        t = np.asarray(t, dtype=float)
        return R2 * np.stack([np.cos(t[0]), np.sin(t[0]), np.cos(t[1]), np.sin(t[1])])

    def translate(self, p, delta):
        """Rotate each factor by the fixed angles delta = (d1, d2)."""
        t = self.angles(p)
        t = t + np.asarray(delta, dtype=float).reshape(2, *([1] * (t.ndim - 1)))
        return self.from_angles(t)

    def target_distance(self, p, q):
        dt = wrap_angle(self.angles(q) - self.angles(p))
        return R2 * np.sqrt(np.sum(dt * dt, axis=0))

    def geodesic_interp(self, p, q, s):
        t0 = self.angles(p)
        dt = wrap_angle(self.angles(q) - t0)
        return self.from_angles(t0 + s * dt)


class ChartTarget:
    """Base class for intrinsic targets; subclasses set n, guard, name."""

    n = None
    guard_radius = np.inf
    curvature_sign = "zero"
    name = ""

    def metric_contract(self, f, u, v):
        raise NotImplementedError

    def christoffel_contract(self, f, u, v):
        raise NotImplementedError

    def check_guard(self, f):
        r = _norm(np.asarray(f, dtype=float))
        worst = float(np.max(r))
        if worst > self.guard_radius:
            idx = (
                tuple(int(t) for t in np.unravel_index(int(np.argmax(r)), np.shape(r)))
                if np.ndim(r)
                else ()
            )
            raise ChartGuardError(
                f"{self.name}: |f| = {worst:.3e} left the guard region "
                f"|f| <= {self.guard_radius:g} at grid index {idx}"
            )
        return worst

    def target_distance(self, p, q):
        raise NotImplementedError

    def geodesic_interp(self, p, q, s):
        raise NotImplementedError


class PoincareDisk(ChartTarget):
    """Hyperbolic plane in the unit-disk chart, h_ij = 4 delta_ij/(1-|f|^2)^2."""

    n = 2
    guard_radius = 0.9
    curvature_sign = "negative"
    name = "poincare"

    def metric_contract(self, f, u, v):
        f = np.asarray(f, dtype=float)
        lam = 4.0 / (1.0 - _dot(f, f)) ** 2
        return lam * _dot(u, v)

    def christoffel_contract(self, f, u, v):
        """Gamma^k_ij u^i v^j = 2(u (f.v) + v (f.u) - f (u.v))/(1 - |f|^2)."""
        f = np.asarray(f, dtype=float)
        self.check_guard(f)
        u = np.asarray(u, dtype=float)
        v = np.asarray(v, dtype=float)
        c = 2.0 / (1.0 - _dot(f, f))
        return c * (u * _dot(f, v) + v * _dot(f, u) - f * _dot(u, v))

    @staticmethod
    def _cx(f):
        f = np.asarray(f, dtype=float)
        return f[0] + 1j * f[1]

    @staticmethod
    def _from_cx(w):
        return np.stack([np.real(w), np.imag(w)])

    def target_distance(self, p, q):
        zp = self._cx(p)
        zq = self._cx(q)
        m = np.abs((zq - zp) / (1.0 - np.conj(zp) * zq))
        return 2.0 * np.arctanh(np.clip(m, 0.0, 1.0 - 1e-16))

    def geodesic_interp(self, p, q, s):
        """Moebius transport to the origin, radial geodesic, transport back."""
        zp = self._cx(p)
        zq = self._cx(q)
        w = (zq - zp) / (1.0 - np.conj(zp) * zq)
        m = np.abs(w)
        safe = np.where(m > 1e-300, m, 1.0)
        ms = np.tanh(s * np.arctanh(np.clip(m, 0.0, 1.0 - 1e-16)))
        ws = np.where(m > 1e-300, ms * w / safe, 0.0 * w)
        out = (ws + zp) / (1.0 + np.conj(zp) * ws)
        return self._from_cx(out)


class FlatTorusChart(ChartTarget):
    """Angle chart of the Clifford torus: metric delta/2, Gamma = 0.

    The 1/2 matches the circle radii 1/sqrt(2) of CliffordTorus, so
    intrinsic and extrinsic energies of the same map agree.
    """

    n = 2
    guard_radius = np.inf
    curvature_sign = "zero"
    name = "torus_chart"

    def metric_contract(self, f, u, v):
        return 0.5 * _dot(u, v)

    def christoffel_contract(self, f, u, v):
        return np.zeros_like(np.asarray(u, dtype=float))

    def check_guard(self, f):
        return 0.0

    def target_distance(self, p, q):
        dt = wrap_angle(np.asarray(q, dtype=float) - np.asarray(p, dtype=float))
        return R2 * np.sqrt(np.sum(dt * dt, axis=0))

    def geodesic_interp(self, p, q, s):
        p = np.asarray(p, dtype=float)
        dt = wrap_angle(np.asarray(q, dtype=float) - p)
        return p + s * dt


def make_target(name, **params):
    """Registry used by the CLI config."""
    name = name.lower()
    if name in ("euclidean", "euclideank"):
        return EuclideanK(int(params.get("k", 1)))
    if name == "sphere2":
        return Sphere2()
    if name == "clifford":
        return CliffordTorus()
    if name == "poincare":
        return PoincareDisk()
    if name == "torus_chart":
        return FlatTorusChart()
    raise ValueError(f"unknown target {name!r}")


def is_chart(target):
    return isinstance(target, ChartTarget)
