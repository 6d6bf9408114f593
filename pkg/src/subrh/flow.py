"""Tension fields, flow integrators, and the short-time Picard construction.

The evolution is du/dt = tau(u) with

    extrinsic: tau^a = L u^a - hessP(u; Xu, Xu)^a - hessP(u; Yu, Yu)^a
    intrinsic: tau^i = L f^i + Gamma(f; Xf, Xf)^i + Gamma(f; Yf, Yf)^i

where L is the discrete sub-Laplacian. `tension` returns exactly these
stencil expressions. At a discrete critical point the extrinsic expression
has a purely normal O(h^2) residue (the stencil Laplacian of an embedded
circle is not exactly tangent), so reported tension norms, stopping tests,
and the energy identity all use the tangential part dP_u(tau), which is the
actual discrete L2 gradient of the horizontal energy on the constraint
manifold; `tangential_tension` exposes it.
"""

import math
from dataclasses import dataclass

import numpy as np

from . import ops
from .crgeom import invariant_wave
from .fields import MapField
from .ops import StabilityError, dt_max
from .targets import ChartGuardError, TubeViolationError, is_chart
from .diagnostics import DiagnosticsRecord, energies


class SolverError(Exception):
    """The implicit linear solve did not reach the requested residual."""


class FlowAbort(Exception):
    """A step failed mid-run; partial records are preserved on the exception."""

    def __init__(self, cause, state, records):
        super().__init__(f"flow aborted at t={state.t:.6g} (step {state.step}): {cause}")
        self.cause = cause
        self.state = state
        self.records = records


@dataclass
class StopCriteria:
    """Termination tests for run_flow; the first satisfied one wins.

    tau tolerances apply to the recorded (tangential) tension norms; the
    default l2 tolerance is 1e-6 scaled by the unit domain volume. A plateau
    is declared when the horizontal energy changes by less than
    plateau_delta across plateau_window steps.
    """

    tau_tol_l2: float = 1e-6
    tau_tol_sup: float = math.inf
    t_max: float = 50.0
    plateau_window: int = 1000
    plateau_delta: float = 1e-12


@dataclass
class FlowState:
    """One flow's full state; reproject_every=None disables re-projection."""

    u: MapField
    t: float = 0.0
    step: int = 0
    target: object = None
    mode: str = "extrinsic"
    reproject_every: object = 1

    def check(self):
        if self.mode == "extrinsic":
            self.target.check_tube(self.u.data)
        else:
            self.target.check_guard(self.u.data)


def _nonlinear(U, XU, YU, target, mode):
    """The non-Laplacian part of the tension, as a raw array."""
    if mode == "extrinsic":
        return -(
            target.hessP_contract(U, XU, XU) + target.hessP_contract(U, YU, YU)
        )
    return target.christoffel_contract(U, XU, XU) + target.christoffel_contract(
        U, YU, YU
    )


def tension(u, target, mode="extrinsic"):
    """Raw discrete tension field (see module docstring for the split)."""
    g = u.grid
    U = u.data
    XU = ops._apply_X(U, g)
    YU = ops._apply_Y(U, g)
    tau = ops._lap(U, g) + _nonlinear(U, XU, YU, target, mode)
    return MapField(g, tau)


def tangential_tension(u, target, mode="extrinsic"):
    """dP_u(tau) in extrinsic mode; the raw tension in a chart."""
    tau = tension(u, target, mode)
    if mode == "extrinsic":
        return MapField(u.grid, target.dP(u.data, tau.data))
    return tau


def _due(step, every):
    return every is not None and every > 0 and step % every == 0


def step_explicit(s, dt):
    """Forward Euler step u <- u + dt*tau(u), with periodic re-projection."""
    g = s.u.grid
    if dt > dt_max(g.h) * (1.0 + 1e-12):
        raise StabilityError(f"dt={dt:g} exceeds stability bound {dt_max(g.h):g}")
    tau = tension(s.u, s.target, s.mode)
    unew = s.u.data + dt * tau.data
    step = s.step + 1
    if s.mode == "extrinsic" and _due(step, s.reproject_every):
        unew = s.target.project(unew)
    out = FlowState(
        u=MapField(g, unew),
        t=s.t + dt,
        step=step,
        target=s.target,
        mode=s.mode,
        reproject_every=s.reproject_every,
    )
    out.check()
    return out


def _cg_heat(b, g, dt, tol, maxiter):
    """Conjugate gradient for (I - dt*L) x = b; L is symmetric NSD."""
    x = b.copy()
    r = b - (x - dt * ops._lap(x, g))
    p = r.copy()
    rs = float(np.vdot(r, r))
    goal = tol * math.sqrt(float(np.vdot(b, b)))
    for _ in range(maxiter):
        if math.sqrt(rs) <= goal:
            return x
        ap = p - dt * ops._lap(p, g)
        alpha = rs / float(np.vdot(p, ap))
        x = x + alpha * p
        r = r - alpha * ap
        rs_new = float(np.vdot(r, r))
        p = r + (rs_new / rs) * p
        rs = rs_new
    if math.sqrt(rs) <= goal:
        return x
    raise SolverError(
        f"conjugate gradient stalled at relative residual "
        f"{math.sqrt(rs) / max(goal / tol, 1e-300):.3e} after {maxiter} iterations"
    )


def step_imex(s, dt, tol=1e-10, maxiter=500):
    """Implicit step for the Laplacian, explicit for the nonlinearity.

    Solves (I - dt*L) u_new = u + dt*NL(u); unconditionally stable, so dt
    may exceed the explicit bound.
    """
    g = s.u.grid
    U = s.u.data
    XU = ops._apply_X(U, g)
    YU = ops._apply_Y(U, g)
    b = U + dt * _nonlinear(U, XU, YU, s.target, s.mode)
    unew = _cg_heat(b, g, dt, tol, maxiter)
    step = s.step + 1
    if s.mode == "extrinsic" and _due(step, s.reproject_every):
        unew = s.target.project(unew)
    out = FlowState(
        u=MapField(g, unew),
        t=s.t + dt,
        step=step,
        target=s.target,
        mode=s.mode,
        reproject_every=s.reproject_every,
    )
    out.check()
    return out


def _pointwise_norm(a):
    return np.sqrt(np.sum(a * a, axis=0))


def make_record(s, prev=None):
    """DiagnosticsRecord for the current state (tangential tension norms)."""
    g = s.u.grid
    E_H, E_R, E_total, _dens = energies(s.u, s.target, s.mode)
    taut = tangential_tension(s.u, s.target, s.mode).data
    tau_l2 = math.sqrt(max(ops._integrate(np.sum(taut * taut, axis=0), g), 0.0))
    tau_sup = float(np.max(_pointwise_norm(taut)))
    if s.mode == "extrinsic":
        rho = s.target.rho(s.u.data)
        rho_l2 = math.sqrt(max(ops._integrate(np.sum(rho * rho, axis=0), g), 0.0))
    else:
        rho_l2 = 0.0
    if prev is None:
        eh_slack = 0.0
        d1_resid = 0.0
    else:
        eh_slack = prev.E_H - E_H
        dt_rec = s.t - prev.t
        d1_resid = abs(
            (E_H - prev.E_H) / dt_rec + 0.5 * (prev.tau_l2 ** 2 + tau_l2 ** 2)
        )
    return DiagnosticsRecord(
        t=s.t,
        E_H=E_H,
        E_R=E_R,
        E_total=E_total,
        tau_l2=tau_l2,
        tau_sup=tau_sup,
        rho_l2=rho_l2,
        slacks={"eh_slack": eh_slack, "d1_resid": d1_resid},
    )


def run_flow(s, stop, record_every=1, integrator="explicit", dt=None):
    """Iterate steps until a stop criterion fires.

    Returns (final state, records). A record is taken every record_every
    steps and the criteria are evaluated on it; the final record carries the
    termination reason. Step failures raise FlowAbort with the partial
    records attached.
    """
    g = s.u.grid
    if dt is None:
        dt = dt_max(g.h)
    if integrator == "explicit":
        advance = step_explicit
    elif integrator == "imex":
        advance = step_imex
    else:
        raise ValueError(f"unknown integrator {integrator!r}")
    s.check()
    records = []
    eh_hist = []
    prev = None
    while True:
        if s.step % record_every == 0:
            rec = make_record(s, prev)
            records.append(rec)
            eh_hist.append((s.step, rec.E_H))
            prev = rec
            reason = _stop_reason(s, rec, eh_hist, stop)
            if reason:
                rec.reason = reason
                return s, records
        try:
            s = advance(s, dt)
        except (TubeViolationError, ChartGuardError, StabilityError, SolverError) as exc:
            raise FlowAbort(exc, s, records) from exc


def _stop_reason(s, rec, eh_hist, stop):
    if rec.tau_l2 <= stop.tau_tol_l2 and rec.tau_sup <= stop.tau_tol_sup:
        return "tau_tol"
    if s.t >= stop.t_max:
        return "t_max"
    # plateau: compare against the most recent record at least a window back
    for st, eh in reversed(eh_hist[:-1]):
        if s.step - st >= stop.plateau_window:
            if abs(eh - rec.E_H) < stop.plateau_delta:
                return "plateau"
            break
    return ""


def duhamel_picard(phi, t_horizon, k_max, target, mode="extrinsic", dt=None):
    """Picard iterates of the Duhamel formulation on [0, t_horizon].

    u_0 is the heat-propagated initial map; u_k(t) = u_0(t) minus the
    left-rectangle quadrature of the propagated nonlinearity of u_{k-1},
    reusing the same explicit propagator (first order, matching the
    quadrature). Returns the final-time iterates and the contraction ratios
    X_{k+1}/X_k, where X_k = sup_t [ sup_p sum_a |d^a| + sup_p sum_a |grad_H
    d^a| ] for d = u_k - u_{k-1}.
    """
    g = phi.grid
    if dt is None:
        dt = dt_max(g.h)
    m_steps = max(1, int(math.ceil(t_horizon / dt - 1e-12)))
    dt = t_horizon / m_steps

    def forcing(U):
        XU = ops._apply_X(U, g)
        YU = ops._apply_Y(U, g)
        # tau = L u - F, so the Duhamel correction subtracts propagated F
        return -_nonlinear(U, XU, YU, target, mode)

    traj0 = [phi.data.copy()]
    for _ in range(m_steps):
        traj0.append(ops._heat_step(traj0[-1], g, dt))

    iterates = [MapField(g, traj0[-1].copy())]
    ratios = []
    xs = []
    prev_traj = traj0
    for _k in range(1, k_max + 1):
        w = np.zeros_like(phi.data)
        traj = [traj0[0]]
        for m in range(m_steps):
            w = ops._heat_step(w + dt * forcing(prev_traj[m]), g, dt)
            traj.append(traj0[m + 1] - w)
        xk = 0.0
        for m in range(1, m_steps + 1):
            d = traj[m] - prev_traj[m]
            xd = ops._apply_X(d, g)
            yd = ops._apply_Y(d, g)
            a = float(np.max(np.sum(np.abs(d), axis=0)))
            b = float(np.max(np.sum(np.sqrt(xd * xd + yd * yd), axis=0)))
            xk = max(xk, a + b)
        xs.append(xk)
        iterates.append(MapField(g, traj[-1].copy()))
        prev_traj = traj
    for i in range(len(xs) - 1):
        ratios.append(xs[i + 1] / xs[i] if xs[i] > 0 else 0.0)
    return iterates, ratios


def reference_torus_map(grid, w=(1, 0, 0, 1), chart=False):
    """The linear-angle torus map; discretely pseudo-harmonic.

    Angles (2*pi*(w0 x + w1 y), 2*pi*(w2 x + w3 y)); with chart=True the raw
    angle fields are returned instead of the embedded components.
    """
    from .targets import CliffordTorus

    x, y = grid.x, grid.y
    shape = (grid.n, grid.n, grid.n)
    t0 = np.broadcast_to(2.0 * np.pi * (w[0] * x + w[1] * y), shape)
    t1 = np.broadcast_to(2.0 * np.pi * (w[2] * x + w[3] * y), shape)
    ang = np.stack([t0, t1])
    if chart:
        return MapField(grid, ang)
    return MapField(grid, CliffordTorus().from_angles(ang))


def initial_map(grid, target, mode="extrinsic", seed=0, winding=(1, 0, 0, 1),
                amplitude=0.3, z_amp=0.6):
    """Seeded smooth initial data adapted to the target.

    Coefficients are drawn before any grid evaluation (the same seed gives
    the same function at every resolution): linear angle terms carry the
    requested windings, trigonometric modes with p+q <= 3 perturb them, and
    an invariant_wave term supplies deck-compatible z-dependence. The result
    is mapped through the target's projection or squashed into its chart.
    """
    rng = np.random.default_rng(seed)
    x, y, z = grid.x, grid.y, grid.z
    shape = (grid.n, grid.n, grid.n)

    def drawn_channel():
        terms = []
        for p in range(0, 4):
            for q in range(0, 4):
                if p + q == 0 or p + q > 3:
                    continue
                amp = amplitude * rng.standard_normal(2) / (p + q)
                terms.append((p, q, amp[0], amp[1]))
        return terms

    def evaluate(terms):
        out = np.zeros(shape, dtype=float)
        for p, q, a_cos, a_sin in terms:
            arg = 2.0 * np.pi * (p * x + q * y)
            out = out + a_cos * np.cos(arg) + a_sin * np.sin(arg)
        return out

    name = getattr(target, "name", "")
    if name in ("clifford", "torus_chart"):
        terms0 = drawn_channel()
        terms1 = drawn_channel()
        wave = invariant_wave(x, y, z)
        ang0 = 2.0 * np.pi * (winding[0] * x + winding[1] * y) + evaluate(terms0)
        ang1 = 2.0 * np.pi * (winding[2] * x + winding[3] * y) + evaluate(terms1)
        ang0 = ang0 + z_amp * wave
        ang1 = ang1 - 0.7 * z_amp * wave
        ang = np.stack([np.broadcast_to(ang0, shape), np.broadcast_to(ang1, shape)])
        if name == "clifford":
            from .targets import CliffordTorus

            return MapField(grid, CliffordTorus().from_angles(ang))
        return MapField(grid, ang.copy())
    if name == "poincare":
        comps = []
        for i in range(2):
            raw = evaluate(drawn_channel())
            fac = 1.0 if i == 0 else -0.7
            raw = raw + fac * z_amp * invariant_wave(x, y, z)
            comps.append(0.55 * np.tanh(raw))
        return MapField(grid, np.stack([np.broadcast_to(c, shape) for c in comps]))
    if name == "sphere2":
        comps = []
        for i in range(3):
            raw = evaluate(drawn_channel())
            fac = (1.0, -0.7, 0.4)[i]
            comps.append(0.35 * raw + fac * 0.35 * z_amp * invariant_wave(x, y, z))
        v = np.stack([np.broadcast_to(c, shape) for c in comps])
        v[2] = v[2] + 1.0  # bias off the origin before projecting
        return MapField(grid, target.project(v))
    # euclidean: raw channels
    comps = []
    for i in range(target.K):
        raw = evaluate(drawn_channel())
        raw = raw + ((-0.7) ** i) * z_amp * invariant_wave(x, y, z)
        comps.append(raw)
    return MapField(grid, np.stack([np.broadcast_to(c, shape) for c in comps]))
