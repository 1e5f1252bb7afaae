"""Characteristic flow: fixed-step RK4 integration of the Hamiltonian system
and two-point boundary value solving by damped-Newton shooting.

The system integrated is

    dxi/dt = D_p H(t, xi, p),      dp/dt = -D_x H(t, xi, p).

Arcs are short (small-time regime), so a classical 4th-order one-step method
is used rather than a symplectic one: endpoint accuracy dominates and the
energy invariant is monitored, not enforced.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import hamiltonian as ham
from .errors import BoundaryExitError, ShootingError
from .hamiltonian import as_vector


@dataclass
class PhaseArc:
    """A sampled solution (xi(.), p(.)) of the characteristic system."""

    times: np.ndarray          # (N+1,)
    positions: np.ndarray      # (N+1, n)
    momenta: np.ndarray        # (N+1, n)
    step: float

    @property
    def dim(self):
        return self.positions.shape[1]

    def energy(self, model):
        """H along the arc, one value per sample."""
        out = np.empty(len(self.times))
        for i, t in enumerate(self.times):
            out[i] = ham.h_batch(model, t, self.positions[i][None, :],
                                 self.momenta[i][None, :])[0]
        return out

    def energy_drift(self, model):
        e = self.energy(model)
        return float(np.max(np.abs(e - e[0])))

    def midpoint_residual(self, model):
        """Max norm of the discrete Hamiltonian-system residual at interval
        midpoints; O(dt^2) for a convergent scheme."""
        dt = np.diff(self.times)
        xm = 0.5 * (self.positions[1:] + self.positions[:-1])
        pm = 0.5 * (self.momenta[1:] + self.momenta[:-1])
        worst = 0.0
        for i in range(len(dt)):
            tm = 0.5 * (self.times[i] + self.times[i + 1])
            dp = ham.dp_h_batch(model, tm, xm[i][None, :], pm[i][None, :])[0]
            dx = ham.dx_h_batch(model, tm, xm[i][None, :], pm[i][None, :])[0]
            r1 = (self.positions[i + 1] - self.positions[i]) / dt[i] - dp
            r2 = (self.momenta[i + 1] - self.momenta[i]) / dt[i] + dx
            worst = max(worst, float(np.linalg.norm(r1)), float(np.linalg.norm(r2)))
        return worst

    def to_csv(self, path):
        """Columns: t, x_1..x_n, p_1..p_n with round-trip formatting."""
        n = self.dim
        header = ",".join(["t"] + [f"x_{i+1}" for i in range(n)]
                          + [f"p_{i+1}" for i in range(n)])
        rows = [header]
        for i, t in enumerate(self.times):
            vals = [t, *self.positions[i], *self.momenta[i]]
            rows.append(",".join(f"{v:.17g}" for v in vals))
        with open(path, "w") as fh:
            fh.write("\n".join(rows) + "\n")

    def to_json_dict(self):
        return {
            "dt": self.step,
            "samples": [
                {"t": float(t), "x": list(map(float, self.positions[i])),
                 "p": list(map(float, self.momenta[i]))}
                for i, t in enumerate(self.times)
            ],
        }


@dataclass(frozen=True)
class SpeedBound:
    """Velocity bound Lambda_0 = 2 sup |D_p H| over box x momentum ball."""

    lambda0: float
    lipschitz_u: float


@dataclass(frozen=True)
class ShootResult:
    p0: np.ndarray
    arc: PhaseArc
    within_uniqueness_ball: bool | None = None


def speed_bound(model, lipschitz_u, samples=4096, seed=1234):
    sup = ham.velocity_sup(model, lipschitz_u, samples=samples, seed=seed)
    return SpeedBound(lambda0=2.0 * sup, lipschitz_u=float(lipschitz_u))


def _rhs(model, t, X, P):
    return ham.dp_h_batch(model, t, X, P), -ham.dx_h_batch(model, t, X, P)


def _rk4_step(model, t, X, P, dt):
    k1x, k1p = _rhs(model, t, X, P)
    k2x, k2p = _rhs(model, t + 0.5 * dt, X + 0.5 * dt * k1x, P + 0.5 * dt * k1p)
    k3x, k3p = _rhs(model, t + 0.5 * dt, X + 0.5 * dt * k2x, P + 0.5 * dt * k2p)
    k4x, k4p = _rhs(model, t + dt, X + dt * k3x, P + dt * k3p)
    Xn = X + dt / 6.0 * (k1x + 2 * k2x + 2 * k3x + k4x)
    Pn = P + dt / 6.0 * (k1p + 2 * k2p + 2 * k3p + k4p)
    return Xn, Pn


def integrate_flow_batch(model, t0, Y0, P0, t1, steps, check_box=True):
    """RK4 over a batch of initial conditions in lockstep.

    Returns (times (N+1,), X (N+1, m, n), P (N+1, m, n)).
    """
    Y0 = np.atleast_2d(np.asarray(Y0, float))
    P0 = np.atleast_2d(np.asarray(P0, float))
    steps = int(steps)
    if steps < 1:
        raise ValueError("steps must be >= 1")
    if not t1 > t0:
        raise ValueError("require t1 > t0")
    dt = (t1 - t0) / steps
    times = t0 + dt * np.arange(steps + 1)
    X = np.empty((steps + 1,) + Y0.shape)
    P = np.empty_like(X)
    X[0], P[0] = Y0, P0
    for k in range(steps):
        X[k + 1], P[k + 1] = _rk4_step(model, times[k], X[k], P[k], dt)
        if check_box and not np.all(model.box.contains(times[k + 1], X[k + 1])):
            raise BoundaryExitError(
                f"arc left the validity box at t={times[k + 1]:.6g}",
                exit_time=times[k + 1],
            )
    return times, X, P


def integrate_flow(model, t0, y0, p0, t1, steps):
    """Integrate one characteristic from (y0, p0) on [t0, t1]."""
    y0 = as_vector(y0, model.dim)
    p0 = as_vector(p0, model.dim)
    times, X, P = integrate_flow_batch(model, t0, y0[None, :], p0[None, :],
                                       t1, steps)
    return PhaseArc(times=times, positions=X[:, 0, :], momenta=P[:, 0, :],
                    step=(t1 - t0) / steps)


def _endpoints(model, t0, y, P0, t1, steps):
    """Positions at t1 for a batch of momenta launched from the same y.
    Box violations are reported via BoundaryExitError."""
    m = P0.shape[0]
    Y0 = np.repeat(y[None, :], m, axis=0)
    _, X, _ = integrate_flow_batch(model, t0, Y0, P0, t1, steps)
    return X[-1]


def shoot_bvp(model, t, y, x, p_init_guess=None, steps=48, t_start=0.0,
              lambda0=None, endpoint_tol=1e-9, max_iter=60):
    """Solve xi(t_start)=y, xi(t_start+t)=x for the initial momentum.

    Damped Newton on the endpoint map with one-sided finite-difference
    Jacobians; the initial guess is the dual momentum of the mean velocity,
    exact for the eikonal model.  When ``lambda0`` is supplied the
    small-time uniqueness precondition |x-y| <= lambda0*t is recorded on the
    result object rather than enforced: outside the ball the solver returns
    the first root found and flags it.
    """
    y = as_vector(y, model.dim)
    x = as_vector(x, model.dim)
    if not t > 0:
        raise ValueError("require a positive time of flight")
    n = model.dim
    t1 = t_start + t
    ball_ok = None
    if lambda0 is not None:
        ball_ok = bool(np.linalg.norm(x - y) <= lambda0 * t)
    if p_init_guess is not None:
        p = as_vector(p_init_guess, n)
    else:
        p = ham.dual_momentum(model, t_start, y, (x - y) / t)

    def residual(P0):
        try:
            ends = _endpoints(model, t_start, y, P0, t1, steps)
        except BoundaryExitError:
            return None
        return ends - x[None, :]

    F = residual(p[None, :])
    if F is None:
        raise ShootingError("initial shooting arc leaves the validity box")
    f = F[0]
    fnorm = float(np.linalg.norm(f))
    for _ in range(max_iter):
        if fnorm <= endpoint_tol:
            arc = integrate_flow(model, t_start, y, p, t1, steps)
            return ShootResult(p0=p, arc=arc, within_uniqueness_ball=ball_ok)
        # batched one-sided FD Jacobian: base + n perturbed momenta
        h = 1e-7 * (1.0 + np.abs(p))
        trials = np.repeat(p[None, :], n + 1, axis=0)
        for j in range(n):
            trials[j + 1, j] += h[j]
        R = residual(trials)
        if R is None:
            raise ShootingError("shooting arc leaves the validity box")
        J = (R[1:] - R[0]).T / h
        try:
            delta = np.linalg.solve(J, -R[0])
        except np.linalg.LinAlgError:
            raise ShootingError("singular shooting Jacobian")
        alpha = 1.0
        for _ in range(12):
            cand = p + alpha * delta
            Fc = residual(cand[None, :])
            if Fc is not None:
                cnorm = float(np.linalg.norm(Fc[0]))
                if cnorm < fnorm:
                    p, f, fnorm = cand, Fc[0], cnorm
                    break
            alpha *= 0.5
        else:
            raise ShootingError(
                f"shooting stalled at residual {fnorm:.3g}; endpoints likely "
                f"outside the small-time uniqueness ball"
            )
    raise ShootingError(
        f"no convergence in {max_iter} iterations (residual {fnorm:.3g})"
    )
