"""Action functional A_t(y, x): least Lagrangian cost among arcs joining y at
the start time to x at time t.

In the small-time regime the boundary value problem has a unique solution, so
the action is computed by shooting plus composite Simpson quadrature on the
integrator's own grid.  Along a characteristic the velocity is D_p H, hence
by convex duality the Lagrangian needs no inner maximization there:

    L(t, xi, dxi) = p . D_p H(t, xi, p) - H(t, xi, p).

Models with constant coefficient matrix and no potential ("free" models) have
straight-line minimizers and the closed form  A_t(y,x) = <A^{-1} d, d>/(2 t)
with d = x - y; that fast path backs the batched evaluations used by the
value module and is cross-checked against the shooting route in tests.  A
direct piecewise-linear arc-space minimizer is retained as a further
independent oracle (``direct_minimizer_action``).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import optimize

from . import flow as fl
from . import hamiltonian as ham
from .errors import ConfigError, ShootingError
from .hamiltonian import as_vector


@dataclass
class ActionResult:
    value: float
    arc: fl.PhaseArc
    grad_y: np.ndarray


@dataclass(frozen=True)
class ActionRegime:
    """Small-time regime in which the action is C^{1,1} and convex up to a
    quadratic: valid for t in (0, t0] inside balls of radius lambda0*t."""

    lambda0: float
    t0: float
    c0: float


def lagrangian_along(model, times, X, P):
    """L at the nodes of a batch of arcs: X, P of shape (N+1, m, n)."""
    N1, m, _ = X.shape
    out = np.empty((N1, m))
    for k in range(N1):
        dp = ham.dp_h_batch(model, times[k], X[k], P[k])
        h = ham.h_batch(model, times[k], X[k], P[k])
        out[k] = np.einsum("ij,ij->i", P[k], dp) - h
    return out


def _simpson_weights(steps, dt):
    w = np.ones(steps + 1)
    w[1:-1:2] = 4.0
    w[2:-1:2] = 2.0
    return w * dt / 3.0


def action_value(model, t, y, x, t_start=0.0, steps=48, lambda0=None):
    """Action between (t_start, y) and (t_start + t, x) with its y-gradient.

    grad_y = -D_q L(t_start, xi(0), dxi(0)), evaluated through the Legendre
    module as a cross-check of the identity grad_y = -p(0).
    """
    steps = int(steps)
    if steps < 8:
        raise ConfigError("quadrature needs at least 8 integration steps")
    if steps % 2:
        steps += 1
    y = as_vector(y, model.dim)
    x = as_vector(x, model.dim)
    shot = fl.shoot_bvp(model, t, y, x, steps=steps, t_start=t_start,
                        lambda0=lambda0)
    arc = shot.arc
    L = lagrangian_along(model, arc.times,
                         arc.positions[:, None, :], arc.momenta[:, None, :])[:, 0]
    value = float(_simpson_weights(steps, arc.step) @ L)
    qdot0 = ham.dp_h_batch(model, arc.times[0], arc.positions[0][None, :],
                           arc.momenta[0][None, :])[0]
    grad_y = -ham.dual_momentum(model, t_start, y, qdot0)
    return ActionResult(value=value, arc=arc, grad_y=grad_y)


def _shoot_batch(model, t, Ys, x, steps, t_start):
    """Newton shooting for many start points against one target, in lockstep.

    Trial arcs skip the box check (iterates may wander); the accepted arcs
    are re-integrated with it on.  Returns (P0, times, X, P).
    """
    m, n = Ys.shape
    t1 = t_start + t
    D = (x[None, :] - Ys) / t
    if model._a_inv is not None:
        P0 = D @ model._a_inv.T
    else:
        P0 = np.array([ham.dual_momentum(model, t_start, Ys[i], D[i])
                       for i in range(m)])

    def endpoints(Y, P):
        _, X, _ = fl.integrate_flow_batch(model, t_start, Y, P, t1, steps,
                                          check_box=False)
        return X[-1]

    F = endpoints(Ys, P0) - x[None, :]
    for _ in range(60):
        norms = np.linalg.norm(F, axis=1)
        live = norms > 1e-9
        if not np.any(live):
            break
        idx = np.nonzero(live)[0]
        h = 1e-7 * (1.0 + np.abs(P0[idx]))
        # one batched integration for all FD columns of all live rows
        trials_P = np.repeat(P0[idx], n, axis=0)
        trials_Y = np.repeat(Ys[idx], n, axis=0)
        for j in range(n):
            trials_P[j::n, j] += h[:, j]
        ends = endpoints(trials_Y, trials_P)
        for row, i in enumerate(idx):
            J = np.empty((n, n))
            for j in range(n):
                J[:, j] = (ends[row * n + j] - (F[i] + x)) / h[row, j]
            try:
                P0[i] = P0[i] + np.linalg.solve(J, -F[i])
            except np.linalg.LinAlgError:
                raise ShootingError("singular Jacobian in batched shooting")
        F[idx] = endpoints(Ys[idx], P0[idx]) - x[None, :]
    else:
        bad = int(np.sum(np.linalg.norm(F, axis=1) > 1e-9))
        raise ShootingError(f"batched shooting: {bad} arcs did not converge")
    times, X, P = fl.integrate_flow_batch(model, t_start, Ys, P0, t1, steps)
    return P0, times, X, P


def action_batch(model, t, Ys, x, t_start=0.0, steps=32):
    """Vectorized action for many start points y against one endpoint x.

    Returns (values (m,), p_start (m,n), p_end (m,n)).  Uses the closed form
    for free models, batched shooting + Simpson otherwise.
    """
    Ys = np.atleast_2d(np.asarray(Ys, float))
    x = as_vector(x, model.dim)
    if model.has_free_action:
        D = x[None, :] - Ys
        P = (D @ model._a_inv.T) / t
        vals = 0.5 * np.einsum("ij,ij->i", P, D)
        return vals, P, P.copy()
    steps = int(steps)
    if steps % 2:
        steps += 1
    P0, times, X, P = _shoot_batch(model, t, Ys, x, steps, t_start)
    L = lagrangian_along(model, times, X, P)
    vals = _simpson_weights(steps, times[1] - times[0]) @ L
    return vals, P[0], P[-1]


def check_action_convexity(model, t, x, radius, c0, samples=64, seed=2025,
                           steps=32):
    """Midpoint-convexity test of y -> A_t(y, x) - (c0/t)|y|^2 on random
    collinear triples in the ball of the given radius around x.

    Returns (ok, worst_gap): the most negative midpoint gap found; ok means
    no gap below -1e-9 at the problem's scale.
    """
    x = as_vector(x, model.dim)
    samples = int(samples)
    if radius <= 0 or samples < 3:
        return True, 0.0
    rng = np.random.default_rng(seed)
    U = rng.standard_normal((samples, model.dim))
    U /= np.maximum(np.linalg.norm(U, axis=1, keepdims=True), 1e-300)
    r1 = radius * (2.0 * rng.random(samples) - 1.0)
    r2 = radius * (2.0 * rng.random(samples) - 1.0)
    Y1 = x[None, :] + U * r1[:, None]
    Y2 = x[None, :] + U * r2[:, None]
    Ym = 0.5 * (Y1 + Y2)
    allY = np.vstack([Y1, Y2, Ym])
    vals, _, _ = action_batch(model, t, allY, x, steps=steps)
    g = vals - (c0 / t) * np.einsum("ij,ij->i", allY, allY)
    g1, g2, gm = g[:samples], g[samples:2 * samples], g[2 * samples:]
    gaps = 0.5 * (g1 + g2) - gm
    worst = float(np.min(gaps))
    scale = 1.0 + float(np.max(np.abs(g)))
    return worst >= -1e-9 * scale, worst


def check_action_c11(model, t, x, radius, samples=64, seed=2025, steps=32):
    """Sampled Lipschitz estimate of y -> D_y A_t(y, x) in the ball; returns
    the estimate (0 for a degenerate radius)."""
    x = as_vector(x, model.dim)
    samples = int(samples)
    if radius <= 0 or samples < 2:
        return 0.0
    rng = np.random.default_rng(seed)
    Y = x[None, :] + radius * (2.0 * rng.random((samples, model.dim)) - 1.0) \
        / np.sqrt(model.dim)
    _, P0, _ = action_batch(model, t, Y, x, steps=steps)
    G = -P0  # grad_y = -p(0)
    best = 0.0
    for i in range(samples):
        d = np.linalg.norm(Y - Y[i], axis=1)
        g = np.linalg.norm(G - G[i], axis=1)
        mask = d > 1e-12
        if np.any(mask):
            best = max(best, float(np.max(g[mask] / d[mask])))
    return best


def default_regime(model, lipschitz_u, horizon):
    """ActionRegime with the documented defaults: c0 = 0.4*c1 for quadratic
    kinds, t0 = min(horizon, R/(2*lambda0)) with R the box radius.  Callers
    should validate with check_action_convexity."""
    lam = 2.0 * ham.velocity_sup(model, lipschitz_u)
    if model.kind in ("eikonal", "quadratic-form"):
        c1 = model.c1
    else:
        c1 = 1.0  # generic models: caller-tuned; validated empirically
    t0 = min(float(horizon), model.box.radius / (2.0 * lam))
    return ActionRegime(lambda0=lam, t0=t0, c0=0.4 * c1)


def direct_minimizer_action(model, t, y, x, segments=64, t_start=0.0):
    """Independent action oracle: minimize the discrete Lagrangian cost over
    piecewise-linear arcs with fixed endpoints (cross-check for the shooting
    route; much slower)."""
    y = as_vector(y, model.dim)
    x = as_vector(x, model.dim)
    n = model.dim
    dt = t / segments
    tm = t_start + dt * (np.arange(segments) + 0.5)

    def cost_and_grad(z):
        nodes = np.vstack([y, z.reshape(segments - 1, n), x])
        mids = 0.5 * (nodes[1:] + nodes[:-1])
        Q = (nodes[1:] - nodes[:-1]) / dt
        Lv = np.empty(segments)
        Pstar = np.empty((segments, n))
        for k in range(segments):
            res = ham.legendre(model, tm[k], mids[k], Q[k])
            Lv[k] = res.lagrangian_value
            Pstar[k] = res.maximizer
        total = float(np.sum(Lv) * dt)
        # d/dnode_k: D_q L differences plus the D_x L midpoint terms
        dxL = np.empty((segments, n))
        for k in range(segments):
            dxL[k] = -ham.dx_h_batch(model, tm[k], mids[k][None, :],
                                     Pstar[k][None, :])[0]
        grad = np.empty((segments - 1, n))
        for k in range(segments - 1):
            grad[k] = (Pstar[k] - Pstar[k + 1]) + 0.5 * dt * (dxL[k] + dxL[k + 1])
        return total, grad.ravel()

    z0 = np.linspace(y, x, segments + 1)[1:-1].ravel()
    res = optimize.minimize(cost_and_grad, z0, jac=True, method="L-BFGS-B",
                            options={"maxiter": 400, "ftol": 1e-14,
                                     "gtol": 1e-12})
    return float(res.fun)
