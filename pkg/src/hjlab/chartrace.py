"""Characteristic tracing and classification.

Three constructions:

* classical characteristics launched from a certified proximal subgradient,
  verified sample-by-sample through the unique-minimizer criterion;
* generalized characteristics from arbitrary points (including the initial
  time, via a ladder of start times t_h decreasing to 0) by forward stepping
  of the differential inclusion  dgamma/dt in co D_pH(t, gamma, D_x^+ u);
* the singular characteristic guaranteed at points with empty proximal
  subdifferential under quadratic Hamiltonians.

The inclusion stepper uses an Euler predictor with the minimal-norm element
of the velocity hull plus a singular-manifold corrector: when a secondary
minimizer basin sits within a step-proportional value gap, the step is
projected onto the exact two-basin tie point (secant in the direction of the
momentum jump).  Plain Euler lags O(dt) off the singular set, which would
make per-sample multiplicity certificates unattainable; for quadratic
Hamiltonians the forward singular characteristic is unique and attracting,
and the corrector realizes it.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np
from scipy import optimize

from . import flow as fl
from . import hamiltonian as ham
from . import subdiff as sd
from . import value as vl
from .errors import InconsistencyError, TheoremViolationError
from .hamiltonian import as_vector

REGULAR = "regular"
SINGULAR = "singular"
CLOSURE = "singular-closure"
UNKNOWN = "unknown"

CLASSICAL = "classical"
WEAKLY_SINGULAR = "weakly-singular"
STRONGLY_SINGULAR = "strongly-singular"
INCONCLUSIVE = "inconclusive"

# internal floor for value queries along traces; the public default guard
# t_min=1e-3 stays, but the start-time ladder reaches t_h = 3.125e-4
T_FLOOR = 1e-4


@dataclass
class CharacteristicTrace:
    times: np.ndarray             # (N,)
    positions: np.ndarray         # (N, n)
    momenta: list                 # per sample: (n,) or None where singular
    statuses: list                # per sample status string
    classification: str
    origin: tuple                 # (t0, x0)
    dt: float
    first_failure_time: float | None = None
    meta: dict = field(default_factory=dict)

    @property
    def dim(self):
        return self.positions.shape[1]

    def max_speed(self):
        d = np.diff(self.times)
        steps = np.linalg.norm(np.diff(self.positions, axis=0), axis=1)
        mask = d > 1e-15
        return float(np.max(steps[mask] / d[mask])) if np.any(mask) else 0.0

    def position_at(self, ts):
        """Linear interpolation of the space component."""
        ts = np.atleast_1d(np.asarray(ts, float))
        out = np.empty((len(ts), self.dim))
        for i in range(self.dim):
            out[:, i] = np.interp(ts, self.times, self.positions[:, i])
        return out

    def to_json_dict(self):
        t0, x0 = self.origin
        return {
            "origin": {"t": float(t0), "x": [float(v) for v in np.atleast_1d(x0)]},
            "dt": float(self.dt),
            "classification": self.classification,
            "samples": [
                {"t": float(self.times[i]),
                 "x": [float(v) for v in self.positions[i]],
                 "p": None if self.momenta[i] is None
                 else [float(v) for v in self.momenta[i]],
                 "status": self.statuses[i]}
                for i in range(len(self.times))
            ],
        }

    def to_csv(self, path):
        n = self.dim
        header = ",".join(["t"] + [f"x_{i+1}" for i in range(n)]
                          + [f"p_{i+1}" for i in range(n)] + ["status"])
        rows = [header]
        for i in range(len(self.times)):
            p = self.momenta[i]
            pvals = ["nan"] * n if p is None else [f"{v:.17g}" for v in p]
            rows.append(",".join([f"{self.times[i]:.17g}"]
                                 + [f"{v:.17g}" for v in self.positions[i]]
                                 + pvals + [self.statuses[i]]))
        with open(path, "w") as fh:
            fh.write("\n".join(rows) + "\n")


def minimal_norm_point(vs):
    """Minimal-norm element of the convex hull of the rows of vs."""
    vs = np.atleast_2d(np.asarray(vs, float))
    m, n = vs.shape
    if m == 1:
        return vs[0]
    if n == 1:
        lo, hi = float(np.min(vs)), float(np.max(vs))
        if lo <= 0.0 <= hi:
            return np.zeros(1)
        return np.array([lo if abs(lo) < abs(hi) else hi])
    w0 = np.full(m, 1.0 / m)
    res = optimize.minimize(
        lambda w: float(np.sum((w @ vs) ** 2)), w0, method="SLSQP",
        bounds=[(0.0, 1.0)] * m,
        constraints=[{"type": "eq", "fun": lambda w: np.sum(w) - 1.0}],
        options={"maxiter": 200, "ftol": 1e-14},
    )
    return res.x @ vs


def _trace_cfg(cfg):
    """Value config with the trace-internal floor."""
    return replace(cfg, t_min=min(cfg.t_min, T_FLOOR))


def _value(model, u0, t, x, lambda0, cfg, extra_gap=0.0):
    return vl.value_at(model, u0, t, x, lambda0=lambda0, cfg=cfg,
                       extra_gap=extra_gap)


def _locate_tie(model, u0, t, xa, mins_a, xb, mins_b, lambda0, cfg,
                iters=44):
    """Two-sided secant for the point on the segment [xa, xb] where the two
    minimizer basins tie.

    The basin values are C^1 along the segment with directional derivatives
    given by the basin momenta (envelope theorem); u itself is continuous
    and only the gradient jumps, so the crossing of the two linearizations
    converges to the tie point, certified by minimizer multiplicity.
    Returns (x_tie, mins_tie) or None.
    """
    e = xb - xa
    ya, yb = mins_a.best.point, mins_b.best.point
    sA, uA, gA = 0.0, mins_a.best.value, float(mins_a.best.momentum @ e)
    sB, uB, gB = 1.0, mins_b.best.value, float(mins_b.best.momentum @ e)
    for it in range(iters):
        denom = gA - gB
        if it < 2 or abs(denom) < 1e-14:
            s = 0.5 * (sA + sB)   # bisect first: anchors may sit far out
        else:
            s = (uB - uA + gA * sA - gB * sB) / denom
            if not (sA + 1e-15 < s < sB - 1e-15):
                s = 0.5 * (sA + sB)
        x_s = xa + s * e
        _, mins_s = _value(model, u0, t, x_s, lambda0, cfg)
        if mins_s.multiplicity >= 2:
            return x_s, mins_s
        y_s = mins_s.best.point
        g_s = float(mins_s.best.momentum @ e)
        if np.max(np.abs(y_s - ya)) <= np.max(np.abs(y_s - yb)):
            sA, uA, gA = s, mins_s.best.value, g_s
            ya = y_s
        else:
            sB, uB, gB = s, mins_s.best.value, g_s
            yb = y_s
        if (sB - sA) * float(np.linalg.norm(e)) < 1e-14 * (1 + np.linalg.norm(xa)):
            break
    return None


def _basin_value_at(model, u0, t, xq, y_anchor, width, lambda0, cfg):
    """Value of the minimizer basin near ``y_anchor`` for endpoint xq,
    computed by a restricted local scan; None when the basin's bottom is
    not interior to the window (basin vanished or migrated out)."""
    f, _ = vl._objective(model, u0, t, xq, width, cfg)
    lo, hi = y_anchor[0] - width, y_anchor[0] + width
    a, b, n = lo, hi, 65
    vbest = np.inf
    for _ in range(10):
        ys = np.linspace(a, b, n)[:, None]
        vals = f(ys)
        j = int(np.argmin(vals))
        yj = ys[j, 0]
        vbest = float(vals[j])
        tol = 1e-14 * (1.0 + abs(lo) + abs(hi))
        if yj <= lo + tol or yj >= hi - tol:
            return None          # bottom sits at the window edge: migrated
        h = ys[1, 0] - ys[0, 0]
        if h < 1e-9 * (1.0 + abs(yj)):
            break
        a, b, n = max(lo, yj - 2 * h), min(hi, yj + 2 * h), 33
    return vbest


def _try_snap(model, u0, t, x, mins, lambda0, cfg, dt, lam, reach,
              drift_est=0.0, force=False):
    """Probe both directions at step scale; if a probe crosses into another
    minimizer basin, snap onto the tie point between them.

    A probe "crosses" when the global value at the probe point undercuts
    the current basin's own local value there (computed by restricted
    minimization), which separates genuine basin changes from the smooth
    positional drift of one basin.  ``reach`` caps the displacement so the
    speed-bound invariant survives; ``drift_est``/``force`` come from a
    singular previous sample, whose shock motion the probe must cover.
    """
    best = mins.best
    va = ham.dp_h_batch(model, t, x[None, :], best.momentum[None, :])[0]
    if force and drift_est > 0.0:
        rho = 4.0 * drift_est   # tracking a known shock: tight bracket
    else:
        rho = 1.5 * dt * (1.0 + float(np.linalg.norm(va)))
    rho = min(float(reach), rho)
    if rho <= 0.0:
        return x, mins, False
    if model.dim == 1:
        dirs = [np.array([1.0]), np.array([-1.0])]
    else:
        vnorm = float(np.linalg.norm(va))
        if vnorm < 1e-12:
            return x, mins, False
        e = va / vnorm
        dirs = [e, -e]
    for e in dirs:
        xb = x + rho * e
        try:
            ub, mins_b = _value(model, u0, t, xb, lambda0, cfg)
        except Exception:
            continue
        if mins_b.multiplicity >= 2:
            hit = (xb, mins_b)
        else:
            sep = np.max(np.abs(mins_b.best.point - best.point))
            if sep <= 20 * max(mins.cluster_radius, mins_b.cluster_radius):
                continue
            if not force and model.dim == 1:
                w = max(4.0 * rho, 1e-3 * (1.0 + abs(best.point[0])))
                v_loc = _basin_value_at(model, u0, t, xb, best.point, w,
                                        lambda0, cfg)
                if v_loc is not None and ub >= v_loc - 0.5 * mins.value_gap:
                    continue
            hit = _locate_tie(model, u0, t, x, mins, xb, mins_b, lambda0,
                              cfg)
        if hit is not None:
            x_s, mins_s = hit
            if float(np.linalg.norm(x_s - x)) <= reach:
                return x_s, mins_s, True
    return x, mins, False


def _step_velocity(model, t, x, mins):
    entries = mins.global_entries()
    P = np.array([m.momentum for m in entries])
    X = np.repeat(x[None, :], len(entries), axis=0)
    vs = ham.dp_h_batch(model, t, X, P)
    return minimal_norm_point(vs)


def _euler_trace(model, u0, t0, x0, horizon, dt, lambda0, cfg, snap=True):
    """Forward stepping of the differential inclusion from (t0, x0)."""
    lam = lambda0
    times = [t0]
    t = t0
    while t + dt < horizon - 1e-12:
        t += dt
        times.append(t)
    if horizon - times[-1] > 1e-12:
        times.append(horizon)
    times = np.asarray(times)
    n = model.dim
    xs = np.empty((len(times), n))
    moms: list = []
    stats: list = []
    x = as_vector(x0, n)
    prev_drift = 0.0
    prev_singular = False
    for k, t in enumerate(times):
        _, mins = _value(model, u0, t, x, lambda0, cfg)
        if snap and mins.multiplicity < 2:
            # per-step displacement budget keeps the speed-bound invariant
            if k == 0:
                reach = lam * dt
            else:
                used = float(np.linalg.norm(x - xs[k - 1]))
                reach = max(0.0, 1.02 * lam * (t - times[k - 1]) - used)
            x, mins, _ = _try_snap(model, u0, t, x, mins, lambda0, cfg,
                                   dt, lam, reach, drift_est=prev_drift,
                                   force=prev_singular)
        xs[k] = x
        singular = mins.multiplicity >= 2
        stats.append(SINGULAR if singular else REGULAR)
        moms.append(None if singular else mins.best.momentum.copy())
        if k + 1 < len(times):
            step = times[k + 1] - t
            v = _step_velocity(model, t, x, mins)
            if singular:
                # selected velocity may lag the shock by up to the hull
                # spread; the next step's probe must cover that drift
                entries = mins.global_entries()
                P = np.array([m.momentum for m in entries])
                vs = ham.dp_h_batch(model, t,
                                    np.repeat(x[None, :], len(entries), axis=0), P)
                spread = float(np.max(np.linalg.norm(vs - v[None, :], axis=1)))
                prev_drift = spread * step
            else:
                prev_drift = 0.0
            prev_singular = singular
            x = x + step * v
    return times, xs, moms, stats


def generalized_char(model, u0, t_start, x0, horizon, dt=0.01, lambda0=None,
                     cfg=vl.DEFAULT_CONFIG, ladder_h0=1e-2, ladder_levels=6,
                     cauchy_tol=1e-3, snap=True):
    """Generalized characteristic from (t_start, x0) up to the horizon.

    For t_start = 0 the trace is the finest of a ladder of traces started at
    t_h = ladder_h0 * 2^-j; the ladder members are checked mutually Cauchy
    (sup-distance decreasing below ``cauchy_tol``), realizing the
    limit-of-characteristics construction for initial-time starts.
    """
    x0 = as_vector(x0, model.dim)
    lam = lambda0 if lambda0 is not None else \
        2.0 * ham.velocity_sup(model, u0.lipschitz)
    tcfg = _trace_cfg(cfg)
    if t_start > 0:
        t0 = max(t_start, T_FLOOR)
        times, xs, moms, stats = _euler_trace(model, u0, t0, x0, horizon, dt,
                                              lam, tcfg, snap=snap)
        return CharacteristicTrace(
            times=times, positions=xs, momenta=moms, statuses=stats,
            classification=INCONCLUSIVE, origin=(t_start, x0), dt=dt,
        )
    traces = []
    for j in range(ladder_levels):
        t_h = max(ladder_h0 * 2.0 ** (-j), T_FLOOR)
        traces.append(_euler_trace(model, u0, t_h, x0, horizon, dt, lam,
                                   tcfg, snap=snap))
    dists = []
    for (ta, xa, _, _), (tb, xb, _, _) in zip(traces[:-1], traces[1:]):
        lo = max(ta[0], tb[0])
        grid = ta[ta >= lo - 1e-15]
        pa = np.stack([np.interp(grid, ta, xa[:, i])
                       for i in range(model.dim)], axis=1)
        pb = np.stack([np.interp(grid, tb, xb[:, i])
                       for i in range(model.dim)], axis=1)
        dists.append(float(np.max(np.linalg.norm(pa - pb, axis=1))))
    if dists and dists[-1] > cauchy_tol:
        raise InconsistencyError(
            f"start-time ladder is not Cauchy: sup distances {dists}"
        )
    times, xs, moms, stats = traces[-1]
    # prepend the initial-time origin sample; its status is outside the
    # classification's reach
    times = np.r_[0.0, times]
    xs = np.vstack([x0[None, :], xs])
    moms = [None] + moms
    stats = [UNKNOWN] + stats
    return CharacteristicTrace(
        times=times, positions=xs, momenta=moms, statuses=stats,
        classification=INCONCLUSIVE, origin=(0.0, x0), dt=dt,
        first_failure_time=None,
        meta={"ladder_sup_distances": dists,
              "ladder_start_times": [ladder_h0 * 2.0 ** (-j)
                                     for j in range(ladder_levels)]},
    )


def classical_char_from_subgradient(model, u0, y0, p0, tau, certificate,
                                    regime, lambda0=None,
                                    cfg=vl.DEFAULT_CONFIG, samples=24,
                                    match_tol=1e-4, margin=0.02):
    """Integrate the characteristic from a certified (y0, p0) and verify the
    unique-minimizer property at every checkable sample.

    tau must respect the certificate's theorem bounds:
    tau <= min(t0, r/lambda0, (2 c0 / K)(1 - margin)).
    """
    if not certificate.verified:
        raise ValueError("certificate must be a verified proximal subgradient")
    lam = lambda0 if lambda0 is not None else regime.lambda0
    tau_max = min(regime.t0, certificate.r / lam,
                  (2.0 * regime.c0 / max(certificate.K, 1e-12)) * (1.0 - margin))
    if tau > tau_max * (1 + 1e-9):
        raise ValueError(
            f"tau={tau:.4g} exceeds the certified bound {tau_max:.4g} "
            f"(t0={regime.t0:.3g}, r/lambda0={certificate.r / lam:.3g}, "
            f"2c0/K={2 * regime.c0 / certificate.K:.3g})"
        )
    y0 = as_vector(y0, model.dim)
    arc = fl.integrate_flow(model, 0.0, y0, p0, tau, steps=int(samples))
    tcfg = _trace_cfg(cfg)
    stats = []
    moms = []
    failure = None
    for i, t in enumerate(arc.times):
        if t < T_FLOOR:
            stats.append(UNKNOWN)
            moms.append(arc.momenta[i].copy())
            continue
        _, mins = _value(model, u0, t, arc.positions[i], lam, tcfg)
        if mins.multiplicity >= 2:
            stats.append(SINGULAR)
            moms.append(None)
            failure = failure if failure is not None else t
        else:
            ok = np.max(np.abs(mins.best.point - y0)) <= \
                match_tol * (1.0 + float(np.max(np.abs(y0))))
            stats.append(REGULAR)
            moms.append(arc.momenta[i].copy())
            if not ok and failure is None:
                failure = t
    if failure is None:
        cls = CLASSICAL
    else:
        checked = [s for s in stats if s != UNKNOWN]
        cls = STRONGLY_SINGULAR if all(s == SINGULAR for s in checked) \
            else WEAKLY_SINGULAR
    return CharacteristicTrace(
        times=arc.times, positions=arc.positions, momenta=moms,
        statuses=stats, classification=cls, origin=(0.0, y0),
        dt=arc.step, first_failure_time=failure,
        meta={"p0": p0, "certificate": certificate},
    )


def extract_subgradient_from_char(model, u0, trace, k_max=1e6, r=0.5,
                                  steps=48):
    """Initial momentum of a classical trace via the boundary value solve,
    post-verified as a proximal subgradient."""
    if trace.classification != CLASSICAL:
        raise InconsistencyError(
            f"trace is {trace.classification}; extraction needs a classical one"
        )
    t0 = float(trace.times[0])
    t1 = float(trace.times[-1])
    shot = fl.shoot_bvp(model, t1 - t0, trace.positions[0],
                        trace.positions[-1], steps=steps, t_start=t0)
    p0 = shot.p0
    for K in sd.k_ladder(k_max):
        cert = sd.test_proximal_subgradient(u0, trace.positions[0], p0, K, r)
        if cert.verified:
            return p0
    raise InconsistencyError(
        "extracted momentum is not a proximal subgradient at any ladder K; "
        "the trace was misclassified"
    )


def probe_window(model, u0, t_c, x_c, w, lambda0=None, cfg=vl.DEFAULT_CONFIG,
                 nodes=81):
    """Search a space-time window around (t_c, x_c) for a certified singular
    point.

    Returns (found, witness_x_t, c11_ok): rows of the window are scanned for
    minimizer multiplicity and for gradient drops beyond the semiconcave
    smooth bound; a steep cell is then bisected to the two-basin tie point
    and certified by multiplicity there.  ``c11_ok`` reports whether the
    sampled gradient Lipschitz estimate stays at the smooth scale (the basis
    for a confident "no singular point here").
    """
    if model.dim != 1:
        raise NotImplementedError("window probes are 1-D")
    tcfg = _trace_cfg(cfg)
    lam = lambda0 if lambda0 is not None else \
        2.0 * ham.velocity_sup(model, u0.lipschitz)
    c2 = model.c2 if model.c2 > 0 else 1.0
    t_hi = 0.999 * model.box.t_max
    rows = sorted({min(t_hi, max(T_FLOOR * 1.5, t_c - 0.5 * w)),
                   min(t_hi, t_c + 0.25 * w)})
    c11_ok = True
    for t in rows:
        xs = np.linspace(x_c - w, x_c + w, nodes)
        h = xs[1] - xs[0]
        grads = np.full(nodes, np.nan)
        for i, xv in enumerate(xs):
            try:
                _, mins = _value(model, u0, t, xv, lam, tcfg)
            except Exception:
                continue
            if mins.multiplicity >= 2:
                return True, (t, xv), c11_ok
            grads[i] = mins.best.momentum[0]
        drop_tol = h * (2.5 * c2 / t + 1.0)
        lip_tol = 3.0 * c2 / t + 3.0
        for i in range(nodes - 1):
            if np.isnan(grads[i]) or np.isnan(grads[i + 1]):
                continue
            drop = grads[i] - grads[i + 1]
            if abs(drop) / h > lip_tol:
                c11_ok = False
            if drop > drop_tol:
                hit = _bisect_shock(model, u0, t, xs[i], xs[i + 1], lam, tcfg)
                if hit is not None:
                    return True, (t, hit), False
    return False, None, c11_ok


def _bisect_shock(model, u0, t, xl, xr, lam, cfg, iters=60):
    """Locate the minimizer-basin crossing inside a steep cell and certify
    it by multiplicity; returns the singular x or None."""
    _, ml = _value(model, u0, t, xl, lam, cfg)
    _, mr = _value(model, u0, t, xr, lam, cfg)
    if ml.multiplicity >= 2:
        return xl
    if mr.multiplicity >= 2:
        return xr
    yl, yr = ml.best.point, mr.best.point
    if np.max(np.abs(yl - yr)) <= 10 * max(ml.cluster_radius, mr.cluster_radius):
        return None  # same basin: steep but smooth
    a, b = xl, xr
    for _ in range(iters):
        mid = 0.5 * (a + b)
        _, mm = _value(model, u0, t, mid, lam, cfg)
        if mm.multiplicity >= 2:
            return mid
        if np.max(np.abs(mm.best.point - yl)) <= np.max(np.abs(mm.best.point - yr)):
            a = mid
        else:
            b = mid
        if b - a < 1e-13 * (1.0 + abs(xl)):
            break
    mid = 0.5 * (a + b)
    _, mm = _value(model, u0, t, mid, lam, cfg)
    return mid if mm.multiplicity >= 2 else None


def classify_trace(model, u0, trace, window, lambda0=None,
                   cfg=vl.DEFAULT_CONFIG, probe_max=8, arc_steps=48):
    """Classify a trace as classical / weakly-singular / strongly-singular.

    strongly-singular: every checkable sample is singular.  weakly-singular:
    regular samples exist but every probed window around them contains a
    certified singular point.  classical: regular samples, clean windows
    (C^{1,1} estimate at the smooth scale), and the trace matches the
    characteristic arc of its endpoints.  Anything else: inconclusive.
    """
    lam = lambda0 if lambda0 is not None else \
        2.0 * ham.velocity_sup(model, u0.lipschitz)
    idx = [i for i, t in enumerate(trace.times)
           if t >= T_FLOOR and trace.statuses[i] != UNKNOWN]
    if not idx:
        return INCONCLUSIVE
    stats = [trace.statuses[i] for i in idx]
    if all(s == SINGULAR for s in stats):
        trace.classification = STRONGLY_SINGULAR
        return STRONGLY_SINGULAR
    reg_idx = [i for i in idx if trace.statuses[i] != SINGULAR]
    probes = reg_idx[:: max(1, len(reg_idx) // probe_max)][:probe_max]
    found_all = True
    clean_all = True
    for i in probes:
        found, _, c11 = probe_window(model, u0, trace.times[i],
                                     trace.positions[i][0], window,
                                     lambda0=lam, cfg=cfg)
        if found:
            trace.statuses[i] = CLOSURE
            clean_all = False
        else:
            found_all = False
            if not c11:
                clean_all = False
    if found_all:
        trace.classification = WEAKLY_SINGULAR
        return WEAKLY_SINGULAR
    if any(s == SINGULAR for s in stats):
        trace.classification = INCONCLUSIVE
        return INCONCLUSIVE
    if clean_all:
        i0, i1 = idx[0], idx[-1]
        t0, t1 = trace.times[i0], trace.times[i1]
        try:
            shot = fl.shoot_bvp(model, t1 - t0, trace.positions[i0],
                                trace.positions[i1], steps=arc_steps,
                                t_start=t0)
        except Exception:
            trace.classification = INCONCLUSIVE
            return INCONCLUSIVE
        ts = trace.times[i0:i1 + 1]
        arc_pos = np.stack([np.interp(ts, shot.arc.times,
                                      shot.arc.positions[:, d])
                            for d in range(model.dim)], axis=1)
        err = float(np.max(np.abs(arc_pos - trace.positions[i0:i1 + 1])))
        tol = max(1e-7, 3.0 * lam * trace.dt)
        if err <= tol:
            trace.classification = CLASSICAL
            return CLASSICAL
    trace.classification = INCONCLUSIVE
    return INCONCLUSIVE


def singular_char_from_empty_subdiff(model, u0, y0, horizon, dt=0.01,
                                     lambda0=None, cfg=vl.DEFAULT_CONFIG,
                                     estimate=None, momentum_radius=None,
                                     subdiff_r=0.5):
    """Trace the singular generalized characteristic from a point with empty
    proximal subdifferential (quadratic Hamiltonians).

    The estimate is recomputed unless supplied; a non-singular outcome
    raises TheoremViolationError rather than being silently accepted.
    """
    if model.kind not in ("eikonal", "quadratic-form"):
        raise ValueError("the singular-generation theorem needs a quadratic "
                         "Hamiltonian")
    y0 = as_vector(y0, model.dim)
    if estimate is None:
        rad = momentum_radius if momentum_radius is not None else u0.lipschitz
        estimate = sd.estimate_proximal_subdifferential(
            u0, y0, r=subdiff_r, momentum_radius=rad)
    if not estimate.is_empty:
        raise ValueError(
            f"proximal subdifferential at {y0} is not empty; "
            f"{len(estimate.entries)} momenta verified"
        )
    trace = generalized_char(model, u0, 0.0, y0, horizon, dt=dt,
                             lambda0=lambda0, cfg=cfg)
    checked = [s for i, s in enumerate(trace.statuses)
               if trace.times[i] >= T_FLOOR and s != UNKNOWN]
    if not checked or not all(s == SINGULAR for s in checked):
        raise TheoremViolationError(
            "empty proximal subdifferential but the ladder trace is not "
            "everywhere singular: numerical breakdown, not accepted"
        )
    trace.classification = STRONGLY_SINGULAR
    return trace


def measure_intersection_time(model, u0, y0, p0, horizon, dt=0.01,
                              lambda0=None, cfg=vl.DEFAULT_CONFIG,
                              match_tol=1e-4):
    """First time the unique-minimizer check fails along the classical
    characteristic from (y0, p0); inf when it survives the whole horizon."""
    y0 = as_vector(y0, model.dim)
    lam = lambda0 if lambda0 is not None else \
        2.0 * ham.velocity_sup(model, u0.lipschitz)
    steps = max(8, int(math.ceil(horizon / dt)))
    arc = fl.integrate_flow(model, 0.0, y0, p0, horizon, steps=steps)
    tcfg = _trace_cfg(cfg)
    for i, t in enumerate(arc.times):
        if t < T_FLOOR:
            continue
        _, mins = _value(model, u0, t, arc.positions[i], lam, tcfg)
        if mins.multiplicity >= 2:
            return float(t)
        if np.max(np.abs(mins.best.point - y0)) > \
                match_tol * (1.0 + float(np.max(np.abs(y0)))):
            return float(t)
    return math.inf
