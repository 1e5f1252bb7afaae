"""Viscosity solution of the Cauchy problem through the variational formula

    u(t, x) = min_y [ u0(y) + A_t(y, x) ],

with all clustered global minimizers reported.  Multiplicity of the minimizer
set is the exact differentiability criterion, so singularity detection is a
statement about minimizer counts, not about gradient jumps of an interpolant.

The minimization runs a deterministic multi-level zoom: a coarse scan of the
search ball followed by branching refinement of every basin that could still
contain a global minimizer at the current resolution (pruning uses a rigorous
Lipschitz bound of the objective, so symmetric or late-separating minimizer
pairs survive to the level where they resolve).  A separate dense-scan oracle
``hopf_1d`` provides the independent check for the 1-D eikonal case.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

from . import action as ac
from . import hamiltonian as ham
from .errors import DomainError, NumericalError
from .hamiltonian import as_vector


@dataclass
class InitialDatum:
    """Initial value u0 with its evaluation rule and a Lipschitz estimate
    valid on the model's box (used for momentum balls and search radii).

    ``kinks`` lists points where u0 is not differentiable.  Minimizer basins
    that bottom out exactly at a kink can hide behind an adjacent smooth
    basin at any fixed scan resolution (the barrier between them may be
    arbitrarily shallow), so the search seeds them explicitly."""

    fn: object                 # callable rows (m, n) -> (m,)
    kind: str = "custom"
    lipschitz: float = 1.0
    name: str = ""
    kinks: object = ()         # sequence of kink points

    def kink_array(self, dim):
        ks = np.asarray(list(self.kinks), dtype=float)
        if ks.size == 0:
            return np.empty((0, dim))
        if ks.ndim == 1:
            ks = ks[:, None] if dim == 1 else ks[None, :]
        return ks

    def value(self, y):
        y = np.atleast_1d(np.asarray(y, float))
        return float(self.fn(y[None, :])[0])

    def check_lipschitz(self, box, samples=400, seed=7):
        """Sampled Lipschitz verification on the box; returns the worst
        sampled ratio (should be <= self.lipschitz)."""
        rng = np.random.default_rng(seed)
        n = box.dim
        Y1 = box.lo + rng.random((samples, n)) * (box.hi - box.lo)
        Y2 = box.lo + rng.random((samples, n)) * (box.hi - box.lo)
        num = np.abs(self.fn(Y1) - self.fn(Y2))
        den = np.maximum(np.linalg.norm(Y1 - Y2, axis=1), 1e-300)
        return float(np.max(num / den))


@dataclass(frozen=True)
class Minimizer:
    point: np.ndarray
    value: float
    momentum: np.ndarray       # dual momentum p(t) transported to time t


@dataclass
class MinimizerSet:
    """Clustered global minimizers of y -> u0(y) + A_t(y, x), sorted by
    value.

    Multiplicity counting is two-scale.  Entries tie when their values agree
    to ``value_gap``, a machine-precision threshold: genuine multiple
    minimizers (symmetric pairs, shock ties) agree essentially exactly,
    whereas near-minimizers that merely fall inside the reporting tolerance
    (e.g. oscillation pockets accumulating at a C^1 datum's flat minimum)
    sit strictly above.  Tied entries must also be separated by more than
    ``cluster_radius``, which includes the width sqrt(2 t value_gap) a
    single basin of curvature ~1/t spreads over at that value resolution.
    Entries within ``report_gap`` are listed for shock detection but do not
    affect the multiplicity."""

    minimizers: list
    cluster_radius: float
    value_gap: float
    report_gap: float = 0.0

    def __len__(self):
        return len(self.minimizers)

    @property
    def best(self):
        return self.minimizers[0]

    def global_entries(self):
        v0 = self.minimizers[0].value
        return [m for m in self.minimizers if m.value <= v0 + self.value_gap]

    @property
    def multiplicity(self):
        return len(self.global_entries())


@dataclass
class ValueField:
    """u(t, .) sampled on a 1-D grid with per-node singularity flags and
    gradient estimates (NaN where flagged)."""

    t: float
    xs: np.ndarray
    u: np.ndarray
    singular: np.ndarray
    gradients: np.ndarray

    @property
    def singular_count(self):
        return int(np.sum(self.singular))

    def to_csv(self, path):
        header = "t,x_1,u,singular,du_1"
        rows = [header]
        for i in range(len(self.xs)):
            vals = (f"{self.t:.17g}", f"{self.xs[i]:.17g}", f"{self.u[i]:.17g}",
                    str(int(self.singular[i])), f"{self.gradients[i]:.17g}")
            rows.append(",".join(vals))
        with open(path, "w") as fh:
            fh.write("\n".join(rows) + "\n")

    def to_json_dict(self):
        return {
            "t": self.t,
            "x": [float(v) for v in self.xs],
            "u": [float(v) for v in self.u],
            "singular": [bool(v) for v in self.singular],
            "du": [float(v) for v in self.gradients],
        }


@dataclass(frozen=True)
class ValueConfig:
    scan_nodes: int = 257          # coarse scan per dimension (1-D)
    scan_nodes_nd: int = 41
    refine_nodes: int = 17
    refine_nodes_nd: int = 7
    target_step: float = 1e-8      # refinement stops below max(this, rel*radius)
    target_step_rel: float = 1e-8
    value_gap_rel: float = 1e-7    # eps_v = value_gap_rel * (1 + |u|)
    safety: float = 1.5            # search radius = safety * lambda0 * t
    t_min: float = 1e-3            # initial-time questions route to subdiff
    max_levels: int = 60
    max_boxes: int = 48
    max_evals: int = 200_000
    gap_safety: float = 1.3
    shoot_steps: int = 24


DEFAULT_CONFIG = ValueConfig()


# ---------------------------------------------------------------------------
# deterministic multi-level zoom minimization


@dataclass
class _ZoomBox:
    center: np.ndarray
    half: float
    h_parent: float
    done: bool = False


@dataclass
class _Candidate:
    y: np.ndarray
    v: float
    h: float
    edge: bool = False


def _grid(center, half, count, dim):
    axes = [np.linspace(center[i] - half, center[i] + half, count)
            for i in range(dim)]
    if dim == 1:
        return axes[0][:, None]
    mesh = np.meshgrid(*axes, indexing="ij")
    return np.stack([m.ravel() for m in mesh], axis=1)


def _local_minima_1d(vals):
    v = vals
    left = np.r_[True, v[1:] <= v[:-1]]
    right = np.r_[v[:-1] <= v[1:], True]
    return np.nonzero(left & right)[0]


def _minimize_over_ball(objective, center, radius, lip_bound, cfg, dim,
                        extra_gap=0.0, seeds=()):
    """All near-global minimizers of ``objective`` on the L-inf ball.

    Pruning keeps every node whose value is within a rigorous Lipschitz gap
    of the running minimum; basins visible as sampled local minima branch
    into their own refinement boxes, so symmetric or late-separating pairs
    survive to the level where they resolve.  ``seeds`` are exact candidate
    points (typically datum kinks) that participate regardless of whether
    the scan resolves their basin.  Returns (candidates, eps_y, evals).
    """
    target = max(cfg.target_step, cfg.target_step_rel * max(1.0, radius))
    coarse = cfg.scan_nodes if dim == 1 else cfg.scan_nodes_nd
    refine = cfg.refine_nodes if dim == 1 else cfg.refine_nodes_nd
    boxes = [_ZoomBox(center=np.asarray(center, float), half=float(radius),
                      h_parent=np.inf)]
    finals: list[_Candidate] = []
    vmin = np.inf
    evals = 0
    for y, v in seeds:
        finals.append(_Candidate(y=np.asarray(y, float), v=float(v),
                                 h=0.5 * target))
        vmin = min(vmin, float(v))
    ball_lo = np.asarray(center, float) - radius
    ball_hi = np.asarray(center, float) + radius
    for level in range(cfg.max_levels):
        live = [b for b in boxes if not b.done]
        if not live:
            break
        new_cands: list[_Candidate] = []
        for b in live:
            if level == 0:
                count = coarse
            else:
                h_want = max(b.h_parent / 4.0, target)
                count = int(np.ceil(2.0 * b.half / h_want)) + 1
                count = int(np.clip(count, refine, 257 if dim == 1 else 17))
            pts = _grid(b.center, b.half, count, dim)
            vals = objective(pts)
            evals += len(vals)
            if evals > cfg.max_evals:
                raise NumericalError("minimization evaluation budget exceeded")
            h = 2.0 * b.half / (count - 1)
            vmin = min(vmin, float(np.min(vals)))
            gap = cfg.gap_safety * lip_bound * h \
                + 4.0 * cfg.value_gap_rel * (1.0 + abs(vmin)) + extra_gap
            keep = vals <= vmin + gap
            if dim == 1:
                li = _local_minima_1d(vals)
                # a minimum on a refinement-box edge may be a slope artifact
                # or a merged box cutting through a descent: spawn around it
                # but never let it finalize as a basin representative
                at_lo = b.center[0] - b.half <= ball_lo[0] + 1e-15 * radius
                at_hi = b.center[0] + b.half >= ball_hi[0] - 1e-15 * radius
                edge_idx = set()
                if level > 0 and not at_lo:
                    edge_idx.add(0)
                if level > 0 and not at_hi:
                    edge_idx.add(count - 1)
                sel = li[keep[li]]
            else:
                edge_idx = set()
                sel = np.nonzero(keep)[0]
                sel = sel[np.argsort(vals[sel])]
                thin = []
                for j in sel:
                    if all(np.max(np.abs(pts[j] - pts[k])) > 1.9 * h
                           for k in thin):
                        thin.append(j)
                    if len(thin) >= 12:
                        break
                sel = np.asarray(thin, dtype=int)
            import os as _os
            if _os.environ.get("HJLAB_ZOOM_DEBUG") == "2":
                print(f"    box c={b.center[0]:.6e} half={b.half:.3e} "
                      f"count={count} vmin_box={float(np.min(vals)):.3e} "
                      f"nkeep={int(np.sum(keep))} nsel={len(sel)}")
            order = np.argsort(vals[sel])
            for j in sel[order][:12]:
                new_cands.append(_Candidate(y=pts[j].copy(), v=float(vals[j]),
                                            h=h, edge=int(j) in edge_idx))
        # prune candidates globally, then split converged from live
        floor = 4.0 * cfg.value_gap_rel * (1.0 + abs(vmin)) + extra_gap
        new_cands = [c for c in new_cands
                     if c.v <= vmin + cfg.gap_safety * lip_bound * c.h + floor]
        new_cands.sort(key=lambda c: c.v)
        next_boxes = []
        for c in new_cands:
            if c.h <= target and not c.edge:
                finals.append(c)
            else:
                next_boxes.append(_ZoomBox(center=c.y, half=2.0 * c.h,
                                           h_parent=min(c.h, 2.0 * c.h)))
        # cap in value order (next_boxes inherit the candidates' sort), then
        # merge overlapping refinement boxes (1-D: interval union)
        next_boxes = next_boxes[: cfg.max_boxes]
        if dim == 1 and len(next_boxes) > 1:
            next_boxes.sort(key=lambda b: b.center[0])
            merged = [next_boxes[0]]
            for b in next_boxes[1:]:
                last = merged[-1]
                if b.center[0] - b.half <= last.center[0] + last.half:
                    lo = min(last.center[0] - last.half, b.center[0] - b.half)
                    hi = max(last.center[0] + last.half, b.center[0] + b.half)
                    merged[-1] = _ZoomBox(center=np.array([0.5 * (lo + hi)]),
                                          half=0.5 * (hi - lo),
                                          h_parent=min(last.h_parent, b.h_parent))
                else:
                    merged.append(b)
            next_boxes = merged
        boxes = next_boxes
        import os as _os
        if _os.environ.get("HJLAB_ZOOM_DEBUG"):
            print(f"  level {level}: cands={len(new_cands)} boxes={len(boxes)} "
                  f"finals={len(finals)} vmin={vmin:.3e}")
        if not boxes:
            break
    for b in boxes:  # level cap hit: keep best known point of leftover boxes
        if not b.done:
            finals.append(_Candidate(y=b.center, v=float(objective(
                b.center[None, :])[0]), h=b.h_parent))
            evals += 1
    if not finals:
        raise NumericalError("zoom minimization produced no candidates")
    finals.sort(key=lambda c: c.v)
    vbest = finals[0].v
    floor = cfg.value_gap_rel * (1.0 + abs(vbest))
    keep_gap = max(floor, extra_gap)
    kept = [c for c in finals if c.v <= vbest + keep_gap]
    eps_y = 2.0 * max(c.h for c in kept)
    # cluster: best value wins, chain by distance
    reps: list[_Candidate] = []
    for c in kept:
        if all(np.max(np.abs(c.y - r.y)) > eps_y for r in reps):
            reps.append(c)
    return reps, eps_y, evals


# ---------------------------------------------------------------------------
# public operations


def _search_radius(model, u0, t, lambda0, cfg):
    lam = lambda0 if lambda0 is not None else \
        2.0 * ham.velocity_sup(model, u0.lipschitz)
    return cfg.safety * lam * t, lam


def _objective(model, u0, t, x, radius, cfg):
    """Objective over rows plus a rigorous Lipschitz bound on the ball."""
    if model.has_free_action:
        ainv = model._a_inv
        ainv_norm = float(np.linalg.eigvalsh(ainv)[-1])

        def f(Y):
            D = x[None, :] - Y
            return u0.fn(Y) + 0.5 * np.einsum("ij,ij->i", D @ ainv.T, D) / t

        lip = u0.lipschitz + ainv_norm * radius / t
        return f, lip

    def f(Y):
        vals, _, _ = ac.action_batch(model, t, Y, x, steps=cfg.shoot_steps)
        return u0.fn(Y) + vals

    c1 = model.c1 if model.c1 > 0 else 0.3
    lip = u0.lipschitz + 1.5 * radius / (c1 * t)
    return f, lip


def value_at(model, u0, t, x, lambda0=None, cfg=DEFAULT_CONFIG,
             extra_gap=0.0):
    """Value u(t, x) together with all clustered global minimizers."""
    x = as_vector(x, model.dim)
    if t < cfg.t_min:
        raise DomainError(
            f"value_at not defined below t_min={cfg.t_min}; initial-time "
            f"questions route through the proximal subdifferential module"
        )
    radius, _ = _search_radius(model, u0, t, lambda0, cfg)
    if not (model.box.contains(t, x - radius) and
            model.box.contains(t, x + radius)):
        raise DomainError(
            f"search ball of radius {radius:.3g} around x={x} escapes the "
            f"validity box; declare a larger box"
        )
    f, lip = _objective(model, u0, t, x, radius, cfg)
    kinks = u0.kink_array(model.dim) if isinstance(u0, InitialDatum) \
        else np.empty((0, model.dim))
    seeds = []
    if len(kinks):
        inside = np.max(np.abs(kinks - x[None, :]), axis=1) < radius
        if np.any(inside):
            kv = f(kinks[inside])
            seeds = list(zip(kinks[inside], kv))
    reps, eps_y, _ = _minimize_over_ball(f, x, radius, lip, cfg, model.dim,
                                         extra_gap=extra_gap, seeds=seeds)
    edge = radius - 2.0 * (2.0 * radius / (cfg.scan_nodes - 1))
    if np.max(np.abs(reps[0].y - x)) >= edge:
        raise DomainError(
            "variational minimizer sits on the search-ball boundary; the "
            "declared Lipschitz bound or box is too small"
        )
    ys = np.array([r.y for r in reps])
    if model.has_free_action:
        P_end = ((x[None, :] - ys) @ model._a_inv.T) / t
    else:
        _, _, P_end = ac.action_batch(model, t, ys, x, steps=cfg.shoot_steps)
    vbest = reps[0].v
    # machine-scale tie threshold: evaluation roundoff of the objective's
    # terms plus the value noise induced by the finite argmin resolution
    u0_reps = u0.fn(ys) if isinstance(u0, InitialDatum) else np.zeros(len(ys))
    scale = 1.0 + abs(vbest) + float(np.max(np.abs(u0_reps))) \
        + float(np.max(np.abs(np.array([r.v for r in reps]) - u0_reps)))
    c2 = model.c2 if model.c2 > 0 else 1.0
    h_ref = max(r.h for r in reps)
    eps_tie = 4096.0 * np.finfo(float).eps * scale \
        + 4.0 * (c2 / t) * h_ref * h_ref
    # position floor: one basin of curvature >= O(1/t) spreads over
    # sqrt(2 t eps) at value resolution eps; closer "twins" are one basin
    eps_pos = max(eps_y, 3.0 * np.sqrt(2.0 * t * eps_tie / c2))
    merged: list = []
    for i, r in enumerate(reps):
        hit = None
        for entry in merged:
            if np.max(np.abs(r.y - entry[0].y)) <= eps_pos:
                hit = entry
                break
        if hit is None:
            merged.append([r, P_end[i]])
    mins = MinimizerSet(
        minimizers=[Minimizer(point=r.y, value=r.v, momentum=p)
                    for r, p in merged],
        cluster_radius=eps_pos, value_gap=eps_tie, report_gap=extra_gap,
    )
    return vbest, mins


def is_singular(model, u0, t, x, lambda0=None, cfg=DEFAULT_CONFIG):
    """Multiplicity >= 2 of the clustered global minimizers, with the
    MinimizerSet returned as the certificate."""
    _, mins = value_at(model, u0, t, x, lambda0=lambda0, cfg=cfg)
    return mins.multiplicity >= 2, mins


def superdiff_x(model, u0, t, x, lambda0=None, cfg=DEFAULT_CONFIG):
    """Transported dual momenta of all global minimizers; the spatial
    superdifferential is their convex hull (singleton at regular points)."""
    _, mins = value_at(model, u0, t, x, lambda0=lambda0, cfg=cfg)
    return [m.momentum for m in mins.global_entries()]


def solve_grid(model, u0, times, window, resolution, lambda0=None,
               cfg=DEFAULT_CONFIG):
    """Per-point value/singularity sweep over a 1-D plot window.

    Nodes are flagged singular by minimizer multiplicity; additionally both
    endpoints of any cell whose gradient drop exceeds the semiconcave smooth
    bound are flagged (a shock sits inside such a cell even when no node
    lands on it exactly).
    """
    if model.dim != 1:
        raise NotImplementedError("grid sweeps are 1-D; use value_at for n>1")
    fields = []
    lo, hi = float(window[0]), float(window[1])
    resolution = int(resolution)
    if resolution < 2:
        raise ValueError("resolution must be >= 2")
    for t in times:
        xs = np.linspace(lo, hi, resolution)
        u = np.empty(resolution)
        sing = np.zeros(resolution, dtype=bool)
        grad = np.full(resolution, np.nan)
        for i, xv in enumerate(xs):
            ui, mins = value_at(model, u0, t, xv, lambda0=lambda0, cfg=cfg)
            u[i] = ui
            if mins.multiplicity >= 2:
                sing[i] = True
            else:
                grad[i] = mins.best.momentum[0]
        h = xs[1] - xs[0]
        c2 = model.c2 if model.c2 > 0 else 1.0
        drop_tol = h * (2.5 * c2 / t + 1.0)
        for i in range(resolution - 1):
            if not sing[i] and not sing[i + 1]:
                if grad[i] - grad[i + 1] > drop_tol:
                    sing[i] = sing[i + 1] = True
        grad[sing] = np.nan
        fields.append(ValueField(t=float(t), xs=xs, u=u, singular=sing,
                                 gradients=grad))
    return fields


def _rows_fn(u0):
    fn = u0.fn if isinstance(u0, InitialDatum) else u0
    def g(ys):
        return fn(np.asarray(ys, float)[:, None])
    return g


def hopf_1d(u0, t, x, search_interval, resolution=2001):
    """Independent 1-D eikonal oracle: dense minimization of
    u0(y) + (x - y)^2 / (2 t) with recursive window refinement.

    Self-contained on purpose -- no shooting, no action module -- so tests
    can use it as the reference the variational engine is checked against.
    """
    g = _rows_fn(u0)
    lo, hi = float(search_interval[0]), float(search_interval[1])
    x = float(np.atleast_1d(x)[0])

    def obj(ys):
        return g(ys) + (x - ys) ** 2 / (2.0 * t)

    windows = [(lo, hi, int(resolution))]
    best = np.inf
    if isinstance(u0, InitialDatum) and len(u0.kink_array(1)):
        ks = u0.kink_array(1)[:, 0]
        ks = ks[(ks >= lo) & (ks <= hi)]
        if len(ks):
            best = float(np.min(obj(ks)))
    h_scale = max(1.0, abs(x), abs(hi - lo))
    for _ in range(40):
        next_windows = []
        done = True
        for a, b, res in windows:
            ys = np.linspace(a, b, res)
            v = obj(ys)
            h = (b - a) / (res - 1)
            best = min(best, float(np.min(v)))
            if h <= 1e-10 * h_scale:
                continue
            done = False
            slope = float(np.max(np.abs(np.diff(v)))) / h if res > 1 else 0.0
            gap = 1.5 * slope * h + 1e-12 * (1.0 + abs(best))
            idx = _local_minima_1d(v)
            idx = idx[v[idx] <= best + gap]
            idx = idx[np.argsort(v[idx])][:6]
            for j in idx:
                next_windows.append((max(lo, ys[j] - 2 * h),
                                     min(hi, ys[j] + 2 * h), 65))
        if done or not next_windows:
            break
        # merge overlapping windows, keep the lowest few
        next_windows.sort()
        merged = [list(next_windows[0])]
        for a, b, res in next_windows[1:]:
            if a <= merged[-1][1]:
                merged[-1][1] = max(merged[-1][1], b)
            else:
                merged.append([a, b, res])
        windows = [tuple(w) for w in merged[:12]]
    return best
