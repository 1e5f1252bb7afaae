"""Proximal K-subgradient testing for the initial datum.

A vector p0 is a proximal K-subgradient of u0 at y0 when

    u0(y) >= u0(y0) + <p0, y - y0> - (K/2) |y - y0|^2     near y0.

Violations of this inequality concentrate at small |y - y0| (for the
alpha-power data the worst violation sits at |y - y0| ~ K^-2 with magnitude
~ K^-3), so samplers refine geometrically toward the base point and the
acceptance slack is two-scale: the documented absolute slack capped by a
relative slack proportional to the size of the tested terms.  Certificates
carry one-sided error: a ``refuted`` verdict exhibits a witness sample, a
``verified`` verdict can be wrong only below the sampler's resolution.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .value import InitialDatum

_EPS = np.finfo(float).eps


@dataclass(frozen=True)
class ProximalCertificate:
    point: np.ndarray
    p: np.ndarray
    K: float
    r: float
    verdict: str                      # 'verified' | 'refuted'
    witness_point: np.ndarray | None
    witness_violation: float
    n_samples: int
    sampler: str

    @property
    def verified(self):
        return self.verdict == "verified"

    def to_json_dict(self):
        return {
            "point": [float(v) for v in self.point],
            "p": [float(v) for v in self.p],
            "K": float(self.K),
            "r": float(self.r),
            "verdict": self.verdict,
            "witness": None if self.witness_point is None
            else [float(v) for v in self.witness_point],
            "witness_violation": float(self.witness_violation),
            "n_samples": self.n_samples,
            "sampler": self.sampler,
        }


@dataclass
class SubdiffEstimate:
    """Outer approximation of the proximal subdifferential: every grid
    momentum verified at some ladder K, with the least verifying K each."""

    point: np.ndarray
    entries: list            # [(p (n,), K)]
    r: float
    k_ladder: np.ndarray

    @property
    def is_empty(self):
        return len(self.entries) == 0

    def points(self):
        return np.array([p for p, _ in self.entries]) if self.entries \
            else np.empty((0, len(self.point)))

    def interval(self):
        """1-D hull [min p, max p]; None when empty."""
        if self.is_empty:
            return None
        ps = self.points()[:, 0]
        return float(np.min(ps)), float(np.max(ps))

    def best(self):
        """Entry with the smallest verifying K (ties: smallest |p|)."""
        return min(self.entries,
                   key=lambda e: (e[1], float(np.linalg.norm(e[0]))))


def _fn(u0):
    return u0.fn if isinstance(u0, InitialDatum) else u0


def k_ladder(k_max=1e6):
    """Geometric constant ladder {1, 4, 16, ...} up to and including k_max."""
    ks = [1.0]
    while ks[-1] * 4.0 < k_max * (1.0 + 1e-12):
        ks.append(ks[-1] * 4.0)
    if ks[-1] < k_max:
        ks.append(float(k_max))
    return np.array(ks)


def geometric_samples(center, r, levels=40, per_shell=1, uniform=33, seed=0):
    """Sample points in B_r(center) with geometric refinement toward the
    center: shells of radius r * 2^-j plus an optional uniform backbone.

    1-D shells place +/- points (log-spaced inside the shell when
    ``per_shell`` > 1); higher dimensions combine axis directions with
    seeded random ones.  Deterministic for a fixed seed.
    """
    center = np.atleast_1d(np.asarray(center, float))
    n = center.size
    rng = np.random.default_rng(seed)
    radii = []
    for j in range(levels):
        hi = r * 2.0 ** (-j)
        if per_shell == 1:
            radii.append([hi])
        else:
            lo = hi * 0.5
            base = np.exp(np.linspace(np.log(lo), np.log(hi), per_shell))
            jitter = 1.0 + 0.05 * (rng.random(per_shell) - 0.5)
            radii.append(np.clip(base * jitter, lo, hi))
    radii = np.concatenate([np.asarray(row) for row in radii])
    if n == 1:
        pts = np.concatenate([radii, -radii])[:, None]
    else:
        dirs = []
        for i in range(n):
            e = np.zeros(n); e[i] = 1.0
            dirs.extend([e, -e])
        extra = rng.standard_normal((6, n))
        extra /= np.linalg.norm(extra, axis=1, keepdims=True)
        dirs = np.vstack([dirs, extra])
        pts = (radii[:, None, None] * dirs[None, :, :]).reshape(-1, n)
    if uniform:
        if n == 1:
            grid = np.linspace(-r, r, uniform)[:, None]
        else:
            grid = (2.0 * rng.random((uniform, n)) - 1.0) * r / np.sqrt(n)
        pts = np.vstack([pts, grid])
    pts = pts + center[None, :]
    keep = np.linalg.norm(pts - center, axis=1) <= r * (1 + 1e-12)
    return pts[keep]


def _violations(fn, y0, u0y0, Z, P, K):
    """Violation and slack matrices over momenta P (k, n) x samples Z (m, n).

    Returns (viol, slack), both (k, m): a momentum is refuted when some
    sample has viol > slack.
    """
    D = Z - y0[None, :]
    dd = np.einsum("ij,ij->i", D, D)
    uz = fn(Z)
    du = uz - u0y0
    DP = P @ D.T                       # (k, m)
    lhs = du[None, :] - DP + 0.5 * K * dd[None, :]
    viol = -lhs
    slack_abs = 1e-12 * (1.0 + abs(u0y0))
    scale = np.abs(du)[None, :] + np.abs(DP) + 0.5 * K * dd[None, :]
    slack_rel = 1e-6 * scale + 64.0 * _EPS * (np.abs(uz) + abs(u0y0))[None, :]
    slack = np.minimum(slack_abs, slack_rel)
    return viol, slack


def test_proximal_subgradient(u0, y0, p0, K, r, sampler=None):
    """Check the quadratic-minorant inequality for (y0, p0, K) on B_r(y0).

    The default sampler refines geometrically toward y0 (40 halvings), since
    proximal violations are asymptotic at y -> y0.
    """
    fn = _fn(u0)
    y0 = np.atleast_1d(np.asarray(y0, float))
    p0 = np.atleast_1d(np.asarray(p0, float))
    if r <= 0 or K < 0:
        raise ValueError("need r > 0 and K >= 0")
    if sampler is None:
        Z = geometric_samples(y0, r, levels=40, per_shell=2, uniform=65,
                              seed=0)
        desc = "geometric(levels=40, per_shell=2, uniform=65)"
    else:
        Z = np.atleast_2d(np.asarray(sampler(y0, r), float))
        desc = getattr(sampler, "description", "custom")
    u0y0 = float(fn(y0[None, :])[0])
    viol, slack = _violations(fn, y0, u0y0, Z, p0[None, :], float(K))
    margin = (viol - slack)[0]
    worst = int(np.argmax(margin))
    if margin[worst] > 0:
        return ProximalCertificate(
            point=y0, p=p0, K=float(K), r=float(r), verdict="refuted",
            witness_point=Z[worst], witness_violation=float(viol[0, worst]),
            n_samples=len(Z), sampler=desc,
        )
    return ProximalCertificate(
        point=y0, p=p0, K=float(K), r=float(r), verdict="verified",
        witness_point=None,
        witness_violation=float(max(np.max(viol[0]), 0.0)),
        n_samples=len(Z), sampler=desc,
    )


def gradient_candidates(u0, y, steps=(1e-5, 1e-6, 1e-7)):
    """Central-difference gradient probes of u0 at y; at C^2 points these
    land within O(h^2) of the true gradient, which a bare uniform momentum
    grid generally misses."""
    fn = _fn(u0)
    y = np.atleast_1d(np.asarray(y, float))
    n = y.size
    out = []
    for h_rel in steps:
        g = np.empty(n)
        for i in range(n):
            h = h_rel * (1.0 + abs(y[i]))
            zp = y.copy(); zp[i] += h
            zm = y.copy(); zm[i] -= h
            g[i] = (fn(zp[None, :])[0] - fn(zm[None, :])[0]) / (2.0 * h)
        out.append(g)
    return out


def default_momentum_grid(radius, count=41, dim=1):
    """Uniform grid covering the momentum ball of the given radius."""
    if dim == 1:
        return np.linspace(-radius, radius, count)[:, None]
    axes = [np.linspace(-radius, radius, count) for _ in range(dim)]
    mesh = np.meshgrid(*axes, indexing="ij")
    pts = np.stack([m.ravel() for m in mesh], axis=1)
    return pts[np.linalg.norm(pts, axis=1) <= radius * (1 + 1e-12)]


def estimate_proximal_subdifferential(u0, y0, k_max=1e6, r=1.0, p_grid=None,
                                      sampler=None,
                                      include_gradient_candidates=True,
                                      momentum_radius=None):
    """All grid momenta verified for some K in the geometric ladder, each
    reported with its least verifying K (outer approximation)."""
    fn = _fn(u0)
    y0 = np.atleast_1d(np.asarray(y0, float))
    n = y0.size
    if p_grid is None:
        rad = momentum_radius if momentum_radius is not None else 1.0
        p_grid = default_momentum_grid(rad, dim=n)
    P = np.atleast_2d(np.asarray(p_grid, float))
    if include_gradient_candidates:
        P = np.vstack([P] + [g[None, :] for g in gradient_candidates(u0, y0)])
    if sampler is None:
        Z = geometric_samples(y0, r, levels=40, per_shell=2, uniform=65,
                              seed=0)
    else:
        Z = np.atleast_2d(np.asarray(sampler(y0, r), float))
    u0y0 = float(fn(y0[None, :])[0])
    ladder = k_ladder(k_max)
    entries = []
    pending = np.ones(len(P), dtype=bool)
    for K in ladder:
        if not np.any(pending):
            break
        idx = np.nonzero(pending)[0]
        viol, slack = _violations(fn, y0, u0y0, Z, P[idx], float(K))
        ok = np.all(viol <= slack, axis=1)
        for row, i in enumerate(idx):
            if ok[row]:
                entries.append((P[i].copy(), float(K)))
                pending[i] = False
    entries.sort(key=lambda e: (e[0].tolist(), e[1]))
    return SubdiffEstimate(point=y0, entries=entries, r=float(r),
                           k_ladder=ladder)


def uniform_k_check(u0, y0, radius, K, y_sampler=None, p_grid=None,
                    r_test=None, momentum_radius=None, seed=101):
    """Does every sampled y in B_radius(y0) admit a verified proximal
    K-subgradient?  Returns (ok, witness_y or None).

    Candidate momenta at each sampled y are the supplied grid plus local
    gradient probes; the y-sampler covers shells geometrically so that
    points with blowing-up local concavity (|u0''| > K arbitrarily close
    to y0) are reached.
    """
    fn = _fn(u0)
    y0 = np.atleast_1d(np.asarray(y0, float))
    n = y0.size
    if y_sampler is None:
        Y = geometric_samples(y0, radius, levels=14, per_shell=16,
                              uniform=41, seed=seed)
    else:
        Y = np.atleast_2d(np.asarray(y_sampler(y0, radius), float))
    if p_grid is None:
        rad = momentum_radius if momentum_radius is not None else 1.0
        p_grid = default_momentum_grid(rad, dim=n)
    P_base = np.atleast_2d(np.asarray(p_grid, float))
    rt = r_test if r_test is not None else radius / 2.0
    Z_rel = geometric_samples(np.zeros(n), rt, levels=40, per_shell=2,
                              uniform=33, seed=0)
    for y in Y:
        P = np.vstack([g[None, :] for g in gradient_candidates(u0, y)]
                      + [P_base])
        u0y = float(fn(y[None, :])[0])
        viol, slack = _violations(fn, y, u0y, Z_rel + y[None, :], P, float(K))
        if not np.any(np.all(viol <= slack, axis=1)):
            return False, y
    return True, None
