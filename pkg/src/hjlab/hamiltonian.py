"""Hamiltonian models, their derivatives, and the Legendre transform.

Three model kinds are supported:

* ``eikonal``         -- H(t,x,p) = |p|^2 / 2
* ``quadratic-form``  -- H(t,x,p) = <A(t,x) p, p>/2 + V(t,x)
* ``generic-convex``  -- user-supplied scalar H with optional derivatives;
                         missing derivatives fall back to central finite
                         differences.

All evaluation is restricted to a declared validity box in (t, x).  The
momentum Hessian must be positive definite everywhere; the Legendre
transform then has a unique maximizer which doubles as the dual momentum
D_q L(t,x,q).
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import ConvergenceError, DomainError, NumericalError


def as_vector(x, dim):
    """Coerce a scalar or sequence to a float vector of length ``dim``."""
    v = np.atleast_1d(np.asarray(x, dtype=float))
    if v.shape != (dim,):
        raise ValueError(f"expected a vector of length {dim}, got shape {v.shape}")
    return v


@dataclass(frozen=True)
class Box:
    """Axis-aligned validity region: x in [lo, hi], t in [0, t_max]."""

    lo: np.ndarray
    hi: np.ndarray
    t_max: float = 2.0

    def __post_init__(self):
        lo = np.atleast_1d(np.asarray(self.lo, dtype=float))
        hi = np.atleast_1d(np.asarray(self.hi, dtype=float))
        object.__setattr__(self, "lo", lo)
        object.__setattr__(self, "hi", hi)
        if lo.shape != hi.shape or np.any(lo >= hi):
            raise ValueError("box requires lo < hi componentwise")
        if self.t_max <= 0:
            raise ValueError("box requires t_max > 0")

    @property
    def dim(self):
        return self.lo.size

    @property
    def radius(self):
        """Half-width of the narrowest spatial side."""
        return 0.5 * float(np.min(self.hi - self.lo))

    def contains(self, t, x):
        """Membership test; x may be a single point (n,) or rows (m, n)."""
        X = np.asarray(x, dtype=float)
        ok_t = bool(0.0 <= t <= self.t_max)
        inside = np.all((X >= self.lo) & (X <= self.hi), axis=-1)
        if inside.ndim == 0:
            return ok_t and bool(inside)
        return inside if ok_t else np.zeros_like(inside, dtype=bool)

    def contains_interval(self, t, lo, hi):
        """True if the whole spatial interval [lo, hi] sits inside the box."""
        return self.contains(t, np.asarray(lo, float)) and self.contains(t, np.asarray(hi, float))


def cube(radius, dim=1, t_max=2.0):
    """Symmetric box [-radius, radius]^dim."""
    r = float(radius)
    return Box(-r * np.ones(dim), r * np.ones(dim), t_max=t_max)


@dataclass(frozen=True)
class LegendreResult:
    """Value of the Lagrangian and the momentum achieving the sup."""

    lagrangian_value: float
    maximizer: np.ndarray


@dataclass
class HamiltonianModel:
    kind: str
    dim: int
    box: Box
    # quadratic-form data
    a_const: np.ndarray | None = None
    a_fn: object = None              # callable (t, x) -> (n, n)
    potential: object = None         # callable (t, x) -> float
    grad_potential: object = None    # callable (t, x) -> (n,)
    c1: float = 0.0
    c2: float = 0.0
    # generic data
    h_fn: object = None              # callable (t, x, p) -> float
    dp_fn: object = None
    dx_fn: object = None
    dpp_fn: object = None
    fd_rel: float = 1e-5
    autonomous: bool = True
    name: str = ""
    _a_inv: np.ndarray | None = field(default=None, repr=False)

    def __post_init__(self):
        if self.kind not in ("eikonal", "quadratic-form", "generic-convex"):
            raise ValueError(f"unknown model kind {self.kind!r}")
        if self.a_const is not None:
            A = np.asarray(self.a_const, dtype=float)
            if A.shape != (self.dim, self.dim):
                raise ValueError("A must be (n, n)")
            if not np.allclose(A, A.T, atol=1e-12):
                raise ValueError("A must be symmetric")
            self.a_const = 0.5 * (A + A.T)
            self._a_inv = np.linalg.inv(self.a_const)

    @property
    def has_free_action(self):
        """Constant coefficient matrix and no potential: minimizing arcs are
        straight lines and the action has a closed form."""
        return self.a_const is not None and self.potential is None

    def a_matrix(self, t, x):
        if self.a_const is not None:
            return self.a_const
        return np.asarray(self.a_fn(t, x), dtype=float)

    def a_inverse(self, t, x):
        if self._a_inv is not None:
            return self._a_inv
        return np.linalg.inv(self.a_matrix(t, x))


def eikonal_model(dim=1, box=None, t_max=2.0, name="eikonal"):
    """H = |p|^2/2; equals the quadratic-form kind with A = I, V = 0."""
    box = box if box is not None else cube(10.0, dim, t_max)
    return HamiltonianModel(
        kind="eikonal", dim=dim, box=box,
        a_const=np.eye(dim), c1=1.0, c2=1.0, name=name,
    )


def quadratic_model(a, box, potential=None, grad_potential=None,
                    c1=None, c2=None, autonomous=True, name="quadratic"):
    """H = <A p, p>/2 + V.  ``a`` is a constant matrix or a callable (t, x)."""
    dim = box.dim
    a_const = None
    a_fn = None
    if callable(a):
        a_fn = a
    else:
        a_const = np.asarray(a, dtype=float)
        if a_const.ndim == 0:
            a_const = a_const * np.eye(dim)
        ev = np.linalg.eigvalsh(0.5 * (a_const + a_const.T))
        if ev[0] <= 0:
            raise ValueError("A must be positive definite")
        c1 = ev[0] if c1 is None else c1
        c2 = ev[-1] if c2 is None else c2
    if c1 is None or c2 is None:
        raise ValueError("callable A requires explicit convexity bounds c1, c2")
    if not (0 < c1 <= c2):
        raise ValueError("convexity bounds need 0 < c1 <= c2")
    return HamiltonianModel(
        kind="quadratic-form", dim=dim, box=box, a_const=a_const, a_fn=a_fn,
        potential=potential, grad_potential=grad_potential,
        c1=float(c1), c2=float(c2), autonomous=autonomous, name=name,
    )


def generic_model(h, box, dp=None, dx=None, dpp=None, fd_rel=1e-5,
                  autonomous=True, name="generic"):
    """Generic strictly convex H; derivatives by central differences unless
    supplied."""
    return HamiltonianModel(
        kind="generic-convex", dim=box.dim, box=box,
        h_fn=h, dp_fn=dp, dx_fn=dx, dpp_fn=dpp, fd_rel=fd_rel,
        autonomous=autonomous, name=name,
    )


def _check_box(model, t, x):
    if not model.box.contains(t, x):
        raise DomainError(
            f"evaluation at t={t}, x={np.asarray(x)} lies outside the "
            f"model's validity box"
        )


def _pot(model, t, X):
    """Potential evaluated on rows X (m, n) -> (m,)."""
    if model.potential is None:
        return np.zeros(X.shape[0])
    try:
        out = np.asarray(model.potential(t, X), dtype=float)
        if out.shape == (X.shape[0],):
            return out
    except Exception:
        pass
    return np.array([float(model.potential(t, row)) for row in X])


def _grad_pot(model, t, X):
    """Potential gradient on rows X (m, n) -> (m, n); finite differences
    when no gradient callable was supplied."""
    m, n = X.shape
    if model.potential is None:
        return np.zeros((m, n))
    if model.grad_potential is not None:
        try:
            out = np.asarray(model.grad_potential(t, X), dtype=float)
            if out.shape == (m, n):
                return out
        except Exception:
            pass
        return np.array([as_vector(model.grad_potential(t, row), n) for row in X])
    out = np.empty((m, n))
    for i in range(n):
        h = model.fd_rel * (1.0 + np.abs(X[:, i]))
        Xp = X.copy(); Xp[:, i] += h
        Xm = X.copy(); Xm[:, i] -= h
        out[:, i] = (_pot(model, t, Xp) - _pot(model, t, Xm)) / (2.0 * h)
    return out


def h_batch(model, t, X, P):
    """H on rows: X, P of shape (m, n) -> (m,)."""
    X = np.atleast_2d(np.asarray(X, float))
    P = np.atleast_2d(np.asarray(P, float))
    if model.kind in ("eikonal", "quadratic-form"):
        if model.a_const is not None:
            quad = 0.5 * np.einsum("ij,jk,ik->i", P, model.a_const, P)
        else:
            quad = 0.5 * np.array(
                [p @ model.a_matrix(t, x) @ p for x, p in zip(X, P)]
            )
        return quad + _pot(model, t, X)
    return np.array([float(model.h_fn(t, x, p)) for x, p in zip(X, P)])


def dp_h_batch(model, t, X, P):
    """D_p H on rows (m, n) -> (m, n)."""
    X = np.atleast_2d(np.asarray(X, float))
    P = np.atleast_2d(np.asarray(P, float))
    if model.kind in ("eikonal", "quadratic-form"):
        if model.a_const is not None:
            return P @ model.a_const.T
        return np.array([model.a_matrix(t, x) @ p for x, p in zip(X, P)])
    if model.dp_fn is not None:
        return np.array([as_vector(model.dp_fn(t, x, p), model.dim)
                         for x, p in zip(X, P)])
    m, n = P.shape
    out = np.empty((m, n))
    for i in range(n):
        h = model.fd_rel * (1.0 + np.abs(P[:, i]))
        Pp = P.copy(); Pp[:, i] += h
        Pm = P.copy(); Pm[:, i] -= h
        out[:, i] = (h_batch(model, t, X, Pp) - h_batch(model, t, X, Pm)) / (2.0 * h)
    return out


def dx_h_batch(model, t, X, P):
    """D_x H on rows (m, n) -> (m, n)."""
    X = np.atleast_2d(np.asarray(X, float))
    P = np.atleast_2d(np.asarray(P, float))
    m, n = X.shape
    if model.kind in ("eikonal", "quadratic-form"):
        grad = _grad_pot(model, t, X)
        if model.a_const is None:
            # quadratic part depends on x through A(t, x): finite differences
            for i in range(n):
                h = model.fd_rel * (1.0 + np.abs(X[:, i]))
                Xp = X.copy(); Xp[:, i] += h
                Xm = X.copy(); Xm[:, i] -= h
                qp = np.array([0.5 * p @ model.a_matrix(t, x) @ p
                               for x, p in zip(Xp, P)])
                qm = np.array([0.5 * p @ model.a_matrix(t, x) @ p
                               for x, p in zip(Xm, P)])
                grad[:, i] += (qp - qm) / (2.0 * h)
        return grad
    if model.dx_fn is not None:
        return np.array([as_vector(model.dx_fn(t, x, p), n) for x, p in zip(X, P)])
    out = np.empty((m, n))
    for i in range(n):
        h = model.fd_rel * (1.0 + np.abs(X[:, i]))
        Xp = X.copy(); Xp[:, i] += h
        Xm = X.copy(); Xm[:, i] -= h
        out[:, i] = (h_batch(model, t, Xp, P) - h_batch(model, t, Xm, P)) / (2.0 * h)
    return out


def eval_h(model, t, x, p):
    """H(t, x, p) at a single point inside the validity box."""
    x = as_vector(x, model.dim)
    p = as_vector(p, model.dim)
    _check_box(model, t, x)
    val = float(h_batch(model, t, x[None, :], p[None, :])[0])
    if not np.isfinite(val):
        raise NumericalError(f"H(t={t}, x={x}, p={p}) is not finite")
    return val


def _dpp_h(model, t, x, p):
    if model.kind in ("eikonal", "quadratic-form"):
        return model.a_matrix(t, x).copy()
    if model.dpp_fn is not None:
        M = np.asarray(model.dpp_fn(t, x, p), dtype=float)
    else:
        n = model.dim
        # wider step for second differences: balances truncation and rounding
        h = 1e-4 * (1.0 + np.abs(p))
        M = np.empty((n, n))
        f0 = float(model.h_fn(t, x, p))
        for i in range(n):
            ei = np.zeros(n); ei[i] = h[i]
            fp = float(model.h_fn(t, x, p + ei))
            fm = float(model.h_fn(t, x, p - ei))
            M[i, i] = (fp - 2.0 * f0 + fm) / h[i] ** 2
            for j in range(i + 1, n):
                ej = np.zeros(n); ej[j] = h[j]
                fpp = float(model.h_fn(t, x, p + ei + ej))
                fpm = float(model.h_fn(t, x, p + ei - ej))
                fmp = float(model.h_fn(t, x, p - ei + ej))
                fmm = float(model.h_fn(t, x, p - ei - ej))
                M[i, j] = M[j, i] = (fpp - fpm - fmp + fmm) / (4.0 * h[i] * h[j])
    return 0.5 * (M + M.T)


def grads_h(model, t, x, p):
    """(D_p H, D_x H, D_pp H) at a single point; D_pp H is symmetrized."""
    x = as_vector(x, model.dim)
    p = as_vector(p, model.dim)
    _check_box(model, t, x)
    dp = dp_h_batch(model, t, x[None, :], p[None, :])[0]
    dx = dx_h_batch(model, t, x[None, :], p[None, :])[0]
    dpp = _dpp_h(model, t, x, p)
    if not (np.all(np.isfinite(dp)) and np.all(np.isfinite(dx))
            and np.all(np.isfinite(dpp))):
        raise NumericalError(f"non-finite derivative at t={t}, x={x}, p={p}")
    return dp, dx, dpp


def legendre(model, t, x, q, tol=1e-11, max_iter=100):
    """Legendre transform L(t,x,q) = sup_p [p.q - H(t,x,p)].

    Closed form for eikonal / quadratic-form kinds; damped Newton ascent on
    the strictly concave inner problem for the generic kind, started at
    p = q (exact for the eikonal case).
    """
    x = as_vector(x, model.dim)
    q = as_vector(q, model.dim)
    _check_box(model, t, x)
    if model.kind in ("eikonal", "quadratic-form"):
        p_star = model.a_inverse(t, x) @ q
        value = 0.5 * float(p_star @ q) - float(_pot(model, t, x[None, :])[0])
        return LegendreResult(value, p_star)

    def phi(p):
        return float(p @ q) - float(model.h_fn(t, x, p))

    p = q.copy()
    val = phi(p)
    for _ in range(max_iter):
        grad = q - dp_h_batch(model, t, x[None, :], p[None, :])[0]
        gnorm = float(np.linalg.norm(grad))
        if gnorm <= tol * (1.0 + float(np.linalg.norm(q))):
            return LegendreResult(val, p)
        hess = _dpp_h(model, t, x, p)
        try:
            step = np.linalg.solve(hess, grad)
        except np.linalg.LinAlgError:
            step = grad
        alpha = 1.0
        for _ in range(30):
            cand = p + alpha * step
            cand_val = phi(cand)
            if cand_val > val:
                p, val = cand, cand_val
                break
            alpha *= 0.5
        else:
            break
    raise ConvergenceError(
        "inner Legendre maximization stalled; the model may violate the "
        "strict convexity assumption"
    )


def dual_momentum(model, t, x, q):
    """D_q L(t,x,q): the maximizer of the Legendre transform."""
    return legendre(model, t, x, q).maximizer


def velocity_sup(model, momentum_radius, samples=4096, seed=1234):
    """sup |D_p H| over the validity box and the momentum ball of the given
    radius; closed form for constant coefficients, dense sampling otherwise."""
    L0 = float(momentum_radius)
    if model.a_const is not None:
        return float(np.linalg.eigvalsh(model.a_const)[-1]) * L0
    rng = np.random.default_rng(seed)
    m = int(samples)
    X = model.box.lo + rng.random((m, model.dim)) * (model.box.hi - model.box.lo)
    U = rng.standard_normal((m, model.dim))
    U /= np.maximum(np.linalg.norm(U, axis=1, keepdims=True), 1e-300)
    radii = L0 * rng.random((m, 1)) ** (1.0 / model.dim)
    radii[: m // 4] = L0  # include the sphere itself
    P = U * radii
    best = 0.0
    for ts in np.linspace(0.0, model.box.t_max, 5):
        dp = dp_h_batch(model, ts, X, P)
        best = max(best, float(np.max(np.linalg.norm(dp, axis=1))))
    return best
