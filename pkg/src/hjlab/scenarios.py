"""Built-in 1-D eikonal scenarios with closed-form oracles.

Five configured problems ship with the package:

* ``example1``         u0 = |x|          -- instantaneous smoothing
                       (a rarefaction fan of classical characteristics);
* ``example2``         u0 = -|x|^alpha, 1 < alpha < 2 -- empty proximal
                       subdifferential at 0, a singular stationary
                       characteristic, minimizer pair +-(t*alpha)^(1/(2-alpha));
* ``example3``         u0 = y^2 sin(1/y) clamped outside [-1, 1] -- nonempty
                       subdifferential everywhere but no uniform K: the
                       stationary characteristic is classical yet weakly
                       singular;
* ``example4``         u0 = -y (y<=0), -y^(3/2) (y>=0) -- a fan of classical
                       characteristics plus one singular one with initial
                       speed 0;
* ``semiconcave_abs``  u0 = -|x| -- semiconcave datum, singularity
                       propagates from the initial kink.

Box sizes solve a fixed point: the datum's declared Lipschitz constant must
hold box-wide, the search ball 1.5 * lambda0 * horizon plus the plot extent
must fit inside, and the small-time horizon t0 = R / (2 lambda0) must reach
the scenario horizon.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import action as ac
from . import chartrace as ct
from . import subdiff as sd
from . import value as vl
from .hamiltonian import Box, eikonal_model
from .value import InitialDatum


@dataclass
class Scenario:
    name: str
    model: object
    datum: InitialDatum
    horizon: float
    lambda0: float
    regime: ac.ActionRegime
    window: tuple                 # default 1-D plot window
    oracle: object = None         # callable (t, x) -> u, when closed form
    alpha: float | None = None
    info: dict = field(default_factory=dict)
    subdiff_r: float = 0.5

    @property
    def box(self):
        return self.model.box

    # light conveniences used by tests, demos and the CLI
    def value_at(self, t, x, cfg=vl.DEFAULT_CONFIG, extra_gap=0.0):
        return vl.value_at(self.model, self.datum, t, x,
                           lambda0=self.lambda0, cfg=cfg, extra_gap=extra_gap)

    def is_singular(self, t, x, cfg=vl.DEFAULT_CONFIG):
        return vl.is_singular(self.model, self.datum, t, x,
                              lambda0=self.lambda0, cfg=cfg)

    def hopf(self, t, x, resolution=2001):
        r = 1.5 * self.lambda0 * t
        return vl.hopf_1d(self.datum, t, x, (x - r, x + r),
                          resolution=resolution)

    def solve_grid(self, times, window=None, resolution=201,
                   cfg=vl.DEFAULT_CONFIG):
        return vl.solve_grid(self.model, self.datum, times,
                             window or self.window, resolution,
                             lambda0=self.lambda0, cfg=cfg)

    def momentum_grid(self, count=41):
        return sd.default_momentum_grid(self.datum.lipschitz, count=count)

    def estimate_subdiff(self, y0, k_max=1e6, count=41):
        return sd.estimate_proximal_subdifferential(
            self.datum, y0, k_max=k_max, r=self.subdiff_r,
            p_grid=self.momentum_grid(count))

    def generalized_char(self, t_start, x0, horizon=None, dt=0.01,
                         cfg=vl.DEFAULT_CONFIG):
        return ct.generalized_char(self.model, self.datum, t_start, x0,
                                   horizon or self.horizon, dt=dt,
                                   lambda0=self.lambda0, cfg=cfg)


def _solve_geometry(lip_of_r, horizon, extent, iters=300):
    """Fixed point of the box-radius requirement (see module docstring)."""
    R = extent + 1.0
    for _ in range(iters):
        lam = 2.0 * lip_of_r(R)
        need = max(1.5 * lam * horizon + extent + 1.0, 2.0 * lam * horizon)
        if need <= R:
            break
        R = need * 1.02
    L0 = lip_of_r(R)
    return R, L0, 2.0 * L0


def _make(name, datum_fn, lip_of_r, horizon, extent, window, oracle=None,
          alpha=None, info=None, kind="catalog", kinks=()):
    R, L0, lam = _solve_geometry(lip_of_r, horizon, extent)
    box = Box(np.array([-R]), np.array([R]), t_max=1.5 * horizon + 0.1)
    model = eikonal_model(dim=1, box=box, name=name)
    datum = InitialDatum(fn=datum_fn, kind=kind, lipschitz=L0, name=name,
                         kinks=kinks)
    regime = ac.ActionRegime(lambda0=lam,
                             t0=min(horizon, R / (2.0 * lam)),
                             c0=0.4 * model.c1)
    return Scenario(name=name, model=model, datum=datum, horizon=horizon,
                    lambda0=lam, regime=regime, window=window, oracle=oracle,
                    alpha=alpha, info=info or {})


def example1():
    """u0 = |x|; the solution is differentiable everywhere for t > 0."""

    def u0(Y):
        return np.abs(Y[:, 0])

    def oracle(t, x):
        if x <= -t:
            return -x - 0.5 * t
        if x >= t:
            return x - 0.5 * t
        return x * x / (2.0 * t)

    return _make("example1", u0, lambda R: 1.0, horizon=1.0, extent=2.0,
                 window=(-2.0, 2.0), oracle=oracle, kinks=(0.0,),
                 info={"subdiff_at_0": (-1.0, 1.0), "singular": False})


def example2(alpha=1.5):
    """u0 = -|x|^alpha with 1 < alpha < 2; empty proximal subdifferential
    at 0 and a stationary singular characteristic there."""
    if not 1.0 < alpha < 2.0:
        raise ValueError("alpha must be in (1, 2)")
    a = float(alpha)

    def u0(Y):
        return -np.abs(Y[:, 0]) ** a

    def minimizer(t):
        return (t * a) ** (1.0 / (2.0 - a))

    def value_at_zero(t):
        y = minimizer(t)
        return -y ** a + y * y / (2.0 * t)

    horizon = 1.0 if a <= 1.6 else (0.25 if a <= 1.8 else 0.1)
    return _make("example2", u0, lambda R: a * R ** (a - 1.0),
                 horizon=horizon, extent=1.0, window=(-1.0, 1.0),
                 alpha=a,
                 info={"minimizer": minimizer, "value_at_zero": value_at_zero,
                       "singular_column": 0.0})


def example3():
    """u0 = y^2 sin(1/y) (clamped to constants outside [-1, 1]): nonempty
    proximal subdifferential everywhere, no uniform K near 0."""
    clamp = 1.0

    def u0(Y):
        y = np.clip(Y[:, 0], -clamp, clamp)
        out = np.zeros_like(y)
        nz = y != 0.0
        out[nz] = y[nz] ** 2 * np.sin(1.0 / y[nz])
        return out

    # |u0'| <= 2|y| + 1 <= 3 on the clamp interval; constant outside
    return _make("example3", u0, lambda R: 3.0, horizon=0.45, extent=1.0,
                 window=(-0.5, 0.5), kinks=(-1.0, 1.0),
                 info={"value_at_zero": 0.0, "uniform_k_fails": True,
                       "stationary_classification": ct.WEAKLY_SINGULAR})


def example4():
    """u0 = -y for y <= 0 and -y^(3/2) for y >= 0: a fan of classical
    characteristics from 0 plus one singular characteristic with initial
    speed 0 (the tie curve x = -t^2/2, derived from the variational
    formula)."""

    def u0(Y):
        y = Y[:, 0]
        return np.where(y <= 0.0, -y, -np.abs(y) ** 1.5)

    def oracle(t, x):
        cands = [x * x / (2.0 * t)]
        if x + t <= 0.0:
            cands.append(-x - 0.5 * t)
        disc = 2.25 * t * t + 4.0 * x
        if disc >= 0.0:
            s = 0.5 * (1.5 * t + np.sqrt(disc))   # sqrt(y) at the local min
            if s > 0.0:
                y = s * s
                cands.append(-(s ** 3) + (x - y) ** 2 / (2.0 * t))
        return min(cands)

    def t_star(p0):
        # tie time of the fan line x = p0 t with the singular curve
        return -2.0 * p0

    return _make("example4", u0, lambda R: max(1.0, 1.5 * np.sqrt(R)),
                 horizon=2.0, extent=2.0, window=(-2.0, 0.5), oracle=oracle,
                 kinks=(0.0,),
                 info={"subdiff_at_0": (-1.0, 0.0), "t_star": t_star,
                       "singular_curve": lambda t: -0.5 * t * t})


def semiconcave_abs():
    """u0 = -|x|: semiconcave datum whose initial kink propagates as a
    stationary singular characteristic."""

    def u0(Y):
        return -np.abs(Y[:, 0])

    def oracle(t, x):
        return -abs(x) - 0.5 * t

    return _make("semiconcave_abs", u0, lambda R: 1.0, horizon=1.0,
                 extent=2.0, window=(-2.0, 2.0), oracle=oracle, kinks=(0.0,),
                 info={"singular_column": 0.0, "minimizer": lambda t: t})


def catalog(alpha=1.5):
    """The five shipped scenarios, example2 at the requested alpha."""
    return [example1(), example2(alpha), example3(), example4(),
            semiconcave_abs()]


def by_name(name, alpha=1.5):
    for sc in catalog(alpha):
        if sc.name == name:
            return sc
    raise KeyError(f"unknown scenario {name!r}")
