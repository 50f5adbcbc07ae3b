"""Error metrics, symplecticity checks, Lyapunov exponents, sections and fits."""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.spatial import cKDTree

from .errors import FitError
from .phase import State, embed, symplectic_form

__all__ = [
    "RunRecord",
    "GrowthFit",
    "global_error",
    "energy_error",
    "symplecticity_defect",
    "lyapunov_exponent",
    "poincare_section",
    "nearest_neighbor_spread",
    "fit_growth",
    "fit_loglog",
]


@dataclass
class RunRecord:
    """Sampled time series of one run.

    ``J_drift`` is ``|J(t) - J(0)|`` per component (or None); ``P``/``Q``
    hold the sampled states and ``iterations`` the solver iterations of the
    sampled steps.
    """

    metadata: dict
    t: np.ndarray
    GE: np.ndarray
    GHE: np.ndarray
    delta: np.ndarray
    J_drift: np.ndarray | None = None
    P: np.ndarray | None = field(default=None, repr=False)
    Q: np.ndarray | None = field(default=None, repr=False)
    iterations: np.ndarray | None = field(default=None, repr=False)

    def __post_init__(self):
        if self.t.size > 1 and np.any(np.diff(self.t) <= 0):
            raise ValueError("sample times must be strictly increasing")

    def channel(self, name):
        if name == "J":
            if self.J_drift is None:
                raise KeyError("run has no angular-momentum channel")
            return np.linalg.norm(self.J_drift, axis=1)
        return {"GE": self.GE, "GHE": self.GHE, "delta": self.delta}[name]

    def max_over(self, name, t_max=math.inf, t_min=0.0):
        """Maximum of a channel over samples with ``t_min <= t <= t_max``."""
        m = (self.t >= t_min) & (self.t <= t_max)
        return float(np.max(self.channel(name)[m]))

    def state(self, i):
        return State(self.P[i].copy(), self.Q[i].copy())


@dataclass(frozen=True)
class GrowthFit:
    slope: float
    intercept: float
    r_squared: float
    window: tuple


def global_error(num, ref):
    dp = num.p - ref.p
    dq = num.q - ref.q
    return float(np.sqrt(dp @ dp + dq @ dq))


def energy_error(H, s, s0):
    return abs(H.energy(s) - H.energy(s0))


def symplecticity_defect(step_map, z, eps=1e-6):
    """``max |M^T J M - J|`` for the central-difference Jacobian ``M`` of ``step_map`` at ``z``."""
    z0 = z.flat()
    n = z0.size
    M = np.empty((n, n))
    for j in range(n):
        dz = np.zeros(n)
        dz[j] = eps
        plus = step_map(State.from_flat(z0 + dz)).flat()
        minus = step_map(State.from_flat(z0 - dz)).flat()
        M[:, j] = (plus - minus) / (2 * eps)
    if not np.all(np.isfinite(M)):
        raise FloatingPointError("non-finite Jacobian entries")
    J = symplectic_form(n // 2)
    return float(np.max(np.abs(M.T @ J @ M - J)))


def lyapunov_exponent(H, spec, s0, h, T, d0=1e-8, stride=1, direction=None):
    """Largest Lyapunov exponent by the renormalised two-trajectory method.

    A shadow trajectory starts at distance ``d0`` (along ``direction``, by
    default the normalised all-ones vector) and after every step is pulled
    back to distance ``d0`` along the current separation.  Returns arrays
    ``(t, sigma)`` sampled every ``stride`` steps, ``sigma(t) = sum ln(d/d0) / t``.
    """
    from .integrators import Stepper

    n_steps = int(round(T / h))
    z = s0.flat()
    u = np.ones_like(z) if direction is None else np.asarray(direction, dtype=float)
    u = u / np.linalg.norm(u)
    a = Stepper(H, spec)
    b = Stepper(H, spec)
    s = s0
    sp = State.from_flat(z + d0 * u)
    a.reset(s)
    b.reset(sp)
    total = 0.0
    ts, sig = [], []
    for n in range(1, n_steps + 1):
        s = a.step(s, h).state
        sp = b.step(sp, h).state
        diff = sp.flat() - s.flat()
        d = float(np.linalg.norm(diff))
        total += math.log(d / d0)
        sp = State.from_flat(s.flat() + diff * (d0 / d))
        if b.ext is not None:
            # raw extended families: restart both copies on the diagonal
            b.ext = embed(sp)
            a.ext = embed(s)
        if n % stride == 0:
            ts.append(n * h)
            sig.append(total / (n * h))
    return np.array(ts), np.array(sig)


def poincare_section(samples, d, k=0):
    """Crossings of ``x_k = 0`` with ``x_k`` increasing in an extended run.

    ``samples`` is an array of flattened extended states ``(p, x, q, y)``
    with shape ``(n, 4d)``.  Crossings are located by linear interpolation
    between neighbouring samples; returns an ``(m, 2)`` array of ``(q_k, p_k)``.
    """
    samples = np.asarray(samples, dtype=float)
    if samples.shape[0] < 2:
        return np.empty((0, 2))
    x = samples[:, d + k]
    i = np.flatnonzero((x[:-1] < 0.0) & (x[1:] >= 0.0))
    w = -x[i] / (x[i + 1] - x[i])
    q = samples[i, 2 * d + k] + w * (samples[i + 1, 2 * d + k] - samples[i, 2 * d + k])
    p = samples[i, k] + w * (samples[i + 1, k] - samples[i, k])
    return np.column_stack((q, p))


def nearest_neighbor_spread(points):
    """Mean distance from each section point to its nearest neighbour."""
    points = np.asarray(points, dtype=float)
    if len(points) < 2:
        return math.nan
    dist, _ = cKDTree(points).query(points, k=2)
    return float(np.mean(dist[:, 1]))


def fit_loglog(t, v, window=(-math.inf, math.inf)):
    """Least-squares fit ``log v = slope log t + intercept`` inside ``window``."""
    t = np.asarray(t, dtype=float)
    v = np.asarray(v, dtype=float)
    lo, hi = window
    m = (t >= lo) & (t <= hi)
    if np.count_nonzero(m) < 10:
        raise FitError(f"only {int(np.count_nonzero(m))} samples in window {window}; need 10")
    tt, vv = t[m], v[m]
    if np.any(~(vv > 0)) or np.any(~(tt > 0)):
        raise FitError("log-log fit needs positive times and values")
    x, y = np.log(tt), np.log(vv)
    slope, intercept = np.polyfit(x, y, 1)
    resid = y - (slope * x + intercept)
    ss_tot = float(np.sum((y - y.mean()) ** 2))
    r2 = 1.0 - float(resid @ resid) / ss_tot if ss_tot > 0 else 1.0
    return GrowthFit(float(slope), float(intercept), r2, (float(tt[0]), float(tt[-1])))


def fit_growth(record, channel="GE", window=(-math.inf, math.inf)):
    return fit_loglog(record.t, record.channel(channel), window)
