"""Benchmark Hamiltonians and high-accuracy reference trajectories.

Two problems are bundled:

* ``integrable1d``: ``H = (1 + p^2)(1 + q^2) / 2``, one degree of freedom,
  integrable but nonseparable.
* ``pn_binary``: a spinning compact binary to second post-Newtonian order in
  canonical spin variables; five degrees of freedom
  ``p = (Px, Py, Pz, xi1, xi2)``, ``q = (Qx, Qy, Qz, theta1, theta2)``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy import special

from .autodiff import cos, sin, sqrt
from .errors import DomainError, ReferenceUnreliableError
from .flows import Hamiltonian
from .phase import State

__all__ = [
    "integrable1d",
    "eval_integrable1d",
    "integrable1d_exact",
    "PNBinary",
    "TrajectoryPreset",
    "PRESETS",
    "pn_hamiltonian",
    "eval_pn",
    "spin_from_canonical",
    "total_angular_momentum",
    "ReferenceSolution",
    "reference_solution",
    "default_reference_step",
    "get_problem",
]


# --- problem 1 -------------------------------------------------------------


def eval_integrable1d(p, q):
    return 0.5 * (1 + p[0] ** 2) * (1 + q[0] ** 2)


def integrable1d(compiled=True):
    return Hamiltonian(eval_integrable1d, 1, name="integrable1d", compiled=compiled)


def integrable1d_exact(s0, t):
    """Closed-form solution of the integrable 1-dof problem.

    On the level set ``H = E`` one has ``qdot^2 = (a^2 - q^2)(1 + q^2)`` with
    ``a^2 = 2E - 1``, solved by ``q = -a cn(w t + u0 | m)`` with
    ``w^2 = 2E`` and ``m = a^2 / (2E)``; then ``p = qdot / (1 + q^2)``.
    Returns arrays ``(p(t), q(t))``.
    """
    p0, q0 = float(s0.p[0]), float(s0.q[0])
    t = np.asarray(t, dtype=float)
    E = 0.5 * (1 + p0 * p0) * (1 + q0 * q0)
    a2 = 2 * E - 1
    if a2 <= 0.0:
        return np.zeros_like(t), np.zeros_like(t)
    a = math.sqrt(a2)
    w = math.sqrt(2 * E)
    m = a2 / (2 * E)
    phi = math.acos(max(-1.0, min(1.0, -q0 / a)))
    u0 = special.ellipkinc(phi, m)
    if p0 < 0:
        u0 = -u0
    period = 4 * special.ellipk(m)
    u = np.mod(w * t + u0, period)
    sn, cn, dn, _ = special.ellipj(u, m)
    q = -a * cn
    p = a * w * sn * dn / (1 + q * q)
    return p, q


# --- problem 2 -------------------------------------------------------------


@dataclass(frozen=True)
class PNBinary:
    """Parameters of the spinning-binary Hamiltonian.

    ``beta`` is the mass ratio m1/m2 in (0, 1]; ``c`` the rescaled speed of
    light (``math.inf`` switches every correction off); ``Lambda1/2`` the
    spin magnitudes.
    """

    beta: float
    c: float
    Lambda1: float
    Lambda2: float

    @property
    def eta(self):
        return self.beta / (1 + self.beta) ** 2


def spin_from_canonical(theta, xi, Lambda, allow_pole=False):
    """Spin vectors ``S_i = (rho cos theta, rho sin theta, xi)``.

    ``rho_i = sqrt(Lambda_i^2 - xi_i^2)``.  ``|xi_i| = Lambda_i`` (spin on the
    pole, ``theta_i`` then meaningless) is accepted only with ``allow_pole``.
    """
    out = []
    for i, (th, x, L) in enumerate(zip(theta, xi, Lambda)):
        if abs(x) > L or (abs(x) == L and not allow_pole):
            raise DomainError(f"spin {i + 1}: |xi| = {abs(x)!r} must be below Lambda = {L!r}")
        rho = math.sqrt(L * L - x * x)
        out.append(np.array([rho * math.cos(th), rho * math.sin(th), x]))
    return tuple(out)


def _cross(a, b):
    return (
        a[1] * b[2] - a[2] * b[1],
        a[2] * b[0] - a[0] * b[2],
        a[0] * b[1] - a[1] * b[0],
    )


def _dot(a, b):
    return a[0] * b[0] + a[1] * b[1] + a[2] * b[2]


def pn_hamiltonian(params, compiled=True):
    """The canonical 10-dimensional PN Hamiltonian as a :class:`Hamiltonian`."""
    beta = params.beta
    eta = params.eta
    L1sq, L2sq = params.Lambda1**2, params.Lambda2**2
    ic = 0.0 if math.isinf(params.c) else 1.0 / params.c
    ic2, ic3, ic4 = ic**2, ic**3, ic**4
    k1_p4 = (3 * eta - 1) / 8
    k2_p6 = (1 - 5 * eta + 5 * eta**2) / 16
    k2_p4 = 5 - 20 * eta - 3 * eta**2
    eta2 = eta**2
    so1 = 2 + 1.5 / beta
    so2 = 2 + 1.5 * beta
    ss1 = 1 + 1 / beta
    ss2 = 1 + beta

    def fn(p, q):
        P = (p[0], p[1], p[2])
        Q = (q[0], q[1], q[2])
        xi1, xi2 = p[3], p[4]
        th1, th2 = q[3], q[4]
        r = sqrt(_dot(Q, Q))
        ir = 1 / r
        P2 = _dot(P, P)
        NP = _dot(Q, P) * ir
        NP2 = NP * NP

        h_n = 0.5 * P2 - ir
        h_1pn = k1_p4 * P2 * P2 - 0.5 * ((3 + eta) * P2 + eta * NP2) * ir + 0.5 * ir * ir
        h_2pn = (
            k2_p6 * P2 * P2 * P2
            + 0.125 * (k2_p4 * P2 * P2 - 2 * eta2 * NP2 * P2 - 3 * eta2 * NP2 * NP2) * ir
            + 0.5 * ((5 + 8 * eta) * P2 + 3 * eta * NP2) * ir * ir
            - 0.25 * (1 + 3 * eta) * ir * ir * ir
        )

        rho1 = sqrt(L1sq - xi1 * xi1)
        rho2 = sqrt(L2sq - xi2 * xi2)
        S1 = (rho1 * cos(th1), rho1 * sin(th1), xi1)
        S2 = (rho2 * cos(th2), rho2 * sin(th2), xi2)
        L = _cross(Q, P)
        ir3 = ir * ir * ir
        # 2 S + 3/2 S*  with  S = S1 + S2,  S* = S1/beta + beta S2
        w = tuple(so1 * S1[i] + so2 * S2[i] for i in range(3))
        h_so = ir3 * _dot(w, L)
        S0 = tuple(ss1 * S1[i] + ss2 * S2[i] for i in range(3))
        S0N = _dot(S0, Q) * ir
        h_ss = 0.5 * ir3 * (3 * S0N * S0N - _dot(S0, S0))

        return h_n + ic2 * h_1pn + ic4 * h_2pn + ic3 * h_so + ic4 * h_ss

    fn.__name__ = "pn_binary"
    return Hamiltonian(fn, 5, name=f"pn_binary(beta={beta}, c={params.c})", compiled=compiled)


def eval_pn(p, q, params):
    """Evaluate the PN Hamiltonian on floats or dual numbers."""
    return pn_hamiltonian(params, compiled=False).fn(p, q)


def total_angular_momentum(s, params, allow_pole=True):
    """``J = Q x P + S1 + S2`` for a canonical PN state."""
    P, Q = s.p[:3], s.q[:3]
    S1, S2 = spin_from_canonical(s.q[3:5], s.p[3:5], (params.Lambda1, params.Lambda2), allow_pole)
    return np.cross(Q, P) + S1 + S2


@dataclass(frozen=True)
class TrajectoryPreset:
    name: str
    Q: tuple
    P: tuple
    theta: tuple
    xi: tuple
    params: PNBinary
    published_xi: tuple = field(default=None)

    def state(self):
        return State(np.array(self.P + self.xi, dtype=float), np.array(self.Q + self.theta, dtype=float))

    def hamiltonian(self, compiled=True):
        return pn_hamiltonian(self.params, compiled=compiled)


PRESETS = {
    # xi2 is printed as 0.6104 = Lambda2, which puts spin 2 exactly on the
    # coordinate pole where dH/dxi2 is infinite.  m2^2/M^2 = 0.6103515625 for
    # beta = 0.28 rounds to the same printed value and keeps rho2 > 0.
    "traj1_regular": TrajectoryPreset(
        name="traj1_regular",
        Q=(25.34, 0.0, 0.0),
        P=(0.0, 0.18, 0.0),
        theta=(1.2490, 0.6202),
        xi=(0.0445, 0.6103515625),
        params=PNBinary(beta=0.28, c=10**0.5, Lambda1=0.0479, Lambda2=0.6104),
        published_xi=(0.0445, 0.6104),
    ),
    "traj2_chaotic": TrajectoryPreset(
        name="traj2_chaotic",
        Q=(8.31, 0.0, 0.0),
        P=(0.0, 0.50, 0.0),
        theta=(0.7587, 0.8469),
        xi=(-0.2459, -0.2459),
        params=PNBinary(beta=1.0, c=1.0, Lambda1=0.25, Lambda2=0.25),
        published_xi=(-0.2459, -0.2459),
    ),
}


def get_problem(name, compiled=True):
    """Look up ``(Hamiltonian, default initial State, invariant fn or None)``."""
    if name == "integrable1d":
        return integrable1d(compiled), State([0.0], [-3.0]), None
    if name in PRESETS:
        pre = PRESETS[name]
        return (
            pre.hamiltonian(compiled),
            pre.state(),
            lambda s, _p=pre.params: total_angular_momentum(s, _p),
        )
    raise KeyError(f"unknown problem {name!r}; choose integrable1d or one of {sorted(PRESETS)}")


# --- reference solutions ---------------------------------------------------

_SQ3 = math.sqrt(3.0)
_A11, _A12 = 0.25, 0.25 - _SQ3 / 6
_A21, _A22 = 0.25 + _SQ3 / 6, 0.25


def _gauss4_march_py(kernel, p, q, h, n, max_iters):
    """Advance ``n`` two-stage Gauss steps; iterate stages to roundoff level.

    Iteration stops once the stage update stops shrinking (or is exactly
    zero), which for the tiny reference steps means roundoff level.  The
    state update uses compensated summation so millions of tiny increments
    do not accumulate rounding bias.  Returns ``(p, q, status)``; status 0 on
    success, 1 on a non-finite gradient, 2 on exhausted iterations.
    """
    d = p.size
    p = p.copy()
    q = q.copy()
    cp = np.zeros(d)
    cq = np.zeros(d)
    for _ in range(n):
        y1p = p.copy()
        y1q = q.copy()
        y2p = p.copy()
        y2q = q.copy()
        k1p = np.zeros(d)
        k1q = np.zeros(d)
        k2p = np.zeros(d)
        k2q = np.zeros(d)
        prev = np.inf
        it = 0
        while True:
            _, g1p, g1q, c1 = kernel(y1p, y1q)
            _, g2p, g2q, c2 = kernel(y2p, y2q)
            if c1 != 0.0 or c2 != 0.0:
                return p, q, 1
            diff = 0.0
            for i in range(d):
                k1p[i] = -g1q[i]
                k1q[i] = g1p[i]
                k2p[i] = -g2q[i]
                k2q[i] = g2p[i]
            for i in range(d):
                a = p[i] + h * (_A11 * k1p[i] + _A12 * k2p[i])
                b = q[i] + h * (_A11 * k1q[i] + _A12 * k2q[i])
                c = p[i] + h * (_A21 * k1p[i] + _A22 * k2p[i])
                e = q[i] + h * (_A21 * k1q[i] + _A22 * k2q[i])
                diff += (a - y1p[i]) ** 2 + (b - y1q[i]) ** 2 + (c - y2p[i]) ** 2 + (e - y2q[i]) ** 2
                y1p[i] = a
                y1q[i] = b
                y2p[i] = c
                y2q[i] = e
            it += 1
            if diff == 0.0 or (it > 2 and diff >= prev):
                break
            prev = diff
            if it >= max_iters:
                return p, q, 2
        for i in range(d):
            inc = 0.5 * h * (k1p[i] + k2p[i]) - cp[i]
            t = p[i] + inc
            cp[i] = (t - p[i]) - inc
            p[i] = t
            inc = 0.5 * h * (k1q[i] + k2q[i]) - cq[i]
            t = q[i] + inc
            cq[i] = (t - q[i]) - inc
            q[i] = t
    return p, q, 0


try:
    import numba

    _gauss4_march = numba.njit(cache=True)(_gauss4_march_py)
except ImportError:  # pragma: no cover
    _gauss4_march = _gauss4_march_py


@dataclass
class ReferenceSolution:
    t: np.ndarray
    p: np.ndarray
    q: np.ndarray
    disagreement: np.ndarray

    def state(self, i):
        return State(self.p[i].copy(), self.q[i].copy())

    def __len__(self):
        return self.t.size


def _march(H, s0, t_grid, h, max_iters):
    k = H.kernel
    if k is None:
        raise TypeError("reference integration needs a traceable Hamiltonian")
    raw = k.raw
    p = s0.p.astype(float).copy()
    q = s0.q.astype(float).copy()
    P = np.empty((t_grid.size, p.size))
    Q = np.empty((t_grid.size, p.size))
    t_prev = 0.0
    for i, t in enumerate(t_grid):
        span = t - t_prev
        n = int(math.ceil(span / h - 1e-9)) if span > 0 else 0
        if n:
            p, q, status = _gauss4_march(raw, p, q, span / n, n, max_iters)
            if status == 1:
                raise DomainError(f"reference left the domain before t={t!r}")
            if status == 2:
                raise ReferenceUnreliableError(f"reference iteration stalled before t={t!r}", t, np.inf)
        P[i], Q[i] = p, q
        t_prev = t
    return P, Q


def reference_solution(H, s0, t_grid, h, agree=1e-8, max_iters=60):
    """High-accuracy trajectory of ``H`` from ``s0`` sampled at ``t_grid``.

    Integrates with the two-stage Gauss method at step ``h`` and again at
    ``h/2``; raises ReferenceUnreliableError at the first grid time where the
    two disagree by more than ``agree`` (two-norm over all coordinates).  The
    returned object carries the per-sample disagreement.
    """
    t_grid = np.asarray(t_grid, dtype=float)
    if t_grid.ndim != 1 or np.any(np.diff(t_grid) < 0) or (t_grid.size and t_grid[0] < 0):
        raise ValueError("t_grid must be sorted and non-negative")
    P1, Q1 = _march(H, s0, t_grid, h, max_iters)
    P2, Q2 = _march(H, s0, t_grid, h / 2, max_iters)
    dis = np.sqrt(np.sum((P1 - P2) ** 2, axis=1) + np.sum((Q1 - Q2) ** 2, axis=1))
    bad = np.flatnonzero(~(dis <= agree))
    if bad.size:
        i = int(bad[0])
        err = ReferenceUnreliableError(
            f"reference runs disagree by {dis[i]:.3g} at t={t_grid[i]!r}", float(t_grid[i]), float(dis[i])
        )
        err.partial = ReferenceSolution(t_grid[:i], P2[:i], Q2[:i], dis[:i])
        raise err
    return ReferenceSolution(t_grid, P2, Q2, dis)


def default_reference_step(problem_name, h_run):
    """Reference step size: ``h_run/50`` for problem 1, 0.025 for the PN presets.

    At 0.05 the cross-check step of the chaotic preset is truncation-limited
    and trips the 1e-8 gate before t = 400; 0.025 keeps it valid past t = 500.
    """
    if problem_name == "integrable1d":
        return h_run / 50
    return 0.025
