"""Phase-space states, the diagonal submanifold and maps back onto it.

An extended state ``(p, x, q, y)`` lives in the doubled space; the diagonal
``{(p, p, q, q)}`` carries one copy of an original trajectory twice.  The
projections here turn a post-step extended state into an original state by
per-component weighted averaging, and :func:`theorem2_matrix` builds an
explicit symplectic matrix realising such an average.
"""
from __future__ import annotations

from collections import Counter
from dataclasses import dataclass

import numpy as np

from .errors import ConfigError, WeightsInfeasibleError

__all__ = [
    "State",
    "ExtendedState",
    "WeightVectors",
    "FactorPair",
    "embed",
    "discrepancy",
    "project_single_factor",
    "project_double_factor",
    "project_weighted",
    "theorem2_matrix",
    "symplectic_form",
    "CASE_COUNTS",
]


def _vec(a):
    return np.atleast_1d(np.asarray(a, dtype=float))


@dataclass(slots=True)
class State:
    """A point ``(p, q)`` of the original phase space."""

    p: np.ndarray
    q: np.ndarray

    def __post_init__(self):
        self.p = _vec(self.p)
        self.q = _vec(self.q)
        if self.p.shape != self.q.shape or self.p.ndim != 1:
            raise ValueError("p and q must be 1-d vectors of equal length")

    @property
    def dim(self):
        return self.p.size

    def flat(self):
        return np.concatenate((self.p, self.q))

    @classmethod
    def from_flat(cls, z):
        z = _vec(z)
        d = z.size // 2
        return cls(z[:d].copy(), z[d:].copy())


@dataclass(slots=True)
class ExtendedState:
    """A point ``(p, x, q, y)`` of the extended phase space.

    Conjugate pairs are ``(p, q)`` and ``(x, y)``.
    """

    p: np.ndarray
    x: np.ndarray
    q: np.ndarray
    y: np.ndarray

    @property
    def dim(self):
        return self.p.size

    def flat(self):
        return np.concatenate((self.p, self.x, self.q, self.y))

    @classmethod
    def from_flat(cls, z):
        z = _vec(z)
        d = z.size // 4
        return cls(z[:d].copy(), z[d : 2 * d].copy(), z[2 * d : 3 * d].copy(), z[3 * d :].copy())

    @classmethod
    def of(cls, p, x, q, y):
        return cls(_vec(p), _vec(x), _vec(q), _vec(y))


@dataclass(frozen=True)
class WeightVectors:
    """Per-component weights: ``lam`` for momenta, ``xi`` for positions."""

    lam: np.ndarray
    xi: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "lam", _vec(self.lam))
        object.__setattr__(self, "xi", _vec(self.xi))
        if self.lam.shape != self.xi.shape:
            raise ConfigError("weight vectors must have equal length")
        if not (np.all(np.isfinite(self.lam)) and np.all(np.isfinite(self.xi))):
            raise ConfigError("weights must be finite")

    def check_definition1(self):
        """Require every weight in (0, 1) and ``lam[k] != xi[k]``."""
        for name, w in (("lambda", self.lam), ("xi", self.xi)):
            if np.any((w <= 0.0) | (w >= 1.0)):
                raise ConfigError(f"{name} weights must lie in the open interval (0, 1)")
        clash = np.flatnonzero(self.lam == self.xi)
        if clash.size:
            raise ConfigError(f"lambda and xi coincide at component {int(clash[0])}")

    def swapped(self):
        return WeightVectors(self.xi, self.lam)


@dataclass(frozen=True)
class FactorPair:
    """Scalar factors of the single-/double-factor projections."""

    lambda0: float
    mu0: float

    def __post_init__(self):
        if not (np.isfinite(self.lambda0) and np.isfinite(self.mu0)):
            raise ConfigError("factors must be finite")


def embed(s):
    """Copy ``(p, q)`` onto the diagonal as ``(p, p, q, q)``."""
    return ExtendedState(s.p.copy(), s.p.copy(), s.q.copy(), s.q.copy())


def discrepancy(e):
    """Distance ``||(p - x, q - y)||`` of ``e`` from the diagonal."""
    dp = e.p - e.x
    dq = e.q - e.y
    return float(np.sqrt(dp @ dp + dq @ dq))


def _average(a, b, w):
    return w * a + (1.0 - w) * b


def project_single_factor(e, f):
    return State(_average(e.p, e.x, f.lambda0), _average(e.q, e.y, f.lambda0))


def project_double_factor(e, f, step_index):
    """Alternate the factors between momenta and positions.

    Odd ``step_index`` weights momenta with ``lambda0`` and positions with
    ``mu0``; even steps swap them.  The first step of a run is index 1.
    """
    if step_index % 2 == 1:
        wp, wq = f.lambda0, f.mu0
    else:
        wp, wq = f.mu0, f.lambda0
    return State(_average(e.p, e.x, wp), _average(e.q, e.y, wq))


def project_weighted(e, w, mode="standard"):
    """Project with weight vectors.

    ``mode="standard"`` averages momenta with ``lam`` and positions with
    ``xi``.  ``mode="definition1"`` forms the candidate ``(P, Q)`` from
    ``lam`` alone and ``(P~, Q~)`` from ``xi`` alone, and per component keeps
    ``(P, Q)`` unless it is exactly zero.
    """
    if mode == "standard":
        return State(_average(e.p, e.x, w.lam), _average(e.q, e.y, w.xi))
    if mode != "definition1":
        raise ConfigError(f"unknown projection mode {mode!r}")
    w.check_definition1()
    P = _average(e.p, e.x, w.lam)
    Q = _average(e.q, e.y, w.lam)
    Pt = _average(e.p, e.x, w.xi)
    Qt = _average(e.q, e.y, w.xi)
    zero = (P * P + Q * Q) == 0.0
    return State(np.where(zero, Pt, P), np.where(zero, Qt, Q))


def symplectic_form(n):
    """The canonical ``J`` of size ``2n`` for coordinates ordered ``(p, q)``.

    With ``Hamilton's equations dz/dt = J^{-1} grad H`` this is
    ``[[0, I], [-I, 0]]``.  Any fixed sign convention works for ``M^T J M = J``.
    """
    J = np.zeros((2 * n, 2 * n))
    J[:n, n:] = np.eye(n)
    J[n:, :n] = -np.eye(n)
    return J


# case label -> number of components built that way, across all calls
CASE_COUNTS: Counter = Counter()


def theorem2_matrix(e, w):
    """Symplectic ``M`` with ``M (p, x, q, y) = (p~, p~, q~, q~)``.

    ``p~ = lam*p + (1-lam)*x`` and ``q~ = xi*q + (1-xi)*y`` componentwise.
    Coordinates of the 4d-dimensional space are ordered ``(p, x, q, y)``, so
    ``(p, x)`` are the momenta and ``(q, y)`` the positions.

    Each component ``k`` is handled by a block acting only on its four
    entries, chosen by which of ``(p^k, x^k)`` and ``(q^k, y^k)`` vanish:

    * I   both pairs nonzero: a shear ``U V`` with ``U = [[I, S], [0, I]]``
      and ``V = [[I, 0], [T, I]]`` (``S``, ``T`` symmetric).  When the target
      ``|p~|`` exceeds ``|q~|`` the mirrored product ``V U`` is used.
    * II  momenta zero: ``diag(T^{-T}, T)`` acting on positions.
    * III positions zero: ``diag(T, T^{-T})`` acting on momenta.
    * IV  all four zero: identity.

    Free parameters take the simplest values (zero shear entries, or
    ``b=0, d=1`` / ``a=0, c=1``); every choice divides by the larger of the
    two candidate pivots, which keeps the entries of ``M`` moderate.  Raises WeightsInfeasibleError when both
    targets vanish for a component that is not identically zero.
    """
    d = e.dim
    lam, xi = w.lam, w.xi
    if lam.size != d:
        raise ConfigError("weight vectors do not match the state dimension")
    pt = lam * e.p + (1.0 - lam) * e.x
    qt = xi * e.q + (1.0 - xi) * e.y
    M = np.eye(4 * d)
    for k in range(d):
        Mk, case = _component_block(d, k, e.p[k], e.x[k], e.q[k], e.y[k], pt[k], qt[k])
        CASE_COUNTS[case] += 1
        M = Mk @ M
    return M


def _idx(d, k):
    # positions of p^k, x^k, q^k, y^k in the (p, x, q, y) ordering
    return k, d + k, 2 * d + k, 3 * d + k


def _component_block(d, k, p, x, q, y, pt, qt):
    ip, ix, iq, iy = _idx(d, k)
    mom_zero = p == 0.0 and x == 0.0
    pos_zero = q == 0.0 and y == 0.0
    if mom_zero and pos_zero:
        return np.eye(4 * d), "IV"
    if pt == 0.0 and qt == 0.0:
        raise WeightsInfeasibleError(
            f"weights infeasible for this state: component {k} maps to (0, 0)", component=k
        )
    if not mom_zero and not pos_zero:
        if abs(qt) >= abs(pt):
            return _case1(d, ip, ix, iq, iy, p, x, q, y, pt, qt), "I"
        return _case1_mirrored(d, ip, ix, iq, iy, p, x, q, y, pt, qt), "I"
    if mom_zero:
        T0 = _two_by_two(q, y, qt)
        M = np.eye(4 * d)
        _put(M, (ip, ix), np.linalg.inv(T0).T)
        _put(M, (iq, iy), T0)
        return M, "II"
    T0 = _two_by_two(p, x, pt)
    M = np.eye(4 * d)
    _put(M, (ip, ix), T0)
    _put(M, (iq, iy), np.linalg.inv(T0).T)
    return M, "III"


def _put(M, idx, block):
    i, j = idx
    M[i, i], M[i, j] = block[0, 0], block[0, 1]
    M[j, i], M[j, j] = block[1, 0], block[1, 1]


def _two_by_two(u, v, target):
    """Nonsingular ``T0`` with ``T0 (u, v) = (target, target)``, target != 0."""
    if abs(u) >= abs(v):
        b, dd = 0.0, 1.0
        a = (target - b * v) / u
        c = (target - dd * v) / u
    else:
        a, c = 0.0, 1.0
        b = (target - a * u) / v
        dd = (target - c * u) / v
    return np.array([[a, b], [c, dd]])


def _case1(d, ip, ix, iq, iy, p, x, q, y, pt, qt):
    # V shears positions by momenta, then U shears momenta by the new positions
    dp, dx, dq, dy = pt - p, pt - x, qt - q, qt - y
    if abs(p) >= abs(x):
        f = 0.0
        e_ = (dy - f * x) / p
        dd = (dq - e_ * x) / p
    else:
        dd = 0.0
        e_ = (dq - dd * p) / x
        f = (dy - e_ * p) / x
    a = 0.0
    b = dp / qt - a
    c = dx / qt - b
    V = np.eye(4 * d)
    V[iq, ip], V[iq, ix], V[iy, ip], V[iy, ix] = dd, e_, e_, f
    U = np.eye(4 * d)
    U[ip, iq], U[ip, iy], U[ix, iq], U[ix, iy] = a, b, b, c
    return U @ V


def _case1_mirrored(d, ip, ix, iq, iy, p, x, q, y, pt, qt):
    # U first: momenta to (pt, pt) using (q, y) != 0; then V moves positions using pt != 0
    dp, dx, dq, dy = pt - p, pt - x, qt - q, qt - y
    if abs(q) >= abs(y):
        c = 0.0
        b = (dx - c * y) / q
        a = (dp - b * y) / q
    else:
        a = 0.0
        b = (dp - a * q) / y
        c = (dx - b * q) / y
    dd = 0.0
    e_ = dq / pt - dd
    f = dy / pt - e_
    U = np.eye(4 * d)
    U[ip, iq], U[ip, iy], U[ix, iq], U[ix, iy] = a, b, b, c
    V = np.eye(4 * d)
    V[iq, ip], V[iq, ix], V[iy, ip], V[iy, ix] = dd, e_, e_, f
    return V @ U
