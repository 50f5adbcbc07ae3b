"""Hamiltonians and the exactly solvable sub-flows of the extended system.

The extended Hamiltonian ``H(p, y) + H(x, q)`` splits into two pieces whose
flows are explicit for any ``H``; the optional mixing term
``omega/2 (|p - x|^2 + |q - y|^2)`` is linear and rotates the difference
between the two copies.
"""
from __future__ import annotations

import math

import numpy as np

from . import autodiff
from .errors import DomainError
from .phase import ExtendedState

__all__ = ["Hamiltonian", "flow_A", "flow_B", "flow_C", "extended_energy", "mixing_energy"]


class Hamiltonian:
    """A scalar energy ``fn(p, q)`` on a ``2*dim``-dimensional phase space.

    ``fn`` receives two sequences of scalars and must only use arithmetic and
    the elementary functions of :mod:`expsymp.autodiff`, so it evaluates on
    floats and on dual numbers alike.  Gradients come from a compiled
    forward-mode kernel; set ``compiled=False`` to always use dual passes.
    """

    def __init__(self, fn, dim, name=None, compiled=True):
        self.fn = fn
        self.dim = int(dim)
        self.name = name or getattr(fn, "__name__", "H")
        self._compiled = compiled
        self._kernel = None

    def __repr__(self):
        return f"Hamiltonian({self.name!r}, dim={self.dim})"

    def __call__(self, p, q):
        try:
            v = self.fn([float(a) for a in p], [float(b) for b in q])
        except (ZeroDivisionError, ValueError, OverflowError) as exc:
            raise DomainError(f"{self.name} undefined at this point: {exc}") from exc
        v = float(v)
        if not math.isfinite(v):
            raise DomainError(f"{self.name} is not finite at this point")
        return v

    def energy(self, s):
        return self(s.p, s.q)

    @property
    def kernel(self):
        """Compiled gradient kernel, or None when ``fn`` cannot be traced."""
        if self._kernel is None and self._compiled:
            try:
                self._kernel = autodiff.compile_gradient(self.fn, self.dim)
            except TypeError:
                self._compiled = False
        return self._kernel

    def gradient(self, p, q):
        """``(dH/dp, dH/dq)`` at ``(p, q)``."""
        k = self.kernel
        if k is None:
            return autodiff.grad(self.fn, p, q)
        _, gp, gq = k(p, q)
        return gp, gq

    def __getstate__(self):
        state = dict(self.__dict__)
        state["_kernel"] = None
        return state


def flow_A(H, e, t):
    """Exact flow of ``H(p, y)``: ``p`` and ``y`` frozen, ``x`` and ``q`` drift."""
    Hp, Hq = H.gradient(e.p, e.y)
    return ExtendedState(e.p, e.x - t * Hq, e.q + t * Hp, e.y)


def flow_B(H, e, t):
    """Exact flow of ``H(x, q)``: ``x`` and ``q`` frozen, ``p`` and ``y`` drift."""
    Hp, Hq = H.gradient(e.x, e.q)
    return ExtendedState(e.p - t * Hq, e.x, e.q, e.y + t * Hp)


def flow_C(e, omega, t):
    """Exact flow of the mixing term ``omega/2 (|p-x|^2 + |q-y|^2)``.

    Sums ``p+x`` and ``q+y`` are constant; the differences rotate rigidly at
    angular rate ``2*omega``.
    """
    if omega == 0.0 or t == 0.0:
        return e
    sp = e.p + e.x
    sq = e.q + e.y
    dp = e.p - e.x
    dq = e.q - e.y
    c = math.cos(2.0 * omega * t)
    s = math.sin(2.0 * omega * t)
    dp, dq = c * dp - s * dq, s * dp + c * dq
    return ExtendedState(0.5 * (sp + dp), 0.5 * (sp - dp), 0.5 * (sq + dq), 0.5 * (sq - dq))


def extended_energy(H, e):
    """``H(p, y) + H(x, q)``."""
    return H(e.p, e.y) + H(e.x, e.q)


def mixing_energy(e, omega):
    dp = e.p - e.x
    dq = e.q - e.y
    return 0.5 * omega * float(dp @ dp + dq @ dq)
