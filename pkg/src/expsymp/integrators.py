"""Time steppers: extended-space splittings, projection methods, implicit baselines.

Every State-to-State step returns a :class:`StepResult`.  :class:`Stepper`
binds a Hamiltonian and an :class:`IntegratorSpec` and keeps the per-run
context (step counter, random generator, raw extended state) that some
families need; :func:`integrate` drives a Stepper and samples diagnostics.
"""
from __future__ import annotations

import math
import time
from dataclasses import dataclass

import numpy as np

from .errors import ConfigError, DomainError, NonConvergenceError, StepError
from .flows import flow_A, flow_B, flow_C
from .phase import (
    ExtendedState,
    FactorPair,
    State,
    WeightVectors,
    discrepancy,
    embed,
    project_double_factor,
    project_single_factor,
    project_weighted,
)

__all__ = [
    "FAMILIES",
    "IntegratorSpec",
    "StepResult",
    "GAMMA1",
    "GAMMA2",
    "GAUSS_A",
    "GAUSS_B",
    "GAUSS_C",
    "strang_extended",
    "tao_strang",
    "yoshida4",
    "extended_step",
    "exp_symp_step",
    "weighted_projection_step",
    "pihajoki_step",
    "midpoint_permutation",
    "tao_run_step",
    "implicit_midpoint_step",
    "gauss4_step",
    "semiexplicit_step",
    "explicit_euler_step",
    "Stepper",
    "integrate",
    "method_spec",
    "METHOD_NAMES",
]

FAMILIES = (
    "exp_symp",
    "pihajoki",
    "pihajoki_midmix",
    "tao",
    "semiexplicit",
    "implicit_midpoint",
    "gauss4",
    "weighted_projection",
    "explicit_euler",
)
_POLICIES = ("constant", "alternating", "fresh_random_per_step")
# families that evolve a raw extended state across steps
_RAW = ("pihajoki", "pihajoki_midmix", "tao")


@dataclass(frozen=True)
class IntegratorSpec:
    """Which method to run and its parameters.

    ``family="explicit_euler"`` is a first-order, non-symplectic control.
    For ``exp_symp`` with ``factors.mu0`` equal to ``factors.lambda0`` the
    double-factor projection reduces to the single-factor one.
    """

    family: str
    order: int = 2
    factors: FactorPair | None = None
    weights: WeightVectors | None = None
    weight_policy: str = "constant"
    projection_mode: str = "standard"
    omega: float = 0.0
    tol: float = 1e-13
    max_iters: int = 100
    rng_seed: int | None = None

    def __post_init__(self):
        if self.family not in FAMILIES:
            raise ConfigError(f"unknown family {self.family!r}")
        if self.order not in (1, 2, 4):
            raise ConfigError(f"order must be 2 or 4, got {self.order!r}")
        fixed = {"implicit_midpoint": 2, "gauss4": 4, "explicit_euler": 1}
        if self.family in fixed and self.order != fixed[self.family]:
            raise ConfigError(f"{self.family} has order {fixed[self.family]}, not {self.order}")
        if self.family not in fixed and self.order == 1:
            raise ConfigError("order must be 2 or 4")
        if not (self.tol > 0):
            raise ConfigError("tol must be positive")
        if int(self.max_iters) != self.max_iters or self.max_iters < 1:
            raise ConfigError("max_iters must be an integer >= 1")
        if self.family == "exp_symp" and self.factors is None:
            raise ConfigError("exp_symp needs factors")
        if self.family == "weighted_projection":
            if self.weight_policy not in _POLICIES:
                raise ConfigError(f"unknown weight policy {self.weight_policy!r}")
            if self.weights is None and self.weight_policy != "fresh_random_per_step":
                raise ConfigError("weighted_projection needs weights")
        if self.projection_mode not in ("standard", "definition1"):
            raise ConfigError(f"unknown projection mode {self.projection_mode!r}")
        if not math.isfinite(self.omega):
            raise ConfigError("omega must be finite")


@dataclass
class StepResult:
    state: State
    extended: ExtendedState | None = None
    iterations_used: int = 0
    discrepancy_pre_projection: float = 0.0


# --- extended-space compositions ------------------------------------------

GAMMA1 = 1.0 / (2.0 - 2.0 ** (1.0 / 3.0))
GAMMA2 = 1.0 - 2.0 * GAMMA1


def strang_extended(H, e, h):
    """``A(h/2) B(h) A(h/2)``."""
    e = flow_A(H, e, 0.5 * h)
    e = flow_B(H, e, h)
    return flow_A(H, e, 0.5 * h)


def tao_strang(H, e, h, omega):
    """``A(h/2) B(h/2) C(h) B(h/2) A(h/2)`` with mixing strength ``omega``."""
    e = flow_A(H, e, 0.5 * h)
    e = flow_B(H, e, 0.5 * h)
    e = flow_C(e, omega, h)
    e = flow_B(H, e, 0.5 * h)
    return flow_A(H, e, 0.5 * h)


def yoshida4(base):
    """Triple-jump composition of a symmetric second-order step.

    ``base(H, e, h, *args)`` becomes ``base(g1 h) base(g2 h) base(g1 h)``.
    """

    def step(H, e, h, *args):
        e = base(H, e, GAMMA1 * h, *args)
        e = base(H, e, GAMMA2 * h, *args)
        return base(H, e, GAMMA1 * h, *args)

    step.__name__ = f"yoshida4_{getattr(base, '__name__', 'base')}"
    return step


_strang4 = yoshida4(strang_extended)
_tao4 = yoshida4(tao_strang)


def extended_step(H, e, h, order=2, omega=None):
    """One extended-space step: Strang (``omega is None``) or Tao, order 2 or 4."""
    if omega is None:
        return strang_extended(H, e, h) if order == 2 else _strang4(H, e, h)
    return tao_strang(H, e, h, omega) if order == 2 else _tao4(H, e, h, omega)


def _mean_state(e):
    return State(0.5 * (e.p + e.x), 0.5 * (e.q + e.y))


# --- projection methods ----------------------------------------------------


def exp_symp_step(H, s, h, spec, step_index=1):
    """Embed, advance in the extended space, and project with the factors.

    Uses the single-factor projection when ``lambda0 == mu0``, otherwise the
    double-factor one (``step_index`` 1-based, odd steps weight momenta by
    ``lambda0``).
    """
    if h == 0:
        return StepResult(State(s.p.copy(), s.q.copy()), embed(s), 0, 0.0)
    e = extended_step(H, embed(s), h, spec.order)
    f = spec.factors
    if f.lambda0 == f.mu0:
        out = project_single_factor(e, f)
    else:
        out = project_double_factor(e, f, step_index)
    return StepResult(out, e, 0, discrepancy(e))


def weighted_projection_step(H, s, h, weights, order=2, mode="standard"):
    e = extended_step(H, embed(s), h, order)
    return StepResult(project_weighted(e, weights, mode), e, 0, discrepancy(e))


def midpoint_permutation(e):
    """Replace both copies by their mean; the result lies on the diagonal."""
    mp = 0.5 * (e.p + e.x)
    mq = 0.5 * (e.q + e.y)
    return ExtendedState(mp, mp.copy(), mq, mq.copy())


def pihajoki_step(H, e, h, mix="none", order=2):
    """Advance a raw extended state; optionally average the copies afterwards."""
    if mix not in ("none", "midpoint_permutation"):
        raise ConfigError(f"unknown mix {mix!r}")
    e = extended_step(H, e, h, order)
    return midpoint_permutation(e) if mix == "midpoint_permutation" else e


def tao_run_step(H, e, h, omega, order=2):
    """Advance a raw extended state with Tao's mixed splitting."""
    return extended_step(H, e, h, order, omega)


# --- implicit baselines ----------------------------------------------------


def _rhs(H, p, q):
    gp, gq = H.gradient(p, q)
    return -gq, gp


def implicit_midpoint_step(H, s, h, tol=1e-13, max_iters=100):
    """Implicit midpoint rule solved by fixed-point iteration.

    Starts from the explicit Euler predictor and stops once two successive
    iterates are closer than ``tol`` (two-norm).
    """
    p0, q0 = s.p, s.q
    fp, fq = _rhs(H, p0, q0)
    p1, q1 = p0 + h * fp, q0 + h * fq
    diff = math.inf
    for it in range(1, max_iters + 1):
        fp, fq = _rhs(H, 0.5 * (p0 + p1), 0.5 * (q0 + q1))
        np_, nq = p0 + h * fp, q0 + h * fq
        diff = math.sqrt(float((np_ - p1) @ (np_ - p1) + (nq - q1) @ (nq - q1)))
        p1, q1 = np_, nq
        if diff < tol:
            return StepResult(State(p1, q1), None, it, 0.0)
        if not math.isfinite(diff):
            break
    raise NonConvergenceError(
        f"implicit midpoint non-convergence after {max_iters} iterations, residual {diff:.3e}",
        diff,
        max_iters,
    )


_SQ3 = math.sqrt(3.0)
GAUSS_A = np.array([[0.25, 0.25 - _SQ3 / 6], [0.25 + _SQ3 / 6, 0.25]])
GAUSS_B = np.array([0.5, 0.5])
GAUSS_C = np.array([0.5 - _SQ3 / 6, 0.5 + _SQ3 / 6])


def gauss4_step(H, s, h, tol=1e-13, max_iters=100):
    """Two-stage Gauss-Legendre step, stage values found by fixed-point iteration."""
    (a11, a12), (a21, a22) = GAUSS_A
    p0, q0 = s.p, s.q
    y1p, y1q, y2p, y2q = p0, q0, p0, q0
    diff = math.inf
    for it in range(1, max_iters + 1):
        k1p, k1q = _rhs(H, y1p, y1q)
        k2p, k2q = _rhs(H, y2p, y2q)
        n1p = p0 + h * (a11 * k1p + a12 * k2p)
        n1q = q0 + h * (a11 * k1q + a12 * k2q)
        n2p = p0 + h * (a21 * k1p + a22 * k2p)
        n2q = q0 + h * (a21 * k1q + a22 * k2q)
        d = np.concatenate((n1p - y1p, n1q - y1q, n2p - y2p, n2q - y2q))
        diff = math.sqrt(float(d @ d))
        y1p, y1q, y2p, y2q = n1p, n1q, n2p, n2q
        if diff < tol:
            out = State(p0 + 0.5 * h * (k1p + k2p), q0 + 0.5 * h * (k1q + k2q))
            return StepResult(out, None, it, 0.0)
        if not math.isfinite(diff):
            break
    raise NonConvergenceError(
        f"gauss4 non-convergence after {max_iters} iterations, residual {diff:.3e}",
        diff,
        max_iters,
    )


def _shift(e, rho_p, rho_q):
    # e + A^T rho
    return ExtendedState(e.p + rho_p, e.x - rho_p, e.q + rho_q, e.y - rho_q)


def semiexplicit_step(H, s, h, tol=1e-13, max_iters=100, order=2):
    """Symmetric projection: perturb before and after the extended step.

    Finds ``rho`` with ``A[phi_h(embed(s) + A^T rho) + A^T rho] = 0``, where
    ``A(p, x, q, y) = (p - x, q - y)``, by Broyden's method started at
    ``rho = 0`` with the exact small-step Jacobian ``4 I``.
    """
    d = s.dim
    e0 = embed(s)

    def residual(rho):
        e = _shift(extended_step(H, _shift(e0, rho[:d], rho[d:]), h, order), rho[:d], rho[d:])
        return np.concatenate((e.p - e.x, e.q - e.y)), e

    rho = np.zeros(2 * d)
    F, e = residual(rho)
    delta0 = float(np.linalg.norm(F))
    fn = delta0
    if fn <= tol:
        return StepResult(_mean_state(e), e, 1, delta0)
    Binv = np.eye(2 * d) / 4.0
    for it in range(1, max_iters + 1):
        step = -Binv @ F
        rho = rho + step
        Fn, e = residual(rho)
        fn = float(np.linalg.norm(Fn))
        if fn <= tol or float(np.linalg.norm(step)) <= tol:
            return StepResult(_mean_state(e), e, it, delta0)
        if not math.isfinite(fn):
            break
        y = Fn - F
        By = Binv @ y
        denom = float(step @ By)
        if denom != 0.0:
            Binv = Binv + np.outer(step - By, step @ Binv) / denom
        F = Fn
    raise NonConvergenceError(
        f"semiexplicit non-convergence after {max_iters} iterations, residual {fn:.3e}", fn, max_iters
    )


def explicit_euler_step(H, s, h):
    fp, fq = _rhs(H, s.p, s.q)
    return StepResult(State(s.p + h * fp, s.q + h * fq), None, 0, 0.0)


# --- run driver ------------------------------------------------------------


class Stepper:
    """Stateful wrapper turning an IntegratorSpec into a State-to-State step.

    Raw extended families (``pihajoki``, ``pihajoki_midmix``, ``tao``) carry
    their extended state between steps; their State is the mean of the two
    copies.  Call :meth:`reset` before a run.
    """

    def __init__(self, H, spec):
        self.H = H
        self.spec = spec
        self.reset(None)

    def reset(self, s0):
        self.n = 0
        self.rng = np.random.default_rng(self.spec.rng_seed)
        self.ext = None if s0 is None else embed(s0)
        self._draw = None

    def _weights(self):
        spec = self.spec
        if spec.weight_policy == "constant":
            return spec.weights
        if spec.weight_policy == "alternating":
            return spec.weights if self.n % 2 == 1 else spec.weights.swapped()
        # fresh pair on odd steps, the same pair reversed on even steps
        if self.n % 2 == 1 or self._draw is None:
            a, b = self.rng.random(2)
            self._draw = (a, b)
        a, b = self._draw
        if self.n % 2 == 0:
            a, b = b, a
        return WeightVectors(np.full(self.H.dim, a), np.full(self.H.dim, b))

    def step(self, s, h):
        self.n += 1
        spec, H = self.spec, self.H
        fam = spec.family
        if fam == "exp_symp":
            return exp_symp_step(H, s, h, spec, self.n)
        if fam == "weighted_projection":
            return weighted_projection_step(H, s, h, self._weights(), spec.order, spec.projection_mode)
        if fam == "semiexplicit":
            return semiexplicit_step(H, s, h, spec.tol, spec.max_iters, spec.order)
        if fam == "implicit_midpoint":
            return implicit_midpoint_step(H, s, h, spec.tol, spec.max_iters)
        if fam == "gauss4":
            return gauss4_step(H, s, h, spec.tol, spec.max_iters)
        if fam == "explicit_euler":
            return explicit_euler_step(H, s, h)
        if self.ext is None:
            self.ext = embed(s)
        if fam == "tao":
            e = tao_run_step(H, self.ext, h, spec.omega, spec.order)
        else:
            mix = "midpoint_permutation" if fam == "pihajoki_midmix" else "none"
            e = pihajoki_step(H, self.ext, h, mix, spec.order)
        self.ext = e
        return StepResult(_mean_state(e), e, 0, discrepancy(e))

    def one_step_map(self, h):
        """``s -> state after one step from embed(s)`` with a fresh context."""

        def f(s):
            self.reset(s)
            return self.step(s, h).state

        return f


def integrate(H, s0, spec, h, n_steps, stride=1, reference=None, invariant=None, observers=(), problem=None):
    """Run ``n_steps`` steps of size ``h`` and sample every ``stride`` steps.

    ``reference(t) -> (P, Q)`` (arrays over sample times) supplies the exact
    trajectory for the global error; without it GE is NaN.  ``invariant(s)``
    returns a vector first integral whose drift from ``s0`` is recorded.
    ``observers`` are called as ``obs(n, t, state, result)`` at each sample.
    A failing step raises StepError carrying the 1-based step index.
    """
    from .diagnostics import RunRecord, global_error

    if n_steps < 1:
        raise ConfigError("n_steps must be >= 1")
    if stride < 1:
        raise ConfigError("stride must be >= 1")
    stepper = Stepper(H, spec)
    stepper.reset(s0)
    E0 = H.energy(s0)
    J0 = None if invariant is None else np.asarray(invariant(s0), dtype=float)
    n_samples = n_steps // stride
    d = s0.dim
    t = np.empty(n_samples)
    P = np.empty((n_samples, d))
    Q = np.empty((n_samples, d))
    GHE = np.empty(n_samples)
    delta = np.empty(n_samples)
    iters = np.empty(n_samples, dtype=int)
    Jd = None if J0 is None else np.empty((n_samples, J0.size))
    s = s0
    k = 0
    clock = time.perf_counter()
    for n in range(1, n_steps + 1):
        try:
            res = stepper.step(s, h)
            s = res.state
            if n % stride == 0:
                t[k] = n * h
                P[k], Q[k] = s.p, s.q
                GHE[k] = abs(H.energy(s) - E0)
                delta[k] = res.discrepancy_pre_projection
                iters[k] = res.iterations_used
                if Jd is not None:
                    Jd[k] = np.abs(np.asarray(invariant(s)) - J0)
                for obs in observers:
                    obs(n, t[k], s, res)
                k += 1
        except (DomainError, NonConvergenceError, FloatingPointError) as exc:
            raise StepError(n, exc) from exc
    wall = time.perf_counter() - clock
    if reference is not None:
        RP, RQ = reference(t)
        GE = np.sqrt(np.sum((P - RP) ** 2, axis=1) + np.sum((Q - RQ) ** 2, axis=1))
    else:
        GE = np.full(n_samples, np.nan)
    meta = {
        "spec": spec,
        "problem": problem or H.name,
        "h": h,
        "n_steps": n_steps,
        "stride": stride,
        "seed": spec.rng_seed,
        "wall_clock_seconds": wall,
    }
    return RunRecord(meta, t, GE, GHE, delta, Jd, P=P, Q=Q, iterations=iters)


# --- named methods ---------------------------------------------------------

METHOD_NAMES = (
    "ExpSymp2",
    "ExpSymp4",
    "IRK2",
    "IRK4",
    "SemiSymp2",
    "SemiSymp4",
    "Pihajoki2",
    "PihajokiMix2",
    "Tao2",
    "Euler",
)


def method_spec(name, **overrides):
    """IntegratorSpec for a named method, e.g. ``method_spec("ExpSymp4")``.

    ExpSymp defaults to the factors ``(1/e, 1/pi)``; Tao to ``omega = 10``.
    """
    base = {
        "ExpSymp2": dict(family="exp_symp", order=2, factors=FactorPair(1 / math.e, 1 / math.pi)),
        "ExpSymp4": dict(family="exp_symp", order=4, factors=FactorPair(1 / math.e, 1 / math.pi)),
        "IRK2": dict(family="implicit_midpoint", order=2),
        "IRK4": dict(family="gauss4", order=4),
        "SemiSymp2": dict(family="semiexplicit", order=2),
        "SemiSymp4": dict(family="semiexplicit", order=4),
        "Pihajoki2": dict(family="pihajoki", order=2),
        "PihajokiMix2": dict(family="pihajoki_midmix", order=2),
        "Tao2": dict(family="tao", order=2, omega=10.0),
        "Euler": dict(family="explicit_euler", order=1),
    }
    if name not in base:
        raise ConfigError(f"unknown method {name!r}; choose from {', '.join(METHOD_NAMES)}")
    kw = base[name]
    kw.update(overrides)
    return IntegratorSpec(**kw)
