"""Forward-mode automatic differentiation with dual numbers.

Hamiltonians are written once as plain Python functions ``fn(p, q)`` of two
sequences of scalars, using the elementary functions exported here
(:func:`sqrt`, :func:`sin`, :func:`cos`, :func:`exp`, :func:`log`,
:func:`powi`) instead of :mod:`math`.  The same function then evaluates on
floats, on :class:`Dual` numbers (one directional derivative per pass) and on
tracer scalars that record the forward tangent rules as straight-line code.

:func:`grad` is the reference path: 2d independent dual passes.
:func:`compile_gradient` applies the identical tangent rules at code-generation
time and jit-compiles the result, which is what the integrators call in their
inner loops.
"""
from __future__ import annotations

import hashlib
import importlib.util
import math
import os
import sys
import tempfile
from pathlib import Path

import numpy as np

from .errors import DomainError

__all__ = [
    "Dual",
    "sqrt",
    "sin",
    "cos",
    "exp",
    "log",
    "powi",
    "grad",
    "value_and_grad",
    "compile_gradient",
    "GradientKernel",
]


class Dual:
    """Scalar dual number ``value + deriv * eps`` with ``eps**2 = 0``."""

    __slots__ = ("value", "deriv")

    def __init__(self, value, deriv=0.0):
        self.value = float(value)
        self.deriv = float(deriv)

    def __repr__(self):
        return f"Dual({self.value!r}, {self.deriv!r})"

    def __add__(self, other):
        if isinstance(other, Dual):
            return Dual(self.value + other.value, self.deriv + other.deriv)
        return Dual(self.value + other, self.deriv)

    __radd__ = __add__

    def __sub__(self, other):
        if isinstance(other, Dual):
            return Dual(self.value - other.value, self.deriv - other.deriv)
        return Dual(self.value - other, self.deriv)

    def __rsub__(self, other):
        return Dual(other - self.value, -self.deriv)

    def __mul__(self, other):
        if isinstance(other, Dual):
            return Dual(
                self.value * other.value,
                self.deriv * other.value + self.value * other.deriv,
            )
        return Dual(self.value * other, self.deriv * other)

    __rmul__ = __mul__

    def __truediv__(self, other):
        if isinstance(other, Dual):
            v = self.value / other.value
            return Dual(v, (self.deriv - v * other.deriv) / other.value)
        return Dual(self.value / other, self.deriv / other)

    def __rtruediv__(self, other):
        v = other / self.value
        return Dual(v, -v * self.deriv / self.value)

    def __neg__(self):
        return Dual(-self.value, -self.deriv)

    def __pos__(self):
        return self

    def __pow__(self, n):
        if _is_integral(n):
            return powi(self, int(n))
        return exp(n * log(self))

    def __rpow__(self, base):
        return exp(self * math.log(base))

    # comparisons act on the value so guards in user code keep working
    def __lt__(self, other):
        return self.value < _val(other)

    def __le__(self, other):
        return self.value <= _val(other)

    def __gt__(self, other):
        return self.value > _val(other)

    def __ge__(self, other):
        return self.value >= _val(other)

    def __float__(self):
        return self.value


def _val(x):
    return x.value if isinstance(x, Dual) else x


def _is_integral(n):
    if isinstance(n, (int, np.integer)):
        return True
    return isinstance(n, float) and n.is_integer() and abs(n) < 2**31


# --- elementary functions --------------------------------------------------


def sqrt(x):
    if isinstance(x, Dual):
        v = math.sqrt(x.value)
        return Dual(v, 0.5 * x.deriv / v)
    if isinstance(x, _Trace):
        return x._unary("math.sqrt({a})", "0.5 / {v}")
    return math.sqrt(x)


def sin(x):
    if isinstance(x, Dual):
        return Dual(math.sin(x.value), math.cos(x.value) * x.deriv)
    if isinstance(x, _Trace):
        return x._unary("math.sin({a})", "math.cos({a})")
    return math.sin(x)


def cos(x):
    if isinstance(x, Dual):
        return Dual(math.cos(x.value), -math.sin(x.value) * x.deriv)
    if isinstance(x, _Trace):
        return x._unary("math.cos({a})", "-math.sin({a})")
    return math.cos(x)


def exp(x):
    if isinstance(x, Dual):
        v = math.exp(x.value)
        return Dual(v, v * x.deriv)
    if isinstance(x, _Trace):
        return x._unary("math.exp({a})", "{v}")
    return math.exp(x)


def log(x):
    if isinstance(x, Dual):
        return Dual(math.log(x.value), x.deriv / x.value)
    if isinstance(x, _Trace):
        return x._unary("math.log({a})", "1.0 / {a}")
    return math.log(x)


def powi(x, n):
    """``x**n`` for integer ``n``."""
    n = int(n)
    if isinstance(x, Dual):
        if n == 0:
            return Dual(1.0, 0.0)
        return Dual(x.value**n, n * x.value ** (n - 1) * x.deriv)
    if isinstance(x, _Trace):
        if n == 0:
            return 1.0
        if n == 1:
            return x
        if n == 2:
            return x._unary("{a} * {a}", "2.0 * {a}")
        return x._unary(f"{{a}} ** {n}", f"{float(n)!r} * {{a}} ** {n - 1}")
    return x**n


# --- gradient by directional passes ----------------------------------------


def _unpack(H, z, q):
    fn = getattr(H, "fn", H)
    if q is None:
        if hasattr(z, "p") and hasattr(z, "q"):
            p, q = z.p, z.q
        else:
            z = np.asarray(z, dtype=float)
            p, q = z[: z.size // 2], z[z.size // 2 :]
    else:
        p = z
    p = [float(v) for v in np.atleast_1d(p)]
    q = [float(v) for v in np.atleast_1d(q)]
    if len(p) != len(q):
        raise ValueError("p and q must have the same length")
    return fn, p, q


def value_and_grad(H, z, q=None):
    """Return ``(H, dH/dp, dH/dq)`` using one dual pass per coordinate.

    ``H`` is a Hamiltonian object or a bare ``fn(p, q)``; the point is either
    a State, a flat ``(p, q)`` vector, or ``p`` and ``q`` passed separately.
    """
    fn, p, q = _unpack(H, z, q)
    d = len(p)
    coords = p + q
    for k, c in enumerate(coords):
        if not math.isfinite(c):
            raise DomainError(f"coordinate {k} is not finite", index=k)
    out = np.empty(2 * d)
    value = float("nan")
    for k in range(2 * d):
        seeded = [Dual(c, 1.0 if i == k else 0.0) for i, c in enumerate(coords)]
        try:
            r = fn(seeded[:d], seeded[d:])
        except (ZeroDivisionError, ValueError, OverflowError) as exc:
            raise DomainError(f"non-finite derivative along coordinate {k}: {exc}", index=k) from exc
        if isinstance(r, Dual):
            value, der = r.value, r.deriv
        else:
            value, der = float(r), 0.0
        if not (math.isfinite(value) and math.isfinite(der)):
            raise DomainError(f"non-finite derivative along coordinate {k}", index=k)
        out[k] = der
    return value, out[:d], out[d:]


def grad(H, z, q=None):
    """Return ``(dH/dp, dH/dq)`` at the given point."""
    _, gp, gq = value_and_grad(H, z, q)
    return gp, gq


# --- tracing compiler ------------------------------------------------------


class _Tape:
    def __init__(self):
        self.lines = []
        self.count = 0

    def new(self):
        name = f"v{self.count}"
        self.count += 1
        return name

    def emit(self, line):
        self.lines.append("    " + line)


class _Trace:
    """Symbolic scalar that emits value and tangent code as it is used.

    ``tangent`` maps an input direction to the variable holding the partial
    derivative in that direction; absent directions are structurally zero.
    """

    __slots__ = ("tape", "name", "tangent")

    def __init__(self, tape, name, tangent):
        self.tape = tape
        self.name = name
        self.tangent = tangent

    def _result(self, expr, tangent_exprs):
        tape = self.tape
        name = tape.new()
        tape.emit(f"{name} = {expr}")
        tangent = {}
        for k, texpr in tangent_exprs.items():
            if _is_plain_name(texpr):
                tangent[k] = texpr
            else:
                tname = f"{name}_{k}"
                tape.emit(f"{tname} = {texpr}")
                tangent[k] = tname
        return _Trace(tape, name, tangent)

    def _unary(self, value_tpl, scale_tpl):
        name = self.tape.new()
        self.tape.emit(f"{name} = {value_tpl.format(a=self.name)}")
        scale = self.tape.new()
        self.tape.emit(f"{scale} = {scale_tpl.format(a=self.name, v=name)}")
        tangent = {}
        for k, t in self.tangent.items():
            tname = f"{name}_{k}"
            self.tape.emit(f"{tname} = {scale} * {t}")
            tangent[k] = tname
        return _Trace(self.tape, name, tangent)

    def __add__(self, other):
        if isinstance(other, _Trace):
            keys = self.tangent.keys() | other.tangent.keys()
            tex = {}
            for k in sorted(keys):
                a, b = self.tangent.get(k), other.tangent.get(k)
                tex[k] = a if b is None else b if a is None else f"{a} + {b}"
            return self._result(f"{self.name} + {other.name}", tex)
        return self._result(f"{self.name} + {_const(other)}", dict(self.tangent))

    __radd__ = __add__

    def __sub__(self, other):
        if isinstance(other, _Trace):
            keys = self.tangent.keys() | other.tangent.keys()
            tex = {}
            for k in sorted(keys):
                a, b = self.tangent.get(k), other.tangent.get(k)
                tex[k] = f"-{b}" if a is None else a if b is None else f"{a} - {b}"
            return self._result(f"{self.name} - {other.name}", tex)
        return self._result(f"{self.name} - {_const(other)}", dict(self.tangent))

    def __rsub__(self, other):
        tex = {k: f"-{t}" for k, t in self.tangent.items()}
        return self._result(f"{_const(other)} - {self.name}", tex)

    def __mul__(self, other):
        if isinstance(other, _Trace):
            keys = self.tangent.keys() | other.tangent.keys()
            tex = {}
            for k in sorted(keys):
                a, b = self.tangent.get(k), other.tangent.get(k)
                parts = []
                if a is not None:
                    parts.append(f"{a} * {other.name}")
                if b is not None:
                    parts.append(f"{self.name} * {b}")
                tex[k] = " + ".join(parts)
            return self._result(f"{self.name} * {other.name}", tex)
        c = _const(other)
        return self._result(f"{self.name} * {c}", {k: f"{t} * {c}" for k, t in self.tangent.items()})

    __rmul__ = __mul__

    def __truediv__(self, other):
        if isinstance(other, _Trace):
            inv = self.tape.new()
            self.tape.emit(f"{inv} = 1.0 / {other.name}")
            name = self.tape.new()
            self.tape.emit(f"{name} = {self.name} * {inv}")
            keys = self.tangent.keys() | other.tangent.keys()
            tangent = {}
            for k in sorted(keys):
                a, b = self.tangent.get(k), other.tangent.get(k)
                if b is None:
                    expr = f"{a} * {inv}"
                elif a is None:
                    expr = f"-{name} * {b} * {inv}"
                else:
                    expr = f"({a} - {name} * {b}) * {inv}"
                tname = f"{name}_{k}"
                self.tape.emit(f"{tname} = {expr}")
                tangent[k] = tname
            return _Trace(self.tape, name, tangent)
        c = _const(other)
        return self._result(f"{self.name} / {c}", {k: f"{t} / {c}" for k, t in self.tangent.items()})

    def __rtruediv__(self, other):
        name = self.tape.new()
        self.tape.emit(f"{name} = {_const(other)} / {self.name}")
        scale = self.tape.new()
        self.tape.emit(f"{scale} = -{name} / {self.name}")
        tangent = {}
        for k, t in self.tangent.items():
            tname = f"{name}_{k}"
            self.tape.emit(f"{tname} = {scale} * {t}")
            tangent[k] = tname
        return _Trace(self.tape, name, tangent)

    def __neg__(self):
        return self._result(f"-{self.name}", {k: f"-{t}" for k, t in self.tangent.items()})

    def __pos__(self):
        return self

    def __pow__(self, n):
        if _is_integral(n):
            return powi(self, int(n))
        return exp(n * log(self))

    def __rpow__(self, base):
        return exp(self * math.log(base))

    def _no_branch(self, *_):
        raise TypeError("value-dependent control flow cannot be traced")

    __lt__ = __le__ = __gt__ = __ge__ = __bool__ = __float__ = _no_branch


def _is_plain_name(expr):
    return expr.replace("_", "").isalnum() and not expr[0].isdigit()


def _const(c):
    c = float(c)
    if not math.isfinite(c):
        raise TypeError("non-finite constant in traced Hamiltonian")
    return f"({c!r})"


def _generate_source(fn, d, jit):
    tape = _Tape()
    p_in, q_in = [], []
    for k in range(d):
        tape.emit(f"a{k} = p[{k}]")
        p_in.append(_Trace(tape, f"a{k}", {k: "1.0"}))
    for k in range(d):
        tape.emit(f"b{k} = q[{k}]")
        q_in.append(_Trace(tape, f"b{k}", {d + k: "1.0"}))
    out = fn(p_in, q_in)
    if isinstance(out, _Trace):
        value, tangent = out.name, out.tangent
    else:
        value, tangent = _const(out), {}
    body = list(tape.lines)
    body.append(f"    gp = np.empty({d})")
    body.append(f"    gq = np.empty({d})")
    checks = []
    for k in range(2 * d):
        t = tangent.get(k, "0.0")
        target = f"gp[{k}]" if k < d else f"gq[{k - d}]"
        body.append(f"    {target} = {t}")
        checks.append(f"({t} - {t})")
    body.append(f"    chk = ({value} - {value}) + " + " + ".join(checks))
    body.append(f"    return {value}, gp, gq, chk")
    head = ["import math", "import numpy as np"]
    if jit:
        head += ["import numba", "", "", "@numba.njit(cache=True, error_model='numpy')"]
    else:
        head += ["", ""]
    return "\n".join(head + ["def kernel(p, q):"] + body) + "\n"


def _cache_dir():
    root = os.environ.get("EXPSYMP_CACHE")
    candidates = [Path(root)] if root else []
    candidates += [Path.home() / ".cache" / "expsymp", Path(tempfile.gettempdir()) / "expsymp-cache"]
    for c in candidates:
        try:
            c.mkdir(parents=True, exist_ok=True)
            probe = c / ".probe"
            probe.write_text("")
            return c
        except OSError:
            continue
    raise OSError("no writable cache directory for generated kernels")


def _jit_available():
    if os.environ.get("EXPSYMP_NO_JIT"):
        return False
    try:
        import numba  # noqa: F401
    except ImportError:
        return False
    return True


class GradientKernel:
    """Compiled ``(p, q) -> (H, dH/dp, dH/dq)`` with a dual-number fallback.

    Non-finite results are re-run through :func:`value_and_grad`, so errors
    carry the same coordinate index as the reference path.
    """

    def __init__(self, fn, d, source, kernel, jitted):
        self.fn = fn
        self.d = d
        self.source = source
        self.jitted = jitted
        self._kernel = kernel

    def __call__(self, p, q):
        v, gp, gq, chk = self._kernel(p, q)
        if chk != 0.0:
            value_and_grad(self.fn, p, q)
            raise DomainError("non-finite gradient")
        return v, gp, gq

    @property
    def raw(self):
        """The compiled function itself, usable inside other jitted code.

        Returns ``(value, gp, gq, chk)`` where ``chk`` is 0.0 exactly when all
        outputs are finite.
        """
        return self._kernel


def compile_gradient(fn, d, jit=None):
    """Trace ``fn`` once and compile its value-and-gradient kernel.

    Raises TypeError when ``fn`` branches on values (it cannot be traced); the
    caller should fall back to :func:`value_and_grad`.
    """
    if jit is None:
        jit = _jit_available()
    source = _generate_source(fn, d, jit)
    digest = hashlib.sha1(source.encode()).hexdigest()[:20]
    path = _cache_dir() / f"kernel_{digest}.py"
    if not path.exists():
        tmp = path.with_suffix(f".{os.getpid()}.tmp")
        tmp.write_text(source)
        os.replace(tmp, path)
    name = f"expsymp_kernel_{digest}"
    module = sys.modules.get(name)
    if module is None:
        # numba's on-disk cache re-imports the module by name, so register it
        spec = importlib.util.spec_from_file_location(name, path)
        module = importlib.util.module_from_spec(spec)
        sys.modules[name] = module
        spec.loader.exec_module(module)
    return GradientKernel(fn, d, source, module.kernel, jit)
