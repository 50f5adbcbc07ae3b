"""Command-line experiment runner.

Configs are plain text, one ``key = value`` per line; ``#`` starts a
comment, keys are dotted (``method.name``, ``run.h``).  Values are numbers,
arithmetic expressions over numbers with ``e``, ``pi`` and ``sqrt``, lists in
brackets, or bare words (strings).  See the README for the full key list.

Exit codes: 0 success, 2 configuration error, 3 runtime failure.
"""
from __future__ import annotations

import argparse
import ast
import math
import operator
import os
import sys
import tempfile
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from . import __version__
from .diagnostics import (
    global_error,
    lyapunov_exponent,
    nearest_neighbor_spread,
    poincare_section,
)
from .errors import ConfigError, ExpSympError, ReferenceUnreliableError
from .integrators import METHOD_NAMES, IntegratorSpec, extended_step, integrate, method_spec
from .phase import ExtendedState, FactorPair, State, WeightVectors
from .problems import (
    PRESETS,
    default_reference_step,
    get_problem,
    integrable1d_exact,
    reference_solution,
)

__all__ = [
    "parse_config",
    "RunConfig",
    "run_config_from",
    "write_csv",
    "read_csv",
    "execute_run",
    "main",
]


# --- config parsing --------------------------------------------------------

_BINOPS = {
    ast.Add: operator.add,
    ast.Sub: operator.sub,
    ast.Mult: operator.mul,
    ast.Div: operator.truediv,
    ast.Pow: operator.pow,
}
_NAMES = {"e": math.e, "pi": math.pi, "inf": math.inf, "true": True, "false": False}


def _eval(node):
    if isinstance(node, ast.Constant) and isinstance(node.value, (int, float, str)):
        return node.value
    if isinstance(node, ast.UnaryOp) and isinstance(node.op, (ast.USub, ast.UAdd)):
        v = _eval(node.operand)
        return -v if isinstance(node.op, ast.USub) else +v
    if isinstance(node, ast.BinOp) and type(node.op) in _BINOPS:
        return _BINOPS[type(node.op)](_eval(node.left), _eval(node.right))
    if isinstance(node, ast.Name):
        return _NAMES.get(node.id.lower(), node.id)
    if isinstance(node, (ast.List, ast.Tuple)):
        return [_eval(x) for x in node.elts]
    if (
        isinstance(node, ast.Call)
        and isinstance(node.func, ast.Name)
        and node.func.id == "sqrt"
        and len(node.args) == 1
    ):
        return math.sqrt(_eval(node.args[0]))
    raise ValueError("unsupported expression")


def parse_value(text):
    text = text.strip()
    try:
        return _eval(ast.parse(text, mode="eval").body)
    except (SyntaxError, ValueError, TypeError, ZeroDivisionError):
        return text


def parse_config(text):
    """Parse ``key = value`` lines into a flat dict of dotted keys."""
    out = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected 'key = value', got {raw.strip()!r}")
        key, value = (s.strip() for s in line.split("=", 1))
        if not key or any(not part.isidentifier() for part in key.split(".")):
            raise ConfigError(f"line {lineno}: bad key {key!r}")
        if key in out:
            raise ConfigError(f"line {lineno}: duplicate key {key!r}")
        out[key] = parse_value(value)
    return out


def _num(cfg, key, default=None, kind=float):
    v = cfg.get(key, default)
    if v is None:
        raise ConfigError(f"missing required key {key!r}")
    if isinstance(v, bool) or not isinstance(v, (int, float)):
        raise ConfigError(f"{key} must be a number, got {v!r}")
    if kind is int:
        if int(v) != v:
            raise ConfigError(f"{key} must be an integer, got {v!r}")
        return int(v)
    return float(v)


def _vector(cfg, key):
    v = cfg.get(key)
    if v is None:
        return None
    if not isinstance(v, list):
        v = [v]
    try:
        return np.array([float(x) for x in v])
    except (TypeError, ValueError):
        raise ConfigError(f"{key} must be a list of numbers") from None


def _strings(cfg, key, default=None):
    v = cfg.get(key, default)
    if v is None:
        raise ConfigError(f"missing required key {key!r}")
    v = v if isinstance(v, list) else [v]
    return [str(x) for x in v]


@dataclass
class RunConfig:
    problem: str
    s0: State
    spec: IntegratorSpec
    method_label: str
    h: float
    t_end: float
    n_steps: int
    stride: int
    output: str
    seed: int | None
    reference: bool = True
    reference_h: float | None = None
    raw: dict = field(default_factory=dict)


def _method_from(cfg, prefix="method", name=None):
    keys = {k[len(prefix) + 1 :]: v for k, v in cfg.items() if k.startswith(prefix + ".")}
    name = name or keys.pop("name", None)
    keys.pop("name", None)
    over = {}
    if "lambda0" in keys or "mu0" in keys:
        over["factors"] = FactorPair(_num(keys, "lambda0"), _num(keys, "mu0"))
    if "weights.lam" in keys or "weights.xi" in keys:
        over["weights"] = WeightVectors(_vector(keys, "weights.lam"), _vector(keys, "weights.xi"))
    for k, kind in (("order", int), ("max_iters", int), ("tol", float), ("omega", float)):
        if k in keys:
            over[k] = _num(keys, k, kind=kind)
    for k in ("family", "weight_policy", "projection_mode"):
        if k in keys:
            over[k] = str(keys[k])
    if "seed" in keys:
        over["rng_seed"] = _num(keys, "seed", kind=int)
    known = {"lambda0", "mu0", "weights.lam", "weights.xi", "order", "max_iters", "tol", "omega",
             "family", "weight_policy", "projection_mode", "seed"}
    extra = set(keys) - known
    if extra:
        raise ConfigError(f"unknown method keys: {', '.join(sorted(extra))}")
    if name is not None:
        return method_spec(str(name), **over), str(name)
    if "family" not in over:
        raise ConfigError(f"{prefix}.name or {prefix}.family is required")
    return IntegratorSpec(**over), over["family"]


def _step_count(h, t_end):
    """``t_end / h`` as an integer, or ConfigError naming both values."""
    n = round(t_end / h)
    tol = 0.5 * n * math.ulp(h) + math.ulp(t_end)
    if n < 1 or abs(n * h - t_end) > tol:
        raise ConfigError(f"t_end={t_end!r} is not an integer multiple of h={h!r}")
    return int(n)


def _initial_state(cfg, problem):
    _, s0, _ = get_problem(problem, compiled=False)
    p0, q0 = _vector(cfg, "problem.p0"), _vector(cfg, "problem.q0")
    if p0 is not None:
        s0 = State(p0, s0.q if q0 is None else q0)
    elif q0 is not None:
        s0 = State(s0.p, q0)
    return s0


def run_config_from(cfg, seed_override=None):
    problem = str(cfg.get("problem.name", "integrable1d"))
    if problem != "integrable1d" and problem not in PRESETS:
        raise ConfigError(f"unknown problem {problem!r}")
    s0 = _initial_state(cfg, problem)
    spec, label = _method_from(cfg)
    seed = cfg.get("run.seed")
    if seed_override is not None:
        seed = seed_override
    if seed is not None:
        seed = _num({"run.seed": seed}, "run.seed", kind=int)
        spec = replace(spec, rng_seed=seed)
    h = _num(cfg, "run.h")
    t_end = _num(cfg, "run.t_end")
    if not (h > 0):
        raise ConfigError(f"h must be positive, got {h!r}")
    if not (t_end > 0):
        raise ConfigError(f"t_end must be positive, got {t_end!r}")
    stride = _num(cfg, "run.sample_stride", 1, kind=int)
    if stride < 1:
        raise ConfigError("run.sample_stride must be >= 1")
    n = _step_count(h, t_end)
    if stride > n:
        raise ConfigError("run.sample_stride exceeds the number of steps")
    ref_on = cfg.get("reference.enabled", True)
    ref_h = cfg.get("reference.h")
    return RunConfig(
        problem=problem,
        s0=s0,
        spec=spec,
        method_label=label,
        h=h,
        t_end=t_end,
        n_steps=n,
        stride=stride,
        output=str(cfg.get("run.output", "run.csv")),
        seed=seed,
        reference=bool(ref_on),
        reference_h=None if ref_h is None else _num(cfg, "reference.h"),
        raw=dict(cfg),
    )


# --- CSV -------------------------------------------------------------------


def _fmt(v):
    return format(float(v), ".17g")


def write_csv(path, columns, rows, meta=()):
    """Write ``rows`` under a ``#`` metadata header; atomic replace."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    lines = [f"# {k} = {v}" for k, v in meta]
    lines.append(",".join(columns))
    for row in rows:
        lines.append(",".join(v if isinstance(v, str) else _fmt(v) for v in row))
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=path.name, suffix=".tmp")
    with os.fdopen(fd, "w", newline="\n") as f:
        f.write("\n".join(lines) + "\n")
    os.replace(tmp, path)
    return path


def read_csv(path):
    """Read a file written by :func:`write_csv`.

    Returns ``(meta, columns)``: a dict of header entries and a dict mapping
    column names to float arrays (or lists of strings for text columns).
    """
    meta, header, body = {}, None, []
    with open(path) as f:
        for line in f:
            line = line.rstrip("\n")
            if line.startswith("#"):
                k, _, v = line[1:].partition("=")
                meta[k.strip()] = v.strip()
            elif header is None:
                header = line.split(",")
            elif line:
                body.append(line.split(","))
    cols = {}
    for j, name in enumerate(header or []):
        vals = [r[j] for r in body]
        try:
            cols[name] = np.array([float(v) for v in vals])
        except ValueError:
            cols[name] = vals
    return meta, cols


# --- execution -------------------------------------------------------------


def _reference_fn(problem, s0, h_run, ref_h=None):
    """Callable ``t -> (P, Q)``; NaN rows past a failed cross-validation."""
    if problem == "integrable1d" and ref_h is None:
        def ref(t):
            p, q = integrable1d_exact(s0, t)
            return p[:, None], q[:, None]

        return ref, None
    H, _, _ = get_problem(problem)
    step = ref_h or default_reference_step(problem, h_run)

    def ref(t):
        try:
            sol = reference_solution(H, s0, t, step)
            return sol.p, sol.q
        except ReferenceUnreliableError as exc:
            ref.t_fail = exc.t_fail
            P = np.full((t.size, s0.dim), np.nan)
            Q = np.full((t.size, s0.dim), np.nan)
            n = len(exc.partial)
            P[:n], Q[:n] = exc.partial.p, exc.partial.q
            return P, Q

    ref.t_fail = None
    return ref, step


def execute_run(rc):
    """Integrate a RunConfig; returns ``(record, meta pairs)``."""
    H, _, inv = get_problem(rc.problem)
    ref, ref_step = _reference_fn(rc.problem, rc.s0, rc.h, rc.reference_h) if rc.reference else (None, None)
    clock = time.perf_counter()
    rec = integrate(H, rc.s0, rc.spec, rc.h, rc.n_steps, rc.stride, reference=ref, invariant=inv, problem=rc.problem)
    wall = time.perf_counter() - clock
    meta = [(k, v) for k, v in sorted(rc.raw.items())]
    meta += [
        ("method", rc.method_label),
        ("spec", rc.spec),
        ("reference_step", "exact" if rc.reference and ref_step is None else ref_step),
        ("reference_valid_until", getattr(ref, "t_fail", None) or "end"),
        ("wall_clock_seconds", f"{wall:.6f}"),
        ("version", __version__),
    ]
    return rec, meta


def _record_rows(rec):
    cols = ["t", "GE", "GHE", "delta"]
    data = [rec.t, rec.GE, rec.GHE, rec.delta]
    if rec.J_drift is not None:
        cols += ["Jx_drift", "Jy_drift", "Jz_drift"]
        data += [rec.J_drift[:, 0], rec.J_drift[:, 1], rec.J_drift[:, 2]]
    return cols, zip(*data)


def _write_record(path, rec, meta):
    cols, rows = _record_rows(rec)
    return write_csv(path, cols, rows, meta)


def _run_cell(args):
    rc, path = args
    rec, meta = execute_run(rc)
    _write_record(path, rec, meta)
    return rec


def _map(fn, items, jobs):
    if jobs > 1 and len(items) > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            return list(pool.map(fn, items))
    return [fn(x) for x in items]


# --- subcommands -----------------------------------------------------------


def cmd_run(cfg, out, args):
    rc = run_config_from(cfg, args.seed)
    rec, meta = execute_run(rc)
    path = _write_record(out / rc.output, rec, meta)
    print(f"wrote {path}")


def _sweep_methods(cfg):
    names = _strings(cfg, "study.methods")
    for n in names:
        if n not in METHOD_NAMES:
            raise ConfigError(f"unknown method {n!r} in study.methods")
    return names


def _converge_cell(args):
    problem, s0, name, over, h, t_end = args
    H, _, _ = get_problem(problem)
    spec = method_spec(name, **over)
    n = _step_count(h, t_end)
    rec = integrate(H, s0, spec, h, n, stride=n)
    return rec.state(-1), rec.metadata["wall_clock_seconds"]


def converge_study(problem, s0, methods, hs, t_end, jobs=1, overrides=None, ref_h=None):
    """Final-time error for each method and step; returns rows
    ``(method, h, GE, order, seconds)`` where ``order`` is the
    successive-halving slope against the previous (coarser) step."""
    overrides = overrides or {}
    if problem == "integrable1d" and ref_h is None:
        p, q = integrable1d_exact(s0, [t_end])
        exact = State(p, q)
    else:
        H, _, _ = get_problem(problem)
        sol = reference_solution(H, s0, [t_end], ref_h or default_reference_step(problem, min(hs)))
        exact = sol.state(0)
    cells = [(problem, s0, m, overrides.get(m, {}), h, t_end) for m in methods for h in hs]
    results = _map(_converge_cell, cells, jobs)
    rows = []
    for i, (cell, (state, secs)) in enumerate(zip(cells, results)):
        err = global_error(state, exact)
        order = math.nan
        if i % len(hs):
            prev = rows[-1]
            order = math.log(prev[2] / err) / math.log(prev[1] / cell[4])
        rows.append((cell[2], cell[4], err, order, secs))
    return rows


def cmd_converge(cfg, out, args):
    problem = str(cfg.get("problem.name", "integrable1d"))
    s0 = _initial_state(cfg, problem)
    hs = [float(x) for x in cfg.get("study.h_values", [0.1, 0.05, 0.025, 0.0125])]
    if len(hs) < 3:
        raise ConfigError("study.h_values needs at least 3 step sizes")
    t_end = _num(cfg, "run.t_end", 10.0)
    for h in hs:
        _step_count(h, t_end)
    rows = converge_study(problem, s0, _sweep_methods(cfg), hs, t_end, args.jobs)
    path = write_csv(
        out / str(cfg.get("run.output", "converge.csv")),
        ["method", "h", "GE", "order", "seconds"],
        rows,
        [("problem", problem), ("t_end", t_end), ("version", __version__)],
    )
    for m in dict.fromkeys(r[0] for r in rows):
        print(f"{m}: fitted order {[r[3] for r in rows if r[0] == m][-1]:.3f}")
    print(f"wrote {path}")


def _bench_cell(args):
    rc, reps = args
    H, _, _ = get_problem(rc.problem)
    integrate(H, rc.s0, rc.spec, rc.h, 1)  # compile outside the timed region
    times, rec = [], None
    for _ in range(reps):
        rec = integrate(H, rc.s0, rc.spec, rc.h, rc.n_steps, rc.n_steps)
        times.append(rec.metadata["wall_clock_seconds"])
    return times, rec


SPEEDUP_PAIRS = (("IRK2", "ExpSymp2"), ("IRK4", "ExpSymp4"), ("SemiSymp2", "ExpSymp2"), ("SemiSymp4", "ExpSymp4"))


def cmd_bench(cfg, out, args):
    base = run_config_from({**cfg, "method.name": "ExpSymp2"}, args.seed)
    reps = _num(cfg, "study.repeats", 3, kind=int)
    if reps < 3:
        raise ConfigError("study.repeats must be >= 3")
    names = _sweep_methods(cfg)
    tol = cfg.get("method.tol")
    cells = []
    for n in names:
        over = {} if tol is None or n not in ("IRK2", "IRK4", "SemiSymp2", "SemiSymp4") else {"tol": float(tol)}
        cells.append((replace(base, spec=method_spec(n, **over), method_label=n), reps))
    # timings run sequentially so methods do not compete for cores
    results = [_bench_cell(c) for c in cells]
    rows, med = [], {}
    H, _, _ = get_problem(base.problem)
    E0 = H.energy(base.s0)
    for n, (times, rec) in zip(names, results):
        med[n] = float(np.median(times))
        rows.append((n, med[n], min(times), max(times), abs(H.energy(rec.state(-1)) - E0)))
    meta = [("problem", base.problem), ("h", base.h), ("t_end", base.t_end), ("repeats", reps), ("version", __version__)]
    path = write_csv(out / str(cfg.get("run.output", "bench.csv")),
                     ["method", "median_seconds", "min_seconds", "max_seconds", "final_GHE"], rows, meta)
    ratios = [(a, b, med[a] / med[b]) for a, b in SPEEDUP_PAIRS if a in med and b in med]
    write_csv(path.with_name(path.stem + "_speedup.csv"), ["slower", "faster", "ratio"], ratios, meta)
    for a, b, r in ratios:
        print(f"{a}/{b} wall-clock ratio {r:.2f}")
    print(f"wrote {path}")


# figure studies: published parameters as defaults

FIG4_FACTORS = ((1 / math.e, 1 / math.pi), (0.5, 0.5), (1 / 3, 0.75), (0.2752, 0.0731))
FIG5_SEED = 0


def figure_cells(fig, cfg, out, seed=None):
    """``[(RunConfig, path)]`` for a named figure."""
    def rc(problem, label, spec, h, t_end, stride, **kw):
        n = _step_count(h, t_end)
        _, s0, _ = get_problem(problem, compiled=False)
        return RunConfig(problem, s0, spec, label, h, t_end, n, stride, f"{label}.csv", spec.rng_seed, raw={"figure": fig}, **kw)

    h = float(cfg.get("run.h", 0.01 if fig in ("1c", "2", "4", "5") else 1.0))
    t_end = float(cfg.get("run.t_end", {"1c": 1000.0, "2": 1000.0, "4": 1000.0, "5": 1000.0, "7": 1e4, "8": 1e3}.get(fig, 1000.0)))
    stride = int(cfg.get("run.sample_stride", max(1, int(round(1.0 / h)))))
    six = ("IRK2", "SemiSymp2", "ExpSymp2", "IRK4", "SemiSymp4", "ExpSymp4")
    runs = []
    if fig == "1c":
        runs.append(rc("integrable1d", "Pihajoki2_mix_none", method_spec("Pihajoki2"), h, t_end, stride))
    elif fig == "2":
        runs += [rc("integrable1d", m, method_spec(m), h, t_end, stride) for m in six]
    elif fig == "4":
        for lam, mu in FIG4_FACTORS:
            for m in ("ExpSymp2", "ExpSymp4"):
                spec = method_spec(m, factors=FactorPair(lam, mu))
                runs.append(rc("integrable1d", f"{m}_lambda{lam:.4f}_mu{mu:.4f}", spec, h, t_end, stride))
    elif fig == "5":
        w = WeightVectors([0.6657], [0.4910])
        runs.append(rc("integrable1d", "choice1", IntegratorSpec("exp_symp", 4, factors=FactorPair(0.6657, 0.4910)), h, t_end, stride))
        runs.append(rc("integrable1d", "choice2", IntegratorSpec("weighted_projection", 4, weights=w), h, t_end, stride))
        seed = FIG5_SEED if seed is None else seed
        spec3 = IntegratorSpec("weighted_projection", 4, weight_policy="fresh_random_per_step", rng_seed=seed)
        runs.append(rc("integrable1d", "choice3", spec3, h, t_end, stride))
    elif fig == "7":
        runs += [rc("traj1_regular", m, method_spec(m), h, t_end, stride, reference=False) for m in six]
    elif fig == "8":
        runs += [rc("traj2_chaotic", m, method_spec(m), h, t_end, stride) for m in ("ExpSymp2", "ExpSymp4")]
    else:
        raise ConfigError(f"unknown figure {fig!r}; choose 1c, 2, 3, 4, 5, 7 or 8")
    return [(r, out / r.output) for r in runs]



def cmd_figure(cfg, out, args):
    fig = str(cfg.get("study.figure", "")).removeprefix("figure:")
    out = out / f"figure_{fig}"
    if fig == "3":
        s0 = State([0.0], [-3.0])
        methods = ("IRK2", "SemiSymp2", "ExpSymp2", "IRK4", "SemiSymp4", "ExpSymp4")
        hs = [float(x) for x in cfg.get("study.h_values", [0.1, 0.05, 0.025, 0.0125])]
        rows = converge_study("integrable1d", s0, methods, hs, float(cfg.get("run.t_end", 10.0)), args.jobs)
        for m in methods:
            write_csv(out / f"{m}.csv", ["h", "GE", "order", "seconds"], [r[1:] for r in rows if r[0] == m],
                      [("method", m), ("version", __version__)])
        print(f"wrote {out}")
        return
    cells = figure_cells(fig, cfg, out, args.seed)
    _map(_run_cell, cells, args.jobs)
    print(f"wrote {len(cells)} curves to {out}")


def gamma10_seed(angle):
    """Extended state with ``p = x = 0`` on the extended energy level 10."""
    r = math.sqrt(18.0)
    return ExtendedState.of([0.0], [0.0], [r * math.cos(angle)], [r * math.sin(angle)])


def extended_samples(H, e, h, n, omega=None):
    out = np.empty((n + 1, 4 * e.dim))
    out[0] = e.flat()
    for i in range(n):
        e = extended_step(H, e, h, 2, omega)
        out[i + 1] = e.flat()
    return out


def _poincare_cell(args):
    angle, h, n = args
    H, _, _ = get_problem("integrable1d")
    return poincare_section(extended_samples(H, gamma10_seed(angle), h, n), 1)


def cmd_poincare(cfg, out, args):
    angles = [float(a) for a in cfg.get("study.angles", [0.26, 0.68, 1.101, 1.311, 1.521])]
    h = _num(cfg, "run.h", 0.01)
    n = _step_count(h, _num(cfg, "run.t_end", 1000.0))
    sections = _map(_poincare_cell, [(a, h, n) for a in angles], args.jobs)
    out = out / "poincare"
    summary = []
    for a, pts in zip(angles, sections):
        write_csv(out / f"angle_{a:.4f}.csv", ["q", "p"], pts, [("angle", a), ("h", h), ("version", __version__)])
        summary.append((a, len(pts), nearest_neighbor_spread(pts)))
    write_csv(out / "summary.csv", ["angle", "crossings", "nn_spread"], summary, [("version", __version__)])
    print(f"wrote {len(angles)} sections to {out}")


def cmd_lyapunov(cfg, out, args):
    rc = run_config_from({**cfg, "run.sample_stride": cfg.get("run.sample_stride", 1)}, args.seed)
    H, _, _ = get_problem(rc.problem)
    d0 = _num(cfg, "study.d0", 1e-8)
    t, sig = lyapunov_exponent(H, rc.spec, rc.s0, rc.h, rc.t_end, d0, rc.stride)
    path = write_csv(out / str(cfg.get("run.output", "lyapunov.csv")), ["t", "sigma"], zip(t, sig),
                     [("problem", rc.problem), ("method", rc.method_label), ("d0", d0), ("version", __version__)])
    print(f"final sigma {sig[-1]:.4g}; wrote {path}")


COMMANDS = {
    "run": cmd_run,
    "converge": cmd_converge,
    "bench": cmd_bench,
    "figure": cmd_figure,
    "poincare": cmd_poincare,
    "lyapunov": cmd_lyapunov,
}


def main(argv=None):
    ap = argparse.ArgumentParser(prog="expsymp", description="Run symplectic-integrator experiments.")
    ap.add_argument("command", choices=sorted(COMMANDS))
    ap.add_argument("--config", required=True, help="plain-text key = value config file")
    ap.add_argument("--out", default=os.environ.get("EXPSYMP_OUT", "."), help="output directory (default $EXPSYMP_OUT or .)")
    ap.add_argument("--jobs", type=int, default=1, help="parallel worker processes for sweeps")
    ap.add_argument("--seed", type=int, default=None, help="override the random seed")
    args = ap.parse_args(argv)
    try:
        text = Path(args.config).read_text()
    except OSError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    try:
        cfg = parse_config(text)
        if args.jobs < 1:
            raise ConfigError("--jobs must be >= 1")
        COMMANDS[args.command](cfg, Path(args.out), args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except ExpSympError as exc:
        step = getattr(exc, "step_index", None)
        where = f" at step {step}" if step is not None else ""
        print(f"runtime error{where}: {exc}", file=sys.stderr)
        return 3
    except (ValueError, KeyError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())
