import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from expsymp.cli import extended_samples, gamma10_seed
from expsymp.diagnostics import (
    RunRecord,
    energy_error,
    fit_growth,
    fit_loglog,
    global_error,
    lyapunov_exponent,
    nearest_neighbor_spread,
    poincare_section,
    symplecticity_defect,
)
from expsymp.errors import FitError
from expsymp.flows import Hamiltonian
from expsymp.integrators import IntegratorSpec, Stepper, integrate, method_spec
from expsymp.phase import State
from expsymp.problems import get_problem, reference_solution


def _oscillator():
    return Hamiltonian(lambda p, q: 0.5 * (p[0] * p[0] + q[0] * q[0]), 1, "oscillator")


def test_global_error_examples():
    s = State([0.3], [0.7])
    assert global_error(s, s) == 0.0
    assert global_error(State([1.0], [0.0]), State([0.0], [0.0])) == 1.0
    assert global_error(State([1.0], [1.0]), State([0.0], [0.0])) == pytest.approx(math.sqrt(2), abs=1e-15)


def test_energy_error_examples(H1, s0):
    assert energy_error(H1, s0, s0) == 0.0
    assert energy_error(H1, State([0.0], [0.0]), s0) == pytest.approx(4.5, abs=1e-14)


def test_energy_error_along_reference(H1, s0):
    ref = reference_solution(H1, s0, np.linspace(0, 100, 101), 0.0002)
    errs = [energy_error(H1, ref.state(i), s0) for i in range(len(ref))]
    assert max(errs) < 1e-11


def test_defect_identity_is_roundoff(orbit_points):
    # central differences of an exact identity leave only cancellation error,
    # about machine epsilon * |z| / step
    for z in orbit_points[:5]:
        bound = 2 * np.finfo(float).eps * np.max(np.abs(z.flat())) / 1e-6
        assert symplecticity_defect(lambda s: s, z) < bound


def test_defect_expsymp2_and_euler_control(H1, orbit_points):
    exp2 = Stepper(H1, method_spec("ExpSymp2")).one_step_map(0.01)
    euler = Stepper(H1, method_spec("Euler")).one_step_map(0.1)
    assert max(symplecticity_defect(exp2, z) for z in orbit_points) < 1e-5
    assert min(symplecticity_defect(euler, z) for z in orbit_points) > 1e-3


def test_defect_rejects_nonfinite_jacobian():
    with pytest.raises(FloatingPointError), np.errstate(all="ignore"):
        symplecticity_defect(lambda s: State(s.p / 0.0 if s.p[0] > 0 else s.p, s.q), State([1.0], [0.0]))


def test_defect_of_composition_bounded_by_sum(H1, orbit_points):
    a = Stepper(H1, method_spec("IRK2")).one_step_map(0.05)
    b = Stepper(H1, method_spec("SemiSymp2")).one_step_map(0.05)
    for z in orbit_points[:5]:
        da, db = symplecticity_defect(a, z), symplecticity_defect(b, a(z))
        assert symplecticity_defect(lambda s: b(a(s)), z) <= da + db + 1e-8


def _record(t, v):
    t = np.asarray(t, dtype=float)
    v = np.asarray(v, dtype=float)
    return RunRecord({}, t, v, v.copy(), np.zeros_like(t))


def test_fit_synthetic_powers():
    t = np.linspace(1, 100, 50)
    assert fit_growth(_record(t, t)).slope == pytest.approx(1.0, abs=1e-12)
    fit = fit_growth(_record(t, t**2))
    assert fit.slope == pytest.approx(2.0, abs=1e-12)
    assert fit.r_squared == pytest.approx(1.0, abs=1e-12)
    assert fit.window == (1.0, 100.0)


@settings(max_examples=50, deadline=None)
@given(st.floats(0.1, 3.0), st.floats(1e-6, 1e6))
def test_fit_invariant_under_value_scaling(power, scale):
    t = np.linspace(1, 50, 30)
    v = t**power * (1.0 + 0.3 * np.sin(t))
    base = fit_loglog(t, v)
    scaled = fit_loglog(t, scale * v)
    assert scaled.slope == pytest.approx(base.slope, abs=1e-9)
    assert scaled.intercept - base.intercept == pytest.approx(math.log(scale), abs=1e-9)


def test_fit_errors():
    t = np.linspace(1, 100, 50)
    with pytest.raises(FitError):
        fit_loglog(t, t, window=(1, 5))
    v = t.copy()
    v[3] = 0.0
    with pytest.raises(FitError):
        fit_loglog(t, v)
    with pytest.raises(FitError):
        fit_growth(_record(t, np.full(50, np.nan)))


def test_record_rejects_nonincreasing_times():
    with pytest.raises(ValueError):
        _record([1.0, 1.0, 2.0], [1.0, 2.0, 3.0])


def test_growth_fit_expsymp2_problem1(H1, s0, exact_ref):
    rec = integrate(H1, s0, method_spec("ExpSymp2"), 0.01, 100000, stride=100, reference=exact_ref)
    assert fit_growth(rec, "GE", (10, 1000)).slope == pytest.approx(1.0, abs=0.25)


def test_lyapunov_oscillator_decays_like_inverse_time():
    H = _oscillator()
    t, sig = lyapunov_exponent(H, method_spec("IRK2"), State([1.0], [0.0]), 0.05, 200.0, stride=20)
    # isometric flow: the accumulated log-stretch stays bounded, so sigma*t is O(1)
    assert np.max(np.abs(sig * t)) < 1e-3
    assert abs(sig[-1]) < 1e-5


def test_lyapunov_regular_pn_decays():
    H, s0, _ = get_problem("traj1_regular")
    t, sig = lyapunov_exponent(H, method_spec("ExpSymp2"), s0, 1.0, 1e5, stride=1000)
    s3 = sig[np.searchsorted(t, 1e3)]
    assert sig[-1] < s3 / 10


def test_lyapunov_independent_of_initial_separation():
    H, s0, _ = get_problem("traj2_chaotic")
    finals = []
    for d0 in (1e-7, 1e-8, 1e-9):
        _, sig = lyapunov_exponent(H, method_spec("ExpSymp2"), s0, 1.0, 5000.0, d0=d0, stride=500)
        finals.append(sig[-1])
    assert max(finals) / min(finals) < 2.0
    assert all(f > 0 for f in finals)


def test_poincare_rotation_count():
    period, T = 2.0, 21.0
    t = np.arange(0.0, T, 0.01)
    phase = 2 * math.pi * t / period
    d = 1
    samples = np.zeros((t.size, 4 * d))
    samples[:, 1] = -np.cos(phase)  # x crosses zero upward once per period
    samples[:, 0] = np.sin(phase)
    samples[:, 2] = 0.5
    pts = poincare_section(samples, d)
    assert abs(len(pts) - math.floor(T / period)) <= 1
    assert np.allclose(pts[:, 0], 0.5)
    assert np.allclose(pts[:, 1], 1.0, atol=1e-3)


def test_poincare_empty_cases():
    samples = np.zeros((100, 4))
    samples[:, 1] = 1.0
    assert poincare_section(samples, 1).shape == (0, 2)
    assert poincare_section(samples[:1], 1).shape == (0, 2)
    assert math.isnan(nearest_neighbor_spread(np.empty((0, 2))))


def test_poincare_island_versus_sea(H1):
    spread = {}
    for angle in (1.311, 0.68):
        pts = poincare_section(extended_samples(H1, gamma10_seed(angle), 0.01, 200000), 1)
        assert len(pts) >= 150
        spread[angle] = nearest_neighbor_spread(pts[:150])
    assert spread[1.311] < 5e-3
    assert spread[0.68] > 10 * spread[1.311]


def test_gamma10_seed_on_level(H1):
    from expsymp.flows import extended_energy

    for a in (0.1, 0.68, 1.311):
        assert extended_energy(H1, gamma10_seed(a)) == pytest.approx(10.0, abs=1e-12)


def test_raw_family_lyapunov_runs(H1, s0):
    t, sig = lyapunov_exponent(H1, IntegratorSpec("pihajoki"), s0, 0.01, 1.0, stride=10)
    assert t.size == 10 and np.all(np.isfinite(sig))
