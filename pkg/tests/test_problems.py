import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from expsymp.autodiff import grad
from expsymp.errors import DomainError, ReferenceUnreliableError
from expsymp.flows import Hamiltonian
from expsymp.integrators import gauss4_step
from expsymp.phase import State
from expsymp.problems import (
    PRESETS,
    PNBinary,
    eval_integrable1d,
    eval_pn,
    get_problem,
    integrable1d_exact,
    pn_hamiltonian,
    reference_solution,
    spin_from_canonical,
    total_angular_momentum,
)


def test_integrable1d_values():
    assert eval_integrable1d([0.0], [-3.0]) == 5.0
    assert eval_integrable1d([0.0], [0.0]) == 0.5
    assert eval_integrable1d([1.0], [1.0]) == 2.0


@settings(max_examples=100, deadline=None)
@given(st.floats(-50, 50), st.floats(-50, 50))
def test_integrable1d_bounded_below(p, q):
    assert eval_integrable1d([p], [q]) >= 0.5


def test_exact_solution_satisfies_equations(s0):
    # compare with central differences of the closed form
    t = np.linspace(0.0, 30.0, 301)
    e = 1e-6
    p, q = integrable1d_exact(s0, t)
    pp, qp = integrable1d_exact(s0, t + e)
    pm, qm = integrable1d_exact(s0, t - e)
    assert np.allclose((qp - qm) / (2 * e), p * (1 + q * q), atol=1e-6)
    assert np.allclose((pp - pm) / (2 * e), -q * (1 + p * p), atol=1e-6)
    assert np.allclose(0.5 * (1 + p * p) * (1 + q * q), 5.0, atol=1e-12)
    assert p[0] == 0.0 and q[0] == -3.0


@pytest.mark.parametrize("z", [(0.7, 1.2), (-0.4, -2.0), (2.0, 0.0), (0.0, 0.0)])
def test_exact_solution_general_start(z):
    s = State([z[0]], [z[1]])
    p, q = integrable1d_exact(s, [0.0, 0.01])
    assert p[0] == pytest.approx(z[0], abs=1e-12) and q[0] == pytest.approx(z[1], abs=1e-12)
    # one tiny Gauss step agrees with the closed form
    st_ = gauss4_step(Hamiltonian(eval_integrable1d, 1), s, 0.01, 1e-15, 200).state
    assert abs(st_.p[0] - p[1]) < 1e-10 and abs(st_.q[0] - q[1]) < 1e-10


def test_spin_examples():
    S1, S2 = spin_from_canonical([0.0, 0.0], [0.0, 0.0], [0.3, 0.5])
    assert np.array_equal(S1, [0.3, 0.0, 0.0]) and np.array_equal(S2, [0.5, 0.0, 0.0])
    S1, _ = spin_from_canonical([1.2490, 0.6202], [0.0445, 0.0], [0.0479, 0.6104])
    rho = math.hypot(S1[0], S1[1])
    assert rho == math.sqrt(0.0479**2 - 0.0445**2)
    assert rho == pytest.approx(0.0177242, abs=5e-7)


@settings(max_examples=100, deadline=None)
@given(st.floats(-10, 10), st.floats(0.01, 2), st.floats(-0.999, 0.999))
def test_spin_norm_identity(theta, lam, frac):
    S, _ = spin_from_canonical([theta, 0.0], [frac * lam, 0.0], [lam, 1.0])
    assert abs(np.linalg.norm(S) - lam) < 1e-15


def test_spin_domain():
    with pytest.raises(DomainError):
        spin_from_canonical([0.0, 0.0], [0.3, 0.0], [0.2, 0.2])
    with pytest.raises(DomainError):
        spin_from_canonical([0.0, 0.0], [0.2, 0.0], [0.2, 0.2])
    S1, _ = spin_from_canonical([0.0, 0.0], [0.2, 0.0], [0.2, 0.2], allow_pole=True)
    assert np.array_equal(S1, [0.0, 0.0, 0.2])


def test_eta():
    assert PNBinary(1.0, 1.0, 0.25, 0.25).eta == 0.25
    assert PNBinary(0.28, 1.0, 0.1, 0.1).eta == pytest.approx(0.1708984, abs=1e-7)


def test_newtonian_limit():
    pre = PRESETS["traj2_chaotic"]
    z = pre.state()
    newton = PNBinary(1.0, math.inf, 0.25, 0.25)
    assert eval_pn(z.p, z.q, newton) == pytest.approx(0.125 - 1 / 8.31, abs=1e-15)
    assert abs(eval_pn(z.p, z.q, newton) - 0.0046631) < 1e-7
    rng = np.random.default_rng(0)
    for _ in range(20):
        Q = rng.normal(size=3) * 10
        P = rng.normal(size=3) * 0.3
        z = State(np.r_[P, rng.uniform(-0.2, 0.2, 2)], np.r_[Q, rng.uniform(0, 6, 2)])
        hn = 0.5 * P @ P - 1 / np.linalg.norm(Q)
        assert abs(eval_pn(z.p, z.q, newton) - hn) < 1e-12


def test_pn_corrections_present():
    pre = PRESETS["traj2_chaotic"]
    z = pre.state()
    assert abs(eval_pn(z.p, z.q, pre.params) - eval_pn(z.p, z.q, PNBinary(1.0, math.inf, 0.25, 0.25))) > 1e-3


def test_pn_domain_errors():
    H = pn_hamiltonian(PRESETS["traj2_chaotic"].params)
    with pytest.raises(DomainError):
        H(np.array([0.1, 0.2, 0.0, 0.0, 0.0]), np.zeros(5))
    with pytest.raises(DomainError):
        H(np.array([0.1, 0.2, 0.0, 0.3, 0.0]), np.array([8.0, 0, 0, 0, 0]))
    with pytest.raises(DomainError):
        grad(H.fn, np.array([0.1, 0.2, 0.0, 0.0, 0.0]), np.zeros(5))


def test_pn_gradient_matches_finite_differences():
    pre = PRESETS["traj1_regular"]
    H = pre.hamiltonian()
    z = pre.state().flat()
    gp, gq = H.gradient(z[:5], z[5:])
    g = np.r_[gp, gq]
    for j in range(10):
        dz = np.zeros(10)
        dz[j] = 1e-6
        fd = (H(*np.split(z + dz, 2)) - H(*np.split(z - dz, 2))) / 2e-6
        assert abs(fd - g[j]) < 1e-7


def test_presets_locked():
    t1, t2 = PRESETS["traj1_regular"], PRESETS["traj2_chaotic"]
    assert t1.Q == (25.34, 0.0, 0.0) and t1.P == (0.0, 0.18, 0.0)
    assert (t1.params.Lambda1, t1.params.Lambda2) == (0.0479, 0.6104)
    assert t1.theta == (1.2490, 0.6202)
    assert t1.published_xi == (0.0445, 0.6104)
    assert tuple(round(x, 4) for x in t1.xi) == t1.published_xi
    assert t1.params.beta == 0.28 and t1.params.c == pytest.approx(math.sqrt(10), rel=1e-15)
    assert t2.Q == (8.31, 0.0, 0.0) and t2.P == (0.0, 0.50, 0.0)
    assert (t2.params.Lambda1, t2.params.Lambda2) == (0.25, 0.25)
    assert t2.theta == (0.7587, 0.8469) and t2.xi == (-0.2459, -0.2459)
    assert t2.params.beta == 1.0 and t2.params.c == 1.0


def test_angular_momentum_examples():
    pre = PRESETS["traj1_regular"]
    s = pre.state()
    L = np.cross(s.q[:3], s.p[:3])
    assert np.allclose(L, [0.0, 0.0, 4.5612], atol=1e-12)
    no_spin = PNBinary(0.5, 1.0, 0.0, 0.0)
    z = State([0.0, 0.3, 0.0, 0.0, 0.0], [5.0, 1.0, 0.0, 0.0, 0.0])
    J = total_angular_momentum(z, no_spin)
    assert J[0] == 0.0 and J[1] == 0.0 and J[2] != 0.0


def test_angular_momentum_and_spin_norm_along_gauss_run():
    pre = PRESETS["traj1_regular"]
    H = pre.hamiltonian()
    s = pre.state()
    J0 = total_angular_momentum(s, pre.params)
    worst_J = worst_S = 0.0
    for _ in range(1000):
        s = gauss4_step(H, s, 0.1, 1e-14, 100).state
        worst_J = max(worst_J, np.linalg.norm(total_angular_momentum(s, pre.params) - J0))
        S1, S2 = spin_from_canonical(s.q[3:], s.p[3:], (pre.params.Lambda1, pre.params.Lambda2))
        worst_S = max(worst_S, abs(np.linalg.norm(S1) - 0.0479), abs(np.linalg.norm(S2) - 0.6104))
    assert worst_J < 1e-8 and worst_S < 1e-12


def test_reference_trivial_grid(H1, s0):
    ref = reference_solution(H1, s0, [0.0], 0.001)
    assert np.array_equal(ref.state(0).flat(), s0.flat())


def test_reference_problem1_accuracy_and_energy(H1, s0):
    t = np.linspace(0.0, 1000.0, 1001)
    ref = reference_solution(H1, s0, t, 0.01 / 50)
    assert ref.disagreement.max() < 1e-10
    E = 0.5 * (1 + ref.p[:, 0] ** 2) * (1 + ref.q[:, 0] ** 2)
    assert np.max(np.abs(E - 5.0)) < 1e-11
    p, q = integrable1d_exact(s0, t)
    assert np.max(np.hypot(ref.p[:, 0] - p, ref.q[:, 0] - q)) < 1e-9


def test_reference_rejects_unsorted_grid(H1, s0):
    with pytest.raises(ValueError):
        reference_solution(H1, s0, [2.0, 1.0], 0.01)


def test_chaotic_reference_gate_trips():
    H, s0, _ = get_problem("traj2_chaotic")
    with pytest.raises(ReferenceUnreliableError) as info:
        reference_solution(H, s0, np.arange(100.0, 5001.0, 100.0), 0.025)
    assert 0 < info.value.t_fail <= 5000 and info.value.disagreement > 1e-8
