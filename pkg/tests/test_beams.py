import numpy as np
import pytest

from hfbeam.errors import LostPositivity, ZeroGradientPhase
from hfbeam.medium import Branch, ConstantSpeed, SineSpeed
from hfbeam.beams import (BeamFamily, BeamState, beam_rhs,
                          hessian_from_frame, make_initial_state, min_imag_eig,
                          propagate, propagate_family, propagate_variational)
from hfbeam.presets import preset_initial_data
from hfbeam.synthesis import BranchAmplitude


def _state_1d(x=0.0, p=1.0, S=0.0, M=1j, A=1.0 + 0j, branch=Branch.PLUS):
    return BeamState(t=0.0, x=np.array([x]), p=np.array([p]), S=S,
                     M=np.array([[M]], dtype=complex), A=A, branch=branch)


# ------------------------------------------------------------------ rhs

def test_rhs_1d_constant_speed_is_frozen():
    d = beam_rhs(ConstantSpeed(1.0, 1), _state_1d())
    assert abs(d.M[0, 0]) < 1e-15
    assert abs(d.A) < 1e-15


def test_rhs_free_space_rays_are_straight():
    m = ConstantSpeed(1.0, 3)
    p = np.array([0.0, 0.6, 0.8])
    s = BeamState(t=0.0, x=np.zeros(3), p=p, S=0.0,
                  M=1j * np.eye(3), A=1.0 + 0j, branch=Branch.PLUS)
    d = beam_rhs(m, s)
    assert np.allclose(d.p, 0.0)
    assert np.allclose(d.x, p / np.linalg.norm(p))
    out = propagate(m, s, 2.0, tol=1e-10)[-1]
    assert np.allclose(out.x, 2.0 * p / np.linalg.norm(p), atol=1e-9)


def test_rhs_momentum_feels_speed_gradient():
    m = SineSpeed(0.1, 1.0, n=1)
    d = beam_rhs(m, _state_1d(x=0.0, p=1.0))
    assert np.isclose(d.p[0], -0.1)  # -|p| c'(0)


def test_rhs_rejects_lost_positivity():
    with pytest.raises(LostPositivity):
        beam_rhs(ConstantSpeed(1.0, 1), _state_1d(M=-1j))


# ------------------------------------------------------------------ free-space closed forms

def test_free_space_hessian_and_amplitude_unit_radius():
    m = ConstantSpeed(1.0, 3)
    y = np.array([0.0, 0.0, 1.0])
    P = np.outer(y, y)
    beta = 1.0
    s0 = BeamState(t=0.0, x=y, p=y.copy(), S=1.0,
                   M=(np.eye(3) - P) + 1j * beta * np.eye(3), A=1.0 + 0j,
                   branch=Branch.PLUS)
    out = propagate(m, s0, 1.0, tol=1e-10)[-1]
    M_exact = 1j * P + ((1 + 1j) / (2 + 1j)) * (np.eye(3) - P)
    assert np.max(np.abs(out.M - M_exact)) < 1e-8
    assert abs(out.A - 1.0 / (1 + (1 + 1j))) < 1e-8


@pytest.mark.parametrize("r,t,branch", [(0.6, 0.5, Branch.MINUS),
                                        (1.4, 0.8, Branch.PLUS)])
def test_free_space_general_radius(r, t, branch):
    # with S = |x|: M(t) = i b P + m(t)(I-P), m = (1+i b r)/(r + s t (1+i b r)),
    # A(t) = A0 (r / (r + s t (1+i b r)))^{(n-1)/2}
    m3 = ConstantSpeed(1.0, 3)
    beta = 1.0
    yhat = np.array([1.0, 0.0, 0.0])
    y = r * yhat
    P = np.outer(yhat, yhat)
    s0 = BeamState(t=0.0, x=y, p=yhat.copy(), S=r,
                   M=(np.eye(3) - P) / r + 1j * beta * np.eye(3),
                   A=0.7 - 0.2j, branch=branch)
    out = propagate(m3, s0, t, tol=1e-10)[-1]
    den = r + branch.sign * t * (1 + 1j * beta * r)
    M_exact = 1j * beta * P + ((1 + 1j * beta * r) / den) * (np.eye(3) - P)
    A_exact = (0.7 - 0.2j) * (r / den)
    assert np.max(np.abs(out.M - M_exact)) < 1e-8
    assert abs(out.A - A_exact) < 1e-8


# ------------------------------------------------------------------ variational frame

def test_variational_frame_1d_constant():
    fr = propagate_variational(ConstantSpeed(1.0, 1), [0.2], [1.0], Branch.PLUS, 2.0)
    assert np.allclose(fr.Jx, [[1.0, 0.0]], atol=1e-9)
    assert np.allclose(fr.Jp, [[0.0, 1.0]], atol=1e-9)
    assert abs(fr.det - 1.0) < 1e-6


def test_variational_determinant_2d():
    fr = propagate_variational(ConstantSpeed(1.0, 2), [0.1, -0.2], [0.8, 0.4],
                               Branch.MINUS, 1.7)
    assert abs(fr.det - 1.0) < 1e-6


def test_riccati_equals_mobius_of_frame():
    m = SineSpeed(0.1, 1.0, n=1)
    x0, p0 = np.array([0.2]), np.array([1.0])
    fr = propagate_variational(m, x0, p0, Branch.PLUS, 1.0, tol=1e-11)
    assert abs(fr.det - 1.0) < 1e-6
    M0 = np.array([[0.5 + 1.0j]])
    s0 = BeamState(t=0.0, x=x0, p=p0, S=0.0, M=M0, A=1.0 + 0j, branch=Branch.PLUS)
    out = propagate(m, s0, 1.0, tol=1e-11)[-1]
    assert np.max(np.abs(out.M - hessian_from_frame(fr, M0))) < 1e-6


# ------------------------------------------------------------------ launch data

def test_make_initial_state_linear_phase():
    data = preset_initial_data("plane1d")
    st = make_initial_state(data.S, 1.0 + 0j, [0.0], order=1, beta=1.0)
    assert st.p[0] == 1.0 and st.S == 0.0
    assert st.M[0, 0] == 1j


def test_make_initial_state_radial_matches_free_space_form():
    data = preset_initial_data("radial3d")
    y = np.array([0.0, 0.5, 0.0])
    st = make_initial_state(data.S, 1.0 + 0j, y, order=1, beta=2.0)
    P = np.outer([0, 1, 0], [0, 1, 0])
    assert np.allclose(st.M, (np.eye(3) - P) / 0.5 + 2j * np.eye(3), atol=1e-12)
    assert np.isclose(st.S, 0.5)


def test_make_initial_state_chirp():
    data = preset_initial_data("chirp1d")
    st = make_initial_state(data.S, 0.5 + 0j, [1.0], order=1, beta=1.0)
    assert st.p[0] == -1.0
    assert st.M[0, 0] == -1.0 + 1j


def test_make_initial_state_zero_gradient_raises():
    data = preset_initial_data("chirp1d")
    with pytest.raises(ZeroGradientPhase):
        make_initial_state(data.S, 1.0 + 0j, [0.0], order=1, beta=1.0)


# ------------------------------------------------------------------ structure invariants

def test_structure_invariants_variable_speed():
    m = SineSpeed(0.1, 1.0, n=2)
    tol = 1e-9
    x0 = np.array([0.3, -0.2])
    p0 = np.array([0.9, 0.5])
    M0 = np.array([[0.2, 0.1], [0.1, -0.3]]) + 1j * np.eye(2)
    s0 = BeamState(t=0.0, x=x0, p=p0, S=0.4, M=M0, A=1.0 + 0.3j, branch=Branch.PLUS)
    outs = propagate(m, s0, 1.2, tol=tol, output_times=[0.4, 0.8, 1.2])
    from hfbeam.medium import hamiltonian
    H0 = hamiltonian(m, Branch.PLUS, x0, p0)
    for st in outs:
        assert np.max(np.abs(st.M - st.M.T)) < 1e-10
        assert min_imag_eig(st.M[None])[0] > 0
        H = hamiltonian(m, Branch.PLUS, st.x, st.p)
        assert abs(H - H0) <= 10 * tol * (1 + abs(H0))
    # time reversal round trip
    back = propagate(m, outs[-1], 0.0, tol=tol)[-1]
    assert np.max(np.abs(back.x - x0)) < 100 * tol
    assert np.max(np.abs(back.p - p0)) < 100 * tol
    assert np.max(np.abs(back.M - M0)) < 100 * tol


def test_1d_constant_speed_degeneracy():
    m = ConstantSpeed(2.0, 1)
    s0 = _state_1d(x=0.3, p=-0.7, S=0.1, M=0.4 + 0.9j, A=0.5 + 0.5j,
                   branch=Branch.MINUS)
    out = propagate(m, s0, 2.0, tol=1e-10)[-1]
    assert abs(out.M[0, 0] - s0.M[0, 0]) < 1e-12
    assert abs(out.A - s0.A) < 1e-12


# ------------------------------------------------------------------ order-2 tensors

def test_order2_tensors_against_transverse_fd():
    """Phi3 and gradA propagate as transverse derivatives of (M, A): beams
    launched on one cubic phase / linear amplitude field stay on it, so an
    offset-beam finite difference of (M, A) converges to (Phi3, gradA)."""
    m = SineSpeed(0.1, 1.3, n=1)
    x0, S0, p0, M0, P30, A0, g0 = 0.2, 0.0, 0.9, 0.3, -0.4, 1.2, 0.25
    T = 0.7

    def fam_for(deltas):
        xs = np.array([[x0 + d] for d in deltas])
        ps = np.array([[p0 + M0 * d + 0.5 * P30 * d * d] for d in deltas])
        Ms = np.array([[[M0 + P30 * d]] for d in deltas], dtype=complex)
        As = np.array([A0 + g0 * d for d in deltas], dtype=complex)
        Ss = np.array([S0 + p0 * d + 0.5 * M0 * d * d + P30 * d ** 3 / 6 for d in deltas])
        return BeamFamily(t=0.0, branch=Branch.PLUS, order=2, x=xs, p=ps, S=Ss,
                          M=Ms, A=As, weight=np.ones(len(deltas)), x0=xs.copy(),
                          Phi3=np.full((len(deltas), 1, 1, 1), P30, dtype=complex),
                          gradA=np.full((len(deltas), 1), g0, dtype=complex))

    errs_phi3, errs_ga = [], []
    for delta in (1e-3, 5e-4):
        snap = propagate_family(m, fam_for([0.0, delta]), [T], tol=1e-12, check=False)[0]
        dx = snap.x[1, 0] - snap.x[0, 0]
        errs_phi3.append(abs((snap.M[1, 0, 0] - snap.M[0, 0, 0]) / dx - snap.Phi3[0, 0, 0, 0]))
        errs_ga.append(abs((snap.A[1] - snap.A[0]) / dx - snap.gradA[0, 0]))
    assert errs_phi3[0] / errs_phi3[1] == pytest.approx(2.0, rel=0.15)
    assert errs_ga[0] / errs_ga[1] == pytest.approx(2.0, rel=0.15)
    assert errs_phi3[1] < 5e-5 and errs_ga[1] < 5e-5


def test_order2_constant_speed_1d_frozen():
    m = ConstantSpeed(1.0, 1)
    data = preset_initial_data("chirp1d")
    amp = BranchAmplitude(data, m, Branch.PLUS)
    st = make_initial_state(data.S, amp, [0.5], order=2, beta=1.0)
    out = propagate(m, st, 0.8, tol=1e-10)[-1]
    assert abs(out.Phi3[0, 0, 0] - st.Phi3[0, 0, 0]) < 1e-12
    assert abs(out.gradA[0] - st.gradA[0]) < 1e-12
