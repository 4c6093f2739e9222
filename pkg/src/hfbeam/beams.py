"""Lagrangian beam propagation along bicharacteristics.

One beam carries (x, p, S, M, A) along its central ray: the ray pair (x, p)
follows the Hamiltonian flow of h = sign * c(x)|p|, the on-ray phase S is a
constant of motion, the complex symmetric Hessian M obeys a matrix Riccati
equation, and the leading amplitude A is transported with the source
(h_p.h_x + h_p M h_p - c^2 tr M) / (2h).  Second-order beams additionally
carry the third-order phase tensor and the amplitude gradient, whose equations
follow from one more transverse derivative of the Hessian and amplitude
equations; the derivation is written out in docs/higher_order_beams.md.

Beams are propagated in batches (struct-of-arrays families) through a single
adaptive integration so that superposition pipelines scale to thousands of
rays.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import dp45
from .errors import LostPositivity, MomentumUnderflow, StepFailure, ZeroGradientPhase
from .medium import (P_MIN, Branch, MediumModel, hamiltonian,
                     hamiltonian_blocks, hamiltonian_third_blocks)

DEFAULT_TOL = 1e-8


@dataclass
class BeamState:
    """Taylor data of a single beam about its ray at time t."""

    t: float
    x: np.ndarray          # (n,)
    p: np.ndarray          # (n,)
    S: float
    M: np.ndarray          # (n, n) complex symmetric, Im M > 0
    A: complex
    branch: Branch = Branch.PLUS
    order: int = 1
    x0: np.ndarray | None = None          # launch position, provenance key
    Phi3: np.ndarray | None = None        # (n, n, n) complex, order 2 only
    gradA: np.ndarray | None = None       # (n,) complex, order 2 only

    @property
    def n(self) -> int:
        return self.x.shape[-1]


@dataclass
class BeamFamily:
    """A batch of beams sharing branch and order (struct-of-arrays)."""

    t: float
    branch: Branch
    order: int
    x: np.ndarray          # (N, n)
    p: np.ndarray          # (N, n)
    S: np.ndarray          # (N,)
    M: np.ndarray          # (N, n, n) complex
    A: np.ndarray          # (N,) complex
    weight: np.ndarray     # (N,) quadrature weights
    x0: np.ndarray         # (N, n)
    Phi3: np.ndarray | None = None    # (N, n, n, n)
    gradA: np.ndarray | None = None   # (N, n)

    @property
    def size(self) -> int:
        return self.x.shape[0]

    @property
    def n(self) -> int:
        return self.x.shape[1]

    def state(self, j: int) -> BeamState:
        return BeamState(
            t=self.t, x=self.x[j].copy(), p=self.p[j].copy(), S=float(self.S[j]),
            M=self.M[j].copy(), A=complex(self.A[j]), branch=self.branch,
            order=self.order, x0=self.x0[j].copy(),
            Phi3=None if self.Phi3 is None else self.Phi3[j].copy(),
            gradA=None if self.gradA is None else self.gradA[j].copy(),
        )


def family_from_states(states: list[BeamState], weights=None) -> BeamFamily:
    s0 = states[0]
    if any(s.branch != s0.branch or s.order != s0.order for s in states):
        raise ValueError("states must share branch and order")
    N = len(states)
    w = np.ones(N) if weights is None else np.asarray(weights, dtype=float)
    fam = BeamFamily(
        t=s0.t, branch=s0.branch, order=s0.order,
        x=np.array([s.x for s in states], dtype=float),
        p=np.array([s.p for s in states], dtype=float),
        S=np.array([s.S for s in states], dtype=float),
        M=np.array([s.M for s in states], dtype=complex),
        A=np.array([s.A for s in states], dtype=complex),
        weight=w,
        x0=np.array([s.x0 if s.x0 is not None else s.x for s in states], dtype=float),
    )
    if s0.order == 2:
        fam.Phi3 = np.array([s.Phi3 for s in states], dtype=complex)
        fam.gradA = np.array([s.gradA for s in states], dtype=complex)
    return fam


def _sym3(T):
    """Symmetrize a (..., n, n, n) tensor over its last three axes."""
    return (T + np.swapaxes(T, -1, -2) + np.swapaxes(T, -2, -3)
            + np.swapaxes(np.swapaxes(T, -2, -3), -1, -2)
            + np.swapaxes(np.swapaxes(T, -1, -2), -2, -3)
            + np.swapaxes(np.swapaxes(T, -1, -3), -1, -2)) / 6.0


def min_imag_eig(M):
    """Smallest eigenvalue of Im M for a batch of small symmetric matrices."""
    im = np.ascontiguousarray(M.imag)
    return np.linalg.eigvalsh(im)[..., 0]


def _check_positivity(M):
    if np.any(min_imag_eig(M) <= 0):
        raise LostPositivity("Im M lost positive definiteness")


def family_rhs(medium: MediumModel, branch: Branch, order: int,
               x, p, M, A, Phi3=None, gradA=None, p_min: float = P_MIN):
    """Time derivatives of the packed beam quantities (batched).

    Returns (xd, pd, Md, Ad[, Phi3d, gradAd]).  dS/dt = 0 identically and is
    not returned.
    """
    H = hamiltonian(medium, branch, x, p, p_min)
    H_x, H_p, H_xx, H_xp, H_pp = hamiltonian_blocks(medium, branch, x, p, p_min)
    c = medium.speed(x)

    xd = H_p
    pd = -H_x
    H_px = np.swapaxes(H_xp, -1, -2)
    MHpp = M @ H_pp
    Md = -(H_xx + H_xp @ M + M @ H_px + MHpp @ M)
    trM = np.trace(M, axis1=-2, axis2=-1)
    MHp = np.einsum('...ij,...j->...i', M, H_p)
    src = (np.einsum('...i,...i->...', H_p, H_x)
           + np.einsum('...i,...i->...', H_p, MHp)
           - c ** 2 * trM)
    W = src / (2.0 * H)
    Ad = A * W
    if order == 1:
        return xd, pd, Md, Ad

    H3 = hamiltonian_third_blocks(medium, branch, x, p, p_min)
    dc = medium.speed_grad(x)
    C = H_xp + MHpp  # couples transverse index to the Taylor hierarchy

    D = np.array(H3.H_xxx, dtype=complex)
    D += (np.einsum('...ijc,...ck->...ijk', H3.H_xxp, M)
          + np.einsum('...ikc,...cj->...ijk', H3.H_xxp, M)
          + np.einsum('...jkc,...ci->...ijk', H3.H_xxp, M))
    D += (np.einsum('...ibc,...bj,...ck->...ijk', H3.H_xpp, M, M)
          + np.einsum('...jbc,...bi,...ck->...ijk', H3.H_xpp, M, M)
          + np.einsum('...kbc,...bi,...cj->...ijk', H3.H_xpp, M, M))
    D += np.einsum('...abc,...ai,...bj,...ck->...ijk', H3.H_ppp, M, M, M)

    Phi3d = -(D
              + np.einsum('...ia,...ajk->...ijk', C, Phi3)
              + np.einsum('...ja,...iak->...ijk', C, Phi3)
              + np.einsum('...ka,...ija->...ijk', C, Phi3))

    # gradient of the transport source, evaluated on the ray
    dP = (np.einsum('...ia,...a->...i', C, H_x)
          + np.einsum('...a,...ai->...i', H_p, H_xx)
          + np.einsum('...a,...ab,...bi->...i', H_p, H_xp, M)
          + 2.0 * np.einsum('...ia,...a->...i', C, MHp)
          + np.einsum('...a,...abi,...b->...i', H_p, Phi3, H_p)
          - 2.0 * (c * trM)[..., None] * dc
          - (c ** 2)[..., None] * np.einsum('...aai->...i', Phi3))
    dH_tilde = H_x + MHp
    dW = dP / (2.0 * H)[..., None] - (W / H)[..., None] * dH_tilde
    gradAd = (-np.einsum('...ia,...a->...i', C, gradA)
              + W[..., None] * gradA + A[..., None] * dW)
    return xd, pd, Md, Ad, Phi3d, gradAd


def family_rhs_second(medium, branch, order, x, p, M, A, dots,
                      p_min: float = P_MIN):
    """Second time derivatives (x'', p'', M'', A'') along the ray.

    Used by the residual evaluators, which need the full second time
    derivative of the quadratic phase.  For order 2 the third-tensor and
    amplitude-gradient second derivatives are not computed (they would need
    fourth speed derivatives); the residual evaluators truncate there, which
    only perturbs coefficients beyond the orders that are checked.
    """
    xd, pd, Md, Ad = dots[0], dots[1], dots[2], dots[3]
    H = hamiltonian(medium, branch, x, p, p_min)
    H_x, H_p, H_xx, H_xp, H_pp = hamiltonian_blocks(medium, branch, x, p, p_min)
    H3 = hamiltonian_third_blocks(medium, branch, x, p, p_min)
    c = medium.speed(x)
    dc = medium.speed_grad(x)

    H_px = np.swapaxes(H_xp, -1, -2)
    xdd = (np.einsum('...ji,...j->...i', H_xp, xd)
           + np.einsum('...ij,...j->...i', H_pp, pd))
    pdd = -(np.einsum('...ij,...j->...i', H_xx, xd)
            + np.einsum('...ij,...j->...i', H_xp, pd))

    Hxx_d = (np.einsum('...ijk,...k->...ij', H3.H_xxx, xd)
             + np.einsum('...ijc,...c->...ij', H3.H_xxp, pd))
    Hxp_d = (np.einsum('...ijc,...j->...ic', H3.H_xxp, xd)
             + np.einsum('...icb,...b->...ic', H3.H_xpp, pd))
    Hpp_d = (np.einsum('...jab,...j->...ab', H3.H_xpp, xd)
             + np.einsum('...abc,...c->...ab', H3.H_ppp, pd))
    Hpx_d = np.swapaxes(Hxp_d, -1, -2)

    Mdd = -(Hxx_d + Hxp_d @ M + H_xp @ Md + Md @ H_px + M @ Hpx_d
            + Md @ H_pp @ M + M @ Hpp_d @ M + M @ H_pp @ Md)

    trM = np.trace(M, axis1=-2, axis2=-1)
    trMd = np.trace(Md, axis1=-2, axis2=-1)
    MHp = np.einsum('...ij,...j->...i', M, H_p)
    src = (np.einsum('...i,...i->...', H_p, H_x)
           + np.einsum('...i,...i->...', H_p, MHp) - c ** 2 * trM)
    W = src / (2.0 * H)
    cd = np.einsum('...i,...i->...', dc, xd)
    src_d = (np.einsum('...i,...i->...', xdd, H_x)
             - np.einsum('...i,...i->...', H_p, pdd)
             + 2.0 * np.einsum('...i,...i->...', xdd, MHp)
             + np.einsum('...i,...ij,...j->...', H_p, Md, H_p)
             - 2.0 * c * cd * trM - c ** 2 * trMd)
    Add = Ad * W + A * src_d / (2.0 * H)
    return xdd, pdd, Mdd, Add


# ---------------------------------------------------------------------------
# packing for the integrator

def _sizes(N, n, order):
    segs = [("x", N * n), ("p", N * n), ("S", N), ("M", N * n * n), ("A", N)]
    if order == 2:
        segs += [("Phi3", N * n ** 3), ("gradA", N * n)]
    return segs


def _pack(fam: BeamFamily):
    parts = [fam.x.ravel(), fam.p.ravel(), fam.S.ravel(), fam.M.ravel(), fam.A.ravel()]
    if fam.order == 2:
        parts += [fam.Phi3.ravel(), fam.gradA.ravel()]
    return np.concatenate([np.asarray(q, dtype=complex) for q in parts])


def _unpack(y, N, n, order):
    out = {}
    i = 0
    for name, sz in _sizes(N, n, order):
        out[name] = y[i:i + sz]
        i += sz
    x = out["x"].real.reshape(N, n)
    p = out["p"].real.reshape(N, n)
    S = out["S"].real.reshape(N)
    M = out["M"].reshape(N, n, n)
    A = out["A"].reshape(N)
    Phi3 = out["Phi3"].reshape(N, n, n, n) if order == 2 else None
    gradA = out["gradA"].reshape(N, n) if order == 2 else None
    return x, p, S, M, A, Phi3, gradA


def propagate_family(medium: MediumModel, fam: BeamFamily, t_out,
                     tol: float = DEFAULT_TOL, p_min: float = P_MIN,
                     check: bool = True) -> list[BeamFamily]:
    """Propagate a whole family, returning snapshots at each time in t_out."""
    N, n, order = fam.size, fam.n, fam.order
    if check:
        _check_positivity(fam.M)
    H0 = hamiltonian(medium, fam.branch, fam.x, fam.p, p_min)

    def rhs(t, y):
        x, p, S, M, A, Phi3, gradA = _unpack(y, N, n, order)
        dots = family_rhs(medium, fam.branch, order, x, p, M, A, Phi3, gradA, p_min)
        zero_S = np.zeros(N, dtype=complex)
        parts = [dots[0].ravel(), dots[1].ravel(), zero_S, dots[2].ravel(), dots[3].ravel()]
        if order == 2:
            parts += [dots[4].ravel(), dots[5].ravel()]
        return np.concatenate([np.asarray(q, dtype=complex) for q in parts])

    def post(t, y):
        x, p, S, M, A, Phi3, gradA = _unpack(y, N, n, order)
        Msym = 0.5 * (M + np.swapaxes(M, -1, -2))
        i0 = 2 * N * n + N
        y[i0:i0 + N * n * n] = Msym.ravel()
        if order == 2:
            P3 = _sym3(Phi3)
            j0 = i0 + N * n * n + N
            y[j0:j0 + N * n ** 3] = P3.ravel()
        if check:
            _check_positivity(Msym)
            pn = np.linalg.norm(p, axis=-1)
            if np.any(pn < p_min):
                raise MomentumUnderflow("|p| underflow during propagation")

    y0 = _pack(fam)
    ys = dp45.integrate(rhs, fam.t, y0, t_out, tol, post_step=post)

    snaps = []
    for tt, y in zip(t_out, ys):
        x, p, S, M, A, Phi3, gradA = _unpack(y, N, n, order)
        M = 0.5 * (M + np.swapaxes(M, -1, -2))
        snap = BeamFamily(t=float(tt), branch=fam.branch, order=order,
                          x=x, p=p, S=S, M=M, A=A,
                          weight=fam.weight.copy(), x0=fam.x0.copy(),
                          Phi3=Phi3, gradA=gradA)
        if check:
            _check_positivity(M)
            H = hamiltonian(medium, fam.branch, x, p, p_min)
            drift = np.max(np.abs(H - H0) / (1.0 + np.abs(H0)))
            if drift > 10.0 * tol:
                raise StepFailure(f"Hamiltonian drift {drift:.3e} exceeds 10*tol")
        snaps.append(snap)
    return snaps


def propagate(medium: MediumModel, s0: BeamState, t_end: float,
              tol: float = DEFAULT_TOL, output_times=None,
              p_min: float = P_MIN) -> list[BeamState]:
    """Propagate one beam to t_end (negative allowed), returning BeamStates
    at the requested output times (default: just t_end)."""
    if not np.isfinite(t_end):
        raise ValueError("t_end must be finite")
    fam = family_from_states([s0])
    t_out = [t_end] if output_times is None else list(output_times)
    snaps = propagate_family(medium, fam, t_out, tol, p_min)
    return [s.state(0) for s in snaps]


def beam_rhs(medium: MediumModel, s: BeamState, p_min: float = P_MIN) -> BeamState:
    """Time derivative of a BeamState (dS/dt = 0 by construction)."""
    if np.linalg.norm(s.p) < p_min:
        raise MomentumUnderflow("|p| below floor in beam_rhs")
    _check_positivity(s.M[None])
    args = (s.x[None], s.p[None], s.M[None], np.array([s.A], dtype=complex))
    if s.order == 2:
        dots = family_rhs(medium, s.branch, 2, *args, s.Phi3[None], s.gradA[None], p_min)
        return BeamState(t=s.t, x=dots[0][0], p=dots[1][0], S=0.0, M=dots[2][0],
                         A=complex(dots[3][0]), branch=s.branch, order=2, x0=s.x0,
                         Phi3=dots[4][0], gradA=dots[5][0])
    dots = family_rhs(medium, s.branch, 1, *args, p_min=p_min)
    return BeamState(t=s.t, x=dots[0][0], p=dots[1][0], S=0.0, M=dots[2][0],
                     A=complex(dots[3][0]), branch=s.branch, order=1, x0=s.x0)


# ---------------------------------------------------------------------------
# launch data

def make_initial_state(S_in, A_init, x0, order: int = 1, beta: float = 1.0,
                       branch: Branch = Branch.PLUS) -> BeamState:
    """Beam Taylor data at t = 0 from the initial phase and branch amplitude.

    S_in provides value/grad/hess (and third for order 2); A_init is either a
    complex value (order 1) or an object with value/grad evaluators.
    """
    if beta <= 0:
        raise ValueError("beta must be positive")
    if order not in (1, 2):
        raise ValueError("supported beam orders are 1 and 2")
    x0 = np.atleast_1d(np.asarray(x0, dtype=float))
    n = x0.shape[0]
    p0 = np.atleast_1d(np.asarray(S_in.grad(x0), dtype=float))
    if np.linalg.norm(p0) == 0.0:
        raise ZeroGradientPhase(f"grad S_in vanishes at x0={x0}")
    M0 = np.asarray(S_in.hess(x0), dtype=complex) + 1j * beta * np.eye(n)
    if hasattr(A_init, "value"):
        A0 = complex(A_init.value(x0))
    else:
        A0 = complex(A_init)
    st = BeamState(t=0.0, x=x0.copy(), p=p0, S=float(S_in.value(x0)), M=M0,
                   A=A0, branch=branch, order=order, x0=x0.copy())
    if order == 2:
        st.Phi3 = np.asarray(S_in.third(x0), dtype=complex)
        if not hasattr(A_init, "grad"):
            raise ValueError("order-2 beams need an amplitude field with a gradient")
        st.gradA = np.asarray(A_init.grad(x0), dtype=complex)
    return st


# ---------------------------------------------------------------------------
# variational (tangent) flow and the fundamental-solution route to M

@dataclass
class VariationalFrame:
    """Jacobian d(x,p)(t)/d(x0,p0) of the ray flow, stored as two n x 2n rows."""

    t: float
    Jx: np.ndarray
    Jp: np.ndarray

    @property
    def matrix(self) -> np.ndarray:
        return np.vstack([self.Jx, self.Jp])

    @property
    def det(self) -> float:
        return float(np.linalg.det(self.matrix))


def propagate_variational(medium: MediumModel, x0, p0, branch: Branch,
                          t_end: float, tol: float = DEFAULT_TOL,
                          p_min: float = P_MIN) -> VariationalFrame:
    """Integrate the linearized ray flow; det(matrix) = 1 up to tolerance."""
    x0 = np.atleast_1d(np.asarray(x0, dtype=float))
    p0 = np.atleast_1d(np.asarray(p0, dtype=float))
    n = x0.shape[0]
    if np.linalg.norm(p0) < p_min:
        raise MomentumUnderflow("|p0| below floor")

    def rhs(t, y):
        x = y[:n].real
        p = y[n:2 * n].real
        J = y[2 * n:].reshape(2 * n, 2 * n)
        H_x, H_p, H_xx, H_xp, H_pp = hamiltonian_blocks(medium, branch, x, p, p_min)
        blk = np.block([[H_xp.T, H_pp], [-H_xx, -H_xp]])
        dx = np.concatenate([H_p, -H_x]).astype(complex)
        return np.concatenate([dx, (blk @ J).ravel()])

    y0 = np.concatenate([x0, p0, np.eye(2 * n).ravel()]).astype(complex)
    ys = dp45.integrate(rhs, 0.0, y0, [t_end], tol)
    J = ys[0][2 * n:].real.reshape(2 * n, 2 * n)
    return VariationalFrame(t=float(t_end), Jx=J[:n], Jp=J[n:])


def hessian_from_frame(frame: VariationalFrame, M0) -> np.ndarray:
    """Riccati solution via the fundamental system: M = (C' + D'M0)(C + D M0)^-1."""
    n = frame.Jx.shape[0]
    M0 = np.asarray(M0, dtype=complex).reshape(n, n)
    C, D = frame.Jx[:, :n], frame.Jx[:, n:]
    Cp, Dp = frame.Jp[:, :n], frame.Jp[:, n:]
    return (Cp + Dp @ M0) @ np.linalg.inv(C + D @ M0)
