"""Pure-numpy reference implementations of the hot kernels.

Selected at import time by hfbeam.kernels (HFBEAM_NO_NUMBA=1 forces this
path).  Semantics must match _kernels_numba exactly; the equivalence is pinned
by tests.  Accumulation over beams happens in a fixed order (ascending beam
index) so results are deterministic for a given engine.
"""
from __future__ import annotations

import numpy as np


def smooth_step(tau):
    """C-infinity step: 0 for tau <= 0, 1 for tau >= 1."""
    tau = np.asarray(tau, dtype=float)
    lo = tau <= 0.0
    hi = tau >= 1.0
    mid = ~(lo | hi)
    out = np.zeros_like(tau)
    out[hi] = 1.0
    tm = tau[mid]
    q = np.exp(-1.0 / tm)
    qb = np.exp(-1.0 / (1.0 - tm))
    out[mid] = q / (q + qb)
    return out


def smooth_step_d1(tau):
    tau = np.asarray(tau, dtype=float)
    out = np.zeros_like(tau)
    mid = (tau > 0.0) & (tau < 1.0)
    tm = tau[mid]
    q = np.exp(-1.0 / tm)
    qb = np.exp(-1.0 / (1.0 - tm))
    g = tm ** -2 + (1.0 - tm) ** -2
    out[mid] = q * qb * g / (q + qb) ** 2
    return out


def smooth_step_d2(tau):
    tau = np.asarray(tau, dtype=float)
    out = np.zeros_like(tau)
    mid = (tau > 0.0) & (tau < 1.0)
    tm = tau[mid]
    q = np.exp(-1.0 / tm)
    qb = np.exp(-1.0 / (1.0 - tm))
    G = q + qb
    g = tm ** -2 + (1.0 - tm) ** -2
    gm = tm ** -2 - (1.0 - tm) ** -2
    gp = -2.0 * tm ** -3 + 2.0 * (1.0 - tm) ** -3
    Gp = q / tm ** 2 - qb / (1.0 - tm) ** 2
    out[mid] = q * qb * ((gm * g + gp) / G ** 2 - 2.0 * g * Gp / G ** 3)
    return out


def cutoff(s, r_rho):
    """Radial cutoff value and first two s-derivatives; identity for r = inf.

    rho = 1 for s <= r/2, rho = 0 for s >= r, smooth in between.
    """
    s = np.asarray(s, dtype=float)
    if not np.isfinite(r_rho):
        one = np.ones_like(s)
        zero = np.zeros_like(s)
        return one, zero, zero
    tau = (r_rho - s) / (0.5 * r_rho)
    dt = -2.0 / r_rho
    return (smooth_step(tau),
            smooth_step_d1(tau) * dt,
            smooth_step_d2(tau) * dt * dt)


def _beam_polys(d, order, p, S, M, xd, pd, Sd, Md, Phi3, gA, Phi3d, gAd, A, Ad):
    """Per-beam Taylor polynomial pieces at offsets d (npts, n).

    Returns phase, phase_t, grad phase, amplitude, amplitude_t.
    """
    Md_quad = 0.5 * np.einsum('ki,ij,kj->k', d, Md, d)
    quad = 0.5 * np.einsum('ki,ij,kj->k', d, M, d)
    pdot_d = d @ p
    phi = S + pdot_d + quad
    phi_t = Sd + d @ pd - p @ xd - np.einsum('i,ij,kj->k', xd, M, d) + Md_quad
    gphi = p[None, :] + d @ M.T
    amp = np.full(d.shape[0], A, dtype=complex)
    amp_t = np.full(d.shape[0], Ad, dtype=complex)
    if order == 2:
        cub = np.einsum('ijk,qi,qj,qk->q', Phi3, d, d, d)
        phi = phi + cub / 6.0
        phi_t = (phi_t
                 - 0.5 * np.einsum('ijk,i,qj,qk->q', Phi3, xd, d, d)
                 + np.einsum('ijk,qi,qj,qk->q', Phi3d, d, d, d) / 6.0)
        gphi = gphi + 0.5 * np.einsum('kab,qa,qb->qk', Phi3, d, d)
        amp = amp + d @ gA
        amp_t = amp_t + d @ gAd - gA @ xd
    return phi, phi_t, gphi, amp, amp_t


def field_sum(pts, order,
              x, p, S, M, A,
              xd, pd, Sd, Md, Ad,
              Phi3, gA, Phi3d, gAd,
              w, Rskip, r_rho, inv_eps, clamp):
    """Accumulate u, u_t and grad u of a weighted beam family at pts."""
    npts, n = pts.shape
    u = np.zeros(npts, dtype=complex)
    ut = np.zeros(npts, dtype=complex)
    ux = np.zeros((npts, n), dtype=complex)
    for j in range(x.shape[0]):
        d = pts - x[j]
        s2 = np.einsum('ki,ki->k', d, d)
        sel = np.flatnonzero(s2 <= Rskip[j] ** 2)
        if sel.size == 0:
            continue
        dj = d[sel]
        phi, phi_t, gphi, amp, amp_t = _beam_polys(
            dj, order, p[j], S[j], M[j], xd[j], pd[j], Sd[j], Md[j],
            Phi3[j], gA[j], Phi3d[j], gAd[j], A[j], Ad[j])
        keep = phi.imag * inv_eps <= clamp
        if not np.any(keep):
            continue
        dj, phi, phi_t, gphi, amp, amp_t = (dj[keep], phi[keep], phi_t[keep],
                                            gphi[keep], amp[keep], amp_t[keep])
        idx = sel[keep]
        E = np.exp(1j * inv_eps * phi)
        if order == 2 and np.isfinite(r_rho[j]):
            s = np.sqrt(np.einsum('ki,ki->k', dj, dj))
            rho, rho_s, _ = cutoff(s, r_rho[j])
            with np.errstate(invalid='ignore', divide='ignore'):
                dhat = np.where(s[:, None] > 0, dj / np.where(s == 0, 1.0, s)[:, None], 0.0)
            rho_t = -rho_s * (dhat @ xd[j])
            grho = rho_s[:, None] * dhat
        else:
            rho = np.ones(dj.shape[0])
            rho_t = np.zeros(dj.shape[0])
            grho = np.zeros_like(dj)
        wj = w[j]
        u[idx] += wj * rho * amp * E
        ut[idx] += wj * (rho_t * amp + rho * amp_t + 1j * inv_eps * rho * amp * phi_t) * E
        gamp = gA[j][None, :] if order == 2 else 0.0
        ux[idx] += wj * (grho * amp[:, None] + rho[:, None] * gamp
                         + 1j * inv_eps * rho[:, None] * amp[:, None] * gphi) * E[:, None]
    return u, ut, ux


def residual_sum(pts, csq, order,
                 x, p, S, M, A,
                 xd, pd, Sd, Md, Ad,
                 xdd, pdd, Mdd, Add,
                 Phi3, gA, Phi3d, gAd,
                 w, Rskip, r_rho, inv_eps, clamp):
    """Accumulate the wave-operator residual of the weighted family at pts.

    Returns sum_j w_j (eps^-2 c_-2 + eps^-1 c_-1 + c_0) exp(i phi_j / eps),
    with the coefficient polynomials built from exact first and second time
    derivatives of each beam's Taylor data.
    """
    npts, n = pts.shape
    out = np.zeros(npts, dtype=complex)
    for j in range(x.shape[0]):
        d = pts - x[j]
        s2 = np.einsum('ki,ki->k', d, d)
        sel = np.flatnonzero(s2 <= Rskip[j] ** 2)
        if sel.size == 0:
            continue
        dj = d[sel]
        cm2, cm1, c0, phi = residual_coeffs_eval(
            dj, csq[sel], order, p[j], S[j], M[j], A[j],
            xd[j], pd[j], Sd[j], Md[j], Ad[j],
            xdd[j], pdd[j], Mdd[j], Add[j],
            Phi3[j], gA[j], Phi3d[j], gAd[j], r_rho[j])
        keep = phi.imag * inv_eps <= clamp
        if not np.any(keep):
            continue
        E = np.exp(1j * inv_eps * phi[keep])
        vals = (inv_eps ** 2 * cm2[keep] + inv_eps * cm1[keep] + c0[keep]) * E
        out[sel[keep]] += w[j] * vals
    return out


def residual_coeffs_eval(d, csq, order, p, S, M, A,
                         xd, pd, Sd, Md, Ad,
                         xdd, pdd, Mdd, Add,
                         Phi3, gA, Phi3d, gAd, r_rho):
    """Residual coefficient polynomials c_-2, c_-1, c_0 and the phase, for one
    beam, at offsets d from the ray.  csq is c(y)^2 at the evaluation points.
    """
    npts, n = d.shape
    phi, phi_t, gphi, amp, amp_t = _beam_polys(
        d, order, p, S, M, xd, pd, Sd, Md, Phi3, gA, Phi3d, gAd, A, Ad)

    # second time derivative of the phase polynomial
    c0_t = -2.0 * (pd @ xd) - p @ xdd + xd @ (M @ xd)
    c1_t = pdd - 2.0 * (Md @ xd) - M @ xdd
    c2_t = 0.5 * Mdd
    phi_tt = c0_t + d @ c1_t + np.einsum('ki,ij,kj->k', d, c2_t, d)
    lap_phi = np.trace(M).astype(complex) * np.ones(npts)
    if order == 2:
        phi_tt = (phi_tt
                  + np.einsum('ijk,i,j,qk->q', Phi3, xd, xd, d)
                  - 0.5 * np.einsum('ijk,i,qj,qk->q', Phi3, xdd, d, d)
                  - np.einsum('ijk,i,qj,qk->q', Phi3d, xd, d, d))
        lap_phi = lap_phi + np.einsum('aak,qk->q', Phi3, d)

    amp_tt = np.full(npts, Add, dtype=complex)
    if order == 2:
        amp_tt = amp_tt - 2.0 * (gAd @ xd) - (gA @ xdd)
    gamp = gA[None, :] * np.ones((npts, 1)) if order == 2 else np.zeros((npts, n), dtype=complex)

    # cutoff factors (rho == 1 for order 1)
    if order == 2 and np.isfinite(r_rho):
        s = np.sqrt(np.einsum('ki,ki->k', d, d))
        rho, rho_s, rho_ss = cutoff(s, r_rho)
        safe = np.where(s == 0, 1.0, s)
        dhat = np.where(s[:, None] > 0, d / safe[:, None], 0.0)
        dhx = dhat @ xd
        rho_t = -rho_s * dhx
        rho_tt = rho_ss * dhx ** 2 + rho_s * ((xd @ xd - dhx ** 2) / safe - dhat @ xdd)
        rho_tt = np.where(s == 0, 0.0, rho_tt)
        grho = rho_s[:, None] * dhat
        lap_rho = rho_ss + (len(xd) - 1) * np.where(s == 0, 0.0, rho_s / safe)
    else:
        rho = np.ones(npts)
        rho_t = np.zeros(npts)
        rho_tt = np.zeros(npts)
        grho = np.zeros((npts, n))
        lap_rho = np.zeros(npts)

    B = rho * amp
    B_t = rho_t * amp + rho * amp_t
    B_tt = rho_tt * amp + 2.0 * rho_t * amp_t + rho * amp_tt
    gB = grho * amp[:, None] + rho[:, None] * gamp
    lap_B = lap_rho * amp
    if order == 2:
        lap_B = lap_B + 2.0 * np.einsum('ki,ki->k', grho.astype(complex), gamp)

    G = phi_t ** 2 - csq * np.einsum('ki,ki->k', gphi, gphi)
    cm2 = -G * B
    cm1 = 2j * (B_t * phi_t - csq * np.einsum('ki,ki->k', gB.astype(complex), gphi)
                + 0.5 * B * (phi_tt - csq * lap_phi))
    c0 = B_tt - csq * lap_B
    return cm2, cm1, c0, phi


def leapfrog(u_prev, u_curr, coef, nsteps):
    """Advance the 1D leapfrog scheme nsteps times.

    coef[i] = (c_i dt / h)^2; interior update with homogeneous Dirichlet ends.
    Returns (second-to-last, last) levels.
    """
    up = u_prev.copy()
    uc = u_curr.copy()
    for _ in range(nsteps):
        un = np.empty_like(uc)
        un[0] = 0.0
        un[-1] = 0.0
        un[1:-1] = (2.0 * uc[1:-1] - up[1:-1]
                    + coef[1:-1] * (uc[2:] - 2.0 * uc[1:-1] + uc[:-2]))
        up, uc = uc, un
    return up, uc


def cubic_gather_2d(field, fx, fp):
    """Tensor-product cubic Lagrange interpolation on a uniform 2D grid.

    field has shape (Nx, Np); fx, fp are fractional index coordinates of the
    query points.  Callers guarantee 1 <= fx <= Nx-3 and likewise for fp.
    """
    i0 = np.floor(fx).astype(np.int64) - 1
    j0 = np.floor(fp).astype(np.int64) - 1
    tx = fx - (i0 + 1)
    tp = fp - (j0 + 1)

    def lag_weights(t):
        w0 = -t * (t - 1.0) * (t - 2.0) / 6.0
        w1 = (t + 1.0) * (t - 1.0) * (t - 2.0) / 2.0
        w2 = -(t + 1.0) * t * (t - 2.0) / 2.0
        w3 = (t + 1.0) * t * (t - 1.0) / 6.0
        return w0, w1, w2, w3

    wx = lag_weights(tx)
    wp = lag_weights(tp)
    out = np.zeros(fx.shape, dtype=field.dtype)
    for a in range(4):
        for b in range(4):
            out += wx[a] * wp[b] * field[i0 + a, j0 + b]
    return out
