"""Numba-accelerated kernels; exact mirrors of _kernels_numpy semantics.

Field and residual accumulation parallelize over evaluation points; each
point sums its beams in ascending index order, so results are deterministic
for any thread count.
"""
from __future__ import annotations

import numpy as np
from numba import njit, prange


@njit(cache=True)
def _sstep(tau):
    if tau <= 0.0:
        return 0.0
    if tau >= 1.0:
        return 1.0
    q = np.exp(-1.0 / tau)
    qb = np.exp(-1.0 / (1.0 - tau))
    return q / (q + qb)


@njit(cache=True)
def _sstep_d1(tau):
    if tau <= 0.0 or tau >= 1.0:
        return 0.0
    q = np.exp(-1.0 / tau)
    qb = np.exp(-1.0 / (1.0 - tau))
    g = tau ** -2 + (1.0 - tau) ** -2
    return q * qb * g / (q + qb) ** 2


@njit(cache=True)
def _sstep_d2(tau):
    if tau <= 0.0 or tau >= 1.0:
        return 0.0
    q = np.exp(-1.0 / tau)
    qb = np.exp(-1.0 / (1.0 - tau))
    G = q + qb
    g = tau ** -2 + (1.0 - tau) ** -2
    gm = tau ** -2 - (1.0 - tau) ** -2
    gp = -2.0 * tau ** -3 + 2.0 * (1.0 - tau) ** -3
    Gp = q / tau ** 2 - qb / (1.0 - tau) ** 2
    return q * qb * ((gm * g + gp) / G ** 2 - 2.0 * g * Gp / G ** 3)


@njit(parallel=True, cache=True)
def field_sum(pts, order,
              x, p, S, M, A,
              xd, pd, Sd, Md, Ad,
              Phi3, gA, Phi3d, gAd,
              w, Rskip, r_rho, inv_eps, clamp):
    npts, n = pts.shape
    N = x.shape[0]
    u = np.zeros(npts, np.complex128)
    ut = np.zeros(npts, np.complex128)
    ux = np.zeros((npts, n), np.complex128)
    for q in prange(npts):
        d = np.empty(n, np.float64)
        gphi = np.empty(n, np.complex128)
        uq = 0.0 + 0.0j
        utq = 0.0 + 0.0j
        uxq = np.zeros(n, np.complex128)
        for j in range(N):
            s2 = 0.0
            for i in range(n):
                d[i] = pts[q, i] - x[j, i]
                s2 += d[i] * d[i]
            if s2 > Rskip[j] * Rskip[j]:
                continue
            pdot = 0.0
            pxd = 0.0
            pdd_ = 0.0
            for i in range(n):
                pdot += p[j, i] * d[i]
                pxd += p[j, i] * xd[j, i]
                pdd_ += pd[j, i] * d[i]
            quad = 0.0 + 0.0j
            quad_t = 0.0 + 0.0j
            xMd = 0.0 + 0.0j
            for a in range(n):
                Md_a = 0.0 + 0.0j
                Mtd_a = 0.0 + 0.0j
                for b in range(n):
                    Md_a += M[j, a, b] * d[b]
                    Mtd_a += Md[j, a, b] * d[b]
                gphi[a] = p[j, a] + Md_a
                quad += 0.5 * d[a] * Md_a
                quad_t += 0.5 * d[a] * Mtd_a
                xMd += xd[j, a] * Md_a
            phi = S[j] + pdot + quad
            phi_t = Sd[j] + pdd_ - pxd - xMd + quad_t
            amp = A[j]
            amp_t = Ad[j]
            if order == 2:
                cub = 0.0 + 0.0j
                cub_t = 0.0 + 0.0j
                cub_x = 0.0 + 0.0j
                for a in range(n):
                    ga = 0.0 + 0.0j
                    for b in range(n):
                        for c in range(n):
                            cub += Phi3[j, a, b, c] * d[a] * d[b] * d[c]
                            cub_t += Phi3d[j, a, b, c] * d[a] * d[b] * d[c]
                            cub_x += Phi3[j, a, b, c] * xd[j, a] * d[b] * d[c]
                            ga += Phi3[j, a, b, c] * d[b] * d[c]
                    gphi[a] += 0.5 * ga
                    amp += gA[j, a] * d[a]
                    amp_t += gAd[j, a] * d[a] - gA[j, a] * xd[j, a]
                phi += cub / 6.0
                phi_t += cub_t / 6.0 - 0.5 * cub_x
            if phi.imag * inv_eps > clamp:
                continue
            rho = 1.0
            rho_t = 0.0
            grho_s = 0.0
            s = 0.0
            if order == 2 and np.isfinite(r_rho[j]):
                s = np.sqrt(s2)
                tau = (r_rho[j] - s) / (0.5 * r_rho[j])
                rho = _sstep(tau)
                if rho == 0.0:
                    continue
                rho_s = _sstep_d1(tau) * (-2.0 / r_rho[j])
                if s > 0.0:
                    dhx = 0.0
                    for i in range(n):
                        dhx += d[i] / s * xd[j, i]
                    rho_t = -rho_s * dhx
                grho_s = rho_s
            E = np.exp(1j * inv_eps * phi)
            wj = w[j]
            uq += wj * rho * amp * E
            utq += wj * (rho_t * amp + rho * amp_t + 1j * inv_eps * rho * amp * phi_t) * E
            for i in range(n):
                gr = grho_s * d[i] / s if s > 0.0 else 0.0
                gam = gA[j, i] if order == 2 else 0.0 + 0.0j
                uxq[i] += wj * (gr * amp + rho * gam
                                + 1j * inv_eps * rho * amp * gphi[i]) * E
        u[q] = uq
        ut[q] = utq
        for i in range(n):
            ux[q, i] = uxq[i]
    return u, ut, ux


@njit(parallel=True, cache=True)
def residual_sum(pts, csq, order,
                 x, p, S, M, A,
                 xd, pd, Sd, Md, Ad,
                 xdd, pdd, Mdd, Add,
                 Phi3, gA, Phi3d, gAd,
                 w, Rskip, r_rho, inv_eps, clamp):
    npts, n = pts.shape
    N = x.shape[0]
    out = np.zeros(npts, np.complex128)
    for q in prange(npts):
        d = np.empty(n, np.float64)
        gphi = np.empty(n, np.complex128)
        gB = np.empty(n, np.complex128)
        acc = 0.0 + 0.0j
        for j in range(N):
            s2 = 0.0
            for i in range(n):
                d[i] = pts[q, i] - x[j, i]
                s2 += d[i] * d[i]
            if s2 > Rskip[j] * Rskip[j]:
                continue
            # polynomial pieces
            pdot = 0.0
            pxd = 0.0
            pdd_ = 0.0
            pxdd = 0.0
            pddxd = 0.0
            xdxd = 0.0
            for i in range(n):
                pdot += p[j, i] * d[i]
                pxd += p[j, i] * xd[j, i]
                pdd_ += pd[j, i] * d[i]
                pxdd += p[j, i] * xdd[j, i]
                pddxd += pd[j, i] * xd[j, i]
                xdxd += xd[j, i] * xd[j, i]
            quad = 0.0 + 0.0j
            quad_t = 0.0 + 0.0j
            quad_tt = 0.0 + 0.0j
            xMd = 0.0 + 0.0j
            xMx = 0.0 + 0.0j
            lin_tt = 0.0 + 0.0j
            trM = 0.0 + 0.0j
            for a in range(n):
                Md_a = 0.0 + 0.0j
                Mtd_a = 0.0 + 0.0j
                Mttd_a = 0.0 + 0.0j
                Mxd_a = 0.0 + 0.0j
                Mtxd_a = 0.0 + 0.0j
                Mxdd_a = 0.0 + 0.0j
                for b in range(n):
                    Md_a += M[j, a, b] * d[b]
                    Mtd_a += Md[j, a, b] * d[b]
                    Mttd_a += Mdd[j, a, b] * d[b]
                    Mxd_a += M[j, a, b] * xd[j, b]
                    Mtxd_a += Md[j, a, b] * xd[j, b]
                    Mxdd_a += M[j, a, b] * xdd[j, b]
                gphi[a] = p[j, a] + Md_a
                quad += 0.5 * d[a] * Md_a
                quad_t += 0.5 * d[a] * Mtd_a
                quad_tt += 0.5 * d[a] * Mttd_a
                xMd += xd[j, a] * Md_a
                xMx += xd[j, a] * Mxd_a
                lin_tt += d[a] * (pdd[j, a] - 2.0 * Mtxd_a - Mxdd_a)
                trM += M[j, a, a]
            phi = S[j] + pdot + quad
            phi_t = Sd[j] + pdd_ - pxd - xMd + quad_t
            phi_tt = (-2.0 * pddxd - pxdd + xMx) + lin_tt + quad_tt
            lap_phi = trM
            amp = A[j]
            amp_t = Ad[j]
            amp_tt = Add[j]
            if order == 2:
                cub = 0.0 + 0.0j
                cub_t = 0.0 + 0.0j
                cub_x = 0.0 + 0.0j
                cub_xx = 0.0 + 0.0j
                cub_xdd = 0.0 + 0.0j
                cub_td = 0.0 + 0.0j
                for a in range(n):
                    ga = 0.0 + 0.0j
                    tr3_a = 0.0 + 0.0j
                    for b in range(n):
                        tr3_a += Phi3[j, b, b, a]
                        for c in range(n):
                            P3 = Phi3[j, a, b, c]
                            P3d = Phi3d[j, a, b, c]
                            cub += P3 * d[a] * d[b] * d[c]
                            cub_t += P3d * d[a] * d[b] * d[c]
                            cub_x += P3 * xd[j, a] * d[b] * d[c]
                            cub_xx += P3 * xd[j, a] * xd[j, b] * d[c]
                            cub_xdd += P3 * xdd[j, a] * d[b] * d[c]
                            cub_td += P3d * xd[j, a] * d[b] * d[c]
                            ga += P3 * d[b] * d[c]
                    gphi[a] += 0.5 * ga
                    lap_phi += tr3_a * d[a]
                    amp += gA[j, a] * d[a]
                    amp_t += gAd[j, a] * d[a] - gA[j, a] * xd[j, a]
                    amp_tt += -2.0 * gAd[j, a] * xd[j, a] - gA[j, a] * xdd[j, a]
                phi += cub / 6.0
                phi_t += cub_t / 6.0 - 0.5 * cub_x
                phi_tt += cub_xx - 0.5 * cub_xdd - cub_td
            if phi.imag * inv_eps > clamp:
                continue
            rho = 1.0
            rho_t = 0.0
            rho_tt = 0.0
            lap_rho = 0.0
            grho_s = 0.0
            s = 0.0
            if order == 2 and np.isfinite(r_rho[j]):
                s = np.sqrt(s2)
                tau = (r_rho[j] - s) / (0.5 * r_rho[j])
                rho = _sstep(tau)
                if rho == 0.0:
                    continue
                dts = -2.0 / r_rho[j]
                rho_s = _sstep_d1(tau) * dts
                rho_ss = _sstep_d2(tau) * dts * dts
                if s > 0.0:
                    dhx = 0.0
                    dhxdd = 0.0
                    for i in range(n):
                        dhx += d[i] / s * xd[j, i]
                        dhxdd += d[i] / s * xdd[j, i]
                    rho_t = -rho_s * dhx
                    rho_tt = rho_ss * dhx * dhx + rho_s * ((xdxd - dhx * dhx) / s - dhxdd)
                    lap_rho = rho_ss + (n - 1) * rho_s / s
                else:
                    lap_rho = rho_ss
                grho_s = rho_s
            B = rho * amp
            B_t = rho_t * amp + rho * amp_t
            B_tt = rho_tt * amp + 2.0 * rho_t * amp_t + rho * amp_tt
            gg = 0.0 + 0.0j
            gBgphi = 0.0 + 0.0j
            lap_B = lap_rho * amp
            for i in range(n):
                gam = gA[j, i] if order == 2 else 0.0 + 0.0j
                gr = grho_s * d[i] / s if s > 0.0 else 0.0
                gB[i] = gr * amp + rho * gam
                gg += gphi[i] * gphi[i]
                gBgphi += gB[i] * gphi[i]
                lap_B += 2.0 * gr * gam
            G = phi_t * phi_t - csq[q] * gg
            cm2 = -G * B
            cm1 = 2j * (B_t * phi_t - csq[q] * gBgphi
                        + 0.5 * B * (phi_tt - csq[q] * lap_phi))
            c0 = B_tt - csq[q] * lap_B
            E = np.exp(1j * inv_eps * phi)
            acc += w[j] * (inv_eps * inv_eps * cm2 + inv_eps * cm1 + c0) * E
        out[q] = acc
    return out


@njit(parallel=True, cache=True)
def leapfrog(u_prev, u_curr, coef, nsteps):
    up = u_prev.copy()
    uc = u_curr.copy()
    Nx = uc.shape[0]
    for _ in range(nsteps):
        un = np.empty_like(uc)
        un[0] = 0.0
        un[Nx - 1] = 0.0
        for i in prange(1, Nx - 1):
            un[i] = (2.0 * uc[i] - up[i]
                     + coef[i] * (uc[i + 1] - 2.0 * uc[i] + uc[i - 1]))
        up = uc
        uc = un
    return up, uc


@njit(parallel=True, cache=True)
def cubic_gather_2d(field, fx, fp):
    npts = fx.shape[0]
    out = np.empty(npts, field.dtype)
    for q in prange(npts):
        i0 = np.int64(np.floor(fx[q])) - 1
        j0 = np.int64(np.floor(fp[q])) - 1
        tx = fx[q] - (i0 + 1)
        tp = fp[q] - (j0 + 1)
        wx0 = -tx * (tx - 1.0) * (tx - 2.0) / 6.0
        wx1 = (tx + 1.0) * (tx - 1.0) * (tx - 2.0) / 2.0
        wx2 = -(tx + 1.0) * tx * (tx - 2.0) / 2.0
        wx3 = (tx + 1.0) * tx * (tx - 1.0) / 6.0
        wp0 = -tp * (tp - 1.0) * (tp - 2.0) / 6.0
        wp1 = (tp + 1.0) * (tp - 1.0) * (tp - 2.0) / 2.0
        wp2 = -(tp + 1.0) * tp * (tp - 2.0) / 2.0
        wp3 = (tp + 1.0) * tp * (tp - 1.0) / 6.0
        acc = field[i0, j0] * 0
        row0 = wx0 * field[i0, j0] + wx1 * field[i0 + 1, j0] + wx2 * field[i0 + 2, j0] + wx3 * field[i0 + 3, j0]
        row1 = wx0 * field[i0, j0 + 1] + wx1 * field[i0 + 1, j0 + 1] + wx2 * field[i0 + 2, j0 + 1] + wx3 * field[i0 + 3, j0 + 1]
        row2 = wx0 * field[i0, j0 + 2] + wx1 * field[i0 + 1, j0 + 2] + wx2 * field[i0 + 2, j0 + 2] + wx3 * field[i0 + 3, j0 + 2]
        row3 = wx0 * field[i0, j0 + 3] + wx1 * field[i0 + 1, j0 + 3] + wx2 * field[i0 + 2, j0 + 3] + wx3 * field[i0 + 3, j0 + 3]
        acc = wp0 * row0 + wp1 * row1 + wp2 * row2 + wp3 * row3
        out[q] = acc
    return out
