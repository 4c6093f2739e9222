"""Eulerian (phase-space) pipeline for n = 1.

Level-set and beam-component functions are advected on a uniform (x, p) grid
under the Liouville operator L = d_t + V . grad_X with V = (h_p, -h_x), using
unconditionally stable semi-Lagrangian steps (RK2 backtrace plus tensor cubic
interpolation).  The phase Hessian is reconstructed algebraically from the
level-set pair, Mtilde = -g_x / g_p with g = phi1 + i w, and the field is
assembled against a regularized delta of the momentum level set:

    u(y) = Z * sum_cells u_cell(y) delta_eta(w) dx dp.

The imaginary-part normalization is pinned to beta = 1 by the initial choice
(phi1, w) = (x, p - S_in'(x)); configs with other beta values are rejected.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import kernels
from .errors import (ConfigError, DeltaUnresolved, LostPositivity, OutOfDomain,
                     SingularGp)
from .medium import P_MIN, Branch, MediumModel
from .synthesis import (InitialData, SuperpositionConfig, WaveField,
                        BranchAmplitude)


@dataclass(frozen=True)
class PhaseGrid:
    """Uniform 2D phase-space grid for one branch; the momentum range must
    stay clear of the |p| = 0 cone by at least 10 * p_min."""

    x0: float
    x1: float
    nx: int
    p0: float
    p1: float
    np_: int
    branch: Branch = Branch.PLUS

    def __post_init__(self):
        if self.x1 <= self.x0 or self.p1 <= self.p0:
            raise ConfigError("degenerate phase-space extent")
        if min(abs(self.p0), abs(self.p1)) < 10 * P_MIN or self.p0 * self.p1 <= 0:
            raise ConfigError("momentum range must exclude a band around p = 0")

    @property
    def dx(self) -> float:
        return (self.x1 - self.x0) / (self.nx - 1)

    @property
    def dp(self) -> float:
        return (self.p1 - self.p0) / (self.np_ - 1)

    def axes(self):
        return (np.linspace(self.x0, self.x1, self.nx),
                np.linspace(self.p0, self.p1, self.np_))

    def mesh(self):
        x, p = self.axes()
        return np.meshgrid(x, p, indexing="ij")


@dataclass
class LevelSetBundle:
    """Advected grid functions for one branch: phi1 (initially x), the
    momentum level set w (initially p - S_in'(x)), the phase S, and the
    amplitude A with its transport source.

    edge_x / edge_p count boundary cells (fractional, per axis) contaminated by
    inflow clamping; consumers refuse to read inside those margins."""

    grid: PhaseGrid
    t: float
    phi1: np.ndarray
    w: np.ndarray
    S: np.ndarray
    A: np.ndarray
    edge_x: float = 0.0
    edge_p: float = 0.0

    def copy(self):
        return LevelSetBundle(self.grid, self.t, self.phi1.copy(), self.w.copy(),
                              self.S.copy(), self.A.copy(), self.edge_x, self.edge_p)

    def edge_cells(self):
        kx = int(np.ceil(self.edge_x)) + 2 if self.edge_x > 0 else 0
        kp = int(np.ceil(self.edge_p)) + 2 if self.edge_p > 0 else 0
        return kx, kp

    def clean_interior(self) -> np.ndarray:
        """Mask of cells unaffected by boundary inflow (stencil pad included)."""
        kx, kp = self.edge_cells()
        mask = np.zeros(self.phi1.shape, dtype=bool)
        if 2 * kx < self.phi1.shape[0] and 2 * kp < self.phi1.shape[1]:
            mask[kx:self.phi1.shape[0] - kx, kp:self.phi1.shape[1] - kp] = True
        return mask


def init_bundle(grid: PhaseGrid, data: InitialData, medium: MediumModel) -> LevelSetBundle:
    X, P = grid.mesh()
    pts = X.reshape(-1, 1)
    Sp = np.asarray(data.S.grad(pts))[:, 0].reshape(X.shape)
    S0 = np.asarray(data.S.value(pts)).reshape(X.shape)
    amp = BranchAmplitude(data, medium, grid.branch)
    A0 = np.asarray(amp.value(pts)).reshape(X.shape).astype(complex)
    return LevelSetBundle(grid=grid, t=0.0, phi1=X.copy(), w=P - Sp, S=S0, A=A0)


def _velocity(medium: MediumModel, branch: Branch, X, P):
    """V = (h_p, -h_x) for h = sign c(x) |p| on n = 1 grids."""
    pts = X.reshape(-1, 1)
    c = np.asarray(medium.speed(pts)).reshape(X.shape)
    dc = np.asarray(medium.speed_grad(pts))[:, 0].reshape(X.shape)
    s = branch.sign
    return s * c * np.sign(P), -s * np.abs(P) * dc


def fd4(field, h, axis):
    """4th-order first derivative with one-sided ends."""
    f = np.moveaxis(np.asarray(field), axis, 0)
    g = np.empty_like(f)
    g[2:-2] = (-f[4:] + 8 * f[3:-1] - 8 * f[1:-3] + f[:-4]) / (12 * h)
    g[0] = (-25 * f[0] + 48 * f[1] - 36 * f[2] + 16 * f[3] - 3 * f[4]) / (12 * h)
    g[1] = (-3 * f[0] - 10 * f[1] + 18 * f[2] - 6 * f[3] + f[4]) / (12 * h)
    g[-1] = (25 * f[-1] - 48 * f[-2] + 36 * f[-3] - 16 * f[-4] + 3 * f[-5]) / (12 * h)
    g[-2] = (3 * f[-1] + 10 * f[-2] - 18 * f[-3] + 6 * f[-4] - f[-5]) / (12 * h)
    return np.moveaxis(g, 0, axis)


def reconstruct_hessian(bundle: LevelSetBundle, band: np.ndarray | None = None):
    """Mtilde = -g_x / g_p with g = phi1 + i w, derivatives by 4th-order FD.

    Raises SingularGp when |g_p| degenerates inside `band` (default: the
    whole grid is checked only where it matters, i.e. near the zero set)."""
    g = bundle.phi1 + 1j * bundle.w
    gx = fd4(g, bundle.grid.dx, 0)
    gp = fd4(g, bundle.grid.dp, 1)
    mag = np.abs(gp)
    if band is None:
        wx = fd4(bundle.w, bundle.grid.dx, 0)
        wp = fd4(bundle.w, bundle.grid.dp, 1)
        eta = 3.0 * np.hypot(wx * bundle.grid.dx, wp * bundle.grid.dp)
        band = np.abs(bundle.w) < np.maximum(eta, 1e-300)
    if np.any(mag[band] < 1e-8):
        raise SingularGp("g_p degenerate near the momentum level set")
    safe = np.where(mag < 1e-8, 1.0, 0.0) + gp
    M = -gx / safe
    return M


def liouville_step(medium: MediumModel, bundle: LevelSetBundle, dt: float,
                   mtilde_old: np.ndarray | None = None) -> LevelSetBundle:
    """One semi-Lagrangian step of length dt for all advected fields.

    The amplitude integrates its transport source along the backtraced
    characteristic with a second-order endpoint (trapezoid) rule, the Hessian
    being reconstructed from the advected level sets at both ends.
    """
    grid = bundle.grid
    X, P = grid.mesh()
    vx, vp = _velocity(medium, grid.branch, X, P)
    Xm = X - 0.5 * dt * vx
    Pm = P - 0.5 * dt * vp
    vxm, vpm = _velocity(medium, grid.branch, Xm, Pm)
    Xf = X - dt * vxm
    Pf = P - dt * vpm

    # clamp feet of inflow-boundary nodes into the interpolable box and widen
    # the contaminated edge margin accordingly (consumers check clean_interior)
    fx = (Xf - grid.x0) / grid.dx
    fp = (Pf - grid.p0) / grid.dp
    shift_x = float(np.max(np.abs(fx - (X - grid.x0) / grid.dx)))
    shift_p = float(np.max(np.abs(fp - (P - grid.p0) / grid.dp)))
    fx = np.clip(fx, 1.0, grid.nx - 3.0)
    fp = np.clip(fp, 1.0, grid.np_ - 3.0)
    fxr = np.ascontiguousarray(fx.ravel())
    fpr = np.ascontiguousarray(fp.ravel())

    def gather(F):
        out = kernels.cubic_gather_2d(np.ascontiguousarray(F), fxr, fpr)
        return out.reshape(F.shape)

    new = LevelSetBundle(grid=grid, t=bundle.t + dt,
                         phi1=gather(bundle.phi1), w=gather(bundle.w),
                         S=gather(bundle.S), A=gather(bundle.A),
                         edge_x=bundle.edge_x + shift_x,
                         edge_p=bundle.edge_p + shift_p)
    if not new.clean_interior().any():
        raise OutOfDomain("inflow contamination covered the phase-space grid")

    # amplitude source: R = (h_p h_x + h_p M h_p - c^2 M) / (2 h), endpoints
    if mtilde_old is None:
        mtilde_old = reconstruct_hessian(bundle)
    mtilde_new = reconstruct_hessian(new)
    R_old = _amp_source(medium, grid.branch, X, P, mtilde_old)
    R_old_foot = gather(R_old)
    R_new = _amp_source(medium, grid.branch, X, P, mtilde_new)
    new.A = new.A * np.exp(0.5 * dt * (R_old_foot + R_new))
    new._mtilde = mtilde_new
    return new


def _amp_source(medium, branch, X, P, M):
    pts = X.reshape(-1, 1)
    c = np.asarray(medium.speed(pts)).reshape(X.shape)
    dc = np.asarray(medium.speed_grad(pts))[:, 0].reshape(X.shape)
    s = branch.sign
    Hp = s * c * np.sign(P)
    Hx = s * np.abs(P) * dc
    H = s * c * np.abs(P)
    return (Hp * Hx + Hp * M * Hp - c ** 2 * M) / (2.0 * H)


def advance(medium: MediumModel, bundle: LevelSetBundle, t_end: float,
            dt: float | None = None) -> LevelSetBundle:
    """March the bundle to t_end with uniform steps (dt defaults to the
    grid-scale over the maximum advection speed)."""
    grid = bundle.grid
    if dt is None:
        X, P = grid.mesh()
        vx, vp = _velocity(medium, grid.branch, X, P)
        vmax = max(np.max(np.abs(vx)) / grid.dx, np.max(np.abs(vp)) / np.maximum(grid.dp, 1e-300))
        dt = 1.0 / max(vmax, 1e-300)
    nst = max(1, int(np.ceil((t_end - bundle.t) / dt - 1e-12)))
    dt = (t_end - bundle.t) / nst
    cur = bundle
    mtilde = None
    for _ in range(nst):
        cur = liouville_step(medium, cur, dt, mtilde)
        mtilde = getattr(cur, "_mtilde", None)
    return cur


def _column_root(wcol, ps, dp):
    """Fractional p-index of the sign change closest to w = 0, or None."""
    sgn = np.sign(wcol)
    idx = np.flatnonzero(np.diff(sgn) != 0)
    if idx.size == 0:
        return None
    j = int(idx[np.argmin(np.abs(wcol[idx]))])
    # cubic refinement of the linear bracket via two Newton steps on the
    # 4-point Lagrange interpolant in p
    frac = float(wcol[j] / (wcol[j] - wcol[j + 1]))
    fj = j + frac
    j0 = int(np.clip(np.floor(fj), 1, len(wcol) - 3))
    stencil = wcol[j0 - 1:j0 + 3]
    for _ in range(2):
        tloc = fj - j0
        basis = np.array([-tloc * (tloc - 1) * (tloc - 2) / 6,
                          (tloc + 1) * (tloc - 1) * (tloc - 2) / 2,
                          -(tloc + 1) * tloc * (tloc - 2) / 2,
                          (tloc + 1) * tloc * (tloc - 1) / 6])
        dbasis = np.array([-(3 * tloc ** 2 - 6 * tloc + 2) / 6,
                           (3 * tloc ** 2 - 4 * tloc - 1) / 2,
                           -(3 * tloc ** 2 - 2 * tloc - 2) / 2,
                           (3 * tloc ** 2 - 1) / 6])
        val = float(basis @ stencil)
        der = float(dbasis @ stencil)
        if der != 0.0:
            fj = fj - val / der
    return fj


def sample_on_zero_set(bundle: LevelSetBundle, x_points):
    """Interpolate (w-root p*(x), S, A, M) on the momentum zero set above the
    given x locations; cubic in both the root search and the column blend."""
    grid = bundle.grid
    xs, ps = grid.axes()
    M = reconstruct_hessian(bundle)
    kx, kp = bundle.edge_cells()
    out = []
    for xq in np.atleast_1d(x_points):
        i0 = int(np.clip(np.searchsorted(xs, xq) - 2, 1, grid.nx - 5))
        if i0 < kx or i0 + 4 >= grid.nx - kx:
            raise OutOfDomain("zero-set sample inside the contaminated margin")
        cols = []
        for ii in range(i0, i0 + 4):
            fj = _column_root(bundle.w[ii], ps, grid.dp)
            if fj is None:
                cols.append(None)
                continue
            fj = float(np.clip(fj, max(1.0, float(kp)), grid.np_ - 3.0 - kp))
            vals = {"p": grid.p0 + fj * grid.dp}
            for name, F in (("S", bundle.S), ("A", bundle.A), ("M", M)):
                vals[name] = complex(kernels.cubic_gather_2d(
                    np.ascontiguousarray(F.astype(complex)),
                    np.array([float(ii if 1 <= ii <= grid.nx - 3 else np.clip(ii, 1, grid.nx - 3))]),
                    np.array([fj]))[0])
            cols.append(vals)
        if any(c is None for c in cols):
            out.append(None)
            continue
        tloc = float((xq - xs[i0 + 1]) / grid.dx)
        wts = [-tloc * (tloc - 1) * (tloc - 2) / 6,
               (tloc + 1) * (tloc - 1) * (tloc - 2) / 2,
               -(tloc + 1) * tloc * (tloc - 2) / 2,
               (tloc + 1) * tloc * (tloc - 1) / 6]
        blend = {k: sum(w * c[k] for w, c in zip(wts, cols))
                 for k in ("S", "A", "M", "p")}
        out.append(blend)
    return out


def eulerian_superpose(bundles, cfg: SuperpositionConfig, medium: MediumModel,
                       grid, eta_cells: float = 3.0) -> WaveField:
    """Assemble the wave field from level-set bundles against delta_eta(w).

    delta_eta(w) = hat(w / eta) / eta with eta = eta_cells grid cells measured
    through |grad w|; cells with |w| >= eta do not contribute.
    """
    if eta_cells < 2.0:
        raise DeltaUnresolved("regularized delta needs a width of >= 2 cells")
    if abs(cfg.beta - 1.0) > 1e-12:
        raise ConfigError("the Eulerian pipeline pins beta = 1")
    ts = {b.t for b in bundles}
    if len(ts) > 1:
        raise ValueError("bundles are at different times")
    pts = grid.points() if hasattr(grid, "points") else np.atleast_2d(grid)
    u = np.zeros(len(pts), dtype=complex)
    ut = np.zeros(len(pts), dtype=complex)
    ux = np.zeros((len(pts), 1), dtype=complex)

    for b in bundles:
        pg = b.grid
        X, P = pg.mesh()
        wx = fd4(b.w, pg.dx, 0)
        wp = fd4(b.w, pg.dp, 1)
        eta = eta_cells * np.hypot(wx * pg.dx, wp * pg.dp)
        if np.any((np.abs(b.w) < 10 * np.finfo(float).eps) & (eta <= 0)):
            raise DeltaUnresolved("level set crosses zero with vanishing gradient")
        active = np.abs(b.w) < eta
        amax = float(np.max(np.abs(b.A)))
        active &= np.abs(b.A) > 1e-12 * amax
        if not np.any(active):
            continue
        if np.any(active & ~b.clean_interior()):
            raise OutOfDomain("delta band carries amplitude inside the "
                              "inflow-contaminated margin; enlarge the grid")
        M = reconstruct_hessian(b, band=active)
        if np.any(M.imag[active] <= 0):
            raise LostPositivity("Im Mtilde lost positivity on the delta band")

        # Liouville time derivatives for the analytic u_t
        vx, vp = _velocity(medium, pg.branch, X, P)
        R = _amp_source(medium, pg.branch, X, P, M)
        St_t = -(vx * fd4(b.S, pg.dx, 0) + vp * fd4(b.S, pg.dp, 1))
        w_t = -(vx * wx + vp * wp)
        A_t = -(vx * fd4(b.A, pg.dx, 0) + vp * fd4(b.A, pg.dp, 1)) + b.A * R
        # L(M) = -(h_xx + 2 h_xp M + h_pp M^2)
        ptsg = X.reshape(-1, 1)
        c = np.asarray(medium.speed(ptsg)).reshape(X.shape)
        dc = np.asarray(medium.speed_grad(ptsg))[:, 0].reshape(X.shape)
        d2c = np.asarray(medium.speed_hess(ptsg))[:, 0, 0].reshape(X.shape)
        sgn = pg.branch.sign
        h_xx = sgn * np.abs(P) * d2c
        h_xp = sgn * dc * np.sign(P)
        h_pp = np.zeros_like(c)
        M_t = -(vx * fd4(M, pg.dx, 0) + vp * fd4(M, pg.dp, 1)) \
            - (h_xx + 2 * h_xp * M + h_pp * M * M)

        idx = np.flatnonzero(active.ravel())
        win = b.w.ravel()[idx]
        etan = eta.ravel()[idx]
        delta = np.maximum(0.0, 1.0 - np.abs(win) / etan) / etan
        ddelta = -np.sign(win) / etan ** 2
        cell = pg.dx * pg.dp

        N = idx.size
        A_eff = (b.A.ravel()[idx] * delta * cell).astype(complex)
        Ad_eff = ((A_t.ravel()[idx] * delta
                   + b.A.ravel()[idx] * ddelta * w_t.ravel()[idx]) * cell).astype(complex)
        fam_x = X.ravel()[idx][:, None]
        fam_p = P.ravel()[idx][:, None]
        zeros1 = np.zeros((N, 1))
        args = dict(
            order=1,
            x=np.ascontiguousarray(fam_x), p=np.ascontiguousarray(fam_p),
            S=np.ascontiguousarray(b.S.ravel()[idx].astype(float)),
            M=np.ascontiguousarray(M.ravel()[idx].astype(complex)[:, None, None]),
            A=A_eff,
            xd=zeros1, pd=zeros1,
            Sd=np.ascontiguousarray(St_t.ravel()[idx].astype(float)),
            Md=np.ascontiguousarray(M_t.ravel()[idx].astype(complex)[:, None, None]),
            Ad=Ad_eff,
        )
        lam = np.maximum(M.imag.ravel()[idx], 1e-300)
        Rskip = np.sqrt(2.0 * cfg.clamp * cfg.eps / lam)
        P3z = np.zeros((N, 1, 1, 1), dtype=complex)
        g0 = np.zeros((N, 1), dtype=complex)
        du, dut, dux = kernels.field_sum(
            np.ascontiguousarray(pts, dtype=float), 1,
            args["x"], args["p"], args["S"], args["M"], args["A"],
            args["xd"], args["pd"], args["Sd"], args["Md"], args["Ad"],
            P3z, g0, P3z, g0,
            np.ones(N), Rskip, np.full(N, np.inf),
            1.0 / cfg.eps, cfg.clamp)
        u += du
        ut += dut
        ux += dux

    Z = cfg.Z
    wf = WaveField(grid, float(next(iter(ts))) if ts else 0.0, cfg.eps,
                   Z * u, Z * ut, Z * ux,
                   meta={"pipeline": "eulerian", "eta_cells": eta_cells})
    if hasattr(grid, "max_oscillatory_spacing"):
        wf.check_resolution()
    return wf


def eulerian_errors(problem, cfg: SuperpositionConfig, times):
    """Energy errors of the Eulerian field against the problem oracle (n = 1)."""
    from .validation import DAlembert1D, energy_norm, l2_norm
    from .validation import _grid_1d

    data = problem.data
    medium = problem.medium
    probe = np.linspace(data.support_lo[0], data.support_hi[0], 257)[:, None]
    p_all = np.asarray(data.S.grad(probe))[:, 0]
    pmin, pmax = float(np.min(p_all)), float(np.max(p_all))
    span = max(pmax - pmin, 0.5)
    cmax = float(np.max(medium.speed(probe)))
    xmargin = cmax * problem.T + 1.0
    glo = float(data.support_lo[0]) - xmargin
    ghi = float(data.support_hi[0]) + xmargin
    nx = max(257, int((ghi - glo) / 0.01))
    np_ = max(129, int(3 * span / 0.01))
    bundles = []
    for branch in (Branch.PLUS, Branch.MINUS):
        pg = PhaseGrid(glo, ghi, nx, pmin - span, pmax + span, np_, branch)
        bundles.append(init_bundle(pg, data, medium))

    c0 = float(medium.speed(np.zeros((1, 1)))[0])
    oracle = DAlembert1D(data, c0, cfg.eps)
    out = {"et_E": [], "e0_E": None, "e0_L2": None}
    for t in times:
        bts = [advance(medium, b, t) if t > b.t else b for b in bundles]
        grid = _grid_1d(problem, cfg.eps, t)
        wf = eulerian_superpose(bts, cfg, medium, grid)
        u, ut, uxg = oracle(t, grid.points()[:, 0])
        ex = WaveField(grid, t, cfg.eps, u, ut, uxg[:, None])
        e_fld = wf.diff(ex)
        en = energy_norm(e_fld, medium, cfg.eps)
        out["et_E"].append(en.value)
        if t == times[0]:
            out["e0_E"] = en.value
            out["e0_L2"] = l2_norm(e_fld.u, grid)
    return out
