"""Named initial-data presets with analytic derivative stacks.

Every preset returns InitialData whose phase carries value/gradient/Hessian/
third-derivative evaluators and whose amplitudes are compactly supported
smooth bumps.  Formulas:

  bump(s; a, b) = exp(1 - 1/(1 - u^2)),  u = (2s - (a+b)) / (b-a),

supported on (a, b) with maximum 1 at the midpoint; derivatives come from the
log-derivative recurrence.  The radial3d amplitude profile may be tilted by a
linear factor (1 + tilt (s - s_mid)) to de-symmetrize the caustic test.
"""
from __future__ import annotations

import numpy as np

from .errors import ConfigError, UnknownPreset
from .synthesis import ComplexAmplitude, InitialData, TaylorPhase


# ---------------------------------------------------------------------------
# 1D bump with derivatives

def bump(s, a, b):
    s = np.asarray(s, dtype=float)
    u = (2.0 * s - (a + b)) / (b - a)
    v = 1.0 - u * u
    out = np.zeros_like(s)
    m = v > 1e-12
    out[m] = np.exp(1.0 - 1.0 / v[m])
    return out


def _bump_logderivs(s, a, b):
    """(f, w1, w2, w3) with f = bump and w_k the k-th log-derivative in s."""
    s = np.asarray(s, dtype=float)
    u = (2.0 * s - (a + b)) / (b - a)
    us = 2.0 / (b - a)
    v = 1.0 - u * u
    m = v > 1e-12
    f = np.zeros_like(s)
    w1 = np.zeros_like(s)
    w2 = np.zeros_like(s)
    w3 = np.zeros_like(s)
    vm = v[m]
    vp = -2.0 * u[m] * us
    vpp = -2.0 * us * us
    f[m] = np.exp(1.0 - 1.0 / vm)
    w1[m] = vp / vm ** 2
    w2[m] = vpp / vm ** 2 - 2.0 * vp ** 2 / vm ** 3
    w3[m] = -6.0 * vp * vpp / vm ** 3 + 6.0 * vp ** 3 / vm ** 4
    return f, w1, w2, w3


def bump_derivs(s, a, b):
    """bump and its first three s-derivatives."""
    f, w1, w2, w3 = _bump_logderivs(s, a, b)
    f1 = f * w1
    f2 = f * (w1 ** 2 + w2)
    f3 = f * (w1 ** 3 + 3.0 * w1 * w2 + w3)
    return f, f1, f2, f3


class RadialProfile:
    """f(s) = bump(s; a, b) (1 + tilt (s - mid)) exp(-gamma (s - mid)^2),
    with derivatives to 3rd order; gamma = envelope / halfwidth^2."""

    def __init__(self, a: float, b: float, tilt: float = 0.0, envelope: float = 0.0):
        if not (0.0 <= a < b):
            raise ConfigError("radial profile needs 0 <= a < b")
        self.a, self.b, self.tilt = float(a), float(b), float(tilt)
        self.mid = 0.5 * (a + b)
        self.gamma = float(envelope) / (0.5 * (b - a)) ** 2

    def __call__(self, s):
        u = np.asarray(s, dtype=float) - self.mid
        return (bump(s, self.a, self.b) * (1.0 + self.tilt * u)
                * np.exp(-self.gamma * u * u))

    def derivs(self, s):
        f, f1, f2, f3 = bump_derivs(s, self.a, self.b)
        u = np.asarray(s, dtype=float) - self.mid
        lin = 1.0 + self.tilt * u
        a0 = f * lin
        a1 = f1 * lin + f * self.tilt
        a2 = f2 * lin + 2.0 * f1 * self.tilt
        a3 = f3 * lin + 3.0 * f2 * self.tilt
        g = self.gamma
        e = np.exp(-g * u * u)
        e1 = -2.0 * g * u * e
        e2 = (4.0 * g * g * u * u - 2.0 * g) * e
        e3 = (12.0 * g * g * u - 8.0 * g ** 3 * u ** 3) * e
        return (a0 * e,
                a1 * e + a0 * e1,
                a2 * e + 2.0 * a1 * e1 + a0 * e2,
                a3 * e + 3.0 * a2 * e1 + 3.0 * a1 * e2 + a0 * e3)


# ---------------------------------------------------------------------------
# phase stacks

def _plane_phase():
    return TaylorPhase(
        value=lambda x: np.asarray(x, dtype=float)[..., 0],
        grad=lambda x: np.ones_like(np.asarray(x, dtype=float)),
        hess=lambda x: np.zeros(np.asarray(x).shape[:-1] + (1, 1)),
        third=lambda x: np.zeros(np.asarray(x).shape[:-1] + (1, 1, 1)),
    )


def _chirp_phase():
    return TaylorPhase(
        value=lambda x: -0.5 * np.asarray(x, dtype=float)[..., 0] ** 2,
        grad=lambda x: -np.asarray(x, dtype=float),
        hess=lambda x: -np.ones(np.asarray(x).shape[:-1] + (1, 1)),
        third=lambda x: np.zeros(np.asarray(x).shape[:-1] + (1, 1, 1)),
    )


def _radial_phase(n):
    """S(x) = |x| with grad xhat, hess (I - P)/r and the standard third tensor."""
    eye = np.eye(n)

    def value(x):
        return np.linalg.norm(np.asarray(x, dtype=float), axis=-1)

    def grad(x):
        x = np.asarray(x, dtype=float)
        r = np.linalg.norm(x, axis=-1)
        return x / r[..., None]

    def hess(x):
        x = np.asarray(x, dtype=float)
        r = np.linalg.norm(x, axis=-1)
        xh = x / r[..., None]
        proj = eye - xh[..., :, None] * xh[..., None, :]
        return proj / r[..., None, None]

    def third(x):
        x = np.asarray(x, dtype=float)
        r = np.linalg.norm(x, axis=-1)
        xh = x / r[..., None]
        sym = (eye[..., :, :, None] * xh[..., None, None, :]
               + eye[..., :, None, :] * xh[..., None, :, None]
               + eye[..., None, :, :] * xh[..., :, None, None])
        xxx = xh[..., :, None, None] * xh[..., None, :, None] * xh[..., None, None, :]
        return (3.0 * xxx - sym) / (r ** 2)[..., None, None, None]

    return TaylorPhase(value, grad, hess, third)


def _focus_phase(n):
    eye = np.eye(n)
    return TaylorPhase(
        value=lambda x: -0.5 * np.sum(np.asarray(x, dtype=float) ** 2, axis=-1),
        grad=lambda x: -np.asarray(x, dtype=float),
        hess=lambda x: -np.broadcast_to(eye, np.asarray(x).shape[:-1] + (n, n)).copy(),
        third=lambda x: np.zeros(np.asarray(x).shape[:-1] + (n, n, n)),
    )


# ---------------------------------------------------------------------------
# amplitude stacks

def _bump_amplitude_1d(a, b, envelope=4.0):
    """Gaussian-envelope bump: exp(-gamma (s - mid)^2) * bump(s; a, b).

    The envelope keeps the amplitude's higher derivatives moderate over the
    bulk of the support (the bare bump's edge derivatives are enormous and
    pollute rate measurements at moderate eps); gamma = envelope / halfwidth^2.
    """
    mid = 0.5 * (a + b)
    gamma = envelope / (0.5 * (b - a)) ** 2

    def value(x):
        s = np.asarray(x, dtype=float)[..., 0]
        return (np.exp(-gamma * (s - mid) ** 2) * bump(s, a, b)).astype(complex)

    def grad(x):
        s = np.asarray(x, dtype=float)[..., 0]
        f, f1, _, _ = bump_derivs(s, a, b)
        env = np.exp(-gamma * (s - mid) ** 2)
        return ((f1 - 2.0 * gamma * (s - mid) * f) * env)[..., None].astype(complex)

    return ComplexAmplitude(value, grad)


def _radial_amplitude(profile: RadialProfile, n: int, over_r: bool):
    """A(x) = f(|x|) or f(|x|)/|x| with analytic gradient."""

    def value(x):
        x = np.asarray(x, dtype=float)
        r = np.linalg.norm(x, axis=-1)
        f = profile(r)
        return (f / r if over_r else f).astype(complex)

    def grad(x):
        x = np.asarray(x, dtype=float)
        r = np.linalg.norm(x, axis=-1)
        f, f1, _, _ = profile.derivs(r)
        radial = (f1 / r - f / r ** 2) if over_r else f1
        safe_r = np.where(r == 0.0, 1.0, r)
        return (radial / safe_r)[..., None].astype(complex) * x

    return ComplexAmplitude(value, grad)


def _zero_amplitude(n):
    return ComplexAmplitude(
        value=lambda x: np.zeros(np.asarray(x).shape[:-1], dtype=complex),
        grad=lambda x: np.zeros(np.asarray(x).shape[:-1] + (n,), dtype=complex),
    )


def _one_branch_bm1_unit_c(S: TaylorPhase, A0: ComplexAmplitude, n: int):
    """B = -i |grad S| A0 for unit sound speed: puts all data on the plus branch."""

    def value(x):
        g = np.linalg.norm(np.atleast_2d(np.asarray(S.grad(x), dtype=float)).reshape(-1, n), axis=-1)
        g = g.reshape(np.asarray(x).shape[:-1])
        return -1j * g * A0.value(x)

    def grad(x):
        x = np.asarray(x, dtype=float)
        gS = S.grad(x)
        g = np.linalg.norm(np.atleast_2d(gS).reshape(-1, n), axis=-1).reshape(x.shape[:-1])
        hS = S.hess(x)
        dg = np.einsum('...ij,...j->...i', hS, gS) / g[..., None]
        return -1j * (dg * np.asarray(A0.value(x))[..., None] + g[..., None] * A0.grad(x))

    return ComplexAmplitude(value, grad)


_PRESET_PARAMS = {
    "plane1d": {"support", "bm1", "envelope"},
    "chirp1d": {"support", "bm1", "envelope"},
    "radial3d": {"support", "tilt"},
    "focus2d": {"support", "envelope"},
}


def preset_initial_data(name: str, params: dict | None = None) -> InitialData:
    """Build one of the named presets:

    plane1d  : S = x,        bump amplitude on `support` (default [-1, 1])
    chirp1d  : S = -x^2/2,   bump amplitude on `support` (default [-1, 1])
    radial3d : S = |x| in R3, A0 = f(|x|)/|x|, f a (tiltable) bump on `support`
               (default [0.3, 0.7]); B = 0 so u_t(0) = 0
    focus2d  : S = -|x|^2/2 in R2, radial bump on the annulus `support`
               (default [0.3, 1.0]); B = 0
    """
    params = dict(params or {})
    if name not in _PRESET_PARAMS:
        raise UnknownPreset(f"unknown preset {name!r}; supported: {sorted(_PRESET_PARAMS)}")
    extra = set(params) - _PRESET_PARAMS[name]
    if extra:
        raise ConfigError(f"unknown parameters for preset {name!r}: {sorted(extra)}")

    if name in ("plane1d", "chirp1d"):
        a, b = params.get("support", (-1.0, 1.0))
        S = _plane_phase() if name == "plane1d" else _chirp_phase()
        A0 = _bump_amplitude_1d(a, b, envelope=float(params.get("envelope", 4.0)))
        bm1_mode = params.get("bm1", "zero")
        if bm1_mode == "zero":
            Bm1 = _zero_amplitude(1)
        elif bm1_mode == "one_branch_unit_c":
            Bm1 = _one_branch_bm1_unit_c(S, A0, 1)
        else:
            raise ConfigError(f"unknown bm1 mode {bm1_mode!r}")
        return InitialData(S=S, A0=A0, Bm1=Bm1,
                           support_lo=np.array([a]), support_hi=np.array([b]), n=1)

    if name == "radial3d":
        a, b = params.get("support", (0.3, 0.7))
        profile = RadialProfile(a, b, tilt=float(params.get("tilt", 0.0)))
        S = _radial_phase(3)
        A0 = _radial_amplitude(profile, 3, over_r=True)
        return InitialData(S=S, A0=A0, Bm1=_zero_amplitude(3),
                           support_lo=np.full(3, -b), support_hi=np.full(3, b), n=3)

    a, b = params.get("support", (0.3, 1.0))
    profile = RadialProfile(a, b, envelope=float(params.get("envelope", 4.0)))
    S = _focus_phase(2)
    A0 = _radial_amplitude(profile, 2, over_r=False)
    return InitialData(S=S, A0=A0, Bm1=_zero_amplitude(2),
                       support_lo=np.full(2, -b), support_hi=np.full(2, b), n=2)


def radial3d_profile(params: dict | None = None) -> RadialProfile:
    """The radial amplitude profile f used by the radial3d preset (for oracles)."""
    params = dict(params or {})
    a, b = params.get("support", (0.3, 0.7))
    return RadialProfile(a, b, tilt=float(params.get("tilt", 0.0)))
