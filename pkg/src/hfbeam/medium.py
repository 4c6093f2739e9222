"""Sound-speed models and the two acoustic Hamiltonians h = ±c(x)|p|.

All evaluators are vectorized over a leading batch axis: positions have shape
(..., n), momenta (..., n), and the derivative blocks gain trailing (n,), (n, n),
... axes.  Speed profiles carry hand-coded derivatives up to third order so that
the ray, Hessian and third-order phase equations can be driven without any
automatic differentiation.
"""
from __future__ import annotations

from dataclasses import dataclass
from enum import Enum
from typing import NamedTuple

import numpy as np

from .errors import ConfigError, MomentumUnderflow, NonPositiveSpeed

#: default floor for |p| below which Hamiltonian derivatives are refused
P_MIN = 1e-8


class Branch(Enum):
    """Sign branch of the Hamiltonian h(x, p) = sign * c(x) |p|."""

    PLUS = 1
    MINUS = -1

    @property
    def sign(self) -> float:
        return float(self.value)


@dataclass(frozen=True)
class PhaseSpacePoint:
    """A point X = (x, p) in phase space."""

    x: np.ndarray
    p: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "x", np.atleast_1d(np.asarray(self.x, dtype=float)))
        object.__setattr__(self, "p", np.atleast_1d(np.asarray(self.p, dtype=float)))
        if self.x.shape != self.p.shape:
            raise ValueError("x and p must have matching shapes")


class HamiltonianBlocks(NamedTuple):
    H_x: np.ndarray
    H_p: np.ndarray
    H_xx: np.ndarray
    H_xp: np.ndarray
    H_pp: np.ndarray


class HamiltonianThirdBlocks(NamedTuple):
    """Third derivatives of h, indexed H3[xxp][i, j, c] = d^3 h / dx_i dx_j dp_c etc."""

    H_xxx: np.ndarray
    H_xxp: np.ndarray
    H_xpp: np.ndarray
    H_ppp: np.ndarray


class MediumModel:
    """Base class: a positive smooth speed field c(x) on R^n."""

    kind = "abstract"

    def __init__(self, n: int):
        if n < 1:
            raise ConfigError("dimension must be >= 1")
        self.n = int(n)

    # profiles implement these four; shapes (...,) / (..., n) / (..., n, n) / (..., n, n, n)
    def speed(self, x):
        raise NotImplementedError

    def speed_grad(self, x):
        raise NotImplementedError

    def speed_hess(self, x):
        raise NotImplementedError

    def speed_third(self, x):
        raise NotImplementedError

    def config(self) -> dict:
        raise NotImplementedError


class ConstantSpeed(MediumModel):
    kind = "constant"

    def __init__(self, c0: float = 1.0, n: int = 1):
        super().__init__(n)
        if c0 <= 0:
            raise NonPositiveSpeed(f"constant speed must be positive, got {c0}")
        self.c0 = float(c0)

    def speed(self, x):
        x = np.asarray(x, dtype=float)
        return np.full(x.shape[:-1], self.c0)

    def speed_grad(self, x):
        x = np.asarray(x, dtype=float)
        return np.zeros(x.shape)

    def speed_hess(self, x):
        x = np.asarray(x, dtype=float)
        return np.zeros(x.shape[:-1] + (self.n, self.n))

    def speed_third(self, x):
        x = np.asarray(x, dtype=float)
        return np.zeros(x.shape[:-1] + (self.n,) * 3)

    def config(self):
        return {"kind": "constant", "c0": self.c0, "n": self.n}


class SineSpeed(MediumModel):
    """c(x) = c0 + a sin(k x_1); varies along the first coordinate only."""

    kind = "sin1d"

    def __init__(self, amplitude: float = 0.1, wavenumber: float = 1.0,
                 c0: float = 1.0, n: int = 1):
        super().__init__(n)
        if c0 - abs(amplitude) <= 0:
            raise NonPositiveSpeed("sin profile must keep c(x) > 0 everywhere")
        self.a = float(amplitude)
        self.k = float(wavenumber)
        self.c0 = float(c0)

    def speed(self, x):
        x = np.asarray(x, dtype=float)
        return self.c0 + self.a * np.sin(self.k * x[..., 0])

    def speed_grad(self, x):
        x = np.asarray(x, dtype=float)
        g = np.zeros(x.shape)
        g[..., 0] = self.a * self.k * np.cos(self.k * x[..., 0])
        return g

    def speed_hess(self, x):
        x = np.asarray(x, dtype=float)
        h = np.zeros(x.shape[:-1] + (self.n, self.n))
        h[..., 0, 0] = -self.a * self.k ** 2 * np.sin(self.k * x[..., 0])
        return h

    def speed_third(self, x):
        x = np.asarray(x, dtype=float)
        t = np.zeros(x.shape[:-1] + (self.n,) * 3)
        t[..., 0, 0, 0] = -self.a * self.k ** 3 * np.cos(self.k * x[..., 0])
        return t

    def config(self):
        return {"kind": "sin1d", "amplitude": self.a, "wavenumber": self.k,
                "c0": self.c0, "n": self.n}


class GaussianBumpSpeed(MediumModel):
    """Radially symmetric bump c(x) = c0 + a exp(-|x - x_c|^2 / (2 w^2))."""

    kind = "bump2d"

    def __init__(self, amplitude: float = 0.2, width: float = 0.5,
                 center=None, c0: float = 1.0, n: int = 2):
        super().__init__(n)
        if c0 + min(0.0, amplitude) <= 0:
            raise NonPositiveSpeed("bump profile must keep c(x) > 0 everywhere")
        self.a = float(amplitude)
        self.w = float(width)
        self.c0 = float(c0)
        self.center = np.zeros(n) if center is None else np.asarray(center, dtype=float)

    def _f(self, x):
        u = np.asarray(x, dtype=float) - self.center
        return self.a * np.exp(-np.sum(u * u, axis=-1) / (2 * self.w ** 2)), u

    def speed(self, x):
        f, _ = self._f(x)
        return self.c0 + f

    def speed_grad(self, x):
        f, u = self._f(x)
        return -f[..., None] * u / self.w ** 2

    def speed_hess(self, x):
        f, u = self._f(x)
        w2, w4 = self.w ** 2, self.w ** 4
        eye = np.eye(self.n)
        return f[..., None, None] * (u[..., :, None] * u[..., None, :] / w4 - eye / w2)

    def speed_third(self, x):
        f, u = self._f(x)
        w4, w6 = self.w ** 4, self.w ** 6
        eye = np.eye(self.n)
        sym = (eye[..., :, :, None] * u[..., None, None, :]
               + eye[..., :, None, :] * u[..., None, :, None]
               + eye[..., None, :, :] * u[..., :, None, None])
        uuu = u[..., :, None, None] * u[..., None, :, None] * u[..., None, None, :]
        return f[..., None, None, None] * (sym / w4 - uuu / w6)

    def config(self):
        return {"kind": "bump2d", "amplitude": self.a, "width": self.w,
                "center": list(self.center), "c0": self.c0, "n": self.n}


_PROFILE_KEYS = {
    "constant": {"c0", "n"},
    "sin1d": {"amplitude", "wavenumber", "c0", "n"},
    "bump2d": {"amplitude", "width", "center", "c0", "n"},
}


def medium_from_config(cfg: dict) -> MediumModel:
    """Build a medium from a JSON-style dict, rejecting unknown keys."""
    if not isinstance(cfg, dict) or "kind" not in cfg:
        raise ConfigError("medium config must be a dict with a 'kind' key")
    kind = cfg["kind"]
    if kind not in _PROFILE_KEYS:
        raise ConfigError(f"unknown medium kind {kind!r}; supported: {sorted(_PROFILE_KEYS)}")
    extra = set(cfg) - _PROFILE_KEYS[kind] - {"kind"}
    if extra:
        raise ConfigError(f"unknown keys for medium {kind!r}: {sorted(extra)}")
    params = {k: v for k, v in cfg.items() if k != "kind"}
    cls = {"constant": ConstantSpeed, "sin1d": SineSpeed, "bump2d": GaussianBumpSpeed}[kind]
    return cls(**params)


def eval_speed(m: MediumModel, x):
    """Return (c, grad c, hess c) at x, checking positivity of c."""
    x = np.asarray(x, dtype=float)
    if not np.all(np.isfinite(x)):
        raise ValueError("position must be finite")
    c = m.speed(x)
    if np.any(c <= 0):
        raise NonPositiveSpeed(f"c(x) <= 0 encountered (min {np.min(c)})")
    return c, m.speed_grad(x), m.speed_hess(x)


def _norm_p(p, p_min):
    pn = np.linalg.norm(p, axis=-1)
    if np.any(pn < p_min):
        raise MomentumUnderflow(f"|p| < {p_min} (min {np.min(pn)})")
    return pn


def hamiltonian(m: MediumModel, branch: Branch, x, p, p_min: float = P_MIN):
    """h(x, p) = sign * c(x) |p|."""
    x = np.asarray(x, dtype=float)
    p = np.asarray(p, dtype=float)
    pn = _norm_p(p, p_min)
    c = m.speed(x)
    if np.any(c <= 0):
        raise NonPositiveSpeed("c(x) <= 0")
    return branch.sign * c * pn


def hamiltonian_blocks(m: MediumModel, branch: Branch, x, p,
                       p_min: float = P_MIN) -> HamiltonianBlocks:
    """First and second derivative blocks of h = sign * c(x)|p|.

    H_xp[i, j] = d^2 h / dx_i dp_j; the p-Hessian is the scaled projector
    sign * c (I - phat phat^T)/|p|.
    """
    x = np.asarray(x, dtype=float)
    p = np.asarray(p, dtype=float)
    s = branch.sign
    pn = _norm_p(p, p_min)
    phat = p / pn[..., None]
    c, dc, d2c = eval_speed(m, x)

    H_p = s * c[..., None] * phat
    H_x = s * pn[..., None] * dc
    proj = np.eye(m.n) - phat[..., :, None] * phat[..., None, :]
    H_pp = s * (c / pn)[..., None, None] * proj
    H_xp = s * dc[..., :, None] * phat[..., None, :]
    H_xx = s * pn[..., None, None] * d2c
    return HamiltonianBlocks(H_x, H_p, H_xx, H_xp, H_pp)


def hamiltonian_third_blocks(m: MediumModel, branch: Branch, x, p,
                             p_min: float = P_MIN) -> HamiltonianThirdBlocks:
    """Third derivative blocks of h, needed by the second-order beam system
    and by the residual evaluators."""
    x = np.asarray(x, dtype=float)
    p = np.asarray(p, dtype=float)
    s = branch.sign
    pn = _norm_p(p, p_min)
    phat = p / pn[..., None]
    c = m.speed(x)
    dc = m.speed_grad(x)
    d2c = m.speed_hess(x)
    d3c = m.speed_third(x)
    eye = np.eye(m.n)

    H_xxx = s * pn[..., None, None, None] * d3c
    H_xxp = s * d2c[..., :, :, None] * phat[..., None, None, :]
    proj = eye - phat[..., :, None] * phat[..., None, :]
    H_xpp = s * dc[..., :, None, None] * proj[..., None, :, :] / pn[..., None, None, None]
    sym = (eye[..., :, :, None] * phat[..., None, None, :]
           + eye[..., :, None, :] * phat[..., None, :, None]
           + eye[..., None, :, :] * phat[..., :, None, None])
    ppp = phat[..., :, None, None] * phat[..., None, :, None] * phat[..., None, None, :]
    H_ppp = s * (c / pn ** 2)[..., None, None, None] * (3 * ppp - sym)
    return HamiltonianThirdBlocks(H_xxx, H_xxp, H_xpp, H_ppp)
