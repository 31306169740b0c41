"""Radial cutoff profiles, cylindrical cutoffs, and the backward heat kernel.

The cutoff profile is 1 on [0, 1-zeta], 0 on [1, inf), and transitions with
the normalized C-infinity bump smoothstep  B(1-u) / (B(u) + B(1-u)),
B(s) = exp(-1/s), which is smooth and strictly decreasing on the transition.
The derivative-bound constant rho = sup(|chi'| + 2 ||D^2 chi||) is obtained
by dense sampling with a small safety factor; all downstream inequality
constants are relative to the chosen profile and recorded in outputs.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .geom import Plane

RHO_SAMPLES = 100_000
RHO_SAFETY = 1.01


def _bump(s):
    """exp(-1/s) for s > 0, zero otherwise; vectorized, underflow-safe."""
    s = np.asarray(s, dtype=float)
    out = np.zeros_like(s)
    pos = s > 0
    with np.errstate(under="ignore"):
        out[pos] = np.exp(-1.0 / s[pos])
    return out


def _bump_d1(s):
    s = np.asarray(s, dtype=float)
    out = np.zeros_like(s)
    pos = s > 0
    with np.errstate(under="ignore"):
        sp = s[pos]
        out[pos] = np.exp(-1.0 / sp) / sp**2
    return out


def _bump_d2(s):
    s = np.asarray(s, dtype=float)
    out = np.zeros_like(s)
    pos = s > 0
    with np.errstate(under="ignore"):
        sp = s[pos]
        out[pos] = np.exp(-1.0 / sp) * (1.0 / sp**4 - 2.0 / sp**3)
    return out


def _smoothstep(u):
    """Decreasing C-infinity step on [0, 1]: 1 at 0, 0 at 1."""
    n = _bump(1.0 - u)
    d = _bump(u) + n
    return n / d


def _smoothstep_d1(u):
    n, np_ = _bump(1.0 - u), -_bump_d1(1.0 - u)
    d = _bump(u) + n
    dp = _bump_d1(u) + np_
    return (np_ * d - n * dp) / d**2


def _smoothstep_d2(u):
    n = _bump(1.0 - u)
    np_ = -_bump_d1(1.0 - u)
    npp = _bump_d2(1.0 - u)
    d = _bump(u) + n
    dp = _bump_d1(u) + np_
    dpp = _bump_d2(u) + npp
    return npp / d - 2 * np_ * dp / d**2 - n * dpp / d**2 + 2 * n * dp**2 / d**3


@dataclass(frozen=True)
class CutoffProfile:
    """Radial cutoff with transition width zeta and derivative bound rho."""

    zeta: float
    rho: float

    def value(self, r):
        r = np.asarray(r, dtype=float)
        out = np.ones_like(r)
        out[r >= 1.0] = 0.0
        band = (r > 1.0 - self.zeta) & (r < 1.0)
        out[band] = _smoothstep((r[band] - (1.0 - self.zeta)) / self.zeta)
        return out

    def d1(self, r):
        r = np.asarray(r, dtype=float)
        out = np.zeros_like(r)
        band = (r > 1.0 - self.zeta) & (r < 1.0)
        out[band] = _smoothstep_d1((r[band] - (1.0 - self.zeta)) / self.zeta) / self.zeta
        return out

    def d2(self, r):
        r = np.asarray(r, dtype=float)
        out = np.zeros_like(r)
        band = (r > 1.0 - self.zeta) & (r < 1.0)
        u = (r[band] - (1.0 - self.zeta)) / self.zeta
        out[band] = _smoothstep_d2(u) / self.zeta**2
        return out


def make_profile(zeta: float) -> CutoffProfile:
    """Build the profile and sample its derivative-bound constant rho.

    rho bounds |chi'| + 2 ||D^2 chi|| for the radial extension to R^k; the
    Hessian operator norm of a radial function is max(|chi''|, |chi'| / r).
    """
    if not 0.0 < zeta < 0.5:
        raise ValueError("zeta must lie in (0, 1/2)")
    prof = CutoffProfile(zeta=zeta, rho=0.0)
    r = np.linspace(1.0 - zeta, 1.0, RHO_SAMPLES)[1:-1]
    d1 = np.abs(prof.d1(r))
    hess = np.maximum(np.abs(prof.d2(r)), d1 / r)
    rho = RHO_SAFETY * float(np.max(d1 + 2.0 * hess))
    return CutoffProfile(zeta=zeta, rho=rho)


def cylindrical_cutoff(profile: CutoffProfile, t: Plane, big_r: float,
                       x: np.ndarray) -> np.ndarray:
    """chi(|T(x)| / R) for points x of shape (..., d)."""
    if big_r <= 0:
        raise ValueError("cutoff scale must be positive")
    return profile.value(t.tangential_norm(x) / big_r)


def cylindrical_cutoff_gradient(profile: CutoffProfile, t: Plane, big_r: float,
                                x: np.ndarray) -> np.ndarray:
    """Gradient of the cylindrical cutoff; lies in the plane T."""
    x = np.asarray(x, dtype=float)
    tx = t.apply(x)
    s = np.linalg.norm(tx, axis=-1)
    out = np.zeros_like(x)
    nz = s > 0
    coef = profile.d1(s[nz] / big_r) / (big_r * s[nz])
    out[nz] = coef[..., None] * tx[nz]
    return out


@dataclass(frozen=True)
class HeatKernel:
    """k-dimensional backward heat kernel centered at (y, s)."""

    k: int
    center: np.ndarray
    final_time: float

    def _tau(self, t: float) -> float:
        tau = self.final_time - t
        if tau <= 0:
            raise ValueError("heat kernel requires t < final time")
        return tau

    def value(self, x: np.ndarray, t: float) -> np.ndarray:
        tau = self._tau(t)
        d2 = np.sum((np.asarray(x) - self.center) ** 2, axis=-1)
        return (4.0 * np.pi * tau) ** (-self.k / 2.0) * np.exp(-d2 / (4.0 * tau))

    def gradient(self, x: np.ndarray, t: float) -> np.ndarray:
        tau = self._tau(t)
        dx = np.asarray(x) - self.center
        return self.value(x, t)[..., None] * (-dx / (2.0 * tau))

    def hessian(self, x: np.ndarray, t: float) -> np.ndarray:
        tau = self._tau(t)
        dx = np.asarray(x) - self.center
        d = dx.shape[-1]
        outer = dx[..., :, None] * dx[..., None, :] / (4.0 * tau**2)
        return self.value(x, t)[..., None, None] * (outer - np.eye(d) / (2.0 * tau))

    def time_derivative(self, x: np.ndarray, t: float) -> np.ndarray:
        tau = self._tau(t)
        d2 = np.sum((np.asarray(x) - self.center) ** 2, axis=-1)
        return self.value(x, t) * (self.k / (2.0 * tau) - d2 / (4.0 * tau**2))


def heat_identity_residual(kernel: HeatKernel, x: np.ndarray, t: float,
                           s_plane: Plane, floor: float = 1e-300):
    """(D^2 rho . S) + |S_perp(grad rho)|^2 / rho + d rho/dt at (x, t).

    Vanishes identically in exact arithmetic for every k-plane S.  Returns
    None (skip flag) when the kernel value underflows below the floor.
    """
    val = kernel.value(x, t)
    if np.any(val <= floor):
        return None
    hess = kernel.hessian(x, t)
    grad = kernel.gradient(x, t)
    gperp = s_plane.apply_perp(grad)
    term1 = np.sum(hess * s_plane.proj, axis=(-2, -1))
    term2 = np.sum(gperp * gperp, axis=-1) / val
    return term1 + term2 + kernel.time_derivative(x, t)
