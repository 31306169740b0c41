"""Euclidean and Grassmannian primitives.

Planes are stored as dense orthogonal projection matrices (the ambient
dimension is small), cylinders and balls as plain dataclasses.  The module
also provides the five projection-operator inequalities relating two planes
(idempotence, trace gap, Hilbert-Schmidt vs operator norm, and the two
mixed-projection vector bounds) that the excess estimates rely on.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

# Volume of the unit n-ball, used to normalize density ratios.
UNIT_BALL_VOLUME = {1: 2.0, 2: np.pi, 3: 4.0 * np.pi / 3.0}


def operator_norm(a: np.ndarray, tol: float = 1e-12, max_iter: int = 200) -> float:
    """Largest singular value of a small matrix by power iteration on a^T a."""
    a = np.asarray(a, dtype=float)
    fro = np.sqrt(np.sum(a * a))
    if fro == 0.0:
        return 0.0
    b = a.T @ a
    n = b.shape[0]
    # Deterministic, generic start vector.
    v = 1.0 + np.arange(n) * 0.137
    v /= np.linalg.norm(v)
    lam = 0.0
    for _ in range(max_iter):
        w = b @ v
        nw = np.linalg.norm(w)
        if nw == 0.0:
            # v happened to be in the kernel; restart orthogonally.
            v = np.roll(v, 1) + 0.311
            v /= np.linalg.norm(v)
            continue
        v_new = w / nw
        lam_new = float(v_new @ (b @ v_new))
        if abs(lam_new - lam) <= tol * max(1.0, abs(lam_new)):
            lam = lam_new
            break
        lam, v = lam_new, v_new
    return float(np.sqrt(max(lam, 0.0)))


@dataclass(frozen=True)
class Plane:
    """A k-dimensional linear subspace of R^d, identified with its projector.

    Attributes
    ----------
    k : int
        Dimension of the subspace, 1 <= k <= d - 1 in all uses here.
    ambient_dim : int
        Dimension d of the ambient space.
    proj : np.ndarray
        (d, d) symmetric idempotent matrix projecting onto the subspace.
    """

    k: int
    ambient_dim: int
    proj: np.ndarray

    def __post_init__(self):
        self.proj.setflags(write=False)

    @property
    def perp(self) -> np.ndarray:
        """Projector onto the orthogonal complement."""
        return np.eye(self.ambient_dim) - self.proj

    def apply(self, x: np.ndarray) -> np.ndarray:
        """Project points onto the plane; x has shape (..., d)."""
        return np.asarray(x) @ self.proj.T

    def apply_perp(self, x: np.ndarray) -> np.ndarray:
        return np.asarray(x) @ self.perp.T

    def tangential_norm(self, x: np.ndarray) -> np.ndarray:
        """|P(x)| for points of shape (..., d)."""
        return np.linalg.norm(self.apply(x), axis=-1)

    def normal_norm(self, x: np.ndarray) -> np.ndarray:
        """|P_perp(x)|, the distance of x from the plane (for linear x)."""
        return np.linalg.norm(self.apply_perp(x), axis=-1)

    def unit_normal(self) -> np.ndarray:
        """A unit vector spanning the 1-d orthogonal complement.

        Only meaningful for hypersurface planes (k = ambient_dim - 1).
        Sign convention: largest-magnitude component is positive.
        """
        if self.k != self.ambient_dim - 1:
            raise ValueError("unit_normal requires a codimension-1 plane")
        w, vecs = np.linalg.eigh(self.perp)
        nu = vecs[:, np.argmax(w)]
        i = int(np.argmax(np.abs(nu)))
        if nu[i] < 0:
            nu = -nu
        return nu


def make_plane(basis) -> Plane:
    """Orthogonal projector onto the span of the given basis vectors.

    Raises ValueError("degenerate basis") when the vectors are linearly
    dependent (numerical rank below len(basis)).
    """
    b = np.array([np.asarray(v, dtype=float) for v in basis]).T  # (d, k)
    if b.ndim != 2 or b.shape[1] == 0:
        raise ValueError("degenerate basis")
    d, k = b.shape
    if k > d:
        raise ValueError("degenerate basis")
    q, r = np.linalg.qr(b)
    if np.min(np.abs(np.diag(r))) <= 1e-12 * max(1.0, np.max(np.abs(b))):
        raise ValueError("degenerate basis")
    proj = q @ q.T
    proj = 0.5 * (proj + proj.T)  # enforce exact symmetry
    return Plane(k=k, ambient_dim=d, proj=proj)


def coordinate_plane(axes, ambient_dim: int) -> Plane:
    """Plane spanned by the listed coordinate axes (exact 0/1 projector)."""
    proj = np.zeros((ambient_dim, ambient_dim))
    for i in axes:
        proj[i, i] = 1.0
    return Plane(k=len(axes), ambient_dim=ambient_dim, proj=proj)


def grassmann_gap(s: Plane, t: Plane) -> dict:
    """Gap quantities between two planes of equal dimension.

    Returns a dict with
      perp_dot   : S_perp . T  (= k - S . T, trace pairing)
      hs_norm_sq : (S - T) . (S - T), squared Hilbert-Schmidt norm
      op_norm    : ||S - T||, operator norm
    """
    if s.k != t.k or s.ambient_dim != t.ambient_dim:
        raise ValueError("plane dimension mismatch")
    diff = s.proj - t.proj
    perp_dot = float(np.sum(s.perp * t.proj))
    hs_norm_sq = float(np.sum(diff * diff))
    return {
        "perp_dot": perp_dot,
        "hs_norm_sq": hs_norm_sq,
        "op_norm": operator_norm(diff),
    }


def tangential_divergence(g_jacobian: np.ndarray, s: Plane) -> float:
    """div^S g = sum_ij S_ij dg_i/dx_j for a Jacobian J_ij = dg_i/dx_j."""
    return float(np.sum(np.asarray(g_jacobian) * s.proj))


@dataclass(frozen=True)
class Cylinder:
    """Infinite cylinder {y : |T(y - center)| < radius} orthogonal to a plane."""

    axis_plane: Plane
    center: np.ndarray
    radius: float

    def __post_init__(self):
        if self.radius <= 0:
            raise ValueError("cylinder radius must be positive")

    def contains(self, x: np.ndarray) -> np.ndarray:
        d = np.asarray(x) - self.center
        return self.axis_plane.tangential_norm(d) < self.radius


@dataclass(frozen=True)
class Ball:
    center: np.ndarray
    radius: float
    closed: bool = False

    def __post_init__(self):
        if self.radius <= 0:
            raise ValueError("ball radius must be positive")

    def contains(self, x: np.ndarray) -> np.ndarray:
        d = np.linalg.norm(np.asarray(x) - self.center, axis=-1)
        return d <= self.radius if self.closed else d < self.radius


def random_plane(k: int, ambient_dim: int, rng: np.random.Generator) -> Plane:
    """Random plane from orthonormalized Gaussian vectors (test sampling)."""
    while True:
        try:
            return make_plane(rng.standard_normal((k, ambient_dim)))
        except ValueError:
            continue
