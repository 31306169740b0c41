"""Integer-multiplicity discrete varifolds.

A surface is a simplicial mesh (segments in R^2 for n=1, triangles in R^3
for n=2) with a positive integer multiplicity per face and a boundary flag
per vertex.  Integrals against the weight measure are face-wise quadrature
sums; the generalized mean curvature is the lumped-mass area gradient, which
for triangle meshes coincides with the cotangent discretization.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .geom import UNIT_BALL_VOLUME
from .quadrature import simplex_rule

MEASUREMENT_SUBDIV = 2  # default virtual refinement for clipped/cutoff integrals


@dataclass
class DiscreteVarifold:
    """Triangulated surface with per-face integer multiplicity.

    vertices : (nv, d) float array, d = ambient dimension (2 or 3)
    faces    : (nf, d) int array of vertex indices (n-simplices, n = d - 1)
    multiplicity : (nf,) positive int array
    boundary : (nv,) bool array; flagged vertices are fixed by every flow step

    Instances are treated as immutable; flow steps and surgeries return new
    objects.  Derived face geometry is computed once and cached.
    """

    vertices: np.ndarray
    faces: np.ndarray
    multiplicity: np.ndarray
    boundary: np.ndarray
    _cache: dict = field(default_factory=dict, repr=False, compare=False)

    def __post_init__(self):
        self.vertices = np.ascontiguousarray(self.vertices, dtype=float)
        self.faces = np.ascontiguousarray(self.faces, dtype=np.int64)
        self.multiplicity = np.ascontiguousarray(self.multiplicity, dtype=np.int64)
        self.boundary = np.ascontiguousarray(self.boundary, dtype=bool)
        if self.faces.ndim != 2 or self.faces.shape[1] != self.ambient_dim:
            raise ValueError("faces must be (nf, ambient_dim) simplices")
        if np.any(self.multiplicity < 1):
            raise ValueError("multiplicities must be >= 1")
        if self.num_faces and np.any(self.face_measures() <= 0.0):
            raise ValueError("degenerate face")
        for a in (self.vertices, self.faces, self.multiplicity, self.boundary):
            a.setflags(write=False)

    @property
    def ambient_dim(self) -> int:
        return self.vertices.shape[1]

    @property
    def surface_dim(self) -> int:
        return self.ambient_dim - 1

    @property
    def num_vertices(self) -> int:
        return self.vertices.shape[0]

    @property
    def num_faces(self) -> int:
        return self.faces.shape[0]

    def face_corners(self) -> np.ndarray:
        """(nf, d, d) array: corner coordinates of each face."""
        if "corners" not in self._cache:
            self._cache["corners"] = self.vertices[self.faces]
        return self._cache["corners"]

    def face_measures(self) -> np.ndarray:
        """Area (n=2) or length (n=1) of each face."""
        if "measures" in self._cache:
            return self._cache["measures"]
        c = self.face_corners()
        if self.surface_dim == 1:
            m = np.linalg.norm(c[:, 1] - c[:, 0], axis=1)
        else:
            n = np.cross(c[:, 1] - c[:, 0], c[:, 2] - c[:, 0])
            m = 0.5 * np.linalg.norm(n, axis=1)
        self._cache["measures"] = m
        return m

    def face_normals(self) -> np.ndarray:
        """Unit normals (n=2 only), orientation per stored vertex order."""
        if "normals" not in self._cache:
            c = self.face_corners()
            n = np.cross(c[:, 1] - c[:, 0], c[:, 2] - c[:, 0])
            self._cache["normals"] = n / np.linalg.norm(n, axis=1, keepdims=True)
        return self._cache["normals"]

    def face_projectors(self) -> np.ndarray:
        """(nf, d, d) orthogonal projectors onto face tangent planes."""
        if "projectors" in self._cache:
            return self._cache["projectors"]
        if self.surface_dim == 1:
            c = self.face_corners()
            t = c[:, 1] - c[:, 0]
            t /= np.linalg.norm(t, axis=1, keepdims=True)
            p = t[:, :, None] * t[:, None, :]
        else:
            nu = self.face_normals()
            p = np.eye(3)[None, :, :] - nu[:, :, None] * nu[:, None, :]
        self._cache["projectors"] = p
        return p

    def total_mass(self) -> float:
        return float(np.sum(self.multiplicity * self.face_measures()))

    def min_edge_length(self) -> float:
        c = self.face_corners()
        if self.surface_dim == 1:
            return float(np.min(self.face_measures()))
        e = np.concatenate([
            np.linalg.norm(c[:, 1] - c[:, 0], axis=1),
            np.linalg.norm(c[:, 2] - c[:, 1], axis=1),
            np.linalg.norm(c[:, 0] - c[:, 2], axis=1),
        ])
        return float(np.min(e))

    def face_min_edges(self) -> np.ndarray:
        """Shortest edge of each face."""
        c = self.face_corners()
        if self.surface_dim == 1:
            return self.face_measures()
        e = np.stack([
            np.linalg.norm(c[:, 1] - c[:, 0], axis=1),
            np.linalg.norm(c[:, 2] - c[:, 1], axis=1),
            np.linalg.norm(c[:, 0] - c[:, 2], axis=1),
        ])
        return np.min(e, axis=0)

    def face_altitudes(self) -> np.ndarray:
        """Smallest altitude per face: 2 area / longest edge (length for n=1).

        The honest stiffness scale: a sliver with moderate edges but tiny
        height is as stiff as a uniformly tiny triangle.
        """
        c = self.face_corners()
        if self.surface_dim == 1:
            return self.face_measures()
        e = np.stack([
            np.linalg.norm(c[:, 1] - c[:, 0], axis=1),
            np.linalg.norm(c[:, 2] - c[:, 1], axis=1),
            np.linalg.norm(c[:, 0] - c[:, 2], axis=1),
        ])
        return 2.0 * self.face_measures() / np.max(e, axis=0)

    def median_edge_length(self) -> float:
        c = self.face_corners()
        if self.surface_dim == 1:
            return float(np.median(self.face_measures()))
        e = np.concatenate([
            np.linalg.norm(c[:, 1] - c[:, 0], axis=1),
            np.linalg.norm(c[:, 2] - c[:, 1], axis=1),
            np.linalg.norm(c[:, 0] - c[:, 2], axis=1),
        ])
        return float(np.median(e))

    def quad_points(self, quad_order: int, subdiv: int = 0):
        """Quadrature points and scaled weights for all faces.

        Returns (points (nf, m, d), bary (m, d), weights (m,)); the integral
        of f is  sum_f mult_f * measure_f * sum_i w_i f(points[f, i]).
        """
        key = ("quad", quad_order, subdiv)
        if key not in self._cache:
            bary, w = simplex_rule(self.surface_dim, quad_order, subdiv)
            pts = np.einsum("md,fdk->fmk", bary, self.face_corners())
            self._cache[key] = (pts, bary, w)
        return self._cache[key]

    def with_vertices(self, new_vertices: np.ndarray) -> "DiscreteVarifold":
        return DiscreteVarifold(new_vertices, self.faces.copy(),
                                self.multiplicity.copy(), self.boundary.copy())


@dataclass(frozen=True)
class TestField:
    """C^1 compactly supported vector field with its exact Jacobian.

    value_fn(points (m, d)) -> (m, d);  jacobian_fn(points) -> (m, d, d)
    with J[i, a, b] = d g_a / d x_b at point i.
    """

    value_fn: Callable[[np.ndarray], np.ndarray]
    jacobian_fn: Callable[[np.ndarray], np.ndarray]
    support_radius: float
    center: np.ndarray = None

    def __post_init__(self):
        if self.center is None:
            object.__setattr__(self, "center", None)


@dataclass(frozen=True)
class ScalarTest:
    """Nonnegative C^1 scalar test function of space and time.

    value_fn(points, t) -> (m,); gradient_fn(points, t) -> (m, d);
    time_derivative_fn(points, t) -> (m,).  Compactly supported in space.
    """

    value_fn: Callable
    gradient_fn: Callable
    time_derivative_fn: Callable
    support_radius: float


def weight_measure(v: DiscreteVarifold, phi, quad_order: int = 3,
                   subdiv: int = 0) -> float:
    """Integral of phi against the weight measure of v.

    phi maps an (m, d) array of points to (m,) values; exact for face-wise
    polynomials of degree <= quad_order.
    """
    if v.num_faces == 0:
        return 0.0
    pts, _, w = v.quad_points(quad_order, subdiv)
    vals = phi(pts.reshape(-1, v.ambient_dim)).reshape(v.num_faces, -1)
    per_face = vals @ w
    return float(np.sum(v.multiplicity * v.face_measures() * per_face))


def density_ratio(v: DiscreteVarifold, center, r: float,
                  quad_order: int = 3, subdiv: int = MEASUREMENT_SUBDIV) -> float:
    """||V||(U_r(center)) / (omega_n r^n), clipped at quadrature points."""
    if r <= 0:
        raise ValueError("radius must be positive")
    center = np.asarray(center, dtype=float)

    def indicator(p):
        return (np.linalg.norm(p - center, axis=1) < r).astype(float)

    mass = weight_measure(v, indicator, quad_order, subdiv)
    return mass / (UNIT_BALL_VOLUME[v.surface_dim] * r ** v.surface_dim)


def first_variation(v: DiscreteVarifold, g: TestField, quad_order: int = 3) -> float:
    """delta V(g) = integral of div^S g over the varifold."""
    if v.num_faces == 0:
        return 0.0
    pts, _, w = v.quad_points(quad_order)
    jac = g.jacobian_fn(pts.reshape(-1, v.ambient_dim))
    jac = jac.reshape(v.num_faces, -1, v.ambient_dim, v.ambient_dim)
    div = np.einsum("fmab,fab->fm", jac, v.face_projectors())
    return float(np.sum(v.multiplicity * v.face_measures() * (div @ w)))


def _scatter_add(idx: np.ndarray, weights: np.ndarray, size: int) -> np.ndarray:
    return np.bincount(idx, weights=weights, minlength=size)


def vertex_masses(v: DiscreteVarifold) -> np.ndarray:
    """Lumped vertex masses: adjacent multiplicity-weighted measure / (n+1)."""
    contrib = v.multiplicity * v.face_measures() / v.ambient_dim
    return _scatter_add(v.faces.ravel(),
                        np.repeat(contrib, v.ambient_dim), v.num_vertices)


def area_gradient(v: DiscreteVarifold) -> np.ndarray:
    """Gradient of total (multiplicity-weighted) mass wrt vertex positions."""
    c = v.face_corners()
    mult = v.multiplicity.astype(float)
    d = v.ambient_dim
    if v.surface_dim == 1:
        t = c[:, 1] - c[:, 0]
        t /= np.linalg.norm(t, axis=1, keepdims=True)
        per_corner = np.stack([-mult[:, None] * t, mult[:, None] * t], axis=1)
    else:
        nu = v.face_normals()
        # d(area)/d(corner j) = 0.5 * (opposite edge as seen from j) x normal
        per_corner = np.stack(
            [0.5 * mult[:, None] * np.cross(c[:, a] - c[:, b], nu)
             for a, b in [(1, 2), (2, 0), (0, 1)]], axis=1)
    idx = v.faces.ravel()
    return np.column_stack([
        _scatter_add(idx, per_corner[:, :, k].ravel(), v.num_vertices)
        for k in range(d)])


def mean_curvature(v: DiscreteVarifold) -> np.ndarray:
    """Generalized mean curvature at vertices: -area gradient / lumped mass.

    Boundary vertices get h = 0.  Raises on interior vertices with no
    adjacent face (isolated vertex), whose mass would vanish.
    """
    if v.ambient_dim not in (2, 3):
        raise ValueError("mean curvature implemented for ambient dim 2 and 3")
    masses = vertex_masses(v)
    isolated = (masses == 0.0) & ~v.boundary
    if np.any(isolated):
        raise ValueError("isolated vertex")
    h = np.zeros_like(v.vertices)
    interior = ~v.boundary & (masses > 0.0)
    h[interior] = -area_gradient(v)[interior] / masses[interior, None]
    return h


def vertex_projectors(v: DiscreteVarifold) -> np.ndarray:
    """Averaged tangent projector per vertex.

    Mass-weighted mean of adjacent face projectors, re-projected to the
    nearest rank-n orthogonal projector via eigendecomposition.
    """
    d = v.ambient_dim
    fw = v.multiplicity * v.face_measures()
    fp = v.face_projectors()
    idx = v.faces.ravel()
    wfp = np.repeat(fw[:, None, None] * fp, d, axis=0)
    acc = np.zeros((v.num_vertices, d, d))
    for a in range(d):
        for b in range(d):
            acc[:, a, b] = _scatter_add(idx, wfp[:, a, b], v.num_vertices)
    wsum = _scatter_add(idx, np.repeat(fw, d), v.num_vertices)
    out = np.zeros_like(acc)
    ok = wsum > 0
    acc[ok] /= wsum[ok, None, None]
    w, vecs = np.linalg.eigh(acc[ok])
    # top n eigenvectors span the averaged tangent plane
    top = vecs[:, :, 1:]  # eigh sorts ascending; keep largest d-1 = n
    out[ok] = np.einsum("vik,vjk->vij", top, top)
    return out


def perpendicularity_defect(v: DiscreteVarifold, h_field: np.ndarray,
                            floor: float = 1e-30) -> float:
    """max_vertices |S(h)| / (|h| + floor), S the averaged vertex tangent.

    Diagnostic for the perpendicularity of the discrete mean curvature;
    exact schemes would give 0, discrete ones converge under refinement.
    """
    proj = vertex_projectors(v)
    tang = np.einsum("vij,vj->vi", proj, h_field)
    num = np.linalg.norm(tang, axis=1)
    den = np.linalg.norm(h_field, axis=1) + floor
    return float(np.max(num / den)) if len(num) else 0.0


def interpolate_vertex_field(v: DiscreteVarifold, field: np.ndarray,
                             bary: np.ndarray) -> np.ndarray:
    """Barycentric interpolation of a per-vertex field to quadrature points.

    Returns (nf, m, ...) for field of shape (nv, ...).
    """
    return np.einsum("md,fd...->fm...", bary, field[v.faces])


def weighted_first_variation(v: DiscreteVarifold, phi_value, phi_gradient,
                             h_field: np.ndarray, quad_order: int = 3,
                             subdiv: int = 0) -> float:
    """delta(V, phi)(h) = integral of (-phi |h|^2 + h . grad phi) d||V||."""
    if v.num_faces == 0:
        return 0.0
    pts, bary, w = v.quad_points(quad_order, subdiv)
    flat = pts.reshape(-1, v.ambient_dim)
    phi = phi_value(flat).reshape(v.num_faces, -1)
    grad = phi_gradient(flat).reshape(v.num_faces, -1, v.ambient_dim)
    hq = interpolate_vertex_field(v, h_field, bary)
    integrand = -phi * np.sum(hq * hq, axis=2) + np.sum(hq * grad, axis=2)
    return float(np.sum(v.multiplicity * v.face_measures() * (integrand @ w)))


def weighted_first_variation_perp(v: DiscreteVarifold, phi_value, phi_gradient,
                                  h_field: np.ndarray, quad_order: int = 3,
                                  subdiv: int = 0) -> float:
    """Weighted first variation in the pre-perpendicularity form.

    Evaluates  integral of (-phi |h|^2 + h . S_perp(grad phi)) dV  with S
    the face tangent projector.  Identical to the plain form when h is
    perpendicular to the tangent planes; at mesh junctions the lumped h has
    spurious tangential components, and projecting the gradient onto S_perp
    reproduces the continuum mechanism faithfully.
    """
    if v.num_faces == 0:
        return 0.0
    pts, bary, w = v.quad_points(quad_order, subdiv)
    flat = pts.reshape(-1, v.ambient_dim)
    phi = phi_value(flat).reshape(v.num_faces, -1)
    grad = phi_gradient(flat).reshape(v.num_faces, -1, v.ambient_dim)
    perp = np.eye(v.ambient_dim)[None] - v.face_projectors()
    grad_perp = np.einsum("fab,fmb->fma", perp, grad)
    hq = interpolate_vertex_field(v, h_field, bary)
    integrand = -phi * np.sum(hq * hq, axis=2) + np.sum(hq * grad_perp, axis=2)
    return float(np.sum(v.multiplicity * v.face_measures() * (integrand @ w)))


def parabolic_rescale(v: DiscreteVarifold, lam: float) -> DiscreteVarifold:
    """Push-forward under y -> y / lam; mass scales by lam^{-n}."""
    if lam <= 0:
        raise ValueError("scale factor must be positive")
    return v.with_vertices(v.vertices / lam)
