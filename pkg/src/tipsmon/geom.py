"""Minimum-distance kernels between a tool tip point and simlet geometry.

All distances are surface distances in millimeters: a point inside a primitive
is at distance 0. Pure 64-bit float arithmetic, no acceleration structures;
desk-scale meshes are traversed brute force.
"""

from __future__ import annotations

import math

from .model import Capsule, GeometryPrimitive, Simlet, Sphere, TriangleMesh, Vec3


def _sub(a: Vec3, b: Vec3) -> tuple:
    return (a.x - b.x, a.y - b.y, a.z - b.z)


def _dot(u: tuple, v: tuple) -> float:
    return u[0] * v[0] + u[1] * v[1] + u[2] * v[2]


def _norm(u: tuple) -> float:
    return math.sqrt(_dot(u, u))


def dist_point_segment(p: Vec3, a: Vec3, b: Vec3) -> float:
    """Distance from p to the closed segment ab."""
    ab = _sub(b, a)
    ap = _sub(p, a)
    denom = _dot(ab, ab)
    if denom == 0.0:
        return _norm(ap)
    t = max(0.0, min(1.0, _dot(ap, ab) / denom))
    closest = (a.x + t * ab[0], a.y + t * ab[1], a.z + t * ab[2])
    return _norm((p.x - closest[0], p.y - closest[1], p.z - closest[2]))


def dist_point_sphere(p: Vec3, center: Vec3, radius: float) -> float:
    return max(0.0, _norm(_sub(p, center)) - radius)


def dist_point_capsule(p: Vec3, a: Vec3, b: Vec3, radius: float) -> float:
    return max(0.0, dist_point_segment(p, a, b) - radius)


def dist_point_triangle(p: Vec3, a: Vec3, b: Vec3, c: Vec3) -> float:
    """Exact point-triangle distance via the closest-feature classification."""
    ab = _sub(b, a)
    ac = _sub(c, a)
    ap = _sub(p, a)
    d1 = _dot(ab, ap)
    d2 = _dot(ac, ap)
    if d1 <= 0.0 and d2 <= 0.0:
        return _norm(ap)  # vertex a

    bp = _sub(p, b)
    d3 = _dot(ab, bp)
    d4 = _dot(ac, bp)
    if d3 >= 0.0 and d4 <= d3:
        return _norm(bp)  # vertex b

    vc = d1 * d4 - d3 * d2
    if vc <= 0.0 and d1 >= 0.0 and d3 <= 0.0:
        if d1 == d3:  # degenerate: ab has zero length along the query
            return _norm(ap)
        v = d1 / (d1 - d3)
        q = (a.x + v * ab[0], a.y + v * ab[1], a.z + v * ab[2])
        return _norm((p.x - q[0], p.y - q[1], p.z - q[2]))  # edge ab

    cp = _sub(p, c)
    d5 = _dot(ab, cp)
    d6 = _dot(ac, cp)
    if d6 >= 0.0 and d5 <= d6:
        return _norm(cp)  # vertex c

    vb = d5 * d2 - d1 * d6
    if vb <= 0.0 and d2 >= 0.0 and d6 <= 0.0:
        if d2 == d6:
            return _norm(ap)
        w = d2 / (d2 - d6)
        q = (a.x + w * ac[0], a.y + w * ac[1], a.z + w * ac[2])
        return _norm((p.x - q[0], p.y - q[1], p.z - q[2]))  # edge ac

    va = d3 * d6 - d5 * d4
    if va <= 0.0 and (d4 - d3) >= 0.0 and (d5 - d6) >= 0.0:
        denom = (d4 - d3) + (d5 - d6)
        if denom == 0.0:
            return _norm(bp)
        w = (d4 - d3) / denom
        bc = _sub(c, b)
        q = (b.x + w * bc[0], b.y + w * bc[1], b.z + w * bc[2])
        return _norm((p.x - q[0], p.y - q[1], p.z - q[2]))  # edge bc

    denom = va + vb + vc
    if denom == 0.0:  # fully degenerate triangle: fall back to edges
        return min(
            dist_point_segment(p, a, b),
            dist_point_segment(p, b, c),
            dist_point_segment(p, c, a),
        )
    v = vb / denom
    w = vc / denom
    q = (
        a.x + v * ab[0] + w * ac[0],
        a.y + v * ab[1] + w * ac[1],
        a.z + v * ab[2] + w * ac[2],
    )
    return _norm((p.x - q[0], p.y - q[1], p.z - q[2]))  # interior


def dist_point_mesh(p: Vec3, mesh: TriangleMesh) -> float:
    best = math.inf
    verts = mesh.vertices
    for i, j, k in mesh.triangles:
        d = dist_point_triangle(p, verts[i], verts[j], verts[k])
        if d < best:
            best = d
    return best


def dist_point_primitive(p: Vec3, g: GeometryPrimitive) -> float:
    if isinstance(g, Sphere):
        return dist_point_sphere(p, g.center, g.radius)
    if isinstance(g, Capsule):
        return dist_point_capsule(p, g.endpoint_a, g.endpoint_b, g.radius)
    return dist_point_mesh(p, g)


def dist_point_simlet(p: Vec3, s: Simlet) -> float:
    """Minimum surface distance over all of the simlet's primitives."""
    if not s.geometry:
        raise ValueError(f"simlet '{s.id}' has no geometry")
    return min(dist_point_primitive(p, g) for g in s.geometry)
