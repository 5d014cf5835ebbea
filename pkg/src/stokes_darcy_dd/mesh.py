"""Structured triangulations of the two stacked rectangular subdomains.

Each rectangle is split into ``nx * ny`` cells, every cell cut along the
lower-left to upper-right diagonal.  Boundary edges carry a side label and a
tag (exterior boundary or interface).
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

SIDES = ("bottom", "right", "top", "left")

INTERIOR = 0
EXTERIOR = 1
INTERFACE = 2

# outward unit normal of each side of an axis-aligned rectangle
SIDE_NORMALS = {
    "bottom": np.array([0.0, -1.0]),
    "right": np.array([1.0, 0.0]),
    "top": np.array([0.0, 1.0]),
    "left": np.array([-1.0, 0.0]),
}

COORD_TOL = 1e-12


class MeshError(ValueError):
    pass


@dataclass(frozen=True, eq=False)
class Mesh:
    """Triangulation of one rectangular subdomain.

    Attributes
    ----------
    vertices : (nv, 2) array
    triangles : (nt, 3) int array, counterclockwise
    edges : (ne, 2) int array of vertex pairs
    edge_tags : (ne,) int array, one of INTERIOR, EXTERIOR, INTERFACE
    edge_sides : (ne,) int array, index into SIDES or -1 for interior edges
    triangle_edges : (nt, 3) int array; local edge k joins local vertices
        (k, k+1 mod 3)
    subdomain : "fluid" or "porous"
    bounds : (x0, x1, y0, y1)
    interface_side : side label lying on the interface, or None
    """

    vertices: np.ndarray
    triangles: np.ndarray
    edges: np.ndarray
    edge_tags: np.ndarray
    edge_sides: np.ndarray
    triangle_edges: np.ndarray
    subdomain: str
    bounds: tuple
    interface_side: str | None = None
    shape: tuple = field(default=(0, 0))

    @property
    def n_vertices(self) -> int:
        return len(self.vertices)

    @property
    def n_edges(self) -> int:
        return len(self.edges)

    @property
    def n_triangles(self) -> int:
        return len(self.triangles)

    def signed_areas(self) -> np.ndarray:
        p = self.vertices[self.triangles]
        d1 = p[:, 1] - p[:, 0]
        d2 = p[:, 2] - p[:, 0]
        return 0.5 * (d1[:, 0] * d2[:, 1] - d1[:, 1] * d2[:, 0])

    def side_edges(self, side: str) -> np.ndarray:
        """Indices of boundary edges on ``side`` ordered by arc length."""
        idx = np.flatnonzero(self.edge_sides == SIDES.index(side))
        mid = self.vertices[self.edges[idx]].mean(axis=1)
        axis = 0 if side in ("bottom", "top") else 1
        return idx[np.argsort(mid[:, axis], kind="stable")]

    def side_vertices(self, side: str) -> np.ndarray:
        e = self.side_edges(side)
        v = np.unique(self.edges[e])
        axis = 0 if side in ("bottom", "top") else 1
        return v[np.argsort(self.vertices[v, axis], kind="stable")]

    def interface_edges(self) -> np.ndarray:
        if self.interface_side is None:
            return np.zeros(0, dtype=int)
        return self.side_edges(self.interface_side)

    def exterior_sides(self) -> list[str]:
        return [s for s in SIDES if s != self.interface_side]

    def to_vtk(self, path, point_data: dict | None = None) -> None:
        """Write the triangulation as a legacy-VTK unstructured grid."""
        point_data = point_data or {}
        nv, nt = self.n_vertices, self.n_triangles
        lines = ["# vtk DataFile Version 3.0", f"{self.subdomain} mesh", "ASCII",
                 "DATASET UNSTRUCTURED_GRID", f"POINTS {nv} double"]
        lines += [f"{x:.16g} {y:.16g} 0" for x, y in self.vertices]
        lines.append(f"CELLS {nt} {4 * nt}")
        lines += [f"3 {a} {b} {c}" for a, b, c in self.triangles]
        lines.append(f"CELL_TYPES {nt}")
        lines += ["5"] * nt
        if point_data:
            lines.append(f"POINT_DATA {nv}")
            for name, values in point_data.items():
                values = np.asarray(values, dtype=float)
                if values.ndim == 1:
                    lines += [f"SCALARS {name} double 1", "LOOKUP_TABLE default"]
                    lines += [f"{v:.16g}" for v in values]
                else:
                    lines.append(f"VECTORS {name} double")
                    lines += [f"{a:.16g} {b:.16g} 0" for a, b in values[:, :2]]
        with open(path, "w", encoding="utf-8") as fh:
            fh.write("\n".join(lines) + "\n")


def build_rectangle_mesh(domain, nx: int, ny: int, subdomain: str,
                         interface_side: str | None = None) -> Mesh:
    """Structured triangulation of the rectangle ``domain = (x0, x1, y0, y1)``.

    Vertex ``(i, j)`` has index ``j * (nx + 1) + i``.  Edges on
    ``interface_side`` are tagged INTERFACE, all other boundary edges
    EXTERIOR.
    """
    if int(nx) != nx or int(ny) != ny or nx < 1 or ny < 1:
        raise MeshError(f"cell counts must be positive integers, got nx={nx}, ny={ny}")
    nx, ny = int(nx), int(ny)
    x0, x1, y0, y1 = map(float, domain)
    if not (x1 > x0 and y1 > y0):
        raise MeshError(f"degenerate rectangle {domain}")
    if interface_side is not None and interface_side not in SIDES:
        raise MeshError(f"unknown side {interface_side!r}")

    xs = np.linspace(x0, x1, nx + 1)
    ys = np.linspace(y0, y1, ny + 1)
    X, Y = np.meshgrid(xs, ys)
    vertices = np.column_stack([X.ravel(), Y.ravel()])

    i, j = np.meshgrid(np.arange(nx), np.arange(ny))
    v00 = (j * (nx + 1) + i).ravel()
    v10, v01 = v00 + 1, v00 + nx + 1
    v11 = v01 + 1
    lower = np.column_stack([v00, v10, v11])
    upper = np.column_stack([v00, v11, v01])
    triangles = np.empty((2 * nx * ny, 3), dtype=int)
    triangles[0::2] = lower
    triangles[1::2] = upper

    local = triangles[:, [[0, 1], [1, 2], [2, 0]]].reshape(-1, 2)
    key = np.sort(local, axis=1)
    edges, inverse, counts = np.unique(key, axis=0, return_inverse=True, return_counts=True)
    inverse = inverse.ravel()
    triangle_edges = inverse.reshape(-1, 3)

    edge_tags = np.full(len(edges), INTERIOR, dtype=int)
    edge_sides = np.full(len(edges), -1, dtype=int)
    boundary = np.flatnonzero(counts[np.arange(len(edges))] == 1)
    pa, pb = vertices[edges[boundary, 0]], vertices[edges[boundary, 1]]
    tests = {
        "bottom": (np.abs(pa[:, 1] - y0) < COORD_TOL) & (np.abs(pb[:, 1] - y0) < COORD_TOL),
        "right": (np.abs(pa[:, 0] - x1) < COORD_TOL) & (np.abs(pb[:, 0] - x1) < COORD_TOL),
        "top": (np.abs(pa[:, 1] - y1) < COORD_TOL) & (np.abs(pb[:, 1] - y1) < COORD_TOL),
        "left": (np.abs(pa[:, 0] - x0) < COORD_TOL) & (np.abs(pb[:, 0] - x0) < COORD_TOL),
    }
    for k, side in enumerate(SIDES):
        sel = boundary[tests[side]]
        edge_sides[sel] = k
        edge_tags[sel] = INTERFACE if side == interface_side else EXTERIOR
    assert np.all(edge_sides[boundary] >= 0)

    return Mesh(vertices=vertices, triangles=triangles, edges=edges,
                edge_tags=edge_tags, edge_sides=edge_sides,
                triangle_edges=triangle_edges, subdomain=subdomain,
                bounds=(x0, x1, y0, y1), interface_side=interface_side,
                shape=(nx, ny))


@dataclass(frozen=True, eq=False)
class InterfaceMap:
    """Vertex correspondence along the shared interface of two meshes."""

    fluid_vertices: np.ndarray
    porous_vertices: np.ndarray
    arc_length: np.ndarray

    @property
    def size(self) -> int:
        return len(self.fluid_vertices)

    def fluid_to_porous(self, v):
        lookup = dict(zip(self.fluid_vertices.tolist(), self.porous_vertices.tolist()))
        return np.array([lookup[int(k)] for k in np.atleast_1d(v)])

    def porous_to_fluid(self, v):
        lookup = dict(zip(self.porous_vertices.tolist(), self.fluid_vertices.tolist()))
        return np.array([lookup[int(k)] for k in np.atleast_1d(v)])


def build_interface_map(mesh_f: Mesh, mesh_p: Mesh, tol: float = COORD_TOL) -> InterfaceMap:
    if mesh_f.interface_side is None or mesh_p.interface_side is None:
        raise MeshError("both meshes need an interface side")
    vf = mesh_f.side_vertices(mesh_f.interface_side)
    vp = mesh_p.side_vertices(mesh_p.interface_side)
    if len(vf) != len(vp):
        raise MeshError(f"interface vertex counts differ ({len(vf)} vs {len(vp)}); "
                        "spatially nonconforming meshes are not supported")
    xf, xp = mesh_f.vertices[vf], mesh_p.vertices[vp]
    mismatch = np.max(np.abs(xf - xp))
    if mismatch > tol:
        raise MeshError(f"interface coordinates differ by {mismatch:.3e} > {tol:g}")
    s = np.concatenate([[0.0], np.cumsum(np.linalg.norm(np.diff(xf, axis=0), axis=1))])
    return InterfaceMap(fluid_vertices=vf, porous_vertices=vp, arc_length=s)
