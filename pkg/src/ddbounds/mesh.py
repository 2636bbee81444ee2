"""Vertex-centred (Voronoi box) finite-volume meshes on tensor grids.

Unknowns live at the grid nodes; each node owns the box made of the
quarter (2-D) or half (1-D) elements around it.  A box straddling a region
interface is split, and ``region_volumes[k, r]`` stores the part of box ``k``
lying in region ``r``.  This keeps region measures exact and lets layer
interfaces coincide with nodes.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from importlib import resources

from functools import lru_cache

import numpy as np
import scipy.sparse as sp

__all__ = [
    "FvMesh",
    "MeshError",
    "build_interval_mesh",
    "build_rect_mesh",
    "build_tensor_mesh",
    "lbic_fixture_mesh",
    "region_measure",
    "write_mesh_dump",
    "MESH_DUMP_VERSION",
]

MESH_DUMP_VERSION = "ddbounds-mesh 1"


class MeshError(ValueError):
    pass


@dataclass(frozen=True, eq=False)
class FvMesh:
    """Immutable finite-volume mesh.

    Attributes
    ----------
    nodes : (N, d) array
        Box centres (the grid nodes).
    region_names : tuple of str
    region_volumes : (N, R) array
        Part of each box in each region.
    edges : (E, 2) int array
        Node pairs sharing a box face, ``edges[:, 0] < edges[:, 1]``.
    edge_area, edge_length : (E,) arrays
        Face measure and node distance; transmissibility is their ratio.
    bnd_nodes, bnd_area : (B,) arrays
        Boundary face pieces: owning node and measure.
    bnd_tags : tuple of str, length B
    element_regions : array of region indices per grid element (diagnostic).
    """

    nodes: np.ndarray
    region_names: tuple
    region_volumes: np.ndarray
    edges: np.ndarray
    edge_area: np.ndarray
    edge_length: np.ndarray
    bnd_nodes: np.ndarray
    bnd_area: np.ndarray
    bnd_tags: tuple
    grid_lines: tuple = ()

    @property
    def dim(self):
        return self.nodes.shape[1]

    @property
    def n_nodes(self):
        return self.nodes.shape[0]

    @property
    def volumes(self):
        return self.region_volumes.sum(axis=1)

    @property
    def transmissibility(self):
        return self.edge_area / self.edge_length

    @property
    def node_region(self):
        """Region index of the largest part of each box (first on ties)."""
        return np.argmax(self.region_volumes, axis=1)

    @property
    def boundary_tags(self):
        return tuple(sorted(set(self.bnd_tags)))

    @property
    def measure(self):
        return float(self.volumes.sum())

    def region_index(self, tag):
        try:
            return self.region_names.index(tag)
        except ValueError:
            raise KeyError(tag) from None

    def region_measure(self, tag):
        return float(self.region_volumes[:, self.region_index(tag)].sum())

    def region_volume(self, tags):
        """Per-node volume inside the union of ``tags``."""
        idx = [self.region_index(t) for t in tags]
        return self.region_volumes[:, idx].sum(axis=1)

    def boundary_mask(self, tag):
        mask = np.array([t == tag for t in self.bnd_tags], dtype=bool)
        if not mask.any():
            raise KeyError(tag)
        return mask

    def boundary_nodes(self, tag):
        return np.unique(self.bnd_nodes[self.boundary_mask(tag)])

    def boundary_measure(self, tag):
        return float(self.bnd_area[self.boundary_mask(tag)].sum())

    def stiffness(self, weight=1.0):
        """Sparse matrix of the quadratic form sum_f w T_f (u_K - u_L)^2."""
        T = weight * self.transmissibility
        i, j = self.edges[:, 0], self.edges[:, 1]
        n = self.n_nodes
        rows = np.concatenate([i, j, i, j])
        cols = np.concatenate([i, j, j, i])
        vals = np.concatenate([T, T, -T, -T])
        return sp.csr_matrix((vals, (rows, cols)), shape=(n, n))

    def is_connected(self):
        n = self.n_nodes
        adj = sp.csr_matrix(
            (np.ones(len(self.edges)), (self.edges[:, 0], self.edges[:, 1])), shape=(n, n)
        )
        ncomp, _ = sp.csgraph.connected_components(adj, directed=False)
        return ncomp == 1


def region_measure(mesh, tag):
    return mesh.region_measure(tag)


def _box_halves(lines):
    """Left and right half-widths of the 1-D boxes around grid lines."""
    h = np.diff(lines)
    left = np.concatenate([[0.0], h / 2])
    right = np.concatenate([h / 2, [0.0]])
    return left, right


def build_interval_mesh(layers, spacing):
    """1-D mesh of consecutive layers ``[(name, a, b), ...]``.

    Each layer gets ``ceil(length / spacing)`` uniform intervals, so layer
    interfaces are nodes shared by both neighbours.
    """
    if spacing <= 0:
        raise MeshError("spacing must be positive")
    names, lines, tags = [], [], []
    prev = None
    for name, a, b in layers:
        if not b > a:
            raise MeshError(f"layer {name!r} has non-increasing endpoints")
        if prev is not None and not math.isclose(a, prev, rel_tol=0, abs_tol=1e-12):
            raise MeshError("layers must be contiguous")
        if spacing > (b - a) * (1 + 1e-12):
            raise MeshError(f"spacing {spacing:g} exceeds layer {name!r} thickness {b - a:g}")
        m = max(1, math.ceil((b - a) / spacing - 1e-9))
        pts = np.linspace(a, b, m + 1)
        lines.append(pts if prev is None else pts[1:])
        tags.extend([name] * m)
        names.append(name)
        prev = b
    x = np.concatenate(lines)
    region_of_elem = np.array([names.index(t) for t in tags])
    return _tensor_mesh((x,), names, region_of_elem.reshape(-1))


def build_tensor_mesh(xs, ys, regions, background="background"):
    """2-D mesh on node lines ``xs``, ``ys``.

    ``regions`` is a list of ``(name, (x0, x1), (y0, y1))`` rectangles that
    must lie on grid lines; elements whose centre falls in none of them take
    the ``background`` tag.
    """
    xs = np.asarray(xs, dtype=float)
    ys = np.asarray(ys, dtype=float)
    if len(xs) < 2 or len(ys) < 2 or np.any(np.diff(xs) <= 0) or np.any(np.diff(ys) <= 0):
        raise MeshError("need at least two strictly increasing node lines per axis")
    names = [background] + [r[0] for r in regions]
    xc = 0.5 * (xs[1:] + xs[:-1])
    yc = 0.5 * (ys[1:] + ys[:-1])
    elem = np.zeros((len(xc), len(yc)), dtype=int)
    for k, (name, (x0, x1), (y0, y1)) in enumerate(regions, start=1):
        for v, lines in ((x0, xs), (x1, xs), (y0, ys), (y1, ys)):
            if np.min(np.abs(lines - v)) > 1e-9 * max(1.0, abs(v)):
                raise MeshError(f"region {name!r} edge {v:g} is not on a grid line")
        inside = ((xc > x0) & (xc < x1))[:, None] & ((yc > y0) & (yc < y1))[None, :]
        elem[inside] = k
    return _tensor_mesh((xs, ys), names, elem)


def build_rect_mesh(domain, regions, nx, ny, background="background"):
    """Uniform 2-D mesh with ``nx`` by ``ny`` nodes (so nx-1 by ny-1 elements).

    Region edges are snapped to the nearest grid line.
    """
    if nx < 2 or ny < 2:
        raise MeshError("degenerate node counts")
    (x0, x1), (y0, y1) = domain
    xs = np.linspace(x0, x1, nx)
    ys = np.linspace(y0, y1, ny)
    snapped = []
    for name, (a, b), (c, d) in regions:
        snap = lambda v, lines: float(lines[np.argmin(np.abs(lines - v))])  # noqa: E731
        snapped.append((name, (snap(a, xs), snap(b, xs)), (snap(c, ys), snap(d, ys))))
    return build_tensor_mesh(xs, ys, snapped, background)


def _tensor_mesh(lines, names, elem_region):
    dim = len(lines)
    R = len(names)
    if dim == 1:
        (x,) = lines
        n = len(x)
        left, right = _box_halves(x)
        rv = np.zeros((n, R))
        np.add.at(rv, (np.arange(n - 1), elem_region), right[:-1])
        np.add.at(rv, (np.arange(1, n), elem_region), left[1:])
        edges = np.stack([np.arange(n - 1), np.arange(1, n)], axis=1)
        area = np.ones(n - 1)
        length = np.diff(x)
        bnodes = np.array([0, n - 1])
        barea = np.ones(2)
        btags = ("contact1", "contact2")
        return FvMesh(x[:, None].copy(), tuple(names), rv, edges, area, length,
                      bnodes, barea, btags, (x,))

    xs, ys = lines
    nx, ny = len(xs), len(ys)
    idx = np.arange(nx * ny).reshape(nx, ny)  # node (i, j) -> i * ny + j
    X, Y = np.meshgrid(xs, ys, indexing="ij")
    nodes = np.stack([X.ravel(), Y.ravel()], axis=1)
    hx, hy = np.diff(xs), np.diff(ys)
    rv = np.zeros((nx * ny, R))
    quarter = 0.25 * np.outer(hx, hy)
    for di in (0, 1):
        for dj in (0, 1):
            owner = idx[di:nx - 1 + di, dj:ny - 1 + dj]
            np.add.at(rv, (owner.ravel(), elem_region.ravel()), quarter.ravel())
    lx, rx = _box_halves(xs)
    ly, ry = _box_halves(ys)
    bx = lx + rx
    by = ly + ry
    # x-directed edges: (i, j) - (i+1, j), face height by[j]
    ex = np.stack([idx[:-1, :].ravel(), idx[1:, :].ravel()], axis=1)
    ex_area = np.broadcast_to(by[None, :], (nx - 1, ny)).ravel()
    ex_len = np.broadcast_to(hx[:, None], (nx - 1, ny)).ravel()
    ey = np.stack([idx[:, :-1].ravel(), idx[:, 1:].ravel()], axis=1)
    ey_area = np.broadcast_to(bx[:, None], (nx, ny - 1)).ravel()
    ey_len = np.broadcast_to(hy[None, :], (nx, ny - 1)).ravel()
    edges = np.concatenate([ex, ey])
    area = np.concatenate([ex_area, ey_area])
    length = np.concatenate([ex_len, ey_len])
    bnodes = np.concatenate([idx[0, :], idx[-1, :], idx[:, 0], idx[:, -1]])
    barea = np.concatenate([by, by, bx, bx])
    btags = ("contact1",) * ny + ("contact2",) * ny + ("neumann",) * (2 * nx)
    return FvMesh(nodes, tuple(names), rv, edges, area.copy(), length.copy(),
                  bnodes, barea, btags, (xs, ys))


def _read_grid_lines(text):
    axes = {}
    for line in text.splitlines():
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        key, _, vals = line.partition(":")
        axes[key.strip()] = np.array([float(v) for v in vals.split()])
    return axes["x"], axes["y"]


@lru_cache(maxsize=1)
def lbic_fixture_mesh():
    """The frozen 53 x 23 = 1219 node LBIC grid, Omega_p = (2,6) x (1,3)."""
    text = resources.files("ddbounds.data").joinpath("lbic_grid.txt").read_text()
    xs, ys = _read_grid_lines(text)
    return build_tensor_mesh(xs, ys, [("p", (2.0, 6.0), (1.0, 3.0))], background="n")


def write_mesh_dump(mesh, path_or_file):
    """Plain-text sectioned dump: header, nodes, regions, edges, boundary."""
    own = isinstance(path_or_file, (str, bytes)) or hasattr(path_or_file, "__fspath__")
    fh = open(path_or_file, "w") if own else path_or_file
    try:
        w = fh.write
        w(f"# {MESH_DUMP_VERSION}\n")
        w(f"dim {mesh.dim}\n")
        w(f"[regions] {len(mesh.region_names)}\n")
        for name in mesh.region_names:
            w(f"{name} {repr(mesh.region_measure(name))}\n")
        w(f"[nodes] {mesh.n_nodes}\n")
        for k in range(mesh.n_nodes):
            coords = " ".join(repr(float(c)) for c in mesh.nodes[k])
            vols = " ".join(repr(float(v)) for v in mesh.region_volumes[k])
            w(f"{k} {coords} {vols}\n")
        w(f"[edges] {len(mesh.edges)}\n")
        for e, (a, b) in enumerate(mesh.edges):
            w(f"{a} {b} {repr(float(mesh.edge_area[e]))} {repr(float(mesh.edge_length[e]))}\n")
        w(f"[boundary] {len(mesh.bnd_nodes)}\n")
        for k, a, t in zip(mesh.bnd_nodes, mesh.bnd_area, mesh.bnd_tags):
            w(f"{k} {repr(float(a))} {t}\n")
    finally:
        if own:
            fh.close()
