"""Uniform Cartesian meshes, sweep orderings and inflow boundary data.

Fields on the mesh are stored as arrays indexed ``[j, k]`` (x index
first). Interior vertical edges carry the normal ``(+1, 0)``, horizontal
ones ``(0, +1)``; boundary normals point outward.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

# local face coordinates of the inflow samples: two Gauss points and the midpoint
FACE_POINTS = np.array([-1.0 / np.sqrt(3.0), 0.0, 1.0 / np.sqrt(3.0)])


@dataclass(frozen=True)
class Mesh2D:
    x0: float
    x1: float
    y0: float
    y1: float
    nx: int
    ny: int

    @property
    def dx(self) -> float:
        return (self.x1 - self.x0) / self.nx

    @property
    def dy(self) -> float:
        return (self.y1 - self.y0) / self.ny

    @property
    def h(self) -> float:
        return max(self.dx, self.dy)

    @property
    def n_cells(self) -> int:
        return self.nx * self.ny

    @property
    def cell_area(self) -> float:
        return self.dx * self.dy

    @property
    def bounds(self) -> tuple[float, float, float, float]:
        return (self.x0, self.x1, self.y0, self.y1)

    @property
    def xc(self) -> np.ndarray:
        return self.x0 + (np.arange(self.nx) + 0.5) * self.dx

    @property
    def yc(self) -> np.ndarray:
        return self.y0 + (np.arange(self.ny) + 0.5) * self.dy

    @property
    def x_edges(self) -> np.ndarray:
        return self.x0 + np.arange(self.nx + 1) * self.dx

    @property
    def y_edges(self) -> np.ndarray:
        return self.y0 + np.arange(self.ny + 1) * self.dy

    def centers(self) -> tuple[np.ndarray, np.ndarray]:
        """Cell-center coordinates as two ``(nx, ny)`` arrays."""
        return np.meshgrid(self.xc, self.yc, indexing="ij")

    def linear_index(self, j: int, k: int) -> int:
        """Row-major (x fastest) position of cell ``(j, k)``."""
        if not (0 <= j < self.nx and 0 <= k < self.ny):
            raise IndexError(f"cell ({j}, {k}) outside {self.nx}x{self.ny} mesh")
        return k * self.nx + j

    def cell_index(self, linear: int) -> tuple[int, int]:
        if not 0 <= linear < self.n_cells:
            raise IndexError(f"linear index {linear} outside mesh")
        k, j = divmod(linear, self.nx)
        return j, k


def build_mesh(bounds, nx: int, ny: int) -> Mesh2D:
    x0, x1, y0, y1 = (float(b) for b in bounds)
    if int(nx) != nx or int(ny) != ny or nx < 1 or ny < 1:
        raise ValueError(f"cell counts must be positive integers, got {nx}x{ny}")
    if not (x1 > x0 and y1 > y0):
        raise ValueError(f"degenerate domain bounds {bounds}")
    return Mesh2D(x0, x1, y0, y1, int(nx), int(ny))


def sweep_order(mesh: Mesh2D, direction) -> list[tuple[int, int]]:
    """Cells ordered so both upwind neighbours precede each cell.

    Rows (k) form the outer loop and columns (j) the inner one, each
    running in the upwind-to-downwind sense.
    """
    ox, oy = float(direction[0]), float(direction[1])
    if ox == 0.0 or oy == 0.0:
        raise ValueError("sweep direction must not be aligned with a mesh axis")
    js = range(mesh.nx) if ox > 0 else range(mesh.nx - 1, -1, -1)
    ks = range(mesh.ny) if oy > 0 else range(mesh.ny - 1, -1, -1)
    return [(j, k) for k in ks for j in js]


def gauss_cell_points(mesh: Mesh2D, n_points: int = 3):
    """Tensor Gauss points on every cell.

    Returns ``X, Y`` of shape ``(nx, ny, n_points**2)``, the reference
    coordinates ``xi, eta`` and weights ``w`` (length ``n_points**2``,
    summing to 4).
    """
    g, gw = np.polynomial.legendre.leggauss(n_points)
    xi = np.tile(g, n_points)
    eta = np.repeat(g, n_points)
    w = np.tile(gw, n_points) * np.repeat(gw, n_points)
    X = mesh.xc[:, None, None] + 0.5 * mesh.dx * xi[None, None, :]
    Y = mesh.yc[None, :, None] + 0.5 * mesh.dy * eta[None, None, :]
    X, Y = np.broadcast_arrays(X, Y)
    return X, Y, xi, eta, w


@dataclass(frozen=True)
class InflowData:
    """Boundary trace samples per ordinate and boundary face.

    Each array has shape ``(N*, n_faces, 3)`` holding values at the local
    face coordinates ``FACE_POINTS`` (Gauss, midpoint, Gauss), ordered
    along increasing y (west/east faces) or x (south/north faces). Only
    entries on inflow faces are ever read.
    """

    west: np.ndarray
    east: np.ndarray
    south: np.ndarray
    north: np.ndarray

    @classmethod
    def zeros(cls, mesh: Mesh2D, n_ordinates: int) -> "InflowData":
        return cls(
            np.zeros((n_ordinates, mesh.ny, 3)),
            np.zeros((n_ordinates, mesh.ny, 3)),
            np.zeros((n_ordinates, mesh.nx, 3)),
            np.zeros((n_ordinates, mesh.nx, 3)),
        )

    @classmethod
    def from_function(cls, mesh: Mesh2D, quad, psi_b, t: float = 0.0) -> "InflowData":
        """Sample ``psi_b(t, x, y, omega)`` (vectorised in x, y)."""
        ys = mesh.yc[:, None] + 0.5 * mesh.dy * FACE_POINTS[None, :]
        xs = mesh.xc[:, None] + 0.5 * mesh.dx * FACE_POINTS[None, :]
        data = cls.zeros(mesh, quad.count)
        for i, omega in enumerate(quad.directions):
            if omega[0] > 0:
                data.west[i] = psi_b(t, np.full_like(ys, mesh.x0), ys, omega)
            else:
                data.east[i] = psi_b(t, np.full_like(ys, mesh.x1), ys, omega)
            if omega[1] > 0:
                data.south[i] = psi_b(t, xs, np.full_like(xs, mesh.y0), omega)
            else:
                data.north[i] = psi_b(t, xs, np.full_like(xs, mesh.y1), omega)
        return data

    def is_zero(self) -> bool:
        return not (self.west.any() or self.east.any() or self.south.any() or self.north.any())


GROUP = 16  # widest group of same-quadrant ordinates swept together as vector lanes


def ordinate_groups(ox: np.ndarray, oy: np.ndarray) -> np.ndarray:
    """Ordinate indices grouped by sweep quadrant, ``-1`` padded to a common width.

    The width is ``GROUP`` or the largest quadrant population, whichever is smaller.
    """
    quads = [
        np.flatnonzero(((ox > 0) == qx) & ((oy > 0) == qy)) for qx in (True, False) for qy in (True, False)
    ]
    width = max(1, min(GROUP, max(idx.size for idx in quads)))
    groups = []
    for idx in quads:
        for s in range(0, idx.size, width):
            g = np.full(width, -1, dtype=np.int64)
            g[: idx[s:s + width].size] = idx[s:s + width]
            groups.append(g)
    return np.array(groups, dtype=np.int64).reshape(-1, width)
