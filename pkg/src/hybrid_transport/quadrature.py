"""Tensor-product discrete-ordinates quadrature on the unit sphere."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from numpy.polynomial.legendre import leggauss

FOUR_PI = 4.0 * np.pi


@dataclass(frozen=True, eq=False)
class Quadrature:
    """Ordinates and weights of an order-``N`` product rule.

    ``directions`` has shape ``(N*, 3)`` with columns ``(Ox, Oy, Oz)``;
    storage is polar-major, azimuth-minor.
    """

    order: int
    directions: np.ndarray
    weights: np.ndarray

    @property
    def count(self) -> int:
        return len(self.weights)

    @property
    def ox(self) -> np.ndarray:
        return self.directions[:, 0]

    @property
    def oy(self) -> np.ndarray:
        return self.directions[:, 1]

    def __repr__(self) -> str:
        return f"Quadrature(order={self.order}, count={self.count})"


def build_product_quadrature(order: int) -> Quadrature:
    """Gauss-Legendre in the polar cosine crossed with ``order`` uniform
    azimuths at half offsets ``(k - 1/2) 2 pi / N``.

    Two uniform azimuths cannot integrate ``cos^2`` and would sit on the
    y-axis, so for ``N = 2`` the azimuth pair is turned by a quarter of
    its spacing in opposite senses on the two polar levels. The four
    ordinates are then the vertices of a regular tetrahedron.
    """
    if isinstance(order, bool) or int(order) != order:
        raise ValueError(f"quadrature order must be an integer, got {order!r}")
    order = int(order)
    if order < 2 or order % 2:
        raise ValueError(f"quadrature order must be even and >= 2, got {order}")

    mu, w_mu = leggauss(order)
    phi = (np.arange(1, order + 1) - 0.5) * (2.0 * np.pi / order)
    phi = np.broadcast_to(phi, (order, order))
    if order == 2:
        phi = phi + np.array([[0.25 * np.pi], [-0.25 * np.pi]])
    sin_t = np.sqrt(1.0 - mu**2)

    dirs = np.empty((order * order, 3))
    dirs[:, 0] = (sin_t[:, None] * np.cos(phi)).ravel()
    dirs[:, 1] = (sin_t[:, None] * np.sin(phi)).ravel()
    dirs[:, 2] = np.repeat(mu, order)
    weights = np.repeat(w_mu, order) * (2.0 * np.pi / order)

    dirs.setflags(write=False)
    weights.setflags(write=False)
    return Quadrature(order, dirs, weights)


def moment(quad: Quadrature, degree: int):
    """Weighted sum of 1, Omega, or Omega (x) Omega over the ordinates."""
    w = quad.weights
    if degree == 0:
        return float(np.sum(w))
    if degree == 1:
        return w @ quad.directions
    if degree == 2:
        return np.einsum("i,ij,ik->jk", w, quad.directions, quad.directions)
    raise ValueError(f"moment degree must be 0, 1 or 2, got {degree}")
