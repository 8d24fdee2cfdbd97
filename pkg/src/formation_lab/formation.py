"""Frameworks, configurations and reference shapes.

Configurations are flat stacked vectors ``p = [p_1; ...; p_n]`` with each
``p_i`` in R^m. Use :func:`blocks` to view one as an ``(n, m)`` array.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property
from typing import NamedTuple

import numpy as np
from numpy.typing import ArrayLike, NDArray

from .errors import ValidationError
from .graph import Graph, build_incidence, build_laplacian, lift


def blocks(x: ArrayLike, m: int) -> NDArray[np.float64]:
    """Reshape a stacked vector into one row per m-dimensional block."""
    x = np.asarray(x, dtype=np.float64)
    if x.ndim != 1 or x.size % m:
        raise ValidationError(f"stacked vector of length {x.size} is not divisible into blocks of {m}")
    return x.reshape(-1, m)


def stack(rows: ArrayLike) -> NDArray[np.float64]:
    """Inverse of :func:`blocks`."""
    return np.asarray(rows, dtype=np.float64).reshape(-1)


def ones_kron(v: ArrayLike, n: int) -> NDArray[np.float64]:
    """``1_n ⊗ v``."""
    return np.tile(np.asarray(v, dtype=np.float64), n)


@dataclass(frozen=True)
class Framework:
    """A graph placed in ``m`` ambient dimensions.

    Holds the incidence matrix, Laplacian, and their Kronecker lifts.
    """

    graph: Graph
    m: int = 2

    def __post_init__(self) -> None:
        if int(self.m) != self.m or self.m < 1:
            raise ValidationError(f"dimension m must be a positive integer, got {self.m}")

    @property
    def n(self) -> int:
        return self.graph.n

    @cached_property
    def B(self) -> NDArray[np.float64]:
        return build_incidence(self.graph)

    @cached_property
    def B_bar(self) -> NDArray[np.float64]:
        return lift(self.B, self.m)

    @cached_property
    def L(self) -> NDArray[np.float64]:
        return build_laplacian(self.graph)

    @cached_property
    def L_bar(self) -> NDArray[np.float64]:
        return lift(self.L, self.m)

    @cached_property
    def W_bar(self) -> NDArray[np.float64]:
        """Lifted diagonal weight matrix."""
        return lift(np.diag(self.graph.weight_vector), self.m)

    def check_configuration(self, p: ArrayLike) -> NDArray[np.float64]:
        p = np.asarray(p, dtype=np.float64).reshape(-1)
        if p.size != self.m * self.n:
            raise ValidationError(
                f"configuration has length {p.size}, expected m*n = {self.m}*{self.n}"
            )
        return p


@dataclass(frozen=True)
class ReferenceShape:
    """Reference configuration split into center of mass and centered part."""

    p_star: NDArray[np.float64]
    center: NDArray[np.float64]
    centered: NDArray[np.float64]
    m: int

    @property
    def n(self) -> int:
        return self.p_star.size // self.m

    def z_star(self, framework: Framework) -> NDArray[np.float64]:
        return relative_positions(framework, self.p_star)


def decompose_reference(p_star_raw: ArrayLike, m: int) -> ReferenceShape:
    """Split ``p*`` as ``1_n ⊗ p_cm + p*_c`` with ``p*_c`` summing to zero."""
    rows = blocks(p_star_raw, m)
    if rows.shape[0] == 0:
        raise ValidationError("reference configuration is empty")
    center = rows.mean(axis=0)
    centered = rows - center
    return ReferenceShape(stack(rows), center, stack(centered), m)


def relative_positions(framework: Framework, p: ArrayLike) -> NDArray[np.float64]:
    """Stacked ``z`` with block k equal to ``p_tail(k) - p_head(k)``."""
    p = framework.check_configuration(p)
    return framework.B_bar.T @ p


class Membership(NamedTuple):
    in_shape: bool
    offset_b: NDArray[np.float64]
    residual: float


def default_membership_tol(framework: Framework, shape: ReferenceShape) -> float:
    return 1e-6 * max(1.0, float(np.linalg.norm(shape.z_star(framework))))


def shape_membership(
    p: ArrayLike,
    shape: ReferenceShape,
    tol: float | None = None,
    framework: Framework | None = None,
) -> Membership:
    """Test whether ``p`` is a pure translation of the reference shape.

    ``tol`` defaults to ``1e-6 * max(1, ||z*||)``, which needs ``framework``.
    """
    p = np.asarray(p, dtype=np.float64).reshape(-1)
    if p.size != shape.p_star.size:
        raise ValidationError(f"configuration has length {p.size}, reference has {shape.p_star.size}")
    if tol is None:
        if framework is None:
            raise ValidationError("either tol or framework is required")
        tol = default_membership_tol(framework, shape)
    if tol <= 0:
        raise ValidationError(f"tolerance must be positive, got {tol}")
    diff = blocks(p - shape.p_star, shape.m)
    offset = diff.mean(axis=0)
    residual = float(np.linalg.norm(diff - offset))
    return Membership(residual <= tol, offset, residual)
