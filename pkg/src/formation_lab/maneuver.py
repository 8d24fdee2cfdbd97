"""Maneuvering by perturbing Laplacian weights with motion parameters.

Agent ``i`` adds ``kappa * mu_ij (p_i - p_j)`` for each neighbor ``j`` to the
displacement-consensus law. If the motion parameters are chosen so that
``kappa * sum_j mu_ij (p*_i - p*_j) = v*`` for every agent, the formation
converges to a translating copy of ``p*`` moving at ``v*``.

``mu_ij`` is either a scalar or an ``m x m`` block; ``mu_ij`` and ``mu_ji``
are independent, so the modified Laplacian is not symmetric.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Literal

import numpy as np
from numpy.typing import ArrayLike, NDArray

from .errors import (
    DegenerateEdgeError,
    DesignInconsistencyError,
    EigenSolverError,
    InfeasibleDesignError,
    NumericError,
    UnsupportedTopologyError,
    ValidationError,
)
from .formation import Framework, ReferenceShape, blocks
from .graph import classify_graph, lift, require_connected, zero_tolerance

Mode = Literal["scalar", "matrix"]

# relative singular-value cutoff for the least-squares design
_RCOND = 1e-10


@dataclass(frozen=True)
class MotionParams:
    """Motion parameters, 0-based.

    ``values[i, j]`` is ``mu_ij``: shape ``(n, n)`` in scalar mode and
    ``(n, n, m, m)`` in matrix mode. Entries for non-neighbors are zero.
    """

    mode: Mode
    values: NDArray[np.float64]

    def __post_init__(self) -> None:
        if self.mode not in ("scalar", "matrix"):
            raise ValidationError(f"unknown motion-parameter mode {self.mode!r}")
        v = np.asarray(self.values, dtype=np.float64)
        want = 2 if self.mode == "scalar" else 4
        if v.ndim != want or v.shape[0] != v.shape[1]:
            raise ValidationError(f"{self.mode} motion parameters need a {want}-d (n, n, ...) array")
        object.__setattr__(self, "values", v)

    def block(self, i: int, j: int, m: int) -> NDArray[np.float64]:
        if self.mode == "scalar":
            return self.values[i, j] * np.eye(m)
        return self.values[i, j]

    def check_sparsity(self, framework: Framework) -> None:
        n = framework.n
        if self.values.shape[0] != n:
            raise ValidationError(f"motion parameters sized for {self.values.shape[0]} agents, graph has {n}")
        if self.mode == "matrix" and self.values.shape[2:] != (framework.m, framework.m):
            raise ValidationError(f"matrix motion parameters must be {framework.m}x{framework.m} blocks")
        for i in range(n):
            nbrs = set(framework.graph.neighbors(i))
            for j in range(n):
                if j not in nbrs and np.any(self.values[i, j] != 0):
                    raise ValidationError(
                        f"mu_{i + 1},{j + 1} is nonzero but {j + 1} is not a neighbor of {i + 1}"
                    )

    @classmethod
    def zeros(cls, n: int, m: int, mode: Mode = "scalar") -> "MotionParams":
        shape = (n, n) if mode == "scalar" else (n, n, m, m)
        return cls(mode, np.zeros(shape))


def design_motion_params(
    framework: Framework,
    shape: ReferenceShape,
    v_star: ArrayLike,
    mode: Mode = "scalar",
    kappa: float = 1.0,
) -> MotionParams:
    """Choose motion parameters so that every agent's steady velocity is ``v*``.

    The products ``kappa * mu_ij`` are solved for first and then divided by
    ``kappa``, so feasibility does not depend on the gain.

    Scalar mode solves, per agent, a minimum-norm least-squares problem over
    the agent's desired relative positions and fails when ``v*`` is outside
    their span. Matrix mode puts a single block on the edge to the
    lowest-index neighbor: a rotation-and-scaling ``[[a, -b], [b, a]]`` in
    2-D, the rank-one map ``v* d^T / (kappa |d|^2)`` otherwise.

    Raises:
        InfeasibleDesignError: scalar design impossible for some agent.
        DegenerateEdgeError: zero desired relative position in matrix mode.
    """
    require_connected(framework.graph)
    m, n = framework.m, framework.n
    v = np.asarray(v_star, dtype=np.float64).reshape(-1)
    if v.size != m:
        raise ValidationError(f"v* has {v.size} components, expected m={m}")
    if not np.all(np.isfinite(v)):
        raise ValidationError("v* must be finite")
    if mode not in ("scalar", "matrix"):
        raise ValidationError(f"unknown motion-parameter mode {mode!r}")
    if not np.any(v):
        return MotionParams.zeros(n, m, mode)
    if kappa == 0:
        raise ValidationError("kappa = 0 cannot produce a nonzero v*")

    P = blocks(shape.p_star, m)
    scale = max(1.0, float(np.linalg.norm(v)))

    if mode == "scalar":
        mu = np.zeros((n, n))
        for i in range(n):
            nbrs = framework.graph.neighbors(i)
            D = np.stack([P[i] - P[j] for j in nbrs], axis=1)
            x, *_ = np.linalg.lstsq(D, v, rcond=_RCOND)
            if np.linalg.norm(D @ x - v) > 1e-9 * scale:
                rank = np.linalg.matrix_rank(D, tol=_RCOND * max(np.linalg.norm(D, 2), 1e-300))
                raise InfeasibleDesignError(
                    f"agent {i + 1}: v* is outside the span of its {len(nbrs)} desired relative "
                    f"position(s) (rank {rank} < m={m}); use mode='matrix'",
                    agent=i + 1,
                )
            mu[i, nbrs] = x / kappa
        return MotionParams("scalar", mu)

    mu = np.zeros((n, n, m, m))
    w = v / kappa
    for i in range(n):
        j = framework.graph.neighbors(i)[0]
        d = P[i] - P[j]
        dd = float(d @ d)
        if dd <= 1e-24 * max(1.0, float(np.max(np.abs(P))) ** 2):
            raise DegenerateEdgeError(
                f"agent {i + 1}: desired relative position to neighbor {j + 1} is zero"
            )
        if m == 2:
            a = float(d @ w) / dd
            b = float(d[0] * w[1] - d[1] * w[0]) / dd
            mu[i, j] = [[a, -b], [b, a]]
        else:
            mu[i, j] = np.outer(w, d) / dd
    return MotionParams("matrix", mu)


@dataclass(frozen=True)
class ManeuverDesign:
    motion: MotionParams
    kappa: float
    M_hat: NDArray[np.float64]
    Lambda_hat: NDArray[np.float64]
    v_star: NDArray[np.float64]
    M: NDArray[np.float64] | None = None  # unlifted, scalar mode only

    def system_matrix(self, framework: Framework) -> NDArray[np.float64]:
        """``L_bar - kappa * Lambda_hat``."""
        return framework.L_bar - self.kappa * self.Lambda_hat


def assemble_M_hat(motion: MotionParams, framework: Framework) -> NDArray[np.float64]:
    """Block matrix with ``+mu_{tail,head}`` at the tail row and ``-mu_{head,tail}`` at the head row."""
    m, n, E = framework.m, framework.n, framework.graph.num_edges
    Mh = np.zeros((m * n, m * E))
    for k, (t, h) in enumerate(zip(framework.graph.tails, framework.graph.heads)):
        Mh[m * t : m * t + m, m * k : m * k + m] = motion.block(t, h, m)
        Mh[m * h : m * h + m, m * k : m * k + m] = -motion.block(h, t, m)
    return Mh


def build_maneuver(
    motion: MotionParams,
    framework: Framework,
    shape: ReferenceShape,
    kappa: float,
) -> ManeuverDesign:
    """Assemble ``M_hat`` and ``Lambda_hat`` and check design consistency.

    Raises:
        DesignInconsistencyError: when the agents' designed velocities differ.
    """
    motion.check_sparsity(framework)
    m, n = framework.m, framework.n
    M_hat = assemble_M_hat(motion, framework)
    M = None
    if motion.mode == "scalar":
        E = framework.graph.num_edges
        M = np.zeros((n, E))
        for k, (t, h) in enumerate(zip(framework.graph.tails, framework.graph.heads)):
            M[t, k] = motion.values[t, h]
            M[h, k] = -motion.values[h, t]
    Lambda_hat = M_hat @ framework.B_bar.T
    vel = blocks(kappa * Lambda_hat @ shape.p_star, m)
    v_star = vel[0].copy()
    spread = float(np.max(np.abs(vel - v_star)))
    if spread > 1e-9 * max(1.0, float(np.max(np.abs(vel)))):
        worst = int(np.argmax(np.max(np.abs(vel - v_star), axis=1)))
        raise DesignInconsistencyError(
            f"designed velocities disagree: agent 1 gets {v_star.tolist()}, "
            f"agent {worst + 1} gets {vel[worst].tolist()}"
        )
    return ManeuverDesign(motion, float(kappa), M_hat, Lambda_hat, v_star, M)


def kappa_bound(
    framework: Framework,
    M_hat: NDArray[np.float64],
    omega_star: float | None = None,
) -> float:
    """Gain bound ``omega* lambda_min(B^T B) / ||B_bar^T M_hat||_2`` for trees.

    Any ``|kappa|`` strictly below the bound keeps the maneuvering closed loop
    stable. Returns ``inf`` when ``B_bar^T M_hat`` vanishes.

    Raises:
        UnsupportedTopologyError: the graph has cycles; use :func:`spectrum_check`.
    """
    cls = classify_graph(framework.graph)
    if not cls.tree:
        raise UnsupportedTopologyError(
            "kappa_bound needs a tree graph; for graphs with cycles use spectrum_check"
        )
    weights = framework.graph.weight_vector
    if omega_star is None:
        omega_star = float(weights[0])
    if omega_star <= 0:
        raise ValidationError(f"omega* must be positive, got {omega_star}")
    if not np.allclose(weights, omega_star, rtol=1e-12, atol=0):
        raise ValidationError(f"kappa_bound needs uniform weights equal to omega*={omega_star}")
    lam = float(np.min(np.linalg.eigvalsh(framework.B_bar.T @ framework.B_bar)))
    norm = float(np.linalg.norm(framework.B_bar.T @ M_hat, 2))
    if norm == 0.0:
        return float("inf")
    return omega_star * lam / norm


@dataclass(frozen=True)
class SpectrumReport:
    eigenvalues: NDArray[np.complex128]
    zero_count: int
    min_nonzero_real: float
    stable: bool
    kernel_residual: float
    tolerance: float

    def to_dict(self) -> dict:
        return {
            "eigenvalues_real": self.eigenvalues.real.tolist(),
            "eigenvalues_imag": self.eigenvalues.imag.tolist(),
            "zero_count": self.zero_count,
            "min_nonzero_real": self.min_nonzero_real,
            "stable": self.stable,
            "kernel_residual": self.kernel_residual,
        }


def spectrum_check(
    L_bar: NDArray[np.float64],
    kappa: float = 0.0,
    Lambda_hat: NDArray[np.float64] | None = None,
    m: int = 1,
) -> SpectrumReport:
    """Spectrum of ``L_bar - kappa * Lambda_hat`` and its stability verdict.

    Stable means exactly ``m`` zero eigenvalues and every other eigenvalue with
    real part above the zero tolerance. ``L_bar`` may be any closed-loop
    matrix that annihilates ``1_n ⊗ e_l`` (e.g. ``D_x L_bar``).
    """
    A = np.asarray(L_bar, dtype=np.float64)
    if Lambda_hat is not None:
        if Lambda_hat.shape != A.shape:
            raise ValidationError(f"shape mismatch {A.shape} vs {Lambda_hat.shape}")
        A = A - kappa * Lambda_hat
    if A.ndim != 2 or A.shape[0] != A.shape[1] or A.shape[0] % m:
        raise ValidationError(f"expected a square matrix of size divisible by m={m}, got {A.shape}")
    try:
        ev = np.linalg.eigvals(A)
    except np.linalg.LinAlgError as exc:
        raise EigenSolverError(
            f"eigensolver failed: {exc}\n{np.array2string(A, precision=17)}"
        ) from exc
    tol = zero_tolerance(A)
    is_zero = np.abs(ev) < tol
    nonzero = ev[~is_zero]
    min_re = float(np.min(nonzero.real)) if nonzero.size else float("inf")
    n = A.shape[0] // m
    kernel = np.kron(np.ones((n, 1)), np.eye(m))
    kres = float(np.max(np.abs(A @ kernel))) if A.size else 0.0
    zero_count = int(np.sum(is_zero))
    stable = zero_count == m and min_re > tol
    order = np.lexsort((ev.imag, ev.real))
    return SpectrumReport(ev[order], zero_count, min_re, stable, kres, tol)


def maneuver_control(
    p: ArrayLike,
    design: ManeuverDesign,
    framework: Framework,
    shape: ReferenceShape,
) -> NDArray[np.float64]:
    """Stacked control ``u = -(L_bar - kappa Lambda_hat) p + L_bar p*``."""
    p = framework.check_configuration(p)
    return -(design.system_matrix(framework) @ p) + framework.L_bar @ shape.p_star


def agent_control(
    i: int,
    p: ArrayLike,
    design: ManeuverDesign,
    framework: Framework,
    shape: ReferenceShape,
) -> NDArray[np.float64]:
    """Control of agent ``i`` (0-based) from its neighbors' relative positions only."""
    m = framework.m
    P = blocks(framework.check_configuration(p), m)
    Ps = blocks(shape.p_star, m)
    u = np.zeros(m)
    for j in framework.graph.neighbors(i):
        k, _ = framework.graph.edge_between(i, j)
        w = framework.graph.weights[k]
        z_ij = P[i] - P[j]
        u -= w * (z_ij - (Ps[i] - Ps[j]))
        u += design.kappa * design.motion.block(i, j, m) @ z_ij
    return u


def particular_solution(
    design: ManeuverDesign, shape: ReferenceShape, t: float
) -> NDArray[np.float64]:
    """``p*`` translating at the designed velocity: ``(kappa Lambda_hat p*) t + p*``."""
    return design.kappa * (design.Lambda_hat @ shape.p_star) * t + shape.p_star


def modal_solution(
    design: ManeuverDesign,
    framework: Framework,
    shape: ReferenceShape,
    p0: ArrayLike,
    t: float,
) -> NDArray[np.float64]:
    """Closed-form ``p(t)`` from the eigendecomposition of the modified Laplacian.

    Homogeneous part ``exp(-A t)(p0 - p*)`` plus the translating particular
    solution. Needs a diagonalizable system matrix.
    """
    p0 = framework.check_configuration(p0)
    A = design.system_matrix(framework)
    lam, V = np.linalg.eig(A)
    cond = np.linalg.cond(V)
    if not np.isfinite(cond) or cond > 1e10:
        raise NumericError(f"system matrix is (nearly) defective, eigenvector condition {cond:.3e}")
    c = np.linalg.solve(V, (p0 - shape.p_star).astype(np.complex128))
    hom = V @ (np.exp(-lam * t) * c)
    return hom.real + particular_solution(design, shape, t)


def nominal_design(framework: Framework, shape: ReferenceShape) -> ManeuverDesign:
    """All-zero motion parameters: the static displacement-consensus controller."""
    return build_maneuver(MotionParams.zeros(framework.n, framework.m), framework, shape, 0.0)


def lifted_scalar_M(design: ManeuverDesign, m: int) -> NDArray[np.float64]:
    if design.M is None:
        raise ValidationError("scalar-mode design required")
    return lift(design.M, m)

