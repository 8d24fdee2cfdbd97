"""Formation control under mismatched relative-position sensing.

Agent ``i`` perceives every relative position as ``a_i R_i z``. Stacking
the defects gives the block-diagonal ``D_x`` and the faulty closed loop
``p' = -D_x L_bar p + L_bar p*``. On tree graphs its steady state is a
distorted copy of the reference that drifts at a common residual velocity;
both are available in closed form.
"""

from __future__ import annotations

import warnings
from collections import deque
from dataclasses import dataclass

import numpy as np
from numpy.typing import ArrayLike, NDArray
from scipy.linalg import block_diag

from .errors import SingularityError, UnsupportedTopologyError, ValidationError
from .formation import Framework, ReferenceShape, blocks, stack
from .graph import classify_graph
from .maneuver import SpectrumReport, spectrum_check

_COND_LIMIT = 1e12


def rotation_2d(theta: float) -> NDArray[np.float64]:
    c, s = np.cos(theta), np.sin(theta)
    return np.array([[c, -s], [s, c]])


@dataclass(frozen=True)
class SensorModel:
    """Per-agent scale factors ``a`` (shape ``(n,)``) and rotations ``R`` (``(n, m, m)``)."""

    a: NDArray[np.float64]
    R: NDArray[np.float64]

    def __post_init__(self) -> None:
        a = np.asarray(self.a, dtype=np.float64).reshape(-1)
        R = np.asarray(self.R, dtype=np.float64)
        if R.ndim != 3 or R.shape[0] != a.size or R.shape[1] != R.shape[2]:
            raise ValidationError(f"need {a.size} square rotation matrices, got array of shape {R.shape}")
        for i, (ai, Ri) in enumerate(zip(a, R), start=1):
            if not np.isfinite(ai) or ai <= 0:
                raise ValidationError(f"agent {i}: scale factor must be positive, got {ai}")
            if np.max(np.abs(Ri.T @ Ri - np.eye(R.shape[1]))) > 1e-10:
                raise ValidationError(f"agent {i}: misalignment matrix is not orthogonal")
            if abs(np.linalg.det(Ri) - 1.0) > 1e-10:
                raise ValidationError(f"agent {i}: misalignment matrix has det != +1")
        object.__setattr__(self, "a", a)
        object.__setattr__(self, "R", R)

    @property
    def n(self) -> int:
        return self.a.size

    @property
    def m(self) -> int:
        return self.R.shape[1]

    @classmethod
    def from_angles(cls, a: ArrayLike, theta: ArrayLike) -> "SensorModel":
        """2-D model from scale factors and misalignment angles in radians."""
        theta = np.asarray(theta, dtype=np.float64).reshape(-1)
        return cls(np.asarray(a, dtype=np.float64), np.stack([rotation_2d(t) for t in theta]))

    @classmethod
    def perfect(cls, n: int, m: int) -> "SensorModel":
        return cls(np.ones(n), np.tile(np.eye(m), (n, 1, 1)))

    @classmethod
    def uniform(cls, n: int, a_star: float, R_star: ArrayLike) -> "SensorModel":
        R_star = np.asarray(R_star, dtype=np.float64)
        return cls(np.full(n, float(a_star)), np.tile(R_star, (n, 1, 1)))


def build_sensor_matrix(model: SensorModel) -> NDArray[np.float64]:
    """Block-diagonal ``D_x`` with block ``i`` equal to ``a_i R_i``."""
    return block_diag(*(ai * Ri for ai, Ri in zip(model.a, model.R)))


def faulty_control(
    p: ArrayLike,
    framework: Framework,
    shape: ReferenceShape,
    D_x: NDArray[np.float64],
) -> NDArray[np.float64]:
    """Stacked control ``-D_x L_bar p + L_bar p*`` executed with defective sensing."""
    p = framework.check_configuration(p)
    if D_x.shape != (p.size, p.size):
        raise ValidationError(f"D_x has shape {D_x.shape}, expected {(p.size, p.size)}")
    return -(D_x @ (framework.L_bar @ p)) + framework.L_bar @ shape.p_star


def two_agent_residual(a: float, z_star_12: ArrayLike) -> tuple[NDArray[np.float64], NDArray[np.float64]]:
    """Closed form for two agents when only agent 2 mis-scales by ``a``.

    Returns ``(z_tilde_12, v_residual)``: the steady relative position
    ``2 z*/(a+1)`` and the common drift ``(a-1)/(a+1) z*``.
    """
    if not np.isfinite(a) or a <= 0:
        raise ValidationError(f"scale factor must be positive, got {a}")
    z = np.asarray(z_star_12, dtype=np.float64)
    return 2.0 * z / (a + 1.0), (a - 1.0) / (a + 1.0) * z


@dataclass(frozen=True)
class RobustnessPrediction:
    z_tilde: NDArray[np.float64]
    v_tilde: NDArray[np.float64]
    M_breve: NDArray[np.float64]
    p_tilde: NDArray[np.float64]
    consistency_residual: float
    condition_number: float
    spectrum: SpectrumReport

    @property
    def realizable(self) -> bool:
        """Whether the faulty closed loop actually converges to this prediction."""
        return self.spectrum.stable

    def condition_residuals(
        self, framework: Framework, shape: ReferenceShape, D_x: NDArray[np.float64]
    ) -> dict[str, float]:
        """Residuals of the defining conditions; all should be ~0."""
        n = framework.n
        drift = np.tile(self.v_tilde, n)
        Wb = framework.W_bar
        Bb = framework.B_bar
        first = (D_x @ Bb @ Wb + self.M_breve) @ self.z_tilde - framework.L_bar @ shape.p_star
        return {
            "z_from_p": float(np.max(np.abs(Bb.T @ self.p_tilde - self.z_tilde))),
            "shape_condition": float(np.max(np.abs(first))),
            "drift_condition": float(np.max(np.abs(self.M_breve @ self.z_tilde - drift))),
            "combined_condition": float(
                np.max(np.abs(D_x @ framework.L_bar @ self.p_tilde - framework.L_bar @ shape.p_star + drift))
            ),
        }


def reconstruct_configuration(framework: Framework, z: ArrayLike, root: int = 0) -> NDArray[np.float64]:
    """Configuration realizing relative positions ``z`` on a tree, centered at its centroid.

    The root agent is placed at the origin and positions are propagated
    along tree edges before re-centering; the result does not depend on the root.
    """
    m, n = framework.m, framework.n
    Z = blocks(z, m)
    P = np.full((n, m), np.nan)
    P[root] = 0.0
    queue = deque([root])
    tails, heads = framework.graph.tails, framework.graph.heads
    while queue:
        i = queue.popleft()
        for k in range(framework.graph.num_edges):
            t, h = tails[k], heads[k]
            if t == i and np.isnan(P[h, 0]):
                P[h] = P[t] - Z[k]
                queue.append(h)
            elif h == i and np.isnan(P[t, 0]):
                P[t] = P[h] + Z[k]
                queue.append(t)
    if np.isnan(P).any():
        raise ValidationError("graph not connected")
    return stack(P - P.mean(axis=0))


def predict_distortion(
    framework: Framework,
    shape: ReferenceShape,
    model: SensorModel,
) -> RobustnessPrediction:
    """Closed-form steady state of the faulty closed loop on a tree graph.

    Computes the distorted relative positions, the residual drift velocity,
    the auxiliary matrix ``M_breve`` and a centered distorted configuration.
    The drift is the mean over agents of the per-agent residual; their spread
    is reported as ``consistency_residual``. Closed-loop stability is checked
    separately and exposed as ``realizable``.

    Raises:
        UnsupportedTopologyError: graph is not a tree.
        SingularityError: ``B_bar^T D_x B_bar D_w`` is numerically singular.
    """
    cls = classify_graph(framework.graph)
    if not cls.connected:
        raise ValidationError("graph not connected")
    if not cls.tree:
        raise UnsupportedTopologyError("distortion prediction needs a tree graph (no cycles)")
    m, n = framework.m, framework.n
    if model.n != n or model.m != m:
        raise ValidationError(f"sensor model is for n={model.n}, m={model.m}; framework has n={n}, m={m}")

    D_x = build_sensor_matrix(model)
    Bb, Wb = framework.B_bar, framework.W_bar
    z_star = Bb.T @ shape.p_star
    BtB = Bb.T @ Bb
    BtDB = Bb.T @ D_x @ Bb
    K = BtDB @ Wb
    # measured against the unfaulted scale so that a uniformly tiny K still counts as singular
    sv = np.linalg.svd(K, compute_uv=False)
    ref = max(sv[0], float(np.max(model.a)) * np.linalg.norm(BtB @ Wb, 2))
    cond = float(ref / sv[-1]) if sv[-1] > 0 else float("inf")
    if not np.isfinite(cond) or cond > _COND_LIMIT:
        raise SingularityError(
            f"B^T D_x B D_w is numerically singular (condition number {cond:.3e})", cond
        )
    z_tilde = np.linalg.solve(K, BtB @ Wb @ z_star)

    resid = (D_x @ Bb @ np.linalg.solve(BtDB, BtB) - Bb) @ Wb @ z_star
    R = blocks(resid, m)
    v_tilde = -R.mean(axis=0)
    spread = float(np.max(np.abs(R + v_tilde)))
    if spread > 1e-6:
        warnings.warn(f"residual velocity blocks disagree by {spread:.3e}", RuntimeWarning, stacklevel=2)

    M_breve = -(D_x @ Bb - Bb @ np.linalg.solve(BtB, BtDB)) @ Wb
    p_tilde = reconstruct_configuration(framework, z_tilde)
    spectrum = spectrum_check(D_x @ framework.L_bar, m=m)
    return RobustnessPrediction(z_tilde, v_tilde, M_breve, p_tilde, spread, cond, spectrum)
