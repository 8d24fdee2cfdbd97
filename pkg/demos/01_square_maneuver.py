#
# Square formation that translates while holding its shape.
# Only the Laplacian weights change; no agent is told where to go.
#
import numpy as np

from formation_lab import (
    DynamicsSpec, Framework, Graph, build_maneuver, convergence_metrics,
    decompose_reference, design_motion_params, kappa_bound, simulate, spectrum_check,
)
from formation_lab.formation import blocks

corners = np.array([[-5, -5], [-5, 5], [5, 5], [5, -5]], dtype=float)
fw = Framework(Graph(4, [(1, 2), (2, 3), (1, 4)]), 2)
shape = decompose_reference(corners.ravel(), 2)

# horizontal motion is reachable with scalar weights on this tree
motion = design_motion_params(fw, shape, [1.0, 0.0], mode="scalar")
print("mu (row i, col j):")
print(motion.values)

bound = kappa_bound(fw, build_maneuver(motion, fw, shape, 1.0).M_hat)
design = build_maneuver(motion, fw, shape, 0.5 * bound)
print(f"\ngain bound {bound:.4f}, using kappa = {design.kappa:.4f}")
print("designed velocity:", design.v_star)

rep = spectrum_check(fw.L_bar, design.kappa, design.Lambda_hat, m=2)
print(f"zero eigenvalues: {rep.zero_count}, slowest decay rate: {rep.min_nonzero_real:.4f}")

p0 = np.random.default_rng(7).uniform(-20, 20, 8)
traj = simulate(DynamicsSpec.maneuver(fw, shape, design), p0, dt=0.01, T=30.0)
met = convergence_metrics(traj, fw, shape.z_star(fw), design.v_star)

for t in (0.0, 5.0, 10.0, 30.0):
    k = int(round(t / 0.01))
    print(f"t={t:5.1f}  shape error {met.shape_error[k]:.3e}  velocity error {met.velocity_error[k]:.3e}")
print("final positions:")
print(blocks(traj.final_state, 2))

# a vertical velocity is outside agent 3's span; matrix-valued weights fix that
try:
    design_motion_params(fw, shape, [0.0, 1.0], mode="scalar")
except Exception as exc:
    print("\nscalar design refused:", exc)
mat = design_motion_params(fw, shape, [0.0, 1.0], mode="matrix")
print("matrix block for agent 4 -> 1:\n", mat.values[3, 0])
