#
# How far can the sensors be rotated before the formation stops converging?
# Sweep a common-magnitude, alternating-sign misalignment on the grid.
#
import numpy as np

from formation_lab import DynamicsSpec, DivergenceError, Framework, Graph, SensorModel, decompose_reference, simulate
from formation_lab.maneuver import spectrum_check

grid = 10.0 * np.array([[-1, -1], [-1, 0], [-1, 1], [0, 1], [0, 0], [0, -1], [1, -1], [1, 0], [1, 1]])
fw = Framework(Graph(9, [(1, 2), (2, 3), (3, 4), (4, 5), (5, 6), (5, 8), (8, 7), (8, 9)]), 2)
shape = decompose_reference(grid.ravel(), 2)
p0 = np.random.default_rng(0).uniform(-20, 20, 18)

print(" theta/pi   slowest Re   stable   outcome")
for frac in (0.0, 0.25, 0.45, 0.5, 0.55, 0.75):
    theta = [frac * np.pi * (-1) ** i for i in range(9)]
    spec = DynamicsSpec.faulty(fw, shape, SensorModel.from_angles(np.ones(9), theta))
    rep = spectrum_check(spec.system_matrix(), m=2)
    try:
        traj = simulate(spec, p0, 0.01, 100.0)
        outcome = f"|p(100)| = {np.linalg.norm(traj.final_state):.3e}"
    except DivergenceError as exc:
        outcome = f"diverged at t = {exc.time:.2f}"
    print(f"  {frac:5.2f}   {rep.min_nonzero_real:+.3e}   {str(rep.stable):6s}   {outcome}")

# at exactly a quarter turn the modes sit on the imaginary axis: no decay,
# no exponential blow-up either, so the state only grows slowly
