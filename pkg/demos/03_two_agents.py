#
# Smallest case: one agent over-reads distances by a factor a.
# The pair shrinks (or stretches) and walks off together.
#
import numpy as np

from formation_lab import DynamicsSpec, Framework, Graph, SensorModel, decompose_reference, simulate, two_agent_residual

fw = Framework(Graph(2, [(1, 2)]), 2)
shape = decompose_reference([0.5, 0.0, -0.5, 0.0], 2)
z12 = shape.z_star(fw)

print(" a     predicted z12      simulated z12      predicted drift    simulated drift")
for a in (0.5, 1.0, 2.0, 3.0):
    z_pred, v_pred = two_agent_residual(a, z12)
    spec = DynamicsSpec.faulty(fw, shape, SensorModel.from_angles([1.0, a], [0.0, 0.0]))
    traj = simulate(spec, [3.0, -1.0, -2.0, 4.0], 0.01, 30.0)
    z_sim = fw.B_bar.T @ traj.final_state
    v_sim = traj.velocities[-1][:2]
    print(f"{a:4.1f}  {z_pred[0]:8.4f}          {z_sim[0]:8.4f}          {v_pred[0]:8.4f}          {v_sim[0]:8.4f}")
