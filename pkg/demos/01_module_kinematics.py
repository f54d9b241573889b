"""Tour of the module kinematics: plates, tilts, lengths, chains.

Run:  python3 demos/01_module_kinematics.py
"""

import math
import time

import numpy as np

from softteleop import (
    ModuleReading,
    ModuleSpec,
    actuator_lengths,
    base_vertices,
    forward_chain,
    rotation_from_imu,
)

spec = ModuleSpec()  # 3 actuators on a 15 mm circle, 30..60 mm strokes
print("one module:", spec)

print("\nactuator feet (base plane):")
print(np.round(base_vertices(spec), 3))

reading = ModuleReading(h_mm=40.0, phi_rad=math.radians(8.0), theta_rad=math.radians(-4.0))
print("\nreading: h=40 mm, phi=8 deg, theta=-4 deg")
print("tilt rotation:\n", np.round(rotation_from_imu(reading.phi_rad, reading.theta_rad), 4))
print("actuator lengths:", np.round(actuator_lengths(spec, reading), 3))

print("\ntwo-module chain at rest (the 85 mm reference robot):")
pose = forward_chain([spec, spec], [ModuleReading(40.0)] * 2)
for i, m in enumerate(pose.modules):
    print(f"  module {i}: base {np.round(m.base_origin, 3)} top {np.round(m.top_center, 3)}")
print("  end effector:", np.round(pose.end_effector, 3))

print("\nsame chain with the lower module tilted 10 deg:")
pose = forward_chain(
    [spec, spec],
    [ModuleReading(40.0, phi_rad=math.radians(10.0)), ModuleReading(40.0)],
)
print("  end effector:", np.round(pose.end_effector, 3))

print("\nnine chained modules, random tilts, timed:")
rng = np.random.default_rng(0)
readings = [
    ModuleReading(h_mm=rng.uniform(35, 55), phi_rad=rng.uniform(-0.17, 0.17),
                  theta_rad=rng.uniform(-0.17, 0.17))
    for _ in range(9)
]
t0 = time.perf_counter()
pose = forward_chain([spec] * 9, readings)
dt = (time.perf_counter() - t0) * 1000
print(f"  end effector {np.round(pose.end_effector, 2)} computed in {dt:.2f} ms")
