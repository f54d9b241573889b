"""A full motion: PID on the observed error driving IK length commands.

Steps the reference robot 10 mm sideways and prints the control trace
until the observed error crosses the 3 mm convergence tolerance.

Run:  python3 demos/04_closed_loop_move.py
"""

from softteleop import ModuleSpec, NoiseModel, Observer, Plant, TargetCommand
from softteleop.control import run_to_target

specs = [ModuleSpec(), ModuleSpec()]
plant = Plant(specs, noise=NoiseModel.silent())
observer = Observer(specs)
target = TargetCommand(module_index=1, target_mm=(10.0, 0.0, 85.0))

print(f"target: platform {target.module_index} at {target.target_mm}")
outcome, trace = run_to_target(plant, observer, target)

print(f"outcome: {outcome} after {(trace[-1].t_ms - trace[0].t_ms) / 1000:.1f} s\n")
print("  t_ms    est_x    est_z    |error|   first 3 commanded lengths")
for entry in trace:
    cmd = ("-" if entry.command_mm is None
           else " ".join(f"{v:5.1f}" for v in entry.command_mm[:3]))
    print(f"{entry.t_ms:6.0f}  {entry.estimate_mm[0]:7.3f}  {entry.estimate_mm[2]:7.3f}"
          f"  {entry.error_norm_mm:7.3f}   {cmd}")

print("\nevery commanded length stayed inside [30, 60] mm:",
      all(
          30.0 <= v <= 60.0
          for e in trace if e.command_mm
          for v in e.command_mm
      ))
