"""Why the height channel gets a Kalman filter and not a mean filter.

Simulates a TOF stream with sporadic spikes and compares the raw
readings, windowed means and the scalar Kalman filter.

Run:  python3 demos/02_height_filtering.py
"""

import math

import numpy as np

from softteleop import KalmanParams, filter_series, mean_filter

rng = np.random.default_rng(42)
truth = 40.0
n = 2000
zs = truth + rng.normal(0.0, 0.3, n)
spikes = rng.random(n) < 0.05
zs[spikes] += 20.0 * np.sign(rng.random(int(spikes.sum())) - 0.5)

def rms(x):
    return math.sqrt(float(np.mean((np.asarray(x) - truth) ** 2)))

print(f"constant 40 mm signal, {int(spikes.sum())} spikes in {n} samples")
print(f"raw RMS error:            {rms(zs):6.3f} mm")

for w in (3, 5, 15, 51):
    means = [mean_filter(zs[max(0, i - w + 1):i + 1]) for i in range(n)]
    print(f"mean filter, window {w:3d}:  {rms(means):6.3f} mm  (lag {w // 2} samples)")

params = KalmanParams(q=0.01, r=0.40, x0=float(zs[0]), p0=0.40)
est = filter_series(params, list(zs))
print(f"Kalman q=0.01 r=0.40:     {rms(est):6.3f} mm  (no window, 1-sample latency)")

print("\nworst single spike, before and after:")
i = int(np.argmax(np.abs(zs - truth)))
print(f"  sample {i}: raw {zs[i]:.2f} mm -> filtered {est[i]:.2f} mm")
