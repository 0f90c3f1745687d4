"""Free-space sanity check: the pipeline against the Friis formula.

Traces a line-of-sight link at increasing distance, synthesizes the channel
tensor, and compares the resulting channel gain with the textbook free-space
loss.  Run:

    python demos/01_free_space_and_friis.py
"""

import math

from v2vchan.antenna import isotropic_array
from v2vchan.channel import PathInterpolator, SimConfig, synthesize_tensor
from v2vchan.metrics import channel_gain, compute_apdp
from v2vchan.pipeline import trace_trajectory
from v2vchan.raytracer import SPEED_OF_LIGHT, TracerConfig
from v2vchan.scene import straight_trajectory
from v2vchan.scenarios import free_space_scene

# default 769 bins span 3.2 us of delay, enough for the 400 m sample
sim = SimConfig(fine_dt=1e-3)
scene = free_space_scene()
arr = isotropic_array(1)
lam = SPEED_OF_LIGHT / sim.carrier_frequency

print(f"{'d [m]':>8}  {'pipeline [dB]':>14}  {'Friis [dB]':>11}  {'diff':>8}")
for d in (25.0, 50.0, 100.0, 200.0, 400.0):
    tx = straight_trajectory((0, 0, 1.5), 0.0, 0.0, 0.05, 0.01)
    rx = straight_trajectory((d, 0, 1.5), 0.0, 0.0, 0.05, 0.01)
    snaps = trace_trajectory(scene, tx, rx, TracerConfig(), sim.coarse_trace_dt)
    tensor = synthesize_tensor(PathInterpolator(snaps), arr, arr, sim)
    gain = channel_gain(compute_apdp(tensor, n_avg=tensor.n_time)).values[0]
    friis = 20 * math.log10(lam / (4 * math.pi * d))
    print(f"{d:8.1f}  {gain:14.3f}  {friis:11.3f}  {gain - friis:8.1e}")
