"""The four-element shark-fin array and its polarimetric patterns.

Prints an ASCII azimuth cut of each element's vertical-polarization gain
and demonstrates the (V, H) basis conventions used throughout the tracer.
"""

import math

import numpy as np

from v2vchan.antenna import (angles_to_direction, default_sharkfin_array,
                             pattern_gain, vh_basis)

arr = default_sharkfin_array()
names = ["1 left", "2 back", "3 front", "4 right"]

print("azimuth cut of |g_V| in dB (element frame reorientation by boresight):\n")
az_grid = np.arange(0, 360, 15)
header = "az".rjust(5) + "".join(f"{a:>7d}" for a in az_grid)
print(header)
for name, el in zip(names, arr.elements):
    row = [name.rjust(5)]
    for az in az_grid:
        g = el.pattern.sample((az - el.boresight_az_deg) % 360.0, 0.0)[0]
        row.append(f"{20 * math.log10(abs(g) + 1e-12):7.1f}")
    print("".join(row))

print("\npolarization basis for a horizontal +x ray:")
e_v, e_h = vh_basis(np.array([[1.0, 0.0, 0.0]]))
print(f"  e_V = {e_v[0]}   (up)")
print(f"  e_H = {e_h[0]}   (horizontal)")

d = angles_to_direction(45.0, 10.0)
print(f"\nfront element gain toward az 45 deg, el 10 deg: "
      f"{pattern_gain(arr.elements[2].pattern, d)}")
