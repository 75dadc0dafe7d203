# velocity commands across the image width
import numpy as np

from rowpilot.control import ControllerParams, angular_velocity, linear_velocity

p = ControllerParams(max_lin_vel=1.0, max_ang_vel=1.0, frame_width=640)

for d in (-320, -160, 0, 160, 320):
    print(f"d={d:5d}  v={linear_velocity(d, p):.3f}  w={angular_velocity(d, p):+.3f}")

# the two curves always add up to one
ds = np.linspace(-320, 320, 9)
total = [linear_velocity(d, p) + abs(angular_velocity(d, p)) for d in ds]
print("v + |w| :", np.round(total, 12))

# halve the turning authority, keep the speed profile
slow = ControllerParams(max_lin_vel=1.0, max_ang_vel=0.5)
print("w at d=160 with max_ang 0.5:", angular_velocity(160, slow))
