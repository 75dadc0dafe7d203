# find the end of the row in a rendered depth frame
import numpy as np

from rowpilot.depth import (DepthPipelineParams, check_obstacle, detect_row_end,
                            extract_components, far_field_mask)
from rowpilot.sim import Hole, Intrinsics, Obstacle, Pose, WorldConfig, render_depth

intr = Intrinsics()
world = WorldConfig(row_length=30, holes=(Hole("left", 3.0, 1.0, 0.8),))
params = DepthPipelineParams()

pose = Pose(0.0, 0.3, 0.15)   # a bit left of center, pointing left
frame = render_depth(world, pose, intr, camera_height=0.4, camera_offset=0.2)
print("frame", frame.shape, frame.dtype, "min/max mm:", frame.min(), frame.max())

mask = far_field_mask(frame, params.t_distance, params.min_far_depth)
print("far-field pixels:", int(mask.sum()))

boxes = sorted(extract_components(mask), key=lambda b: -b.box_area)
for b in boxes[:4]:
    print("  component", (b.x_min, b.y_min, b.x_max, b.y_max), "area", b.box_area)

det = detect_row_end(frame, params)
print("window center x:", det.center_x, "-> offset", det.center_x - intr.width / 2)

# glare: a uniformly close frame yields no window
print("saturated frame:", detect_row_end(np.full_like(frame, 600), params))

# something on the path
blocked = render_depth(WorldConfig(obstacles=(Obstacle(0.6, 0.0, 0.2),)), Pose(), intr)
print("obstacle ahead:", check_obstacle(blocked, params))
