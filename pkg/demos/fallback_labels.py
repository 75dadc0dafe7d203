# view classes and the discrete commands, then auto-labeled samples
import math

import numpy as np

from rowpilot.fallback import (FallbackParams, ViewClass, discrete_command, heuristic_classify,
                               oracle_classify, preprocess_frame, sharpness_score)
from rowpilot.sim import EpisodeConfig, Pose, WorldConfig, depth_to_rgb, render_depth, run_episode

world = WorldConfig(row_length=30)
fp = FallbackParams()

for deg in (-30, -10, 0, 10, 30):
    view = oracle_classify(Pose(5, 0, math.radians(deg)), world, fp)
    cmd = discrete_command(view, fp)
    print(f"heading {deg:+3d} deg -> {view.value:6s} v={cmd.linear} w={cmd.angular:+}")

# the same call from the far-field mask alone
mask = np.zeros((120, 160), bool)
mask[10:40, 120:150] = True
print("far field on the right:", heuristic_classify(mask, fp))

# what a classifier would be fed
rgb = depth_to_rgb(render_depth(world, Pose(2, 0, 0.2)))
x = preprocess_frame(rgb)
print("classifier input", x.shape, "range", float(x.min()), float(x.max()))
print("sharpness", round(sharpness_score(rgb), 1))

# harvest while driving
log = run_episode(world, EpisodeConfig(start_theta=0.4, start_y=-0.3, fast_mode=True), harvest=True)
labels = [r.sample.label for r in log.samples]
agree = sum(r.sample.label is r.oracle for r in log.samples)
print(len(labels), "samples:", {v.value: labels.count(v) for v in ViewClass})
print("agree with ground truth:", agree, "/", len(labels))
