# drive a simulated row end to end, then with a glare burst
from rowpilot.sim import (CorruptionParams, EpisodeConfig, Obstacle, WorldConfig, metrics,
                          run_episode)

world = WorldConfig(row_length=20)

# start half a meter off center
ep = EpisodeConfig(start_y=0.5, fast_mode=True)
log = run_episode(world, ep)
m = metrics(log)
print(f"completed={m.completed} steps={m.steps} max|y|={m.max_abs_y:.3f} m")
for i in range(0, len(log), 60):
    print(f"  t={log.t[i]:5.2f}  x={log.x[i]:6.2f}  y={log.y[i]:+.3f}  w={log.omega[i]:+.3f}")

# 2 s of saturation, the classifier carries the robot through
ep = EpisodeConfig(corruption_start=6, corruption_end=8, fast_mode=True)
log = run_episode(world, ep, corruption=CorruptionParams(saturation_rate=0.9, saturation_mm=1500))
m = metrics(log)
print(f"with glare: completed={m.completed} fallback_fraction={m.fallback_fraction:.3f}")

# a post in the middle of the row
log = run_episode(WorldConfig(row_length=20, obstacles=(Obstacle(3, 0, 0.2),)),
                  EpisodeConfig(fast_mode=True))
print(f"obstacle: stopped={log.stopped} clearance={log.final_clearance:.2f} m at x={log.final_pose.x:.2f}")
