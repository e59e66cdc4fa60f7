"""Reach past a post inside a fragile circle with a lower force threshold.

Prints the largest contact force seen inside and outside the circle.
"""
import argparse
from pathlib import Path

from clutter_mpc.config import load_config
from clutter_mpc.harness.reach import TrialLog, make_controller, run_reach
from clutter_mpc.harness.scenes import fragile_region_scene


class Recorder:
    def __init__(self, inner):
        self.inner = inner
        self.seen = []

    def step(self, theta, phi, skin, goal=None):
        self.seen.extend((r.center, r.normal_force) for r in skin)
        return self.inner.step(theta, phi, skin, goal=goal)


def main():
    p = argparse.ArgumentParser(description=__doc__)
    p.add_argument("--config", type=Path)
    p.add_argument("--fragile-thresh", type=float, default=2.0)
    p.add_argument("--log", type=Path, help="write the step log here (JSON lines)")
    args = p.parse_args()

    scene = fragile_region_scene(load_config(args.config), args.fragile_thresh)
    region = scene.config.controller.fragile_regions[0]
    ctrl = Recorder(make_controller("mpc", scene.config, scene.goal))
    log = TrialLog.open(args.log) if args.log else None
    out, _ = run_reach(scene.world, ctrl, scene.config, scene.goal, log=log)
    if log:
        log.close()
    inside = [f for c, f in ctrl.seen if region.contains(c)]
    outside = [f for c, f in ctrl.seen if not region.contains(c)]
    print(f"outcome {out.reason} after {out.duration:.2f} s")
    print(f"max force inside fragile circle  {max(inside, default=0.0):.2f} N (threshold {region.f_thresh:g} N)")
    print(f"max force outside fragile circle {max(outside, default=0.0):.2f} N "
          f"(threshold {scene.config.controller.f_thresh:g} N)")


if __name__ == "__main__":
    main()
