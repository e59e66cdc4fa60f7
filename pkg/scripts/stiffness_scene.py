"""Time-to-goal against a soft post with and without online stiffness estimation."""
import argparse
from pathlib import Path

from clutter_mpc.config import load_config
from clutter_mpc.harness.reach import make_controller, run_reach
from clutter_mpc.harness.scenes import soft_obstacle_scene


def main():
    p = argparse.ArgumentParser(description=__doc__)
    p.add_argument("--config", type=Path)
    p.add_argument("--stiffness", type=float, default=200.0, help="post surface stiffness [N/m]")
    p.add_argument("--depth", type=float, default=0.045, help="goal depth inside the post [m]")
    args = p.parse_args()

    config = load_config(args.config)
    for online in (False, True):
        scene = soft_obstacle_scene(config, args.stiffness, online, args.depth)
        ctrl = make_controller("mpc", scene.config, scene.goal)
        out, _ = run_reach(scene.world, ctrl, scene.config, scene.goal)
        label = "online estimate " if online else "static k_default"
        print(f"{label}: {out.reason} in {out.duration:.2f} s, max force {out.max_force:.2f} N")


if __name__ == "__main__":
    main()
