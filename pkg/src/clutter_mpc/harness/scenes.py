"""Hand-built scenes for the fragile-region and soft-obstacle experiments.

Both assume the default arm and start pose; the geometry was laid out along
the free-space path of the end effector from that pose to the goal.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..config import Config
from ..mpc import FragileRegion
from ..world import Obstacle, WorldState

__all__ = ["Scene", "fragile_region_scene", "soft_obstacle_scene"]


@dataclass(frozen=True)
class Scene:
    world: WorldState
    goal: tuple[float, float]
    config: Config


def fragile_region_scene(config: Config = Config(), fragile_thresh: float = 2.0) -> Scene:
    """Two fixed posts brushed by the forearm; the first one sits in a fragile circle."""
    fragile = (0.31, -0.07)
    obstacles = [
        Obstacle(fragile, 0.01, "fixed", config.world.surface_stiffness),
        Obstacle((0.36, -0.15), 0.01, "fixed", config.world.surface_stiffness),
    ]
    cfg = config.replace(controller={
        "fragile_regions": (FragileRegion(fragile, 0.04, fragile_thresh),),
    })
    world = WorldState.at_rest(np.array(config.harness.initial_theta), obstacles)
    return Scene(world, (0.45, 0.1), cfg)


def soft_obstacle_scene(config: Config = Config(), stiffness: float = 200.0, online: bool = False,
                        depth: float = 0.045) -> Scene:
    """A large soft post right behind the goal.

    The goal lies ``depth`` inside the contact distance along the approach
    direction, so reaching it means compressing the post by at least
    ``depth - success_eps``.
    """
    goal = np.array([0.45, 0.1])
    approach = np.array([0.6, 0.8])
    radius = 0.05
    center = goal + (radius + config.arm.link_radius - depth) * approach
    obstacle = Obstacle((float(center[0]), float(center[1])), radius, "fixed", stiffness)
    cfg = config.replace(controller={"online_stiffness": online})
    world = WorldState.at_rest(np.array(config.harness.initial_theta), [obstacle])
    return Scene(world, (float(goal[0]), float(goal[1])), cfg)
