"""Parameterised desk-scale scenes and the seeded 12-scene benchmark suite.

Objects are built from axis-aligned boxes in a frame whose origin sits on
the object's bottom line. Top-down pinches on upright posts are the only
grasps that survive the table, so post placement relative to the centre of
mass decides grasp quality.
"""

from __future__ import annotations

from typing import Optional, Sequence

import numpy as np

from .arm import ArmModel
from .geom import ConvexPolygon, Pose2, Shape2, box_shape
from .scene import Obstacle, Params, Scene, Table

Box = tuple[float, float, float, float]


def boxes_shape(boxes: Sequence[Box], mass: float, name: str = "") -> Shape2:
    parts = tuple(ConvexPolygon.box(*b) for b in boxes)
    area = sum(p.area for p in parts)
    return Shape2(parts, mass / area, name)


def hammer(handle: float = 0.22, head_w: float = 0.12, head_h: float = 0.06, post_h: float = 0.05,
           knob_h: float = 0.05, mass: float = 0.4, name: str = "hammer") -> Shape2:
    """Heavy head with a grip post on top, thin handle ending in a knob.

    The origin is under the head post; the handle runs towards -x.
    """
    hw = 0.5 * head_w
    end = -hw - handle
    return boxes_shape([
        (-hw, 0.0, hw, head_h),
        (-0.01, head_h, 0.01, head_h + post_h),
        (end, 0.0, -hw, 0.008),
        (end, 0.008, end + 0.02, 0.008 + knob_h),
    ], mass, name)


def tabbed_block(width: float = 0.16, post_h: float = 0.06, tab: float = 0.05, wall_h: float = 0.07,
                 post_x: float = 0.0, mass: float = 0.4, name: str = "tabbed") -> Shape2:
    """Base plate with a centre post and a side tab reachable by a horizontal approach."""
    hw = 0.5 * width
    return boxes_shape([
        (-hw, 0.0, hw, 0.015),
        (post_x - 0.01, 0.015, post_x + 0.01, 0.015 + post_h),
        (-hw, 0.015, -hw + 0.015, wall_h),
        (-hw - tab, wall_h - 0.015, -hw, wall_h),
    ], mass, name)


def post_bar(length: float = 0.2, post_h: float = 0.05, posts: Sequence[float] = (0.0,), mass: float = 0.4,
             name: str = "bar") -> Shape2:
    """Plate with upright posts at the given x offsets."""
    hl = 0.5 * length
    boxes = [(-hl, 0.0, hl, 0.015)]
    boxes += [(x - 0.01, 0.015, x + 0.01, 0.015 + post_h) for x in posts]
    return boxes_shape(boxes, mass, name)


def l_shape(length: float = 0.18, height: float = 0.10, upright: float = 0.04, mass: float = 0.4,
            name: str = "L") -> Shape2:
    """Plate with a thick upright at the right end (the heavy grip) and a knob at the left end."""
    hl = 0.5 * length
    return boxes_shape([
        (-hl, 0.0, hl, 0.015),
        (hl - upright, 0.015, hl, height),
        (-hl, 0.015, -hl + 0.02, 0.06),
    ], mass, name)


def t_shape(width: float = 0.14, stem_h: float = 0.06, mass: float = 0.4, name: str = "T") -> Shape2:
    """Inverted T: wide foot with a tall stem."""
    hw = 0.5 * width
    return boxes_shape([(-hw, 0.0, hw, 0.02), (-0.01, 0.02, 0.01, 0.02 + stem_h)], mass, name)


def _scene(target: Shape2, start_x: float, goal_x: float, obstacles=(), seed: int = 0, name: str = "",
           params: Optional[Params] = None, arm: Optional[ArmModel] = None) -> Scene:
    table = Table()
    th = 0.0
    start = Pose2(start_x, table.height - target.bottom_offset(th), th)
    goal = Pose2(goal_x, table.height - target.bottom_offset(th), th)
    return Scene(table, arm or ArmModel(), tuple(obstacles), target, start, goal, params or Params(), seed,
                 name=name)


def _box_obstacle(x0, y0, x1, y1, name="obstacle") -> Obstacle:
    return Obstacle(box_shape(x1 - x0, y1 - y0, x0=0.0, y0=0.0, name=name), Pose2(x0, y0, 0.0))


def hammer_scene(seed: int = 0, head_x: float = 0.85, goal_x: float = 0.42, **kw) -> Scene:
    """Hammer head beyond reach; only the handle knob can be grasped from the start."""
    return _scene(hammer(**kw), head_x, goal_x, seed=seed, name="hammer")


def shelf_scene(target: Shape2, start_x: float, goal_x: float, seed: int = 0, name: str = "shelf",
                post_x: float = 0.0, span: tuple[float, float] = (-0.03, 0.10), height: float = 0.115) -> Scene:
    """Low shelf over the object's post: no top-down approach, no lift in place."""
    x0, x1 = start_x + post_x + span[0], start_x + post_x + span[1]
    shelf = _box_obstacle(x0, height, x1, height + 0.02, "shelf")
    return _scene(target, start_x, goal_x, [shelf], seed, name)


def adjacent_scene(target: Shape2, start_x: float, goal_x: float, gap: float, seed: int = 0,
                   name: str = "adjacent") -> Scene:
    """Tall box right of the object, too close for a finger beside the grip post."""
    _, _, bx1, _ = target.local_bounds
    x0 = start_x + bx1 + gap
    return _scene(target, start_x, goal_x, [_box_obstacle(x0, 0.0, x0 + 0.05, 0.25, "box")], seed, name)


def _random_scene(rng: np.random.Generator, index: int, seed: int) -> Scene:
    family = index % 4
    mass = float(rng.uniform(0.3, 0.5))
    if family == 0:
        target = post_bar(float(rng.uniform(0.14, 0.22)), float(rng.uniform(0.045, 0.06)), (0.0,), mass,
                          f"bar{index}")
    elif family == 1:
        target = t_shape(float(rng.uniform(0.10, 0.16)), float(rng.uniform(0.05, 0.07)), mass, f"T{index}")
    elif family == 2:
        target = l_shape(float(rng.uniform(0.16, 0.2)), float(rng.uniform(0.09, 0.11)), 0.04, mass, f"L{index}")
    else:
        target = hammer(float(rng.uniform(0.12, 0.18)), float(rng.uniform(0.10, 0.12)), 0.06, 0.05, 0.05, mass,
                        f"mallet{index}")
    x0, _, x1, _ = target.local_bounds
    start_x = float(rng.uniform(0.30 - x0, 0.70))
    goal_x = float(rng.uniform(0.28 - x0, 0.66))
    if abs(goal_x - start_x) < 0.05:
        goal_x = float(np.clip(start_x + 0.15 * (1 if start_x < 0.5 else -1), 0.28 - x0, 0.66))
    return _scene(target, start_x, goal_x, seed=seed, name=f"random-{index}")


def generate_scene_suite(seed: int = 0) -> list[Scene]:
    """Six constructed hard scenes followed by six random ones."""
    rng = np.random.default_rng(seed)
    base = int(rng.integers(0, 2**31 - 1))
    jitter = lambda s: float(rng.uniform(-s, s))
    hard = [
        shelf_scene(tabbed_block(0.16, 0.06, 0.05, 0.07, mass=0.4, name="tabbed-a"), 0.62 + jitter(0.02), 0.36,
                    base + 1, "shelf-a"),
        shelf_scene(tabbed_block(0.18, 0.055, 0.05, 0.075, mass=0.45, name="tabbed-b"), 0.64 + jitter(0.02), 0.38,
                    base + 2, "shelf-b"),
        shelf_scene(tabbed_block(0.15, 0.065, 0.055, 0.07, post_x=0.01, mass=0.35, name="tabbed-c"),
                    0.60 + jitter(0.02), 0.34, base + 3, "shelf-c", post_x=0.01),
        _scene(hammer(0.22, 0.12, 0.06, 0.05, 0.05, 0.4, "hammer-a"), 0.85 + jitter(0.01), 0.42, seed=base + 4,
               name="reach-a"),
        _scene(hammer(0.24, 0.11, 0.06, 0.05, 0.045, 0.35, "hammer-b"), 0.86 + jitter(0.01), 0.45, seed=base + 5,
               name="reach-b"),
        adjacent_scene(l_shape(0.18, 0.10, 0.04, 0.4, "L-adjacent"), 0.55 + jitter(0.02), 0.35, 0.02, base + 6,
                       "adjacent"),
    ]
    rand = [_random_scene(rng, i, base + 7 + i) for i in range(6)]
    return hard + rand
