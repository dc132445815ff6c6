"""Writes the bundled desk-scale scenes.

Run from this directory: python3 make_scenes.py
The CLI re-emits scenes canonically, so formatting here does not matter.
"""

import json
import math

PI = math.pi


def arm():
    # horizontal three-link arm mounted 0.3 m above the floor on a square base
    joints = [
        {"a": 0.35, "alpha": 0, "d": 0.3, "theta_offset": 0, "limit_lo": -PI, "limit_hi": PI},
        {"a": 0.30, "alpha": 0, "d": 0, "theta_offset": 0, "limit_lo": -PI, "limit_hi": PI},
        {"a": 0.10, "alpha": 0, "d": 0, "theta_offset": 0, "limit_lo": -PI, "limit_hi": PI},
    ]
    links = [
        {"shapes": [{"type": "box", "pose": [0, 0, 0.1, 0, 0, 0], "half_extents": [0.15, 0.15, 0.1]}]},
        {"shapes": [{"type": "capsule", "a": [-0.35, 0, 0], "b": [0, 0, 0], "radius": 0.03}]},
        {"shapes": [{"type": "capsule", "a": [-0.30, 0, 0], "b": [0, 0, 0], "radius": 0.03}]},
        {"shapes": [{"type": "capsule", "a": [-0.10, 0, 0], "b": [-0.02, 0, 0], "radius": 0.025}]},
    ]
    return {"joints": joints, "tool": [0] * 6, "links": links, "self_collision": [[1, 3]], "margin": 0}


def tray(tid, x, y):
    return {
        "id": tid,
        "pose": [x, y, 0.1, 0, 0, 0],
        "shapes": [{"type": "box", "pose": [0, 0, 0, 0, 0, 0], "half_extents": [0.12, 0.12, 0.05]}],
    }


def objects(tid, x, y, grasps=12, offsets=((-0.05, 0.0), (0.05, 0.0))):
    out = []
    for k, (dx, dy) in enumerate(offsets):
        out.append(
            {
                "id": f"o{tid}{'abcdefgh'[k]}",
                "pose": [x + dx, y + dy, 0.18, 0, 0, 0],
                "shapes": [{"type": "sphere", "center": [0, 0, 0], "radius": 0.03}],
                # approach from above the part, any of `grasps` yaw angles
                "grasps": [[0, 0, 0.12, 0, 0, -PI + 2 * PI * g / grasps] for g in range(grasps)],
            }
        )
    return out


def scene(trays, tasks, grid, start, goal, obstacles=(), sigma=0.10):
    return {
        "robot": arm(),
        "world": {"trays": [tray(*t) for t in trays], "obstacles": list(obstacles)},
        "tasks": [{"tray": tid, "objects": objects(tid, x, y)} for tid, x, y in tasks],
        "base_grid": grid,
        "uncertainty": {"sigma": sigma, "model": "boundary", "seed": 7},
        "start": start,
        "goal": goal,
    }


def write(name, doc):
    with open(name, "w") as f:
        json.dump(doc, f, indent=2)
        f.write("\n")


trays4 = [("1", 0.0, 0.6), ("2", 0.55, 0.6), ("3", 2.3, 0.6), ("4", 2.85, 0.6)]
write(
    "demo4.json",
    scene(
        trays4,
        trays4,
        {"origin": [-0.9, -0.5], "cell": 0.05, "width": 94, "height": 48, "heading": 0},
        [-0.8, -0.4],
        [3.7, -0.4],
    ),
)

trays3 = [("1", 0.0, 0.6), ("2", 0.55, 0.6), ("3", 2.3, 0.6)]
write(
    "demo3.json",
    scene(
        trays3,
        trays3,
        {"origin": [-0.9, -0.5], "cell": 0.05, "width": 80, "height": 48, "heading": 0},
        [-0.8, -0.4],
        [3.1, -0.4],
    ),
)

# tray fenced by eight posts that cut through the arm plane
posts = [
    {
        "id": f"post{k}",
        "shapes": [
            {
                "type": "box",
                "pose": [0.45 * math.cos(k * PI / 4), 0.6 + 0.45 * math.sin(k * PI / 4), 0.3, 0, 0, 0],
                "half_extents": [0.03, 0.03, 0.3],
            }
        ],
    }
    for k in range(8)
]
write(
    "walled.json",
    scene(
        [("T", 0.0, 0.6)],
        [("T", 0.0, 0.6)],
        {"origin": [-1.0, -0.4], "cell": 0.05, "width": 40, "height": 40, "heading": 0},
        [-0.9, -0.3],
        [0.9, -0.3],
        obstacles=posts,
    ),
)
