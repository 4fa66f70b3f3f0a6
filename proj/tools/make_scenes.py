"""Writes the scripted scenes under data/scenes."""
import json
import math
from pathlib import Path

OUT = Path(__file__).resolve().parent.parent / "data" / "scenes"

# Walls and ceiling so every camera ray returns a depth.
ROOM = [
    {"kind": "box", "center": [6.1, 0.0, 2.5], "yaw": 0.0, "size": [0.2, 12.4, 5.0]},
    {"kind": "box", "center": [-6.1, 0.0, 2.5], "yaw": 0.0, "size": [0.2, 12.4, 5.0]},
    {"kind": "box", "center": [0.0, 6.1, 2.5], "yaw": 0.0, "size": [12.4, 0.2, 5.0]},
    {"kind": "box", "center": [0.0, -6.1, 2.5], "yaw": 0.0, "size": [12.4, 0.2, 5.0]},
    {"kind": "box", "center": [0.0, 0.0, 5.1], "yaw": 0.0, "size": [12.4, 12.4, 0.2]},
]

FURNITURE = ROOM + [
    {"kind": "box", "center": [-2.6, 2.6, 0.375], "yaw": 0.3, "size": [1.2, 0.8, 0.75]},
    {"kind": "box", "center": [2.7, -2.7, 0.9], "yaw": 0.0, "size": [0.6, 0.5, 1.8]},
    {"kind": "vertical_capsule", "center": [-2.8, -2.4, 0.45], "radius": 0.25, "height": 0.9},
]


def back_and_forth(start, end, frames, period):
    """Keys for a walk start -> end -> start, one leg per `period` frames."""
    keys = []
    for f in range(frames):
        leg, phase = divmod(f, period)
        a, b = (start, end) if leg % 2 == 0 else (end, start)
        s = phase / period
        x = a[0] + s * (b[0] - a[0])
        y = a[1] + s * (b[1] - a[1])
        yaw = math.atan2(b[1] - a[1], b[0] - a[0])
        keys.append([f, round(x, 6), round(y, 6), round(yaw, 6)])
    return keys


def write(name, scene):
    OUT.mkdir(parents=True, exist_ok=True)
    (OUT / name).write_text(json.dumps(scene, indent=1) + "\n")


def main():
    write("empty.json", {"frame_rate": 15, "frames": 10, "floor": True, "primitives": ROOM, "persons": []})

    write("one_person.json", {
        "frame_rate": 15, "frames": 150, "floor": True, "primitives": FURNITURE,
        "persons": [{
            "id": 1, "radius": 0.2, "height": 1.7,
            "track": back_and_forth((-1.5, -1.0), (1.5, 1.0), 150, 75),
            "labels": [[0, 0], [30, 1], [60, 2], [90, 0], [120, 1]],
        }],
    })

    # Persons 1 and 2 pass each other in parallel lanes 1.6 m apart; person 3
    # walks across both lanes, passing about 1.1 m in front of each.
    write("three_crossing.json", {
        "frame_rate": 15, "frames": 300, "floor": True, "primitives": FURNITURE,
        "persons": [
            {"id": 1, "radius": 0.2, "height": 1.75,
             "track": back_and_forth((-2.5, -0.8), (2.5, -0.8), 300, 150),
             "labels": [[0, 0], [40, 1], [90, 2], [150, 0], [200, 2], [250, 1]]},
            {"id": 2, "radius": 0.21, "height": 1.65,
             "track": back_and_forth((2.5, 0.8), (-2.5, 0.8), 300, 150),
             "labels": [[0, 1], [50, 0], [110, 2], [170, 1], [230, 0]]},
            {"id": 3, "radius": 0.19, "height": 1.8,
             "track": back_and_forth((0.3, -2.5), (0.3, 2.5), 300, 150),
             "labels": [[0, 2], [60, 1], [120, 0], [180, 2], [240, 1]]},
        ],
    })


if __name__ == "__main__":
    main()
