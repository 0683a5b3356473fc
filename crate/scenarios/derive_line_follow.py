#!/usr/bin/env python3
"""Hand-steps the track follower on line_follow.scn and prints the golden
command sequence, one `tick command` pair per line.

The derivation does not use the Rust code. It restates:

* the follower rule: if the cell one cell-size to the robot's left is white
  line and not an obstacle, turn right this tick and go backward the next;
  otherwise go forward;
* the wheel speeds each command asks for (forward and backward at the full
  160 rpm, turns on an arc of curvature 2/m at a third of full speed);
* unicycle motion with the heading taken at the midpoint of the step;
* the sensing order: the command for tick k is chosen from the readings
  taken after tick k-1 moved the robot.

It also checks the margins that make the sequence robust: every sensing
point stays clear of cell borders, and the robot stays far enough from walls
that no proximity ray reads below the stop distance, so the safety
layer never overrides the follower.
"""
import math
import os
import sys

RADIUS = 0.0325
BASE = 0.15
DT = 0.05
MAX_RPM = 160.0
TURN_CURVATURE = 2.0
REFERENCE_CURVATURE = 1.0
STOP_DISTANCE = 0.2
TICKS = 150


def load(path):
    header, rows, in_map = {}, [], False
    for line in open(path):
        line = line.rstrip("\n")
        if in_map:
            if line.strip():
                rows.append(line.rstrip())
        elif line.strip() == "map:":
            in_map = True
        elif line.strip() and not line.lstrip().startswith(";"):
            k, v = (p.strip() for p in line.split("=", 1))
            header[k] = v
    height = len(rows)
    grid = {}
    start = None
    for r, text in enumerate(rows):
        iy = height - 1 - r
        for ix, ch in enumerate(text):
            if ch == "S":
                start, ch = (ix, iy), "."
            grid[(ix, iy)] = ch
    return float(header.get("cell_size", 0.1)), grid, start


def cell(grid, cs, x, y):
    return grid.get((math.floor(x / cs), math.floor(y / cs)), "#")


def border_margin(cs, x, y):
    return min(abs(x / cs - round(x / cs)), abs(y / cs - round(y / cs))) * cs


def nearest_ahead(grid, cs, x, y, heading):
    """Shortest obstacle range over the three front rays, by fine marching."""
    best = math.inf
    for offset in (-10.0, 0.0, 10.0):
        a = heading + math.radians(offset)
        d = 0.0
        while d < 1.0 and cell(grid, cs, x + d * math.cos(a), y + d * math.sin(a)) != "#":
            d += 1e-4
        best = min(best, d)
    return best


def wheel_speeds(command):
    v_max = MAX_RPM * 2 * math.pi / 60 * RADIUS
    if command == "forward":
        return v_max, v_max
    if command == "backward":
        return -v_max, -v_max
    v = v_max / (1 + TURN_CURVATURE / REFERENCE_CURVATURE)
    omega = -v * TURN_CURVATURE  # right turn
    return v - omega * BASE / 2, v + omega * BASE / 2


def main(path):
    cs, grid, (sx, sy) = load(path)
    x, y, heading = (sx + 0.5) * cs, (sy + 0.5) * cs, 0.0
    pending_backward = False
    probe_margin, wall_margin = math.inf, math.inf
    out = []
    for tick in range(TICKS):
        lx, ly = x + cs * math.cos(heading + math.pi / 2), y + cs * math.sin(heading + math.pi / 2)
        left = cell(grid, cs, lx, ly)
        if pending_backward:
            command, pending_backward = "backward", False
        else:
            probe_margin = min(probe_margin, border_margin(cs, lx, ly))
            if left == "=":
                command, pending_backward = "turn_right", True
            else:
                command = "forward"
        out.append(f"{tick} {command}")

        vl, vr = wheel_speeds(command)
        v, omega = (vl + vr) / 2, (vr - vl) / BASE
        mid = heading + omega * DT / 2
        x, y = x + v * DT * math.cos(mid), y + v * DT * math.sin(mid)
        heading += omega * DT
        assert cell(grid, cs, x, y) == ".", f"tick {tick}: robot left free cells"
        wall_margin = min(wall_margin, nearest_ahead(grid, cs, x, y, heading))

    assert probe_margin > 1e-6, f"a left probe lands within {probe_margin} m of a cell border"
    assert wall_margin > STOP_DISTANCE + 0.01, f"a proximity ray reads {wall_margin} m"
    print("\n".join(out))
    print(
        f"# closest left probe to a cell border: {probe_margin:.6f} m; shortest proximity range: {wall_margin:.4f} m",
        file=sys.stderr,
    )


if __name__ == "__main__":
    main(sys.argv[1] if len(sys.argv) > 1 else os.path.join(os.path.dirname(os.path.abspath(__file__)), "line_follow.scn"))
