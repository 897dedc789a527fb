"""Hand-built instances shared by several test modules."""
import math

import pytest

from rearrange.geometry import Disc, Pose, Workspace
from rearrange.model import Instance, ObjectSpec


def disc_instance(starts, goals, r=1.0, ws=(10.0, 10.0)):
    objs = [ObjectSpec(k, Disc(r)) for k in range(len(starts))]
    return Instance(Workspace(*ws), objs,
                    [Pose(x, y, 0.0) for x, y in starts],
                    [Pose(x, y, 0.0) for x, y in goals])


def three_cycle():
    # 0 -> 1 -> 2 -> 0
    return disc_instance([(2, 2), (5, 2), (8, 2)], [(5, 2), (8, 2), (2, 2)])


def worked_three():
    # o2's goal covers o1 and o3; o1 needs o2's start; o3's goal touches o1's start
    return disc_instance([(3.5, 5), (5, 7), (6.5, 5)], [(5, 7), (5, 5), (3.5, 3.2)])


def k3_plus_one():
    """Three discs whose goals each cover the other two starts, plus a free mover."""
    side, push = 2.2, 1.0
    cx, cy = 5.0, 5.0
    circ = side / math.sqrt(3)
    starts, goals = [], []
    for k in range(3):
        a = math.pi / 2 + 2 * math.pi * k / 3
        starts.append((cx + circ * math.cos(a), cy + circ * math.sin(a)))
    for k in range(3):
        # goal of k sits beyond the midpoint of the opposite edge
        j, m = (k + 1) % 3, (k + 2) % 3
        mx, my = (starts[j][0] + starts[m][0]) / 2, (starts[j][1] + starts[m][1]) / 2
        d = math.hypot(mx - cx, my - cy)
        goals.append((mx + push * (mx - cx) / d, my + push * (my - cy) / d))
    starts.append((1.5, 1.5))
    goals.append((8.5, 8.5))
    return disc_instance(starts, goals)


def snug_swap():
    # two unit discs filling a 4.2 x 2.1 box, trading places: no room for a buffer
    return disc_instance([(1.05, 1.05), (3.15, 1.05)], [(3.15, 1.05), (1.05, 1.05)], ws=(4.2, 2.1))


@pytest.fixture
def cycle_inst():
    return three_cycle()


def pytest_terminal_summary(terminalreporter):
    lines = []
    for key in ("passed", "failed"):
        for rep in terminalreporter.stats.get(key, []):
            for name, value in getattr(rep, "user_properties", []):
                if name == "criterion":
                    lines.append(value)
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in sorted(lines, key=lambda s: int(s.split()[1].rstrip(":"))):
            terminalreporter.write_line(line)
