"""Static and mobile network topologies.

Static topologies answer neighbour queries arithmetically (trees, grids) or
from a prebuilt adjacency table (graphs).  The mobile topology implements the
random-waypoint model: each device picks a uniform destination in the area
and a uniform speed, moves there in a straight line, then repeats.  Neighbour
sets are recomputed on a fixed tick from pairwise distances against the radio
range.
"""

from __future__ import annotations

import numpy as np


class StaticTopology:
    is_mobile = False

    def __init__(self, n: int):
        self.n = n

    def neighbors(self, i: int) -> tuple[int, ...]:
        raise NotImplementedError


class TreeTopology(StaticTopology):
    """Complete k-ary tree, heap-indexed: children of i are k(i-1)+2 .. k(i-1)+k+1."""

    def __init__(self, n: int, arity: int):
        super().__init__(n)
        self.arity = arity

    def parent(self, i: int) -> int | None:
        if i <= 1:
            return None
        return (i - 2) // self.arity + 1

    def neighbors(self, i: int) -> tuple[int, ...]:
        k = self.arity
        first = k * (i - 1) + 2
        out = [] if i == 1 else [(i - 2) // k + 1]
        out.extend(range(first, min(first + k, self.n + 1)))
        return tuple(out)

    def depth(self) -> int:
        d, reach = 0, 1
        total = 1
        while total < self.n:
            reach *= self.arity
            total += reach
            d += 1
        return d


class GridTopology(StaticTopology):
    """Row-major 4-neighbour lattice with the given column count."""

    def __init__(self, n: int, cols: int):
        super().__init__(n)
        self.cols = cols

    def neighbors(self, i: int) -> tuple[int, ...]:
        c = self.cols
        idx = i - 1
        out = []
        if idx % c > 0:
            out.append(i - 1)
        if idx % c < c - 1 and i + 1 <= self.n:
            out.append(i + 1)
        if idx >= c:
            out.append(i - c)
        if i + c <= self.n:
            out.append(i + c)
        return tuple(sorted(out))


class GraphTopology(StaticTopology):
    def __init__(self, n: int, edges):
        super().__init__(n)
        adj: dict[int, set[int]] = {i: set() for i in range(1, n + 1)}
        for a, b in edges:
            adj[a].add(b)
            adj[b].add(a)
        self._adj = {i: tuple(sorted(peers)) for i, peers in adj.items()}

    def neighbors(self, i: int) -> tuple[int, ...]:
        return self._adj[i]


class MobileTopology:
    """Random-waypoint mobility over a rectangular area with a fixed radio range."""

    is_mobile = True

    def __init__(self, n: int, area: tuple[float, float], radio_range: float,
                 speed: tuple[float, float], rng: np.random.Generator):
        self.n = n
        self.area = np.asarray(area, dtype=float)
        self.range = float(radio_range)
        self.speed_lo, self.speed_hi = speed
        self.positions = rng.uniform(0, 1, size=(n, 2)) * self.area
        self.waypoints = rng.uniform(0, 1, size=(n, 2)) * self.area
        self.speeds = rng.uniform(self.speed_lo, self.speed_hi, size=n)
        self._adj = self._compute_adj()
        self._rows: dict[int, tuple[int, ...]] = {}

    def _compute_adj(self) -> np.ndarray:
        diff = self.positions[:, None, :] - self.positions[None, :, :]
        d2 = np.einsum("ijk,ijk->ij", diff, diff)
        adj = d2 <= self.range * self.range
        np.fill_diagonal(adj, False)
        return adj

    def step(self, dt: float, rng: np.random.Generator) -> list[tuple[int, int]]:
        """Advance all devices by ``dt``; return newly adjacent (a, b) pairs."""
        vec = self.waypoints - self.positions
        dist = np.sqrt(np.einsum("ij,ij->i", vec, vec))
        travel = self.speeds * dt
        arrived = dist <= travel
        moving = ~arrived & (dist > 0)
        self.positions[arrived] = self.waypoints[arrived]
        if moving.any():
            scale = (travel[moving] / dist[moving])[:, None]
            self.positions[moving] += vec[moving] * scale
        k = int(arrived.sum())
        if k:
            self.waypoints[arrived] = rng.uniform(0, 1, size=(k, 2)) * self.area
            self.speeds[arrived] = rng.uniform(self.speed_lo, self.speed_hi, size=k)
        old = self._adj
        self._adj = self._compute_adj()
        self._rows.clear()
        fresh = self._adj & ~old
        pairs = np.argwhere(np.triu(fresh, k=1))
        return [(int(a) + 1, int(b) + 1) for a, b in pairs]

    def neighbors(self, i: int) -> tuple[int, ...]:
        row = self._rows.get(i)
        if row is None:
            row = tuple(int(j) + 1 for j in np.flatnonzero(self._adj[i - 1]))
            self._rows[i] = row
        return row


def build_topology(cfg, rng: np.random.Generator):
    spec = cfg.topology
    kind = spec["kind"]
    if kind == "tree":
        return TreeTopology(cfg.n, int(spec["arity"]))
    if kind == "grid":
        return GridTopology(cfg.n, int(spec["cols"]))
    if kind == "graph":
        return GraphTopology(cfg.n, spec["edges"])
    if kind == "mobile":
        return MobileTopology(
            cfg.n,
            area=tuple(spec["area"]),
            radio_range=float(spec["range"]),
            speed=tuple(spec.get("speed", (5.0, 15.0))),
            rng=rng,
        )
    raise ValueError(f"unknown topology kind {kind!r}")
