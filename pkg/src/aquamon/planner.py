"""Grid route planning and informative waypoint selection.

Dijkstra over the 8-connected occupancy grid.  Distances are carried as
integer (orthogonal, diagonal) step-count pairs and only converted to
meters at the end, so two routes have equal cost exactly when they use
the same step mix; cost comparisons against a reference implementation
come out bit-identical.

Diagonal moves are refused when either orthogonal cell they cut past is
blocked, which keeps a hull with real width from clipping corners.
"""

from __future__ import annotations

import heapq
import math
from dataclasses import dataclass

import numpy as np

from .errors import GoalBlocked, NoCandidate, NoPath, StartBlocked
from .frames import EnuPoint
from .rasters import OccupancyGrid

SQRT2 = math.sqrt(2.0)

# (drow, dcol, is_diagonal), fixed order for deterministic relaxation
_STEPS = (
    (-1, -1, True), (-1, 0, False), (-1, 1, True),
    (0, -1, False), (0, 1, False),
    (1, -1, True), (1, 0, False), (1, 1, True),
)


@dataclass(frozen=True)
class Route:
    """Ordered cell centers from start to goal and the total length in meters."""

    cells: tuple[EnuPoint, ...]
    cost: float


def step_cost(orth: int, diag: int, cell_size: float) -> float:
    """Length in meters of a route with the given step counts."""
    return (orth + diag * SQRT2) * cell_size


def _shortest_paths(
    grid: OccupancyGrid, start_rc: tuple[int, int]
) -> tuple[dict, dict]:
    """Single-source Dijkstra returning step-count pairs and predecessors."""
    cells = grid.cells
    h, w = cells.shape
    dist: dict[tuple[int, int], tuple[int, int]] = {start_rc: (0, 0)}
    pred: dict[tuple[int, int], tuple[int, int]] = {}
    heap = [(0.0, start_rc[0], start_rc[1], 0, 0)]
    settled: set[tuple[int, int]] = set()
    while heap:
        _, r, c, orth, diag = heapq.heappop(heap)
        if (r, c) in settled or dist.get((r, c)) != (orth, diag):
            continue
        settled.add((r, c))
        for dr, dc, is_diag in _STEPS:
            nr, nc = r + dr, c + dc
            if not (0 <= nr < h and 0 <= nc < w) or not cells[nr, nc]:
                continue
            if is_diag and not (cells[r, nc] and cells[nr, c]):
                continue
            pair = (orth, diag + 1) if is_diag else (orth + 1, diag)
            cost = pair[0] + pair[1] * SQRT2
            old = dist.get((nr, nc))
            if old is None:
                dist[(nr, nc)] = pair
                pred[(nr, nc)] = (r, c)
                heapq.heappush(heap, (cost, nr, nc, pair[0], pair[1]))
                continue
            old_cost = old[0] + old[1] * SQRT2
            if cost < old_cost:
                dist[(nr, nc)] = pair
                pred[(nr, nc)] = (r, c)
                heapq.heappush(heap, (cost, nr, nc, pair[0], pair[1]))
            elif (
                cost == old_cost
                and (nr, nc) not in settled
                and (r, c) < pred[(nr, nc)]
            ):
                pred[(nr, nc)] = (r, c)
    return dist, pred


def plan(grid: OccupancyGrid, start: EnuPoint, goal: EnuPoint) -> Route:
    """Minimum-length route between the cells containing start and goal."""
    if not grid.is_navigable(start):
        raise StartBlocked(f"start {start} is not on a navigable cell")
    if not grid.is_navigable(goal):
        raise GoalBlocked(f"goal {goal} is not on a navigable cell")
    start_rc = grid.cell_of(start)
    goal_rc = grid.cell_of(goal)
    if start_rc == goal_rc:
        return Route(cells=(grid.cell_center(*start_rc),), cost=0.0)

    dist, pred = _shortest_paths(grid, start_rc)
    if goal_rc not in dist:
        raise NoPath(f"no route from cell {start_rc} to cell {goal_rc}")

    chain = [goal_rc]
    while chain[-1] != start_rc:
        chain.append(pred[chain[-1]])
    chain.reverse()
    orth, diag = dist[goal_rc]
    return Route(
        cells=tuple(grid.cell_center(r, c) for r, c in chain),
        cost=step_cost(orth, diag, grid.cell_size),
    )


def inflate(grid: OccupancyGrid, radius: float) -> OccupancyGrid:
    """Block every cell whose center lies within radius of an obstacle center."""
    if radius < 0:
        raise ValueError("inflation radius must be >= 0")
    if radius == 0.0:
        return OccupancyGrid(
            origin=grid.origin, cell_size=grid.cell_size, cells=grid.cells.copy()
        )
    reach = int(math.floor(radius / grid.cell_size + 1e-9))
    blocked = ~grid.cells
    out = grid.cells.copy()
    eps = 1e-9
    for dr in range(-reach, reach + 1):
        for dc in range(-reach, reach + 1):
            if dr == 0 and dc == 0:
                continue
            if math.hypot(dr, dc) * grid.cell_size > radius + eps:
                continue
            shifted = np.zeros_like(blocked)
            src_r = slice(max(0, -dr), blocked.shape[0] - max(0, dr))
            dst_r = slice(max(0, dr), blocked.shape[0] - max(0, -dr))
            src_c = slice(max(0, -dc), blocked.shape[1] - max(0, dc))
            dst_c = slice(max(0, dc), blocked.shape[1] - max(0, -dc))
            shifted[dst_r, dst_c] = blocked[src_r, src_c]
            out &= ~shifted
    return OccupancyGrid(origin=grid.origin, cell_size=grid.cell_size, cells=out)


def select_next_informative(
    gp_models: dict,
    grid: OccupancyGrid,
    current: EnuPoint,
    budget: float,
    candidate_stride: int = 4,
) -> EnuPoint:
    """Reachable cell center where the fitted models are least certain.

    Scores each candidate by posterior standard deviation averaged over
    parameters, each normalized by that model's prior sd so no single
    parameter's scale dominates.  Candidates come from a subsampled cell
    lattice and must be reachable within the travel budget.
    """
    if not gp_models:
        raise NoCandidate("no trained models")
    if budget < 0:
        raise NoCandidate("travel budget is negative")
    if candidate_stride < 1:
        raise ValueError("candidate_stride must be >= 1")
    if not grid.is_navigable(current):
        raise StartBlocked(f"current position {current} is not navigable")

    start_rc = grid.cell_of(current)
    dist, _ = _shortest_paths(grid, start_rc)

    candidates: list[tuple[tuple[int, int], float]] = []
    for (r, c), (orth, diag) in dist.items():
        if r % candidate_stride or c % candidate_stride:
            continue
        cost = step_cost(orth, diag, grid.cell_size)
        if cost <= budget:
            candidates.append(((r, c), cost))
    if not candidates:
        raise NoCandidate("no navigable candidate within the travel budget")

    points = np.array(
        [
            (grid.cell_center(r, c).east, grid.cell_center(r, c).north)
            for (r, c), _ in candidates
        ]
    )
    score = np.zeros(len(candidates))
    for model in gp_models.values():
        _, sd = model.predict(points, return_std=True)
        prior_sd = model.prior_sd_
        score += sd / prior_sd
    score /= len(gp_models)

    best = None
    best_key = None
    for i, ((r, c), cost) in enumerate(candidates):
        key = (-score[i], cost, r, c)
        if best_key is None or key < best_key:
            best_key = key
            best = (r, c)
    return grid.cell_center(*best)
