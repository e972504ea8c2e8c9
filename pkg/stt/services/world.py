# stt/services/world.py
import logging
import math
from typing import Optional, Sequence, Tuple

import networkx as nx
import numpy as np
from scipy.spatial.distance import cdist

from stt.core.exceptions import ConfigurationException
from stt.models.geometry import Bearing, BearingObservation, TargetState
from stt.models.world import CommGraph
from stt.schemas.scenario import (
    CircleTrajectory,
    LinearTrajectory,
    NoiseConfig,
    ObserverPath,
    ScenarioConfig,
    SquareTrajectory,
    WaypointTrajectory,
)
from stt.services.geometry import draw_rotation_noise, perturb_bearings, unit_bearing

logger = logging.getLogger(__name__)

# boundary guard for floor(t / period) at exact turn times
_TURN_EPS = 1e-9


def circle_trajectory(k: int, dt: float, traj: Optional[CircleTrajectory] = None) -> Tuple[np.ndarray, np.ndarray]:
    traj = traj or CircleTrajectory()
    t = k * dt
    w = traj.omega
    v = traj.speed * np.array([math.sin(w * t), math.cos(w * t), 0.0])
    p = np.asarray(traj.p0) + (traj.speed / w) * np.array([1.0 - math.cos(w * t), math.sin(w * t), 0.0])
    return p, v


def _rotate_clockwise(v: np.ndarray) -> np.ndarray:
    return np.array([v[1], -v[0], v[2]])


def square_trajectory(k: int, dt: float, traj: Optional[SquareTrajectory] = None) -> Tuple[np.ndarray, np.ndarray]:
    traj = traj or SquareTrajectory()
    t = k * dt
    period = traj.turn_period
    m = int(math.floor(t / period + _TURN_EPS))
    p = np.asarray(traj.p0, dtype=float).copy()
    v = np.asarray(traj.v0, dtype=float)
    # four turns close the loop, so only the last partial lap matters
    for _ in range(m % 4):
        p = p + period * v
        v = _rotate_clockwise(v)
    p = p + (t - m * period) * v
    return p, v


def linear_trajectory(k: int, dt: float, traj: LinearTrajectory) -> Tuple[np.ndarray, np.ndarray]:
    v = np.asarray(traj.v, dtype=float)
    return np.asarray(traj.p0, dtype=float) + k * dt * v, v


def _follow_path(points: Sequence, speed: float, loop: bool, t: float) -> Tuple[np.ndarray, np.ndarray]:
    pts = np.asarray(points, dtype=float)
    if loop:
        pts = np.vstack([pts, pts[:1]])
    legs = np.diff(pts, axis=0)
    lengths = np.linalg.norm(legs, axis=1)
    total = float(lengths.sum())
    dist = speed * t
    if loop and total > 0:
        dist = math.fmod(dist, total)
    elif dist >= total:
        return pts[-1].copy(), np.zeros(3)
    ends = np.cumsum(lengths)
    leg = int(np.searchsorted(ends, dist, side="right"))
    leg = min(leg, len(legs) - 1)
    start = ends[leg] - lengths[leg]
    direction = legs[leg] / lengths[leg]
    return pts[leg] + (dist - start) * direction, speed * direction


def waypoint_trajectory(k: int, dt: float, traj: WaypointTrajectory) -> Tuple[np.ndarray, np.ndarray]:
    return _follow_path(traj.points, traj.speed, traj.loop, k * dt)


def target_state(cfg: ScenarioConfig, k: int) -> TargetState:
    traj = cfg.trajectory
    if isinstance(traj, CircleTrajectory):
        p, v = circle_trajectory(k, cfg.dt, traj)
    elif isinstance(traj, SquareTrajectory):
        p, v = square_trajectory(k, cfg.dt, traj)
    elif isinstance(traj, LinearTrajectory):
        p, v = linear_trajectory(k, cfg.dt, traj)
    else:
        p, v = waypoint_trajectory(k, cfg.dt, traj)
    return TargetState(p=p, v=v)


def place_observers(cfg: ScenarioConfig, rng: np.random.Generator) -> np.ndarray:
    lower = np.asarray(cfg.cube.lower)
    upper = np.asarray(cfg.cube.upper)
    # drawn even when positions are fixed so later draws line up across configs
    drawn = rng.uniform(lower, upper, size=(cfg.n, 3))
    if cfg.observer_positions is not None:
        return np.asarray(cfg.observer_positions, dtype=float)
    if cfg.observer_paths is not None:
        return np.array([path.points[0] for path in cfg.observer_paths], dtype=float)
    return drawn


def observer_positions_at(cfg: ScenarioConfig, base: np.ndarray, k: int) -> np.ndarray:
    if cfg.observer_paths is None:
        return base
    return np.array([_path_position(path, k * cfg.dt) for path in cfg.observer_paths])


def _path_position(path: ObserverPath, t: float) -> np.ndarray:
    p, _ = _follow_path(path.points, path.speed, path.loop, t)
    return p


def knn_graph(positions: np.ndarray, K: int) -> CommGraph:
    """Edge i -> j for the K observers nearest to i; equal distances go to the lower id."""
    positions = np.asarray(positions, dtype=float)
    n = positions.shape[0]
    if K >= n and not (n == 1 and K == 0):
        raise ConfigurationException(f"K={K} needs at least {K + 1} observers, got {n}")
    dist = cdist(positions, positions)
    graph = nx.DiGraph()
    graph.add_nodes_from(range(n))
    ids = np.arange(n)
    for i in range(n):
        order = [j for j in np.lexsort((ids, dist[i])) if j != i]
        graph.add_edges_from((i, int(j)) for j in order[:K])
    return CommGraph(graph)


def drop_links(comm: CommGraph, probability: float, rng: np.random.Generator) -> CommGraph:
    edges = sorted(comm.graph.edges)
    # one uniform per edge regardless of the probability
    u = rng.uniform(size=len(edges))
    if probability <= 0:
        return comm
    kept = nx.DiGraph()
    kept.add_nodes_from(comm.graph.nodes)
    kept.add_edges_from(e for e, draw in zip(edges, u) if draw >= probability)
    dropped = len(edges) - kept.number_of_edges()
    if dropped:
        logger.debug("Dropped %d of %d links", dropped, len(edges))
    return CommGraph(kept)


def observe_all(
    truth: TargetState,
    positions: np.ndarray,
    noise: NoiseConfig,
    rng: np.random.Generator,
) -> Tuple[np.ndarray, np.ndarray]:
    """Noisy bearings (n, 3) and noisy positions (n, 3) for every observer at one step.

    Draws per observer in id order: axis angle, rotation normal, then three position normals.
    """
    positions = np.atleast_2d(np.asarray(positions, dtype=float))
    n = positions.shape[0]
    G = np.array([unit_bearing(truth.p, s).g for s in positions])
    phi = np.empty(n)
    z = np.empty(n)
    offsets = np.empty((n, 3))
    for i in range(n):
        phi[i], z[i] = draw_rotation_noise(rng)
        offsets[i] = rng.standard_normal(3)
    gTilde = perturb_bearings(G, noise.bearing_sigma, phi, z)
    return gTilde, positions + noise.position_sigma * offsets


def observe(
    truth: TargetState,
    observerPos: np.ndarray,
    noise: NoiseConfig,
    rng: np.random.Generator,
    observer_id: int = 0,
) -> BearingObservation:
    gTilde, sTilde = observe_all(truth, observerPos, noise, rng)
    return BearingObservation(observer_id=observer_id, gTilde=Bearing(gTilde[0]), sTilde=sTilde[0])
