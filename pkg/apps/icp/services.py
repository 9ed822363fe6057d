"""
Point-to-point ICP.

Correspondences come from an exact k-d tree, the pose step is the SVD
(Kabsch) fit and iterations stop once the RMS correspondence distance
settles. A step that would increase the error is rejected, so the error
history is non-increasing.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import List, Tuple

import numpy as np
from scipy.spatial import cKDTree

from apps.cloud.pointcloud import PointCloud
from apps.core.exceptions import (
    DegenerateConfigurationError,
    DomainError,
    NoCorrespondencesError,
    RegistrationError,
    TooFewPointsError,
)
from apps.core.logging.logging_utils import log_execution_time
from apps.geom.transforms import RigidTransform

logger = logging.getLogger("apps.icp.services")

# Neighbours fetched per query; a second one at the same distance flags a tie.
TIE_CANDIDATES = 2
# Ball widening used to collect every neighbour of a tie.
TIE_RTOL = 1e-12
COLLINEAR_TOL = 1e-9


@dataclass(frozen=True)
class IcpParams:
    max_iterations: int = 30
    convergence_eps: float = 1e-5
    max_correspondence_dist: float = 0.15
    min_points: int = 50

    def __post_init__(self):
        if self.max_iterations < 1:
            raise DomainError("max_iterations must be >= 1", value=self.max_iterations)
        if self.convergence_eps <= 0:
            raise DomainError("convergence_eps must be > 0", value=self.convergence_eps)
        if self.max_correspondence_dist <= 0:
            raise DomainError(
                "max_correspondence_dist must be > 0", value=self.max_correspondence_dist
            )
        if self.min_points < 3:
            raise DomainError("min_points must be >= 3", value=self.min_points)


@dataclass(frozen=True, eq=False)
class IcpResult:
    transform: RigidTransform
    final_error: float
    iterations: int
    converged: bool
    error_history: Tuple[float, ...] = field(default=())


@dataclass(frozen=True, eq=False)
class Correspondences:
    """Matched index pairs with their distances, ordered by source index"""

    src_index: np.ndarray
    dst_index: np.ndarray
    distance: np.ndarray

    def __len__(self):
        return int(self.src_index.shape[0])

    def as_tuples(self) -> List[Tuple[int, int, float]]:
        return [
            (int(i), int(j), float(d))
            for i, j, d in zip(self.src_index, self.dst_index, self.distance)
        ]

    def rms(self) -> float:
        return float(np.sqrt(np.mean(self.distance**2))) if len(self) else float("inf")


def _query(tree: cKDTree, points: np.ndarray, max_dist: float) -> Correspondences:
    k = min(TIE_CANDIDATES, tree.n)
    dist, idx = tree.query(points, k=k, distance_upper_bound=max_dist, workers=-1)
    dist = dist.reshape(len(points), k)
    idx = idx.reshape(len(points), k)
    nearest = dist[:, :1]
    best = idx[:, 0].copy()

    # Among neighbours at the minimum distance keep the lowest dst index.
    if k > 1:
        tied = np.flatnonzero(np.isfinite(dist[:, 0]) & (dist[:, 1] == dist[:, 0]))
        for row in tied:
            ball = tree.query_ball_point(points[row], r=dist[row, 0] * (1.0 + TIE_RTOL))
            best[row] = min(ball)

    found = np.isfinite(nearest[:, 0])
    src_index = np.flatnonzero(found)
    return Correspondences(src_index, best[found], nearest[found, 0])


def nearest_correspondences(src: PointCloud, dst: PointCloud, max_dist: float) -> Correspondences:
    """Exact nearest dst point for every src point within ``max_dist``"""
    _check_frames(src, dst)
    if src.is_empty or dst.is_empty:
        empty = np.empty(0, dtype=int)
        return Correspondences(empty, empty, np.empty(0))
    return _query(cKDTree(dst.points), src.points, max_dist)


def best_rigid_fit(src_points: np.ndarray, dst_points: np.ndarray) -> RigidTransform:
    """
    Least-squares rigid transform taking src_points onto dst_points.

        Args:
            src_points: (N, 3) points p_i
            dst_points: (N, 3) points q_i matched row by row

        Raises:
            DegenerateConfigurationError: fewer than 3 pairs, or the source
                points are coincident or collinear
    """
    p = np.asarray(src_points, dtype=float).reshape(-1, 3)
    q = np.asarray(dst_points, dtype=float).reshape(-1, 3)
    if p.shape != q.shape:
        raise DomainError("Matched point arrays differ in shape", value=(p.shape, q.shape))
    if len(p) < 3:
        raise DegenerateConfigurationError(f"Rigid fit needs at least 3 pairs, got {len(p)}")

    p_mean = p.mean(axis=0)
    q_mean = q.mean(axis=0)
    p_c = p - p_mean
    q_c = q - q_mean

    spread = np.linalg.svd(p_c, compute_uv=False)
    if spread[0] <= 0.0 or spread[1] <= COLLINEAR_TOL * spread[0]:
        raise DegenerateConfigurationError("Source points are coincident or collinear")

    u, _, vt = np.linalg.svd(p_c.T @ q_c)
    sign = np.sign(np.linalg.det(vt.T @ u.T)) or 1.0
    rotation = vt.T @ np.diag([1.0, 1.0, sign]) @ u.T
    return RigidTransform(rotation, q_mean - rotation @ p_mean)


def _check_frames(src: PointCloud, dst: PointCloud):
    if src.frame != dst.frame:
        raise DomainError(
            f"Clouds live in different frames ({src.frame.value} vs {dst.frame.value})",
            value=(src.frame, dst.frame),
        )


@log_execution_time()
def icp_register(
    src: PointCloud, dst: PointCloud, init: RigidTransform, params: IcpParams
) -> IcpResult:
    """
    Register ``src`` onto ``dst`` starting from ``init``.

    The returned transform maps the original src points onto dst (init
    included).
    """
    _check_frames(src, dst)
    if len(src) < params.min_points or len(dst) < params.min_points:
        raise TooFewPointsError(len(src), len(dst), params.min_points)

    tree = cKDTree(dst.points)
    max_dist = params.max_correspondence_dist

    transform = init
    moved = transform.apply(src.points)
    pairs = _query(tree, moved, max_dist)
    if len(pairs) == 0:
        raise NoCorrespondencesError(max_dist)
    error = pairs.rms()
    history = [error]

    converged = False
    iterations = 0
    for iterations in range(1, params.max_iterations + 1):
        try:
            step = best_rigid_fit(moved[pairs.src_index], dst.points[pairs.dst_index])
        except DegenerateConfigurationError as exc:
            raise RegistrationError(f"ICP step {iterations} is degenerate: {exc}") from exc

        candidate = step @ transform
        candidate_moved = candidate.apply(src.points)
        candidate_pairs = _query(tree, candidate_moved, max_dist)
        candidate_error = candidate_pairs.rms()

        if len(candidate_pairs) < 3 or candidate_error > error:
            # Keep the previous pose; the error can only get worse from here.
            converged = candidate_error - error < params.convergence_eps
            break

        improvement = error - candidate_error
        transform, moved, pairs, error = candidate, candidate_moved, candidate_pairs, candidate_error
        history.append(error)
        if improvement < params.convergence_eps:
            converged = True
            break

    logger.debug(
        "ICP finished",
        extra={
            "data": {
                "iterations": iterations,
                "error": error,
                "converged": converged,
                "pairs": len(pairs),
            }
        },
    )
    return IcpResult(transform, float(error), iterations, converged, tuple(history))
