"""Skeleton graph construction and adjacency partitioning for graph convolution.

The 25-joint layout follows the reduced keypoint set produced by
dataset.reduce_keypoints: a pelvis/spine/neck/head chain, two arm chains
ending wrist-hand with thumb and fingertip, and two leg chains ending
ankle-foot.
"""

from dataclasses import dataclass

import numpy as np

PARTITION_STRATEGIES = ("uniform", "distance", "spatial")

# Bone list over the 25-joint model layout (indices per dataset.DEFAULT_JOINT_MAP).
DEFAULT_EDGES = [
    (0, 1),    # pelvis - spine
    (1, 20),   # spine - chest
    (20, 2),   # chest - neck
    (2, 3),    # neck - head
    (20, 4),   # chest - left shoulder
    (4, 5),    # left upper arm
    (5, 6),    # left forearm
    (6, 7),    # left wrist - hand
    (7, 21),   # left hand - fingertip
    (7, 22),   # left hand - thumb
    (20, 8),   # chest - right shoulder
    (8, 9),    # right upper arm
    (9, 10),   # right forearm
    (10, 11),  # right wrist - hand
    (11, 23),  # right hand - fingertip
    (11, 24),  # right hand - thumb
    (0, 12),   # pelvis - left hip
    (12, 13),  # left thigh
    (13, 14),  # left shin
    (14, 15),  # left ankle - foot
    (0, 16),   # pelvis - right hip
    (16, 17),  # right thigh
    (17, 18),  # right shin
    (18, 19),  # right ankle - foot
]

# Chest joint: graph center for the spatial partition.
CENTER_JOINT = 20


@dataclass
class SkeletonGraph:
    num_joints: int
    edges: list
    strategy: str
    adjacency: np.ndarray  # (K, V, V), partitions of the normalized adjacency

    @property
    def num_partitions(self) -> int:
        return self.adjacency.shape[0]


def hop_distance(num_joints: int, edges) -> np.ndarray:
    """All-pairs hop counts by BFS; unreachable pairs are inf."""
    adj = [[] for _ in range(num_joints)]
    for i, j in edges:
        adj[i].append(j)
        adj[j].append(i)
    dist = np.full((num_joints, num_joints), np.inf)
    for src in range(num_joints):
        dist[src, src] = 0
        frontier = [src]
        d = 0
        while frontier:
            d += 1
            nxt = []
            for u in frontier:
                for v in adj[u]:
                    if np.isinf(dist[src, v]):
                        dist[src, v] = d
                        nxt.append(v)
            frontier = nxt
    return dist


def normalized_adjacency(num_joints: int, edges) -> np.ndarray:
    """Row-degree-normalized adjacency with self-links: D^-1 (A + I)."""
    a = np.eye(num_joints)
    for i, j in edges:
        a[i, j] = 1.0
        a[j, i] = 1.0
    return a / a.sum(axis=1, keepdims=True)


def build_graph(edges=None, strategy="spatial", num_joints=None,
                center=None) -> SkeletonGraph:
    """Build the partitioned adjacency stack for one partition strategy.

    The partitions are disjoint masks of the single normalized adjacency, so
    the stack always sums back to it exactly.
    """
    if edges is None:
        edges = DEFAULT_EDGES
    edges = [tuple(e) for e in edges]
    if num_joints is None:
        num_joints = max(max(e) for e in edges) + 1
    if strategy not in PARTITION_STRATEGIES:
        raise ValueError(f"unknown partition strategy {strategy!r}")
    if center is None:
        center = CENTER_JOINT if CENTER_JOINT < num_joints else num_joints // 2

    dist = hop_distance(num_joints, edges)
    if np.isinf(dist).any():
        raise ValueError("skeleton layout is disconnected")

    full = normalized_adjacency(num_joints, edges)
    eye = np.eye(num_joints, dtype=bool)
    neighbor = dist == 1

    if strategy == "uniform":
        parts = [full]
    elif strategy == "distance":
        parts = [np.where(eye, full, 0.0), np.where(neighbor, full, 0.0)]
    else:  # spatial: root / centripetal (closer to center) / centrifugal
        to_center = dist[:, center]
        closer = to_center[None, :] < to_center[:, None]
        parts = [
            np.where(eye, full, 0.0),
            np.where(neighbor & closer, full, 0.0),
            np.where(neighbor & ~closer, full, 0.0),
        ]

    adjacency = np.stack(parts).astype(np.float32)
    return SkeletonGraph(
        num_joints=num_joints, edges=edges, strategy=strategy, adjacency=adjacency
    )
