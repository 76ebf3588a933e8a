from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import Any, Dict, List, Optional, Sequence, Tuple

import numpy as np
from scipy.cluster.hierarchy import fcluster, linkage
from scipy.spatial.distance import pdist

from src.core.config import settings
from src.core.errors import DomainError
from src.dynamics.model import InfluenceModel, effective_weights
from src.dynamics.trajectory import Trajectory
from src.kernels.kernel import Kernel
from src.state import OpinionState, grad_sup_norm, pairwise_distances

logger = logging.getLogger(__name__)

_DRIFT_SLACK = 1e-12


def _normalize_members(members: Sequence[int], size: int) -> Tuple[int, ...]:
    picked = tuple(sorted({int(m) for m in members}))
    if not picked:
        raise DomainError("Cluster must have at least one member.")
    if picked[0] < 0 or picked[-1] >= size:
        raise DomainError(f"Cluster members must be 0-based indices below {size}.")
    if len(picked) == size:
        raise DomainError("Cluster must be a proper subset of the committee.")
    return picked


@dataclass(frozen=True)
class ClusterSpec:
    members: Tuple[int, ...]
    d0: int
    internal_osc: float
    dist_to_rest: float
    lambda_: float

    def is_cluster(self, big_lambda: float) -> bool:
        """Lambda * internal_osc < dist_to_rest."""
        return big_lambda * self.internal_osc < self.dist_to_rest

    def to_dict(self) -> Dict[str, Any]:
        return {
            "members": list(self.members),
            "d0": self.d0,
            "internal_osc": self.internal_osc,
            "dist_to_rest": self.dist_to_rest,
            "lambda": None if math.isinf(self.lambda_) else self.lambda_,
        }


def cluster_metrics(state: OpinionState, members: Sequence[int]) -> ClusterSpec:
    inside = _normalize_members(members, state.vertex_count)
    outside = tuple(v for v in range(state.vertex_count) if v not in inside)
    dist = pairwise_distances(state)
    internal = float(dist[np.ix_(inside, inside)].max())
    to_rest = float(dist[np.ix_(inside, outside)].min())
    lam = math.inf if internal == 0 else to_rest / internal
    return ClusterSpec(
        members=inside,
        d0=len(inside) - 1,
        internal_osc=internal,
        dist_to_rest=to_rest,
        lambda_=lam,
    )


def detect_clusters(state: OpinionState, gap_ratio: float) -> List[List[int]]:
    """
    Single-linkage partition at the largest merge height theta whose next
    merge height exceeds gap_ratio * theta; one block when no such gap exists.
    """
    if not gap_ratio > 1:
        raise DomainError(f"gap_ratio must be > 1, got {gap_ratio}.")
    everyone = [list(range(state.vertex_count))]
    tree = linkage(pdist(state.values), method="single")
    heights = tree[:, 2]
    cut: Optional[int] = None
    for k in range(len(heights) - 1):
        # theta = 0 is allowed: coincident groups far from everything else
        if heights[k + 1] > gap_ratio * heights[k]:
            cut = k
    if cut is None:
        return everyone
    theta = float(heights[cut])
    # merges 0..cut are applied; heights[cut + 1] > theta so the count is exact
    labels = fcluster(tree, t=state.vertex_count - cut - 1, criterion="maxclust")
    blocks: Dict[int, List[int]] = {}
    for vertex, label in enumerate(labels):
        blocks.setdefault(int(label), []).append(vertex)
    partition = sorted(blocks.values(), key=lambda block: block[0])
    logger.debug("detect_clusters theta=%.6g blocks=%s", theta, len(partition))
    return partition


def split_time_one_map(
    state: OpinionState,
    model: InfluenceModel,
    members: Sequence[int],
) -> Tuple[np.ndarray, np.ndarray]:
    """
    (A0_u, Abar_u) on the cluster rows: A0 keeps only the interaction inside
    the cluster, Abar is the pull of everyone else, and A_u = A0_u + Abar_u.
    """
    inside = np.array(_normalize_members(members, state.vertex_count))
    mask = np.zeros(state.vertex_count, dtype=bool)
    mask[inside] = True
    mu = effective_weights(state, model)
    u = state.values
    diffs = u[None, :, :] - u[inside][:, None, :]
    rows = mu[inside]
    a0 = u[inside] + np.einsum("vw,vwn->vn", rows * mask[None, :], diffs) / state.d
    abar = np.einsum("vw,vwn->vn", rows * ~mask[None, :], diffs) / state.d
    return a0, abar


@dataclass(frozen=True)
class ClusterStepBound:
    inner_factor: float
    outer_lipschitz: float

    @property
    def ratio_bound(self) -> float:
        """Upper bound on g1 / g0 for one step."""
        return self.inner_factor + self.outer_lipschitz


def cluster_step_bound(
    state: OpinionState,
    kernel: Kernel,
    members: Sequence[int],
    derivative_constant: float,
) -> ClusterStepBound:
    spec = cluster_metrics(state, members)
    d, d0 = state.d, spec.d0
    inner = 1.0 - float(kernel.values(spec.internal_osc)) * (d0 - 1) / (2.0 * d)
    outer = (d - d0) / d * (derivative_constant + 1.0) * float(kernel.values(spec.dist_to_rest))
    return ClusterStepBound(inner_factor=inner, outer_lipschitz=outer)


@dataclass
class ContractionStep:
    t: int
    g: float
    h: float
    g_next: float
    h_next: float
    kappa_step: Optional[float]
    drift_ok: bool
    ratio_bound: Optional[float] = None

    def to_dict(self) -> Dict[str, Any]:
        kappa = self.kappa_step
        return {
            "t": self.t,
            "g": self.g,
            "h": self.h,
            "g_next": self.g_next,
            "h_next": self.h_next,
            "kappa_step": None if kappa is None or math.isinf(kappa) else kappa,
            "drift_ok": self.drift_ok,
            "ratio_bound": self.ratio_bound,
        }


@dataclass
class ContractionReport:
    members: Tuple[int, ...]
    per_step: List[ContractionStep] = field(default_factory=list)
    kappa_min: float = math.inf
    cluster_preserved: List[bool] = field(default_factory=list)
    degenerate: bool = False

    @property
    def drift_ok(self) -> bool:
        return all(step.drift_ok for step in self.per_step)

    def to_dict(self) -> Dict[str, Any]:
        return {
            "members": list(self.members),
            "per_step": [s.to_dict() for s in self.per_step],
            "kappa_min": None if math.isinf(self.kappa_min) else self.kappa_min,
            "cluster_preserved": list(self.cluster_preserved),
            "degenerate": self.degenerate,
            "drift_ok": self.drift_ok,
        }


def track_cluster_contraction(
    trajectory: Trajectory,
    members: Sequence[int],
    derivative_constant: Optional[float] = None,
) -> ContractionReport:
    """
    Per-step internal oscillation g, distance to the rest h and kappa = g_t / g_{t+1}.
    Internal oscillation below the consensus floor counts as zero.
    """
    if not trajectory.is_discrete:
        raise DomainError("Cluster contraction is tracked on discrete trajectories only.")
    if any(b - a != 1 for a, b in zip(trajectory.times, trajectory.times[1:])):
        raise DomainError("Cluster contraction needs every step (stride 1).")
    picked = _normalize_members(members, trajectory.initial_state.vertex_count)
    if len(picked) <= 2:
        raise DomainError("Cluster contraction needs more than two members.")

    floor = settings.consensus_rel * (1.0 + grad_sup_norm(trajectory.initial_state))
    specs = [cluster_metrics(s, picked) for s in trajectory.states]
    g = [0.0 if s.internal_osc < floor else s.internal_osc for s in specs]
    h = [s.dist_to_rest for s in specs]
    lam = [math.inf if gi == 0 else hi / gi for gi, hi in zip(g, h)]

    report = ContractionReport(members=picked, degenerate=g[0] == 0)
    for t in range(len(specs) - 1):
        if g[t] == 0:
            kappa = None
        elif g[t + 1] == 0:
            kappa = math.inf
        else:
            kappa = g[t] / g[t + 1]
        bound = None
        if derivative_constant is not None:
            bound = cluster_step_bound(
                trajectory.states[t], trajectory.model.kernel, picked, derivative_constant
            ).ratio_bound
        report.per_step.append(
            ContractionStep(
                t=int(trajectory.times[t]),
                g=g[t],
                h=h[t],
                g_next=g[t + 1],
                h_next=h[t + 1],
                kappa_step=kappa,
                drift_ok=h[t + 1] >= h[t] - 2.0 - _DRIFT_SLACK,
                ratio_bound=bound,
            )
        )
    kappas = [s.kappa_step for s in report.per_step if s.kappa_step is not None]
    report.kappa_min = min(kappas) if kappas else math.inf
    for t in range(len(specs) - 1):
        if math.isinf(lam[t]):
            report.cluster_preserved.append(math.isinf(lam[t + 1]))
        else:
            report.cluster_preserved.append(lam[t + 1] >= report.kappa_min * lam[t])
    logger.info(
        "cluster_contraction members=%s steps=%s kappa_min=%s degenerate=%s",
        list(picked),
        len(report.per_step),
        report.kappa_min,
        report.degenerate,
    )
    return report
