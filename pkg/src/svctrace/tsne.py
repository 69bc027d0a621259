"""Exact t-SNE for step-embedding trajectories.

Point counts here are at most a few hundred (one point per sampler step),
so the O(n^2) exact gradient is cheap and easy to verify. The output is a
2D trajectory: projected points in sampler visit order plus the KL
objective history of the optimization.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np


class ProjectionError(ValueError):
    pass


@dataclass(frozen=True)
class EmbeddingSequence:
    """num_steps x D matrix of tap vectors, rows in sampler visit order."""

    kind: str
    layer: str | None
    matrix: np.ndarray
    step_labels: list[int] = field(default_factory=list)

    def __post_init__(self):
        matrix = np.ascontiguousarray(self.matrix, dtype=np.float64)
        if matrix.ndim != 2:
            raise ProjectionError("embedding sequence must be 2-D")
        if not np.all(np.isfinite(matrix)):
            raise ProjectionError("embedding sequence must be finite")
        object.__setattr__(self, "matrix", matrix)
        if self.step_labels and len(self.step_labels) != matrix.shape[0]:
            raise ProjectionError("step labels must match row count")

    @property
    def rows(self) -> int:
        return self.matrix.shape[0]


@dataclass(frozen=True)
class ProjectionMap:
    points: np.ndarray  # (n, 2) float64, centered
    step_labels: list[int]
    kl_history: list[float]

    def __post_init__(self):
        points = np.ascontiguousarray(self.points, dtype=np.float64)
        if points.ndim != 2 or points.shape[1] != 2:
            raise ProjectionError("projection points must be (n, 2)")
        if not np.all(np.isfinite(points)):
            raise ProjectionError("projection points must be finite")
        if len(self.step_labels) != points.shape[0]:
            raise ProjectionError("label count must match point count")
        object.__setattr__(self, "points", points)


@dataclass(frozen=True)
class TsneConfig:
    perplexity: float = 30.0
    iterations: int = 1000
    learning_rate: float = 200.0
    early_exaggeration: float = 12.0
    exaggeration_iters: int = 250
    momentum_start: float = 0.5
    momentum_final: float = 0.8
    seed: int = 0


def clamp_perplexity(perplexity: float, rows: int) -> float:
    """Perplexity floored at 5 then capped at (rows - 1) / 3.

    For very short sequences the cap sits below the floor and wins, so tiny
    traces remain projectable."""
    return float(min(max(5.0, perplexity), (rows - 1) / 3.0))


def conditional_affinities(
    X: np.ndarray, perplexity: float, entropy_tol: float = 1e-4, max_iter: int = 100
) -> np.ndarray:
    """Row-conditional Gaussian affinities P(j|i) with per-row bandwidths
    found by binary search so each row's entropy hits log(perplexity)
    within tolerance. Duplicate rows (zero distances) get an epsilon
    jitter rather than failing."""
    X = np.asarray(X, dtype=np.float64)
    n = X.shape[0]
    if n < 5:
        raise ProjectionError(f"need at least 5 rows to project, got {n}")
    ceiling = (n - 1) / 3.0
    floor = min(5.0, ceiling)  # the cap takes precedence for short traces
    if not floor <= perplexity <= ceiling + 1e-9:
        raise ProjectionError(
            f"perplexity {perplexity} outside [{floor:.2f}, (rows - 1) / 3 = {ceiling:.2f}]"
        )
    sq_norms = np.sum(X * X, axis=1)
    d2 = np.maximum(sq_norms[:, None] + sq_norms[None, :] - 2.0 * (X @ X.T), 0.0)
    off_diag = ~np.eye(n, dtype=bool)
    d2[off_diag & (d2 == 0.0)] = 1e-10  # duplicate-row degeneracy

    target_entropy = np.log(perplexity)
    P = np.zeros((n, n))
    for i in range(n):
        row = np.delete(d2[i], i)
        beta_lo, beta_hi, beta = 0.0, np.inf, 1.0
        for _ in range(max_iter):
            p = np.exp(-row * beta)
            total = p.sum()
            if total <= 0.0:
                entropy = 0.0
            else:
                p = p / total
                nz = p > 0
                entropy = float(-np.sum(p[nz] * np.log(p[nz])))
            if abs(entropy - target_entropy) < entropy_tol:
                break
            if entropy > target_entropy:  # too spread out, tighten
                beta_lo = beta
                beta = beta * 2.0 if beta_hi == np.inf else (beta + beta_hi) / 2.0
            else:
                beta_hi = beta
                beta = beta / 2.0 if beta_lo == 0.0 else (beta + beta_lo) / 2.0
        p_full = np.exp(-d2[i] * beta)
        p_full[i] = 0.0
        total = p_full.sum()
        if total > 0:
            P[i] = p_full / total
        else:
            # beta ran away (target entropy unreachable, e.g. equidistant
            # rows); the limit distribution is uniform over the nearest rows
            nearest = d2[i] == np.min(np.delete(d2[i], i))
            nearest[i] = False
            P[i, nearest] = 1.0 / nearest.sum()
    return P


def perplexity_affinities(
    X: np.ndarray, perplexity: float, entropy_tol: float = 1e-4, max_iter: int = 100
) -> np.ndarray:
    """Symmetrized affinities P = (P(j|i) + P(i|j)) / (2n), summing to 1."""
    P = conditional_affinities(X, perplexity, entropy_tol, max_iter)
    n = P.shape[0]
    P = (P + P.T) / (2.0 * n)
    P = P / P.sum()  # exact unit mass despite float round-off
    return P


def _q_matrix(Y: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    sq = np.sum(Y * Y, axis=1)
    num = 1.0 / (1.0 + np.maximum(sq[:, None] + sq[None, :] - 2.0 * (Y @ Y.T), 0.0))
    np.fill_diagonal(num, 0.0)
    Q = num / num.sum()
    return Q, num


def kl_divergence(P: np.ndarray, Y: np.ndarray) -> float:
    Q, _ = _q_matrix(Y)
    mask = P > 0
    return float(np.sum(P[mask] * np.log(P[mask] / np.maximum(Q[mask], 1e-12))))


def tsne(
    sequence: EmbeddingSequence, cfg: TsneConfig = TsneConfig(), perplexity: float | None = None
) -> ProjectionMap:
    """Project an embedding sequence to 2D.

    Early exaggeration scales P for the first phase; momentum switches from
    its start to final value when exaggeration ends. The recorded KL history
    always uses the unexaggerated P, so it is comparable across iterations.
    """
    X = sequence.matrix
    n = X.shape[0]
    perp = clamp_perplexity(cfg.perplexity if perplexity is None else perplexity, n)
    P = perplexity_affinities(X, perp)

    rng = np.random.default_rng(cfg.seed)
    Y = rng.normal(scale=1e-4, size=(n, 2))
    velocity = np.zeros_like(Y)
    gains = np.ones_like(Y)  # per-coordinate adaptive gains, as in the
    history = []  # reference implementation; keeps points from stalling
    for it in range(cfg.iterations):
        exaggerating = it < cfg.exaggeration_iters
        P_eff = P * cfg.early_exaggeration if exaggerating else P
        Q, num = _q_matrix(Y)
        history.append(kl_divergence(P, Y))

        W = (P_eff - Q) * num
        grad = 4.0 * ((np.diag(W.sum(axis=1)) - W) @ Y)
        if not np.all(np.isfinite(grad)):
            raise ProjectionError(f"non-finite gradient at iteration {it}")
        momentum = cfg.momentum_start if exaggerating else cfg.momentum_final
        same_direction = np.sign(grad) == np.sign(velocity)
        gains = np.where(same_direction, gains * 0.8, gains + 0.2)
        gains = np.maximum(gains, 0.01)
        velocity = momentum * velocity - cfg.learning_rate * gains * grad
        Y = Y + velocity
        Y = Y - Y.mean(axis=0)

    labels = sequence.step_labels or list(range(n))
    return ProjectionMap(points=Y - Y.mean(axis=0), step_labels=list(labels), kl_history=history)


def joint_tsne(
    a: EmbeddingSequence, b: EmbeddingSequence, cfg: TsneConfig = TsneConfig()
) -> tuple[ProjectionMap, ProjectionMap]:
    """Project two sequences through one shared optimization so their
    trajectories live in the same space (condition-comparison modes)."""
    if a.matrix.shape[1] != b.matrix.shape[1]:
        raise ProjectionError("joint projection needs matching embedding dims")
    stacked = EmbeddingSequence(
        kind=a.kind,
        layer=a.layer,
        matrix=np.concatenate([a.matrix, b.matrix], axis=0),
        step_labels=(a.step_labels or list(range(a.rows)))
        + (b.step_labels or list(range(b.rows))),
    )
    combined = tsne(stacked, cfg)
    na = a.rows
    return (
        ProjectionMap(
            points=combined.points[:na],
            step_labels=combined.step_labels[:na],
            kl_history=combined.kl_history,
        ),
        ProjectionMap(
            points=combined.points[na:],
            step_labels=combined.step_labels[na:],
            kl_history=combined.kl_history,
        ),
    )


@dataclass(frozen=True)
class TrajectoryVertex:
    x: float
    y: float
    step: int


def trajectory(projection: ProjectionMap) -> list[TrajectoryVertex]:
    """Points connected in visit order with step annotations."""
    return [
        TrajectoryVertex(x=float(p[0]), y=float(p[1]), step=int(s))
        for p, s in zip(projection.points, projection.step_labels)
    ]
