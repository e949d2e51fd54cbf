"""Entropic optimal transport between a fresh pseudo-labeled draw and the anchor draw."""
from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import _kernels

DEFAULT_LAMBDA = 0.05
DEFAULT_MAX_ITERS = 1000
DEFAULT_TOL = 1e-6


class SinkhornError(FloatingPointError):
    pass


@dataclass
class CostMatrix:
    values: np.ndarray


@dataclass
class TransportPlan:
    values: np.ndarray
    row_marginal: np.ndarray
    col_marginal: np.ndarray
    lam: float
    iterations: int
    violation: float
    log_domain: bool


def _normalize_rows(x: np.ndarray, what: str) -> np.ndarray:
    x = np.asarray(x, dtype=np.float64)
    norms = np.linalg.norm(x, axis=1)
    bad = np.flatnonzero(norms == 0.0)
    if bad.size:
        raise ValueError(f"{what} row {int(bad[0])} has zero norm; cosine cost is undefined")
    return x / norms[:, None]


def cost_matrix(feats_t: np.ndarray, feats_anchor: np.ndarray) -> CostMatrix:
    """O[i, j] = 1 - cos(feats_t[i], feats_anchor[j])."""
    a = _normalize_rows(feats_t, "feats_t")
    b = _normalize_rows(feats_anchor, "feats_anchor")
    values = np.clip(1.0 - a @ b.T, 0.0, 2.0)
    return CostMatrix(values)


def sinkhorn(
    cost: CostMatrix | np.ndarray,
    lam: float = DEFAULT_LAMBDA,
    max_iters: int = DEFAULT_MAX_ITERS,
    tol: float = DEFAULT_TOL,
    log_domain: bool | None = None,
) -> TransportPlan:
    """Sinkhorn-Knopp scaling with uniform marginals.

    ``log_domain=None`` picks the plain-domain iteration unless the Gibbs
    kernel ``exp(-O/lam)`` underflows, in which case the stabilised
    log-domain updates are used.
    """
    C = np.asarray(cost.values if isinstance(cost, CostMatrix) else cost, dtype=np.float64)
    if not lam > 0:
        raise ValueError("lambda must be positive")
    n, m = C.shape
    a = np.full(n, 1.0 / n)
    b = np.full(m, 1.0 / m)
    # shifting the cost leaves the plan unchanged and keeps the kernel in range
    Cs = C - C.min()
    K = np.exp(-Cs / lam)
    if log_domain is None:
        log_domain = bool(K.min() < np.finfo(np.float64).tiny)
    if log_domain:
        f, g, it, err = _kernels.sinkhorn_log(Cs, float(lam), a, b, int(max_iters), float(tol))
        P = np.exp((f[:, None] + g[None, :] - Cs) / lam)
    else:
        with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
            u, v, it, err = _kernels.sinkhorn_plain(K, a, b, int(max_iters), float(tol))
            P = u[:, None] * K * v[None, :]
    if not (np.all(np.isfinite(P)) and np.isfinite(err)):
        raise SinkhornError(
            f"non-finite Sinkhorn iterate at lambda={lam}; retry with log_domain=True"
        )
    return TransportPlan(P, a, b, float(lam), int(it), float(err), bool(log_domain))


def ot_objective(plan: TransportPlan, cost: CostMatrix | np.ndarray) -> float:
    """<P, O> + lam * sum P log P (0 log 0 taken as 0)."""
    C = cost.values if isinstance(cost, CostMatrix) else np.asarray(cost)
    P = plan.values
    with np.errstate(divide="ignore", invalid="ignore"):
        ent = np.where(P > 0, P * np.log(P), 0.0).sum()
    return float((P * C).sum() + plan.lam * ent)


def transport_cost(plan: TransportPlan, cost: CostMatrix | np.ndarray) -> float:
    C = cost.values if isinstance(cost, CostMatrix) else np.asarray(cost)
    return float((plan.values * C).sum())


def plan_to_soft_labels(plan: TransportPlan | np.ndarray) -> np.ndarray:
    P = np.asarray(plan.values if isinstance(plan, TransportPlan) else plan, dtype=np.float64)
    sums = P.sum(axis=1)
    if np.any(sums <= 0):
        raise ValueError(f"plan row {int(np.flatnonzero(sums <= 0)[0])} has zero mass")
    return P / sums[:, None]


def align(
    feats_t: np.ndarray,
    feats_anchor: np.ndarray,
    lam: float = DEFAULT_LAMBDA,
    max_iters: int = DEFAULT_MAX_ITERS,
    tol: float = DEFAULT_TOL,
) -> tuple[np.ndarray, TransportPlan, CostMatrix]:
    """Soft instance-level labels for a new draw against the anchor draw."""
    cost = cost_matrix(feats_t, feats_anchor)
    plan = sinkhorn(cost, lam=lam, max_iters=max_iters, tol=tol)
    return plan_to_soft_labels(plan), plan, cost


def dump_alignment(path: str | Path, cost: CostMatrix, plan: TransportPlan, soft: np.ndarray) -> None:
    """Debug dump: one row per (i, j) entry with cost, plan mass and soft label."""
    with Path(path).open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["i", "j", "cost", "plan", "soft_label"])
        n, m = plan.values.shape
        for i in range(n):
            for j in range(m):
                w.writerow(
                    [i, j]
                    + [repr(float(x[i, j])) for x in (cost.values, plan.values, soft)]
                )
