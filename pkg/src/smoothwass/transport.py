"""Discrete 1-Wasserstein solvers with Euclidean ground cost."""

from __future__ import annotations

import itertools
import math
from collections import deque
from dataclasses import dataclass

import numpy as np
from scipy.optimize import linear_sum_assignment
from scipy.spatial.distance import cdist
from scipy.special import logsumexp

from .errors import DimensionError, ParameterError, PreconditionError, ResourceError
from .measures import DiscreteMeasure

DEFAULT_MAX_ENTRIES = 4_000_000
_PERTURB = 1e-12


@dataclass(frozen=True)
class TransportPlan:
    """Coupling between two discrete measures and its transport cost."""

    plan: np.ndarray
    cost: float

    def marginal_errors(self, a, b) -> tuple[float, float]:
        rows = float(np.max(np.abs(self.plan.sum(axis=1) - a)))
        cols = float(np.max(np.abs(self.plan.sum(axis=0) - b)))
        return rows, cols

    def check(self, mu: DiscreteMeasure, nu: DiscreteMeasure, atol: float = 1e-9) -> None:
        """Assert feasibility and cost consistency; raises AssertionError."""
        assert self.plan.shape == (mu.n, nu.n), "plan shape"
        assert np.all(self.plan >= 0), "negative mass in plan"
        rows, cols = self.marginal_errors(mu.weights, nu.weights)
        assert rows <= atol and cols <= atol, f"marginals off by {max(rows, cols):.3g}"
        direct = float(np.sum(self.plan * cost_matrix(mu.points, nu.points)))
        assert abs(direct - self.cost) <= atol, "cost does not match the plan"


def cost_matrix(x: np.ndarray, y: np.ndarray) -> np.ndarray:
    """Euclidean distances between the rows of ``x`` and ``y``."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if x.shape[1] == 1:
        return np.abs(x[:, 0][:, None] - y[:, 0][None, :])
    return cdist(x, y)


def _check_pair(mu: DiscreteMeasure, nu: DiscreteMeasure):
    if mu.dim != nu.dim:
        raise DimensionError(f"measures live in different dimensions ({mu.dim} vs {nu.dim})")


def _check_cap(n: int, m: int, max_entries: int):
    if n * m > max_entries:
        raise ResourceError(
            f"cost matrix would have {n * m} entries, above the cap of {max_entries}"
        )


# ---------------------------------------------------------------- simplex


def _tree_potentials(cells, n, m, C):
    """Dual potentials on a basis tree plus parent links for cycle search."""
    adj = [[] for _ in range(n + m)]
    for idx, (i, j) in enumerate(cells):
        adj[i].append((n + j, idx))
        adj[n + j].append((i, idx))
    u = np.zeros(n)
    v = np.zeros(m)
    parent = [-1] * (n + m)
    parent_cell = [-1] * (n + m)
    depth = [0] * (n + m)
    seen = [False] * (n + m)
    seen[0] = True
    queue = deque([0])
    while queue:
        node = queue.popleft()
        for other, idx in adj[node]:
            if seen[other]:
                continue
            seen[other] = True
            parent[other] = node
            parent_cell[other] = idx
            depth[other] = depth[node] + 1
            i, j = cells[idx]
            if other >= n:
                v[j] = C[i, j] - u[i]
            else:
                u[i] = C[i, j] - v[j]
            queue.append(other)
    return u, v, parent, parent_cell, depth


def _cycle(ie, je, n, parent, parent_cell, depth):
    """Basis cells on the tree path from column ``je`` to row ``ie``."""
    a, b = n + je, ie
    up_a, up_b = [], []
    while depth[a] > depth[b]:
        up_a.append(parent_cell[a])
        a = parent[a]
    while depth[b] > depth[a]:
        up_b.append(parent_cell[b])
        b = parent[b]
    while a != b:
        up_a.append(parent_cell[a])
        a = parent[a]
        up_b.append(parent_cell[b])
        b = parent[b]
    return up_a + up_b[::-1]


def _tree_flows(cells, a, b):
    """Exact flows on a spanning-tree basis by peeling leaves."""
    n, m = len(a), len(b)
    rest = np.concatenate([a, b]).astype(float)
    incident = [set() for _ in range(n + m)]
    for idx, (i, j) in enumerate(cells):
        incident[i].add(idx)
        incident[n + j].add(idx)
    flows = np.zeros(len(cells))
    leaves = deque(k for k in range(n + m) if len(incident[k]) == 1)
    while leaves:
        node = leaves.popleft()
        if len(incident[node]) != 1:
            continue
        idx = incident[node].pop()
        i, j = cells[idx]
        other = n + j if node == i else i
        flows[idx] = rest[node]
        rest[other] -= rest[node]
        rest[node] = 0.0
        incident[other].discard(idx)
        if len(incident[other]) == 1:
            leaves.append(other)
    return np.clip(flows, 0.0, None)


def transportation_simplex(a, b, C, max_pivots=None):
    """Solve the balanced transportation LP ``min <X, C>``.

    Northwest-corner start, Dantzig entering rule, MODI potentials. Supplies
    are perturbed by 1e-12 (the total lands on the last demand) so every
    basis is nondegenerate; the final flows are recomputed on the optimal
    basis with the unperturbed marginals.

    Returns
    -------
    plan : ndarray, shape (n, m)
    pivots : int
    """
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    C = np.asarray(C, dtype=float)
    n, m = C.shape
    if max_pivots is None:
        max_pivots = 50 * (n + m) * max(n, m) + 1000

    ra = a + _PERTURB
    rb = b.copy()
    rb[-1] += n * _PERTURB
    X = np.zeros((n, m))
    basic = np.zeros((n, m), dtype=bool)
    cells = []
    i = j = 0
    while True:
        x = min(ra[i], rb[j])
        X[i, j] = x
        basic[i, j] = True
        cells.append((i, j))
        ra[i] -= x
        rb[j] -= x
        if i == n - 1 and j == m - 1:
            break
        if j == m - 1 or (i < n - 1 and ra[i] <= rb[j]):
            i += 1
        else:
            j += 1

    tol = 1e-12 * max(1.0, float(np.max(np.abs(C))))
    pivots = 0
    while True:
        u, v, parent, parent_cell, depth = _tree_potentials(cells, n, m, C)
        reduced = C - u[:, None] - v[None, :]
        reduced[basic] = 0.0
        k = int(np.argmin(reduced))
        if reduced.flat[k] >= -tol:
            break
        if pivots >= max_pivots:
            raise RuntimeError("transportation simplex exceeded its pivot budget")
        ie, je = divmod(k, m)
        path = _cycle(ie, je, n, parent, parent_cell, depth)
        minus = path[0::2]
        plus = path[1::2]
        flows = [X[cells[c]] for c in minus]
        pos = int(np.argmin(flows))
        theta = flows[pos]
        leave = minus[pos]
        for c in minus:
            X[cells[c]] -= theta
        for c in plus:
            X[cells[c]] += theta
        X[cells[leave]] = 0.0
        basic[cells[leave]] = False
        X[ie, je] = theta
        basic[ie, je] = True
        cells[leave] = (ie, je)
        pivots += 1

    plan = np.zeros((n, m))
    for (i, j), f in zip(cells, _tree_flows(cells, a, b)):
        plan[i, j] = f
    return plan, pivots


# ---------------------------------------------------------------- exact W1


def solve_w1_exact(mu: DiscreteMeasure, nu: DiscreteMeasure, method: str = "auto",
                   max_entries: int = DEFAULT_MAX_ENTRIES) -> TransportPlan:
    """Optimal transport plan for W1 between two discrete measures.

    Parameters
    ----------
    method : {"auto", "simplex", "assignment"}
        ``"assignment"`` requires equal sizes and uniform weights (an optimal
        permutation coupling then exists); ``"auto"`` uses it when possible
        and the transportation simplex otherwise.
    max_entries : int
        Cap on ``n * m``.
    """
    _check_pair(mu, nu)
    _check_cap(mu.n, nu.n, max_entries)
    square_uniform = mu.n == nu.n and mu.is_uniform and nu.is_uniform
    if method == "auto":
        method = "assignment" if square_uniform else "simplex"
    C = cost_matrix(mu.points, nu.points)
    if method == "assignment":
        if not square_uniform:
            raise PreconditionError("assignment solver needs equal sizes and uniform weights")
        rows, cols = linear_sum_assignment(C)
        plan = np.zeros_like(C)
        plan[rows, cols] = 1.0 / mu.n
    elif method == "simplex":
        plan, _ = transportation_simplex(mu.weights, nu.weights, C)
    else:
        raise ParameterError(f"unknown method {method!r}")
    return TransportPlan(plan=plan, cost=float(np.sum(plan * C)))


def brute_force_w1(mu: DiscreteMeasure, nu: DiscreteMeasure) -> float:
    """Minimum average matched distance over all permutations (n <= 8)."""
    _check_pair(mu, nu)
    if mu.n != nu.n or mu.n > 8:
        raise PreconditionError("brute force needs n == m <= 8")
    if not (mu.is_uniform and nu.is_uniform):
        raise PreconditionError("brute force needs equal weights")
    C = cost_matrix(mu.points, nu.points)
    n = mu.n
    rows = np.arange(n)
    best = math.inf
    for perm in itertools.permutations(range(n)):
        best = min(best, float(C[rows, list(perm)].sum()))
    return best / n


def solve_w1_1d_sorted(mu: DiscreteMeasure, nu: DiscreteMeasure) -> float:
    """W1 between equal-size, equal-weight measures on the line (order statistics)."""
    if mu.dim != 1 or nu.dim != 1:
        raise DimensionError("sorted solver is for d = 1")
    if mu.n != nu.n or not (mu.is_uniform and nu.is_uniform):
        raise PreconditionError("sorted solver needs equal sizes and equal weights")
    return sorted_cost(mu.points[:, 0], nu.points[:, 0])


def sorted_cost(x, y) -> float:
    return float(np.mean(np.abs(np.sort(x) - np.sort(y))))


def w1_equal_weight(x: np.ndarray, y: np.ndarray, solver: str = "exact", epsilon: float = 0.01,
                    max_entries: int = DEFAULT_MAX_ENTRIES) -> float:
    """W1 between two equal-size uniform point clouds, cost only."""
    if x.shape != y.shape:
        raise DimensionError(f"point arrays differ in shape: {x.shape} vs {y.shape}")
    if solver == "sinkhorn":
        return sinkhorn_w1(DiscreteMeasure(x), DiscreteMeasure(y), epsilon).cost
    if x.shape[1] == 1:
        return sorted_cost(x[:, 0], y[:, 0])
    _check_cap(x.shape[0], y.shape[0], max_entries)
    C = cdist(x, y)
    rows, cols = linear_sum_assignment(C)
    return float(C[rows, cols].mean())


# ---------------------------------------------------------------- sinkhorn


@dataclass(frozen=True)
class SinkhornResult:
    """Entropic transport estimate.

    ``cost`` is the linear part <P, C> of the returned plan. When the
    marginals are met, exact W1 lies in ``[lower_band, cost]``, where
    ``lower_band = max(0, cost - epsilon * log(n * m))``.
    """

    cost: float
    converged: bool
    n_iter: int
    marginal_error: float
    lower_band: float
    plan: np.ndarray

    def __float__(self):
        return self.cost


def sinkhorn_w1(mu: DiscreteMeasure, nu: DiscreteMeasure, epsilon: float, max_iter: int = 1000,
                tol: float = 1e-6, max_entries: int = DEFAULT_MAX_ENTRIES) -> SinkhornResult:
    """Log-domain Sinkhorn iterations for entropic OT with Euclidean cost."""
    _check_pair(mu, nu)
    if not epsilon > 0:
        raise PreconditionError("epsilon must be positive")
    _check_cap(mu.n, nu.n, max_entries)
    C = cost_matrix(mu.points, nu.points)
    a, b = mu.weights, nu.weights
    with np.errstate(divide="ignore"):
        log_a, log_b = np.log(a), np.log(b)
    f = np.zeros(mu.n)
    g = np.zeros(nu.n)
    best = None
    it = 0
    for it in range(1, max_iter + 1):
        f = epsilon * (log_a - logsumexp((g[None, :] - C) / epsilon, axis=1))
        g = epsilon * (log_b - logsumexp((f[:, None] - C) / epsilon, axis=0))
        plan = np.exp((f[:, None] + g[None, :] - C) / epsilon)
        err = float(np.abs(plan.sum(axis=1) - a).sum())
        if best is None or err < best[0]:
            best = (err, plan, it)
        if err < tol:
            break
    err, plan, it_best = best
    cost = float(np.sum(plan * C))
    band = max(0.0, cost - epsilon * math.log(mu.n * nu.n))
    return SinkhornResult(cost, err < tol, it_best, err, band, plan)
