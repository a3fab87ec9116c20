"""Finite metric measure spaces with a graph Dirichlet-form structure.

A space is a point set carrying three compatible pieces of data: a metric
(dense distance matrix), a strictly positive vertex measure, and symmetric
nonnegative edge conductances whose graph must be connected.  The metric and
the conductance graph are independent inputs; the canonical fixtures set the
metric to the shortest-path metric of the conductance graph, but general
compatible pairs are accepted.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np
from scipy.sparse import csr_matrix
from scipy.sparse.csgraph import connected_components, shortest_path

from .errors import (
    DisconnectedGraph,
    InvalidParams,
    MetricViolation,
    NonpositiveMeasure,
)

__all__ = [
    "Space",
    "BallStats",
    "build_space",
    "ball_measure",
    "ball_stats",
    "doubling_stats",
    "fixture",
    "space_to_json",
    "space_from_json",
]

_METRIC_TOL = 1e-12


@dataclass(frozen=True)
class Space:
    """Validated finite metric measure space; immutable after construction."""

    dist: np.ndarray
    mu: np.ndarray
    cond: np.ndarray

    @property
    def n(self) -> int:
        return len(self.mu)

    @property
    def total_mass(self) -> float:
        return float(self.mu.sum())

    @property
    def diameter(self) -> float:
        return float(self.dist.max())

    def min_positive_distance(self) -> float:
        off = self.dist[~np.eye(self.n, dtype=bool)]
        return float(off.min())


@dataclass(frozen=True)
class BallStats:
    center: int
    radius: float
    mass: float


def build_space(dist, mu, cond) -> Space:
    """Validate raw matrices and return an immutable Space.

    Raises MetricViolation (with the witness triple), NonpositiveMeasure, or
    DisconnectedGraph when the corresponding invariant fails.
    """
    dist = np.asarray(dist, dtype=float)
    mu = np.asarray(mu, dtype=float)
    cond = np.asarray(cond, dtype=float)

    n = len(mu)
    if dist.shape != (n, n) or cond.shape != (n, n):
        raise InvalidParams(
            f"shape mismatch: dist {dist.shape}, cond {cond.shape}, mu length {n}"
        )
    for name, arr in (("dist", dist), ("mu", mu), ("cond", cond)):
        if not np.all(np.isfinite(arr)):
            raise InvalidParams(f"{name} contains non-finite entries")

    if np.any(mu <= 0):
        raise NonpositiveMeasure(f"mu must be strictly positive, got min {mu.min()}")

    _check_metric(dist)

    if np.any(cond < 0) or np.any(np.abs(cond - cond.T) > _METRIC_TOL):
        raise InvalidParams("cond must be symmetric and nonnegative")
    if np.any(np.diag(cond) != 0):
        raise InvalidParams("cond must have zero diagonal")
    ncomp, _ = connected_components(csr_matrix(cond > 0), directed=False)
    if ncomp != 1:
        raise DisconnectedGraph(f"conductance graph has {ncomp} components")

    for arr in (dist, mu, cond):
        arr.setflags(write=False)
    return Space(dist=dist, mu=mu, cond=cond)


def _check_metric(dist):
    n = dist.shape[0]
    if np.any(np.diag(dist) != 0):
        raise MetricViolation("nonzero diagonal in distance matrix")
    if np.any(np.abs(dist - dist.T) > _METRIC_TOL):
        raise MetricViolation("distance matrix not symmetric")
    off = dist[~np.eye(n, dtype=bool)]
    if off.size and off.min() <= 0:
        raise MetricViolation("distinct points at nonpositive distance")
    # triangle inequality, vectorized over the middle point
    for j in range(n):
        slack = dist[:, None, j] + dist[j, None, :]  # d(i,j) + d(j,k), shape (n, n)
        bad = dist - slack > _METRIC_TOL * (1.0 + slack)
        if np.any(bad):
            i, k = np.argwhere(bad)[0]
            raise MetricViolation(
                f"triangle inequality fails: d({i},{k})={dist[i, k]} > "
                f"d({i},{j})+d({j},{k})={slack[i, k]} (witness triple {i},{j},{k})"
            )


def ball_measure(space: Space, x: int, r: float) -> float:
    """Mass of the closed ball B(x, r) = {z : d(x, z) <= r}."""
    if r < 0:
        raise InvalidParams(f"radius must be nonnegative, got {r}")
    return float(space.mu[space.dist[x] <= r].sum())


def ball_stats(space: Space, x: int, r: float) -> BallStats:
    return BallStats(center=x, radius=r, mass=ball_measure(space, x, r))


def doubling_stats(space: Space) -> dict:
    """Volume-growth diagnostics: doubling constant and growth-exponent range.

    Radii are sampled dyadically downward from the diameter.  C_D is the worst
    observed ratio mu(B(x,2r))/mu(B(x,r)); b_l and b_u are the extreme
    per-center least-squares slopes of log mu(B(x,r)) against log r.  Purely
    diagnostic: nothing is enforced.
    """
    diam = space.diameter
    rmin = space.min_positive_distance()

    radii = []
    r = diam
    while r >= rmin / 2.0:
        radii.append(r)
        r /= 2.0
    radii = np.array(radii[::-1])

    masses = np.array(
        [[ball_measure(space, x, r) for r in radii] for x in range(space.n)]
    )

    cd = 0.0
    for i, r in enumerate(radii):
        j = np.searchsorted(radii, 2.0 * r)
        col2 = masses[:, j] if j < len(radii) else np.full(space.n, space.total_mass)
        cd = max(cd, float(np.max(col2 / masses[:, i])))

    fit = radii >= rmin
    slopes = []
    if fit.sum() >= 2:
        logr = np.log(radii[fit])
        for x in range(space.n):
            logm = np.log(masses[x, fit])
            slopes.append(float(np.polyfit(logr, logm, 1)[0]))
    b_l = min(slopes) if slopes else float("nan")
    b_u = max(slopes) if slopes else float("nan")
    return {"C_D": cd, "b_l": b_l, "b_u": b_u}


def _shortest_path_metric(cond):
    # unit edge lengths on the conductance graph
    adj = csr_matrix((cond > 0).astype(float))
    return shortest_path(adj, method="D", directed=False, unweighted=True)


def fixture(kind: str, **params) -> Space:
    """Deterministic canonical spaces: path, grid2d, dumbbell, random_geometric."""
    builders = {
        "path": _fixture_path,
        "grid2d": _fixture_grid2d,
        "dumbbell": _fixture_dumbbell,
        "random_geometric": _fixture_random_geometric,
    }
    if kind not in builders:
        raise InvalidParams(f"unknown fixture kind {kind!r}; valid: {sorted(builders)}")
    return builders[kind](**params)


def _fixture_path(n: int) -> Space:
    if n < 2:
        raise InvalidParams("path fixture needs n >= 2")
    cond = np.zeros((n, n))
    idx = np.arange(n - 1)
    cond[idx, idx + 1] = cond[idx + 1, idx] = 1.0
    ii = np.arange(n)
    dist = np.abs(ii[:, None] - ii[None, :]).astype(float)
    return build_space(dist, np.ones(n), cond)


def _fixture_grid2d(nx: int, ny: int | None = None) -> Space:
    ny = nx if ny is None else ny
    if nx < 2 or ny < 2:
        raise InvalidParams("grid2d fixture needs nx, ny >= 2")
    n = nx * ny
    cond = np.zeros((n, n))

    def node(i, j):
        return i * ny + j

    for i in range(nx):
        for j in range(ny):
            if i + 1 < nx:
                cond[node(i, j), node(i + 1, j)] = cond[node(i + 1, j), node(i, j)] = 1.0
            if j + 1 < ny:
                cond[node(i, j), node(i, j + 1)] = cond[node(i, j + 1), node(i, j)] = 1.0
    return build_space(_shortest_path_metric(cond), np.ones(n), cond)


def _fixture_dumbbell(clique: int, bridge: int = 0) -> Space:
    """Two complete graphs on `clique` vertices joined by a path with
    `bridge` intermediate vertices (bridge=0 joins them by a single edge)."""
    if clique < 2 or bridge < 0:
        raise InvalidParams("dumbbell fixture needs clique >= 2, bridge >= 0")
    n = 2 * clique + bridge
    cond = np.zeros((n, n))
    left = range(clique)
    right = range(clique + bridge, n)
    for block in (left, right):
        for i in block:
            for j in block:
                if i != j:
                    cond[i, j] = 1.0
    chain = [clique - 1, *range(clique, clique + bridge), clique + bridge]
    for u, v in zip(chain[:-1], chain[1:]):
        cond[u, v] = cond[v, u] = 1.0
    return build_space(_shortest_path_metric(cond), np.ones(n), cond)


def _fixture_random_geometric(n: int, radius: float, seed: int) -> Space:
    """Points in the unit square, edges within `radius`, Euclidean metric."""
    if n < 2 or radius <= 0:
        raise InvalidParams("random_geometric fixture needs n >= 2, radius > 0")
    rng = np.random.default_rng(seed)
    pts = rng.random((n, 2))
    diff = pts[:, None, :] - pts[None, :, :]
    dist = np.sqrt((diff * diff).sum(-1))
    cond = ((dist <= radius) & ~np.eye(n, dtype=bool)).astype(float)
    return build_space(dist, np.ones(n), cond)


def space_to_json(space: Space) -> str:
    return json.dumps(
        {
            "n": space.n,
            "dist": space.dist.tolist(),
            "mu": space.mu.tolist(),
            "cond": space.cond.tolist(),
        }
    )


def space_from_json(text: str) -> Space:
    obj = json.loads(text)
    if "fixture" in obj:
        f = obj["fixture"]
        return fixture(f["kind"], **f.get("params", {}))
    return build_space(obj["dist"], obj["mu"], obj["cond"])
