"""Homogeneous gauges, quasi-metrics and path-length distance estimates."""
from __future__ import annotations

import itertools
import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import minimize

from .lie_core import (
    AlgebraError,
    GradedLieAlgebra,
    bch_product,
    bracket,
    inverse,
    is_carnot,
    make_builtin,
)
from .sampling import SamplerConfig, map_blocks

HEISENBERG = make_builtin("heisenberg3")
TRIANGLE_EPS = 1e-12


class HomogeneousGauge:
    """|n|_h = sum_i |pi_i(n)|^(1/i) with the coordinate Euclidean norm on each layer."""

    def __init__(self, alg: GradedLieAlgebra):
        self.alg = alg

    def norm(self, n) -> np.ndarray:
        n = self.alg.check_point(n)
        total = np.zeros(n.shape[:-1])
        for i in range(1, self.alg.step + 1):
            total = total + np.linalg.norm(self.alg.layer(n, i), axis=-1) ** (1.0 / i)
        return total

    def distance(self, x, y) -> np.ndarray:
        return self.norm(bch_product(self.alg, inverse(x), y))

    __call__ = distance

    def __repr__(self):
        return f"HomogeneousGauge({self.alg!r})"


def homogeneous_norm(gauge: HomogeneousGauge, n) -> np.ndarray:
    return gauge.norm(n)


def dh_distance(gauge: HomogeneousGauge, x, y) -> np.ndarray:
    """d_h(x, y) = |(-x) * y|_h.  A quasi-metric: not symmetric in general."""
    return gauge.distance(x, y)


def koranyi_gauge(p) -> np.ndarray:
    p = np.asarray(p, dtype=float)
    z2 = p[..., 0] ** 2 + p[..., 1] ** 2
    return (z2 ** 2 + p[..., 2] ** 2) ** 0.25


def koranyi_distance(p, q) -> np.ndarray:
    """Gauge (|z|^4 + t^2)^(1/4) of (-p) * q on the Heisenberg group."""
    return koranyi_gauge(bch_product(HEISENBERG, inverse(p), q))


def directed_hausdorff(a, b, metric, chunk: int = 512) -> float:
    """sup over a of inf over b of metric(a, b), brute force."""
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    if len(a) == 0 or len(b) == 0:
        raise ValueError("Hausdorff estimate needs nonempty point sets")
    worst = 0.0
    for start in range(0, len(a), chunk):
        block = a[start:start + chunk]
        d = metric(block[:, None, :], b[None, :, :])
        worst = max(worst, float(d.min(axis=1).max()))
    return worst


# -- triangle constant -------------------------------------------------------------

@dataclass
class TriangleConstantEstimate:
    M_hat: float
    sample_count: int
    witness: tuple | None = None
    degenerate: bool = False
    seed: int | None = None

    def merge(self, other: "TriangleConstantEstimate") -> "TriangleConstantEstimate":
        best = self if self.M_hat >= other.M_hat else other
        return TriangleConstantEstimate(best.M_hat, self.sample_count + other.sample_count,
                                        best.witness, self.degenerate and other.degenerate,
                                        self.seed)

    def rows(self):
        witness = None if self.witness is None else np.concatenate(self.witness)
        yield ("M_hat", self.M_hat, self.sample_count, self.seed, witness)


def estimate_triangle_constant(gauge: HomogeneousGauge, sampler: SamplerConfig,
                               n_triples: int) -> TriangleConstantEstimate:
    """Largest sampled d(n1, n3) / (d(n1, n2) + d(n2, n3)); a lower bound on M."""
    if n_triples < 1:
        raise ValueError("need at least one triple")
    alg = gauge.alg
    sizes = sampler.blocks(n_triples)

    def block(b):
        rng = sampler.rng(7, b)
        n1, n2, n3 = (sampler.draw(alg, rng, sizes[b]) for _ in range(3))
        den = gauge.distance(n1, n2) + gauge.distance(n2, n3)
        keep = den >= TRIANGLE_EPS
        if not np.any(keep):
            return 1.0, None, True
        ratio = np.where(keep, gauge.distance(n1, n3) / np.where(keep, den, 1.0), -np.inf)
        k = int(np.argmax(ratio))
        return float(ratio[k]), (n1[k], n2[k], n3[k]), False

    results = map_blocks(block, len(sizes))
    best, witness, degenerate = 1.0, None, all(r[2] for r in results)
    for value, wit, _ in results:
        if wit is not None and (witness is None or value > best):
            best, witness = value, wit
    if degenerate:
        warnings.warn("all sampled triples were degenerate; reporting M_hat = 1")
    return TriangleConstantEstimate(max(best, 1.0), n_triples, witness, degenerate, sampler.seed)


# -- paths -------------------------------------------------------------------------

@dataclass
class PathSpec:
    """Polyline in exponential coordinates; each segment is split into
    ``2**refinement`` equal coordinate pieces when measured."""

    points: np.ndarray
    refinement: int = 0

    def __post_init__(self):
        self.points = np.asarray(self.points, dtype=float)
        if self.points.ndim != 2 or len(self.points) < 2:
            raise ValueError("a path needs at least two points")
        if not np.all(np.isfinite(self.points)):
            raise ValueError("path coordinates must be finite")
        if self.refinement < 0:
            raise ValueError("refinement level must be nonnegative")

    def refined(self) -> np.ndarray:
        k = 2 ** self.refinement
        s = np.arange(k) / k
        a, b = self.points[:-1], self.points[1:]
        pieces = a[:, None, :] + s[None, :, None] * (b - a)[:, None, :]
        return np.concatenate([pieces.reshape(-1, self.points.shape[1]), self.points[-1:]])


def riemannian_path_length(alg: GradedLieAlgebra, path: PathSpec) -> float:
    """Sum of Euclidean norms of the log increments (-p_i) * p_{i+1}.

    First-order approximation of the left invariant Riemannian length for the
    metric that is orthonormal in the coordinate basis at the identity.
    """
    pts = alg.check_point(path.refined())
    steps = bch_product(alg, inverse(pts[:-1]), pts[1:])
    return float(np.linalg.norm(steps, axis=1).sum())


# horizontal words: sequences of V_1 increments whose product reaches a target

def _bracket_basis(alg: GradedLieAlgebra, k: int) -> tuple:
    """Left-normed V_1 words whose brackets form a basis of V_k."""
    d1 = alg.layer_dims[0]
    basis = np.eye(alg.dim)
    words, vectors = [], []
    for word in itertools.product(range(d1), repeat=k):
        v = basis[word[-1]]
        for letter in reversed(word[:-1]):
            v = bracket(alg, basis[letter], v)
        block = alg.layer(v, k)
        trial = np.array(vectors + [block])
        if np.linalg.matrix_rank(trial, tol=1e-10) == len(trial):
            words.append(word)
            vectors.append(block)
        if len(vectors) == alg.layer_dims[k - 1]:
            break
    if len(vectors) < alg.layer_dims[k - 1]:
        raise AlgebraError(f"V_1 does not generate layer {k}; not a Carnot algebra")
    return words, np.array(vectors).T


def _commutator(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    return np.concatenate([a, b, -a[::-1], -b[::-1]])


class HorizontalPlanner:
    """Builds horizontal increment words reaching arbitrary targets."""

    def __init__(self, alg: GradedLieAlgebra, tol: float = 1e-12):
        if not is_carnot(alg):
            raise AlgebraError(f"{alg!r} is not Carnot graded; horizontal paths unavailable")
        self.alg = alg
        self.tol = tol
        self.bases = {k: _bracket_basis(alg, k) for k in range(2, alg.step + 1)}

    def endpoint(self, incs, start=None) -> np.ndarray:
        alg = self.alg
        out = np.zeros(alg.dim) if start is None else np.asarray(start, dtype=float)
        for h in incs:
            out = bch_product(alg, out, alg.embed(h, 1))
        return out

    def word(self, target) -> np.ndarray:
        alg = self.alg
        target = np.asarray(target, dtype=float)
        scale = 1.0 + float(np.abs(target).max())
        d1 = alg.layer_dims[0]
        first = alg.layer(target, 1)
        incs = [first[None, :]] if np.linalg.norm(first) > 0 else []
        current = alg.embed(first, 1)
        for k in range(2, alg.step + 1):
            rest = alg.layer(bch_product(alg, inverse(current), target), k)
            if np.linalg.norm(rest) <= self.tol * scale:
                continue
            words, mat = self.bases[k]
            coeffs = np.linalg.solve(mat, rest)
            for word, c in zip(words, coeffs):
                if c == 0:
                    continue
                size = abs(c) ** (1.0 / k)
                loop = np.zeros((1, d1))
                loop[0, word[-1]] = size
                for pos in range(k - 2, -1, -1):
                    seg = np.zeros((1, d1))
                    seg[0, word[pos]] = size * (np.sign(c) if pos == 0 else 1.0)
                    loop = _commutator(seg, loop)
                incs.append(loop)
                current = self.endpoint(loop, current)
        if not incs:
            return np.zeros((0, d1))
        return np.concatenate(incs)


def _coordinate_descent(objective, x0: np.ndarray, budget: int, rng, step: float,
                        min_step: float, subdivide=None, max_subdivisions: int = 3):
    """Greedy +/- coordinate moves with step halving; best-so-far semantics."""
    x = x0.copy()
    best = objective(x)
    evals = 1
    subdivisions = 0
    while evals < budget:
        improved = False
        for idx in rng.permutation(x.size):
            for sign in (1.0, -1.0):
                if evals >= budget:
                    return best, x
                trial = x.copy()
                trial.flat[idx] += sign * step
                value = objective(trial)
                evals += 1
                if value < best:
                    best, x, improved = value, trial, True
                    break
        if not improved:
            step *= 0.5
            if step < min_step:
                if subdivide is None or subdivisions >= max_subdivisions:
                    return best, x
                x = subdivide(x)
                subdivisions += 1
                step = 1e3 * min_step
    return best, x


def distance_upper_bound(alg: GradedLieAlgebra, x, y, mode: str = "riemannian",
                         budget: int = 200, seed: int = 0, n_pieces: int = 4,
                         refinement: int = 2):
    """Minimize path length from x to y by local search.

    Returns ``(value, path_points)``; the value is the length of the returned
    path and never increases with ``budget`` for a fixed seed.

    ``mode="riemannian"``: coordinate descent with subdivision over polyline
    control points, measured by :func:`riemannian_path_length`.  ``budget``
    counts length evaluations.  On Carnot algebras the horizontal path is used
    as a starting candidate when it is shorter than the straight segment.

    ``mode="carnot"``: paths are words of V_1 increments (products of
    one-parameter subgroups).  Their length is minimized by SLSQP with the
    endpoint as an equality constraint.  ``budget`` counts SLSQP iterations.
    Each iterate is closed up exactly by a commutator correction word before
    it is scored, so every reported value is the length of a horizontal path
    reaching y.
    """
    if budget < 1:
        raise ValueError("budget must be positive")
    x = alg.check_point(x)
    y = alg.check_point(y)
    if mode == "carnot":
        return _carnot_upper_bound(alg, x, y, budget)
    if mode != "riemannian":
        raise ValueError(f"unknown mode {mode!r}")
    rng = np.random.default_rng(seed)

    def objective(flat):
        pts = np.vstack([x, flat.reshape(-1, alg.dim), y])
        return riemannian_path_length(alg, PathSpec(pts, refinement))

    def subdivide(flat):
        pts = np.vstack([x, flat.reshape(-1, alg.dim), y])
        mids = 0.5 * (pts[:-1] + pts[1:])
        both = np.empty((2 * len(pts) - 1, alg.dim))
        both[0::2], both[1::2] = pts, mids
        return both[1:-1].ravel()

    ts = np.linspace(0.0, 1.0, n_pieces + 1)[1:-1]
    start = (x + ts[:, None] * (y - x)).ravel()
    if alg.step > 1 and is_carnot(alg):
        planner = HorizontalPlanner(alg)
        incs = planner.word(bch_product(alg, inverse(x), y))
        if len(incs) > 1:
            pts = [x]
            for h in incs[:-1]:
                pts.append(bch_product(alg, pts[-1], alg.embed(h, 1)))
            candidate = np.array(pts[1:]).ravel()
            if objective(candidate) < objective(start):
                start = candidate

    scale = max(objective(start), 1e-12)
    best, flat = _coordinate_descent(objective, start, budget, rng,
                                     step=0.1 * scale, min_step=1e-7 * scale,
                                     subdivide=subdivide)
    return best, np.vstack([x, flat.reshape(-1, alg.dim), y])


def _carnot_upper_bound(alg, x, y, budget, min_pieces=16):
    planner = HorizontalPlanner(alg)
    target = bch_product(alg, inverse(x), y)
    d1 = alg.layer_dims[0]
    init = planner.word(target)
    if len(init) == 0:
        return 0.0, x[None, :].copy()
    init = np.repeat(init / -(-min_pieces // len(init)), -(-min_pieces // len(init)), axis=0)

    def close(flat):
        incs = flat.reshape(-1, d1)
        gap = bch_product(alg, inverse(planner.endpoint(incs)), target)
        return np.concatenate([incs, planner.word(gap)])

    def closed_length(flat):
        return float(np.linalg.norm(close(flat), axis=1).sum())

    scale = float(np.linalg.norm(init, axis=1).sum())
    eps = 1e-9 * scale

    def smooth_length(flat):
        incs = flat.reshape(-1, d1)
        return float(np.sqrt((incs ** 2).sum(axis=1) + eps ** 2).sum())

    def residual(flat):
        return (planner.endpoint(flat.reshape(-1, d1)) - target) / scale

    best = [closed_length(init.ravel()), init.ravel()]

    def track(flat):
        value = closed_length(flat)
        if value < best[0]:
            best[0], best[1] = value, flat.copy()

    with warnings.catch_warnings():
        warnings.simplefilter("ignore", RuntimeWarning)
        res = minimize(smooth_length, init.ravel(), method="SLSQP",
                       constraints=[{"type": "eq", "fun": residual}],
                       callback=track, options={"maxiter": budget, "ftol": 1e-12})
    del res
    incs = close(best[1])
    pts = [x]
    for h in incs:
        pts.append(bch_product(alg, pts[-1], alg.embed(h, 1)))
    return best[0], np.array(pts)


# -- ball-box diagnostic ------------------------------------------------------------

@dataclass
class BallBoxReport:
    a_hat: float
    kept: int
    sampled: int
    seed: int | None
    witness: np.ndarray | None = None
    violations: list = field(default_factory=list)

    def rows(self):
        yield ("a_hat", self.a_hat, self.kept, self.seed, self.witness)


def ball_box_diagnostic(alg: GradedLieAlgebra, sampler: SamplerConfig, budget: int = 300,
                        count: int | None = None) -> BallBoxReport:
    """Smallest a >= 1 with d/a <= |n|_h <= a r d over samples where d >= 1.

    d is :func:`distance_upper_bound` in Riemannian mode, so ``a_hat`` is a
    diagnostic for this estimator, not a certified constant.
    """
    gauge = HomogeneousGauge(alg)
    pts = sampler.points(alg, count, stream=11)
    r = alg.step

    def one(i):
        d, _ = distance_upper_bound(alg, np.zeros(alg.dim), pts[i], budget=budget,
                                    seed=sampler.seed + i)
        return d

    dists = np.array(map_blocks(one, len(pts)))
    norms = gauge.norm(pts)
    keep = dists >= 1.0
    a_hat, witness = 1.0, None
    violations = []
    for i in np.nonzero(keep)[0]:
        need = max(norms[i] / (r * dists[i]), dists[i] / norms[i])
        if need > 1.0:
            violations.append((pts[i], float(need)))
        if need > a_hat:
            a_hat, witness = float(need), pts[i]
    return BallBoxReport(a_hat, int(keep.sum()), len(pts), sampler.seed, witness, violations)

