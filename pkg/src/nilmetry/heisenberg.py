"""Explicit maps of the 3-dimensional Heisenberg group C x R.

Points are float arrays ``[..., (x, y, t)]`` and coincide with heisenberg3
exponential coordinates, so ``h_mul`` agrees with
``bch_product(make_builtin("heisenberg3"), p, q)``.

Includes the inversion j and the conjugate F_lam = j o f_lam o j, which sends
vertical lines to curves only asymptotic to vertical lines.  Also includes the
surrogate boundary quasi-metric d_2 and lifts of planar maps with constant
Jacobian determinant.
"""
from __future__ import annotations

import threading
import warnings
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable

import numpy as np
from scipy import integrate
from scipy.interpolate import RegularGridInterpolator
from scipy.spatial import ConvexHull
from scipy.spatial.distance import pdist

from .metrics import directed_hausdorff, koranyi_distance

FD_STEP = 1e-6


class IntegrabilityError(ValueError):
    """The two quadrature paths for h_0 disagree: the gradient field has curl."""


def hpoint(z, t=0.0) -> np.ndarray:
    z = np.asarray(z, dtype=complex)
    t = np.asarray(t, dtype=float)
    z, t = np.broadcast_arrays(z, t)
    return np.stack([z.real, z.imag, t], axis=-1)


def h_mul(p, q) -> np.ndarray:
    """(z1, t1) * (z2, t2) = (z1 + z2, t1 + t2 + 2 Im(z1 conj(z2)))."""
    p = np.asarray(p, dtype=float)
    q = np.asarray(q, dtype=float)
    x1, y1, t1 = p[..., 0], p[..., 1], p[..., 2]
    x2, y2, t2 = q[..., 0], q[..., 1], q[..., 2]
    return np.stack([x1 + x2, y1 + y2, t1 + t2 + 2.0 * (y1 * x2 - x1 * y2)], axis=-1)


def h_inv(p) -> np.ndarray:
    return -np.asarray(p, dtype=float)


def projection(p) -> np.ndarray:
    """pi: (z, t) -> z, returned as complex."""
    p = np.asarray(p, dtype=float)
    return p[..., 0] + 1j * p[..., 1]


def dilate(a, p) -> np.ndarray:
    p = np.asarray(p, dtype=float)
    a = np.asarray(a, dtype=float)[..., None]
    return p * np.concatenate(np.broadcast_arrays(a, a, a * a), axis=-1)


def _nonzero(p):
    p = np.asarray(p, dtype=float)
    if np.any(np.all(p == 0, axis=-1)):
        raise ValueError("the Heisenberg inversion is undefined at the origin")
    return p


def inversion_j(p) -> np.ndarray:
    """j(z, t) = (z / (i t - |z|^2), -t / (t^2 + |z|^4)) away from the origin."""
    p = _nonzero(p)
    z = projection(p)
    t = p[..., 2]
    r2 = np.abs(z) ** 2
    w = z / (1j * t - r2)
    return np.stack([w.real, w.imag, -t / (t * t + r2 * r2)], axis=-1)


def inversion_j_components(p) -> np.ndarray:
    """The same map written in real coordinates."""
    p = _nonzero(p)
    x, y, t = p[..., 0], p[..., 1], p[..., 2]
    r2 = x * x + y * y
    den = t * t + r2 * r2
    return np.stack([(y * t - x * r2) / den, -(x * t + y * r2) / den, -t / den], axis=-1)


def f_lambda(lam, p) -> np.ndarray:
    """(x + iy, t) -> (lam x + i y / lam, t); an automorphism for every lam > 0."""
    if lam <= 0:
        raise ValueError("lambda must be positive")
    p = np.asarray(p, dtype=float)
    return np.stack([lam * p[..., 0], p[..., 1] / lam, p[..., 2]], axis=-1)


def F_lambda(lam, p) -> np.ndarray:
    """j o f_lam o j, extended by F(0) = 0.  Its inverse is F_(1/lam)."""
    if lam <= 0:
        raise ValueError("lambda must be positive")
    p = np.asarray(p, dtype=float)
    flat = p.reshape(-1, 3)
    out = np.zeros_like(flat)
    live = np.any(flat != 0, axis=-1)
    if np.any(live):
        out[live] = inversion_j(f_lambda(lam, inversion_j(flat[live])))
    return out.reshape(p.shape)


def boundary_d2(p, q) -> np.ndarray | float:
    """Surrogate chordal quasi-metric on H + {inf}; pass ``None`` for infinity.

    d2(x, inf) = 1 / (1 + d(x, 0)) and
    d2(x, y) = d(x, y) / ((1 + d(x, 0)) (1 + d(y, 0))), with d the Koranyi distance.
    """
    if p is None and q is None:
        return 0.0
    if p is None or q is None:
        x = q if p is None else p
        return 1.0 / (1.0 + koranyi_distance(np.zeros(3), x))
    dp = koranyi_distance(np.zeros(3), p)
    dq = koranyi_distance(np.zeros(3), q)
    return koranyi_distance(p, q) / ((1.0 + dp) * (1.0 + dq))


# -- vertical lines ----------------------------------------------------------------

@dataclass(frozen=True)
class VerticalLine:
    """Samples of q_z = pi^-1(z) with t in [t_min, t_max].

    ``spacing="log"`` puts samples at 0 and at geometrically spaced heights on
    both sides, which resolves the region near t = 0 while reaching far out.
    """

    base: complex
    t_min: float
    t_max: float
    samples: int = 2001
    spacing: str = "linear"
    log_floor: float = 1e-3

    def __post_init__(self):
        if not self.t_min < self.t_max:
            raise ValueError("need t_min < t_max")
        if self.samples < 2:
            raise ValueError("need at least two samples")
        if self.spacing not in ("linear", "log"):
            raise ValueError(f"unknown spacing {self.spacing!r}")

    def heights(self) -> np.ndarray:
        if self.spacing == "linear":
            return np.linspace(self.t_min, self.t_max, self.samples)
        reach = max(abs(self.t_min), abs(self.t_max))
        half = max(1, (self.samples - 1) // 2)
        pos = np.geomspace(min(self.log_floor, reach), reach, half)
        ts = np.concatenate([-pos[::-1], [0.0], pos])
        return ts[(ts >= self.t_min) & (ts <= self.t_max)]

    def points(self) -> np.ndarray:
        return hpoint(complex(self.base), self.heights())


def _min_enclosing_circle(pts: np.ndarray, seed: int = 0) -> tuple:
    """Welzl's algorithm (iterative form) on 2-d points; returns (center, radius)."""
    pts = np.unique(np.round(pts, 15), axis=0)
    rng = np.random.default_rng(seed)
    pts = pts[rng.permutation(len(pts))]

    def circle2(a, b):
        c = 0.5 * (a + b)
        return c, float(np.linalg.norm(a - c))

    def circle3(a, b, c):
        d = 2.0 * (a[0] * (b[1] - c[1]) + b[0] * (c[1] - a[1]) + c[0] * (a[1] - b[1]))
        if abs(d) < 1e-300:
            far = max(((a, b), (a, c), (b, c)), key=lambda uv: np.linalg.norm(uv[0] - uv[1]))
            return circle2(*far)
        sa, sb, sc = a @ a, b @ b, c @ c
        ux = (sa * (b[1] - c[1]) + sb * (c[1] - a[1]) + sc * (a[1] - b[1])) / d
        uy = (sa * (c[0] - b[0]) + sb * (a[0] - c[0]) + sc * (b[0] - a[0])) / d
        center = np.array([ux, uy])
        return center, float(np.linalg.norm(a - center))

    def inside(circle, p):
        return np.linalg.norm(p - circle[0]) <= circle[1] * (1 + 1e-12) + 1e-15

    circle = (pts[0], 0.0)
    for i in range(1, len(pts)):
        if inside(circle, pts[i]):
            continue
        circle = (pts[i], 0.0)
        for j in range(i):
            if inside(circle, pts[j]):
                continue
            circle = circle2(pts[i], pts[j])
            for k in range(j):
                if not inside(circle, pts[k]):
                    circle = circle3(pts[i], pts[j], pts[k])
    return circle


def planar_diameter(pts: np.ndarray) -> float:
    pts = np.unique(np.asarray(pts, dtype=float), axis=0)
    if len(pts) < 2:
        return 0.0
    if len(pts) > 3000:
        try:
            pts = pts[ConvexHull(pts).vertices]
        except Exception:  # degenerate (collinear) sets: keep the extremes per axis
            keep = np.unique(np.concatenate([np.argmin(pts, 0), np.argmax(pts, 0)]))
            pts = pts[keep]
    return float(pdist(pts).max())


@dataclass
class LineImage:
    best_base: complex
    hausdorff: float
    pi_diameter: float
    t_range: tuple
    image: np.ndarray = field(repr=False)


def line_image_analysis(fmap: Callable, line: VerticalLine, metric=koranyi_distance) -> LineImage:
    """Compare the image of a sampled vertical line with the nearest vertical line.

    The Koranyi distance from a point (zeta, s) to q_w is |zeta - w|.  The best
    base w is therefore the center of the smallest disk containing the
    projected image, and the one-sided deviation is that disk's radius.  For
    the reverse direction, q_w is sampled at the heights matching each image
    point.  The estimate covers the sampled parameter range only.
    """
    pts = line.points()
    if len(pts) == 0:
        raise ValueError("empty vertical line sample")
    img = np.asarray(fmap(pts), dtype=float)
    proj = img[:, :2]
    center, radius = _min_enclosing_circle(proj)
    w = complex(center[0], center[1])
    wpt = np.array([center[0], center[1], 0.0])
    heights = img[:, 2] - 2.0 * (wpt[1] * img[:, 0] - wpt[0] * img[:, 1])
    on_line = np.column_stack([np.full(len(img), center[0]), np.full(len(img), center[1]), heights])
    forward = directed_hausdorff(img, on_line, metric)
    backward = directed_hausdorff(on_line, img, metric)
    return LineImage(w, max(forward, backward, 0.0), planar_diameter(proj),
                     (float(line.t_min), float(line.t_max)), img)


# -- planar maps and lifts ------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class PlanarMap:
    """f: R^2 -> R^2 with declared Jacobian determinant ``det`` (a.e.).

    ``kinks_x`` / ``kinks_y`` list vertical / horizontal lines where f may fail
    to be differentiable in x / y.  Finite differences never straddle them.
    """

    func: Callable
    det: float
    kinks_x: tuple = ()
    kinks_y: tuple = ()
    inverse: Callable | None = None
    name: str = "custom"

    def __call__(self, xy) -> np.ndarray:
        return np.asarray(self.func(np.asarray(xy, dtype=float)), dtype=float)


def planar_identity() -> PlanarMap:
    return PlanarMap(lambda p: np.array(p, dtype=float), 1.0, inverse=lambda p: np.array(p), name="id")


def planar_f_lambda(lam: float) -> PlanarMap:
    if lam <= 0:
        raise ValueError("lambda must be positive")
    scale = np.array([lam, 1.0 / lam])
    return PlanarMap(lambda p: p * scale, 1.0, inverse=lambda p: p / scale,
                     name=f"f_lambda:{lam:g}")


def _cube_root_ramp(y):
    y = np.asarray(y, dtype=float)
    return np.where(np.abs(y) <= 1.0, y, np.cbrt(y))


def cube_root_shear_map() -> PlanarMap:
    """f(x + iy) = (x + g(y)) + iy with g(y) = y on |y| <= 1 and y^(1/3) beyond."""

    def func(p):
        return np.stack([p[..., 0] + _cube_root_ramp(p[..., 1]), p[..., 1]], axis=-1)

    def inv(p):
        return np.stack([p[..., 0] - _cube_root_ramp(p[..., 1]), p[..., 1]], axis=-1)

    return PlanarMap(func, 1.0, kinks_y=(-1.0, 1.0), inverse=inv, name="cube_root_shear")


def cube_root_shear_h0(y):
    """Closed form with h_0 = -1 on |y| <= 1; differs from :class:`Lift` by a constant."""
    y = np.asarray(y, dtype=float)
    return np.where(np.abs(y) <= 1.0, -1.0, -np.abs(y) ** (4.0 / 3.0))


def planar_from_grid(path, det: float | None = None) -> PlanarMap:
    """Tabulated map from plain-text rows ``x y f1 f2`` on a rectangular grid."""
    rows = np.loadtxt(path, ndmin=2)
    if rows.shape[1] != 4:
        raise ValueError("grid file rows must be: x y f1 f2")
    xs, ys = np.unique(rows[:, 0]), np.unique(rows[:, 1])
    if len(xs) * len(ys) != len(rows):
        raise ValueError("grid file must cover a full rectangular grid")
    order = np.lexsort((rows[:, 1], rows[:, 0]))
    vals = rows[order, 2:].reshape(len(xs), len(ys), 2)
    method = "cubic" if min(len(xs), len(ys)) >= 4 else "linear"
    interp = RegularGridInterpolator((xs, ys), vals, method=method)

    def func(p):
        p = np.asarray(p, dtype=float)
        return interp(p.reshape(-1, 2)).reshape(p.shape)

    fmap = PlanarMap(func, 1.0, name=f"grid:{Path(path).name}")
    if det is None:
        gx, gy = np.meshgrid(xs[1:-1], ys[1:-1], indexing="ij")
        inner = np.column_stack([gx.ravel(), gy.ravel()])
        det = float(np.median(det_estimate(fmap, inner))) if len(inner) else 1.0
    return PlanarMap(func, float(det), name=fmap.name)


def planar_map(name: str, base: Path | None = None) -> PlanarMap:
    """``id``, ``f_lambda:<lam>``, ``cube_root_shear`` (alias ``paper_example``) or ``@grid-file``."""
    name = name.strip()
    if name.startswith("@"):
        path = Path(name[1:])
        if base is not None and not path.is_absolute():
            path = base / path
        return planar_from_grid(path)
    key, _, arg = name.partition(":")
    if key == "id":
        return planar_identity()
    if key in ("f_lambda", "flambda"):
        return planar_f_lambda(float(arg))
    if key in ("cube_root_shear", "paper_example"):
        return cube_root_shear_map()
    raise ValueError(f"unknown planar map {name!r}")


def _partial(f: PlanarMap, pts: np.ndarray, axis: int, step: float = FD_STEP,
             prefer: int = 0) -> np.ndarray:
    """d f / d(axis) by finite differences that never cross a declared kink.

    Central differences away from kinks; second-order one-sided differences
    pointing away from a nearby kink; on a kink, the side ``prefer`` (+1/-1)
    is used, or NaN when ``prefer`` is 0.
    """
    pts = np.atleast_2d(np.asarray(pts, dtype=float))
    c = pts[:, axis]
    h = step * np.maximum(1.0, np.abs(c))
    e = np.zeros(2)
    e[axis] = 1.0
    side = np.zeros(len(pts))
    on_kink = np.zeros(len(pts), dtype=bool)
    for k in (f.kinks_x if axis == 0 else f.kinks_y):
        s = c - k
        near = np.abs(s) <= 2.0 * h
        side = np.where(near & (s > 0), 1.0, side)
        side = np.where(near & (s < 0), -1.0, side)
        on_kink |= s == 0
    side = np.where(on_kink, float(prefer), side)
    hv = h[:, None] * e
    central = (f(pts + hv) - f(pts - hv)) / (2.0 * h[:, None])
    sv = (side[:, None] * hv)
    one_sided = side[:, None] * (-3.0 * f(pts) + 4.0 * f(pts + sv) - f(pts + 2.0 * sv)) / (2.0 * h[:, None])
    out = np.where((side == 0)[:, None], central, one_sided)
    out[on_kink & (prefer == 0)] = np.nan
    return out


def jacobian(f: PlanarMap, pts, step: float = FD_STEP) -> np.ndarray:
    """Finite-difference Df with shape (..., 2, 2); rows are (f1, f2)."""
    pts = np.asarray(pts, dtype=float)
    flat = pts.reshape(-1, 2)
    cols = [_partial(f, flat, 0, step), _partial(f, flat, 1, step)]
    return np.stack(cols, axis=-1).reshape(pts.shape[:-1] + (2, 2))


def det_estimate(f: PlanarMap, z, step: float = FD_STEP) -> np.ndarray:
    if step <= 0:
        raise ValueError("step must be positive")
    return np.linalg.det(jacobian(f, z, step))


def _gradient_component(f: PlanarMap, pts: np.ndarray, axis: int, step: float,
                        prefer: int = 0) -> np.ndarray:
    # d h0 / d(axis) = (-2 lam y, 2 lam x)[axis] - 2 <d f / d(axis), (-f2, f1)>
    lam = f.det
    vals = f(pts)
    rot = np.stack([-vals[:, 1], vals[:, 0]], axis=-1)
    df = _partial(f, pts, axis, step, prefer)
    base = -2.0 * lam * pts[:, 1] if axis == 0 else 2.0 * lam * pts[:, 0]
    return base - 2.0 * np.sum(df * rot, axis=-1)


def lift_gradient(f: PlanarMap, z, step: float = FD_STEP) -> np.ndarray:
    """grad h_0 = (-2 lam y, 2 lam x) - 2 Df^T (-f2, f1).  NaN marks components
    evaluated exactly on a declared kink."""
    z = np.asarray(z, dtype=float)
    flat = np.atleast_2d(z.reshape(-1, 2))
    out = np.stack([_gradient_component(f, flat, 0, step),
                    _gradient_component(f, flat, 1, step)], axis=-1)
    return out.reshape(z.shape)


def discrete_curl(f: PlanarMap, pts, h: float = 1e-2, step: float = FD_STEP) -> np.ndarray:
    """Central-difference curl d(G_y)/dx - d(G_x)/dy of the h_0 gradient field G."""
    pts = np.atleast_2d(np.asarray(pts, dtype=float))
    ex, ey = np.array([h, 0.0]), np.array([0.0, h])
    gy = lift_gradient(f, pts + ex, step)[:, 1] - lift_gradient(f, pts - ex, step)[:, 1]
    gx = lift_gradient(f, pts + ey, step)[:, 0] - lift_gradient(f, pts - ey, step)[:, 0]
    return (gy - gx) / (2.0 * h)


def _segment_integral(f, start, length, axis, step, tol):
    """Integral of d h0/d(axis) from ``start`` moving ``length`` along ``axis``."""
    if length == 0:
        return 0.0
    start = np.asarray(start, dtype=float)
    lo, hi = sorted((start[axis], start[axis] + length))
    kinks = f.kinks_x if axis == 0 else f.kinks_y
    breaks = [k for k in kinks if lo < k < hi]

    def integrand(s):
        p = start.copy()
        p[axis] = s
        return float(_gradient_component(f, p[None, :], axis, step)[0])

    # finite-difference noise can exhaust subdivisions; the two-path check guards accuracy
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", integrate.IntegrationWarning)
        value, _ = integrate.quad(integrand, lo, hi, points=breaks or None,
                                  epsabs=tol, epsrel=1e-11, limit=400)
    return value if length > 0 else -value


def lift_h0(f: PlanarMap, z, tol: float = 1e-9, path_tol: float = 1e-6,
            step: float = FD_STEP) -> float:
    """h_0(z) normalized by h_0(0) = 0.

    Integrates the gradient along x-then-y and along y-then-x, raising
    :class:`IntegrabilityError` when the two disagree by more than
    ``path_tol * (1 + |h_0|)``, and returns their average.
    """
    x, y = (float(v) for v in np.asarray(z, dtype=float).reshape(2))
    a = (_segment_integral(f, (0.0, 0.0), x, 0, step, tol)
         + _segment_integral(f, (x, 0.0), y, 1, step, tol))
    b = (_segment_integral(f, (0.0, 0.0), y, 1, step, tol)
         + _segment_integral(f, (0.0, y), x, 0, step, tol))
    if abs(a - b) > path_tol * (1.0 + abs(a)):
        raise IntegrabilityError(f"h_0 path integrals disagree at {(x, y)}: {a} vs {b} "
                                 f"(is det Df constant?)")
    return 0.5 * (a + b)


class Lift:
    """F(z, t) = (f(z), lam t + h_0(z)), lam = det Df, with h_0 memoized per z.

    The memo is a plain dict guarded for fills; lookups are lock-free and a
    racing fill stores the same value.
    """

    def __init__(self, f: PlanarMap, tol: float = 1e-9, path_tol: float = 1e-6):
        self.f = f
        self.tol = tol
        self.path_tol = path_tol
        self._cache: dict = {}
        self._lock = threading.Lock()

    def h0(self, z) -> np.ndarray:
        z = np.asarray(z, dtype=float)
        flat = z.reshape(-1, 2)
        out = np.empty(len(flat))
        for i, (x, y) in enumerate(flat):
            key = (float(x), float(y))
            val = self._cache.get(key)
            if val is None:
                val = lift_h0(self.f, key, self.tol, self.path_tol)
                with self._lock:
                    self._cache.setdefault(key, val)
            out[i] = val
        return out.reshape(z.shape[:-1])

    def __call__(self, p) -> np.ndarray:
        p = np.asarray(p, dtype=float)
        z = p[..., :2]
        fz = self.f(z)
        return np.concatenate([fz, (self.f.det * p[..., 2] + self.h0(z))[..., None]], axis=-1)

    def inverse(self, q) -> np.ndarray:
        if self.f.inverse is None:
            raise NotImplementedError(f"{self.f.name} has no inverse available")
        q = np.asarray(q, dtype=float)
        z = np.asarray(self.f.inverse(q[..., :2]), dtype=float)
        t = (q[..., 2] - self.h0(z)) / self.f.det
        return np.concatenate([z, t[..., None]], axis=-1)


def lift_apply(f: PlanarMap | Lift, p) -> np.ndarray:
    lift = f if isinstance(f, Lift) else Lift(f)
    return lift(p)
