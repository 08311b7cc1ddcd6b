"""Shear maps, affine maps and their composites.

A shear ``S_g(n) = n + g(pi_1(n))`` moves points only along the top layer
V_r.  The shears form an abelian group, ``S_g o S_h = S_{g+h}``, and together
with left translations and automorphisms they generate the generalized affine
maps.
"""
from __future__ import annotations

import re
from dataclasses import dataclass
from pathlib import Path
from typing import Callable

import numpy as np

from .lie_core import (
    GradedLieAlgebra,
    ValidationReport,
    bch_product,
    bracket,
    dilation,
    inverse,
)

AUDIT_PAIRS = 1000
AUDIT_TOL = 1e-9


class LSLipschitzFunction:
    """A map g: V_1 -> V_r with declared large-scale Lipschitz constants (L, A).

    ``func`` takes an array of shape ``(..., dim V_1)`` and returns
    ``(..., dim V_r)``.  Declared constants are spot-checked on random pairs
    at construction unless ``audit=False``.
    """

    def __init__(self, func: Callable, L: float, A: float, label: str = "custom",
                 dims: tuple | None = None, audit: bool = True):
        if L < 0 or A < 0:
            raise ValueError("large-scale Lipschitz constants must be nonnegative")
        self.func = func
        self.L = float(L)
        self.A = float(A)
        self.label = label
        self.dims = dims
        if audit and dims is not None:
            self.audit()

    def __call__(self, x) -> np.ndarray:
        return np.asarray(self.func(np.asarray(x, dtype=float)), dtype=float)

    def __add__(self, other: "LSLipschitzFunction") -> "LSLipschitzFunction":
        if self.dims and other.dims and self.dims != other.dims:
            raise ValueError("cannot add maps between different spaces")
        f, g = self.func, other.func
        return LSLipschitzFunction(lambda x: f(x) + g(x), self.L + other.L, self.A + other.A,
                                   f"({self.label} + {other.label})", self.dims or other.dims,
                                   audit=False)

    def __neg__(self) -> "LSLipschitzFunction":
        f = self.func
        label = self.label[1:] if self.label.startswith("-") else f"-{self.label}"
        return LSLipschitzFunction(lambda x: -f(x), self.L, self.A, label, self.dims,
                                   audit=False)

    def __sub__(self, other):
        return self + (-other)

    def audit(self, pairs: int = AUDIT_PAIRS, seed: int = 0):
        """Raise ValueError if sampled pairs violate |g(x) - g(y)| <= L|x - y| + A."""
        d1 = self.dims[0]
        rng = np.random.default_rng(seed)
        scale = np.exp(rng.uniform(np.log(1e-3), np.log(1e3), size=(pairs, 1)))
        x = rng.uniform(-1, 1, size=(pairs, d1)) * scale
        y = x + rng.uniform(-1, 1, size=(pairs, d1)) * np.exp(
            rng.uniform(np.log(1e-3), np.log(1e3), size=(pairs, 1)))
        lhs = np.linalg.norm(self(x) - self(y), axis=-1)
        rhs = self.L * np.linalg.norm(x - y, axis=-1) + self.A
        worst = np.argmax(lhs - rhs)
        if lhs[worst] > rhs[worst] + AUDIT_TOL * (1 + rhs[worst]):
            raise ValueError(f"{self.label}: declared (L, A) = ({self.L}, {self.A}) violated at "
                             f"x={x[worst]}, y={y[worst]}")

    def __repr__(self):
        return f"LSLipschitzFunction({self.label}, L={self.L}, A={self.A})"


def _direction(dr: int, direction) -> np.ndarray:
    e = np.zeros(dr) if direction is None else np.asarray(direction, dtype=float)
    if direction is None:
        e[0] = 1.0
    return e


def abs_function(alg: GradedLieAlgebra, direction=None) -> LSLipschitzFunction:
    """g(x) = |x| e, with e the first V_r basis vector unless given."""
    d1, dr = alg.layer_dims[0], alg.layer_dims[-1]
    e = _direction(dr, direction)
    return LSLipschitzFunction(lambda x: np.linalg.norm(x, axis=-1)[..., None] * e,
                               np.linalg.norm(e), 0.0, "abs", (d1, dr))


def power_function(alg: GradedLieAlgebra, alpha: float, direction=None) -> LSLipschitzFunction:
    """g(x) = |x|^alpha e for 0 < alpha < 1.

    Declared (L, A) = (alpha, 1 - alpha)|e|, from
    | |x|^a - |y|^a | <= |x - y|^a <= a |x - y| + 1 - a.
    """
    if not 0 < alpha < 1:
        raise ValueError("power exponent must lie in (0, 1)")
    d1, dr = alg.layer_dims[0], alg.layer_dims[-1]
    e = _direction(dr, direction)
    size = np.linalg.norm(e)
    return LSLipschitzFunction(lambda x: np.linalg.norm(x, axis=-1)[..., None] ** alpha * e,
                               alpha * size, (1 - alpha) * size, f"power({alpha:g})", (d1, dr))


def linear_function(alg: GradedLieAlgebra, matrix) -> LSLipschitzFunction:
    """g(x) = matrix @ x with matrix of shape (dim V_r, dim V_1)."""
    d1, dr = alg.layer_dims[0], alg.layer_dims[-1]
    m = np.asarray(matrix, dtype=float).reshape(dr, d1)
    return LSLipschitzFunction(lambda x: x @ m.T, np.linalg.norm(m, 2), 0.0, "linear",
                               (d1, dr))


def constant_function(alg: GradedLieAlgebra, value) -> LSLipschitzFunction:
    d1, dr = alg.layer_dims[0], alg.layer_dims[-1]
    c = np.broadcast_to(np.asarray(value, dtype=float), (dr,)).copy()
    return LSLipschitzFunction(lambda x: np.zeros(np.shape(x)[:-1] + (dr,)) + c, 0.0, 0.0,
                               "const", (d1, dr))


def zero_function(alg: GradedLieAlgebra) -> LSLipschitzFunction:
    f = constant_function(alg, 0.0)
    f.label = "zero"
    return f


# -- maps ------------------------------------------------------------------------

class QuasiMap:
    """Base class: a self-map of the group bound to an algebra."""

    alg: GradedLieAlgebra

    def __call__(self, n) -> np.ndarray:
        raise NotImplementedError

    def inverse(self) -> "QuasiMap":
        raise NotImplementedError(f"{type(self).__name__} has no inverse available")

    def compose(self, other: "QuasiMap") -> "Composite":
        return Composite((self, other))

    __matmul__ = compose


@dataclass(frozen=True, eq=False)
class Shear(QuasiMap):
    alg: GradedLieAlgebra
    g: LSLipschitzFunction

    def __call__(self, n):
        return shear_apply(self.alg, self.g, n)

    def inverse(self):
        return Shear(self.alg, -self.g)

    def __repr__(self):
        return f"shear({self.g.label})"


@dataclass(frozen=True, eq=False)
class LeftTranslation(QuasiMap):
    alg: GradedLieAlgebra
    by: np.ndarray

    def __call__(self, n):
        return bch_product(self.alg, self.by, n)

    def inverse(self):
        return LeftTranslation(self.alg, inverse(self.by))

    def __repr__(self):
        return f"ltrans({', '.join(f'{v:g}' for v in np.ravel(self.by))})"


@dataclass(frozen=True, eq=False)
class Automorphism(QuasiMap):
    alg: GradedLieAlgebra
    matrix: np.ndarray
    check: bool = True

    def __post_init__(self):
        m = np.asarray(self.matrix, dtype=float)
        object.__setattr__(self, "matrix", m)
        if self.check:
            report = automorphism_validate(self.alg, m)
            if not report.ok:
                raise ValueError(f"not an automorphism: {sorted(report.kinds())}")

    def __call__(self, n):
        return self.alg.check_point(n) @ self.matrix.T

    def inverse(self):
        return Automorphism(self.alg, np.linalg.inv(self.matrix), check=False)

    def __repr__(self):
        return "aut(...)"


@dataclass(frozen=True, eq=False)
class Dilation(QuasiMap):
    alg: GradedLieAlgebra
    lam: float

    def __call__(self, n):
        return dilation(self.alg, self.lam, n)

    def inverse(self):
        return Dilation(self.alg, 1.0 / self.lam)

    def __repr__(self):
        return f"dilate({self.lam:g})"


@dataclass(frozen=True, eq=False)
class Custom(QuasiMap):
    """Wrap an arbitrary callable, optionally with its exact inverse."""

    alg: GradedLieAlgebra
    func: Callable
    inv: Callable | None = None
    label: str = "custom"

    def __call__(self, n):
        return np.asarray(self.func(np.asarray(n, dtype=float)), dtype=float)

    def inverse(self):
        if self.inv is None:
            raise NotImplementedError(f"{self.label} has no inverse available")
        return Custom(self.alg, self.inv, self.func, f"inverse({self.label})")

    def __repr__(self):
        return self.label


@dataclass(frozen=True, eq=False)
class Composite(QuasiMap):
    """Composition; ``maps[0]`` is applied last."""

    maps: tuple

    def __post_init__(self):
        flat = []
        for m in self.maps:
            flat.extend(m.maps if isinstance(m, Composite) else [m])
        if not flat:
            raise ValueError("a composite needs at least one map")
        object.__setattr__(self, "maps", tuple(flat))

    @property
    def alg(self):
        return self.maps[0].alg

    def __call__(self, n):
        for m in reversed(self.maps):
            n = m(n)
        return n

    def inverse(self):
        return Composite(tuple(m.inverse() for m in reversed(self.maps)))

    def __repr__(self):
        return " . ".join(repr(m) for m in self.maps)


class Identity(QuasiMap):
    def __init__(self, alg):
        self.alg = alg

    def __call__(self, n):
        return np.array(n, dtype=float)

    def inverse(self):
        return self

    def __repr__(self):
        return "id"


# -- operations ------------------------------------------------------------------

def _check_g(alg: GradedLieAlgebra, g: LSLipschitzFunction):
    if g.dims is not None and g.dims != (alg.layer_dims[0], alg.layer_dims[-1]):
        raise ValueError(f"{g!r} maps {g.dims}, algebra needs "
                         f"({alg.layer_dims[0]}, {alg.layer_dims[-1]})")


def shear_apply(alg: GradedLieAlgebra, g: LSLipschitzFunction, n) -> np.ndarray:
    _check_g(alg, g)
    n = alg.check_point(n)
    out = n.copy()
    out[..., alg.slices[-1]] += g(alg.layer(n, 1))
    return out


def shear_compose(g1: LSLipschitzFunction, g2: LSLipschitzFunction) -> LSLipschitzFunction:
    """The function of S_{g1} o S_{g2}, which is g1 + g2."""
    return g1 + g2


def quasimap_apply(m: QuasiMap, n) -> np.ndarray:
    return m(n)


def automorphism_validate(alg: GradedLieAlgebra, matrix, tol: float = 1e-10) -> ValidationReport:
    """Check invertibility and A[e_i, e_j] = [A e_i, A e_j]; record gradedness."""
    report = ValidationReport()
    m = np.asarray(matrix, dtype=float)
    if m.shape != (alg.dim, alg.dim):
        report.add("shape", m.shape, f"expected ({alg.dim}, {alg.dim})")
        return report
    scale = max(1.0, float(np.abs(m).max()))
    if np.linalg.cond(m) > 1e12:
        report.add("singular", (), "matrix is not invertible")
    basis = np.eye(alg.dim)
    images = basis @ m.T
    lhs = bracket(alg, basis[:, None, :], basis[None, :, :]) @ m.T
    rhs = bracket(alg, images[:, None, :], images[None, :, :])
    bad = np.any(np.abs(lhs - rhs) > tol * scale ** 2, axis=-1)
    for i, j in zip(*np.nonzero(bad)):
        if i < j:
            report.add("homomorphism", (i, j))
    deg = alg.degrees
    report.graded = bool(np.all((deg[:, None] == deg[None, :]) | (m == 0)))
    return report


def shear_matrix(alg: GradedLieAlgebra, linear) -> np.ndarray:
    """Matrix of S_L for a linear L: V_1 -> V_r (identity plus the L block)."""
    m = np.eye(alg.dim)
    m[alg.slices[-1], alg.slices[0]] += np.asarray(linear, dtype=float).reshape(
        alg.layer_dims[-1], alg.layer_dims[0])
    return m


def qi_constants_bound(L: float, A: float, M: float, r: int) -> tuple:
    """(L', A') = (M (L^(1/r) + 1), M (L^(1/r) + A^(1/r) + 1)) for a shear S_g."""
    if L < 0 or A < 0 or M < 1 or r < 1:
        raise ValueError("need L, A >= 0, M >= 1 and r >= 1")
    lr = L ** (1.0 / r)
    return M * (lr + 1.0), M * (lr + A ** (1.0 / r) + 1.0)


def shear_affine_defect(alg: GradedLieAlgebra, g: LSLipschitzFunction, G1: QuasiMap,
                        samples) -> np.ndarray:
    """V_r block of (-S_g(n)) * G1(n) for n in V_1.

    If G1 is an automorphism this equals P(n) - g(n) for a polynomial P of
    degree at most r, so bounded defects force g to be near a polynomial.
    """
    if isinstance(G1, Automorphism):
        report = automorphism_validate(alg, G1.matrix)
        if not report.ok:
            raise ValueError("G1 is not an automorphism")
    n = alg.embed(np.asarray(samples, dtype=float), 1)
    return alg.layer(bch_product(alg, inverse(shear_apply(alg, g, n)), G1(n)), alg.step)


@dataclass
class GrowthReport:
    radii: np.ndarray
    deviations: np.ndarray
    slope: float
    note: str = ("heuristic: slope near 0 suggests g is at finite distance from an "
                 "affine map, a positive slope suggests it is not")


def linear_distance_classifier(g: LSLipschitzFunction, radii, points_per_axis: int = 41,
                               tol: float = 1e-9) -> GrowthReport:
    """Growth of the best affine least-squares fit residual on balls of radius R.

    dev(R) is the largest grid deviation |g - l_R| on the ball of radius R.
    The log-log slope of dev(R) against R is reported; deviations at or below
    ``tol`` count as zero growth.
    """
    radii = np.asarray(radii, dtype=float)
    if len(radii) < 2 or np.any(np.diff(radii) <= 0) or radii[0] <= 0:
        raise ValueError("need at least two increasing positive radii")
    d1 = g.dims[0] if g.dims else 1
    axis = np.linspace(-1.0, 1.0, points_per_axis)
    grid = np.stack(np.meshgrid(*([axis] * d1), indexing="ij"), axis=-1).reshape(-1, d1)
    grid = grid[np.linalg.norm(grid, axis=1) <= 1.0 + 1e-12]
    devs = []
    for R in radii:
        pts = R * grid
        vals = g(pts).reshape(len(pts), -1)
        design = np.hstack([pts, np.ones((len(pts), 1))])
        coef, *_ = np.linalg.lstsq(design, vals, rcond=None)
        resid = np.linalg.norm(vals - design @ coef, axis=1)
        devs.append(float(resid.max()))
    devs = np.array(devs)
    if np.all(devs <= tol * (1 + radii)):
        slope = 0.0
    else:
        slope = float(np.polyfit(np.log(radii), np.log(np.maximum(devs, 1e-300)), 1)[0])
    return GrowthReport(radii, devs, slope)


def cone_rescaled_shear(alg: GradedLieAlgebra, g: LSLipschitzFunction, lam: float, n) -> np.ndarray:
    """delta_lam o S_g o delta_(1/lam), via n + lam^r g(pi_1(n) / lam)."""
    if lam <= 0:
        raise ValueError("scale must be positive")
    n = alg.check_point(n)
    out = n.copy()
    out[..., alg.slices[-1]] += lam ** alg.step * g(alg.layer(n, 1) / lam)
    return out


# -- textual map expressions --------------------------------------------------------


def _split_terms(text: str) -> list:
    """Split on composition dots at paren depth 0 that are not decimal points."""
    terms, depth, start = [], 0, 0
    for i, ch in enumerate(text):
        if ch == "(":
            depth += 1
        elif ch == ")":
            depth -= 1
        elif ch == "." and depth == 0:
            before = text[i - 1] if i else ""
            after = text[i + 1] if i + 1 < len(text) else ""
            if before.isdigit() and after.isdigit():
                continue
            terms.append(text[start:i])
            start = i + 1
    terms.append(text[start:])
    if depth != 0:
        raise ValueError(f"unbalanced parentheses in {text!r}")
    return [t.strip() for t in terms if t.strip()]


def _parse_term(term: str) -> tuple:
    m = re.fullmatch(r"([A-Za-z_][A-Za-z_0-9]*)\s*(?::\s*(.*)|\((.*)\))?", term, re.S)
    if not m:
        raise ValueError(f"cannot parse map term {term!r}")
    name, colon, paren = m.groups()
    arg = colon if colon is not None else paren
    return name.lower(), (arg.strip() if arg is not None else None)


def _numbers(arg: str | None) -> list:
    if not arg:
        return []
    return [float(v) for v in arg.replace(";", ",").split(",") if v.strip()]


def _matrix_arg(arg: str, base: Path | None) -> np.ndarray:
    if arg.startswith("@"):
        path = Path(arg[1:])
        if base is not None and not path.is_absolute():
            path = base / path
        return np.loadtxt(path, ndmin=2)
    return np.array(_numbers(arg))


def parse_function(alg: GradedLieAlgebra, text: str, base: Path | None = None) -> LSLipschitzFunction:
    """``abs``, ``power:0.5``, ``power(0.5)``, ``const:c``, ``zero``, ``linear:a,b,...``
    (row-major V_1 -> V_r matrix), optionally negated with a leading ``-``."""
    text = text.strip()
    if text.startswith("-"):
        return -parse_function(alg, text[1:], base)
    name, arg = _parse_term(text)
    if name == "abs":
        return abs_function(alg)
    if name == "power":
        return power_function(alg, float(arg))
    if name in ("const", "constant"):
        return constant_function(alg, _numbers(arg))
    if name == "zero":
        return zero_function(alg)
    if name == "linear":
        return linear_function(alg, _matrix_arg(arg, base))
    raise ValueError(f"unknown shear function {text!r}")


def parse_map(alg: GradedLieAlgebra, text: str, base: Path | None = None) -> QuasiMap:
    """Parse e.g. ``shear(abs) . ltrans(1,0,0) . aut(@file)``; ``.`` composes right-to-left.

    Terms: ``id``, ``shear(<function>)``, ``ltrans(v...)``, ``aut(@file | a11,a12,...)``,
    ``dilate(lam)``, and on heisenberg3 also ``Flambda:lam``, ``flambda:lam``
    and ``lift(<planar map>)``.
    """
    maps = []
    for term in _split_terms(text):
        name, arg = _parse_term(term)
        if name == "id":
            maps.append(Identity(alg))
        elif name == "shear":
            maps.append(Shear(alg, parse_function(alg, arg or "", base)))
        elif name == "ltrans":
            maps.append(LeftTranslation(alg, alg.check_point(_numbers(arg))))
        elif name == "aut":
            m = _matrix_arg(arg or "", base)
            maps.append(Automorphism(alg, m.reshape(alg.dim, alg.dim)))
        elif name == "dilate":
            maps.append(Dilation(alg, float(arg)))
        elif name in ("flambda", "lift"):
            from . import heisenberg

            if alg.layer_dims != (2, 1):
                raise ValueError(f"{name} is only defined on heisenberg3")
            if name == "lift":
                lift = heisenberg.Lift(heisenberg.planar_map(arg or "id", base))
                maps.append(Custom(alg, lift, lift.inverse, f"lift({arg})"))
            elif term.lstrip().startswith("F"):
                lam = float(arg)
                maps.append(Custom(alg, lambda p, lam=lam: heisenberg.F_lambda(lam, p),
                                   lambda p, lam=lam: heisenberg.F_lambda(1.0 / lam, p),
                                   f"Flambda:{lam:g}"))
            else:
                lam = float(arg)
                maps.append(Custom(alg, lambda p, lam=lam: heisenberg.f_lambda(lam, p),
                                   lambda p, lam=lam: heisenberg.f_lambda(1.0 / lam, p),
                                   f"flambda:{lam:g}"))
        else:
            raise ValueError(f"unknown map term {term!r}")
    if not maps:
        raise ValueError("empty map expression")
    return maps[0] if len(maps) == 1 else Composite(tuple(maps))
