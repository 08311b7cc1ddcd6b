"""Graded nilpotent Lie algebras in exponential coordinates.

A group element is a plain float array whose last axis holds the exponential
coordinates over the concatenated layer bases V_1, ..., V_r.  Every operation
broadcasts over leading axes, so a batch of points is an array of shape
``(..., dim)``.

The Heisenberg bracket is normalized as ``[X, Y] = -4 T``.  With that choice the
truncated CBH product reproduces the product
``(z1, t1) * (z2, t2) = (z1 + z2, t1 + t2 + 2 Im(z1 conj(z2)))`` verbatim.  Other
texts use ``[X, Y] = T`` or ``[X, Y] = 2T``; convert before comparing.
"""
from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from functools import cached_property
from pathlib import Path

import numpy as np
import yaml

MAX_STEP = 4
JACOBI_TOL = 1e-12


class AlgebraError(ValueError):
    """Raised when an algebra is unusable for the requested operation."""


@dataclass(frozen=True)
class Issue:
    kind: str
    indices: tuple
    detail: str = ""


@dataclass
class ValidationReport:
    """Failed axioms, one entry per witness.  An empty report means valid."""

    issues: list = field(default_factory=list)
    graded: bool | None = None

    @property
    def ok(self) -> bool:
        return not self.issues

    def kinds(self) -> set:
        return {issue.kind for issue in self.issues}

    def add(self, kind, indices, detail=""):
        self.issues.append(Issue(kind, tuple(indices), detail))


@dataclass(frozen=True, eq=False)
class GradedLieAlgebra:
    """Structure constants over the concatenated basis of V_1 + ... + V_r.

    ``entries`` is a sequence of ``(i, j, k, value)`` meaning the coefficient
    of e_k in [e_i, e_j].  Indices are 0-based.  Entries are stored as given;
    use :func:`from_entries` (or the file loader) to get the antisymmetric
    closure filled in automatically.
    """

    layer_dims: tuple
    entries: tuple = ()
    name: str = ""

    def __post_init__(self):
        dims = tuple(int(d) for d in self.layer_dims)
        if not dims or any(d <= 0 for d in dims):
            raise AlgebraError(f"layer dimensions must be positive, got {self.layer_dims}")
        object.__setattr__(self, "layer_dims", dims)
        clean = []
        n = sum(dims)
        for i, j, k, v in self.entries:
            i, j, k = int(i), int(j), int(k)
            if not (0 <= i < n and 0 <= j < n and 0 <= k < n):
                raise AlgebraError(f"structure constant index out of range: {(i, j, k)}")
            clean.append((i, j, k, float(v)))
        object.__setattr__(self, "entries", tuple(clean))

    @property
    def step(self) -> int:
        return len(self.layer_dims)

    @property
    def dim(self) -> int:
        return sum(self.layer_dims)

    @cached_property
    def slices(self) -> tuple:
        bounds = np.concatenate([[0], np.cumsum(self.layer_dims)])
        return tuple(slice(int(a), int(b)) for a, b in zip(bounds[:-1], bounds[1:]))

    @cached_property
    def degrees(self) -> np.ndarray:
        """Layer index (1-based weight) of each basis vector."""
        return np.repeat(np.arange(1, self.step + 1), self.layer_dims)

    @cached_property
    def tensor(self) -> np.ndarray:
        c = np.zeros((self.dim,) * 3)
        for i, j, k, v in self.entries:
            c[i, j, k] += v
        c.setflags(write=False)
        return c

    @cached_property
    def upper_tensor(self) -> np.ndarray:
        """Constants with i < j only; the bracket sums them against x_i y_j - x_j y_i."""
        u = np.triu(np.ones((self.dim, self.dim)), 1)[:, :, None] * self.tensor
        u.setflags(write=False)
        return u

    @cached_property
    def report(self) -> ValidationReport:
        return validate_algebra(self)

    def layer(self, x, i: int) -> np.ndarray:
        """The V_i block pi_i(x), with 1-based ``i``."""
        return np.asarray(x)[..., self.slices[i - 1]]

    def embed(self, block, i: int) -> np.ndarray:
        """Place a V_i block into an otherwise zero point."""
        block = np.asarray(block, dtype=float)
        out = np.zeros(block.shape[:-1] + (self.dim,))
        out[..., self.slices[i - 1]] = block
        return out

    def check_point(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        if x.shape[-1:] != (self.dim,):
            raise ValueError(f"expected last axis of length {self.dim}, got shape {x.shape}")
        return x

    def __repr__(self):
        label = self.name or "GradedLieAlgebra"
        return f"<{label} layer_dims={self.layer_dims}>"


def from_entries(layer_dims, entries, name="") -> GradedLieAlgebra:
    """Build an algebra, adding (j, i, k, -v) for every given (i, j, k, v)."""
    table = {}
    for i, j, k, v in entries:
        for key, val in (((i, j, k), v), ((j, i, k), -v)):
            if key in table and table[key] != val:
                raise AlgebraError(f"conflicting structure constants at {key}: {table[key]} vs {val}")
            table[key] = val
    ordered = sorted((i, j, k, v) for (i, j, k), v in table.items() if v != 0)
    return GradedLieAlgebra(tuple(layer_dims), tuple(ordered), name)


def validate_algebra(alg: GradedLieAlgebra) -> ValidationReport:
    report = ValidationReport()
    if alg.step > MAX_STEP:
        report.add("step", (alg.step,), f"step {alg.step} exceeds supported maximum {MAX_STEP}")

    c = alg.tensor
    asym = c + c.transpose(1, 0, 2)
    for i, j in zip(*np.nonzero(np.any(asym != 0, axis=2))):
        if i <= j:
            report.add("antisymmetry", (i, j))

    deg = alg.degrees
    for i, j, k in zip(*np.nonzero(c)):
        if deg[i] + deg[j] != deg[k]:
            report.add("gradation", (i, j, k),
                       f"[V{deg[i]}, V{deg[j]}] has a component in V{deg[k]}")

    # J[a,b,d,m] = [e_a,[e_b,e_d]] + [e_b,[e_d,e_a]] + [e_d,[e_a,e_b]]
    inner = np.einsum("bdk,akm->abdm", c, c)
    jac = inner + inner.transpose(1, 2, 0, 3) + inner.transpose(2, 0, 1, 3)
    scale = max(1.0, float(np.abs(c).max(initial=0.0)) ** 2)
    bad = np.any(np.abs(jac) > JACOBI_TOL * scale, axis=3)
    for a, b, d in zip(*np.nonzero(bad)):
        if a < b < d:
            report.add("jacobi", (a, b, d))
    return report


def is_carnot(alg: GradedLieAlgebra) -> bool:
    """True when V_1 generates: [V_1, V_i] = V_{i+1} for every layer."""
    if not alg.report.ok:
        return False
    c = alg.tensor
    for i in range(1, alg.step):
        src = alg.slices[0]
        prev = alg.slices[i - 1]
        nxt = alg.slices[i]
        images = c[src, prev, :][:, :, nxt].reshape(-1, alg.layer_dims[i])
        if np.linalg.matrix_rank(images) < alg.layer_dims[i]:
            return False
    return True


def bracket(alg: GradedLieAlgebra, x, y) -> np.ndarray:
    x = alg.check_point(x)
    y = alg.check_point(y)
    if not alg.report.ok:
        return np.einsum("...i,...j,ijk->...k", x, y, alg.tensor)
    # x_i y_j - x_j y_i is exactly antisymmetric, so [x, +-x] is exactly 0
    outer = x[..., :, None] * y[..., None, :]
    wedge = outer - np.swapaxes(outer, -1, -2)
    return np.einsum("...ij,ijk->...k", wedge, alg.upper_tensor)


def _require_usable(alg: GradedLieAlgebra):
    if alg.step > MAX_STEP:
        raise AlgebraError(f"CBH coefficients are only provided through step {MAX_STEP}")
    if not alg.report.ok:
        raise AlgebraError(f"invalid algebra {alg!r}: {sorted(alg.report.kinds())}")


def bch_product(alg: GradedLieAlgebra, x, y) -> np.ndarray:
    """Group product x * y through weight four of the CBH series."""
    _require_usable(alg)
    x = alg.check_point(x)
    y = alg.check_point(y)
    out = x + y
    if alg.step == 1:
        return out
    xy = bracket(alg, x, y)
    out = out + 0.5 * xy
    if alg.step == 2:
        return out
    x_xy = bracket(alg, x, xy)
    out = out + (x_xy - bracket(alg, y, xy)) / 12.0
    if alg.step == 3:
        return out
    return out - bracket(alg, y, x_xy) / 24.0


def inverse(x) -> np.ndarray:
    return -np.asarray(x, dtype=float)


def dilation(alg: GradedLieAlgebra, lam, x) -> np.ndarray:
    """delta_lam: scale the V_j block by lam**j.  ``lam`` may broadcast."""
    lam = np.asarray(lam, dtype=float)
    if np.any(lam <= 0):
        raise ValueError("dilation factor must be positive")
    x = alg.check_point(x)
    return x * lam[..., None] ** alg.degrees


def dilation_matrix(alg: GradedLieAlgebra, lam: float) -> np.ndarray:
    if lam <= 0:
        raise ValueError("dilation factor must be positive")
    return np.diag(float(lam) ** alg.degrees.astype(float))


# -- built-in algebras -------------------------------------------------------

def _quaternion_mul(p, q):
    a1, b1, c1, d1 = p
    a2, b2, c2, d2 = q
    return np.array([
        a1 * a2 - b1 * b2 - c1 * c2 - d1 * d2,
        a1 * b2 + b1 * a2 + c1 * d2 - d1 * c2,
        a1 * c2 - b1 * d2 + c1 * a2 + d1 * b2,
        a1 * d2 + b1 * c2 - c1 * b2 + d1 * a2,
    ])


def _quaternion_heisenberg() -> GradedLieAlgebra:
    # [p, q] = Im(conj(p) q) on V_1 = H, V_2 = Im H
    basis = np.eye(4)
    entries = []
    for i, j in itertools.product(range(4), repeat=2):
        conj = basis[i] * np.array([1, -1, -1, -1])
        im = _quaternion_mul(conj, basis[j])[1:]
        for k in range(3):
            if im[k] != 0:
                entries.append((i, j, 4 + k, float(im[k])))
    return GradedLieAlgebra((4, 3), tuple(sorted(entries)), "quaternion_heisenberg")


def make_builtin(name: str) -> GradedLieAlgebra:
    """Built-in algebras: ``abelian(n)``, ``heisenberg3``,
    ``quaternion_heisenberg`` and ``filiform3``."""
    key = name.strip().replace(" ", "")
    if key.startswith("abelian"):
        arg = key[len("abelian"):].strip("()") or "3"
        try:
            n = int(arg)
        except ValueError:
            raise AlgebraError(f"bad abelian dimension in {name!r}") from None
        alg = GradedLieAlgebra((n,), (), f"abelian({n})")
    elif key == "heisenberg3":
        alg = from_entries((2, 1), [(0, 1, 2, -4.0)], "heisenberg3")
    elif key == "quaternion_heisenberg":
        alg = _quaternion_heisenberg()
    elif key == "filiform3":
        alg = from_entries((2, 1, 1), [(0, 1, 2, 1.0), (0, 2, 3, 1.0)], "filiform3")
    else:
        raise AlgebraError(f"unknown built-in algebra {name!r}")
    if not alg.report.ok:  # pragma: no cover - built-ins are fixed
        raise AlgebraError(f"built-in {name} failed validation")
    return alg


BUILTIN_NAMES = ("abelian(n)", "filiform3", "heisenberg3", "quaternion_heisenberg")


# -- algebra definition files ---------------------------------------------------

def load_algebra(path) -> GradedLieAlgebra:
    """Read a YAML algebra definition.

    Keys: ``layer_dims`` (list), ``step`` (optional, must match), ``entries``
    (list of ``[i, j, k, value]``, 0-based) and an optional ``name``.
    """
    doc = yaml.safe_load(Path(path).read_text())
    return algebra_from_dict(doc)


def algebra_from_dict(doc: dict) -> GradedLieAlgebra:
    if not isinstance(doc, dict) or "layer_dims" not in doc:
        raise AlgebraError("algebra definition needs a 'layer_dims' key")
    dims = list(doc["layer_dims"])
    if "step" in doc and int(doc["step"]) != len(dims):
        raise AlgebraError(f"step {doc['step']} does not match {len(dims)} layers")
    entries = [tuple(e) for e in doc.get("entries") or []]
    for e in entries:
        if len(e) != 4:
            raise AlgebraError(f"entry {e} is not (i, j, k, value)")
    return from_entries(dims, entries, str(doc.get("name", "")))


def algebra_to_dict(alg: GradedLieAlgebra) -> dict:
    upper = [[i, j, k, v] for i, j, k, v in alg.entries if i < j]
    return {"name": alg.name, "layer_dims": list(alg.layer_dims), "step": alg.step,
            "entries": upper}


def save_algebra(alg: GradedLieAlgebra, path):
    Path(path).write_text(yaml.safe_dump(algebra_to_dict(alg), sort_keys=False))


def resolve_algebra(spec: str | GradedLieAlgebra) -> GradedLieAlgebra:
    """Accept an algebra, a built-in name, or ``@path`` to a definition file."""
    if isinstance(spec, GradedLieAlgebra):
        return spec
    if spec.startswith("@"):
        return load_algebra(spec[1:])
    return make_builtin(spec)


def random_points(alg: GradedLieAlgebra, rng: np.random.Generator, n: int,
                  radius: float = 10.0) -> np.ndarray:
    return rng.uniform(-radius, radius, size=(n, alg.dim))
