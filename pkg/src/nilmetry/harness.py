"""Sampling-based verification of large-scale Lipschitz and cone behaviour.

Reports serialize to CSV with 17 significant digits, so doubles round-trip
exactly and identical configurations give byte-identical files.
"""
from __future__ import annotations

import csv
import io
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable

import numpy as np

from .heisenberg import VerticalLine, line_image_analysis
from .lie_core import GradedLieAlgebra, dilation
from .maps import LSLipschitzFunction, cone_rescaled_shear
from .metrics import HomogeneousGauge, directed_hausdorff, koranyi_distance, koranyi_gauge
from .sampling import SamplerConfig

VIOLATION_TOL = 1e-9


def resolve_metric(name: str | Callable, alg: GradedLieAlgebra | None = None) -> Callable:
    if callable(name):
        return name
    if name == "dh":
        if alg is None:
            raise ValueError("the dh metric needs an algebra")
        return HomogeneousGauge(alg).distance
    if name == "koranyi":
        return koranyi_distance
    raise ValueError(f"unknown metric {name!r}")


def _fmt(v) -> str:
    if v is None:
        return ""
    if isinstance(v, (bool, np.bool_)):
        return "true" if v else "false"
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, str):
        return v
    return f"{float(v):.17g}"


def _num(s: str):
    return None if s == "" else float(s)


# -- envelopes -------------------------------------------------------------------

@dataclass
class Envelope:
    direction: str
    L_hat: float
    A_hat: float
    samples: int
    violations: int = 0
    witness: tuple | None = field(default=None, compare=False, repr=False)
    violation_witnesses: list = field(default_factory=list, compare=False, repr=False)


@dataclass
class QIReport:
    envelopes: list
    claimed_L: float | None
    claimed_A: float | None
    seed: int | None
    metric: str = field(default="", compare=False)

    header = ("direction", "L_hat", "A_hat", "claimed_L", "claimed_A", "violations", "samples", "seed")

    @property
    def forward(self) -> Envelope:
        return self.envelopes[0]

    @property
    def inverse(self) -> Envelope | None:
        return self.envelopes[1] if len(self.envelopes) > 1 else None

    @property
    def total_violations(self) -> int:
        return sum(e.violations for e in self.envelopes)

    def rows(self):
        for e in self.envelopes:
            yield (e.direction, e.L_hat, e.A_hat, self.claimed_L, self.claimed_A, e.violations,
                   e.samples, self.seed)

    @classmethod
    def from_rows(cls, rows):
        envs, claimed_L, claimed_A, seed = [], None, None, None
        for r in rows:
            envs.append(Envelope(r["direction"], float(r["L_hat"]), float(r["A_hat"]),
                                 int(r["samples"]), int(r["violations"])))
            claimed_L, claimed_A = _num(r["claimed_L"]), _num(r["claimed_A"])
            seed = None if r["seed"] == "" else int(r["seed"])
        return cls(envs, claimed_L, claimed_A, seed)


def envelope_from_distances(d, D, direction: str = "forward", claimed=None) -> Envelope:
    """Canonical minimal (L, A) with D <= L d + A on every sampled pair.

    The reference slope L_ref is the largest ratio D/d among pairs with
    d >= 1, or among all pairs if none is that far apart.  With
    A_min = max(0, max(D - L_ref d)), the result is the frontier point with the
    smallest L whose additive constant is at most 2 A_min.
    """
    d = np.asarray(d, dtype=float)
    D = np.asarray(D, dtype=float)
    keep = (d > 0) & np.isfinite(d) & np.isfinite(D)
    if not np.any(keep):
        raise ValueError("all sampled pairs have zero distance")
    d, D = d[keep], D[keep]
    large = d >= 1.0
    ratios = D / d
    L_ref = float(ratios[large].max() if np.any(large) else ratios.max())
    A_min = max(0.0, float((D - L_ref * d).max()))
    target = 2.0 * A_min
    L = max(0.0, float(((D - target) / d).max()))
    slack = D - L * d
    A = max(0.0, float(slack.max()))
    k = int(np.argmax(slack)) if A > 0 else int(np.argmax(ratios))
    env = Envelope(direction, L, A, int(len(d)), witness=(float(d[k]), float(D[k])))
    if claimed is not None:
        cL, cA = claimed
        bound = cL * d + cA
        bad = np.nonzero(D > bound + VIOLATION_TOL * (1.0 + bound))[0]
        env.violations = int(len(bad))
        env.violation_witnesses = [(float(d[i]), float(D[i])) for i in bad[:20]]
    return env


def _alg_of(fmap, alg):
    alg = alg if alg is not None else getattr(fmap, "alg", None)
    if alg is None:
        raise ValueError("cannot determine the algebra of the map; pass alg=")
    return alg


def fit_ls_envelope(fmap: Callable, metric, sampler: SamplerConfig, alg=None,
                    claimed=None, direction: str = "forward") -> Envelope:
    """Fit d(F x, F y) <= L d(x, y) + A over sampled pairs."""
    alg = _alg_of(fmap, alg)
    metric_fn = resolve_metric(metric, alg)
    gauge = koranyi_gauge if metric == "koranyi" else None
    x, y = sampler.pairs(alg, gauge=gauge)
    return envelope_from_distances(metric_fn(x, y), metric_fn(fmap(x), fmap(y)), direction, claimed)


def qi_verify(fmap, metric, sampler: SamplerConfig, claimed=None, alg=None,
              inverse: Callable | None = None) -> QIReport:
    """Envelopes of the map and of its inverse on the same sampled pairs."""
    alg = _alg_of(fmap, alg)
    if inverse is None:
        try:
            inverse = fmap.inverse()
        except (AttributeError, NotImplementedError) as exc:
            raise ValueError(f"no inverse available for {fmap!r}") from exc
    metric_fn = resolve_metric(metric, alg)
    gauge = koranyi_gauge if metric == "koranyi" else None
    x, y = sampler.pairs(alg, gauge=gauge)
    d = metric_fn(x, y)
    forward = envelope_from_distances(d, metric_fn(fmap(x), fmap(y)), "forward", claimed)
    backward = envelope_from_distances(d, metric_fn(inverse(x), inverse(y)), "inverse", claimed)
    cL, cA = claimed if claimed is not None else (None, None)
    name = metric if isinstance(metric, str) else getattr(metric, "__name__", "custom")
    return QIReport([forward, backward], cL, cA, sampler.seed, name)


# -- asymptotic cones -----------------------------------------------------------------

@dataclass
class ConvergenceReport:
    scales: np.ndarray
    sup_distances: np.ndarray
    bound_values: np.ndarray
    passes: np.ndarray

    header = ("scale", "sup_distance", "bound_value", "pass")

    @property
    def decay_rate(self) -> float:
        """Log-log slope of the sup distance against the scale."""
        ok = self.sup_distances > 0
        if ok.sum() < 2:
            return float("nan")
        return float(np.polyfit(np.log(self.scales[ok]), np.log(self.sup_distances[ok]), 1)[0])

    @property
    def all_pass(self) -> bool:
        return bool(np.all(self.passes))

    def rows(self):
        for s, v, b, p in zip(self.scales, self.sup_distances, self.bound_values, self.passes):
            yield (s, v, None if np.isnan(b) else b, bool(p))

    def __eq__(self, other):
        if not isinstance(other, ConvergenceReport):
            return NotImplemented
        return (np.array_equal(self.scales, other.scales)
                and np.array_equal(self.sup_distances, other.sup_distances)
                and np.array_equal(self.bound_values, other.bound_values, equal_nan=True)
                and np.array_equal(self.passes, other.passes))

    @classmethod
    def from_rows(cls, rows):
        rows = list(rows)
        return cls(np.array([float(r["scale"]) for r in rows]),
                   np.array([float(r["sup_distance"]) for r in rows]),
                   np.array([np.nan if r["bound_value"] == "" else float(r["bound_value"]) for r in rows]),
                   np.array([r["pass"] == "true" for r in rows]))


def box_grid(dim: int, radius: float, per_axis: int) -> np.ndarray:
    axis = np.linspace(-radius, radius, per_axis)
    return np.stack(np.meshgrid(*([axis] * dim), indexing="ij"), axis=-1).reshape(-1, dim)


def conjugate_family(alg: GradedLieAlgebra, fmap: Callable) -> Callable:
    """lam -> delta_lam o F o delta_(1/lam)."""
    return lambda lam: (lambda n: dilation(alg, lam, fmap(dilation(alg, 1.0 / lam, n))))


def shear_family(alg: GradedLieAlgebra, g: LSLipschitzFunction) -> Callable:
    return lambda lam: (lambda n: cone_rescaled_shear(alg, g, lam, n))


def shear_cone_bound(alg: GradedLieAlgebra, g: LSLipschitzFunction) -> Callable:
    """(L lam^(r-1) |pi_1 n| + lam^r A)^(1/r) + lam |g(0)|^(1/r), pointwise."""
    r = alg.step
    g0 = float(np.linalg.norm(g(np.zeros(alg.layer_dims[0]))))

    def bound(lam, pts):
        p1 = np.linalg.norm(alg.layer(pts, 1), axis=-1)
        return (g.L * lam ** (r - 1) * p1 + lam ** r * g.A) ** (1.0 / r) + lam * g0 ** (1.0 / r)

    return bound


def cone_convergence(family: Callable, metric, alg: GradedLieAlgebra, scales,
                     box_radius: float = 0.5, per_axis: int = 10,
                     bound: Callable | None = None) -> ConvergenceReport:
    """sup over a box grid of d(n, f_scale(n)) for each scale.

    The default box is the unit-volume cube [-1/2, 1/2]^dim; ``per_axis``
    points per coordinate (10 gives 10^3 points in dimension 3).
    """
    scales = np.asarray(scales, dtype=float)
    if np.any(np.diff(scales) >= 0) or np.any(scales <= 0):
        raise ValueError("scales must be positive and strictly decreasing")
    grid = box_grid(alg.dim, box_radius, per_axis)
    if len(grid) == 0:
        raise ValueError("empty grid")
    metric_fn = resolve_metric(metric, alg)
    sups, bounds, passes = [], [], []
    for lam in scales:
        dist = metric_fn(grid, family(lam)(grid))
        sups.append(float(dist.max()))
        if bound is None:
            bounds.append(np.nan)
            passes.append(True)
        else:
            b = bound(lam, grid)
            bounds.append(float(b.max()))
            passes.append(bool(np.all(dist <= b + 1e-12 * (1.0 + b))))
    return ConvergenceReport(scales, np.array(sups), np.array(bounds), np.array(passes))


# -- Hausdorff ----------------------------------------------------------------------

def hausdorff_estimate(a, b, metric=koranyi_distance) -> float:
    """Brute-force Hausdorff distance between finite point sets."""
    return max(directed_hausdorff(a, b, metric), directed_hausdorff(b, a, metric))


@dataclass
class HausdorffTable:
    params: list
    best_base: list
    hausdorff: list
    pi_diameter: list
    t_ranges: list

    header = ("param", "best_base_re", "best_base_im", "hausdorff", "pi_diameter", "t_range")

    def rows(self):
        for p, w, h, d, tr in zip(self.params, self.best_base, self.hausdorff, self.pi_diameter,
                                  self.t_ranges):
            yield (p, w.real, w.imag, h, d, f"{_fmt(tr[0])};{_fmt(tr[1])}")

    @classmethod
    def from_rows(cls, rows):
        t = cls([], [], [], [], [])
        for r in rows:
            t.params.append(r["param"])
            t.best_base.append(complex(float(r["best_base_re"]), float(r["best_base_im"])))
            t.hausdorff.append(float(r["hausdorff"]))
            t.pi_diameter.append(float(r["pi_diameter"]))
            lo, hi = r["t_range"].split(";")
            t.t_ranges.append((float(lo), float(hi)))
        return t


def format_complex(z: complex) -> str:
    return f"{z.real:g}{z.imag:+g}i"


def foliation_table(fmap: Callable, bases, t_max: float, samples: int = 2001,
                    decades: bool = True) -> HausdorffTable:
    """Best-vertical-line analysis of F(q_z) for each base z.

    With ``decades`` the range grows by factors of 10 up to ``t_max``; a
    stabilizing Hausdorff column indicates a finite distance to a vertical line.
    """
    table = HausdorffTable([], [], [], [], [])
    if decades:
        reaches = [10.0 ** k for k in range(1, int(np.floor(np.log10(t_max))) + 1)]
        if not reaches or reaches[-1] < t_max:
            reaches.append(float(t_max))
    else:
        reaches = [float(t_max)]
    for z in bases:
        for reach in reaches:
            res = line_image_analysis(fmap, VerticalLine(complex(z), -reach, reach, samples, "log"))
            table.params.append(format_complex(complex(z)))
            table.best_base.append(res.best_base)
            table.hausdorff.append(res.hausdorff)
            table.pi_diameter.append(res.pi_diameter)
            table.t_ranges.append(res.t_range)
    return table


# -- generic estimate rows and CSV I/O -------------------------------------------------

@dataclass
class EstimateReport:
    """Rows of (quantity, value, samples, seed, witness coordinates)."""

    entries: list

    header = ("quantity", "value", "samples", "seed", "witness")

    def rows(self):
        for q, v, n, s, w in self.entries:
            wit = "" if w is None else ";".join(_fmt(c) for c in np.ravel(w))
            yield (q, v, n, s, wit)

    @classmethod
    def from_rows(cls, rows):
        entries = []
        for r in rows:
            wit = None if r["witness"] == "" else tuple(float(c) for c in r["witness"].split(";"))
            entries.append((r["quantity"], float(r["value"]),
                            None if r["samples"] == "" else int(r["samples"]),
                            None if r["seed"] == "" else int(r["seed"]), wit))
        return cls(entries)

    @classmethod
    def of(cls, report) -> "EstimateReport":
        entries = []
        for q, v, n, s, w in report.rows():
            entries.append((q, float(v), n, s, None if w is None else tuple(float(c) for c in np.ravel(w))))
        return cls(entries)


_SCHEMAS = {cls.header: cls for cls in (QIReport, ConvergenceReport, HausdorffTable, EstimateReport)}


def report_to_csv(report) -> str:
    if not hasattr(report, "header"):
        report = EstimateReport.of(report)
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(report.header)
    for row in report.rows():
        writer.writerow([_fmt(v) for v in row])
    return buf.getvalue()


def write_report(report, path) -> None:
    Path(path).write_text(report_to_csv(report))


def read_report(path):
    text = Path(path).read_text()
    reader = csv.DictReader(io.StringIO(text))
    cls = _SCHEMAS.get(tuple(reader.fieldnames or ()))
    if cls is None:
        raise ValueError(f"unrecognized report header {reader.fieldnames}")
    return cls.from_rows(list(reader))
