"""Graded nilpotent Lie groups, shear maps and Heisenberg boundary maps, with a
sampling harness for their large-scale metric behaviour."""

from .harness import (ConvergenceReport, EstimateReport, HausdorffTable, QIReport,
                      cone_convergence, fit_ls_envelope, hausdorff_estimate, qi_verify,
                      read_report, write_report)
from .heisenberg import (F_lambda, Lift, PlanarMap, VerticalLine, boundary_d2, f_lambda,
                         h_mul, inversion_j, lift_apply, lift_h0, line_image_analysis)
from .lie_core import (AlgebraError, GradedLieAlgebra, bch_product, bracket, dilation,
                       make_builtin, validate_algebra)
from .maps import (LSLipschitzFunction, QuasiMap, Shear, abs_function, parse_map,
                   power_function, qi_constants_bound, shear_apply)
from .metrics import (HomogeneousGauge, distance_upper_bound, estimate_triangle_constant,
                      koranyi_distance, koranyi_gauge)
from .sampling import SamplerConfig

__version__ = "0.1.0"
