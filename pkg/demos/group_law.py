# Group law, dilations and homogeneous distances on a few graded nilpotent groups.
import numpy as np

from nilmetry.lie_core import bch_product, bracket, dilation, inverse, make_builtin
from nilmetry.metrics import HomogeneousGauge, koranyi_distance

heis = make_builtin("heisenberg3")

# [X, Y] = -4T, which makes the CBH product the familiar (z1 + z2, t1 + t2 + 2 Im(z1 conj z2))
print("[X, Y] =", bracket(heis, [1, 0, 0], [0, 1, 0]))
print("X * Y  =", bch_product(heis, [1, 0, 0], [0, 1, 0]))

# associativity holds up to rounding for every built-in
rng = np.random.default_rng(0)
for name in ("heisenberg3", "quaternion_heisenberg", "filiform3"):
    alg = make_builtin(name)
    x, y, z = rng.uniform(-10, 10, (3, 1000, alg.dim))
    resid = np.abs(bch_product(alg, bch_product(alg, x, y), z) - bch_product(alg, x, bch_product(alg, y, z)))
    print(f"{name:22s} associativity residual {resid.max():.2e}")

# the homogeneous norm scales linearly under dilations
gauge = HomogeneousGauge(heis)
n = np.array([3.0, 4.0, 25.0])
print("|n|_h =", gauge.norm(n), " |delta_2 n|_h =", gauge.norm(dilation(heis, 2.0, n)))

# d_h is left invariant but only a quasi-metric; the Koranyi distance is a true metric
g = np.array([1.0, -2.0, 0.5])
x, y = np.array([1.0, 0.0, 0.0]), np.array([1.0, 0.0, 5.0])
print("d_h(x, y) =", gauge.distance(x, y), " after left translation:",
      gauge.distance(bch_product(heis, g, x), bch_product(heis, g, y)))
print("Koranyi d(0, (0,0,16)) =", koranyi_distance(np.zeros(3), [0, 0, 16]))
print("x * x^-1 =", bch_product(heis, x, inverse(x)))
