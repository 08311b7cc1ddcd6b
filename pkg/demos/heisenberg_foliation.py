# F_lambda = j o f_lambda o j is biLipschitz but bends vertical lines by an unbounded amount.
import numpy as np

from nilmetry.harness import qi_verify
from nilmetry.heisenberg import F_lambda, VerticalLine, hpoint, inversion_j, line_image_analysis
from nilmetry.lie_core import make_builtin
from nilmetry.maps import parse_map
from nilmetry.sampling import SamplerConfig

lam = 2.0
print("j(1,0,0) =", inversion_j([1.0, 0, 0]), " j(0,0,1) =", inversion_j([0, 0, 1.0]))

# at t = 0 the point n + in lands at height 2 lam n / (lam^4 + 1), far from lam n
for n in (1, 10, 100):
    print(f"n = {n:3d}: y-coordinate {F_lambda(lam, hpoint(n + 1j * n))[1]:.6f}  (4n/17 = {4 * n / 17:.6f})")

# far up the line, the image approaches the vertical line over x/lam + i lam y
for t in 10.0 ** np.arange(2, 7):
    x3, y3, t3 = F_lambda(lam, hpoint(3 + 4j, t))
    print(f"t = {t:8.0e}: ({x3:.5f}, {y3:.5f}), t3/t = {t3 / t:.8f}")

# empirical biLipschitz band
heis = make_builtin("heisenberg3")
rep = qi_verify(parse_map(heis, "Flambda:2"), "koranyi", SamplerConfig(seed=5, shape="logradial", count=20_000))
print("forward L_hat %.3f, inverse L_hat %.3f" % (rep.forward.L_hat, rep.inverse.L_hat))

# each image stays near some vertical line, but the distance grows linearly with |z|
for n in (4, 8, 16, 32):
    res = line_image_analysis(lambda p: F_lambda(lam, p), VerticalLine(n + 1j * n, -1e6, 1e6, 1001, "log"))
    print(f"q_(n+in), n = {n:2d}: pi-diameter {res.pi_diameter:8.3f}  Hausdorff to best line "
          f"{res.hausdorff:8.3f}  best base {res.best_base:.3f}")
