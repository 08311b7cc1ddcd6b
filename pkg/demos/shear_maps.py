# Shear maps S_g(n) = n + g(pi_1 n) are quasiisometries but rarely close to affine maps.
import numpy as np

from nilmetry.harness import cone_convergence, qi_verify, shear_cone_bound, shear_family
from nilmetry.lie_core import make_builtin
from nilmetry.maps import (Shear, abs_function, linear_distance_classifier, power_function,
                           qi_constants_bound)
from nilmetry.metrics import HomogeneousGauge, estimate_triangle_constant
from nilmetry.sampling import SamplerConfig

heis = make_builtin("heisenberg3")
sampler = SamplerConfig(seed=1, shape="logradial", count=20_000)

# M: how far d_h is from satisfying the triangle inequality
m_hat = estimate_triangle_constant(HomogeneousGauge(heis), SamplerConfig(seed=1), 50_000).M_hat
print(f"sampled triangle constant M_hat = {m_hat:.4f}")

for g in (abs_function(heis), power_function(heis, 0.5)):
    claimed = qi_constants_bound(g.L, g.A, m_hat, heis.step)
    rep = qi_verify(Shear(heis, g), "dh", sampler, claimed)
    print(f"{g.label:10s} claimed (L', A') = ({claimed[0]:.3f}, {claimed[1]:.3f})")
    for env in rep.envelopes:
        print(f"    {env.direction:8s} L_hat {env.L_hat:.3f}  A_hat {env.A_hat:.3f}  "
              f"violations {env.violations}")

# rescaling by dilations pushes S_g to the identity, which is why the asymptotic cone can't see it
g = abs_function(heis)
conv = cone_convergence(shear_family(heis, g), "dh", heis, 10.0 ** -np.arange(5),
                        bound=shear_cone_bound(heis, g))
for lam, sup, bound in zip(conv.scales, conv.sup_distances, conv.bound_values):
    print(f"lambda {lam:7.0e}  sup d(n, f(n)) {sup:.5f}  bound {bound:.5f}")
print(f"decay rate {conv.decay_rate:.3f}")

# distance from affine maps: |x| grows linearly away from every linear fit, |x|^(1/2) like R^(1/2)
line = make_builtin("abelian(1)")
for g in (abs_function(line), power_function(line, 0.5)):
    print(g.label, "growth slope", round(linear_distance_classifier(g, [10, 100, 1000, 10_000]).slope, 3))
