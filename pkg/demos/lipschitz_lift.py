# Lifting an area-preserving planar map f(x + iy) = (x + g(y)) + iy to the Heisenberg group.
import numpy as np

from nilmetry.heisenberg import (Lift, VerticalLine, cube_root_shear_h0, cube_root_shear_map,
                                 discrete_curl, lift_gradient, line_image_analysis)

f = cube_root_shear_map()  # g(y) = y on |y| <= 1 and cbrt(y) beyond
lift = Lift(f)

# the t-correction h_0 has gradient (-2y, 2x) - 2 Df^T (-f2, f1)
print("grad h0 at y = 8:", lift_gradient(f, np.array([0.0, 8.0])), " (expect (0, -8/3))")
print("grad h0 at y = 1/2:", lift_gradient(f, np.array([0.0, 0.5])))

# h_0 is normalized to vanish at 0, the closed form is -1 there; only differences matter
for y in (0.5, 1.0, 2.0, 8.0, -27.0):
    print(f"y = {y:6.1f}: h0 {lift.h0(np.array([0.0, y])):10.6f}  closed form + 1 "
          f"{cube_root_shear_h0(y) + 1:10.6f}")

rng = np.random.default_rng(3)
z = rng.uniform(-5, 5, (200, 2))
z = z[np.abs(np.abs(z[:, 1]) - 1) > 0.05]
print("max |curl| away from y = +-1:", np.abs(discrete_curl(f, z)).max())

# vertical lines go to vertical lines
res = line_image_analysis(lift, VerticalLine(1 + 2j, -1e3, 1e3, 201))
print("image of q_(1+2i): base", res.best_base, " pi-diameter", res.pi_diameter)
p = np.array([[0.3, 4.0, -2.0]])
print("lift", lift(p), " inverse recovers", lift.inverse(lift(p)))
