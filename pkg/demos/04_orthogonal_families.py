"""Orthogonal families of surfaces in three and four dimensions."""

import numpy as np

from edslab.numeric import checks as nc
from edslab.numeric.fields import ExprField, SampleSet

XYZ = ("x", "y", "z")

# spheres and cones about the z axis: an orthogonal pair whose common normal field is surface forming
f = ExprField("x^2 + y^2 + z^2", XYZ)
g = ExprField("(x^2 + y^2)/z^2", XYZ)
rec = nc.triply_orthogonal_residuals(f, g, SampleSet.grid(3, 4, (0.5, 1.0)))
print("spheres/cones:", rec)

# the surface-forming condition evaluated on a skewed pair
print("skewed pair:", nc.triortho_at(ExprField("x", XYZ), ExprField("y + x*z", XYZ), [0.3, 0.2, 0.6]))

# lines of curvature on an ellipsoid
ell = ExprField("x^2 + y^2/4 + z^2/9", XYZ)
line = nc.line_of_curvature(ell, [0.3, 0.5, 0.7])
print("ellipsoid principal direction", np.round(line.direction, 6), "residual", line.residual)

# a family extends to a triply orthogonal system only if it satisfies the Darboux equation
cyl = ExprField("x^2 + y^2", XYZ)
print("cylinders:", nc.darboux_residual(cyl, SampleSet.random(3, 10, box=(0.2, 1.0))).residual)
bent = ExprField("x^2 + y^2 + 3/10*x*z^3", XYZ)
print("a bent family:", nc.darboux_residual(bent, SampleSet.random(3, 5, box=(0.2, 1.0))).residual)

# in four dimensions: two coordinate functions are trivially biorthogonal
X4 = ("t", "x", "y", "z")
print("coordinate pair:", nc.biortho_residuals(ExprField("t", X4), ExprField("x", X4), SampleSet.grid(4, 3)))
