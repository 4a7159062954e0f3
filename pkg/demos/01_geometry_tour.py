"""
Which reparameterizations admit a mirror map?
=============================================

For every gallery pair we build the metric field M = [J Jᵀ]⁻¹ ∘ q⁻¹, test
whether its cross partials are symmetric, and (when they are) integrate M
back into a regularizer and compare Hessians with the closed form.
"""
import numpy as np

from ohco.cli import compat_grid
from ohco.geometry import GALLERY_NAMES, MetricField, compatibility_check, gallery_pair, reconstruct_regularizer

for name in GALLERY_NAMES:
    q, R = gallery_pair(name)
    M = MetricField.from_reparameterization(q)
    grid = compat_grid(q, 7)
    rep = compatibility_check(M, grid)
    line = f"{name:13s} compatible={rep.compatible!s:5s} max violation {rep.max_violation:.2e}"
    if rep.compatible and R is not None:
        Rr = reconstruct_regularizer(M, grid.mean(axis=0))
        err = np.max(np.abs(Rr.hessian(grid) - R.hessian(grid)))
        line += f"   reconstructed Hessian error {err:.1e}"
    print(line)

# the log-spiral is the odd one out: at z = (1, 1) one cross partial is off by 1/2
q, _ = gallery_pair("log_spiral")
rep = compatibility_check(MetricField.from_reparameterization(q), np.array([[1.0, 1.0]]))
i, j, k = np.unravel_index(np.argmax(rep.violations[0]), rep.violations.shape[1:])
print(f"log_spiral at (1,1): |d_{k + 1} M_{i + 1}{j + 1} - d_{j + 1} M_{i + 1}{k + 1}| = {rep.max_violation:.4f}")
