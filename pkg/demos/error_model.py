"""Predicted error and cost of graded meshes.

For a defect whose second gradients decay like r^-beta, a mesh with
h(r) = hK (r / K)^alpha has error Err and degrees of freedom DoF given in
closed form. The equidistributed grading alpha = beta p / (2 + p) gives
Err ~ DoF^-1 for a point defect measured in H1 (beta = 3, p = 2).
"""
import numpy as np

from acclab import ErrorModel, error_model, fit_rate

N = 1e5
print("   K    alpha        DoF        Err")
for alpha in (1.0, 1.5, 2.0):
    dofs, errs = [], []
    for K in (4, 8, 16, 32, 64):
        pred = error_model(ErrorModel(beta=3, p=2, K=K, N=N, alpha=alpha))
        dofs.append(pred.dof)
        errs.append(pred.err_exact)
        print(f"{K:4d}   {alpha:5.2f}   {pred.dof:9.1f}   {pred.err_exact:.3e}")
    print(f"      fitted rate Err ~ DoF^{fit_rate(dofs, errs):.3f}\n")

# rate table rows for a few (beta, p)
for beta, p in ((3, 2), (2, 2), (1.5, 2), (3, np.inf)):
    pred = error_model(ErrorModel(beta, p, 8, N))
    print(f"beta {beta}, p {p}: regime {pred.regime}, equidistributed alpha {pred.alpha:.3f}")
