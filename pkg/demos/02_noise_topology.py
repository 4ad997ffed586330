"""Which innovation channels enter which node?

With the noise rank known, a rank-constrained ARX fit reconstructs the
leading innovation channels. Each node's disturbance inputs are then chosen
by an information criterion or by group lasso, and compared with the true
topology through true and false positive rates.
"""
from netid import (TopologyEstimate, estimate_topology, fit_arx_step21, roc_eval,
                   simulate_experiment, six_node_network)

model = six_node_network("all")
truth = TopologyEstimate.from_model(model)
print("true noise sets:", [[s + 1 for s in v] for v in truth.V])

for N in (1000, 10000):
    data = simulate_experiment(model, N, seed=3)
    n = 20 if N < 5000 else 30
    _, innov = fit_arx_step21(data, n, model.p, model.R)
    for method in ("AIC", "BIC"):
        est = estimate_topology(data, innov, n, method, model.neighbor_sets, model.R)
        pt = roc_eval(est, truth)
        print(f"N={N:6d} {method}: TPR {pt.TPR:.2f}  FPR {pt.FPR:.2f}  dis {pt.dis:.3f}")

# Group lasso with a coarse penalty grid, tuned per node by cross validation.
est = estimate_topology(data, innov, 30, "GLASSO", model.neighbor_sets, model.R,
                        grid=range(0, 2001, 200))
pt = roc_eval(est, truth)
print(f"N={N:6d} GLASSO: TPR {pt.TPR:.2f}  FPR {pt.FPR:.2f}  lambdas {est.lambdas}")
