"""The three tree ensembles side by side.

Second-order boosting solves XOR at depth 2, first-order residual boosting
drives regression error down monotonically, and the bagged Gini trees give a
majority-vote baseline.
"""
import numpy as np

from lungcad import (
    Dataset,
    GbmConfig,
    fit_bagged_trees,
    fit_gbm_first_order,
    fit_xgboost,
    get_loss,
    model_to_text,
    predict_class,
)
from lungcad.boosting import predict_bagged

# --- second-order boosting on XOR ------------------------------------------
cells = np.array([[0, 0], [0, 1], [1, 0], [1, 1]], dtype=float)
labels = np.array([0.0, 1.0, 1.0, 0.0])
ds = Dataset(np.tile(cells, (25, 1)), np.tile(labels, 25))
model = fit_xgboost(ds, GbmConfig(rounds=3, learning_rate=1.0, max_depth=2),
                    get_loss("logistic"))
print("XOR predictions:", [predict_class(model, row) for row in cells])
print("first tree:")
print("\n".join(model_to_text(model).splitlines()[6:13]))

# --- first-order boosting on a regression target -----------------------------
rng = np.random.default_rng(42)
x = rng.uniform(0, 1, (100, 2))
y = x[:, 0].copy()
reg = fit_gbm_first_order(Dataset(x, y), GbmConfig(rounds=10, learning_rate=0.3, max_depth=3))
preds = np.full(100, reg.base_score)
print("\nresidual-boosting MSE per stage:")
for i, tree in enumerate(reg.trees):
    preds = preds + reg.learning_rate * tree.predict(x)
    print(f"  stage {i + 1}: {np.mean((y - preds) ** 2):.6f}")

# --- bagged Gini trees with majority vote -------------------------------------
xb = rng.uniform(-1, 1, (300, 2))
yb = (xb[:, 0] + xb[:, 1] > 0).astype(float)
ensemble = fit_bagged_trees(Dataset(xb, yb), n_trees=15, config=GbmConfig(max_depth=4), seed=4)
acc = np.mean([predict_bagged(ensemble, row) == t for row, t in zip(xb, yb)])
print(f"\nbagged trees: 15 bootstrap trees, training accuracy {acc:.3f}")
