"""L2-regularized one-vs-rest linear SVM with squared hinge loss.

The trained objective per class c is

    (lam / 2) ||w_c||^2 + (1/N) sum_i max(0, 1 - y_ic (w_c . x_i + b_c))^2

over standardized features, minimized jointly for all classes with
L-BFGS from a zero start, which makes training deterministic.
"""

from dataclasses import dataclass

import numpy as np
from scipy.optimize import minimize


@dataclass
class LinearModel:
    weights: np.ndarray         # (num_classes, d)
    biases: np.ndarray          # (num_classes,)
    feature_means: np.ndarray   # (d,)
    feature_scales: np.ndarray  # (d,)
    lam: float

    @property
    def num_classes(self):
        return self.weights.shape[0]


def standardize_fit(features):
    """Per-column mean and population std; zero-variance columns get scale 1."""
    features = np.asarray(features, dtype=np.float64)
    if features.shape[0] < 2:
        raise ValueError("need at least 2 rows to standardize")
    means = features.mean(axis=0)
    scales = features.std(axis=0)
    scales = np.where(scales > 0, scales, 1.0)
    return means, scales


def _objective(flat, X, Y, lam, n_classes, d):
    W = flat[:n_classes * d].reshape(n_classes, d)
    b = flat[n_classes * d:]
    margins = 1.0 - Y * (X @ W.T + b)
    hinge = np.maximum(margins, 0.0)
    n = X.shape[0]
    f = 0.5 * lam * np.sum(W * W) + np.sum(hinge * hinge) / n
    coeff = Y * hinge  # (n, classes)
    grad_w = lam * W - (2.0 / n) * coeff.T @ X
    grad_b = -(2.0 / n) * coeff.sum(axis=0)
    return f, np.concatenate([grad_w.reshape(-1), grad_b])


def train_ovr_svm(features, labels, lam, max_iter=500, seed=0):
    """Fit the one-vs-rest model on raw features.

    Standardization is fit here and stored on the model; prediction
    applies it before scoring.  The seed is accepted for interface
    stability but the zero-start L-BFGS solve is deterministic anyway.
    """
    del seed
    features = np.asarray(features, dtype=np.float64)
    labels = np.asarray(labels)
    if features.shape[0] != labels.shape[0]:
        raise ValueError("features and labels disagree on the sample count")
    classes = np.unique(labels)
    if classes.size < 2:
        raise ValueError("need at least 2 classes to train one-vs-rest")
    n_classes = int(labels.max()) + 1
    n, d = features.shape

    means, scales = standardize_fit(features)
    X = (features - means) / scales
    Y = np.where(labels[:, None] == np.arange(n_classes)[None, :], 1.0, -1.0)

    x0 = np.zeros(n_classes * d + n_classes)
    res = minimize(_objective, x0, args=(X, Y, lam, n_classes, d),
                   jac=True, method="L-BFGS-B",
                   options={"maxiter": max_iter, "gtol": 1e-9,
                            "ftol": 1e-12})
    W = res.x[:n_classes * d].reshape(n_classes, d)
    b = res.x[n_classes * d:]
    return LinearModel(weights=W, biases=b, feature_means=means,
                       feature_scales=scales, lam=lam)


def decision_scores(model, features):
    features = np.asarray(features, dtype=np.float64)
    if features.shape[1] != model.weights.shape[1]:
        raise ValueError(
            f"feature dim {features.shape[1]} != model dim "
            f"{model.weights.shape[1]}")
    X = (features - model.feature_means) / model.feature_scales
    return X @ model.weights.T + model.biases


def predict(model, features):
    """Class with the highest score; lowest class index on ties."""
    return np.argmax(decision_scores(model, features), axis=1)


def evaluate(model, features, labels):
    """Fraction of correct argmax predictions."""
    labels = np.asarray(labels)
    preds = predict(model, features)
    if preds.shape[0] != labels.shape[0]:
        raise ValueError("features and labels disagree on the sample count")
    return float(np.mean(preds == labels))


def objective_value(model, features, labels):
    """Trained objective evaluated at the model's weights (post-standardize)."""
    features = np.asarray(features, dtype=np.float64)
    X = (features - model.feature_means) / model.feature_scales
    n_classes, d = model.weights.shape
    Y = np.where(np.asarray(labels)[:, None] == np.arange(n_classes)[None, :],
                 1.0, -1.0)
    flat = np.concatenate([model.weights.reshape(-1), model.biases])
    f, _ = _objective(flat, X, Y, model.lam, n_classes, d)
    return f


DEFAULT_LAMBDA_GRID = (1e-4, 1e-3, 1e-2, 1e-1, 1.0, 10.0)


def cross_validate_lambda(features, labels, grid=DEFAULT_LAMBDA_GRID,
                          folds=5, max_iter=500, seed=0):
    """Pick the regularization strength by k-fold cross-validation.

    Returns the grid value with the highest mean validation accuracy;
    ties go to the larger lambda (stronger regularization).
    """
    features = np.asarray(features, dtype=np.float64)
    labels = np.asarray(labels)
    n = features.shape[0]
    rng = np.random.default_rng(seed)
    order = rng.permutation(n)
    fold_ids = np.arange(n) % folds

    accuracies = np.zeros(len(grid))
    for f in range(folds):
        val = order[fold_ids == f]
        train = order[fold_ids != f]
        if np.unique(labels[train]).size < 2:
            continue
        for gi, lam in enumerate(grid):
            model = train_ovr_svm(features[train], labels[train], lam,
                                  max_iter=max_iter)
            accuracies[gi] += evaluate(model, features[val], labels[val])
    best = max(range(len(grid)), key=lambda gi: (accuracies[gi], grid[gi]))
    return float(grid[best])
