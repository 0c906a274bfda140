"""ROC AUC with tied scores, and the thresholded metrics."""

import numpy as np

from bridgedpi.metrics import roc_auc, roc_curve, threshold_metrics, trapezoid_auc

labels = np.array([0, 0, 1, 1, 0, 1, 1, 0])
scores = np.array([0.1, 0.4, 0.35, 0.8, 0.4, 0.4, 0.9, 0.2])

# rank-based AUC: the chance a random positive outscores a random negative, ties counting half
pos, neg = scores[labels == 1], scores[labels == 0]
by_hand = np.mean([(p > n) + 0.5 * (p == n) for p in pos for n in neg])
print(f"roc_auc {roc_auc(scores, labels):.4f}, by counting pairs {by_hand:.4f}")

# the trapezoid under the ROC curve gives the same number
fpr, tpr = roc_curve(scores, labels)
print("ROC points:", list(zip(fpr.round(2).tolist(), tpr.round(2).tolist())))
print(f"trapezoid {trapezoid_auc(scores, labels):.4f}")

report = threshold_metrics(scores, labels, threshold=0.5)
print(f"acc {report.acc:.3f}  precision {report.precision:.3f}  recall {report.recall:.3f}  f1 {report.f1:.3f}")

# no positives above the threshold: precision is undefined and reported as 0
print(threshold_metrics(scores, labels, threshold=0.95).degenerate)
