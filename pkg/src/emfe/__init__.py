"""Lightweight malaria cell classification from two morphological features.

The pipeline turns a stained single-cell image into a 128x128 binary mask,
measures foreground area and enclosed-hole topology, and feeds those two
numbers to small classical models (logistic regression, random forest, KNN,
RBF-SVM) plus a two-stage LR->RF ensemble. Everything is seeded and CPU-only.
"""

__version__ = "0.1.0"

MASK_SIDE = 128
MASK_PIXELS = MASK_SIDE * MASK_SIDE
