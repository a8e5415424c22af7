"""lobtrend: limit-order-book trend classification at desk scale.

Pipeline: snapshot parsing/generation -> stationary (or raw) feature
extraction -> filtered trend labels -> training and evaluation of
MLP/CNN/LSTM/CNN-LSTM classifiers plus a linear-SVM baseline, all on a
self-contained numpy/numba neural core.
"""

__version__ = "0.1.0"
