"""From-scratch training stack comparing SGD, conjugate gradient, L-BFGS and
Levenberg-Marquardt on image classification and deep Q-learning tasks."""

__version__ = "0.1.0"
