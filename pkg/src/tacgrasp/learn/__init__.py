"""Self-contained tensor math and training engine.

3-D convolutional networks built from a textual layer spec, trained with
Adam plus plateau decay and early stopping.  The convolution hot loops run
on a compiled core when available (see :mod:`tacgrasp.learn.kernels`).
"""

from .augment import AugmentConfig, augment, augment_sequence
from .kernels import BACKEND, HAVE_COMPILED
from .network import Network, default_spec
from .optim import Adam, EarlyStopping, PlateauScheduler
from .train import TrainConfig, fit, mean_prediction, predict_batch, \
    sequences_to_tensor

__all__ = [
    "AugmentConfig", "augment", "augment_sequence",
    "BACKEND", "HAVE_COMPILED",
    "Network", "default_spec",
    "Adam", "EarlyStopping", "PlateauScheduler",
    "TrainConfig", "fit", "mean_prediction", "predict_batch",
    "sequences_to_tensor",
]
