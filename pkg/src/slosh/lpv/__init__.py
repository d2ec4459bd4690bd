"""Affine LPV surrogate: model, identification and integrator augmentation."""

from .ident import TrainConfig, TrainingReport, bfr, fit_lti_init, subspace_lti, train
from .model import LpvModel, augment_integrators, init_scheduled, schedule_eval
from .synthetic import synthetic_lpv, synthetic_dataset

__all__ = [
    "LpvModel", "TrainConfig", "TrainingReport", "augment_integrators", "bfr", "fit_lti_init",
    "init_scheduled", "schedule_eval", "subspace_lti", "synthetic_dataset", "synthetic_lpv", "train",
]
