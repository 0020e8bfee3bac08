"""Experimental protocols on simulated grasp data."""

from .dataset import DatasetSplit, SequenceDataset, build_dataset, \
    split_by_grasp
from .reports import ExperimentReport, confusion_matrix
from .runs import (classification_settings, run_grasp_success_prediction,
                   run_item_classification, run_online_classification,
                   run_sensitivity, run_torque_sweep, sensitivity_summary,
                   success_settings, vote_ensemble_accuracy, RunSettings)
from .sequences import SequenceSample, extract_sequences, select_sensors

__all__ = [
    "DatasetSplit", "SequenceDataset", "build_dataset", "split_by_grasp",
    "ExperimentReport", "confusion_matrix",
    "classification_settings", "success_settings", "RunSettings",
    "run_item_classification", "run_online_classification",
    "run_grasp_success_prediction", "run_sensitivity", "run_torque_sweep",
    "sensitivity_summary", "vote_ensemble_accuracy",
    "SequenceSample", "extract_sequences", "select_sensors",
]
