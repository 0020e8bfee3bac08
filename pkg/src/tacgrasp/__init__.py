"""tacgrasp: a simulated three-finger tactile hand and its learning stack.

Modules
-------
tactile
    Deterministic image primitives: SSIM, deformation metrics, pin
    detection and the crop/downsample/concatenate pipeline.
sensor
    Pin-grid fingertip simulation and tactile frame rendering.
hand
    Grasp-event hand simulation, success detection, dataset collection.
pose
    Depth-image object localization and grasp-type selection.
learn
    From-scratch 3-D CNN training engine (compiled conv core + numpy
    fallback).
experiments
    Sequence extraction, dataset splits, and the three tactile
    experiments with report generation.
cli
    The ``tacgrasp`` command-line entry point.
"""

__version__ = "0.1.0"
