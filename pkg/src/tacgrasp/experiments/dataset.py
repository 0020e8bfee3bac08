"""Dataset assembly: per-grasp train/validation splits and sequence tensors.

The split is always on grasp (video) ids, never on sequences, so no
sequence from a validation grasp can leak into training.  Extracted
sequences are cached per grasp under ``<root>/_cache`` keyed by the grasp
seed, because extraction (PGM reads + preprocessing) dominates dataset
build time.
"""

from __future__ import annotations

import os
from dataclasses import dataclass

import numpy as np

from ..errors import IntegrityError, InvalidInputError
from ..hand import GraspRecord, load_manifest, load_refs, load_video
from .sequences import extract_sequences

TRAIN_FRAC = 0.7


@dataclass(frozen=True)
class DatasetSplit:
    train_ids: tuple
    val_ids: tuple

    def __post_init__(self):
        overlap = set(self.train_ids) & set(self.val_ids)
        if overlap:
            raise InvalidInputError(f"split leaks grasp ids: {sorted(overlap)}")


@dataclass
class SequenceDataset:
    """Sequence tensors plus the grasp bookkeeping needed for audits."""

    frames: np.ndarray  # (n, 8, 60, 120) uint8
    labels: np.ndarray  # (n,) int64
    grasp_ids: list  # per sequence
    split: DatasetSplit
    class_names: dict  # label -> name

    def partition(self, ids):
        idx = [i for i, g in enumerate(self.grasp_ids) if g in ids]
        return self.frames[idx], self.labels[idx], [self.grasp_ids[i] for i in idx]

    @property
    def train(self):
        return self.partition(set(self.split.train_ids))

    @property
    def val(self):
        return self.partition(set(self.split.val_ids))


def grasp_key(record: GraspRecord) -> str:
    return f"{record.object_name}/{record.grasp_index:03d}"


def split_by_grasp(records, seed: int, train_frac: float = TRAIN_FRAC,
                   label_of=None) -> DatasetSplit:
    """Per-grasp split stratified by label (default: object class)."""
    if label_of is None:
        label_of = lambda r: r.object_label
    by_class: dict = {}
    for r in records:
        by_class.setdefault(label_of(r), []).append(grasp_key(r))
    rng = np.random.default_rng(np.random.SeedSequence([seed, 0x5917]))
    train, val = [], []
    for label in sorted(by_class):
        ids = sorted(by_class[label])
        rng.shuffle(ids)
        n_train = int(round(train_frac * len(ids)))
        n_train = min(max(n_train, 1), len(ids) - 1) if len(ids) > 1 else 1
        train.extend(ids[:n_train])
        val.extend(ids[n_train:])
    return DatasetSplit(tuple(sorted(train)), tuple(sorted(val)))


def verify_files(root, records) -> None:
    """Raise IntegrityError listing every missing frame/reference file."""
    missing = []
    for r in records:
        for rel in r.refs:
            if not os.path.exists(os.path.join(root, rel)):
                missing.append(rel)
        for rel_dir in r.videos:
            for i in range(r.n_frames):
                p = os.path.join(rel_dir, f"frame_{i:04d}.pgm")
                if not os.path.exists(os.path.join(root, p)):
                    missing.append(p)
    if missing:
        raise IntegrityError(
            f"{len(missing)} dataset file(s) missing", missing_paths=missing
        )


def _cache_path(root, record):
    return os.path.join(root, "_cache",
                        f"{record.object_name}_{record.grasp_index:03d}.npz")


def _load_or_extract(root, record, label):
    path = _cache_path(root, record)
    key = np.asarray(record.seed, dtype=np.int64)
    if os.path.exists(path):
        with np.load(path) as z:
            if np.array_equal(z["seed"], key):
                return [a for a in z["frames"]]
    videos = [load_video(root, record, k) for k in range(3)]
    refs = load_refs(root, record)
    samples = extract_sequences(videos, refs, label, grasp_key(record))
    frames = np.stack([s.frames for s in samples])
    os.makedirs(os.path.dirname(path), exist_ok=True)
    tmp = path + ".tmp.npz"
    np.savez_compressed(tmp, frames=frames, seed=key)
    os.replace(tmp, path)
    return [f for f in frames]


def build_dataset(root, seed: int, label: str = "class",
                  manifest: dict | None = None) -> SequenceDataset:
    """Load a simulated dataset directory into sequence tensors.

    ``label`` selects the training target: "class" for object
    classification, "success" for grasp-success prediction (split then
    stratifies on the success flag so both partitions keep the imbalance).
    """
    if label not in ("class", "success"):
        raise InvalidInputError(f"label must be 'class' or 'success', got {label}")
    if manifest is None:
        manifest = load_manifest(os.path.join(root, "manifest.json"))
    records = manifest["grasps"]
    if not records:
        raise InvalidInputError("manifest contains no grasps")
    verify_files(root, records)

    if label == "class":
        label_of = lambda r: r.object_label
        class_names = {o["class_id"]: o["name"] for o in manifest["objects"]}
        # class ids must be dense 0..k-1 for the softmax head
        remap = {cid: i for i, cid in enumerate(sorted(class_names))}
        get = lambda r: remap[r.object_label]
        class_names = {remap[c]: n for c, n in class_names.items()}
    else:
        label_of = lambda r: int(r.success)
        get = label_of
        class_names = {0: "failure", 1: "success"}

    split = split_by_grasp(records, seed, label_of=label_of)
    frames, labels, ids = [], [], []
    for record in records:
        lab = get(record)
        for sample in _load_or_extract(root, record, lab):
            frames.append(sample)
            labels.append(lab)
            ids.append(grasp_key(record))
    return SequenceDataset(
        frames=np.stack(frames),
        labels=np.asarray(labels, dtype=np.int64),
        grasp_ids=ids,
        split=split,
        class_names=class_names,
    )


def audit_no_leak(dataset: SequenceDataset, train_ids_used) -> None:
    """Post-run check that no validation grasp fed the training set."""
    leak = set(train_ids_used) & set(dataset.split.val_ids)
    if leak:
        raise IntegrityError(f"validation grasps leaked into training: {sorted(leak)}")
