"""Shared helpers for the test suite."""

from __future__ import annotations

import numpy as np

from skelfill import Dataset, SkeletonSequence


def seq_of(data, sample_id="s0", label=None, body_present=None) -> SkeletonSequence:
    data = np.asarray(data, dtype=np.float32)
    return SkeletonSequence(
        data=data, sample_id=sample_id, label=label,
        body_present=None if body_present is None else np.asarray(body_present, dtype=bool),
    )


def dataset_of(*seqs: SkeletonSequence, split: str = "train") -> Dataset:
    return Dataset.from_sequences(list(seqs), split_tag=split)


def random_dataset(
    rng: np.random.Generator,
    n: int,
    frames: int = 3,
    joints: int = 4,
    bodies: int = 1,
    split: str = "train",
    prefix: str = "r",
) -> Dataset:
    seqs = []
    for i in range(n):
        data = rng.uniform(-10.0, 10.0, size=(3, frames, joints, bodies)).astype(np.float32)
        seqs.append(SkeletonSequence(data=data, sample_id=f"{prefix}{i:04d}", label=None))
    return Dataset.from_sequences(seqs, split_tag=split)


def bits_equal(a: np.ndarray, b: np.ndarray) -> bool:
    """Bitwise array equality; NaN payloads must match too."""
    return a.shape == b.shape and a.dtype == b.dtype and a.tobytes() == b.tobytes()


def capture_text(frames) -> str:
    """Build capture text.  ``frames`` is a list of frames; each frame is a
    list of (body_id, coords) where coords is an iterable of (x, y, z)."""
    lines = [str(len(frames))]
    for bodies in frames:
        lines.append(str(len(bodies)))
        for body_id, coords in bodies:
            lines.append(f"{body_id} 0 0 0 0 0 0 0 0 2")
            coords = list(coords)
            lines.append(str(len(coords)))
            for x, y, z in coords:
                lines.append(f"{x} {y} {z}")
    return "\n".join(lines) + "\n"
