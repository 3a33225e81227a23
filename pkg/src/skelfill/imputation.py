"""Within-cluster nearest-neighbour imputation of missing joints.

Each sample is viewed as a flat vector of length ``L = 3*T*V*M`` with NaN
holes.  The distance between two samples is a masked Euclidean distance
computed over the coordinates both have, scaled up by how little they
overlap::

    dist(a, b) = sqrt((L / |P|) * sum_{i in P} (a_i - b_i)^2)

where P is the set of positions present in both.  Pairs with no overlap
have no distance and never serve as neighbours.

A missing joint instance of a target sample is filled from the k nearest
cluster members that have that whole joint instance present; all three
channels share the donor set.  The fill is the inverse-distance weighted
mean of the donor values; if any donor sits at distance exactly 0, the fill
is the plain mean of the zero-distance donors.  Donors always contribute
their *original* values, so imputed values never feed later imputations and
the result does not depend on processing order.  Positions with no donors
stay NaN and are tallied as unimputable.

Training samples draw donors from their own cluster; test samples draw
donors exclusively from the training members of their predicted cluster.
"""

from __future__ import annotations

import json
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .clustering import PseudoLabels
from .data import Dataset, SkeletonSequence
from .errors import EmptyDonorSet, LabelMismatch, NoOverlap


@dataclass
class FlatSample:
    """Flattened view of one sample.

    vector      [L] float64 with NaN holes, C-order flattening of [C, T, V, M]
    present     [L] bool
    sample_ref  index of the sample in its dataset
    """

    vector: np.ndarray
    present: np.ndarray
    sample_ref: int

    @classmethod
    def from_sequence(cls, seq: SkeletonSequence, sample_ref: int) -> "FlatSample":
        vector = seq.data.astype(np.float64).ravel()
        return cls(vector=vector, present=np.isfinite(vector), sample_ref=sample_ref)


@dataclass
class DonorSet:
    """Neighbours chosen for one position: (sample_ref, distance) pairs,
    ordered by ascending distance then ascending sample_ref."""

    neighbors: list[tuple[int, float]] = field(default_factory=list)

    def __len__(self) -> int:
        return len(self.neighbors)


@dataclass
class SampleCounts:
    missing: int = 0
    imputed: int = 0
    unimputable: int = 0


@dataclass
class ImputationReport:
    """Scalar-coordinate accounting (3 per joint instance) plus the donor
    pool each cluster offered."""

    train: dict[str, SampleCounts]
    test: dict[str, SampleCounts]
    cluster_sizes: dict[int, int]
    k: int

    def totals(self) -> SampleCounts:
        out = SampleCounts()
        for counts in list(self.train.values()) + list(self.test.values()):
            out.missing += counts.missing
            out.imputed += counts.imputed
            out.unimputable += counts.unimputable
        return out

    def to_json(self) -> str:
        def block(side: dict[str, SampleCounts]) -> dict:
            return {
                sid: {"missing": c.missing, "imputed": c.imputed, "unimputable": c.unimputable}
                for sid, c in side.items()
            }

        totals = self.totals()
        payload = {
            "k": self.k,
            "cluster_sizes": {str(label): size for label, size in sorted(self.cluster_sizes.items())},
            "train": block(self.train),
            "test": block(self.test),
            "totals": {
                "missing": totals.missing,
                "imputed": totals.imputed,
                "unimputable": totals.unimputable,
            },
        }
        return json.dumps(payload, sort_keys=True, indent=2)


def masked_distance(a: FlatSample, b: FlatSample) -> float:
    """Overlap-scaled Euclidean distance between two flat samples."""
    if a.vector.shape != b.vector.shape:
        raise ValueError("samples differ in length")
    both = a.present & b.present
    overlap = int(both.sum())
    if overlap == 0:
        raise NoOverlap(
            f"samples {a.sample_ref} and {b.sample_ref} share no present coordinate"
        )
    diff = a.vector[both] - b.vector[both]
    weight = a.vector.size / overlap
    return float(np.sqrt(weight * (diff * diff).sum()))


def find_donors(
    cluster: Sequence[FlatSample], target: FlatSample, position: int, k: int
) -> DonorSet:
    """The up-to-k nearest cluster members with ``position`` present.

    Candidates with no coordinate overlap with the target are skipped.
    Ties in distance are broken toward the lower sample_ref.
    """
    if k < 1:
        raise ValueError("k must be >= 1")
    if not 0 <= position < target.vector.size:
        raise ValueError(f"position {position} outside the flat vector")
    scored: list[tuple[float, int]] = []
    for member in cluster:
        if member.sample_ref == target.sample_ref:
            continue
        if not member.present[position]:
            continue
        try:
            dist = masked_distance(target, member)
        except NoOverlap:
            continue
        scored.append((dist, member.sample_ref))
    scored.sort()
    return DonorSet(neighbors=[(ref, dist) for dist, ref in scored[:k]])


def _weighted_fill(distances: np.ndarray, values: np.ndarray) -> float:
    zero = distances == 0.0
    if zero.any():
        return float(values[zero].mean())
    recip = 1.0 / distances
    return float((recip * values).sum() / recip.sum())


def impute_value(donors: DonorSet, donor_values: np.ndarray) -> float:
    """Inverse-distance weighted mean of the donor values (see module doc)."""
    if len(donors) == 0:
        raise EmptyDonorSet("no donors available")
    donor_values = np.asarray(donor_values, dtype=np.float64)
    if donor_values.shape != (len(donors),):
        raise ValueError("donor values do not align with the donor set")
    distances = np.array([dist for _, dist in donors.neighbors], dtype=np.float64)
    return _weighted_fill(distances, donor_values)


def _check_alignment(dataset: Dataset, labels: PseudoLabels, side: str) -> None:
    if labels is None:
        raise LabelMismatch(f"{side} labels are required")
    if list(labels.sample_ids) != dataset.sample_ids:
        raise LabelMismatch(f"{side} labels are not aligned with the {side} dataset")


def _flat_matrix(dataset: Dataset) -> tuple[np.ndarray, np.ndarray]:
    rows = np.stack([seq.data.astype(np.float64).ravel() for seq in dataset.samples])
    return rows, np.isfinite(rows)


def _distances_to_members(
    member_rows: np.ndarray, member_present: np.ndarray, vector: np.ndarray, present: np.ndarray
) -> np.ndarray:
    """Masked distance from one target to every member row; positions with
    no overlap come back as +inf."""
    both = member_present & present[None, :]
    counts = both.sum(axis=1)
    diff = np.where(both, member_rows - vector[None, :], 0.0)
    ignored = (diff * diff).sum(axis=1)
    length = vector.size
    out = np.full(member_rows.shape[0], np.inf)
    valid = counts > 0
    out[valid] = np.sqrt(length / counts[valid] * ignored[valid])
    return out


def _fill_one_target(
    out_data: np.ndarray,
    seq: SkeletonSequence,
    frame_mask: np.ndarray,
    vector: np.ndarray,
    present: np.ndarray,
    member_rows: np.ndarray,
    member_present: np.ndarray,
    member_refs: np.ndarray,
    k: int,
    self_ref: int | None,
    trace: dict | None,
    trace_key: str,
) -> SampleCounts:
    """Impute every missing joint instance of one sample in place."""
    counts = SampleCounts(missing=int((~present).sum()))
    instances = np.argwhere(frame_mask)  # [(t, v, m)] in C order
    if instances.size == 0:
        return counts
    if member_rows.shape[0] == 0:
        counts.unimputable = counts.missing
        return counts

    dist = _distances_to_members(member_rows, member_present, vector, present)
    if self_ref is not None:
        dist[member_refs == self_ref] = np.inf
    order = np.lexsort((member_refs, dist))
    order = order[np.isfinite(dist[order])]
    ordered_present = member_present[order]
    ordered_dist = dist[order]
    ordered_rows = member_rows[order]
    ordered_refs = member_refs[order]

    _, t_n, v_n, m_n = seq.data.shape
    flat_view = out_data.reshape(-1)
    for t, v, m in instances:
        pos0 = ((0 * t_n + t) * v_n + v) * m_n + m
        hits = np.flatnonzero(ordered_present[:, pos0])[:k]
        if hits.size == 0:
            counts.unimputable += 3
            continue
        donor_dist = ordered_dist[hits]
        for c in range(3):
            pos = ((c * t_n + t) * v_n + v) * m_n + m
            flat_view[pos] = _weighted_fill(donor_dist, ordered_rows[hits, pos])
        counts.imputed += 3
        if trace is not None:
            trace[(trace_key, int(t), int(v), int(m))] = tuple(int(r) for r in ordered_refs[hits])
    return counts


def impute_dataset(
    train: Dataset,
    train_labels: PseudoLabels,
    test: Dataset | None = None,
    test_labels: PseudoLabels | None = None,
    k: int = 5,
    threads: int = 1,
    trace: dict | None = None,
) -> tuple[Dataset, Dataset | None, ImputationReport]:
    """Impute every sample of the given datasets (see module doc).

    ``trace``, when given, maps ``(sample_id, t, v, m)`` to the tuple of
    donor sample indices used, in neighbour order — handy for audits.
    """
    if k < 1:
        raise ValueError("k must be >= 1")
    _check_alignment(train, train_labels, "train")
    if test is not None:
        _check_alignment(test, test_labels, "test")

    train_rows, train_present = _flat_matrix(train)
    clusters: dict[int, np.ndarray] = {}
    for label in np.unique(train_labels.labels):
        clusters[int(label)] = np.flatnonzero(train_labels.labels == label)

    out_train = [seq.data.astype(np.float64) for seq in train.samples]
    train_counts: dict[str, SampleCounts] = {}

    def run_train_cluster(label: int) -> dict[str, SampleCounts]:
        members = clusters[label]
        member_rows = train_rows[members]
        member_present = train_present[members]
        local: dict[str, SampleCounts] = {}
        for gi in members:
            seq = train.samples[gi]
            local[seq.sample_id] = _fill_one_target(
                out_train[gi], seq, train.masks[gi].frame_mask,
                train_rows[gi], train_present[gi],
                member_rows, member_present, members, k,
                self_ref=int(gi), trace=trace, trace_key=seq.sample_id,
            )
        return local

    labels_sorted = sorted(clusters)
    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            for partial in pool.map(run_train_cluster, labels_sorted):
                train_counts.update(partial)
    else:
        for label in labels_sorted:
            train_counts.update(run_train_cluster(label))

    imputed_train = Dataset.from_sequences(
        [
            SkeletonSequence(
                data=data.astype(np.float32),
                sample_id=seq.sample_id,
                label=seq.label,
                body_present=None if seq.body_present is None else seq.body_present.copy(),
            )
            for data, seq in zip(out_train, train.samples)
        ],
        split_tag=train.split_tag,
    )

    imputed_test: Dataset | None = None
    test_counts: dict[str, SampleCounts] = {}
    if test is not None:
        test_rows, test_present = _flat_matrix(test)
        out_test = [seq.data.astype(np.float64) for seq in test.samples]
        by_label: dict[int, list[int]] = {}
        for gi, label in enumerate(test_labels.labels):
            by_label.setdefault(int(label), []).append(gi)

        def run_test_group(label: int) -> dict[str, SampleCounts]:
            members = clusters.get(label, np.empty(0, dtype=np.int64))
            member_rows = train_rows[members]
            member_present = train_present[members]
            local: dict[str, SampleCounts] = {}
            for gi in by_label[label]:
                seq = test.samples[gi]
                local[seq.sample_id] = _fill_one_target(
                    out_test[gi], seq, test.masks[gi].frame_mask,
                    test_rows[gi], test_present[gi],
                    member_rows, member_present, members, k,
                    self_ref=None, trace=trace, trace_key=seq.sample_id,
                )
            return local

        group_labels = sorted(by_label)
        if threads > 1:
            with ThreadPoolExecutor(max_workers=threads) as pool:
                for partial in pool.map(run_test_group, group_labels):
                    test_counts.update(partial)
        else:
            for label in group_labels:
                test_counts.update(run_test_group(label))

        imputed_test = Dataset.from_sequences(
            [
                SkeletonSequence(
                    data=data.astype(np.float32),
                    sample_id=seq.sample_id,
                    label=seq.label,
                    body_present=None if seq.body_present is None else seq.body_present.copy(),
                )
                for data, seq in zip(out_test, test.samples)
            ],
            split_tag=test.split_tag,
        )

    report = ImputationReport(
        train={seq.sample_id: train_counts[seq.sample_id] for seq in train.samples},
        test=(
            {} if test is None else {seq.sample_id: test_counts[seq.sample_id] for seq in test.samples}
        ),
        cluster_sizes={label: int(len(clusters[label])) for label in labels_sorted},
        k=k,
    )
    return imputed_train, imputed_test, report
