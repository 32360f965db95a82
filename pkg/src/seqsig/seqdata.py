"""Sequence data model: augmentations, batching, and path-complexity measures.

A sequence is an ordered list of ``L + 1`` state vectors in ``R^d`` indexed
``0..L``; its features are driven by the ``L`` increments between consecutive
states.  Batches tabulate ragged sequences to a common length by repeating
the final state, which adds zero increments and therefore leaves every
downstream signature-type feature unchanged.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigurationError, InputError, ShapeError


@dataclass(frozen=True)
class Sequence:
    """An ordered sequence of state vectors of uniform dimension.

    Attributes
    ----------
    values : np.ndarray
        Array of shape ``(L + 1, d)``.  A single observation (``L = 0``)
        is allowed; all level-``m`` features with ``m >= 1`` vanish for it.
    """

    values: np.ndarray

    def __post_init__(self):
        arr = np.asarray(self.values, dtype=float)
        if arr.ndim != 2:
            raise ShapeError(f"sequence values must be 2-d (steps, channels), got shape {arr.shape}")
        if arr.shape[0] < 1:
            raise InputError("a sequence needs at least one state vector")
        if arr.shape[1] < 1:
            raise InputError("state dimension must be at least 1")
        object.__setattr__(self, "values", arr)

    @property
    def length(self) -> int:
        """Number of increments ``L`` (one less than the number of states)."""
        return self.values.shape[0] - 1

    @property
    def dim(self) -> int:
        return self.values.shape[1]


@dataclass
class SequenceBatch:
    """A collection of sequences with uniform channel count.

    ``original_lengths`` records each member's increment count before any
    tabulation so padded batches remain distinguishable from native ones.
    """

    sequences: list[Sequence]
    original_lengths: list[int] = field(default_factory=list)

    def __post_init__(self):
        if not self.sequences:
            raise InputError("empty sequence batch")
        dims = {s.dim for s in self.sequences}
        if len(dims) != 1:
            raise ShapeError(f"sequences in a batch must share a channel count, got dims {sorted(dims)}")
        if not self.original_lengths:
            self.original_lengths = [s.length for s in self.sequences]
        elif len(self.original_lengths) != len(self.sequences):
            raise ShapeError("original_lengths must match the number of sequences")

    def __len__(self) -> int:
        return len(self.sequences)

    def __iter__(self):
        return iter(self.sequences)

    @property
    def dim(self) -> int:
        return self.sequences[0].dim

    @property
    def max_length(self) -> int:
        return max(s.length for s in self.sequences)

    def is_uniform(self) -> bool:
        return len({s.length for s in self.sequences}) == 1

    def as_array(self) -> np.ndarray:
        """Dense ``(N, L + 1, d)`` view of a tabulated batch."""
        if not self.is_uniform():
            raise ShapeError("batch must be tabulated before dense conversion")
        return np.stack([s.values for s in self.sequences])


def _augment_time(values: np.ndarray, scale: float) -> np.ndarray:
    n = values.shape[0]
    if n == 1:
        t = np.zeros(1)
    else:
        t = scale * np.arange(n) / (n - 1)
    return np.column_stack([t, values])


def _augment_basepoint(values: np.ndarray) -> np.ndarray:
    return np.vstack([np.zeros((1, values.shape[1])), values])


def _augment_lead_lag(values: np.ndarray) -> np.ndarray:
    # interleaved (lead, lag) pairs: (x_0,x_0), (x_1,x_0), (x_1,x_1), ...
    n, d = values.shape
    out = np.empty((2 * n - 1, 2 * d))
    out[0::2, :d] = values
    out[0::2, d:] = values
    if n > 1:
        out[1::2, :d] = values[1:]
        out[1::2, d:] = values[:-1]
    return out


def parse_augmentation(spec: str) -> tuple[str, float]:
    """Parse a single augmentation descriptor like ``time:2.0`` or ``basepoint``."""
    name, _, arg = spec.strip().partition(":")
    name = name.strip().lower().replace("-", "_")
    if name == "time":
        scale = 1.0
        if arg:
            try:
                scale = float(arg)
            except ValueError as exc:
                raise ConfigurationError(f"invalid time scale {arg!r}") from exc
        if scale < 0:
            raise ConfigurationError("time scale must be nonnegative")
        return ("time", scale)
    if name == "basepoint":
        return ("basepoint", 0.0)
    if name in ("lead_lag", "leadlag"):
        return ("lead_lag", 0.0)
    raise ConfigurationError(f"unknown augmentation {spec!r}")


def augment(seq: Sequence, spec) -> Sequence:
    """Apply one augmentation or an ordered composition of augmentations.

    ``spec`` may be a descriptor string (``"time:0.5"``, ``"basepoint"``,
    ``"lead_lag"``), a ``(name, arg)`` tuple, or a list of either; lists are
    applied left to right.
    """
    if isinstance(spec, (list, tuple)) and spec and isinstance(spec[0], (str, tuple)):
        if isinstance(spec, tuple) and len(spec) == 2 and isinstance(spec[1], (int, float)):
            spec = [spec]
        values = seq.values
        for item in spec:
            values = augment(Sequence(values), item).values
        return Sequence(values)
    if isinstance(spec, str):
        name, arg = parse_augmentation(spec)
    else:
        name, arg = spec
    if name == "time":
        return Sequence(_augment_time(seq.values, arg))
    if name == "basepoint":
        return Sequence(_augment_basepoint(seq.values))
    if name == "lead_lag":
        return Sequence(_augment_lead_lag(seq.values))
    raise ConfigurationError(f"unknown augmentation {name!r}")


def augment_batch(batch: SequenceBatch, specs) -> SequenceBatch:
    if not specs:
        return batch
    seqs = [augment(s, specs) for s in batch]
    return SequenceBatch(seqs)


def tabulate(batch: SequenceBatch) -> SequenceBatch:
    """Pad every sequence to the batch maximum length by repeating its last state.

    Padding contributes zero increments, so signature-type features of the
    padded batch match those of the original.  Idempotent.
    """
    target = batch.max_length
    padded = []
    for s in batch:
        gap = target - s.length
        if gap == 0:
            padded.append(s)
        else:
            tail = np.repeat(s.values[-1:], gap, axis=0)
            padded.append(Sequence(np.vstack([s.values, tail])))
    return SequenceBatch(padded, original_lengths=list(batch.original_lengths))


def increments(seq: Sequence) -> np.ndarray:
    """First-order forward differences, shape ``(L, d)``; empty when ``L = 0``."""
    return np.diff(seq.values, axis=0)


def one_variation(seq: Sequence) -> float:
    """Sum of Euclidean norms of the increments; 0 for a single observation."""
    if seq.length == 0:
        return 0.0
    return float(np.linalg.norm(increments(seq), axis=1).sum())


def read_sequence_csv(path) -> tuple[SequenceBatch, list[str]]:
    """Read a long-format batch CSV with header ``id,step,c0,...,c{d-1}``.

    Rows must be sorted by ``(id, step)``; ids are opaque strings.  Returns
    the batch together with the ids in order of first appearance.
    """
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise InputError(f"{path}: empty file") from None
        if len(header) < 3 or header[0] != "id" or header[1] != "step":
            raise InputError(f"{path}: expected header 'id,step,c0,...', got {header!r}")
        d = len(header) - 2
        ids: list[str] = []
        rows: dict[str, list[np.ndarray]] = {}
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != d + 2:
                raise InputError(f"{path}:{lineno}: expected {d + 2} columns, got {len(row)}")
            sid = row[0]
            try:
                vals = np.array([float(v) for v in row[2:]])
            except ValueError as exc:
                raise InputError(f"{path}:{lineno}: non-numeric value ({exc})") from None
            if sid not in rows:
                ids.append(sid)
                rows[sid] = []
            rows[sid].append(vals)
    if not ids:
        raise InputError(f"{path}: no data rows")
    batch = SequenceBatch([Sequence(np.vstack(rows[sid])) for sid in ids])
    return batch, ids


def write_sequence_csv(path, batch: SequenceBatch, ids: list[str] | None = None) -> None:
    """Write a batch in the long format accepted by :func:`read_sequence_csv`."""
    if ids is None:
        ids = [str(i) for i in range(len(batch))]
    d = batch.dim
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["id", "step"] + [f"c{j}" for j in range(d)])
        for sid, seq in zip(ids, batch):
            for step, state in enumerate(seq.values):
                writer.writerow([sid, step] + [f"{v:.17g}" for v in state])
