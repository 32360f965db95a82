"""Low-rank Seq2Tens maps: rank-1 functionals of order-1 signatures in linear time.

Both variants produce, for every prefix of a sequence, the contraction of
the prefix's order-1 signature levels against a family of rank-1 tensors.
The ``independent`` variant stores separate component vectors per level
(``M (M+1) / 2`` per functional); the ``recursive`` variant shares prefixes
(``ell_m = z_1 (x) ... (x) z_m``, ``M`` vectors per functional) and costs one
factor of ``M`` less.  A densify-and-contract oracle cross-checks both.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass

import numpy as np

from . import seqdata
from .errors import CapacityError, ConfigurationError, InputError, ShapeError
from .seqdata import Sequence, SequenceBatch
from .sigfeatures import SignatureConfig, signature
from .tensoralg import Rank1Element, densify


@dataclass
class LS2TWeights:
    """Rank-1 functional family for a low-rank Seq2Tens layer.

    ``level_vectors[m - 1]`` has shape ``(width, m, dim)`` for the
    independent variant and ``(width, dim)`` for the recursive one.
    """

    variant: str
    width: int
    trunc: int
    dim: int
    level_vectors: list[np.ndarray]

    def __post_init__(self):
        if self.variant not in ("independent", "recursive"):
            raise ConfigurationError(f"unknown LS2T variant {self.variant!r}")
        if len(self.level_vectors) != self.trunc:
            raise ShapeError(f"expected {self.trunc} weight arrays, got {len(self.level_vectors)}")
        fixed = []
        for m, arr in enumerate(self.level_vectors, start=1):
            arr = np.asarray(arr, dtype=float)
            want = (self.width, m, self.dim) if self.variant == "independent" else (self.width, self.dim)
            if arr.shape != want:
                raise ShapeError(f"level {m} weights must have shape {want}, got {arr.shape}")
            fixed.append(arr)
        self.level_vectors = fixed

    def component(self, m: int, k: int) -> np.ndarray:
        """Component vectors ``z_{m,k}`` for all functionals, shape ``(width, dim)``."""
        if self.variant == "independent":
            return self.level_vectors[m - 1][:, k - 1, :]
        return self.level_vectors[k - 1]

    def functional(self, j: int) -> Rank1Element:
        """Functional ``j`` as a rank-1 algebra element (scalar part 0)."""
        comps = [
            [self.component(m, k)[j] for k in range(1, m + 1)]
            for m in range(1, self.trunc + 1)
        ]
        return Rank1Element(self.dim, self.trunc, 0.0, comps)


def init_weights(variant: str, width: int, trunc: int, dim: int, seed: int = 0) -> LS2TWeights:
    """Centered-uniform initialization with entry variance ``1/dim``.

    Exposed as a convenience; nothing in the library requires this scheme.
    """
    rng = np.random.default_rng(seed)
    bound = np.sqrt(3.0 / dim)
    arrs = []
    for m in range(1, trunc + 1):
        shape = (width, m, dim) if variant == "independent" else (width, dim)
        arrs.append(rng.uniform(-bound, bound, size=shape))
    return LS2TWeights(variant, width, trunc, dim, arrs)


def _excl_cumsum_time(a: np.ndarray) -> np.ndarray:
    out = np.zeros_like(a)
    if a.shape[1] > 1:
        np.cumsum(a[:, :-1], axis=1, out=out[:, 1:])
    return out


def _prepare_increments(batch: SequenceBatch, dim: int) -> np.ndarray:
    if batch.dim != dim:
        raise ShapeError(f"weights expect dimension {dim}, batch has {batch.dim}")
    batch = seqdata.tabulate(batch)
    return np.diff(batch.as_array(), axis=1)  # (N, L, d)


def ls2t_independent(batch: SequenceBatch, weights: LS2TWeights, last_only: bool = False):
    """Per-level outputs ``Y_m[i, l, j] = <ell^j_m, level-m order-1 signature of prefix l>``.

    Returns a list of ``(N, L, width)`` arrays (or ``(N, width)`` with
    ``last_only``), one per level ``1..M``.
    """
    if weights.variant != "independent":
        raise ConfigurationError("weights are not in the independent format")
    return _ls2t(batch, weights, last_only)


def ls2t_recursive(batch: SequenceBatch, weights: LS2TWeights, last_only: bool = False):
    """As :func:`ls2t_independent` but with prefix-shared weights, ``O(M)`` per step."""
    if weights.variant != "recursive":
        raise ConfigurationError("weights are not in the recursive format")
    return _ls2t(batch, weights, last_only)


def _ls2t(batch: SequenceBatch, weights: LS2TWeights, last_only: bool):
    incs = _prepare_increments(batch, weights.dim)
    outputs = []
    if weights.variant == "recursive":
        # running tail R[i, l, j] for the current level; level m reuses level m-1's tail
        R = np.einsum("ild,jd->ilj", incs, weights.level_vectors[0])
        outputs.append(np.cumsum(R, axis=1))
        for m in range(2, weights.trunc + 1):
            R = np.einsum("ild,jd->ilj", incs, weights.level_vectors[m - 1]) * _excl_cumsum_time(R)
            outputs.append(np.cumsum(R, axis=1))
    else:
        for m in range(1, weights.trunc + 1):
            R = np.einsum("ild,jd->ilj", incs, weights.component(m, 1))
            for k in range(2, m + 1):
                R = np.einsum("ild,jd->ilj", incs, weights.component(m, k)) * _excl_cumsum_time(R)
            outputs.append(np.cumsum(R, axis=1))
    if last_only:
        return [y[:, -1, :] for y in outputs]
    return outputs


def rank1_oracle(seq: Sequence, ell: Rank1Element) -> np.ndarray:
    """Contract a rank-1 element against the order-1 signature, densely.

    Independent code path from both LS2T variants: densifies the element and
    the signature and takes level-wise inner products.  Guarded to small
    instances.
    """
    if seq.length > 12 or ell.trunc > 4:
        raise CapacityError("rank-1 oracle limited to L <= 12 and M <= 4")
    if seq.dim != ell.dim:
        raise ShapeError(f"dimension mismatch: sequence {seq.dim}, element {ell.dim}")
    dense = densify(ell)
    sig = signature(seq, SignatureConfig(trunc=ell.trunc, order=1))
    return np.array([float(dense.levels[m] @ sig.levels[m]) for m in range(ell.trunc + 1)])


def write_weights_csv(path, weights: LS2TWeights) -> None:
    """Serialize weights with a header row describing (variant, width, trunc, dim)."""
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["variant", "width", "trunc", "dim"])
        writer.writerow([weights.variant, weights.width, weights.trunc, weights.dim])
        writer.writerow(["level", "functional", "component", "values"])
        for m in range(1, weights.trunc + 1):
            karr = range(1, m + 1) if weights.variant == "independent" else [m]
            for k in karr:
                vecs = weights.component(m, k) if weights.variant == "independent" else weights.level_vectors[m - 1]
                for j in range(weights.width):
                    writer.writerow([m, j, k] + [f"{v:.17g}" for v in vecs[j]])


def read_weights_csv(path) -> LS2TWeights:
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        try:
            head = next(reader)
            meta = next(reader)
            next(reader)  # column header
        except StopIteration:
            raise InputError(f"{path}: truncated weight file") from None
        if head != ["variant", "width", "trunc", "dim"]:
            raise InputError(f"{path}: unexpected weight-file header {head!r}")
        variant, width, trunc, dim = meta[0], int(meta[1]), int(meta[2]), int(meta[3])
        arrs = [
            np.zeros((width, m, dim)) if variant == "independent" else np.zeros((width, dim))
            for m in range(1, trunc + 1)
        ]
        for row in reader:
            if not row:
                continue
            m, j, k = int(row[0]), int(row[1]), int(row[2])
            vals = np.array([float(v) for v in row[3:]])
            if vals.size != dim:
                raise InputError(f"{path}: weight vector of length {vals.size}, expected {dim}")
            if variant == "independent":
                arrs[m - 1][j, k - 1] = vals
            else:
                arrs[m - 1][j] = vals
    return LS2TWeights(variant, width, trunc, dim, arrs)
