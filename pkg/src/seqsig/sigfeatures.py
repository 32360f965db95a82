"""Order-p discretized signature features of sequences.

The level-``m`` feature sums outer products of increments over nondecreasing
``m``-tuples of time indices, each weighted by the inverse product of
factorials of its repetition counts; tuples with any index repeated more than
``p`` times are dropped.  ``p = 1`` keeps only strictly increasing tuples,
``p = M`` recovers the signature of the piecewise-linear interpolation.

The fast path is a joint recursion over levels and time, validated against
:func:`signature_brute`, a direct enumeration kept deliberately independent
of it.
"""

from __future__ import annotations

import itertools
import math
from collections import Counter
from dataclasses import dataclass, field

import numpy as np

from . import seqdata, tensoralg
from .errors import CapacityError, ConfigurationError
from .seqdata import Sequence
from .tensoralg import TruncatedTensorSeries

#: Ceiling on the entry count of the DP workspace (levels x time x d^m).
DP_WORKSPACE_LIMIT = 200_000_000

#: Levels with Frobenius norm below this are left unnormalized (as zeros).
NORMALIZE_EPS = 1e-12


@dataclass(frozen=True)
class SignatureConfig:
    """Configuration for discretized signature features.

    ``order`` beyond ``trunc`` would silently change nothing, so it is
    rejected.  ``order=1`` is the default: it is the cheapest variant and
    tends to perform on par with higher orders.
    """

    trunc: int
    order: int = 1
    augmentations: tuple = field(default_factory=tuple)
    normalize: bool = False

    def __post_init__(self):
        if self.trunc < 1:
            raise ConfigurationError("truncation level must be at least 1")
        if not 1 <= self.order <= self.trunc:
            raise ConfigurationError(
                f"order must lie in 1..trunc={self.trunc}, got {self.order}"
            )


def _apply_augmentations(seq: Sequence, cfg: SignatureConfig) -> Sequence:
    if cfg.augmentations:
        return seqdata.augment(seq, list(cfg.augmentations))
    return seq


def _normalize_levels_inplace(series: TruncatedTensorSeries) -> None:
    for m in range(1, series.trunc + 1):
        norm = np.linalg.norm(series.levels[m])
        if norm >= NORMALIZE_EPS:
            series.levels[m] /= norm


def _check_workspace(order: int, length: int, dim: int, trunc: int) -> None:
    tensoralg._check_capacity(dim, trunc)
    cells = min(order, trunc) * max(length, 1) * dim ** trunc
    if cells > DP_WORKSPACE_LIMIT:
        raise CapacityError(
            f"signature workspace of ~{cells} entries exceeds limit {DP_WORKSPACE_LIMIT} "
            f"(L={length}, d={dim}, M={trunc}, p={order})"
        )


def _signature_tails(incs: np.ndarray, trunc: int, order: int):
    """Run the level/time recursion and yield per-level tail arrays.

    For level ``m`` the yielded list holds, for each tail repetition count
    ``r``, an ``(L, d^m)`` array whose row ``l`` sums all weighted tuples of
    length ``m`` ending at index ``l`` with exactly ``r`` trailing
    repetitions of ``l``.
    """
    L, d = incs.shape
    tails = [incs]
    yield tails
    for m in range(2, trunc + 1):
        total = tails[0].copy()
        for extra in tails[1:]:
            total += extra
        prev = np.empty_like(total)
        prev[0] = 0.0
        np.cumsum(total[:-1], axis=0, out=prev[1:])
        new_tails = [np.einsum("la,lb->lab", prev, incs).reshape(L, d ** m)]
        for r in range(2, min(order, m) + 1):
            new_tails.append(
                np.einsum("la,lb->lab", tails[r - 2], incs).reshape(L, d ** m) / r
            )
        tails = new_tails
        yield tails


def signature(seq: Sequence, cfg: SignatureConfig) -> TruncatedTensorSeries:
    """Order-``p`` signature features of one sequence, levels ``0..M``."""
    seq = _apply_augmentations(seq, cfg)
    d, L, M = seq.dim, seq.length, cfg.trunc
    _check_workspace(cfg.order, L, d, M)
    out = tensoralg.unit(d, M)
    if L > 0:
        incs = seqdata.increments(seq)
        for m, tails in enumerate(_signature_tails(incs, M, cfg.order), start=1):
            level = tails[0].sum(axis=0)
            for extra in tails[1:]:
                level += extra.sum(axis=0)
            out.levels[m] = level
    if cfg.normalize:
        _normalize_levels_inplace(out)
    return out


def signature_stream(seq: Sequence, cfg: SignatureConfig) -> list[TruncatedTensorSeries]:
    """Expanding-window signatures: element ``l`` covers the prefix ``0..l``.

    Element 0 is the unit.  Costs no more than the full signature because the
    per-level prefix sums fall out of the same recursion.
    """
    seq = _apply_augmentations(seq, cfg)
    d, L, M = seq.dim, seq.length, cfg.trunc
    _check_workspace(cfg.order, L, d, M)
    stream = [tensoralg.unit(d, M) for _ in range(L + 1)]
    if L > 0:
        incs = seqdata.increments(seq)
        for m, tails in enumerate(_signature_tails(incs, M, cfg.order), start=1):
            total = tails[0].copy()
            for extra in tails[1:]:
                total += extra
            prefix = np.cumsum(total, axis=0)
            for l in range(1, L + 1):
                stream[l].levels[m] = prefix[l - 1].copy()
    if cfg.normalize:
        for series in stream:
            _normalize_levels_inplace(series)
    return stream


def signature_brute(seq: Sequence, cfg: SignatureConfig) -> TruncatedTensorSeries:
    """Exhaustive enumeration of the defining sum; test oracle.

    Deliberately shares no code with :func:`signature`: tuples are listed
    with ``itertools`` and weighted by explicit repetition factorials.
    """
    seq = _apply_augmentations(seq, cfg)
    d, L, M = seq.dim, seq.length, cfg.trunc
    if L > 12 or M > 4:
        raise CapacityError(f"brute-force oracle limited to L <= 12 and M <= 4, got L={L}, M={M}")
    out = tensoralg.unit(d, M)
    if L > 0:
        incs = seqdata.increments(seq)
        for m in range(1, M + 1):
            level = np.zeros((d,) * m)
            for idx in itertools.combinations_with_replacement(range(L), m):
                reps = Counter(idx)
                if max(reps.values()) > cfg.order:
                    continue
                weight = 1.0
                for count in reps.values():
                    weight /= math.factorial(count)
                term = np.array(weight)
                for i in idx:
                    term = np.multiply.outer(term, incs[i])
                level += term
            out.levels[m] = level.reshape(-1)
    if cfg.normalize:
        _normalize_levels_inplace(out)
    return out


def signature_batch(batch: seqdata.SequenceBatch, cfg: SignatureConfig, jobs: int = 1):
    """Signatures of every sequence in a batch; parallel across sequences.

    Each sequence is computed independently, so the worker count cannot
    change results.
    """
    from .parallel import parallel_map

    return parallel_map(lambda s: signature(s, cfg), list(batch), jobs)


def feature_header(dim: int, trunc: int) -> list[str]:
    """Column names for flattened features: level-major, row-major within level."""
    names = []
    for m in range(trunc + 1):
        names.extend(f"m{m}_{i}" for i in range(dim ** m))
    return names
