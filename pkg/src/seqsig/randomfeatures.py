"""Random Fourier features and scalable random signature feature maps.

Four maps share the same randomness model (counter-based streams keyed by
``(seed, level, role)`` so sampling order never matters):

* ``rfsf``      -- full tensor features: level ``m`` sums outer products of
  cos/sin RFF increments over strictly increasing ``m``-tuples, one
  independent RFF map per tuple position.
* ``rfsf_dp``   -- diagonal projection: the concatenation of ``D`` unit-sample
  copies of ``rfsf`` scaled ``1/sqrt(D)``; dimension ``D (2^(M+1) - 1)``.
* ``rfsf_trp``  -- tensor random projection: Gaussian rank-1 functionals
  contract each level to ``D`` entries via a Hadamard recursion, never
  materializing tensors; coincides exactly with ``trp_project`` applied to
  ``rfsf`` under shared seeds.
* ``rfdsf``     -- recurrent decayed variant on phase-only RFFs with
  per-channel exponential forgetting and fractional differencing of the
  lifted channels; level ``m`` follows the recursion

      F_m(0:l) = lam^m . F_m(0:l-1)
               + sum_p (1/p!) lam^(m-p) . F_{m-p}(0:l-1) . prod_q dphi_q(x_l),

  evaluated by channelwise geometric scans (the recursion is the normative
  definition; a nondecreasing-tuple enumeration serves as its oracle in the
  tests).  All levels here carry the ``sqrt(2^m / D)`` prefactor outside and
  plain cosines inside.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field

import numpy as np

from . import seqdata
from .errors import (
    CapacityError,
    ConfigurationError,
    DomainError,
    InputError,
    ShapeError,
    UnsupportedError,
)
from .scan import geometric_scan
from .seqdata import Sequence, SequenceBatch
from .sigkernels import StaticKernelSpec

#: Levels with norm below this stay zero under normalization.
NORMALIZE_EPS = 1e-12

#: Ceiling on the entry count of materialized full-tensor RFSF levels.
RFSF_WORKSPACE_LIMIT = 200_000_000

_ROLE_FREQUENCY = 0
_ROLE_PHASE = 1
_ROLE_PROJECTION = 2


def _stream(seed: int, level: int, role: int) -> np.random.Generator:
    """Independent, schedule-free stream for one (seed, level, role) triple."""
    return np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(level, role)))


@dataclass
class RandomFourierParams:
    """Sampled frequencies (and phases / projections) for all signature levels."""

    seed: int
    dim: int
    rff_dim: int
    trunc: int
    phase_variant: bool
    lengthscales: np.ndarray
    frequencies: list[np.ndarray]
    phases: list[np.ndarray] | None
    projections: list[np.ndarray] | None

    @property
    def feature_dim(self) -> int:
        """Dimension of one static RFF vector (2D for cos/sin, D for phase)."""
        return self.rff_dim if self.phase_variant else 2 * self.rff_dim


def sample_params(
    spec: StaticKernelSpec,
    dim: int,
    rff_dim: int,
    trunc: int,
    seed: int,
    phase_variant: bool = False,
    projections: bool = False,
) -> RandomFourierParams:
    """Draw level-independent RFF parameters for a Gaussian spectral measure.

    Only the rbf static kernel ships a sampler (spectral measure
    ``N(0, I / sigma^2)``).  Streams are keyed by ``(seed, level, role)``, so
    the same seed reproduces the same parameters bitwise regardless of how
    many levels or roles are drawn.
    """
    if spec.kind != "rbf":
        raise UnsupportedError("only the rbf static kernel has a spectral sampler")
    if spec.sigma is None:
        raise ConfigurationError("rbf bandwidth unresolved; supply sigma or resolve from data")
    if rff_dim < 1 or trunc < 1:
        raise ConfigurationError("rff_dim and trunc must be positive")
    lengthscales = np.full(dim, float(spec.sigma))
    freqs = [
        _stream(seed, m, _ROLE_FREQUENCY).standard_normal((dim, rff_dim)) / lengthscales[:, None]
        for m in range(1, trunc + 1)
    ]
    phases = None
    if phase_variant:
        phases = [
            _stream(seed, m, _ROLE_PHASE).uniform(0.0, 2.0 * np.pi, size=rff_dim)
            for m in range(1, trunc + 1)
        ]
    projs = None
    if projections:
        feat_dim = rff_dim if phase_variant else 2 * rff_dim
        projs = [
            _stream(seed, m, _ROLE_PROJECTION).standard_normal((feat_dim, rff_dim))
            for m in range(1, trunc + 1)
        ]
    return RandomFourierParams(
        seed, dim, rff_dim, trunc, phase_variant, lengthscales, freqs, phases, projs
    )


def rff(x: np.ndarray, params: RandomFourierParams, level: int) -> np.ndarray:
    """Static random Fourier features of one state under the level's map.

    cos/sin variant: ``(cos(Wx), sin(Wx)) / sqrt(D)`` with ``2D`` entries;
    phase variant: ``sqrt(2/D) cos(Wx + b)`` with ``D`` entries.
    """
    x = np.asarray(x, dtype=float).reshape(-1)
    if x.size != params.dim:
        raise ShapeError(f"state dimension {x.size} does not match params dimension {params.dim}")
    z = x @ params.frequencies[level - 1]
    if params.phase_variant:
        return np.sqrt(2.0 / params.rff_dim) * np.cos(z + params.phases[level - 1])
    return np.concatenate([np.cos(z), np.sin(z)]) / np.sqrt(params.rff_dim)


def _lift_states(states: np.ndarray, params: RandomFourierParams, level: int) -> np.ndarray:
    """Vectorized cos/sin RFF lift of a (..., d) state array, scaled 1/sqrt(D)."""
    z = states @ params.frequencies[level - 1]
    return np.concatenate([np.cos(z), np.sin(z)], axis=-1) / np.sqrt(params.rff_dim)


def _batch_states(batch: SequenceBatch) -> np.ndarray:
    return seqdata.tabulate(batch).as_array()


def _check_rfsf_capacity(n: int, length: int, feat_dim: int, trunc: int) -> None:
    top = feat_dim ** trunc
    if top > RFSF_WORKSPACE_LIMIT or n * max(length, 1) * top > RFSF_WORKSPACE_LIMIT:
        raise CapacityError(
            f"full-tensor RFSF workspace of ~{n * max(length, 1) * top} entries exceeds "
            f"limit {RFSF_WORKSPACE_LIMIT}; use rfsf_dp or rfsf_trp instead"
        )


def rfsf(batch: SequenceBatch, params: RandomFourierParams, trunc: int | None = None):
    """Full-tensor random Fourier signature features, levels ``0..M``.

    Level ``m`` has ``(2D)^m`` coordinates; the constant level 0 is a single
    1.  Exponential in ``M``, so guarded; intended for oracles and small
    instances.
    """
    if params.phase_variant:
        raise UnsupportedError("full-tensor RFSF uses the cos/sin variant")
    trunc = params.trunc if trunc is None else trunc
    if trunc > params.trunc:
        raise ShapeError(f"params carry {params.trunc} levels, requested {trunc}")
    states = _batch_states(batch)
    n, steps = states.shape[0], states.shape[1]
    feat = params.feature_dim
    _check_rfsf_capacity(n, steps - 1, feat, trunc)
    levels = [np.ones((n, 1))]
    if steps == 1:
        return levels + [np.zeros((n, feat ** m)) for m in range(1, trunc + 1)]
    incs = [np.diff(_lift_states(states, params, m), axis=1) for m in range(1, trunc + 1)]
    running = incs[0]
    levels.append(running.sum(axis=1))
    for m in range(2, trunc + 1):
        prev = _excl_time_cumsum(running)
        running = np.einsum("nla,nlb->nlab", prev, incs[m - 1]).reshape(n, steps - 1, -1)
        levels.append(running.sum(axis=1))
    return levels


def _excl_time_cumsum(a: np.ndarray) -> np.ndarray:
    out = np.zeros_like(a)
    if a.shape[1] > 1:
        np.cumsum(a[:, :-1], axis=1, out=out[:, 1:])
    return out


def rfsf_dp(batch: SequenceBatch, params: RandomFourierParams, trunc: int | None = None):
    """Diagonally projected RFSF: ``D`` independent unit-sample copies.

    Level ``m`` has ``D * 2^m`` coordinates (copy-major, then the ``2^m``
    cos/sin tensor block), all scaled by a single ``1/sqrt(D)``; the constant
    level 0 contributes the ``D`` entries ``1/sqrt(D)``.
    """
    if params.phase_variant:
        raise UnsupportedError("RFSF-DP uses the cos/sin variant")
    trunc = params.trunc if trunc is None else trunc
    if trunc > params.trunc:
        raise ShapeError(f"params carry {params.trunc} levels, requested {trunc}")
    states = _batch_states(batch)
    n, steps = states.shape[0], states.shape[1]
    D = params.rff_dim
    root = 1.0 / np.sqrt(D)
    levels = [np.full((n, D), root)]
    if steps == 1:
        return levels + [np.zeros((n, D * 2 ** m)) for m in range(1, trunc + 1)]
    # per-copy 2-dim lifts: (n, L, D, 2)
    incs = []
    for m in range(1, trunc + 1):
        z = states @ params.frequencies[m - 1]
        lift = np.stack([np.cos(z), np.sin(z)], axis=-1)
        incs.append(np.diff(lift, axis=1))
    running = incs[0] * root
    levels.append(running.sum(axis=1).reshape(n, -1))
    for m in range(2, trunc + 1):
        prev = _excl_time_cumsum(running)
        running = np.einsum("nlqa,nlqb->nlqab", prev, incs[m - 1]).reshape(
            n, steps - 1, D, -1
        )
        levels.append(running.sum(axis=1).reshape(n, -1))
    return levels


def trp_project(level_tensor: np.ndarray, components: list[np.ndarray]) -> np.ndarray:
    """Tensor random projection of one degree-``m`` tensor to ``D`` entries.

    ``components`` holds ``m`` matrices of shape ``(base_dim, D)`` whose
    columns are the rank-1 factor vectors; entry ``q`` is
    ``<p_q^(1) x ... x p_q^(m), t> / sqrt(D)``.
    """
    if not components:
        raise ShapeError("need at least one component matrix")
    base = components[0].shape[0]
    D = components[0].shape[1]
    t = np.asarray(level_tensor, dtype=float).reshape(-1)
    if t.size != base ** len(components):
        raise ShapeError(
            f"tensor with {t.size} entries is not degree-{len(components)} over dimension {base}"
        )
    acc = components[0].T @ t.reshape(base, -1)  # (D, base^(m-1))
    for comp in components[1:]:
        if comp.shape != (base, D):
            raise ShapeError("projection components must share shape (base_dim, D)")
        acc = np.einsum("iq,qir->qr", comp, acc.reshape(D, base, -1))
    return acc.reshape(D) / np.sqrt(D)


def rfsf_trp(batch: SequenceBatch, params: RandomFourierParams, trunc: int | None = None):
    """Tensor-random-projected RFSF via the Hadamard recursion: ``D`` entries per level.

    Exactly equal to ``trp_project`` composed with ``rfsf`` under the same
    parameters; never materializes the tensors.
    """
    if params.phase_variant:
        raise UnsupportedError("RFSF-TRP uses the cos/sin variant")
    if params.projections is None:
        raise ConfigurationError("params were sampled without projections")
    trunc = params.trunc if trunc is None else trunc
    if trunc > params.trunc:
        raise ShapeError(f"params carry {params.trunc} levels, requested {trunc}")
    states = _batch_states(batch)
    n, steps = states.shape[0], states.shape[1]
    D = params.rff_dim
    levels = [np.ones((n, 1))]
    if steps == 1:
        return levels + [np.zeros((n, D)) for _ in range(trunc)]
    projected = [
        np.diff(_lift_states(states, params, m), axis=1) @ params.projections[m - 1]
        for m in range(1, trunc + 1)
    ]
    running = projected[0] / np.sqrt(D)
    levels.append(running.sum(axis=1))
    for m in range(2, trunc + 1):
        running = _excl_time_cumsum(running) * projected[m - 1]
        levels.append(running.sum(axis=1))
    return levels


@dataclass(frozen=True)
class DecaySpec:
    """Forgetting and differencing configuration for the decayed features.

    ``lam`` (per feature channel, in ``(0, 1]``) is the exponential decay;
    ``frac_orders`` (per channel, in ``[0, 1]``) the fractional differencing
    orders; ``window`` the finite differencing window.
    """

    lam: np.ndarray = field(default_factory=lambda: np.ones(1))
    frac_orders: np.ndarray = field(default_factory=lambda: np.ones(1))
    window: int = 32

    def __post_init__(self):
        lam = np.atleast_1d(np.asarray(self.lam, dtype=float))
        q = np.atleast_1d(np.asarray(self.frac_orders, dtype=float))
        if np.any(lam <= 0.0) or np.any(lam > 1.0):
            raise DomainError("decay factors must lie in (0, 1]")
        if np.any(q < 0.0) or np.any(q > 1.0):
            raise DomainError("fractional orders must lie in [0, 1]")
        if self.window < 1:
            raise DomainError("window must be a positive integer")
        object.__setattr__(self, "lam", lam)
        object.__setattr__(self, "frac_orders", q)


def frac_diff_weights(q, window: int) -> np.ndarray:
    """Binomial filter weights ``w_k = (-1)^k C(q, k)`` for ``k < window``.

    Built by the stable ratio recurrence ``w_k = w_{k-1} (k - 1 - q) / k``;
    ``q = 0`` gives the identity filter, ``q = 1`` first differences.
    """
    q = np.atleast_1d(np.asarray(q, dtype=float))
    weights = np.empty((window, q.size))
    weights[0] = 1.0
    for k in range(1, window):
        weights[k] = weights[k - 1] * (k - 1 - q) / k
    return weights


def frac_diff(series: np.ndarray, q, window: int) -> np.ndarray:
    """Windowed fractional differencing along axis 0, zeros outside the range."""
    series = np.asarray(series, dtype=float)
    if window < 1:
        raise DomainError("window must be a positive integer")
    flat = series.reshape(series.shape[0], -1)
    q = np.atleast_1d(np.asarray(q, dtype=float))
    if q.size == 1:
        q = np.full(flat.shape[1], q[0])
    if q.size != flat.shape[1]:
        raise ShapeError(f"need one order per channel ({flat.shape[1]}), got {q.size}")
    weights = frac_diff_weights(q, window)
    out = np.zeros_like(flat)
    for k in range(min(window, flat.shape[0])):
        if k == 0:
            out += weights[0] * flat
        else:
            out[k:] += weights[k] * flat[:-k]
    return out.reshape(series.shape)


def _lifted_increments(seq: Sequence, params: RandomFourierParams, trunc: int, decay: DecaySpec):
    """Phase-variant lifts of all states, fractionally differenced, step-0 row dropped.

    With ``frac_orders = 1`` this reduces to plain increments of the lifted
    channels.  Plain cosines, no prefactor (applied per level downstream).
    """
    if not params.phase_variant:
        raise UnsupportedError("streamed features use the phase variant; sample with phase_variant=True")
    if seq.dim != params.dim:
        raise ShapeError(f"sequence dimension {seq.dim} does not match params dimension {params.dim}")
    out = []
    for m in range(1, trunc + 1):
        lift = np.cos(seq.values @ params.frequencies[m - 1] + params.phases[m - 1])
        out.append(frac_diff(lift, decay.frac_orders, decay.window)[1:])
    return out


def _streamed_levels(seq, params, trunc, decay, lam, parallel):
    """Shared recursion for the streamed maps; ``lam=None`` means no decay."""
    trunc = params.trunc if trunc is None else trunc
    if trunc > params.trunc:
        raise ShapeError(f"params carry {params.trunc} levels, requested {trunc}")
    diffs = _lifted_increments(seq, params, trunc, decay)
    L, D = seq.length, params.rff_dim
    if lam is not None:
        lam = np.broadcast_to(lam, (D,)).astype(float)
    levels = []
    streams = []  # unprefactored A_m streams, each (L, D)
    for m in range(1, trunc + 1):
        drive = np.zeros((L, D))
        tail = np.ones((L, D))
        for p in range(1, m + 1):
            tail = tail * diffs[m - p]  # product of dphi^(m-p+1..m) at each step
            if m - p == 0:
                lower_prev = np.ones((L, D))
            else:
                lower = streams[m - p - 1]
                lower_prev = np.vstack([np.zeros((1, D)), lower[:-1]])
            term = tail * lower_prev / math.factorial(p)
            if lam is not None and m - p > 0:
                term = term * lam ** (m - p)
            drive += term
        if L == 0:
            stream = drive
        elif lam is None:
            stream = np.cumsum(drive, axis=0)
        else:
            stream = geometric_scan(drive, lam ** m, parallel=parallel)
        streams.append(stream)
        levels.append(np.sqrt(2.0 ** m / D) * stream)
    return levels


def rfsf_stream(
    seq: Sequence,
    params: RandomFourierParams,
    trunc: int | None = None,
    decay: DecaySpec | None = None,
    normalize: bool = False,
    parallel: bool = False,
):
    """Streamed phase-variant RFSF: level ``m`` at step ``l`` sums nondecreasing
    ``m``-tuples of differenced lifts over the prefix, weighted by inverse
    repetition factorials.  Returns ``M`` arrays of shape ``(L, D)``.

    Any decay in ``decay`` is ignored here; only its differencing settings
    apply.  This is the no-forgetting reference for :func:`rfdsf`.
    """
    decay = decay or DecaySpec()
    levels = _streamed_levels(seq, params, trunc, decay, lam=None, parallel=parallel)
    return normalize_levels(levels, prepend_constant=False) if normalize else levels


def rfdsf(
    seq: Sequence,
    params: RandomFourierParams,
    decay: DecaySpec,
    trunc: int | None = None,
    normalize: bool = False,
    parallel: bool = False,
):
    """Random Fourier decayed signature features, streamed over all prefixes.

    With ``lam = 1`` this coincides with :func:`rfsf_stream`; as ``lam -> 0``
    level ``m`` at step ``l`` collapses to the step-``l`` contribution
    ``(1/m!) prod_q dphi_q(x_l)`` times the level prefactor.
    """
    levels = _streamed_levels(seq, params, trunc, decay, lam=decay.lam, parallel=parallel)
    return normalize_levels(levels, prepend_constant=False) if normalize else levels


def normalize_levels(levels: list[np.ndarray], prepend_constant: bool = True):
    """Scale each level to unit norm along its last axis, guarding zero levels.

    Levels with norm below ``1e-12`` are left as zeros.  When
    ``prepend_constant`` is set a constant level-0 block of ones is placed in
    front (matching the layout of the other feature maps).
    """
    out = []
    for arr in levels:
        arr = np.asarray(arr, dtype=float)
        norms = np.linalg.norm(arr, axis=-1, keepdims=True)
        scale = np.where(norms >= NORMALIZE_EPS, norms, 1.0)
        out.append(arr / scale)
    if prepend_constant:
        head = np.ones(out[0].shape[:-1] + (1,)) if out else np.ones((1,))
        out.insert(0, head)
    return out


def flatten_levels(levels: list[np.ndarray]) -> np.ndarray:
    """Concatenate per-level feature blocks along the last axis (level-major)."""
    return np.concatenate([np.asarray(a) for a in levels], axis=-1)


def level_inner(levels_x, levels_y) -> np.ndarray:
    """Per-level inner products of two feature stacks (last-axis contraction)."""
    return np.array([float(np.dot(a.reshape(-1), b.reshape(-1))) for a, b in zip(levels_x, levels_y)])


def write_params_csv(path, params: RandomFourierParams) -> None:
    """Serialize parameters so they can be regenerated or read back bit-exactly."""
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["seed", "dim", "rff_dim", "trunc", "phase_variant", "has_projections"])
        writer.writerow(
            [
                params.seed,
                params.dim,
                params.rff_dim,
                params.trunc,
                int(params.phase_variant),
                int(params.projections is not None),
            ]
        )
        writer.writerow(["lengthscales"] + [f"{v:.17g}" for v in params.lengthscales])
        for m in range(1, params.trunc + 1):
            writer.writerow(
                [f"frequencies_{m}"] + [f"{v:.17g}" for v in params.frequencies[m - 1].ravel()]
            )
            if params.phases is not None:
                writer.writerow([f"phases_{m}"] + [f"{v:.17g}" for v in params.phases[m - 1]])
            if params.projections is not None:
                writer.writerow(
                    [f"projections_{m}"] + [f"{v:.17g}" for v in params.projections[m - 1].ravel()]
                )


def read_params_csv(path) -> RandomFourierParams:
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
            meta = next(reader)
        except StopIteration:
            raise InputError(f"{path}: truncated parameter file") from None
        if header[:2] != ["seed", "dim"]:
            raise InputError(f"{path}: unexpected parameter header {header!r}")
        seed, dim, rff_dim, trunc = (int(v) for v in meta[:4])
        phase_variant, has_proj = bool(int(meta[4])), bool(int(meta[5]))
        rows = {row[0]: row[1:] for row in reader if row}
    lengthscales = np.array([float(v) for v in rows["lengthscales"]])
    freqs, phases, projs = [], [], []
    feat_dim = rff_dim if phase_variant else 2 * rff_dim
    for m in range(1, trunc + 1):
        freqs.append(np.array([float(v) for v in rows[f"frequencies_{m}"]]).reshape(dim, rff_dim))
        if phase_variant:
            phases.append(np.array([float(v) for v in rows[f"phases_{m}"]]))
        if has_proj:
            projs.append(
                np.array([float(v) for v in rows[f"projections_{m}"]]).reshape(feat_dim, rff_dim)
            )
    return RandomFourierParams(
        seed,
        dim,
        rff_dim,
        trunc,
        phase_variant,
        lengthscales,
        freqs,
        phases if phase_variant else None,
        projs if has_proj else None,
    )
