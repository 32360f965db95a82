"""Static kernels, order-p signature kernel Gram matrices, and inducing-tensor covariances.

The level-``m`` signature kernel of two sequences is the inner product of
their order-``p`` level-``m`` signature features of the (kernel-lifted)
sequences.  It is computed without materializing tensors by dynamic
programming over the second-order cross-differenced static kernel matrix

    dk[k, l] = k(x_k, y_l) - k(x_k, y_{l-1}) - k(x_{k-1}, y_l) + k(x_{k-1}, y_{l-1}),

tracking, per level, one DP table for every pair of trailing repetition
counts on the two sides.  The recursion is validated against the
feature-kernel duality oracle (pairwise inner products of explicit signature
features under the linear lift) rather than trusted on its own.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.spatial.distance import pdist

from . import seqdata
from .errors import (
    CapacityError,
    ConfigurationError,
    DegenerateDataError,
    NumericError,
    ShapeError,
    UnsupportedError,
)
from .parallel import parallel_map
from .seqdata import SequenceBatch
from .tensoralg import Rank1Element

#: Normalized levels with a self-kernel below this stay zero.
NORMALIZE_EPS = 1e-12

#: Default ceiling on N_x * N_y * L_x * L_y DP cells for a Gram job.
DEFAULT_CELL_CAP = 1_000_000_000

#: The cross-validation grid for the median-heuristic rescaling factor.
ALPHA_GRID = tuple(np.logspace(-3.0, 3.0, 19))


@dataclass(frozen=True)
class StaticKernelSpec:
    """A pointwise kernel on states: ``linear`` or ``rbf``.

    For ``rbf`` either a positive ``sigma`` is given directly or
    ``median_scale`` requests resolution from data via the rescaled median
    heuristic.
    """

    kind: str = "linear"
    sigma: float | None = None
    median_scale: float | None = None

    def __post_init__(self):
        if self.kind not in ("linear", "rbf"):
            raise ConfigurationError(f"unknown static kernel {self.kind!r}")
        if self.kind == "rbf":
            if self.sigma is None and self.median_scale is None:
                raise ConfigurationError("rbf kernel needs sigma or median_scale")
            if self.sigma is not None and not (np.isfinite(self.sigma) and self.sigma > 0):
                raise ConfigurationError(f"rbf bandwidth must be finite and positive, got {self.sigma}")
        elif self.sigma is not None or self.median_scale is not None:
            raise ConfigurationError("linear kernel takes no bandwidth")

    def resolve(self, batch: SequenceBatch) -> "StaticKernelSpec":
        """Fix the bandwidth from data when only ``median_scale`` was given."""
        if self.kind != "rbf" or self.sigma is not None:
            return self
        sigma = median_bandwidth(batch, self.median_scale)
        return StaticKernelSpec("rbf", sigma=sigma)


@dataclass(frozen=True)
class GramConfig:
    trunc: int
    order: int = 1
    static: StaticKernelSpec = field(default_factory=StaticKernelSpec)
    normalize: bool = False
    augmentations: tuple = field(default_factory=tuple)
    cell_cap: int = DEFAULT_CELL_CAP

    def __post_init__(self):
        if self.trunc < 1:
            raise ConfigurationError("truncation level must be at least 1")
        if not 1 <= self.order <= self.trunc:
            raise ConfigurationError(f"order must lie in 1..trunc={self.trunc}, got {self.order}")


def static_eval(x: np.ndarray, y: np.ndarray, spec: StaticKernelSpec) -> float:
    """Evaluate the static kernel on a single pair of states."""
    x = np.asarray(x, dtype=float).reshape(-1)
    y = np.asarray(y, dtype=float).reshape(-1)
    if x.size != y.size:
        raise ShapeError(f"state dimensions differ: {x.size} vs {y.size}")
    return float(_static_gram(x[None, :], y[None, :], spec)[0, 0])


def _static_gram(xs: np.ndarray, ys: np.ndarray, spec: StaticKernelSpec) -> np.ndarray:
    if xs.shape[1] != ys.shape[1]:
        raise ShapeError(f"state dimensions differ: {xs.shape[1]} vs {ys.shape[1]}")
    if spec.kind == "linear":
        return xs @ ys.T
    if spec.sigma is None:
        raise ConfigurationError("rbf bandwidth unresolved; call spec.resolve(batch) first")
    sq = (
        np.sum(xs ** 2, axis=1)[:, None]
        - 2.0 * (xs @ ys.T)
        + np.sum(ys ** 2, axis=1)[None, :]
    )
    np.maximum(sq, 0.0, out=sq)
    return np.exp(-sq / (2.0 * spec.sigma ** 2))


def median_bandwidth(batch: SequenceBatch, alpha: float) -> float:
    """Rescaled median heuristic: ``alpha`` times the median half-distance of states."""
    if alpha is None or not np.isfinite(alpha) or alpha <= 0:
        raise ConfigurationError(f"median rescaling factor must be positive, got {alpha}")
    states = np.vstack([s.values for s in batch])
    if states.shape[0] < 2:
        raise DegenerateDataError("need at least two states for the median heuristic")
    med = float(np.median(pdist(states)))
    if med <= 0.0:
        raise DegenerateDataError("median pairwise state distance is zero")
    return alpha * med / 2.0


def _cross_difference(gram: np.ndarray) -> np.ndarray:
    """Second-order backwards cross-differencing of a states-by-states kernel matrix."""
    return gram[1:, 1:] - gram[1:, :-1] - gram[:-1, 1:] + gram[:-1, :-1]


def _excl_cumsum(a: np.ndarray, axis: int) -> np.ndarray:
    """Cumulative sum shifted by one: entry ``k`` sums indices strictly before ``k``."""
    out = np.zeros_like(a)
    if a.shape[axis] > 1:
        src = np.cumsum(a, axis=axis)
        head = [slice(None)] * a.ndim
        tail = [slice(None)] * a.ndim
        head[axis] = slice(None, -1)
        tail[axis] = slice(1, None)
        out[tuple(tail)] = src[tuple(head)]
    return out


def _sigkernel_levels(dk: np.ndarray, trunc: int, order: int) -> np.ndarray:
    """Per-level signature kernels of one pair from its cross-differenced matrix."""
    out = np.zeros(trunc)
    if dk.size == 0:
        return out
    out[0] = dk.sum()
    tails = {(1, 1): dk}
    for m in range(2, trunc + 1):
        q = min(order, m)
        total = sum(tails.values())
        row_sums = {}  # sum over s of A[r][.]
        col_sums = {}
        for (r, s), arr in tails.items():
            row_sums[r] = row_sums.get(r, 0) + arr
            col_sums[s] = col_sums.get(s, 0) + arr
        new_tails = {(1, 1): _excl_cumsum(_excl_cumsum(total, 0), 1) * dk}
        for r in range(2, q + 1):
            if r - 1 in row_sums:
                new_tails[(r, 1)] = _excl_cumsum(row_sums[r - 1], 1) * dk / r
        for s in range(2, q + 1):
            if s - 1 in col_sums:
                new_tails[(1, s)] = _excl_cumsum(col_sums[s - 1], 0) * dk / s
        for r in range(2, q + 1):
            for s in range(2, q + 1):
                prev = tails.get((r - 1, s - 1))
                if prev is not None:
                    new_tails[(r, s)] = prev * dk / (r * s)
        tails = new_tails
        out[m - 1] = sum(arr.sum() for arr in tails.values())
    return out


@dataclass
class GramResult:
    """Per-level matrices ``K_1..K_M`` and the combined ``1 + sum_m K_m``."""

    levels: list[np.ndarray]
    combined: np.ndarray


def _prepare(batch: SequenceBatch, cfg: GramConfig) -> np.ndarray:
    batch = seqdata.augment_batch(batch, list(cfg.augmentations))
    batch = seqdata.tabulate(batch)
    return batch.as_array()


def gram(X: SequenceBatch, Y: SequenceBatch | None, cfg: GramConfig, jobs: int = 1) -> GramResult:
    """Signature-kernel Gram matrices between two batches (``Y=None`` means ``X``).

    Sequences are augmented and tabulated first; padding adds zero kernel
    increments and cannot change any entry.  With ``normalize`` set, each
    level is rescaled by the per-sequence self-kernels so level-``m``
    features have unit norm, and the combined matrix is ``1 + sum_m K_m``.
    """
    symmetric = Y is None
    xs = _prepare(X, cfg)
    ys = xs if symmetric else _prepare(Y, cfg)
    if xs.shape[2] != ys.shape[2]:
        raise ShapeError("X and Y must share a channel count after augmentation")
    spec = cfg.static.resolve(X)
    nx, ny = xs.shape[0], ys.shape[0]
    lx, ly = xs.shape[1] - 1, ys.shape[1] - 1
    cells = nx * ny * max(lx, 1) * max(ly, 1)
    if cells > cfg.cell_cap:
        raise CapacityError(
            f"gram job needs ~{cells} DP cells, above the cap {cfg.cell_cap}"
        )

    def row(i: int) -> np.ndarray:
        out = np.zeros((ny, cfg.trunc))
        j_start = i if symmetric else 0
        for j in range(j_start, ny):
            dk = _cross_difference(_static_gram(xs[i], ys[j], spec))
            out[j] = _sigkernel_levels(dk, cfg.trunc, cfg.order)
        return out

    rows = parallel_map(row, range(nx), jobs)
    level_mats = [np.zeros((nx, ny)) for _ in range(cfg.trunc)]
    for i, r in enumerate(rows):
        for m in range(cfg.trunc):
            level_mats[m][i] = r[:, m]
    if symmetric:
        for m in range(cfg.trunc):
            lower = np.tril_indices(nx, -1)
            level_mats[m][lower] = level_mats[m].T[lower]

    if cfg.normalize:
        if symmetric:
            diag_x = [np.diag(level_mats[m]).copy() for m in range(cfg.trunc)]
            diag_y = diag_x
        else:
            diag_x = _self_level_diagonals(xs, spec, cfg)
            diag_y = _self_level_diagonals(ys, spec, cfg)
        for m in range(cfg.trunc):
            sx = np.where(diag_x[m] >= NORMALIZE_EPS, np.sqrt(np.maximum(diag_x[m], 0.0)), np.inf)
            sy = np.where(diag_y[m] >= NORMALIZE_EPS, np.sqrt(np.maximum(diag_y[m], 0.0)), np.inf)
            level_mats[m] = level_mats[m] / np.outer(sx, sy)

    combined = np.ones((nx, ny))
    for mat in level_mats:
        combined += mat
    if not np.all(np.isfinite(combined)):
        raise NumericError("nonfinite entries in the signature kernel Gram matrix")
    return GramResult(level_mats, combined)


def _self_level_diagonals(xs: np.ndarray, spec: StaticKernelSpec, cfg: GramConfig) -> list[np.ndarray]:
    diag = [np.zeros(xs.shape[0]) for _ in range(cfg.trunc)]
    for i in range(xs.shape[0]):
        dk = _cross_difference(_static_gram(xs[i], xs[i], spec))
        vals = _sigkernel_levels(dk, cfg.trunc, cfg.order)
        for m in range(cfg.trunc):
            diag[m][i] = vals[m]
    return diag


def _check_rank1_batch(Z: list[Rank1Element]):
    if not Z:
        raise ShapeError("need at least one rank-1 element")
    dim, trunc = Z[0].dim, Z[0].trunc
    for z in Z:
        if z.dim != dim or z.trunc != trunc:
            raise ShapeError("rank-1 elements must share dimension and truncation")
    return dim, trunc


def inducing_gram(Z: list[Rank1Element], sigmas) -> np.ndarray:
    """Covariances between rank-1 inducing tensors under per-level scales.

    ``K[i, j] = s_0^2 z_i0 z_j0 + sum_m s_m^2 prod_k <v^i_{m,k}, v^j_{m,k}>``;
    the products over components replace any dense tensor contraction.
    """
    dim, trunc = _check_rank1_batch(Z)
    sigmas = np.asarray(sigmas, dtype=float).reshape(-1)
    if sigmas.size != trunc + 1:
        raise ShapeError(f"need {trunc + 1} scale factors, got {sigmas.size}")
    n = len(Z)
    scalars = np.array([z.scalar for z in Z])
    out = sigmas[0] ** 2 * np.outer(scalars, scalars)
    for m in range(1, trunc + 1):
        # components stacked as (n, m, d); product over the m axis of pairwise dots
        comps = np.stack([np.stack(z.level_components(m)) for z in Z])
        acc = np.ones((n, n))
        for k in range(m):
            acc *= comps[:, k, :] @ comps[:, k, :].T
        out += sigmas[m] ** 2 * acc
    return out


def cross_gram(Z: list[Rank1Element], X: SequenceBatch, cfg: GramConfig, sigmas=None) -> np.ndarray:
    """Order-1 cross-covariances between rank-1 tensors and sequences.

    Exact only under the linear lift: ``K[i, j]`` contracts ``z_i`` against
    the order-1 signature of ``x_j`` by a cumulative-sum recursion over the
    level components, never forming the signature itself.
    """
    if cfg.static.kind != "linear":
        raise UnsupportedError("cross covariances support the linear lift only")
    dim, trunc = _check_rank1_batch(Z)
    if cfg.trunc != trunc:
        raise ShapeError(f"config truncation {cfg.trunc} differs from tensors' {trunc}")
    if sigmas is None:
        sigmas = np.ones(trunc + 1)
    sigmas = np.asarray(sigmas, dtype=float).reshape(-1)
    if sigmas.size != trunc + 1:
        raise ShapeError(f"need {trunc + 1} scale factors, got {sigmas.size}")
    xs = _prepare(X, cfg)
    if xs.shape[2] != dim:
        raise ShapeError(
            f"tensors live in dimension {dim} but lifted sequences have {xs.shape[2]} channels"
        )
    incs = np.diff(xs, axis=1)  # (N, L, d)
    n, nx = len(Z), xs.shape[0]
    scalars = np.array([z.scalar for z in Z])
    out = sigmas[0] ** 2 * np.tile(scalars[:, None], (1, nx))
    for m in range(1, trunc + 1):
        comps = np.stack([np.stack(z.level_components(m)) for z in Z])  # (n, m, d)
        acc = np.einsum("zd,jld->zjl", comps[:, 0, :], incs)
        for k in range(1, m):
            prefix = _excl_cumsum(acc, axis=2)
            acc = np.einsum("zd,jld->zjl", comps[:, k, :], incs) * prefix
        out += sigmas[m] ** 2 * acc.sum(axis=2)
    return out
