"""Achievable-region bounds for a candidate two-layer scheme and the
search machinery that traces the region boundary.

A scheme is a test channel p(v|x), a coarse layer p(u|v) and a deterministic
reconstruction map xhat(y, v).  For a source p(x,y,z) and key rate r0 the
scheme certifies every point (R, r0, D, Delta) with

    R >= I(X;V|Y),
    Delta <= min{ I(Y;V|U) - I(Z;V|U) + H(X|Z,V) + r0,  H(X|Z,U) },
    D >= E[d(X, xhat(Y,V))].

The boundary search is two-tier: exhaustive enumeration of channels whose
rows live on the quantized probability simplex (exact on its grid), then
coordinate-wise mass-moving refinement from the best grid point.  When the
full grid exceeds the evaluation budget a seeded uniform subsample of the
grid is used instead, plus a set of canonical deterministic channels.
"""

from __future__ import annotations

import itertools
import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace

import numpy as np

from .probability import (
    Alphabet,
    CondChannel,
    DistortionMeasure,
    JointDist,
    ProbabilityError,
    compose,
    cond_entropy,
    cond_mutual_info,
    marginalize,
    nary,
)

FEAS_TOL = 1e-9


def u_cardinality_bound(x_size: int) -> int:
    return x_size + 4


def v_cardinality_bound(x_size: int) -> int:
    return (x_size + 3) * (x_size + 4)


@dataclass(frozen=True)
class SchemeParams:
    """An auxiliary-variable scheme: p(v|x), p(u|v) and xhat(y, v).

    `recon` holds reconstruction-symbol indices, shaped (|Y|, |V|).
    Auxiliary alphabets beyond the sufficient cardinalities are rejected
    unless `enforce_cardinality` is disabled (the empirical saturation
    check deliberately oversizes U and V).
    """

    vx: CondChannel
    uv: CondChannel
    recon: np.ndarray = field(repr=False)
    recon_alphabet: Alphabet
    enforce_cardinality: bool = True

    def __post_init__(self):
        if len(self.vx.from_vars) != 1 or len(self.vx.to_vars) != 1:
            raise ProbabilityError("vx must be a single-variable channel")
        if len(self.uv.from_vars) != 1 or len(self.uv.to_vars) != 1:
            raise ProbabilityError("uv must be a single-variable channel")
        if self.uv.from_vars[0].symbols != self.vx.to_vars[0].symbols:
            raise ProbabilityError("uv must condition on the V alphabet of vx")
        recon = np.asarray(self.recon, dtype=np.int64).copy()
        if recon.ndim != 2 or recon.shape[1] != self.v_size:
            raise ProbabilityError(f"recon must be (|Y|, |V|), got {recon.shape}")
        if np.any(recon < 0) or np.any(recon >= self.recon_alphabet.size):
            raise ProbabilityError("recon indices out of range")
        recon.flags.writeable = False
        object.__setattr__(self, "recon", recon)
        if self.enforce_cardinality:
            x_size = self.vx.from_vars[0].size
            if self.v_size > v_cardinality_bound(x_size):
                raise ProbabilityError(
                    f"|V|={self.v_size} exceeds the sufficient bound "
                    f"{v_cardinality_bound(x_size)}")
            if self.u_size > u_cardinality_bound(x_size):
                raise ProbabilityError(
                    f"|U|={self.u_size} exceeds the sufficient bound "
                    f"{u_cardinality_bound(x_size)}")

    @property
    def v_size(self) -> int:
        return self.vx.to_vars[0].size

    @property
    def u_size(self) -> int:
        return self.uv.to_vars[0].size


@dataclass(frozen=True)
class RegionPoint:
    """A candidate (R, R0, D, Delta) tuple, rates in bits/symbol."""

    rate: float
    key_rate: float
    distortion: float
    equivocation: float

    def __post_init__(self):
        for name in ("rate", "key_rate", "distortion", "equivocation"):
            value = float(getattr(self, name))
            if not math.isfinite(value):
                raise ValueError(f"{name} must be finite")
            if value < -FEAS_TOL:
                raise ValueError(f"{name} must be non-negative, got {value}")
            object.__setattr__(self, name, max(0.0, value))


@dataclass(frozen=True)
class BoundEvaluation:
    """The three bound functionals plus their component terms (bits)."""

    rate_min: float
    equiv_max: float
    distortion: float
    key_rate: float
    i_xv_given_y: float
    i_yv_given_u: float
    i_zv_given_u: float
    h_x_given_zv: float
    h_x_given_zu: float

    def satisfies(self, point: RegionPoint, tol: float = FEAS_TOL) -> bool:
        # Delta = 0 is achievable outright (equivocation is an entropy),
        # so the equivocation ceiling is floored at zero.
        return (self.rate_min <= point.rate + tol
                and self.distortion <= point.distortion + tol
                and point.equivocation <= max(self.equiv_max, 0.0) + tol)


def _check_source(source: JointDist):
    if len(source.variables) != 3:
        raise ProbabilityError("source must be a joint over (X, Y, Z)")


def optimal_reconstruction(source: JointDist, vx: CondChannel,
                           d: DistortionMeasure) -> np.ndarray:
    """Minimum conditional-expected-distortion map xhat(y, v).

    Ties break to the lowest reconstruction index; (y, v) pairs with zero
    probability also map to index 0.
    """
    _check_source(source)
    pxyv = marginalize(compose_vx(source, vx), [source.names[0], source.names[1],
                                                vx.to_names[0]]).mass
    cost = np.einsum("xyv,xw->yvw", pxyv, d.table)
    return np.argmin(cost, axis=2).astype(np.int64)


def compose_vx(source: JointDist, vx: CondChannel) -> JointDist:
    from .probability import attach
    return attach(source, vx)


def evaluate_bounds(source: JointDist, scheme: SchemeParams,
                    d: DistortionMeasure, key_rate: float) -> BoundEvaluation:
    """Evaluate the rate floor, equivocation ceiling and distortion of a scheme."""
    _check_source(source)
    if key_rate < 0:
        raise ValueError("key_rate must be non-negative")
    x, y, z = source.names
    if scheme.vx.from_vars[0].symbols != source.variables[0].symbols:
        raise ProbabilityError("scheme X alphabet does not match the source")
    if scheme.recon.shape[0] != source.variables[1].size:
        raise ProbabilityError("recon map does not match the Y alphabet")
    joint = compose(source, scheme.vx, scheme.uv)
    v, u = scheme.vx.to_names[0], scheme.uv.to_names[0]

    i_xv_given_y = cond_mutual_info(joint, [x], [v], [y])
    i_yv_given_u = cond_mutual_info(joint, [y], [v], [u])
    i_zv_given_u = cond_mutual_info(joint, [z], [v], [u])
    h_x_given_zv = cond_entropy(joint, [x], [z, v])
    h_x_given_zu = cond_entropy(joint, [x], [z, u])

    pxyv = marginalize(joint, [x, y, v]).mass
    dsel = d.table[:, scheme.recon]            # (X, Y, V)
    distortion = float(np.einsum("xyv,xyv->", pxyv, dsel))

    equiv_max = min(i_yv_given_u - i_zv_given_u + h_x_given_zv + key_rate,
                    h_x_given_zu)
    return BoundEvaluation(
        rate_min=i_xv_given_y,
        equiv_max=equiv_max,
        distortion=distortion,
        key_rate=float(key_rate),
        i_xv_given_y=i_xv_given_y,
        i_yv_given_u=i_yv_given_u,
        i_zv_given_u=i_zv_given_u,
        h_x_given_zv=h_x_given_zv,
        h_x_given_zu=h_x_given_zu,
    )


# ---------------------------------------------------------------------------
# Fast raw-array evaluation used inside the search loops
# ---------------------------------------------------------------------------

def _plogp(arr: np.ndarray, keep_first: bool = False) -> np.ndarray | float:
    """Sum of p*log2(p); with keep_first=True, reduced over all but axis 0."""
    out = np.zeros_like(arr)
    nz = arr > 0
    out[nz] = arr[nz] * np.log2(arr[nz])
    if keep_first:
        return out.reshape(out.shape[0], -1).sum(axis=1)
    return float(out.sum())


class _VxContext:
    """Per-p(v|x) quantities shared by every p(u|v) candidate."""

    __slots__ = ("vx", "rate_min", "distortion", "recon", "pyv", "pzv",
                 "h_x_given_zv", "pv", "pxzv")

    def __init__(self, base: np.ndarray, vx: np.ndarray, d_table: np.ndarray):
        pxyzv = np.einsum("xyz,xv->xyzv", base, vx)
        pxyv = pxyzv.sum(axis=2)
        pxzv = pxyzv.sum(axis=1)
        pyv = pxyv.sum(axis=0)
        pzv = pxzv.sum(axis=0)
        pxy = pxyv.sum(axis=2)
        py = pyv.sum(axis=1)
        # I(X;V|Y) = H(X,Y) + H(Y,V) - H(Y) - H(X,Y,V)
        self.rate_min = (-_plogp(pxy) - _plogp(pyv)
                         + _plogp(py) + _plogp(pxyv))
        self.h_x_given_zv = -_plogp(pxzv) + _plogp(pzv)
        cost = np.einsum("xyv,xw->yvw", pxyv, d_table)
        self.recon = np.argmin(cost, axis=2)
        self.distortion = float(
            np.take_along_axis(cost, self.recon[:, :, None], axis=2).sum())
        self.vx = vx
        self.pyv = pyv
        self.pzv = pzv
        self.pxzv = pxzv
        self.pv = pyv.sum(axis=0)


def _equiv_batch(ctx: _VxContext, uv_batch: np.ndarray, key_rate: float) -> np.ndarray:
    """Equivocation ceiling for a (B, V, U) batch of p(u|v) kernels."""
    pyvu = np.einsum("yv,bvu->byvu", ctx.pyv, uv_batch)
    pzvu = np.einsum("zv,bvu->bzvu", ctx.pzv, uv_batch)
    pxzu = np.einsum("xzv,bvu->bxzu", ctx.pxzv, uv_batch)
    s_yvu = _plogp(pyvu, keep_first=True)
    s_zvu = _plogp(pzvu, keep_first=True)
    s_yu = _plogp(pyvu.sum(axis=2), keep_first=True)
    s_zu = _plogp(pzvu.sum(axis=2), keep_first=True)
    s_xzu = _plogp(pxzu, keep_first=True)
    # I(Y;V|U) - I(Z;V|U) = (S_yvu - S_yu) - (S_zvu - S_zu); the H(U) and
    # H(V,U) terms cancel in the difference.
    t1 = (s_yvu - s_yu) - (s_zvu - s_zu) + ctx.h_x_given_zv + key_rate
    t2 = -s_xzu + s_zu
    return np.minimum(t1, t2)


# ---------------------------------------------------------------------------
# Quantized-simplex candidate grids
# ---------------------------------------------------------------------------

def simplex_grid(dim: int, g: int) -> np.ndarray:
    """All points of the (dim-1)-simplex with coordinates that are
    multiples of 1/g, in lexicographic order; shape (count, dim)."""
    if dim < 1 or g < 1:
        raise ValueError("dim and g must be positive")
    pts: list[tuple[int, ...]] = []

    def rec(prefix: tuple[int, ...], remaining: int, slots: int):
        if slots == 1:
            pts.append(prefix + (remaining,))
            return
        for k in range(remaining + 1):
            rec(prefix + (k,), remaining - k, slots - 1)

    rec((), g, dim)
    return np.asarray(pts, dtype=np.float64) / g


def simplex_grid_count(dim: int, g: int) -> int:
    return math.comb(g + dim - 1, dim - 1)


def _channel_count(rows: int, dim: int, g: int) -> int:
    return simplex_grid_count(dim, g) ** rows


def _channel_from_index(index: int, rows: int, row_points: np.ndarray) -> np.ndarray:
    m = row_points.shape[0]
    out = np.empty((rows, row_points.shape[1]))
    for r in range(rows - 1, -1, -1):
        out[r] = row_points[index % m]
        index //= m
    return out


def _canonical_kernels(rows: int, cols: int) -> list[np.ndarray]:
    """Deterministic channels always worth trying: constant output,
    identity (padded) and the index-projection map."""
    kernels = []
    const = np.zeros((rows, cols))
    const[:, 0] = 1.0
    kernels.append(const)
    proj = np.zeros((rows, cols))
    for r in range(rows):
        proj[r, min(r, cols - 1)] = 1.0
    kernels.append(proj)
    return kernels


@dataclass(frozen=True)
class SearchConfig:
    """Search-space and budget knobs for the boundary search.

    grid: simplex quantization denominator (rows take coordinates k/grid).
    v_size / u_size: auxiliary alphabet sizes; default |X| for both.
    refine_rounds: halvings of the mass-moving step, starting at 1/grid.
    max_evals: enumeration budget; beyond it the grid is subsampled.
    exhaustive: force full grid enumeration regardless of the budget.
    seed: RNG seed for the subsample (unused when enumerating fully).
    """

    grid: int = 8
    v_size: int | None = None
    u_size: int | None = None
    refine_rounds: int = 3
    max_evals: int = 2_000_000
    exhaustive: bool = False
    seed: int = 0


@dataclass(frozen=True)
class SearchResult:
    equivocation: float
    scheme: SchemeParams | None
    feasible: bool
    grid_equivocation: float
    evaluations: int


def _threads() -> int:
    env = os.environ.get("EQUIREGION_THREADS")
    if env:
        try:
            return max(1, int(env))
        except ValueError:
            pass
    return os.cpu_count() or 1


def _resolve_sizes(source: JointDist, search: SearchConfig) -> tuple[int, int]:
    x_size = source.variables[0].size
    v_size = search.v_size if search.v_size is not None else x_size
    u_size = search.u_size if search.u_size is not None else x_size
    if v_size < 1 or u_size < 1:
        raise ValueError("auxiliary alphabet sizes must be >= 1")
    return v_size, u_size


def _candidate_channels(rows: int, cols: int, g: int, budget: int,
                        exhaustive: bool, rng: np.random.Generator,
                        extras: list[np.ndarray]) -> np.ndarray:
    """Stack of candidate kernels, canonical points first."""
    row_points = simplex_grid(cols, g)
    total = _channel_count(rows, cols, g)
    kernels: list[np.ndarray] = []
    kernels.extend(_canonical_kernels(rows, cols))
    kernels.extend(extras)
    if exhaustive or total <= budget:
        kernels.extend(_channel_from_index(i, rows, row_points)
                       for i in range(total))
    else:
        # uniform subsample of the grid, one row index per conditioning
        # symbol (avoids forming astronomically large flat indices)
        row_idx = rng.integers(0, row_points.shape[0], size=(budget, rows))
        kernels.extend(row_points[row_idx[b]] for b in range(budget))
    return np.stack(kernels)


def _search_grid(base: np.ndarray, d_table: np.ndarray, key_rate: float,
                 rate_cap: float, dist_cap: float,
                 vx_cands: np.ndarray, uv_cands: np.ndarray,
                 n_workers: int) -> tuple[float, int, int, int]:
    """Best equivocation over the candidate product set.

    Returns (best value, vx index, uv index, evaluations).  Ties break to
    the smallest global pair index, so the result is identical for any
    shard partition / worker count.
    """
    n_vx = vx_cands.shape[0]
    n_uv = uv_cands.shape[0]

    def eval_range(lo: int, hi: int) -> tuple[float, int, int, int]:
        best = (-np.inf, -1, -1)
        evals = 0
        for i in range(lo, hi):
            ctx = _VxContext(base, vx_cands[i], d_table)
            if ctx.rate_min > rate_cap + FEAS_TOL:
                continue
            if ctx.distortion > dist_cap + FEAS_TOL:
                continue
            for j0 in range(0, n_uv, 4096):
                chunk = uv_cands[j0:j0 + 4096]
                equiv = _equiv_batch(ctx, chunk, key_rate)
                evals += chunk.shape[0]
                j_rel = int(np.argmax(equiv))
                value = float(equiv[j_rel])
                if value > best[0]:
                    best = (value, i, j0 + j_rel)
        return best + (evals,)

    if n_workers <= 1 or n_vx <= 1:
        return eval_range(0, n_vx)
    bounds = np.linspace(0, n_vx, n_workers + 1, dtype=int)
    with ThreadPoolExecutor(max_workers=n_workers) as pool:
        parts = list(pool.map(lambda se: eval_range(*se),
                              zip(bounds[:-1], bounds[1:])))
    # shards are merged in index order with strictly-greater updates, so the
    # lowest candidate index wins ties and any worker count gives one answer
    best = (-np.inf, -1, -1)
    evals = 0
    for value, i, j, e in parts:
        evals += e
        if value > best[0]:
            best = (value, i, j)
    return best + (evals,)


def _eval_single(base, d_table, key_rate, vx, uv) -> tuple[float, float, float]:
    ctx = _VxContext(base, vx, d_table)
    equiv = float(_equiv_batch(ctx, uv[None], key_rate)[0])
    return ctx.rate_min, ctx.distortion, equiv


def _refine(base, d_table, key_rate, rate_cap, dist_cap, vx, uv,
            best_equiv: float, grid: int, rounds: int,
            refine_vx: bool = True) -> tuple[np.ndarray, np.ndarray, float]:
    """Coordinate-wise mass-moving hill climb from the best grid point."""
    vx = vx.copy()
    uv = uv.copy()
    mats = (vx, uv) if refine_vx else (uv,)
    for t in range(rounds):
        step = (1.0 / grid) * (0.5 ** t)
        improved = True
        sweeps = 0
        while improved and sweeps < 32:
            improved = False
            sweeps += 1
            for mat in mats:
                rows, cols = mat.shape
                for r in range(rows):
                    for i in range(cols):
                        old_i = mat[r, i]
                        if old_i <= 1e-12:
                            continue
                        move = min(step, old_i)  # keeps the row sum exact
                        for j in range(cols):
                            if i == j:
                                continue
                            old_j = mat[r, j]
                            mat[r, i] = old_i - move
                            mat[r, j] = old_j + move
                            rate, dist, equiv = _eval_single(
                                base, d_table, key_rate, vx, uv)
                            if (equiv > best_equiv + 1e-12
                                    and rate <= rate_cap + FEAS_TOL
                                    and dist <= dist_cap + FEAS_TOL):
                                best_equiv = equiv
                                improved = True
                                old_i = mat[r, i]
                                if old_i <= 1e-12:
                                    break
                                move = min(step, old_i)
                            else:
                                mat[r, i] = old_i
                                mat[r, j] = old_j
    return vx, uv, best_equiv


def _build_scheme(source: JointDist, d: DistortionMeasure,
                  vx_kernel: np.ndarray, uv_kernel: np.ndarray,
                  enforce_cardinality: bool = True) -> SchemeParams:
    x_alpha = source.variables[0]
    v_alpha = nary("V", vx_kernel.shape[1])
    u_alpha = nary("U", uv_kernel.shape[1])
    vx = CondChannel((x_alpha,), (v_alpha,), vx_kernel)
    uv = CondChannel((v_alpha,), (u_alpha,), uv_kernel)
    recon = optimal_reconstruction(source, vx, d)
    return SchemeParams(vx, uv, recon, d.recon_alphabet,
                        enforce_cardinality=enforce_cardinality)


def max_equivocation(source: JointDist, d: DistortionMeasure,
                     rate_cap: float | None, key_rate: float,
                     dist_cap: float | None,
                     search: SearchConfig = SearchConfig(),
                     extra_schemes: tuple[tuple[np.ndarray, np.ndarray], ...] = (),
                     fixed_vx: np.ndarray | None = None) -> SearchResult:
    """Best found equivocation ceiling subject to rate and distortion caps.

    The result is a lower bound on the true boundary.  Infeasible caps are
    reported through `feasible=False`, never raised.  `extra_schemes` are
    (vx, uv) kernel pairs evaluated alongside the grid (used for witness
    chaining across sweeps and for cardinality cross-seeding).  `fixed_vx`
    pins the test channel so only p(u|v) is searched.
    """
    _check_source(source)
    if key_rate < 0:
        raise ValueError("key_rate must be non-negative")
    rate_cap = math.inf if rate_cap is None else float(rate_cap)
    dist_cap = math.inf if dist_cap is None else float(dist_cap)
    v_size, u_size = _resolve_sizes(source, search)
    if fixed_vx is not None:
        fixed_vx = np.asarray(fixed_vx, dtype=np.float64)
        v_size = fixed_vx.shape[1]
    base = source.mass
    d_table = d.table
    rng = np.random.default_rng(search.seed)

    n_vx_total = (1 if fixed_vx is not None
                  else _channel_count(source.variables[0].size, v_size, search.grid))
    n_uv_total = _channel_count(v_size, u_size, search.grid)
    total = n_vx_total * n_uv_total
    if search.exhaustive or total <= search.max_evals:
        vx_budget = n_vx_total
        uv_budget = n_uv_total
    else:
        # balance the budget, letting a small side be enumerated fully
        uv_budget = min(n_uv_total, max(1, math.isqrt(search.max_evals)))
        vx_budget = min(n_vx_total, max(1, search.max_evals // uv_budget))
        uv_budget = min(n_uv_total, max(uv_budget, search.max_evals // vx_budget))

    vx_extras = [vk for vk, _ in extra_schemes if vk.shape == (base.shape[0], v_size)]
    uv_extras = [uk for _, uk in extra_schemes if uk.shape == (v_size, u_size)]
    if v_size == base.shape[0]:
        vx_extras.append(np.eye(base.shape[0]))
    if u_size >= v_size:
        eye = np.zeros((v_size, u_size))
        eye[np.arange(v_size), np.arange(v_size)] = 1.0
        uv_extras.append(eye)

    if fixed_vx is not None:
        vx_cands = fixed_vx[None]
    else:
        vx_cands = _candidate_channels(base.shape[0], v_size, search.grid,
                                       vx_budget, search.exhaustive, rng, vx_extras)
    uv_cands = _candidate_channels(v_size, u_size, search.grid,
                                   uv_budget, search.exhaustive, rng, uv_extras)

    value, i, j, evals = _search_grid(base, d_table, key_rate, rate_cap,
                                      dist_cap, vx_cands, uv_cands, _threads())
    if i < 0:
        return SearchResult(-math.inf, None, False, -math.inf, evals)

    grid_value = value
    vx_k, uv_k, value = _refine(base, d_table, key_rate, rate_cap, dist_cap,
                                vx_cands[i], uv_cands[j], value,
                                search.grid, search.refine_rounds,
                                refine_vx=fixed_vx is None)
    scheme = _build_scheme(source, d, vx_k, uv_k, enforce_cardinality=False)
    return SearchResult(value, scheme, True, grid_value, evals)


# ---------------------------------------------------------------------------
# Boundary sweeps and membership tests
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class SweepEntry:
    point: RegionPoint
    scheme: SchemeParams | None
    feasible: bool
    achieved_rate: float
    achieved_distortion: float
    equiv_raw: float


_AXES = ("r0", "rate", "dist")


def _entry(source, d, axis, value, key_rate, rate_cap, dist_cap,
           result: SearchResult) -> SweepEntry:
    if not result.feasible:
        point = RegionPoint(
            rate=0.0 if rate_cap is None else max(0.0, rate_cap),
            key_rate=key_rate, distortion=0.0 if dist_cap is None else dist_cap,
            equivocation=0.0)
        return SweepEntry(point, None, False, math.nan, math.nan, -math.inf)
    ev = evaluate_bounds(source, result.scheme, d, key_rate)
    rate = ev.rate_min if rate_cap is None or math.isinf(rate_cap) else rate_cap
    dist = ev.distortion if dist_cap is None or math.isinf(dist_cap) else dist_cap
    point = RegionPoint(rate=rate, key_rate=key_rate, distortion=dist,
                        equivocation=max(0.0, result.equivocation))
    return SweepEntry(point, result.scheme, True, ev.rate_min, ev.distortion,
                      result.equivocation)


def region_sweep(source: JointDist, d: DistortionMeasure, *, axis: str,
                 grid, key_rate: float = 0.0,
                 rate_cap: float | None = None, dist_cap: float | None = None,
                 search: SearchConfig = SearchConfig(),
                 fixed_vx: np.ndarray | None = None) -> list[SweepEntry]:
    """Trace the boundary along one cap axis ("r0", "rate" or "dist").

    The witness found at each grid value is re-used as a candidate at the
    neighbouring values (a forward then a backward pass), which makes the
    emitted equivocations exactly monotone in the cap and keeps each
    increment within the one-time-pad slope bound along the r0 axis.
    """
    if axis not in _AXES:
        raise ValueError(f"axis must be one of {_AXES}")
    grid = [float(v) for v in grid]
    if any(b < a for a, b in zip(grid, grid[1:])):
        raise ValueError("grid values must be monotone increasing")

    def caps(value):
        if axis == "r0":
            return value, rate_cap, dist_cap
        if axis == "rate":
            return key_rate, value, dist_cap
        return key_rate, rate_cap, value

    results: list[SearchResult] = []
    carried: tuple[tuple[np.ndarray, np.ndarray], ...] = ()
    for value in grid:
        r0, rc, dc = caps(value)
        res = max_equivocation(source, d, rc, r0, dc, search,
                               extra_schemes=carried, fixed_vx=fixed_vx)
        if res.feasible:
            carried = ((res.scheme.vx.kernel, res.scheme.uv.kernel),)
        results.append(res)

    # Backward pass: a witness that is good at a looser cap bounds how far
    # the value may drop one step earlier.
    for i in range(len(grid) - 2, -1, -1):
        nxt = results[i + 1]
        if not nxt.feasible:
            continue
        r0, rc, dc = caps(grid[i])
        rate, dist, equiv = _eval_single(
            source.mass, d.table, r0, nxt.scheme.vx.kernel, nxt.scheme.uv.kernel)
        rc_val = math.inf if rc is None else rc
        dc_val = math.inf if dc is None else dc
        if (rate <= rc_val + FEAS_TOL and dist <= dc_val + FEAS_TOL
                and (not results[i].feasible or equiv > results[i].equivocation)):
            results[i] = SearchResult(equiv, nxt.scheme, True,
                                      results[i].grid_equivocation,
                                      results[i].evaluations)

    entries = []
    for value, res in zip(grid, results):
        r0, rc, dc = caps(value)
        entries.append(_entry(source, d, axis, value, r0, rc, dc, res))
    return entries


def is_achievable(source: JointDist, d: DistortionMeasure, point: RegionPoint,
                  search: SearchConfig = SearchConfig()
                  ) -> tuple[bool, SchemeParams | None]:
    """Membership test for one (R, R0, D, Delta) tuple.

    True when some searched scheme certifies the point within 1e-9 slack;
    the witnessing scheme is returned alongside.
    """
    result = max_equivocation(source, d, point.rate, point.key_rate,
                              point.distortion, search)
    if not result.feasible:
        return False, None
    if point.equivocation <= max(result.equivocation, 0.0) + FEAS_TOL:
        return True, result.scheme
    return False, None


@dataclass(frozen=True)
class SaturationReport:
    axis: str
    size_small: int
    size_large: int
    grid: tuple[float, ...]
    equiv_small: tuple[float, ...]
    equiv_large: tuple[float, ...]

    @property
    def max_improvement(self) -> float:
        pairs = [(b, a) for a, b in zip(self.equiv_small, self.equiv_large)
                 if math.isfinite(a) and math.isfinite(b)]
        return max((b - a for b, a in pairs), default=0.0)


def cardinality_saturation_check(source: JointDist, d: DistortionMeasure, *,
                                 r0_grid, rate_cap: float | None = None,
                                 dist_cap: float | None = None,
                                 search: SearchConfig = SearchConfig(),
                                 axis: str = "u",
                                 size_small: int | None = None,
                                 size_large: int | None = None) -> SaturationReport:
    """Compare boundary sweeps at an auxiliary cardinality and at one more.

    Both sweeps are seeded with the witnesses of a cheap exhaustive sweep at
    |aux| = |X| (zero-padded to the target size), so any improvement reported
    reflects genuinely better schemes rather than sampling luck.
    """
    if axis not in ("u", "v"):
        raise ValueError("axis must be 'u' or 'v'")
    x_size = source.variables[0].size
    if axis == "u":
        size_small = u_cardinality_bound(x_size) if size_small is None else size_small
        size_large = size_small + 1 if size_large is None else size_large
    else:
        size_small = x_size + 1 if size_small is None else size_small
        size_large = size_small + 1 if size_large is None else size_large

    base_search = replace(search, v_size=x_size, u_size=x_size, exhaustive=False)
    base_entries = region_sweep(source, d, axis="r0", grid=r0_grid,
                                rate_cap=rate_cap, dist_cap=dist_cap,
                                search=base_search)

    def padded_extras(v_size, u_size):
        extras = []
        for e in base_entries:
            if e.scheme is None:
                continue
            vk = e.scheme.vx.kernel
            uk = e.scheme.uv.kernel
            vk2 = np.zeros((vk.shape[0], v_size))
            vk2[:, :vk.shape[1]] = vk
            uk2 = np.zeros((v_size, u_size))
            uk2[:uk.shape[0], :uk.shape[1]] = uk
            for r in range(uk.shape[0], v_size):
                uk2[r, 0] = 1.0
            extras.append((vk2, uk2))
        return tuple(extras)

    def sweep(size):
        if axis == "u":
            cfg = replace(search, v_size=x_size, u_size=size)
            v_size, u_size = x_size, size
        else:
            cfg = replace(search, v_size=size,
                          u_size=search.u_size if search.u_size else x_size)
            v_size, u_size = size, cfg.u_size
        extras = padded_extras(v_size, u_size)
        values = []
        carried = extras
        for r0 in r0_grid:
            res = max_equivocation(source, d, rate_cap, float(r0), dist_cap,
                                   cfg, extra_schemes=carried)
            if res.feasible:
                carried = extras + ((res.scheme.vx.kernel, res.scheme.uv.kernel),)
            values.append(res.equivocation if res.feasible else -math.inf)
        return tuple(values)

    return SaturationReport(axis=axis, size_small=size_small,
                            size_large=size_large,
                            grid=tuple(float(v) for v in r0_grid),
                            equiv_small=sweep(size_small),
                            equiv_large=sweep(size_large))


# ---------------------------------------------------------------------------
# Scheme digests (compact CSV-safe round-trippable encoding)
# ---------------------------------------------------------------------------

def _fmt_matrix(mat: np.ndarray) -> str:
    return "/".join(" ".join("%.12g" % v for v in row) for row in np.atleast_2d(mat))


def scheme_digest(scheme: SchemeParams) -> str:
    return ";".join([
        f"v{scheme.v_size}u{scheme.u_size}",
        "vx=" + _fmt_matrix(scheme.vx.kernel),
        "uv=" + _fmt_matrix(scheme.uv.kernel),
        "recon=" + "/".join(" ".join(str(i) for i in row) for row in scheme.recon),
    ])


def scheme_from_digest(digest: str, source: JointDist,
                       d: DistortionMeasure) -> SchemeParams:
    head, vx_part, uv_part, recon_part = digest.split(";")
    v_size, u_size = (int(s) for s in head[1:].split("u"))
    def parse(text):
        return np.array([[float(v) for v in row.split(" ")]
                         for row in text.split("=", 1)[1].split("/")])
    vx_kernel = parse(vx_part)
    uv_kernel = parse(uv_part)
    recon = np.array([[int(v) for v in row.split(" ")]
                      for row in recon_part.split("=", 1)[1].split("/")])
    v_alpha = nary("V", v_size)
    u_alpha = nary("U", u_size)
    vx = CondChannel((source.variables[0],), (v_alpha,), vx_kernel)
    uv = CondChannel((v_alpha,), (u_alpha,), uv_kernel)
    return SchemeParams(vx, uv, recon, d.recon_alphabet,
                        enforce_cardinality=False)
