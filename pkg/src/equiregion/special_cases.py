"""Closed-form specializations of the region and the identity oracle.

Three settings collapse the general two-layer characterization:

* lossless reconstruction (Hamming distortion, D = 0), where the test
  channel is pinned to V = X and only p(u|x) is searched;
* no shared key (r0 = 0), where the equivocation ceiling loses its min;
* no decoder side information (|Y| = 1), where the search runs directly
  over p(xhat, u | x).

Each specialization evaluates its own closed-form expression with its own
search loop, so the general machinery in `region` can be cross-validated
against it.  The three-way entropy identity underlying the collapses is
exposed as `lemma1_identities` and doubles as the module's oracle.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .probability import (
    DistortionMeasure,
    JointDist,
    cond_entropy,
    entropy,
)
from .region import (
    FEAS_TOL,
    SearchConfig,
    _candidate_channels,
    _plogp,
    simplex_grid,
    simplex_grid_count,
)


@dataclass(frozen=True)
class LemmaTriple:
    """Three equivalent expressions for the no-key equivocation ceiling,
    plus the reconstruction-form diagnostic used by the lossless collapse."""

    form_a: float   # I(Y;V|U) - I(Z;V|U) + H(X|Z,V)
    form_b: float   # H(X|Z,U) - I(X;V|Y,U)
    form_c: float   # H(X|Z) - I(X;V|Y) + I(Z;U) - I(Y;U)
    form_d: float   # H(X|Y,V) + I(X;Y|U) - I(X;Z|U)

    @property
    def spread(self) -> float:
        vals = (self.form_a, self.form_b, self.form_c)
        return max(vals) - min(vals)

    @property
    def spread_all(self) -> float:
        vals = (self.form_a, self.form_b, self.form_c, self.form_d)
        return max(vals) - min(vals)


def lemma1_identities(joint: JointDist) -> LemmaTriple:
    """Evaluate the three equal forms on a joint carrying (U,V,X,Y,Z).

    The equalities hold whenever the joint factors through the Markov
    chain U -> V -> X -> (Y,Z); on such joints the spread is numerical
    noise only.  The forms are assembled from raw entropies, without the
    near-zero clamping of the derived operations, so genuinely tiny
    mutual informations do not distort the comparison.
    """
    for name in ("U", "V", "X", "Y", "Z"):
        if name not in joint.names:
            raise ValueError(f"joint must carry variable {name!r}")

    def h(*names):
        return entropy(joint, list(names))

    # I(Y;V|U) - I(Z;V|U) + H(X|Z,V)
    form_a = (h("Y", "U") - h("Y", "V", "U")
              - h("Z", "U") + h("Z", "V", "U")
              + h("X", "Z", "V") - h("Z", "V"))
    # H(X|Z,U) - I(X;V|Y,U)
    form_b = (h("X", "Z", "U") - h("Z", "U")
              - h("X", "Y", "U") - h("V", "Y", "U")
              + h("Y", "U") + h("X", "V", "Y", "U"))
    # H(X|Z) - I(X;V|Y) + I(Z;U) - I(Y;U)
    form_c = (h("X", "Z") - h("Z")
              - h("X", "Y") - h("V", "Y") + h("Y") + h("X", "V", "Y")
              + h("Z") + h("U") - h("Z", "U")
              - h("Y") - h("U") + h("Y", "U"))
    # H(X|Y,V) + I(X;Y|U) - I(X;Z|U)
    form_d = (h("X", "Y", "V") - h("Y", "V")
              + h("X", "U") + h("Y", "U") - h("U") - h("X", "Y", "U")
              - h("X", "U") - h("Z", "U") + h("U") + h("X", "Z", "U"))
    return LemmaTriple(form_a, form_b, form_c, form_d)


# ---------------------------------------------------------------------------
# Generic hill climb shared by the specialized searches
# ---------------------------------------------------------------------------

def _refine_channels(mats: list[np.ndarray], objective, best: float,
                     g: int, rounds: int) -> float:
    """Mass-moving hill climb over channel rows; mutates `mats` in place.

    `objective(mats)` returns -inf for infeasible points.
    """
    for t in range(rounds):
        step = (1.0 / g) * (0.5 ** t)
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
                        move = min(step, old_i)
                        for j in range(cols):
                            if i == j:
                                continue
                            old_j = mat[r, j]
                            mat[r, i] = old_i - move
                            mat[r, j] = old_j + move
                            value = objective(mats)
                            if value > best + 1e-12:
                                best = value
                                improved = True
                                old_i = mat[r, i]
                                if old_i <= 1e-12:
                                    break
                                move = min(step, old_i)
                            else:
                                mat[r, i] = old_i
                                mat[r, j] = old_j
    return best


# ---------------------------------------------------------------------------
# Lossless reconstruction
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class LosslessBoundary:
    rate_min: float
    equiv_max: float
    u_kernel: np.ndarray


def _lossless_equiv_batch(base: np.ndarray, ux_batch: np.ndarray,
                          key_rate: float) -> np.ndarray:
    """min{ I(X;Y|U) - I(X;Z|U) + r0, H(X|Z,U) } for a (B,X,U) batch."""
    pxyzu = np.einsum("xyz,bxu->bxyzu", base, ux_batch)
    pxyu = pxyzu.sum(axis=3)
    pxzu = pxyzu.sum(axis=2)
    pxu = pxyu.sum(axis=2)
    pyu = pxyu.sum(axis=1)
    pzu = pxzu.sum(axis=1)
    pu = pxu.sum(axis=1)
    s_xyu = _plogp(pxyu, keep_first=True)
    s_xzu = _plogp(pxzu, keep_first=True)
    s_xu = _plogp(pxu, keep_first=True)
    s_yu = _plogp(pyu, keep_first=True)
    s_zu = _plogp(pzu, keep_first=True)
    s_u = _plogp(pu, keep_first=True)
    i_xy_u = s_xyu - s_xu - s_yu + s_u
    i_xz_u = s_xzu - s_xu - s_zu + s_u
    h_x_zu = -s_xzu + s_zu
    return np.minimum(i_xy_u - i_xz_u + key_rate, h_x_zu)


def lossless_region(source: JointDist, key_rate: float,
                    search: SearchConfig = SearchConfig()) -> LosslessBoundary:
    """Boundary of the lossless collapse: R >= H(X|Y) and the best
    min{I(X;Y|U) - I(X;Z|U) + r0, H(X|Z,U)} over p(u|x)."""
    base = source.mass
    x_size = base.shape[0]
    u_size = search.u_size if search.u_size is not None else x_size
    rng = np.random.default_rng(search.seed)
    total = simplex_grid_count(u_size, search.grid) ** x_size
    budget = total if (search.exhaustive or total <= search.max_evals) \
        else search.max_evals
    cands = _candidate_channels(x_size, u_size, search.grid, budget,
                                search.exhaustive, rng, [])
    best = -math.inf
    best_idx = 0
    for lo in range(0, cands.shape[0], 4096):
        chunk = cands[lo:lo + 4096]
        vals = _lossless_equiv_batch(base, chunk, key_rate)
        k = int(np.argmax(vals))
        if float(vals[k]) > best:
            best = float(vals[k])
            best_idx = lo + k
    kernel = cands[best_idx].copy()

    def objective(mats):
        return float(_lossless_equiv_batch(base, mats[0][None], key_rate)[0])

    best = _refine_channels([kernel], objective, best,
                            search.grid, search.refine_rounds)
    rate_min = cond_entropy(source, [source.names[0]], [source.names[1]])
    return LosslessBoundary(rate_min=rate_min, equiv_max=best, u_kernel=kernel)


# ---------------------------------------------------------------------------
# No shared key
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class NoKeyEntry:
    cap: float
    equivocation: float
    rate_min: float
    distortion: float
    vx_kernel: np.ndarray | None
    uv_kernel: np.ndarray | None
    feasible: bool


def _nokey_stats(base: np.ndarray, d_table: np.ndarray, vx: np.ndarray,
                 uv_batch: np.ndarray) -> tuple[float, float, np.ndarray]:
    """Rate floor, best-reconstruction distortion and the no-key ceiling
    I(Y;V|U) - I(Z;V|U) + H(X|Z,V) for a batch of p(u|v) kernels."""
    pxyzv = np.einsum("xyz,xv->xyzv", base, vx)
    pxyv = pxyzv.sum(axis=2)
    pxzv = pxyzv.sum(axis=1)
    pyv = pxyv.sum(axis=0)
    pzv = pxzv.sum(axis=0)
    pxy = pxyv.sum(axis=2)
    py = pyv.sum(axis=1)
    rate = -_plogp(pxy) - _plogp(pyv) + _plogp(py) + _plogp(pxyv)
    cost = np.einsum("xyv,xw->yvw", pxyv, d_table)
    dist = float(np.take_along_axis(cost, np.argmin(cost, axis=2)[:, :, None],
                                    axis=2).sum())
    h_x_zv = -_plogp(pxzv) + _plogp(pzv)
    pyvu = np.einsum("yv,bvu->byvu", pyv, uv_batch)
    pzvu = np.einsum("zv,bvu->bzvu", pzv, uv_batch)
    s_yvu = _plogp(pyvu, keep_first=True)
    s_zvu = _plogp(pzvu, keep_first=True)
    s_yu = _plogp(pyvu.sum(axis=2), keep_first=True)
    s_zu = _plogp(pzvu.sum(axis=2), keep_first=True)
    pvu = pyvu.sum(axis=1)
    pu = pvu.sum(axis=1)
    s_vu = _plogp(pvu, keep_first=True)
    s_u = _plogp(pu, keep_first=True)
    i_yv_u = -s_yu - s_vu + s_u + s_yvu
    i_zv_u = -s_zu - s_vu + s_u + s_zvu
    return rate, dist, i_yv_u - i_zv_u + h_x_zv


def no_key_region(source: JointDist, d: DistortionMeasure, *,
                  axis: str = "dist", grid,
                  rate_cap: float | None = None, dist_cap: float | None = None,
                  search: SearchConfig = SearchConfig()) -> list[NoKeyEntry]:
    """Boundary sweep for the keyless setting, maximizing the single-branch
    ceiling subject to the caps; mirrors the general sweep structure."""
    if axis not in ("dist", "rate"):
        raise ValueError("axis must be 'dist' or 'rate'")
    base = source.mass
    x_size = base.shape[0]
    v_size = search.v_size if search.v_size is not None else x_size
    u_size = search.u_size if search.u_size is not None else x_size
    rng = np.random.default_rng(search.seed)

    n_vx = simplex_grid_count(v_size, search.grid) ** x_size
    n_uv = simplex_grid_count(u_size, search.grid) ** v_size
    if search.exhaustive or n_vx * n_uv <= search.max_evals:
        vx_budget, uv_budget = n_vx, n_uv
    else:
        uv_budget = min(n_uv, max(1, math.isqrt(search.max_evals)))
        vx_budget = min(n_vx, max(1, search.max_evals // uv_budget))
    vx_extras = [np.eye(x_size)] if v_size == x_size else []
    vx_cands = _candidate_channels(x_size, v_size, search.grid, vx_budget,
                                   search.exhaustive, rng, vx_extras)
    uv_cands = _candidate_channels(v_size, u_size, search.grid, uv_budget,
                                   search.exhaustive, rng, [])

    def solve(rc: float, dc: float, carried):
        best = (-math.inf, None, None)
        for i in range(vx_cands.shape[0]):
            rate, dist, _ = _nokey_stats(base, d.table, vx_cands[i],
                                         uv_cands[:1])
            if rate > rc + FEAS_TOL or dist > dc + FEAS_TOL:
                continue
            for lo in range(0, uv_cands.shape[0], 4096):
                chunk = uv_cands[lo:lo + 4096]
                _, _, vals = _nokey_stats(base, d.table, vx_cands[i], chunk)
                k = int(np.argmax(vals))
                if float(vals[k]) > best[0]:
                    best = (float(vals[k]), vx_cands[i].copy(),
                            chunk[k].copy())
        for vx_k, uv_k in carried:
            rate, dist, vals = _nokey_stats(base, d.table, vx_k, uv_k[None])
            if rate <= rc + FEAS_TOL and dist <= dc + FEAS_TOL \
                    and float(vals[0]) > best[0]:
                best = (float(vals[0]), vx_k.copy(), uv_k.copy())
        if best[1] is None:
            return best
        vx_k, uv_k = best[1], best[2]

        def objective(mats):
            rate, dist, vals = _nokey_stats(base, d.table, mats[0],
                                            mats[1][None])
            if rate > rc + FEAS_TOL or dist > dc + FEAS_TOL:
                return -math.inf
            return float(vals[0])

        value = _refine_channels([vx_k, uv_k], objective, best[0],
                                 search.grid, search.refine_rounds)
        return (value, vx_k, uv_k)

    grid = [float(v) for v in grid]
    results = []
    carried: list[tuple[np.ndarray, np.ndarray]] = []
    for value in grid:
        rc = value if axis == "rate" else (math.inf if rate_cap is None else rate_cap)
        dc = value if axis == "dist" else (math.inf if dist_cap is None else dist_cap)
        best = solve(rc, dc, carried)
        if best[1] is not None:
            carried = [(best[1], best[2])]
        results.append(best)

    entries = []
    for value, (equiv, vx_k, uv_k) in zip(grid, results):
        if vx_k is None:
            entries.append(NoKeyEntry(value, 0.0, math.nan, math.nan,
                                      None, None, False))
            continue
        rate, dist, _ = _nokey_stats(base, d.table, vx_k, uv_k[None])
        entries.append(NoKeyEntry(value, equiv, rate, dist, vx_k, uv_k, True))
    return entries


# ---------------------------------------------------------------------------
# No decoder side information
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class NoSiEntry:
    key_rate: float
    equivocation: float
    rate_min: float
    distortion: float
    w_kernel: np.ndarray | None   # p(xhat, u | x), columns xhat-major
    feasible: bool


def _nosi_stats(pxz: np.ndarray, d_table: np.ndarray, xh_size: int,
                u_size: int, w_batch: np.ndarray, key_rate: float
                ) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Rate, distortion and ceiling for a (B, X, Xh*U) batch of kernels."""
    b, x_size, _ = w_batch.shape
    w = w_batch.reshape(b, x_size, xh_size, u_size)
    px = pxz.sum(axis=1)
    pxhu = np.einsum("x,bxhu->bxhu", px, w)        # joint p(x, xhat, u)
    pxzhu = np.einsum("xz,bxhu->bxzhu", pxz, w)
    s_x = _plogp(px)
    s_xw = _plogp(pxhu.reshape(b, -1), keep_first=True)
    s_w = _plogp(pxhu.sum(axis=1).reshape(b, -1), keep_first=True)
    rate = s_xw - s_x - s_w                         # I(X; Xhat, U)
    pxxh = pxhu.sum(axis=3)
    dist = np.einsum("bxh,xh->b", pxxh, d_table)
    pzhu = pxzhu.sum(axis=1)
    pzu = pzhu.sum(axis=2)
    phu = pzhu.sum(axis=1)
    pu = phu.sum(axis=1)
    pxzu = pxzhu.sum(axis=3)
    s_zhu = _plogp(pzhu, keep_first=True)
    s_zu = _plogp(pzu, keep_first=True)
    s_hu = _plogp(phu, keep_first=True)
    s_u = _plogp(pu, keep_first=True)
    s_xzhu = _plogp(pxzhu.reshape(b, -1), keep_first=True)
    s_xzu = _plogp(pxzu, keep_first=True)
    i_zxh_u = s_zhu - s_zu - s_hu + s_u            # I(Z; Xhat | U)
    h_x_zxhu = -s_xzhu + s_zhu                     # H(X | Z, Xhat, U)
    h_x_zu = -s_xzu + s_zu
    ceiling = np.minimum(key_rate - i_zxh_u + h_x_zxhu, h_x_zu)
    return rate, dist, ceiling


def no_si_region(source: JointDist, d: DistortionMeasure, *, r0_grid,
                 rate_cap: float | None = None, dist_cap: float | None = None,
                 u_size: int | None = None,
                 search: SearchConfig = SearchConfig(),
                 extra_kernels: tuple[np.ndarray, ...] = ()) -> list[NoSiEntry]:
    """Boundary sweep when the decoder has no side information.

    Requires a singleton Y alphabet; the auxiliary search runs directly
    over p(xhat, u | x).
    """
    if source.variables[1].size != 1:
        raise ValueError("no_si_region requires a singleton Y alphabet")
    pxz = source.mass[:, 0, :]
    x_size = pxz.shape[0]
    xh_size = d.recon_alphabet.size
    u_size = u_size if u_size is not None else \
        (search.u_size if search.u_size is not None else x_size)
    w_cols = xh_size * u_size
    rc = math.inf if rate_cap is None else float(rate_cap)
    dc = math.inf if dist_cap is None else float(dist_cap)
    rng = np.random.default_rng(search.seed)
    total = simplex_grid_count(w_cols, search.grid) ** x_size
    budget = total if (search.exhaustive or total <= search.max_evals) \
        else search.max_evals
    cands = _candidate_channels(x_size, w_cols, search.grid, budget,
                                search.exhaustive, rng, list(extra_kernels))

    entries = []
    carried: list[np.ndarray] = []
    for r0 in [float(v) for v in r0_grid]:
        best = (-math.inf, None)
        for lo in range(0, cands.shape[0], 4096):
            chunk = cands[lo:lo + 4096]
            rate, dist, ceiling = _nosi_stats(pxz, d.table, xh_size, u_size,
                                              chunk, r0)
            ok = (rate <= rc + FEAS_TOL) & (dist <= dc + FEAS_TOL)
            if not np.any(ok):
                continue
            vals = np.where(ok, ceiling, -math.inf)
            k = int(np.argmax(vals))
            if float(vals[k]) > best[0]:
                best = (float(vals[k]), cands[lo + k].copy())
        for kern in carried:
            rate, dist, ceiling = _nosi_stats(pxz, d.table, xh_size, u_size,
                                              kern[None], r0)
            if (rate[0] <= rc + FEAS_TOL and dist[0] <= dc + FEAS_TOL
                    and float(ceiling[0]) > best[0]):
                best = (float(ceiling[0]), kern.copy())
        if best[1] is None:
            entries.append(NoSiEntry(r0, 0.0, math.nan, math.nan, None, False))
            continue
        kern = best[1]

        def objective(mats, r0=r0):
            rate, dist, ceiling = _nosi_stats(pxz, d.table, xh_size, u_size,
                                              mats[0][None], r0)
            if rate[0] > rc + FEAS_TOL or dist[0] > dc + FEAS_TOL:
                return -math.inf
            return float(ceiling[0])

        value = _refine_channels([kern], objective, best[0],
                                 search.grid, search.refine_rounds)
        carried = [kern]
        rate, dist, _ = _nosi_stats(pxz, d.table, xh_size, u_size,
                                    kern[None], r0)
        entries.append(NoSiEntry(r0, value, float(rate[0]), float(dist[0]),
                                 kern, True))
    return entries


def general_kernels_from_nosi(w_kernel: np.ndarray, xh_size: int,
                              u_size: int) -> tuple[np.ndarray, np.ndarray]:
    """Map a p(xhat,u|x) witness onto the general parameterization with
    V = (Xhat, U): returns (vx, uv) kernels, U recovered by projection."""
    vx = w_kernel.copy()
    uv = np.zeros((xh_size * u_size, u_size))
    for h in range(xh_size):
        for u in range(u_size):
            uv[h * u_size + u, u] = 1.0
    return vx, uv
