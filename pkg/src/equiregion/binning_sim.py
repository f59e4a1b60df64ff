"""Exact finite-blocklength simulation of the random-binning construction.

For one realized binning the two protocol distributions are represented in
factored form (i.i.d. sequence tensors plus deterministic bin maps and a
MAP decoder table), never as a dense product over all thirteen variables:

* Protocol A draws (X^n,Y^n,Z^n,U^n,V^n) i.i.d. from the composed
  single-letter joint; (m1,f1,k[,k']) are bins of v^n and (m2,f2) bins of
  u^n, all uniform and mutually independent across the maps.
* Protocol B draws (f1,k,k',f2) uniform and independent of the source,
  then generates (v^n,u^n) from Protocol A's posterior given
  (x^n,f1,k,k',f2).  When that posterior has no mass for the drawn bins
  the encoder falls back to a uniform v^n (flagged), then to the f2-sliced
  u-posterior with its own uniform fallback.

Sharing the exact posterior is what makes the total-variation reduction
identity (full-space distance equals the distance of the
(x^n,y^n,z^n,f1,f2,k) marginals) hold exactly at every blocklength; the
two-step factored encoder coincides with it whenever the f2 binning is
degenerate and differs otherwise only by the f2 tilt that vanishes
asymptotically.

Both decoder and eavesdropper quantities (block error, distortion,
equivocation, security gap) are exact sums over the factored state space,
with a hard budget guard on the enumeration size.

The optional revealed-key layer k' models the key-splitting step used when
the shared key is shorter than the second-layer description: the protocol
runs with the full key (k,k') while the equivocation conditions on k'.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .probability import DistortionMeasure, JointDist, marginalize
from .region import SchemeParams

SEQ_BUDGET_BITS = 24.0
TABLE_BUDGET = 1 << 24


class BudgetExceededError(RuntimeError):
    """The requested blocklength exceeds the exact-enumeration budget."""


def _bin_count(n: int, rate: float) -> int:
    return max(1, 2 ** int(math.floor(n * rate + 1e-12)))


@dataclass(frozen=True)
class BinningConfig:
    """Blocklength and binning rates (bits/symbol).

    Bin index counts are 2**floor(n*rate) with a floor of one bin.  The
    revealed-key rate `r0_revealed` adds a second key layer k' that the
    decoder uses but the equivocation conditions on.
    """

    n: int
    r1: float
    r2: float
    rt1: float
    rt2: float
    r0: float
    r0_revealed: float = 0.0

    def __post_init__(self):
        if self.n < 1:
            raise ValueError("n must be >= 1")
        for name in ("r1", "r2", "rt1", "rt2", "r0", "r0_revealed"):
            if getattr(self, name) < 0:
                raise ValueError(f"{name} must be non-negative")

    @property
    def counts(self) -> dict[str, int]:
        n = self.n
        return {
            "m1": _bin_count(n, self.r1),
            "m2": _bin_count(n, self.r2),
            "f1": _bin_count(n, self.rt1),
            "f2": _bin_count(n, self.rt2),
            "k": _bin_count(n, self.r0),
            "kr": _bin_count(n, self.r0_revealed),
        }

    @property
    def total_key_rate(self) -> float:
        return self.r0 + self.r0_revealed


@dataclass(frozen=True)
class BinningRealization:
    """One draw of the bin maps; every sequence index is binned.

    Maps are drawn i.i.d. uniform with a single seeded generator in the
    fixed order m1, f1, k, k' (over v-sequences) then m2, f2 (over
    u-sequences), which makes realizations reproducible and the six maps
    mutually independent.
    """

    seed: int
    v_m1: np.ndarray = field(repr=False)
    v_f1: np.ndarray = field(repr=False)
    v_k: np.ndarray = field(repr=False)
    v_kr: np.ndarray = field(repr=False)
    u_m2: np.ndarray = field(repr=False)
    u_f2: np.ndarray = field(repr=False)


def draw_binning(config: BinningConfig, v_size: int, u_size: int,
                 seed: int) -> BinningRealization:
    rng = np.random.default_rng(seed)
    nv = v_size ** config.n
    nu = u_size ** config.n
    c = config.counts
    return BinningRealization(
        seed=seed,
        v_m1=rng.integers(0, c["m1"], size=nv),
        v_f1=rng.integers(0, c["f1"], size=nv),
        v_k=rng.integers(0, c["k"], size=nv),
        v_kr=rng.integers(0, c["kr"], size=nv),
        u_m2=rng.integers(0, c["m2"], size=nu),
        u_f2=rng.integers(0, c["f2"], size=nu),
    )


# ---------------------------------------------------------------------------
# Sequence-tensor helpers
# ---------------------------------------------------------------------------

def iid_seq_tensor(p1: np.ndarray, n: int) -> np.ndarray:
    """n-fold i.i.d. product of a single-letter joint, one axis per
    variable; sequences are indexed mixed-radix, first symbol most
    significant."""
    k = p1.ndim
    t = p1
    for _ in range(n - 1):
        t = np.tensordot(t, p1, axes=0)
    perm = [sym * k + var for var in range(k) for sym in range(n)]
    t = t.transpose(perm)
    return t.reshape([s ** n for s in p1.shape])


def seq_digits(size: int, n: int) -> np.ndarray:
    """(n, size**n) array of per-position symbols for every sequence index."""
    idx = np.arange(size ** n)
    out = np.empty((n, size ** n), dtype=np.int64)
    for pos in range(n - 1, -1, -1):
        out[pos] = idx % size
        idx = idx // size
    return out


# ---------------------------------------------------------------------------
# The realized protocol pair
# ---------------------------------------------------------------------------

class ProtocolPair:
    """Factored exact representation of Protocols A and B for one realized
    binning (built through `build_protocols`)."""

    def __init__(self, source: JointDist, scheme: SchemeParams,
                 config: BinningConfig, realization: BinningRealization):
        sizes = [a.size for a in source.variables] + [scheme.v_size, scheme.u_size]
        bits = config.n * sum(math.log2(s) for s in sizes)
        if bits > SEQ_BUDGET_BITS + 1e-9:
            raise BudgetExceededError(
                f"n * sum(log2 alphabet) = {bits:.2f} bits exceeds the "
                f"{SEQ_BUDGET_BITS:.0f}-bit enumeration budget")
        self.source = source
        self.scheme = scheme
        self.config = config
        self.realization = realization
        self.counts = config.counts
        n = config.n

        x, y, z = source.names
        v, u = scheme.vx.to_names[0], scheme.uv.to_names[0]
        from .probability import compose
        joint1 = compose(source, scheme.vx, scheme.uv)
        self.p1 = joint1                      # single-letter (X,Y,Z,V,U)

        self.pxy_seq = iid_seq_tensor(marginalize(joint1, [x, y]).mass, n)
        self.pxz_seq = iid_seq_tensor(marginalize(joint1, [x, z]).mass, n)
        self.px_seq = self.pxy_seq.sum(axis=1)
        self.pyvu_seq = iid_seq_tensor(marginalize(joint1, [y, v, u]).mass, n)
        self.pxzvu_seq = iid_seq_tensor(marginalize(joint1, [x, z, v, u]).mass, n)

        def kron_power(mat, n):
            out = np.array([[1.0]])
            for _ in range(n):
                out = np.kron(out, mat)
            return out

        self.pv_x_seq = kron_power(scheme.vx.kernel, n)   # (Xn, Vn)
        self.pu_v_seq = kron_power(scheme.uv.kernel, n)   # (Vn, Un)

        c = self.counts
        self.n_cells = c["f1"] * c["k"] * c["kr"] * c["f2"]
        if self.px_seq.shape[0] * self.n_cells > TABLE_BUDGET:
            raise BudgetExceededError("bin-cell table exceeds the budget")

        r = realization
        # T(f2 | v^n): probability of each public u-bin given v^n
        nv, nu = self.pv_x_seq.shape[1], self.pu_v_seq.shape[1]
        self.t_f2 = np.zeros((nv, c["f2"]))
        np.add.at(self.t_f2, (slice(None), r.u_f2), self.pu_v_seq)
        # u-posterior sliced by f2, with uniform fallback rows flagged
        self.pu_fb = np.zeros((nv, c["f2"], nu))
        for ui in range(nu):
            self.pu_fb[:, r.u_f2[ui], ui] = self.pu_v_seq[:, ui]
        self.u_fallback_rows = 0
        with np.errstate(invalid="ignore", divide="ignore"):
            self.pu_fb /= self.t_f2[:, :, None]
        bad = self.t_f2 <= 0
        self.u_fallback_rows = int(bad.sum())
        self.pu_fb[bad] = 1.0 / nu

        # W(cell | x^n): Protocol A's bin-cell distribution per source seq
        w = np.zeros((self.px_seq.shape[0], c["f1"], c["k"], c["kr"], c["f2"]))
        for vi in range(nv):
            w[:, r.v_f1[vi], r.v_k[vi], r.v_kr[vi], :] += \
                self.pv_x_seq[:, vi, None] * self.t_f2[vi]
        self.w_cell = w
        self.fallback_cells = int((w <= 0).sum())

        self._decoder = None
        self._m_table = None

    # -- deterministic maps -------------------------------------------------

    def _build_decoder(self):
        """Dense MAP decoder tables over (y, m1, f1, k, kr, m2, f2)."""
        c = self.counts
        r = self.realization
        ny, nv, nu = (self.pyvu_seq.shape[0], self.pv_x_seq.shape[1],
                      self.pu_v_seq.shape[1])
        shape = (ny, c["m1"], c["f1"], c["k"], c["kr"], c["m2"], c["f2"])
        if math.prod(shape) > TABLE_BUDGET:
            raise BudgetExceededError("decoder table exceeds the budget")
        dec_v = np.full(shape, -1, dtype=np.int64)
        dec_u = np.full(shape, -1, dtype=np.int64)
        best = np.full(shape, -1.0)
        # iterate u-major then v so ties keep the lexicographically
        # smallest (u_hat, v_hat)
        for ui in range(nu):
            ku = (r.u_m2[ui], r.u_f2[ui])
            for vi in range(nv):
                kv = (r.v_m1[vi], r.v_f1[vi], r.v_k[vi], r.v_kr[vi])
                idx = (slice(None),) + kv[:1] + kv[1:] + ku
                post = self.pyvu_seq[:, vi, ui]
                sel = post > best[idx]
                if np.any(sel):
                    bslice = best[idx]
                    bslice[sel] = post[sel]
                    best[idx] = bslice
                    vslice = dec_v[idx]
                    vslice[sel] = vi
                    dec_v[idx] = vslice
                    uslice = dec_u[idx]
                    uslice[sel] = ui
                    dec_u[idx] = uslice
        self._decoder = (dec_v, dec_u)

    @property
    def decoder(self):
        if self._decoder is None:
            self._build_decoder()
        return self._decoder

    def decode(self, y_index: int, m1: int, m2: int, f1: int, f2: int,
               k: int, kr: int = 0):
        """Exact MAP decode; returns (u_hat, v_hat) sequence indices or
        None when no sequence pair is consistent with all bins."""
        dec_v, dec_u = self.decoder
        vi = int(dec_v[y_index, m1, f1, k, kr, m2, f2])
        ui = int(dec_u[y_index, m1, f1, k, kr, m2, f2])
        if vi < 0:
            return None
        return ui, vi

    # -- Protocol A ----------------------------------------------------------

    def sequence_marginal_a(self) -> np.ndarray:
        """Protocol A's (X^n,Y^n,Z^n,U^n,V^n) marginal: exactly the i.i.d.
        product tensor for every realization."""
        x, y, z = self.source.names
        v, u = self.scheme.vx.to_names[0], self.scheme.uv.to_names[0]
        return iid_seq_tensor(
            marginalize(self.p1, [x, y, z, u, v]).mass, self.config.n)

    def decode_error_probability(self) -> float:
        """Exact Protocol A probability that the MAP decoder misses
        (u^n, v^n); decode failures count as errors."""
        dec_v, dec_u = self.decoder
        r = self.realization
        ny, nv, nu = self.pyvu_seq.shape
        err = 0.0
        for vi in range(nv):
            kv = (r.v_m1[vi], r.v_f1[vi], r.v_k[vi], r.v_kr[vi])
            for ui in range(nu):
                ku = (r.u_m2[ui], r.u_f2[ui])
                hit = ((dec_v[:, kv[0], kv[1], kv[2], kv[3], ku[0], ku[1]] == vi)
                       & (dec_u[:, kv[0], kv[1], kv[2], kv[3], ku[0], ku[1]] == ui))
                err += float(self.pyvu_seq[~hit, vi, ui].sum())
        return err

    def security_gap(self) -> float:
        """Norm-1 distance between Protocol A's (x^n,z^n,u^n,m1,f1)
        marginal and the ideal p(x^n,z^n,u^n) times uniform indices."""
        c = self.counts
        r = self.realization
        nx, nz, nv, nu = self.pxzvu_seq.shape
        g = np.zeros((nx, nz, nu, c["m1"], c["f1"]))
        for vi in range(nv):
            g[:, :, :, r.v_m1[vi], r.v_f1[vi]] += self.pxzvu_seq[:, :, vi, :]
        ideal = self.pxzvu_seq.sum(axis=2)[:, :, :, None, None] \
            / (c["m1"] * c["f1"])
        return float(np.abs(g - ideal).sum())

    # -- Protocol B ----------------------------------------------------------

    def tv_reduced(self) -> float:
        """Total variation between the two protocols, computed on the
        (x^n, y^n, z^n, f1, k, k', f2) marginal exactly as the reduction
        identity licenses."""
        unit = 1.0 / self.n_cells
        diff = np.abs(self.w_cell - unit).reshape(self.px_seq.shape[0], -1)
        return float(self.px_seq @ diff.sum(axis=1))

    def tv_full(self) -> float:
        """Total variation summed over the full factored support
        (x,y,z,u,v sequences and all bin indices); the remaining protocol
        variables are identical deterministic maps under both protocols
        and cannot change the distance.  Only feasible at tiny n."""
        x, y, z = self.source.names
        v, u = self.scheme.vx.to_names[0], self.scheme.uv.to_names[0]
        pxyzvu = iid_seq_tensor(
            marginalize(self.p1, [x, y, z, v, u]).mass, self.config.n)
        nx, ny, nz, nv, nu = pxyzvu.shape
        c = self.counts
        cells = self.n_cells
        if pxyzvu.size * cells > TABLE_BUDGET:
            raise BudgetExceededError("full-space tensor exceeds the budget")
        pxyz = pxyzvu.sum(axis=(3, 4))
        r = self.realization
        shape = (nx, ny, nz, nv, nu, c["f1"], c["k"], c["kr"], c["f2"])
        a_full = np.zeros(shape)
        b_full = np.zeros(shape)
        unit = 1.0 / cells
        cond_b = self._conditional_b()    # (nx, f1, k, kr, f2, nv, nu)
        for f1 in range(c["f1"]):
            for k in range(c["k"]):
                for kr in range(c["kr"]):
                    for f2 in range(c["f2"]):
                        sel_v = ((r.v_f1 == f1) & (r.v_k == k)
                                 & (r.v_kr == kr))
                        sel_u = r.u_f2 == f2
                        a_slice = pxyzvu * sel_v[None, None, None, :, None] \
                            * sel_u[None, None, None, None, :]
                        a_full[:, :, :, :, :, f1, k, kr, f2] = a_slice
                        b_full[:, :, :, :, :, f1, k, kr, f2] = (
                            unit * pxyz[:, :, :, None, None]
                            * cond_b[:, f1, k, kr, f2, :, :][:, None, None])
        return float(np.abs(a_full - b_full).sum())

    def _conditional_b(self) -> np.ndarray:
        """Protocol B's exact (v^n,u^n) conditional per (x^n, cell)."""
        c = self.counts
        r = self.realization
        nx, nv = self.pv_x_seq.shape
        nu = self.pu_v_seq.shape[1]
        out = np.zeros((nx, c["f1"], c["k"], c["kr"], c["f2"], nv, nu))
        for vi in range(nv):
            cell = (r.v_f1[vi], r.v_k[vi], r.v_kr[vi])
            for f2 in range(c["f2"]):
                sel_u = r.u_f2 == f2
                out[:, cell[0], cell[1], cell[2], f2, vi, sel_u] = (
                    self.pv_x_seq[:, vi, None]
                    * self.pu_v_seq[vi, None, sel_u])
        with np.errstate(invalid="ignore", divide="ignore"):
            out /= self.w_cell[:, :, :, :, :, None, None]
        fb = self.w_cell <= 0
        if np.any(fb):
            fb_cond = np.einsum("vfu->fvu",
                                self.pu_fb * (1.0 / nv))
            out[fb] = fb_cond[np.nonzero(fb)[4]]
        return out

    def _message_table(self) -> np.ndarray:
        """P_B(m1, m2, f1, f2, k' | x^n), the secret key marginalized."""
        if self._m_table is not None:
            return self._m_table
        c = self.counts
        r = self.realization
        nx, nv = self.pv_x_seq.shape
        nu = self.pu_v_seq.shape[1]
        shape = (nx, c["m1"], c["m2"], c["f1"], c["f2"], c["kr"])
        if math.prod(shape) > TABLE_BUDGET:
            raise BudgetExceededError("message table exceeds the budget")
        unit = 1.0 / self.n_cells
        m = np.zeros(shape)
        for vi in range(nv):
            cell_v = (r.v_f1[vi], r.v_k[vi], r.v_kr[vi])
            w = self.w_cell[:, cell_v[0], cell_v[1], cell_v[2], :]  # (nx,f2)
            with np.errstate(invalid="ignore", divide="ignore"):
                base = unit * self.pv_x_seq[:, vi, None] / w
            base[w <= 0] = 0.0
            for ui in range(nu):
                mass = base[:, r.u_f2[ui]] * self.pu_v_seq[vi, ui]
                m[:, r.v_m1[vi], r.u_m2[ui], cell_v[0], r.u_f2[ui],
                  cell_v[2]] += mass
        # fallback cells: uniform v then the f2-sliced u-posterior
        fb = self.w_cell <= 0
        if np.any(fb):
            q_fb = self._fallback_message_dist()   # (f2, m1, m2)
            fb_count = fb.sum(axis=2)              # (nx, f1, kr_, f2) summed over k
            for f1 in range(c["f1"]):
                for kr in range(c["kr"]):
                    for f2 in range(c["f2"]):
                        cnt = fb_count[:, f1, kr, f2]
                        if not np.any(cnt):
                            continue
                        m[:, :, :, f1, f2, kr] += (
                            unit * cnt[:, None, None] * q_fb[f2][None])
        self._m_table = m
        return m

    def _fallback_message_dist(self) -> np.ndarray:
        """(f2, m1, m2) message distribution of the uniform-v fallback."""
        c = self.counts
        r = self.realization
        nv, nu = self.pu_v_seq.shape
        q = np.zeros((c["f2"], c["m1"], c["m2"]))
        for vi in range(nv):
            for f2 in range(c["f2"]):
                row = self.pu_fb[vi, f2]
                np.add.at(q[f2, r.v_m1[vi]], r.u_m2, row / nv)
        return q

    def equivocation(self) -> float:
        """Exact H(X^n | Z^n, M1, M2, F1, F2, K') / n under Protocol B."""
        m = self._message_table()
        nx, nz = self.pxz_seq.shape
        if nx * nz * math.prod(m.shape[1:]) > TABLE_BUDGET:
            raise BudgetExceededError("equivocation table exceeds the budget")
        joint = self.pxz_seq.reshape(nx, nz, 1) * m.reshape(nx, 1, -1)
        px_cond = joint.sum(axis=0)

        def plogp(a):
            nz_ = a > 0
            return float((a[nz_] * np.log2(a[nz_])).sum())

        h = -plogp(joint) + plogp(px_cond)
        return h / self.config.n

    def distortion(self, d: DistortionMeasure) -> float:
        """Exact E[d(X^n, Xhat^n)] under Protocol B with the realized
        binning and MAP decoding; decode failures reconstruct from the
        lexicographically first sequence pair."""
        c = self.counts
        r = self.realization
        nx, nv = self.pv_x_seq.shape
        nu = self.pu_v_seq.shape[1]
        ny = self.pxy_seq.shape[1]
        n = self.config.n
        dec_v, _ = self.decoder

        digx = seq_digits(self.source.variables[0].size, n)
        digy = seq_digits(self.source.variables[1].size, n)
        digv = seq_digits(self.scheme.v_size, n)
        recon = np.asarray(self.scheme.recon)
        dbar = np.zeros((nx, ny, nv))
        for pos in range(n):
            xh = recon[digy[pos][:, None], digv[pos][None, :]]   # (ny, nv)
            dbar += d.table[digx[pos][:, None, None], xh[None]]
        dbar /= n

        unit = 1.0 / self.n_cells
        total = 0.0
        for vi in range(nv):
            cell_v = (r.v_f1[vi], r.v_k[vi], r.v_kr[vi])
            w = self.w_cell[:, cell_v[0], cell_v[1], cell_v[2], :]
            with np.errstate(invalid="ignore", divide="ignore"):
                base = unit * self.pv_x_seq[:, vi, None] / w
            base[w <= 0] = 0.0
            for ui in range(nu):
                mass = base[:, r.u_f2[ui]] * self.pu_v_seq[vi, ui]  # (nx,)
                if not np.any(mass):
                    continue
                vhat = dec_v[:, r.v_m1[vi], cell_v[0], cell_v[1], cell_v[2],
                             r.u_m2[ui], r.u_f2[ui]]
                vhat = np.where(vhat < 0, 0, vhat)
                val = dbar[np.arange(nx)[:, None], np.arange(ny)[None, :],
                           vhat[None, :]]
                total += float(np.einsum("xy,x,xy->", self.pxy_seq, mass, val))
        fb = self.w_cell <= 0
        if np.any(fb):
            q_fb = self._fallback_message_dist()
            fb_count = fb.sum(axis=2)
            for f1 in range(c["f1"]):
                for kr in range(c["kr"]):
                    for f2 in range(c["f2"]):
                        cnt = fb_count[:, f1, kr, f2]
                        if not np.any(cnt):
                            continue
                        # the fallback draws ignore k, so any k in the
                        # cell gives the same message distribution; the
                        # decoder still sees the cell's own k value
                        for k in range(c["k"]):
                            sel = fb[:, f1, k, kr, f2]
                            if not np.any(sel):
                                continue
                            for m1 in range(c["m1"]):
                                for m2 in range(c["m2"]):
                                    q = q_fb[f2, m1, m2]
                                    if q <= 0:
                                        continue
                                    vhat = dec_v[:, m1, f1, k, kr, m2, f2]
                                    vhat = np.where(vhat < 0, 0, vhat)
                                    val = dbar[np.arange(nx)[:, None],
                                               np.arange(ny)[None, :],
                                               vhat[None, :]]
                                    total += unit * q * float(np.einsum(
                                        "xy,x,xy->", self.pxy_seq,
                                        sel.astype(float), val))
        return total


def build_protocols(source: JointDist, scheme: SchemeParams,
                    config: BinningConfig,
                    realization: BinningRealization) -> ProtocolPair:
    """Construct the exact factored protocol pair for one realization."""
    return ProtocolPair(source, scheme, config, realization)


def sw_decode(pair: ProtocolPair, y_index: int, m1: int, m2: int, f1: int,
              f2: int, k: int, kr: int = 0):
    """Exact MAP decode of (u^n, v^n) from the decoder's observations;
    None signals the flagged empty-consistent-set outcome."""
    return pair.decode(y_index, m1, m2, f1, f2, k, kr)


def tv_protocols(pair: ProtocolPair) -> float:
    return pair.tv_reduced()


def security_gap(pair: ProtocolPair) -> float:
    return pair.security_gap()


def finite_n_performance(pair: ProtocolPair,
                         d: DistortionMeasure) -> tuple[float, float]:
    """Exact (expected distortion, equivocation bits/symbol) under
    Protocol B for the realized binning."""
    return pair.distortion(d), pair.equivocation()


# ---------------------------------------------------------------------------
# Single-letter rate feasibility
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class RateConstraint:
    name: str
    lhs: float
    sense: str           # "<" or ">"
    rhs: float

    @property
    def satisfied(self) -> bool:
        return self.lhs < self.rhs if self.sense == "<" else self.lhs > self.rhs

    @property
    def slack(self) -> float:
        return self.rhs - self.lhs if self.sense == "<" else self.lhs - self.rhs


@dataclass(frozen=True)
class RateFeasibilityReport:
    constraints: tuple[RateConstraint, ...]
    r0_threshold: float        # I(X;V|Y,U)
    rate_threshold: float      # I(X;V|Y)
    finals_hold: bool
    scan_witness: tuple[float, float, float, float] | None
    scan_nonempty: bool

    @property
    def agreement(self) -> bool:
        return self.finals_hold == self.scan_nonempty


def _single_letter_entropies(source: JointDist, scheme: SchemeParams) -> dict:
    from .probability import compose, cond_entropy, cond_mutual_info
    joint = compose(source, scheme.vx, scheme.uv)
    x, y, z = source.names
    v, u = scheme.vx.to_names[0], scheme.uv.to_names[0]
    return {
        "h_v_x": cond_entropy(joint, [v], [x]),
        "h_u_x": cond_entropy(joint, [u], [x]),
        "h_uv_x": cond_entropy(joint, [u, v], [x]),
        "h_v_yu": cond_entropy(joint, [v], [y, u]),
        "h_u_v": cond_entropy(joint, [u], [v]),
        "h_uv_y": cond_entropy(joint, [u, v], [y]),
        "h_v_xu": cond_entropy(joint, [v], [x, u]),
        "i_xv_yu": cond_mutual_info(joint, [x], [v], [y, u]),
        "i_xv_y": cond_mutual_info(joint, [x], [v], [y]),
    }


def rate_feasibility(source: JointDist, scheme: SchemeParams,
                     config: BinningConfig,
                     scan_step: float = 0.01) -> RateFeasibilityReport:
    """Report the seven sufficient binning-rate inequalities at the
    config's rates, plus a brute-force scan of the rate polytope at fixed
    (R = r1 + r2, r0) that cross-checks the eliminated final pair
    R0 > I(X;V|Y,U), R > I(X;V|Y)."""
    h = _single_letter_entropies(source, scheme)
    r0t = config.total_key_rate
    cons = (
        RateConstraint("r0 + rt1 < H(V|X)", r0t + config.rt1, "<", h["h_v_x"]),
        RateConstraint("rt2 < H(U|X)", config.rt2, "<", h["h_u_x"]),
        RateConstraint("r0 + rt1 + rt2 < H(U,V|X)",
                       r0t + config.rt1 + config.rt2, "<", h["h_uv_x"]),
        RateConstraint("r0 + r1 + rt1 > H(V|Y,U)",
                       r0t + config.r1 + config.rt1, ">", h["h_v_yu"]),
        RateConstraint("r2 + rt2 > H(U|V)",
                       config.r2 + config.rt2, ">", h["h_u_v"]),
        RateConstraint("r0 + r1 + r2 + rt1 + rt2 > H(U,V|Y)",
                       r0t + config.r1 + config.r2 + config.rt1 + config.rt2,
                       ">", h["h_uv_y"]),
        RateConstraint("r1 + rt1 < H(V|X,U)",
                       config.r1 + config.rt1, "<", h["h_v_xu"]),
    )
    finals = r0t > h["i_xv_yu"] and config.r1 + config.r2 > h["i_xv_y"]

    witness = _scan_rate_polytope(h, config.r1 + config.r2, r0t, scan_step)
    return RateFeasibilityReport(
        constraints=cons,
        r0_threshold=h["i_xv_yu"],
        rate_threshold=h["i_xv_y"],
        finals_hold=finals,
        scan_witness=witness,
        scan_nonempty=witness is not None,
    )


def _scan_rate_polytope(h: dict, total_rate: float, r0: float,
                        step: float) -> tuple | None:
    """First grid point of (r1, rt1, rt2) with r2 = R - r1 satisfying all
    seven inequalities strictly, or None."""
    r1 = np.arange(0.0, total_rate + step / 2, step)
    rt1 = np.arange(0.0, h["h_v_x"] + step, step)
    rt2 = np.arange(0.0, h["h_u_x"] + step, step)
    a = r1[:, None, None]
    b = rt1[None, :, None]
    c = rt2[None, None, :]
    r2 = total_rate - a
    ok = (
        (r0 + b < h["h_v_x"])
        & (c < h["h_u_x"])
        & (r0 + b + c < h["h_uv_x"])
        & (r0 + a + b > h["h_v_yu"])
        & (r2 + c > h["h_u_v"])
        & (r0 + a + r2 + b + c > h["h_uv_y"])
        & (a + b < h["h_v_xu"])
    )
    hits = np.argwhere(ok)
    if hits.size == 0:
        return None
    i, j, l = hits[0]
    return (float(r1[i]), float(total_rate - r1[i]),
            float(rt1[j]), float(rt2[l]))


def key_regime_selector(source: JointDist, scheme: SchemeParams,
                        key_rate: float) -> tuple[str, float]:
    """Tag HIGH when the key fully covers the second-layer description
    rate I(X;V|Y,U), LOW otherwise; the threshold is reported."""
    threshold = _single_letter_entropies(source, scheme)["i_xv_yu"]
    return ("HIGH" if key_rate > threshold else "LOW"), threshold
