"""Density certificates at finite resolution for exp(exp(line)).

The image of the strip component through crossing k is a near-radial spoke in
the annulus A_R; in (log radius, angle) coordinates it is the graph

    angle(u) = 2*pi*frac_k - alpha*u + O(u^2 / r_k),   u in [-log R, log R].

Painting marks grid cells the spoke certainly enters (error margins shrink the
painted span, never grow it), so covered_fraction is a sound lower bound.
The verdict is always "covered at resolution (n_logr, n_theta, K)", never an
unconditional "dense".
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from functools import lru_cache

import gmpy2
import numpy as np
from gmpy2 import mpfr

from .bigreal import BigReal, Frac, required_bits, precision_ceiling, PrecisionOverflow, twopi
from .spiral import (
    DegenerateStrip,
    ObliqueLine,
    crossing_time,
    outward_indices,
    residue_chain,
    strip_segment,
)

__all__ = [
    "AnnulusGrid",
    "ChampernowneLine",
    "InvalidTarget",
    "WitnessNotFound",
    "WitnessResult",
    "champernowne_bits",
    "champernowne_line",
    "cor1_line",
    "shift_frac_oracle",
    "max_gap",
    "star_discrepancy",
    "paint_coverage",
    "witness",
]


class InvalidTarget(ValueError):
    """exp(exp(z)) omits 0: there is no witness for target 0."""


class WitnessNotFound(RuntimeError):
    def __init__(self, msg, best_distance=None, scanned=0):
        super().__init__(msg)
        self.best_distance = best_distance
        self.scanned = scanned


# -- annulus grid ---------------------------------------------------------------

class AnnulusGrid:
    """Boolean coverage bitmap over A_R in (log radius, angle) cells.

    Rows split log radius in [-log R, log R]; columns split angle in [0, 2pi).
    Painting is idempotent; merging two grids is the cell-wise OR.
    """

    def __init__(self, R, n_logr: int, n_theta: int):
        if float(R) <= 1:
            raise ValueError("R must be > 1")
        if n_logr < 1 or n_theta < 1:
            raise ValueError("grid dimensions must be positive")
        self.R = R
        self.n_logr = n_logr
        self.n_theta = n_theta
        self.bitmap = np.zeros((n_logr, n_theta), dtype=bool)

    @property
    def log_R(self) -> float:
        return math.log(float(self.R))

    def covered_fraction(self) -> float:
        return float(self.bitmap.mean())

    def merge(self, other: "AnnulusGrid") -> "AnnulusGrid":
        if (self.n_logr, self.n_theta) != (other.n_logr, other.n_theta):
            raise ValueError("grid shapes differ")
        self.bitmap |= other.bitmap
        return self

    def to_text(self) -> str:
        """One row per log-radius band (lowest first), characters 0/1."""
        return "\n".join("".join("1" if b else "0" for b in row) for row in self.bitmap)

    @classmethod
    def from_text(cls, text: str, R) -> "AnnulusGrid":
        rows = [r for r in text.strip().splitlines() if r]
        g = cls(R, len(rows), len(rows[0]))
        for i, r in enumerate(rows):
            g.bitmap[i] = np.frombuffer(r.encode(), dtype=np.uint8) == ord("1")
        return g

    def row_edges(self) -> np.ndarray:
        return np.linspace(-self.log_R, self.log_R, self.n_logr + 1)

    def paint_point(self, logr: float, theta: float, margin: float) -> None:
        """Paint the cell containing (logr, theta) unless within margin of a
        cell boundary (under-approximation keeps coverage sound)."""
        lR = self.log_R
        if not (-lR + margin < logr < lR - margin):
            return
        ru = (logr + lR) / (2 * lR) * self.n_logr
        if min(ru % 1.0, 1.0 - ru % 1.0) * (2 * lR / self.n_logr) < margin:
            return
        tu = (theta / (2 * math.pi)) % 1.0 * self.n_theta
        if min(tu % 1.0, 1.0 - tu % 1.0) * (2 * math.pi / self.n_theta) < margin:
            return
        self.bitmap[min(int(ru), self.n_logr - 1), min(int(tu), self.n_theta - 1)] = True


# -- the explicit dense curve -----------------------------------------------------

_champ_cache = [""]


def champernowne_bits(n: int) -> str:
    """First n bits of the binary expansion 0.110111001011101111000...:
    the concatenation of the binary strings of 1, 2, 3, ..."""
    if n < 1:
        raise ValueError("n must be >= 1")
    buf = _champ_cache[0]
    if len(buf) < n:
        parts = []
        total = 0
        i = 1
        while total < max(n, 2 * len(buf)):
            s = bin(i)[2:]
            parts.append(s)
            total += len(s)
            i += 1
        buf = "".join(parts)
        _champ_cache[0] = buf
    return buf[:n]


def shift_frac_oracle(k: int, precision_bits: int = 64) -> Frac:
    """{2^k a} by pure bit shift: drop k leading bits of the expansion.

    Exact to precision_bits (truncation, so the true value exceeds the stored
    one by less than 2^-precision_bits).
    """
    if k < 0:
        raise ValueError("k must be >= 0")
    if precision_bits < 64:
        raise ValueError("precision_bits must be >= 64")
    window = champernowne_bits(k + precision_bits)[k:]
    num = int(window, 2)
    val = BigReal(Fraction(num, 1 << precision_bits), precision_bits + 2)
    return Frac(val, BigReal(Fraction(1, 1 << precision_bits), 32))


@dataclass(frozen=True)
class ChampernowneLine:
    """The explicit dense line: base log(2*pi*a) + (pi/2)i, slope log2/(2*pi).

    a is the exact dyadic prefix of the expansion at prefix_bits, so the even
    outward crossings of the stored line have residues {2^j a} up to the
    prefix truncation; frac_sequence and shift_frac_oracle agree to roughly
    prefix_bits - j/2 bits at crossing j.
    """

    prefix_bits: int
    a: BigReal
    line: ObliqueLine


def champernowne_line(prefix_bits: int = 1200) -> ChampernowneLine:
    bits = champernowne_bits(prefix_bits)
    a = BigReal(Fraction(int(bits, 2), 1 << prefix_bits), prefix_bits + 2)
    prec = prefix_bits + 64
    with gmpy2.context(precision=prec):
        tp = 2 * gmpy2.const_pi()
        p_re = BigReal._wrap(gmpy2.log(tp * a.raw()), prec)
        p_im = BigReal._wrap(gmpy2.const_pi() / 2, prec)
        alpha = BigReal._wrap(gmpy2.log(mpfr(2)) / tp, prec)
    return ChampernowneLine(prefix_bits, a, ObliqueLine(p_re, p_im, alpha))


def cor1_line(alpha="0.1", precision_bits: int = 256) -> ObliqueLine:
    """Corrected Corollary-1 line: base log(2*pi) + (pi/2)i, so the positive
    axis crossings sit at exp(2*pi*alpha*j) * 2*pi*i."""
    with gmpy2.context(precision=precision_bits):
        p_re = BigReal._wrap(gmpy2.log(2 * gmpy2.const_pi()), precision_bits)
        p_im = BigReal._wrap(gmpy2.const_pi() / 2, precision_bits)
    return ObliqueLine(p_re, p_im, BigReal(alpha, precision_bits))


# -- mod-1 statistics -------------------------------------------------------------

def _as_float_array(fracs) -> np.ndarray:
    return np.asarray([float(f) for f in fracs], dtype=float)


def max_gap(fracs) -> float:
    """Largest circular gap between the residues."""
    x = np.sort(_as_float_array(fracs))
    if len(x) == 0:
        raise ValueError("empty residue list")
    if len(x) == 1:
        return 1.0
    g = np.diff(x).max()
    return float(max(g, 1.0 - x[-1] + x[0]))


def star_discrepancy(fracs) -> float:
    """sup over [0, x) of |empirical - x|, by the sorted-sample formula."""
    x = np.sort(_as_float_array(fracs))
    n = len(x)
    if n == 0:
        raise ValueError("empty residue list")
    i = np.arange(1, n + 1)
    return float(np.maximum(i / n - x, x - (i - 1) / n).max())


# -- coverage painting -------------------------------------------------------------

_SMALL_RADIUS_LOG = 16 * math.log(2)   # below e^16, paint via exact polylines


def _paint_linear(grid: AnnulusGrid, fracs, logr, alpha: float, err: float) -> None:
    lR = grid.log_R
    n_t = grid.n_theta
    u_edges = grid.row_edges()
    keep = logr > _SMALL_RADIUS_LOG
    fr = fracs[keep]
    rl = logr[keep]
    if len(fr) == 0:
        return
    # curvature of the true spoke vs the chord, all k at once
    curv = (lR * lR) * (1 + alpha * alpha) * math.exp(abs(alpha) * lR) * np.exp(-rl)
    margin = (err + 2.0 ** -50 + curv / (2 * math.pi)) * n_t   # in column units
    the = fr[:, None] - (alpha / (2 * math.pi)) * u_edges[None, :]   # turns, (K, rows+1)
    lo = np.minimum(the[:, :-1], the[:, 1:]) * n_t
    hi = np.maximum(the[:, :-1], the[:, 1:]) * n_t
    lo = lo + margin[:, None]
    hi = hi - margin[:, None]
    for i in range(grid.n_logr):
        li = lo[:, i]
        hi_i = hi[:, i]
        ok = hi_i >= li
        if ok.any():
            c0 = np.floor(li[ok]).astype(np.int64)
            c1 = np.floor(hi_i[ok]).astype(np.int64)
            width = c1 - c0
            grid.bitmap[i, np.mod(c0, n_t)] = True
            grid.bitmap[i, np.mod(c1, n_t)] = True
            for a_, b_ in zip(c0[width > 1], c1[width > 1]):
                grid.bitmap[i, np.arange(a_ + 1, b_) % n_t] = True
        # near-vertical spokes (alpha ~ 0): span narrower than twice the margin,
        # paint the centre cell when safely away from a column boundary
        narrow = ~ok
        if narrow.any():
            cc = (li[narrow] + hi_i[narrow]) / 2
            dist = np.minimum(cc % 1.0, 1.0 - cc % 1.0)
            good = dist > margin[narrow]
            grid.bitmap[i, np.mod(np.floor(cc[good]).astype(np.int64), n_t)] = True


def _paint_polyline(grid: AnnulusGrid, line: ObliqueLine, k: int, guard_bits: int) -> None:
    samples = 8 * (grid.n_logr + grid.n_theta)
    try:
        seg = strip_segment(line, k, grid.R, samples=samples, guard_bits=guard_bits)
    except DegenerateStrip:
        return
    tp = twopi(max(64, guard_bits + 32))
    margin = 2.0 ** (-guard_bits // 2)
    for re, im in seg.polyline:
        logr = float(re)
        theta = float(gmpy2.fmod(im.raw(), tp))
        grid.paint_point(logr, theta, margin)


def paint_coverage(line: ObliqueLine, K: int, grid: AnnulusGrid,
                   guard_bits: int = 48) -> AnnulusGrid:
    """Paint the image spokes of the first K outward crossings onto the grid.

    Large-radius crossings use the chord model with a certified margin; small
    radii fall back to exact strip-component polylines.  Cells are set only
    when the curve certainly enters them, so the result under-approximates.
    """
    if K < 1:
        raise ValueError("K must be >= 1")
    fracs, signs, logr, err_exp2 = residue_chain(line, K, guard_bits)
    _paint_linear(grid, fracs, logr, float(line.alpha), 2.0 ** err_exp2)
    for j, k in enumerate(outward_indices(line, K)):
        if logr[j] <= _SMALL_RADIUS_LOG:
            _paint_polyline(grid, line, k, guard_bits)
    return grid


# -- constructive witnesses ---------------------------------------------------------

@dataclass(frozen=True)
class WitnessResult:
    t: BigReal
    k: int
    residual: float
    scanned: int


@lru_cache(maxsize=8)
def _chain_cached(line: ObliqueLine, K: int, guard_bits: int):
    return residue_chain(line, K, guard_bits)


def _rho_minus_target(line: ObliqueLine, t: BigReal, zre: mpfr, zim: mpfr,
                      prec: int) -> mpfr:
    """|exp(exp(p + t(i+alpha))) - z| at working precision prec."""
    with gmpy2.context(precision=prec):
        x = line.p_re.raw()
        y = line.p_im.raw()
        a = line.alpha.raw()
        tv = t.raw()
        u = x + a * tv
        r = gmpy2.exp(u)
        phase = y + tv
        re_s = r * gmpy2.cos(phase)
        im_s = r * gmpy2.sin(phase)
        mag = gmpy2.exp(re_s)
        rre = mag * gmpy2.cos(im_s)
        rim = mag * gmpy2.sin(im_s)
        return gmpy2.sqrt((rre - zre) ** 2 + (rim - zim) ** 2)


def witness(line: ObliqueLine, target_re, target_im, eps, K_max: int,
            guard_bits: int = 48) -> WitnessResult:
    """Find t with |exp(exp(p + t(i+alpha))) - target| <= eps.

    Writes target = exp(v); a crossing k can approach the target iff its
    residue matches {(arg z + alpha*log|z|)/2pi}.  Matching crossings are
    refined by Newton on Re Sigma(t) = log|z| and the refined point is
    verified by a direct evaluation at doubled working precision before being
    returned.
    """
    epsf = float(eps)
    if epsf <= 0:
        raise ValueError("eps must be positive")
    zre = mpfr(target_re.raw() if isinstance(target_re, BigReal) else target_re, 256)
    zim = mpfr(target_im.raw() if isinstance(target_im, BigReal) else target_im, 256)
    if zre == 0 and zim == 0:
        raise InvalidTarget("exp(exp(z)) is never 0")
    with gmpy2.context(precision=256):
        log_abs = gmpy2.log(zre * zre + zim * zim) / 2
        arg = gmpy2.atan2(zim, zre)
        alpha_f = float(line.alpha)
        nu = float(gmpy2.fmod((arg + alpha_f * log_abs) / (2 * gmpy2.const_pi()), mpfr(1)))
        nu %= 1.0
    zabs = float(gmpy2.exp(log_abs))
    vabs = float(gmpy2.sqrt(log_abs ** 2 + arg ** 2))

    fracs, signs, logr, err_exp2 = _chain_cached(line, K_max, guard_bits)
    d = np.abs(fracs - nu)
    d = np.minimum(d, 1.0 - d)
    # spec scan window plus the direct distance prediction |z|*2pi*d <= eps
    thresh = max(epsf / (4 * math.pi * max(1.0, vabs)), 0.95 * epsf / (2 * math.pi * zabs))
    cand = np.nonzero(d <= thresh)[0]
    cand = cand[np.argsort(d[cand], kind="stable")][:128]
    ks = outward_indices(line, K_max)

    best = math.inf
    for j in map(int, cand):
        k = ks[j]
        prec1 = required_bits(logr[j] + 1.0, guard_bits) + 64
        if prec1 > precision_ceiling():
            continue
        sign = 1 if k % 2 == 0 else -1
        with gmpy2.context(precision=prec1):
            t_k = crossing_time(line, k, prec1).raw()
            a = line.alpha.raw()
            u_k = line.p_re.raw() + a * t_k
            r_k = gmpy2.exp(u_k)
            u_t = mpfr(log_abs)
            tau = -sign * u_t / r_k
            for _ in range(8):
                g = r_k * gmpy2.exp(a * tau)
                f = -sign * g * gmpy2.sin(tau) - u_t
                fp = -sign * g * (a * gmpy2.sin(tau) + gmpy2.cos(tau))
                step = f / fp
                tau = tau - step
                if abs(step) <= (abs(tau) + 1) * mpfr(2) ** (-prec1 + 16):
                    break
            t = BigReal._wrap(t_k + tau, prec1)
        resid = _rho_minus_target(line, t, zre, zim, 2 * prec1)
        rf = float(resid)
        best = min(best, rf)
        if resid <= epsf:
            return WitnessResult(t=t, k=k, residual=rf, scanned=len(cand))
    raise WitnessNotFound(
        f"no witness within eps={epsf} among {len(cand)} candidate crossings (K_max={K_max})",
        best_distance=None if best is math.inf else best,
        scanned=len(cand),
    )
