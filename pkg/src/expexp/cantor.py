"""Nested families of slope intervals whose spirals avoid a forbidden arc on
the imaginary axis, with a mass measure and a Mass Distribution Principle
certificate.

Geometry.  With xi(alpha) = p + i + alpha and S_k = (k+1/2)*pi*i + R, the
central projection from p is affine,

    phi_k(p + i + alpha) = Re(p) + D_k*alpha + i*(k+1/2)*pi,
    D_k = (k+1/2)*pi - Im(p),

and psi_k = exp o phi_k lands on the imaginary axis at the k-th crossing of
the spiral of L_alpha(p):  psi_k(xi(alpha)) = (-1)^k * i * exp(Re(p) +
D_k*alpha).  |D psi_k| = |D_k| * exp(Re phi_k).

The forbidden arc I sits at centre c = 2*pi*(j + 1/2) + pi/2, so in signed
mod-1 residue terms the forbidden window is [3/4 - |I|/4pi, 3/4 + |I|/4pi]
regardless of crossing parity.

Arithmetic soundness.  Interval endpoints live on a dyadic grid 2**-scale_bits
(sized per run; a fixed denominator cannot represent depth-3 components at the
auto-chosen N).  Pullbacks of arc endpoints are computed at scale_bits + 64
bits, far below one grid ulp of error, then widened outward by two grid ulps:
every retained point certainly avoids the arc, with a strictly positive
residue margin at each cut.

The per-node survival certificate m(W+)/m(W) >= 1 - 4/N is evaluated from the
closed-form chain (distortion bound, per-step removed measure, short-component
discard), not by enumerating the astronomically many components of the full
avoidance set; the capped tree retains a subset and every reported weight is a
certified upper bound for the mass measure of its node.
"""

from __future__ import annotations

import math
import random
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Iterable, Sequence

import gmpy2
import numpy as np
from gmpy2 import mpfr

from .bigreal import BigReal, Frac, exp_mod_2pi, mpfr_decimal
from .spiral import ObliqueLine, crossings

__all__ = [
    "ArcTooLow",
    "BasePoint",
    "BoxDimension",
    "CantorConfig",
    "CertificateError",
    "ComponentTree",
    "DegenerateProjection",
    "Extinction",
    "ForbiddenBall",
    "InfeasibleInterval",
    "InsufficientScales",
    "InvalidAlpha",
    "MdpResult",
    "Node",
    "box_dimension",
    "build_tree",
    "certify_avoidance",
    "choose_config",
    "dpsi_abs",
    "export_theta",
    "forbidden_ball",
    "load_tree",
    "mdp_check",
    "phi_k",
    "psi_k",
    "refine",
    "save_tree",
    "slope_bound",
    "theta_window_check",
    "tree_partitions",
]

OMEGA = Fraction(3, 4)          # forbidden window centre, in turns
CUT_MARGIN_ULPS = 2             # outward widening of every removed pullback


class InfeasibleInterval(ValueError):
    pass


class Extinction(RuntimeError):
    """No component survived a refinement block (signals a config bug)."""


class ArcTooLow(ValueError):
    pass


class InsufficientScales(ValueError):
    pass


class InvalidAlpha(ValueError):
    pass


class DegenerateProjection(ValueError):
    """p lies on S_k: the central projection to S_k collapses."""


class CertificateError(RuntimeError):
    """A closed-form bound the construction relies on failed numerically."""


# -- exact base-point forms ------------------------------------------------------

@dataclass(frozen=True)
class BasePoint:
    """Base point with exactly representable coordinates.

    re = re_dyadic                     when re_log2pi_q is None
    re = log(2*pi*re_log2pi_q)         otherwise
    im = pi*im_pi  (+ im_dyadic)

    The log(2*pi*q) form makes the Corollary-1 base point exact, so the
    positive-axis residues are literally {theta^j}.
    """

    re_dyadic: Fraction = Fraction(0)
    re_log2pi_q: Fraction | None = None
    im_pi: Fraction = Fraction(0)
    im_dyadic: Fraction = Fraction(0)

    @classmethod
    def origin(cls) -> "BasePoint":
        return cls()

    @classmethod
    def cor1(cls) -> "BasePoint":
        return cls(re_log2pi_q=Fraction(1), im_pi=Fraction(1, 2))

    def conjugate(self) -> "BasePoint":
        return BasePoint(self.re_dyadic, self.re_log2pi_q, -self.im_pi, -self.im_dyadic)

    def re_raw(self, prec: int) -> mpfr:
        with gmpy2.context(precision=prec):
            if self.re_log2pi_q is not None:
                q = self.re_log2pi_q
                return gmpy2.log(2 * gmpy2.const_pi() * q.numerator / mpfr(q.denominator))
            return mpfr(self.re_dyadic.numerator) / self.re_dyadic.denominator

    def im_raw(self, prec: int) -> mpfr:
        with gmpy2.context(precision=prec):
            v = gmpy2.const_pi() * self.im_pi.numerator / mpfr(self.im_pi.denominator)
            if self.im_dyadic:
                v += mpfr(self.im_dyadic.numerator) / self.im_dyadic.denominator
            return v

    def d_rho(self, k: int) -> Fraction | None:
        """D_k / pi when it is exactly rational (dyadic im part zero)."""
        if self.im_dyadic == 0:
            return Fraction(2 * k + 1, 2) - self.im_pi
        return None

    def d_is_zero(self, k: int) -> bool:
        rho = self.d_rho(k)
        return rho is not None and rho == 0

    def d_raw(self, k: int, prec: int) -> mpfr:
        with gmpy2.context(precision=prec):
            rho = self.d_rho(k)
            if rho is not None:
                return gmpy2.const_pi() * rho.numerator / mpfr(rho.denominator)
            return (gmpy2.const_pi() * (2 * k + 1)) / 2 - self.im_raw(prec)

    def render_line(self, alpha, prec: int) -> ObliqueLine:
        """ObliqueLine with this base point and the given slope, for the
        spiral-module oracle."""
        return ObliqueLine(
            BigReal._wrap(self.re_raw(prec), prec),
            BigReal._wrap(self.im_raw(prec), prec),
            BigReal(alpha, prec) if not isinstance(alpha, BigReal) else alpha.with_precision(prec),
        )


# -- projections -------------------------------------------------------------------

def phi_k(p: BasePoint, k: int, alpha, prec: int = 192) -> tuple[BigReal, BigReal]:
    """Central projection of p + i + alpha onto S_k (affine in alpha)."""
    if p.d_is_zero(k):
        raise DegenerateProjection(f"p lies on S_{k}")
    with gmpy2.context(precision=prec):
        a = alpha.raw() if isinstance(alpha, BigReal) else mpfr(alpha)
        re = p.re_raw(prec) + p.d_raw(k, prec) * a
        im = (gmpy2.const_pi() * (2 * k + 1)) / 2
    return BigReal._wrap(re, prec), BigReal._wrap(im, prec)


@dataclass(frozen=True)
class PsiValue:
    sign: int
    log_radius: BigReal
    frac: Frac


def psi_k(p: BasePoint, k: int, alpha, guard_bits: int = 48, prec: int = 192) -> PsiValue:
    """exp(phi_k), reported as a signed imaginary-axis point with residue."""
    re, _ = phi_k(p, k, alpha, prec)
    f = exp_mod_2pi(re, guard_bits)
    sign = 1 if k % 2 == 0 else -1
    if sign < 0:
        f = f.complement()
    return PsiValue(sign=sign, log_radius=re, frac=f)


def dpsi_abs(p: BasePoint, k: int, alpha, prec: int = 192) -> BigReal:
    """|D psi_k| = |D_k| * exp(Re phi_k), closed form."""
    re, _ = phi_k(p, k, alpha, prec)
    with gmpy2.context(precision=prec):
        return BigReal._wrap(abs(p.d_raw(k, prec)) * gmpy2.exp(re.raw()), prec)


# -- configuration ------------------------------------------------------------------

@dataclass(frozen=True)
class CantorConfig:
    p: BasePoint
    alpha0: Fraction
    alpha1: Fraction
    N: int
    k0: int
    C_lower: BigReal
    M_upper: BigReal
    I_length: BigReal
    arc_index: int
    component_cap: int
    conjugated: bool = False

    @property
    def omega(self) -> Fraction:
        # {c / 2pi} for c = 2*pi*(arc_index + 1/2) + pi/2
        return OMEGA

    def arc_center(self, prec: int = 192) -> BigReal:
        with gmpy2.context(precision=prec):
            c = 2 * gmpy2.const_pi() * (self.arc_index + mpfr(3) / 4)
        return BigReal._wrap(c, prec)

    def window_halfwidth(self, prec: int = 192) -> BigReal:
        with gmpy2.context(precision=prec):
            return BigReal._wrap(self.I_length.raw() / (4 * gmpy2.const_pi()), prec)

    def J_length(self) -> Fraction:
        return self.alpha1 - self.alpha0


def _as_fraction(x) -> Fraction:
    if isinstance(x, Fraction):
        return x
    if isinstance(x, int):
        return Fraction(x)
    if isinstance(x, str):
        return Fraction(x)
    if isinstance(x, float):
        return Fraction(x).limit_denominator(10 ** 12)
    raise TypeError(f"cannot interpret {x!r} as an exact endpoint")


def choose_config(p: BasePoint, alpha0, alpha1, component_cap: int = 256,
                  prec: int = 320) -> CantorConfig:
    """Pick k0, the smallest admissible N, the derivative bounds C and M, and
    the arc length N^-4 * C / M, validating every stated condition."""
    a0 = _as_fraction(alpha0)
    a1 = _as_fraction(alpha1)
    if a1 <= a0:
        raise InfeasibleInterval(f"need alpha0 < alpha1, got {a0} >= {a1}")
    conjugated = False
    if a1 <= 0:
        p = p.conjugate()
        a0, a1 = -a1, -a0
        conjugated = True
    if a0 <= 0:
        raise InfeasibleInterval("the interval must not contain 0")

    with gmpy2.context(precision=prec):
        ends = (mpfr(a0.numerator) / a0.denominator, mpfr(a1.numerator) / a1.denominator)
        x = p.re_raw(prec)
        im = p.im_raw(prec)

        def re_phi(k, a):
            return x + p.d_raw(k, prec) * a

        def in_left_halfplane(k):
            return all(re_phi(k, a) < 0 for a in ends)

        k = 0
        if in_left_halfplane(0):
            while in_left_halfplane(k + 1):
                k += 1
        else:
            while not in_left_halfplane(k):
                k -= 1
                if k < -10 ** 7:
                    raise InfeasibleInterval("no left-half-plane projection found")
        k0 = k

        N = max(4, int(2 * abs(k0) + 8 * math.pi) + 1)
        while True:
            conds = (
                mpfr(N) * gmpy2.const_pi() > 2 * abs(im),
                gmpy2.exp(mpfr(N) * gmpy2.const_pi() * ends[0] / 2) > mpfr(N) ** 4,
                N * gmpy2.exp(x) > 1,
                Fraction(1, N * N) < a1 - a0,
            )
            if all(conds):
                break
            N += 1
            if N > 10 ** 6:
                raise InfeasibleInterval("no admissible N below 10^6")

        C = None
        for kk in range(k0 + 1, N + 1):
            if p.d_is_zero(kk):
                continue
            for a in ends:
                v = abs(p.d_raw(kk, prec)) * gmpy2.exp(re_phi(kk, a))
                C = v if C is None or v < C else C
        M = max(abs(p.d_raw(N, prec)) * gmpy2.exp(re_phi(N, a)) for a in ends)
        I_len = gmpy2.next_below(C / (mpfr(N) ** 4 * M))

        # arc placement: centres 2*pi*(j+1/2) + pi/2 all share the translate
        # set {2*pi*(m + 3/4)}; check disjointness once
        nearest = gmpy2.const_pi() / 2        # closest translate point to 0
        if not nearest > 1 + I_len / 2:
            raise ArcTooLow("arc translates meet the unit disc")
        if p.im_dyadic == 0 and (p.im_pi - Fraction(1, 2)) % 1 == 0:
            # exp(p) is purely imaginary: its residue must avoid the window
            sgn_flip = (p.im_pi - Fraction(1, 2)) % 2 != 0
            res = gmpy2.fmod(gmpy2.exp(x) / (2 * gmpy2.const_pi()), mpfr(1))
            if sgn_flip:
                res = (1 - res) if res != 0 else res
            dist = min(abs(res - mpfr(3) / 4), 1 - abs(res - mpfr(3) / 4))
            if not dist > I_len:
                raise ArcTooLow("arc translates hit exp(p)")

    return CantorConfig(
        p=p, alpha0=a0, alpha1=a1, N=N, k0=k0,
        C_lower=BigReal._wrap(C, prec), M_upper=BigReal._wrap(M, prec),
        I_length=BigReal._wrap(I_len, prec),
        arc_index=0, component_cap=component_cap, conjugated=conjugated,
    )


# -- the tree ------------------------------------------------------------------------

@dataclass
class Node:
    lo: int                    # endpoints on the dyadic grid, alpha = v / 2**scale_bits
    hi: int
    weight: mpfr               # certified upper bound for the mass measure
    psi_len: float             # log2 of |psi_{nN}(node)| at its depth
    survival_lb: float | None = None   # filled when the node is refined

    def length(self, scale_bits: int) -> Fraction:
        return Fraction(self.hi - self.lo, 1 << scale_bits)


@dataclass
class ComponentTree:
    config: CantorConfig
    scale_bits: int
    prec: int
    j_lo: int
    j_hi: int
    levels: list = field(default_factory=list)   # levels[n-1]: nodes of W_n
    seed_survival_lb: float = 1.0

    @property
    def depth(self) -> int:
        return len(self.levels)

    def alphas(self, depth: int | None = None) -> list[Fraction]:
        lev = self.levels[-1 if depth is None else depth - 1]
        return [Fraction(n.lo + n.hi, 2 << self.scale_bits) for n in lev]


class _Ctx:
    """Working-precision constants for one construction run."""

    def __init__(self, config: CantorConfig, scale_bits: int, prec: int):
        self.scale_bits = scale_bits
        self.scale = 1 << scale_bits
        self.prec = prec
        with gmpy2.context(precision=prec):
            self.pi = gmpy2.const_pi()
            self.twopi = 2 * self.pi
            self.x = config.p.re_raw(prec)
            self.omega_even = mpfr(OMEGA.numerator) / OMEGA.denominator
            self.omega_odd = 1 - self.omega_even
            self.I_len = mpfr(config.I_length.raw(), prec)
        self.p = config.p
        self._d = {}

    def D(self, k: int) -> mpfr:
        v = self._d.get(k)
        if v is None:
            v = self.p.d_raw(k, self.prec)
            self._d[k] = v
        return v

    def alpha(self, iv: int) -> mpfr:
        with gmpy2.context(precision=self.prec):
            return mpfr(iv) / self.scale

    def re_phi_bounds(self, k: int, lo: int, hi: int) -> tuple[mpfr, mpfr]:
        with gmpy2.context(precision=self.prec):
            D = self.D(k)
            e1 = self.x + D * self.alpha(lo)
            e2 = self.x + D * self.alpha(hi)
            return (e1, e2) if e1 <= e2 else (e2, e1)

    def psi_image_len(self, k: int, lo: int, hi: int) -> mpfr:
        e1, e2 = self.re_phi_bounds(k, lo, hi)
        with gmpy2.context(precision=self.prec):
            return gmpy2.exp(e2) - gmpy2.exp(e1)


def _sweep(ctx: _Ctx, ks: Iterable[int], comps: list[tuple[int, int]],
           cap: int) -> list[tuple[int, int]]:
    """Remove the arc pullbacks for each k in order, keeping at most cap
    components (widest first) after every step.

    Every cut is widened outward so that surviving endpoints keep a residue
    margin of about 2**(-scale_bits/2) at the cutting k: the widening in alpha
    is 2*pi*2**(-scale_bits/2)/|D psi_k|, at least two grid ulps.  Relative to
    the window length this adds a factor below 2**-40, absorbed by the
    survival certificate's inflated arc length.
    """
    with gmpy2.context(precision=ctx.prec):
        whalf = ctx.I_len / 2
        if whalf == 0:
            return comps          # nothing to remove: empty arc
        margin_res = ctx.twopi * mpfr(2) ** (-(ctx.scale_bits // 2))
        for k in ks:
            if ctx.p.d_is_zero(k):
                continue
            D = ctx.D(k)
            omega = ctx.omega_even if k % 2 == 0 else ctx.omega_odd
            out = []
            for (lo, hi) in comps:
                e1, e2 = ctx.re_phi_bounds(k, lo, hi)
                v1, v2 = gmpy2.exp(e1), gmpy2.exp(e2)
                m_lo = max(0, int(gmpy2.floor(v1 / ctx.twopi - omega)) - 1)
                m_hi = int(gmpy2.ceil(v2 / ctx.twopi - omega)) + 1
                cuts = []
                for m in range(m_lo, m_hi + 1):
                    vc = ctx.twopi * (m + omega)
                    va, vb = vc - whalf, vc + whalf
                    if vb < v1 or va > v2:
                        continue
                    aa = (gmpy2.log(va) - ctx.x) / D
                    ab = (gmpy2.log(vb) - ctx.x) / D
                    if ab < aa:
                        aa, ab = ab, aa
                    widen = max(CUT_MARGIN_ULPS,
                                int(gmpy2.ceil(margin_res / (va * abs(D)) * ctx.scale)))
                    ia = int(gmpy2.floor(aa * ctx.scale)) - widen
                    ib = int(gmpy2.ceil(ab * ctx.scale)) + widen
                    cuts.append((ia, ib))
                if not cuts:
                    out.append((lo, hi))
                    continue
                cuts.sort()
                cur = lo
                for (ia, ib) in cuts:
                    if ia > cur:
                        out.append((cur, min(ia, hi)))
                    cur = max(cur, ib)
                    if cur >= hi:
                        break
                if cur < hi:
                    out.append((cur, hi))
            out = [c for c in out if c[1] > c[0]]
            out.sort(key=lambda c: c[1] - c[0], reverse=True)
            comps = sorted(out[:cap])
    return comps


def _survival_lower_bound(ctx: _Ctx, config: CantorConfig, node: tuple[int, int],
                          ks: Sequence[int]) -> float:
    """Closed-form certificate for m(W+)/m(W) over one block."""
    lo, hi = node
    N = config.N
    with gmpy2.context(precision=ctx.prec):
        w_len = mpfr(hi - lo) / ctx.scale
        removed = mpfr(0)
        count_ub = mpfr(1)
        # arc length inflated for the cut widening of _sweep
        arc_eff = ctx.I_len * (1 + mpfr(2) ** -38)
        for k in ks:
            if ctx.p.d_is_zero(k):
                continue
            pl = ctx.psi_image_len(k, lo, hi)
            distortion = gmpy2.exp(abs(ctx.D(k)) * w_len)
            if not distortion < 2:
                raise CertificateError(f"distortion bound 2 fails at k={k}")
            removed += distortion * arc_eff * (1 / ctx.twopi + 1 / pl)
            count_ub += pl / ctx.twopi + 1
        end_len = ctx.psi_image_len(ks[-1], lo, hi)
        small = count_ub * 2 / (mpfr(N) ** 2 * end_len)
        s = 1 - removed - small
    return float(s)


def _scale_bits_for(config: CantorConfig, depth: int) -> int:
    return math.ceil((depth * config.N + 1) * math.pi * float(config.alpha1)
                     / math.log(2)) + 128


def build_tree(config: CantorConfig, depth: int, max_retries: int = 2) -> ComponentTree:
    """Seed W_1 and refine to the requested depth.

    On Extinction the construction is retried with N doubled (the remark that
    N may need to be larger again), up to max_retries times.
    """
    cfg = config
    for attempt in range(max_retries + 1):
        try:
            tree = _seed(cfg, depth)
            while tree.depth < depth:
                refine(tree)
            return tree
        except Extinction:
            if attempt == max_retries:
                raise
            cfg = _with_doubled_N(cfg)
    raise AssertionError("unreachable")


def _with_doubled_N(config: CantorConfig) -> CantorConfig:
    fresh = choose_config(config.p, config.alpha0, config.alpha1,
                          config.component_cap)
    n = max(2 * config.N, fresh.N)
    # recompute the derivative bounds at the forced N
    prec = 320
    with gmpy2.context(precision=prec):
        x = config.p.re_raw(prec)
        ends = (mpfr(config.alpha0.numerator) / config.alpha0.denominator,
                mpfr(config.alpha1.numerator) / config.alpha1.denominator)
        C = None
        for kk in range(config.k0 + 1, n + 1):
            if config.p.d_is_zero(kk):
                continue
            for a in ends:
                v = abs(config.p.d_raw(kk, prec)) * gmpy2.exp(x + config.p.d_raw(kk, prec) * a)
                C = v if C is None or v < C else C
        M = max(abs(config.p.d_raw(n, prec)) * gmpy2.exp(x + config.p.d_raw(n, prec) * a)
                for a in ends)
        I_len = gmpy2.next_below(C / (mpfr(n) ** 4 * M))
    return CantorConfig(
        p=config.p, alpha0=config.alpha0, alpha1=config.alpha1, N=n,
        k0=config.k0, C_lower=BigReal._wrap(C, prec), M_upper=BigReal._wrap(M, prec),
        I_length=BigReal._wrap(I_len, prec), arc_index=config.arc_index,
        component_cap=config.component_cap, conjugated=config.conjugated,
    )


def _seed(config: CantorConfig, depth: int) -> ComponentTree:
    """Stage 1: sweep k = k0+1..N over the centred subinterval J' of length
    1/N^2 and pick the component with the largest psi_N image as W_1."""
    N = config.N
    scale_bits = _scale_bits_for(config, depth)
    prec = scale_bits + 64
    ctx = _Ctx(config, scale_bits, prec)
    mid = (config.alpha0 + config.alpha1) / 2
    j_lo_frac = mid - Fraction(1, 2 * N * N)
    j_lo = math.floor(j_lo_frac * ctx.scale)
    j_hi = j_lo + (ctx.scale // (N * N))
    comps = _sweep(ctx, range(config.k0 + 1, N + 1), [(j_lo, j_hi)],
                   config.component_cap)
    if not comps:
        raise Extinction("stage-1 sweep removed everything")
    with gmpy2.context(precision=prec):
        inv_n2 = 1 / mpfr(N * N)
        best = None
        best_len = None
        for c in comps:
            ln = ctx.psi_image_len(N, *c)
            if best_len is None or ln > best_len:
                best, best_len = c, ln
        if not best_len > inv_n2:
            raise Extinction(
                f"largest stage-1 component has |psi_N| = {float(best_len):.3g} <= 1/N^2"
            )
        weight = mpfr(best[1] - best[0]) / ctx.scale
        removed_est = 1 - sum(c[1] - c[0] for c in comps) / mpfr(j_hi - j_lo)
    tree = ComponentTree(config=config, scale_bits=scale_bits, prec=prec,
                         j_lo=j_lo, j_hi=j_hi)
    tree.seed_survival_lb = float(1 - removed_est)
    tree.levels.append([Node(lo=best[0], hi=best[1], weight=weight,
                             psi_len=float(gmpy2.log2(best_len)))])
    tree._ctx = ctx
    return tree


def refine(tree: ComponentTree) -> ComponentTree:
    """One block: from W_n to W_{n+1}, per-node survival certificate included."""
    config = tree.config
    N = config.N
    n = tree.depth
    ctx = getattr(tree, "_ctx", None)
    if ctx is None or ctx.scale_bits != tree.scale_bits:
        ctx = _Ctx(config, tree.scale_bits, tree.prec)
        tree._ctx = ctx
    ks = list(range(n * N + 1, (n + 1) * N + 1))
    parents = tree.levels[-1]
    cap = config.component_cap
    work_cap = max(8, min(cap, (4 * cap) // max(1, len(parents))))
    new_nodes = []
    with gmpy2.context(precision=ctx.prec):
        inv_n2 = 1 / mpfr(N * N)
    for parent in parents:
        s_lb = _survival_lower_bound(ctx, config, (parent.lo, parent.hi), ks)
        if s_lb <= 1 - 4 / N:
            raise CertificateError(
                f"survival bound {s_lb:.6f} <= 1-4/N at depth {n} node"
            )
        parent.survival_lb = s_lb
        kids = _sweep(ctx, ks, [(parent.lo, parent.hi)], work_cap)
        with gmpy2.context(precision=ctx.prec):
            w_len = mpfr(parent.hi - parent.lo) / ctx.scale
            m_plus_lb = s_lb * w_len
            for (lo, hi) in kids:
                ln = ctx.psi_image_len((n + 1) * N, lo, hi)
                if not ln >= inv_n2:
                    continue
                wt = parent.weight * ((mpfr(hi - lo) / ctx.scale) / m_plus_lb)
                new_nodes.append(Node(lo=lo, hi=hi, weight=wt,
                                      psi_len=float(gmpy2.log2(ln))))
    if not new_nodes:
        raise Extinction(f"no component survived the block to depth {n + 1}")
    new_nodes.sort(key=lambda nd: nd.hi - nd.lo, reverse=True)
    tree.levels.append(sorted(new_nodes[:cap], key=lambda nd: nd.lo))
    return tree


# -- the independent avoidance oracle ------------------------------------------------

def certify_avoidance(tree: ComponentTree, max_nodes: int | None = None,
                      guard_bits: int | None = None) -> float:
    """Cross-check arc avoidance through the spiral module.

    For endpoints and midpoint of each retained deepest interval, computes the
    spiral crossing residues for k0 < k <= depth*N with exp_mod_2pi and
    returns the worst circular distance to the forbidden window (a positive
    value certifies avoidance; compare it against 2**-guard_bits).
    """
    config = tree.config
    scale = 1 << tree.scale_bits
    guard = guard_bits or (tree.scale_bits // 2 + 96)
    prec = tree.scale_bits + 192
    line_prec = prec
    kmax = tree.depth * config.N
    halfw = config.window_halfwidth(192).raw()
    worst = math.inf
    nodes = tree.levels[-1] if max_nodes is None else tree.levels[-1][:max_nodes]
    for nd in nodes:
        for iv in (nd.lo, (nd.lo + nd.hi) // 2, nd.hi):
            alpha = Fraction(iv, scale)
            line = config.p.render_line(alpha, line_prec)
            for c in crossings(line, config.k0 + 1, kmax, guard_bits=guard):
                # margin subtraction at full precision: endpoint margins sit
                # near 2^(-scale_bits/2) and would vanish in float64
                v = c.frac.value.raw()
                with gmpy2.context(precision=max(v.precision, 192)):
                    d = abs(v - mpfr(3) / 4)
                    d = min(d, 1 - d)
                    margin = float(d - halfw)
                worst = min(worst, margin)
    return worst


# -- mass distribution principle -------------------------------------------------------

@dataclass(frozen=True)
class MdpResult:
    passed: bool
    dimension_bound: float
    violation: tuple | None = None    # (n, index, mu, cap)


def mdp_check(partitions, eps: float, beta: float = 2.0) -> MdpResult:
    """Verify mu(P) <= beta * (1+eps)^n * |P| for every provided (n, P).

    partitions: iterable over n = 1, 2, ... of iterables of (length, weight).
    On pass the dimension lower bound 1 - 2*eps is reported; on fail the first
    violating (n, P) is returned as a value, not an error.
    """
    if not (0 < eps < 1):
        raise ValueError("eps must be in (0,1)")
    if beta <= 0:
        raise ValueError("beta must be positive")
    with gmpy2.context(precision=256):
        be = mpfr(beta)
        g = 1 + mpfr(eps)
        for n, parts in enumerate(partitions, start=1):
            growth = be * g ** n
            for idx, (length, weight) in enumerate(parts):
                ln = _to_mpfr(length)
                wt = _to_mpfr(weight)
                if wt > growth * ln:
                    return MdpResult(False, 0.0, (n, idx, float(wt), float(growth * ln)))
    return MdpResult(True, 1 - 2 * eps, None)


def _to_mpfr(x) -> mpfr:
    if isinstance(x, BigReal):
        return x.raw()
    if isinstance(x, Fraction):
        return mpfr(x.numerator) / x.denominator
    return mpfr(x)


def tree_partitions(tree: ComponentTree):
    """The partition sequence P_n = W_n plus zero-weight complement chunks of
    length < 2^-n covering the seed interval J'."""
    scale = 1 << tree.scale_bits
    out = []
    for n, level in enumerate(tree.levels, start=1):
        parts = []
        chunk = Fraction(1, 2 ** n)
        cursor = tree.j_lo
        for nd in level:
            if nd.lo > cursor:
                parts.extend(_chunked(cursor, nd.lo, chunk, scale))
            parts.append((Fraction(nd.hi - nd.lo, scale), nd.weight))
            cursor = nd.hi
        if cursor < tree.j_hi:
            parts.extend(_chunked(cursor, tree.j_hi, chunk, scale))
        out.append(parts)
    return out


def _chunked(lo: int, hi: int, chunk: Fraction, scale: int):
    total = Fraction(hi - lo, scale)
    n_pieces = max(1, math.ceil(total / chunk))
    piece = total / n_pieces
    return [(piece, 0.0)] * n_pieces


# -- forbidden ball (Lemma-4 style open set) -------------------------------------------

@dataclass(frozen=True)
class ForbiddenBall:
    center_im: BigReal       # ball centre x = i*center_im
    radius: BigReal
    slope_bound: BigReal

    def exp_image_center(self) -> tuple[float, float]:
        c = float(self.center_im)
        return (math.cos(c), math.sin(c))


def slope_bound(alpha1) -> BigReal:
    """Bound for the spiral slope in {|Re z| < 1/2, |Im z| > 1/2}: the maximum
    of (1/2 + y|a|)/(y - |a|/2) over y >= 1/2 is (1+|a|)/(1-|a|)."""
    a = abs(float(alpha1))
    if a >= 1:
        raise ValueError("slope bound requires |alpha| < 1")
    prec = 192
    av = BigReal(alpha1, prec) if not isinstance(alpha1, BigReal) else alpha1
    one = BigReal(1, prec)
    return (one + abs(av)) / (one - abs(av))


def forbidden_ball(I_center, I_length, C_slope) -> ForbiddenBall:
    """B(x, |I|/4C) around the arc midpoint x, whose exp-image U misses
    exp(exp(L)) for every certified slope."""
    c = I_center if isinstance(I_center, BigReal) else BigReal(I_center, 192)
    L = I_length if isinstance(I_length, BigReal) else BigReal(I_length, 192)
    Cs = C_slope if isinstance(C_slope, BigReal) else BigReal(C_slope, 192)
    if not Cs > 1:
        raise ValueError("C_slope must exceed 1")
    with gmpy2.context(precision=192):
        tp = 2 * gmpy2.const_pi()
        res = gmpy2.fmod(abs(c.raw()), tp)
        dist0 = min(res, tp - res)
        if not dist0 > 1 + L.raw() / 2:
            raise ArcTooLow("arc translates intersect the unit disc")
        radius = L.raw() / (4 * Cs.raw())
    return ForbiddenBall(center_im=c, radius=BigReal._wrap(radius, 192),
                         slope_bound=Cs)


def ball_hits(line: ObliqueLine, ball: ForbiddenBall, t_lo, t_hi, samples: int,
              guard_bits: int = 64) -> int:
    """Count samples of rho(t) = exp(Sigma(t)) landing in U = exp(B).

    rho(t) in U iff some branch of log rho lies in B:
    (Re Sigma)^2 + dist(Im Sigma - c, 2*pi*Z)^2 < r^2.  A float prescreen on
    log|Re Sigma| rejects nearly everything; survivors are checked in mpfr.
    """
    import numpy as _np
    t0, t1 = float(t_lo), float(t_hi)
    ts = _np.linspace(t0, t1, samples)
    x = float(line.p_re)
    y = float(line.p_im)
    a = float(line.alpha)
    log_r = math.log(float(ball.radius))
    relog = x + a * ts + _np.log(_np.abs(_np.cos(y + ts)) + 1e-300)
    suspect = _np.nonzero(relog < log_r + 2)[0]
    hits = 0
    from .bigreal import required_bits as _rb, twopi as _twopi
    for i in suspect:
        t = ts[int(i)]
        prec = _rb(x + a * t + 1.0, guard_bits) + 64
        with gmpy2.context(precision=prec):
            tv = mpfr(t)
            u = line.p_re.raw() + line.alpha.raw() * tv
            r = gmpy2.exp(u)
            re_s = r * gmpy2.cos(line.p_im.raw() + tv)
            im_s = r * gmpy2.sin(line.p_im.raw() + tv)
            tp = _twopi(prec)
            dd = gmpy2.fmod(im_s - ball.center_im.raw(), tp)
            if dd > tp / 2:
                dd -= tp
            if dd < -tp / 2:
                dd += tp
            if re_s * re_s + dd * dd < ball.radius.raw() ** 2:
                hits += 1
    return hits


# -- box dimension ------------------------------------------------------------------

@dataclass(frozen=True)
class BoxDimension:
    estimate: float
    scales: tuple
    counts: tuple
    caveat: str | None = None


def box_dimension(intervals, pruned: bool = False) -> BoxDimension:
    """Least-squares slope of log(count) against log(1/box size) over dyadic
    scales spanning the family: from two octaves below the overall span down
    to the shortest interval (the coarsest octaves saturate at one box and
    carry no slope information)."""
    iv = [(_as_fraction_pt(a), _as_fraction_pt(b)) for a, b in intervals]
    if not iv:
        raise InsufficientScales("no intervals")
    span = max(b for _, b in iv) - min(a for a, _ in iv)
    min_len = min(b - a for a, b in iv)
    if span <= 0 or min_len <= 0:
        raise InsufficientScales("degenerate interval family")
    s_lo = math.ceil(-_log2_frac(span)) + 2
    s_hi = math.floor(-_log2_frac(min_len))
    if s_hi - s_lo < 3:
        s_hi = s_lo + 3
    scales = list(range(s_lo, s_hi + 1))
    counts = [_box_count(iv, s) for s in scales]
    xs = np.array([s * math.log(2) for s in scales])
    ys = np.log(np.array(counts, dtype=float))
    slope = float(np.polyfit(xs, ys, 1)[0])
    return BoxDimension(estimate=slope, scales=tuple(scales), counts=tuple(counts),
                        caveat="pruned subset" if pruned else None)


def _as_fraction_pt(x) -> Fraction:
    if isinstance(x, Fraction):
        return x
    if isinstance(x, BigReal):
        return x.as_fraction()
    return Fraction(x)


def _log2_frac(f: Fraction) -> float:
    return math.log2(f.numerator) - math.log2(f.denominator)


def _box_count(iv, s: int) -> int:
    scale = 1 << s
    ranges = []
    for a, b in iv:
        j0 = math.floor(a * scale)
        j1 = math.ceil(b * scale) - 1
        ranges.append((j0, max(j0, j1)))
    ranges.sort()
    count = 0
    cur_lo, cur_hi = ranges[0]
    for j0, j1 in ranges[1:]:
        if j0 > cur_hi:
            count += cur_hi - cur_lo + 1
            cur_lo, cur_hi = j0, j1
        else:
            cur_hi = max(cur_hi, j1)
    count += cur_hi - cur_lo + 1
    return count


# -- Corollary-1 export -----------------------------------------------------------------

def export_theta(alpha) -> BigReal:
    """theta = exp(2*pi*alpha) in (1, oo)."""
    a = alpha if isinstance(alpha, BigReal) else BigReal(_as_fraction(alpha), 192)
    if not a > 0:
        raise InvalidAlpha("alpha must be positive")
    prec = max(a.precision_bits + 64, 192)
    with gmpy2.context(precision=prec):
        return BigReal._wrap(gmpy2.exp(2 * gmpy2.const_pi() * a.raw()), prec)


def theta_window_check(alpha, k_max: int, window_center=OMEGA,
                       window_halfwidth=None, guard_bits: int = 64) -> float:
    """Worst circular distance of {theta^k}, k = 0..k_max, from the forbidden
    window centre, minus the half width; directly by high-precision powering."""
    a = _as_fraction(alpha) if not isinstance(alpha, BigReal) else alpha.as_fraction()
    prec = int(k_max * 2 * math.pi * float(a) / math.log(2)) + guard_bits + 128
    wc = float(window_center)
    hw = float(window_halfwidth) if window_halfwidth is not None else 0.0
    with gmpy2.context(precision=prec):
        av = mpfr(a.numerator) / a.denominator
        theta = gmpy2.exp(2 * gmpy2.const_pi() * av)
        r = mpfr(1)
        worst = math.inf
        for _ in range(k_max + 1):
            fr = float(gmpy2.fmod(r, mpfr(1)))
            d = abs(fr - wc)
            worst = min(worst, min(d, 1 - d) - hw)
            r = r * theta
    return worst


# -- serialization ------------------------------------------------------------------

def save_tree(tree: ComponentTree, path) -> None:
    cfg = tree.config
    lines = [
        f"# expexp-tree v1",
        f"# re_dyadic {cfg.p.re_dyadic}",
        f"# re_log2pi_q {cfg.p.re_log2pi_q if cfg.p.re_log2pi_q is not None else '-'}",
        f"# im_pi {cfg.p.im_pi}",
        f"# im_dyadic {cfg.p.im_dyadic}",
        f"# alpha0 {cfg.alpha0}",
        f"# alpha1 {cfg.alpha1}",
        f"# N {cfg.N}",
        f"# k0 {cfg.k0}",
        f"# C_lower {cfg.C_lower.decimal()}",
        f"# M_upper {cfg.M_upper.decimal()}",
        f"# I_length {cfg.I_length.decimal()}",
        f"# arc_index {cfg.arc_index}",
        f"# component_cap {cfg.component_cap}",
        f"# conjugated {int(cfg.conjugated)}",
        f"# scale_bits {tree.scale_bits}",
        f"# j_lo {tree.j_lo:x}",
        f"# j_hi {tree.j_hi:x}",
        f"# seed_survival_lb {tree.seed_survival_lb!r}",
    ]
    for n, level in enumerate(tree.levels, start=1):
        for nd in level:
            surv = "-" if nd.survival_lb is None else repr(nd.survival_lb)
            lines.append(f"{n}\t{nd.lo:x}\t{nd.hi:x}\t{nd.psi_len!r}\t"
                         f"{mpfr_decimal(nd.weight, tree.prec)}\t{surv}")
    with open(path, "w") as fh:
        fh.write("\n".join(lines) + "\n")


def load_tree(path) -> ComponentTree:
    meta = {}
    rows = []
    with open(path) as fh:
        for raw in fh:
            raw = raw.rstrip("\n")
            if not raw:
                continue
            if raw.startswith("# "):
                parts = raw[2:].split(None, 1)
                if len(parts) == 2:
                    meta[parts[0]] = parts[1]
                continue
            rows.append(raw.split("\t"))
    p = BasePoint(
        re_dyadic=Fraction(meta["re_dyadic"]),
        re_log2pi_q=None if meta["re_log2pi_q"] == "-" else Fraction(meta["re_log2pi_q"]),
        im_pi=Fraction(meta["im_pi"]),
        im_dyadic=Fraction(meta["im_dyadic"]),
    )
    prec = 320
    cfg = CantorConfig(
        p=p, alpha0=Fraction(meta["alpha0"]), alpha1=Fraction(meta["alpha1"]),
        N=int(meta["N"]), k0=int(meta["k0"]),
        C_lower=BigReal(meta["C_lower"], prec), M_upper=BigReal(meta["M_upper"], prec),
        I_length=BigReal(meta["I_length"], prec), arc_index=int(meta["arc_index"]),
        component_cap=int(meta["component_cap"]), conjugated=bool(int(meta["conjugated"])),
    )
    scale_bits = int(meta["scale_bits"])
    tree = ComponentTree(config=cfg, scale_bits=scale_bits, prec=scale_bits + 64,
                         j_lo=int(meta["j_lo"], 16), j_hi=int(meta["j_hi"], 16))
    tree.seed_survival_lb = float(meta["seed_survival_lb"])
    levels: dict[int, list[Node]] = {}
    for n_s, lo_s, hi_s, plen_s, w_s, surv_s in rows:
        with gmpy2.context(precision=tree.prec):
            w = mpfr(w_s)
        levels.setdefault(int(n_s), []).append(Node(
            lo=int(lo_s, 16), hi=int(hi_s, 16), weight=w, psi_len=float(plen_s),
            survival_lb=None if surv_s == "-" else float(surv_s),
        ))
    for n in sorted(levels):
        tree.levels.append(sorted(levels[n], key=lambda nd: nd.lo))
    return tree


def sample_retained_alphas(tree: ComponentTree, count: int, seed: int = 1) -> list[Fraction]:
    """Deterministic sample of midpoints of retained deepest intervals."""
    mids = tree.alphas()
    rng = random.Random(seed)
    if count >= len(mids):
        return mids
    return rng.sample(mids, count)
