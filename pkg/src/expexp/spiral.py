"""Oblique lines L(p, alpha) = {p + t(i+alpha)}, their logarithmic spirals
Sigma(t) = exp(p + t(i+alpha)), and the crossing sequence with the imaginary
axis.

Crossing times are exact: t_k = pi/2 + k*pi - Im(p), where the spiral meets
the axis at w_k = sign * i * exp(x + alpha*t_k), sign = +1 for even k.  The
signed mod-1 residue of w_k/(2*pi*i) is {r/2pi} on the positive axis and
1 - {r/2pi} on the negative axis.

Near a crossing the stable parametrisation is

    Re Sigma(t_k + tau) = -sign * r_k * exp(alpha*tau) * sin(tau)
    Im Sigma(t_k + tau) =  sign * r_k * exp(alpha*tau) * cos(tau)

which avoids evaluating cos(y + t) at a near-zero; all strip geometry goes
through it.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import gmpy2
import numpy as np
from gmpy2 import mpfr

from .bigreal import (
    BigReal,
    Frac,
    PrecisionOverflow,
    exp_mod_2pi,
    precision_ceiling,
    required_bits,
    twopi,
)

__all__ = [
    "ObliqueLine",
    "Crossing",
    "StripSegment",
    "DegenerateStrip",
    "crossings",
    "frac_sequence",
    "residue_chain",
    "strip_segment",
    "crossing_time",
    "log_radius",
]


class DegenerateStrip(RuntimeError):
    """The spiral component through w_k never leaves the strip inward."""


@dataclass(frozen=True)
class ObliqueLine:
    """The line {p + t(i + alpha)}; oblique means alpha != 0.

    alpha = 0 (vertical line, circle image) is accepted and flagged so the
    circle-based sanity tests can share the code paths.
    """

    p_re: BigReal
    p_im: BigReal
    alpha: BigReal

    @property
    def is_oblique(self) -> bool:
        return not self.alpha.is_zero()

    def precision_bits(self) -> int:
        return max(self.p_re.precision_bits, self.p_im.precision_bits,
                   self.alpha.precision_bits)


def make_line(p_re, p_im, alpha, precision_bits: int = 192) -> ObliqueLine:
    """Line from decimal strings / numbers, fields rendered at one precision."""
    return ObliqueLine(
        BigReal(p_re, precision_bits),
        BigReal(p_im, precision_bits),
        BigReal(alpha, precision_bits),
    )


@dataclass(frozen=True)
class Crossing:
    k: int
    t: BigReal
    log_radius: BigReal
    sign: int
    frac: Frac


def _sign_of(k: int) -> int:
    return 1 if k % 2 == 0 else -1


def crossing_time(line: ObliqueLine, k: int, prec: int) -> BigReal:
    """t_k = pi/2 + k*pi - Im(p), exact at a widened working precision.

    The precision is padded so that scaling pi by (2k+1)/2 and subtracting the
    exact dyadic Im(p) incur no rounding: consecutive times then differ by the
    stored pi exactly."""
    y_msb = line.p_im.exponent + line.p_im.mantissa.bit_length()
    wide = prec + max(8, abs(2 * k + 1).bit_length()) + line.p_im.precision_bits \
        + max(0, y_msb) + 8
    with gmpy2.context(precision=wide):
        pi = gmpy2.const_pi(prec)
        t = pi * (2 * k + 1) / 2 - line.p_im.raw()
    return BigReal._wrap(t, wide)


def log_radius(line: ObliqueLine, k: int, prec: int) -> BigReal:
    t = crossing_time(line, k, prec)
    return line.p_re.with_precision(prec) + line.alpha.with_precision(prec) * t


def _u_estimate(line: ObliqueLine, k: int) -> float:
    t = math.pi / 2 + k * math.pi - float(line.p_im)
    return float(line.p_re) + float(line.alpha) * t


def crossings(line: ObliqueLine, k_min: int, k_max: int, guard_bits: int = 48) -> list[Crossing]:
    """Crossings for k in [k_min, k_max], each at its own certified precision."""
    if k_min > k_max:
        raise ValueError("k_min must be <= k_max")
    out = []
    for k in range(k_min, k_max + 1):
        u_up = _u_estimate(line, k) + 1.0
        prec = required_bits(u_up, guard_bits)
        if prec > precision_ceiling():
            raise PrecisionOverflow(f"crossing k={k} needs {prec} bits")
        t = crossing_time(line, k, prec)
        u = line.p_re.with_precision(prec) + line.alpha.with_precision(prec) * t
        f = exp_mod_2pi(u, guard_bits)
        if k % 2 != 0:
            f = f.complement()
        out.append(Crossing(k=k, t=t, log_radius=u, sign=_sign_of(k), frac=f))
    return out


def outward_indices(line: ObliqueLine, count: int) -> list[int]:
    """Crossing indices ordered outward from k=0.

    For alpha > 0 the radius increases with k; for alpha < 0 it increases as k
    decreases, so callers receive k = 0, -1, -2, ... (documented convention).
    """
    if float(line.alpha) >= 0:
        return list(range(count))
    return [-j for j in range(count)]


def frac_sequence(line: ObliqueLine, K: int, guard_bits: int = 48) -> list[Frac]:
    """Signed residues of the first K outward crossings, per-k precision."""
    if K < 1:
        raise ValueError("K must be >= 1")
    ks = outward_indices(line, K)
    lo, hi = min(ks), max(ks)
    xs = crossings(line, lo, hi, guard_bits)
    by_k = {c.k: c for c in xs}
    return [by_k[k].frac for k in ks]


def residue_chain(line: ObliqueLine, K: int, guard_bits: int = 48):
    """Fast residue sequence for the first K outward crossings.

    One exp sets r_0, one exp sets the per-half-turn factor, and each step is
    a multiply plus a reduction mod 2pi at a single working precision.  The
    accumulated relative error after j steps is < (2j+4)*2^-P, absorbed by
    sizing P = required_bits(u_max) + ceil(log2(K+2)).

    Returns (fracs, signs, log_radii, err_exp2): float64 arrays plus the body
    error bound as a power-of-two exponent (consumers adding float64 rounding
    should also budget 2^-52).
    """
    if K < 1:
        raise ValueError("K must be >= 1")
    ks = outward_indices(line, K)
    u_last = _u_estimate(line, ks[-1])
    u_first = _u_estimate(line, ks[0])
    u_max = max(u_first, u_last) + 1.0
    prec = required_bits(u_max, guard_bits) + max(8, int(math.ceil(math.log2(K + 2))))
    if prec > precision_ceiling():
        raise PrecisionOverflow(f"residue chain to K={K} needs {prec} bits")
    tp = twopi(prec)
    with gmpy2.context(precision=prec):
        t0 = crossing_time(line, ks[0], prec).raw()
        u0 = line.p_re.raw() + line.alpha.raw() * t0
        r = gmpy2.exp(u0)
        step = gmpy2.exp(line.alpha.raw() * gmpy2.const_pi() * (1 if ks[-1] >= ks[0] else -1))
        fracs = np.empty(K)
        signs = np.empty(K, dtype=np.int8)
        logr = np.empty(K)
        du = float(line.alpha) * math.pi * (1 if ks[-1] >= ks[0] else -1)
        u_f = float(u0)
        for j, k in enumerate(ks):
            s = gmpy2.fmod(r, tp)
            f = float(s / tp)
            if k % 2 == 0:
                fracs[j] = f
                signs[j] = 1
            else:
                fracs[j] = (1.0 - f) % 1.0
                signs[j] = -1
            logr[j] = u_f
            r = r * step
            u_f += du
    err_exp2 = -(guard_bits + 24)
    return fracs, signs, logr, err_exp2


@dataclass(frozen=True)
class StripSegment:
    """Component of the spiral inside the strip |Re z| <= log R around w_k,
    with the chord Z_k through w_k of slope exactly -alpha."""

    k: int
    R: float
    line: ObliqueLine
    w_im: BigReal                      # w_k = i * w_im (signed)
    t_entry: BigReal
    t_exit: BigReal
    polyline: tuple                    # ((re, im) BigReal pairs)
    z0: tuple                          # chord endpoint at Re = -log R
    z1: tuple                          # chord endpoint at Re = +log R

    @property
    def slope(self) -> BigReal:
        return -self.line.alpha

    def offsets(self) -> np.ndarray:
        """Polyline relative to w_k as float (n, 2); safe for any radius."""
        out = np.empty((len(self.polyline), 2))
        for i, (re, im) in enumerate(self.polyline):
            out[i, 0] = float(re)
            out[i, 1] = float(im - self.w_im)
        return out

    def polyline_to_chord(self) -> float:
        """One-sided distance: farthest sampled component point from the chord
        segment, in coordinates relative to w_k."""
        pts = self.offsets()
        a = float(self.line.alpha)
        lr = math.log(self.R)
        p0 = np.array([-lr, a * lr])
        p1 = np.array([lr, -a * lr])
        d = p1 - p0
        ts = np.clip(((pts - p0) @ d) / float(d @ d), 0.0, 1.0)
        proj = p0 + ts[:, None] * d
        return float(np.sqrt(((pts - proj) ** 2).sum(axis=1)).max())

    def hausdorff_vs_chord(self) -> float:
        """Symmetric discrete Hausdorff distance between the sampled component
        and the chord, in coordinates relative to w_k."""
        pts = self.offsets()
        a = float(self.line.alpha)
        lr = math.log(self.R)
        p0 = np.array([-lr, a * lr])
        p1 = np.array([lr, -a * lr])
        d = p1 - p0
        dd = float(d @ d)
        # polyline -> chord
        ts = np.clip(((pts - p0) @ d) / dd, 0.0, 1.0)
        proj = p0 + ts[:, None] * d
        h1 = np.sqrt(((pts - proj) ** 2).sum(axis=1)).max()
        # chord samples -> polyline
        cs = p0 + np.linspace(0, 1, 65)[:, None] * d
        h2 = 0.0
        for c in cs:
            h2 = max(h2, np.sqrt(((pts - c) ** 2).sum(axis=1)).min())
        return max(h1, float(h2))


def _re_sigma_local(sign: int, r_k: mpfr, alpha: mpfr, tau: mpfr) -> mpfr:
    return -sign * r_k * gmpy2.exp(alpha * tau) * gmpy2.sin(tau)


def strip_segment(line: ObliqueLine, k: int, R, samples: int = 33,
                  guard_bits: int = 48) -> StripSegment:
    """Sample the strip component through w_k.

    Entry/exit times solve |Re Sigma| = log R around t_k: Newton from the
    chord linearisation when the radius dominates the strip width, otherwise a
    quarter-turn march with bisection.  Raises DegenerateStrip when the
    component continues inward to 0 without leaving the strip.
    """
    Rf = float(R)
    if Rf <= 1:
        raise ValueError("R must be > 1")
    if samples < 2:
        raise ValueError("samples must be >= 2")
    u_up = _u_estimate(line, k) + 1.0
    prec = required_bits(u_up, guard_bits) + 32
    if prec > precision_ceiling():
        raise PrecisionOverflow(f"strip segment k={k} needs {prec} bits")
    sign = _sign_of(k)
    with gmpy2.context(precision=prec):
        t_k = crossing_time(line, k, prec).raw()
        alpha = line.alpha.raw()
        u_k = line.p_re.raw() + alpha * t_k
        r_k = gmpy2.exp(u_k)
        logR = gmpy2.log(mpfr(Rf))
        if line.alpha.is_zero() and r_k <= logR:
            raise DegenerateStrip(f"circle of radius {float(r_k):.3g} never leaves the strip")
        taus = []
        for d in (-1, 1):
            # solve |Re Sigma(t_k + tau)| = log R on side d of the crossing
            if r_k > 64 * logR:
                tau = d * logR / r_k
                for _ in range(60):
                    re = _re_sigma_local(sign, r_k, alpha, tau)
                    want = logR if re >= 0 else -logR
                    f = re - want
                    fp = -sign * r_k * gmpy2.exp(alpha * tau) * (alpha * gmpy2.sin(tau) + gmpy2.cos(tau))
                    step = f / fp
                    tau = tau - step
                    if abs(step) < abs(tau) * mpfr(2) ** (-guard_bits - 8) + mpfr(2) ** (-prec + 8):
                        break
                taus.append(tau)
            else:
                lo = mpfr(0)
                hi = None
                j = 1
                while True:
                    cand = mpfr(d) * j * gmpy2.const_pi() / 4
                    if abs(_re_sigma_local(sign, r_k, alpha, cand)) > logR:
                        hi = cand
                        break
                    if r_k * gmpy2.exp(alpha * cand) < logR and float(alpha) * d < 0:
                        raise DegenerateStrip(
                            f"component through w_{k} stays inside the strip inward"
                        )
                    if r_k * gmpy2.exp(alpha * cand) < mpfr(2) ** (-60):
                        raise DegenerateStrip(f"component through w_{k} collapses toward 0")
                    lo = cand
                    j += 1
                    if j > 10_000:
                        raise DegenerateStrip(f"no strip exit found near w_{k}")
                for _ in range(prec):
                    mid = (lo + hi) / 2
                    if abs(_re_sigma_local(sign, r_k, alpha, mid)) > logR:
                        hi = mid
                    else:
                        lo = mid
                    if abs(hi - lo) < abs(hi) * mpfr(2) ** (-guard_bits - 8) + mpfr(2) ** (-prec + 8):
                        break
                taus.append((lo + hi) / 2)
        tau_in, tau_out = taus
        pts = []
        for i in range(samples):
            tau = tau_in + (tau_out - tau_in) * i / (samples - 1)
            g = r_k * gmpy2.exp(alpha * tau)
            re = -sign * g * gmpy2.sin(tau)
            im = sign * g * gmpy2.cos(tau)
            pts.append((BigReal._wrap(re, prec), BigReal._wrap(im, prec)))
        w_im = BigReal._wrap(sign * r_k, prec)
        lR = BigReal._wrap(logR, prec)
        a_b = line.alpha.with_precision(prec)
        z0 = (-lR, w_im + a_b * lR)
        z1 = (lR, w_im - a_b * lR)
        return StripSegment(
            k=k, R=Rf, line=line, w_im=w_im,
            t_entry=BigReal._wrap(t_k + tau_in, prec),
            t_exit=BigReal._wrap(t_k + tau_out, prec),
            polyline=tuple(pts), z0=z0, z1=z1,
        )
