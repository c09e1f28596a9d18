"""Occupation measure of rho(t) = exp(exp(p + t(i+alpha))) over [-T, T].

The limit splits the mass 1/4, 1/2, 1/4 between infinity, 1 and 0; at finite T
the point masses are approximated by threshold buckets:

    near_inf   Re Sigma(t) >  M
    near_0     Re Sigma(t) < -M
    near_1     dist(Sigma(t), 2*pi*i*Z) < eta
    other      the rest

log|rho(t)| = Re Sigma(t) is compared in logarithmic form and never
exponentiated.  The estimator classifies a uniform midpoint grid in float64
and escalates every sample whose verdict is not certain at that precision to
an exact mpfr classification, so the counts are grid-exact.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import gmpy2
import numpy as np
from gmpy2 import mpfr

from .bigreal import BigReal, required_bits, twopi
from .spiral import ObliqueLine

__all__ = [
    "DistributionEstimate",
    "IntervalStructure",
    "classify",
    "estimate_mu_T",
    "interval_structure",
    "LIMIT_MASSES",
]

LIMIT_MASSES = (0.25, 0.5, 0.25, 0.0)    # (near_0, near_1, near_inf, other)

_BUCKETS = ("near_0", "near_1", "near_inf", "other")


@dataclass(frozen=True)
class DistributionEstimate:
    mass_0: float
    mass_1: float
    mass_inf: float
    mass_other: float
    counts: tuple
    T: float
    M_threshold: float
    eta: float
    sample_count: int
    boundary_crossings: int

    @property
    def masses(self) -> tuple:
        return (self.mass_0, self.mass_1, self.mass_inf, self.mass_other)

    @property
    def grid_error_bound(self) -> float:
        """Riemann-sum error proxy: classification boundary count per sample."""
        return self.boundary_crossings / self.sample_count

    def distance_to_limit(self) -> float:
        return math.sqrt(sum((m - l) ** 2 for m, l in zip(self.masses, LIMIT_MASSES)))


@dataclass(frozen=True)
class IntervalStructure:
    n: int
    I_plus: tuple
    I_minus: tuple


def classify(line: ObliqueLine, t, M_threshold, eta, guard_bits: int = 64) -> str:
    """Certified bucket of a single sample (mpfr path)."""
    Mf = float(M_threshold)
    etaf = float(eta)
    if Mf <= 1:
        raise ValueError("M_threshold must exceed 1")
    if not (0 < etaf < 0.5):
        raise ValueError("eta must lie in (0, 1/2)")
    u_up = float(line.p_re) + float(line.alpha) * float(t) + 1.0
    prec = required_bits(max(u_up, 0.0), guard_bits) + 64
    with gmpy2.context(precision=prec):
        tv = t.raw() if isinstance(t, BigReal) else mpfr(t)
        u = line.p_re.raw() + line.alpha.raw() * tv
        phase = line.p_im.raw() + tv
        c = gmpy2.cos(phase)
        # compare e^u*|cos| against M in log form
        if c != 0:
            lre = u + gmpy2.log(abs(c))
            if lre > gmpy2.log(mpfr(Mf)):
                return "near_inf" if c > 0 else "near_0"
        r = gmpy2.exp(u)
        re_s = r * c
        im_s = r * gmpy2.sin(phase)
        tp = twopi(prec)
        dd = gmpy2.fmod(im_s, tp)
        if dd > tp / 2:
            dd -= tp
        if dd < -tp / 2:
            dd += tp
        if re_s * re_s + dd * dd < mpfr(etaf) ** 2:
            return "near_1"
    return "other"


def estimate_mu_T(line: ObliqueLine, T, samples: int, M_threshold, eta) -> DistributionEstimate:
    """Bucket frequencies of rho over the uniform midpoint grid on [-T, T].

    Deterministic for fixed inputs; the conjugated line (alpha -> -alpha,
    p -> conj p) produces identical masses by the symmetry sigma o exp =
    exp o sigma.
    """
    Tf = float(T)
    if Tf <= 1:
        raise ValueError("T must exceed 1")
    if samples < 1000:
        raise ValueError("need at least 10^3 samples")
    Mf = float(M_threshold)
    etaf = float(eta)
    if Mf <= 1 or not (0 < etaf < 0.5):
        raise ValueError("need M_threshold > 1 and eta in (0, 1/2)")

    i = np.arange(samples, dtype=np.float64)
    t = -Tf + 2 * Tf * (i + 0.5) / samples
    x = float(line.p_re)
    y = float(line.p_im)
    a = float(line.alpha)

    c = np.cos(y + t)
    abs_c = np.abs(c)
    ulog = x + a * t
    with np.errstate(divide="ignore"):
        relog = ulog + np.log(abs_c)
    log_m = math.log(Mf)
    log_eta = math.log(etaf)
    tol = 1e-6

    # certain verdicts in float64; anything near a cos zero is escalated
    # because log|cos| loses accuracy there
    trusty = abs_c > 1e-6
    big = (relog > log_m + tol) & trusty
    near_inf = big & (c > 0)
    near_0 = big & (c < 0)
    tiny_sigma = ulog < log_eta - tol                      # |Sigma| < eta: near 1
    certain_other = (~big) & trusty & (relog < log_m - tol) \
        & (relog > log_eta + tol) & (ulog > log_eta + tol)

    bucket = np.full(samples, 3, dtype=np.int8)            # other
    bucket[near_0] = 0
    bucket[tiny_sigma & ~big] = 1
    bucket[near_inf] = 2

    decided = near_inf | near_0 | (tiny_sigma & ~big) | certain_other
    for idx in np.nonzero(~decided)[0]:
        b = classify(line, float(t[idx]), Mf, etaf)
        bucket[idx] = _BUCKETS.index(b)

    counts = tuple(int((bucket == b).sum()) for b in range(4))
    crossings = int((np.diff(bucket) != 0).sum())
    n = samples
    return DistributionEstimate(
        mass_0=counts[0] / n, mass_1=counts[1] / n, mass_inf=counts[2] / n,
        mass_other=counts[3] / n, counts=counts, T=Tf, M_threshold=Mf,
        eta=etaf, sample_count=n, boundary_crossings=crossings,
    )


def interval_structure(line: ObliqueLine, n: int, precision_bits: int = 128) -> IntervalStructure:
    """The proof intervals I_n^+ = 2n*pi + [-pi/2 + 1/n - Im p, pi/2 + 1/n - Im p]
    and I_n^- = I_n^+ + pi; |I_n^+| = pi."""
    if n < 1:
        raise ValueError("n must be >= 1")
    pi = BigReal.pi(precision_bits)
    im = line.p_im.with_precision(precision_bits)
    inv = BigReal(1, precision_bits) / n
    lo = 2 * n * pi - pi / 2 + inv - im
    hi = 2 * n * pi + pi / 2 + inv - im
    return IntervalStructure(n=n, I_plus=(lo, hi), I_minus=(lo + pi, hi + pi))
