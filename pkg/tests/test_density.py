"""Mod-1 statistics, annulus coverage, the explicit dense line, witnesses."""

import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from expexp.bigreal import BigReal
from expexp.density import (
    AnnulusGrid,
    InvalidTarget,
    WitnessNotFound,
    champernowne_bits,
    champernowne_line,
    max_gap,
    paint_coverage,
    shift_frac_oracle,
    star_discrepancy,
    witness,
)
from expexp.spiral import ObliqueLine


def circ(a, b):
    d = abs(float(a) - float(b)) % 1.0
    return min(d, 1.0 - d)


def test_champernowne_bits_prefixes():
    assert champernowne_bits(11) == "11011100101"
    assert champernowne_bits(3) == "110"
    assert champernowne_bits(1) == "1"


def test_shift_oracle_drops_leading_bits():
    full = champernowne_bits(80)
    f0 = shift_frac_oracle(0, 64)
    f1 = shift_frac_oracle(1, 64)
    f5 = shift_frac_oracle(5, 64)
    assert abs(float(f0) - int(full[:53], 2) / 2 ** 53) <= 2.0 ** -50
    assert abs(float(f1) - int(full[1:54], 2) / 2 ** 53) <= 2.0 ** -50
    assert abs(float(f5) - int(full[5:58], 2) / 2 ** 53) <= 2.0 ** -50
    # truncation error bound is the stated one
    assert float(f0.error_bound) == 2.0 ** -64


def test_max_gap_single_point():
    assert max_gap([0.3]) == 1.0


def test_symmetric_grid_statistics():
    pts = [0.0, 0.25, 0.5, 0.75]
    assert max_gap(pts) == 0.25
    assert star_discrepancy(pts) == 0.25


def test_gap_small_along_thm4_line():
    # frozen from the bit-shift oracle: K=2000 gives 4.08e-3, K=5000 1.98e-3
    cl = champernowne_line(1200)
    from expexp.spiral import residue_chain
    fr, _, _, _ = residue_chain(cl.line, 2000, guard_bits=48)
    g = max_gap(fr)
    assert g <= 0.005
    assert star_discrepancy(fr) <= 0.05


@settings(max_examples=30, deadline=None)
@given(st.lists(st.floats(min_value=0.0, max_value=0.999999), min_size=1, max_size=200))
def test_gap_and_discrepancy_ranges(xs):
    g = max_gap(xs)
    d = star_discrepancy(xs)
    assert 0.0 < g <= 1.0
    assert g >= 1.0 / len(xs) - 1e-12
    assert 0.0 <= d <= 1.0
    assert d >= 1.0 / (2 * len(xs)) - 1e-12


def test_grid_text_roundtrip_and_idempotence():
    g = AnnulusGrid(math.e, 4, 8)
    g.bitmap[1, 3] = True
    g.bitmap[0, 0] = True
    text = g.to_text()
    h = AnnulusGrid.from_text(text, math.e)
    assert (h.bitmap == g.bitmap).all()
    before = g.bitmap.copy()
    g.merge(h)
    assert (g.bitmap == before).all()


def test_paint_circle_line_stalls():
    # alpha = 0: the image angles never move, at most the two residue columns
    line = ObliqueLine(BigReal(18, 128), BigReal(0, 128), BigReal(0, 128))
    g = AnnulusGrid(math.e, 16, 16)
    paint_coverage(line, 4, g)
    cols4 = set(np.nonzero(g.bitmap.any(axis=0))[0])
    assert 1 <= len(cols4) <= 2
    paint_coverage(line, 64, g)
    cols64 = set(np.nonzero(g.bitmap.any(axis=0))[0])
    assert cols64 == cols4          # coverage stalls
    # every painted column is fully radial (spokes span the annulus)
    for c in cols4:
        assert g.bitmap[:, c].all()


def test_paint_single_crossing_is_single_spoke():
    cl = champernowne_line(300)
    g = AnnulusGrid(math.e, 16, 32)
    paint_coverage(cl.line, 1, g)
    cols = np.nonzero(g.bitmap.any(axis=0))[0]
    assert 1 <= len(cols) <= 3      # one near-radial curve, slight tilt


def test_paint_monotone_in_K():
    cl = champernowne_line(600)
    prev = 0.0
    for K in (8, 64, 256):
        g = AnnulusGrid(math.e, 16, 16)
        paint_coverage(cl.line, K, g)
        frac = g.covered_fraction()
        assert frac >= prev
        prev = frac
    assert prev > 0.5


def test_gap_coverage_consistency():
    # if max_gap < cell width / (2 pi) ... every angular column is hit
    cl = champernowne_line(800)
    K = 700
    from expexp.spiral import residue_chain
    fr, _, _, _ = residue_chain(cl.line, K, guard_bits=48)
    g = AnnulusGrid(math.e, 8, 16)
    paint_coverage(cl.line, K, g)
    if max_gap(fr) < 1.0 / 16:
        assert g.bitmap.any(axis=0).all()


def test_witness_at_t_zero():
    cl = champernowne_line(400)
    # target rho(0) = exp(exp(p)); the zeroth crossing matches exactly
    import gmpy2
    with gmpy2.context(precision=300):
        ep_re = gmpy2.exp(cl.line.p_re.raw()) * gmpy2.cos(cl.line.p_im.raw())
        ep_im = gmpy2.exp(cl.line.p_re.raw()) * gmpy2.sin(cl.line.p_im.raw())
        mag = gmpy2.exp(ep_re)
        z_re = float(mag * gmpy2.cos(ep_im))
        z_im = float(mag * gmpy2.sin(ep_im))
    w = witness(cl.line, z_re, z_im, 1e-6, 512)
    assert abs(float(w.t)) <= 1e-6
    assert w.residual <= 1e-6


def test_witness_minus_one():
    cl = champernowne_line(1200)
    w = witness(cl.line, -1.0, 0.0, 1e-3, 2000)
    assert w.residual <= 1e-3


def test_witness_rejects_zero_target():
    cl = champernowne_line(300)
    with pytest.raises(InvalidTarget):
        witness(cl.line, 0, 0, 1e-3, 100)


def test_witness_not_found_reports_best():
    cl = champernowne_line(300)
    with pytest.raises(WitnessNotFound) as err:
        witness(cl.line, 1.0, 0.5, 1e-9, 32)
    assert err.value.scanned <= 32
