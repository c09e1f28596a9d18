"""Crossing sequences and strip geometry."""

import math
import random
from fractions import Fraction

import pytest

from expexp.bigreal import BigReal
from expexp.density import champernowne_line, cor1_line, shift_frac_oracle
from expexp.spiral import (
    crossing_time,
    DegenerateStrip,
    ObliqueLine,
    crossings,
    frac_sequence,
    make_line,
    outward_indices,
    residue_chain,
    strip_segment,
)


def circ(a, b):
    d = abs(float(a) - float(b)) % 1.0
    return min(d, 1.0 - d)


def test_crossing_times_exact_spacing():
    rng = random.Random(3)
    pi = BigReal.pi(128)
    for _ in range(1000):
        line = make_line(repr(rng.uniform(-2, 2)), repr(rng.uniform(-2, 2)),
                         repr(rng.uniform(-1, 1)), 128)
        k = rng.randrange(-20, 20)
        t0 = crossing_time(line, k, 128)
        t1 = crossing_time(line, k + 1, 128)
        assert t1 - t0 == pi    # exact on stored representations


def test_sign_alternation():
    line = make_line("0.3", "0.7", "0.2")
    xs = crossings(line, -5, 6)
    for a, b in zip(xs, xs[1:]):
        assert a.sign * b.sign == -1
        assert a.sign == (1 if a.k % 2 == 0 else -1)


def test_thm4_line_positive_axis_residues_are_bit_shifts():
    cl = champernowne_line(500)
    xs = crossings(cl.line, 0, 40, guard_bits=64)
    for c in xs:
        if c.k % 2 == 0:
            j = c.k // 2
            ref = shift_frac_oracle(j, 128)
            assert circ(c.frac, ref) <= 2.0 ** -60


def test_crossing_at_axis_point_i():
    # p = (pi/2) i: t_0 = 0, the crossing is the point i, residue {1/(2 pi)}
    prec = 128
    line = ObliqueLine(BigReal(0, prec), BigReal.pi(prec) / 2, BigReal("0.37", prec))
    c = crossings(line, 0, 0)[0]
    # the stored p_im is a rounded pi/2, and the working pi is at the
    # certified precision, so t_0 vanishes only to that scale
    assert abs(float(c.t)) <= 2.0 ** -75
    assert abs(float(c.log_radius)) <= 2.0 ** -75
    assert abs(float(c.frac) - 0.15915494309189533) <= 2.0 ** -45


def test_cor1_line_even_residues():
    # crossings at 2*pi*exp(0.2*pi*j)i: residues {e^{0.2 pi j}} (mpmath values)
    line = cor1_line("0.1", 256)
    expected = {
        1: 0.8744560875853383505,
        2: 0.5135856242857336377,
        3: 0.5860619626947248583,
    }
    xs = crossings(line, 0, 6, guard_bits=64)
    by_k = {c.k: c for c in xs}
    for j, ref in expected.items():
        assert circ(by_k[2 * j].frac, ref) <= 2.0 ** -60


def test_frac_sequence_circle_is_constant():
    line = ObliqueLine(BigReal(0, 128), BigReal.pi(128) / 2, BigReal(0, 128))
    fr = frac_sequence(line, 6)
    vals = {float(f) for f in fr[0::2]}
    assert len(vals) == 1
    assert abs(vals.pop() - 0.15915494309189533) <= 2.0 ** -45


def test_frac_sequence_first_element_matches_crossings():
    line = make_line("0.1", "0.2", "0.3")
    fr = frac_sequence(line, 1)
    c = crossings(line, 0, 0)[0]
    assert float(fr[0]) == float(c.frac)


def test_frac_sequence_negative_alpha_outward_is_downward():
    line = make_line("0.0", "0.0", "-0.25")
    assert outward_indices(line, 4) == [0, -1, -2, -3]
    fr = frac_sequence(line, 4)
    xs = crossings(line, -3, 0)
    assert float(fr[1]) == float({c.k: c for c in xs}[-1].frac)


def test_residue_consistency_guard_scaling():
    line = cor1_line("0.1", 2048)
    a = frac_sequence(line, 40, guard_bits=32)
    b = frac_sequence(line, 40, guard_bits=64)
    for fa, fb in zip(a, b):
        assert circ(fa, fb) <= 2.0 ** -31


def test_residue_chain_matches_per_k_path():
    line = cor1_line("0.1", 2048)
    fr = frac_sequence(line, 64, guard_bits=48)
    fast, signs, logr, err_exp2 = residue_chain(line, 64, guard_bits=48)
    for j in range(64):
        assert circ(fr[j], fast[j]) <= 2.0 ** -45
    assert signs[0] == 1 and signs[1] == -1
    assert err_exp2 <= -48


def test_strip_segment_chord_slope_is_minus_alpha():
    line = make_line("0.5", "0.1", "0.31")
    seg = strip_segment(line, 6, math.e)
    assert seg.slope == -line.alpha            # reported slope, exact
    (x0, y0), (x1, y1) = seg.z0, seg.z1
    slope = (y1 - y0) / (x1 - x0)
    assert abs(float(slope + line.alpha)) <= 2.0 ** -100


def test_strip_segment_circle_chord_horizontal():
    # alpha = 0: the chord through w_k has slope 0 and the circular arc hugs it
    line = ObliqueLine(BigReal(3, 128), BigReal(0, 128), BigReal(0, 128))
    seg = strip_segment(line, 2, math.e, samples=257)
    (x0, y0), (x1, y1) = seg.z0, seg.z1
    assert float(y0) == float(y1)
    # arc-to-chord distance ~ (log R)^2 / (2 r), r = e^3
    assert seg.hausdorff_vs_chord() <= 1.2 * (1.0 / (2 * math.exp(3))) + 1e-9


def test_strip_segment_endpoints_on_strip_boundary():
    line = make_line("0.2", "0.4", "0.2")
    seg = strip_segment(line, 5, 2.0)
    for t in (seg.t_entry, seg.t_exit):
        pass
    first, last = seg.polyline[0], seg.polyline[-1]
    for re, _ in (first, last):
        assert abs(abs(float(re)) - math.log(2.0)) <= 1e-10


def test_strip_segment_degenerate_inward():
    # tiny circle never reaches |Re z| = log R
    line = ObliqueLine(BigReal(Fraction(-3), 128), BigReal(0, 128), BigReal(0, 128))
    with pytest.raises(DegenerateStrip):
        strip_segment(line, 0, math.e)


def test_hausdorff_distance_decreases_along_thm4_line():
    cl = champernowne_line(300)
    ds = []
    for k in range(6, 26, 2):
        seg = strip_segment(cl.line, k, math.e, samples=129)
        ds.append(seg.polyline_to_chord())
    for a, b in zip(ds, ds[1:]):
        assert b < a


def test_crossings_rejects_bad_range():
    line = make_line("0", "0", "0.2")
    with pytest.raises(ValueError):
        crossings(line, 5, 4)
