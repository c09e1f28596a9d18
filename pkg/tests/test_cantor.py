"""The avoiding-interval construction, its certificates, and the exports."""

import math
from fractions import Fraction

import pytest

from expexp.bigreal import BigReal
from expexp import cantor as ct


@pytest.fixture(scope="module")
def config():
    return ct.choose_config(ct.BasePoint.origin(), Fraction(1, 5), Fraction(3, 10),
                            component_cap=64)


@pytest.fixture(scope="module")
def tree(config):
    return ct.build_tree(config, depth=2)


def test_phi_k_closed_form():
    re, im = ct.phi_k(ct.BasePoint.origin(), 0, "0.25", 128)
    assert abs(float(re) - math.pi / 2 * 0.25) <= 1e-30
    assert abs(float(im) - math.pi / 2) <= 1e-30


def test_phi_k_derivative_constant_in_z():
    p = ct.BasePoint(re_dyadic=Fraction(1, 4), im_pi=Fraction(1, 8))
    d1 = float(ct.dpsi_abs(p, 3, "0.2")) / math.exp(float(ct.phi_k(p, 3, "0.2")[0]))
    d2 = float(ct.dpsi_abs(p, 3, "0.29")) / math.exp(float(ct.phi_k(p, 3, "0.29")[0]))
    assert abs(d1 - d2) <= 1e-12 * abs(d1)


def test_phi_k_rejects_p_on_projection_line():
    p = ct.BasePoint(im_pi=Fraction(1, 2))      # Im p = pi/2: p on S_0
    with pytest.raises(ct.DegenerateProjection):
        ct.phi_k(p, 0, "0.25")


def test_psi_k_point_value():
    v = ct.psi_k(ct.BasePoint.origin(), 0, "0.25")
    assert v.sign == 1
    assert abs(math.exp(float(v.log_radius)) - math.exp(math.pi * 0.25 / 2)) <= 1e-12


def test_derivative_growth_per_half_turn(config):
    # |D psi_{k+1} / D psi_k| > e^{alpha pi} for k beyond |Im p|/pi
    p = config.p
    for alpha in ("0.2", "0.25", "0.3"):
        for k in range(0, 12):
            r = float(ct.dpsi_abs(p, k + 1, alpha)) / float(ct.dpsi_abs(p, k, alpha))
            assert r > math.exp(float(alpha) * math.pi)


def test_dpsi_N_beats_N4(config):
    for alpha in (config.alpha0, config.alpha1):
        assert float(ct.dpsi_abs(config.p, config.N, alpha)) > config.N ** 4


def test_choose_config_example_values(config):
    assert config.k0 == -1
    assert config.N == 50          # smallest N with e^{0.1 pi N} > N^4
    assert config.N * math.exp(0.0) > 1
    assert Fraction(1, config.N ** 2) < config.J_length()
    assert float(config.I_length) <= float(config.C_lower) / (config.N ** 4 * float(config.M_upper)) * (1 + 1e-12)
    # frozen magnitudes from the design prototype
    assert abs(float(config.C_lower) - 2.151) <= 0.01
    assert 6e22 <= float(config.M_upper) <= 9e22


def test_choose_config_conjugates_negative_interval():
    cfg = ct.choose_config(ct.BasePoint.origin(), Fraction(-3, 10), Fraction(-1, 5), 16)
    assert cfg.conjugated
    assert cfg.alpha0 == Fraction(1, 5)


def test_choose_config_rejects_bad_intervals():
    with pytest.raises(ct.InfeasibleInterval):
        ct.choose_config(ct.BasePoint.origin(), Fraction(3, 10), Fraction(1, 5), 16)
    with pytest.raises(ct.InfeasibleInterval):
        ct.choose_config(ct.BasePoint.origin(), Fraction(-1, 10), Fraction(1, 5), 16)


def test_cor1_config_k0():
    cfg = ct.choose_config(ct.BasePoint.cor1(), Fraction(1, 5), Fraction(3, 10), 16)
    assert cfg.k0 == -3
    assert cfg.N == 50


def test_tree_survival_and_shrinkage(config, tree):
    N = config.N
    assert tree.depth == 2
    assert 1 <= len(tree.levels[1]) <= config.component_cap
    for parent in tree.levels[0]:
        assert parent.survival_lb is not None
        assert parent.survival_lb >= 1 - 4 / N
    for n, level in enumerate(tree.levels, start=1):
        for nd in level:
            assert float(nd.length(tree.scale_bits)) <= 2.0 ** -n


def test_tree_weights_bounded_by_mdp_inequality(config, tree):
    # mu_n(W) <= |W| (1 - 4/N)^{-n+1}
    N = config.N
    for n, level in enumerate(tree.levels, start=1):
        cap = (1 - 4 / N) ** (-(n - 1))
        for nd in level:
            assert float(nd.weight) <= float(nd.length(tree.scale_bits)) * cap * (1 + 1e-9)


def test_tree_child_weights_below_parent(config, tree):
    parent = tree.levels[0][0]
    total = sum(float(nd.weight) for nd in tree.levels[1])
    assert total <= float(parent.weight) * (1 + 1e-9)


def test_refine_with_empty_arc_keeps_interval_whole(config):
    cfg = ct.CantorConfig(
        p=config.p, alpha0=config.alpha0, alpha1=config.alpha1, N=config.N,
        k0=config.k0, C_lower=config.C_lower, M_upper=config.M_upper,
        I_length=BigReal(0, 64), arc_index=0, component_cap=8,
    )
    tree = ct.build_tree(cfg, depth=2)
    # nothing is removed: the single seed interval survives whole
    assert len(tree.levels[0]) == 1
    assert len(tree.levels[1]) == 1
    assert tree.levels[1][0].lo == tree.levels[0][0].lo
    assert tree.levels[1][0].hi == tree.levels[0][0].hi
    # the weight is an upper bound: parent / survival_lb, within the 4/N slack
    w0, w1 = float(tree.levels[0][0].weight), float(tree.levels[1][0].weight)
    assert w0 <= w1 <= w0 * (1 + 4 / cfg.N)


def test_avoidance_oracle_margin(tree):
    margin = ct.certify_avoidance(tree, max_nodes=6)
    assert margin > 0


def test_mdp_lebesgue_passes():
    parts = [[(Fraction(1, 2 ** n), Fraction(1, 2 ** n))] * 2 ** n for n in range(1, 8)]
    res = ct.mdp_check(parts, eps=0.1, beta=1.0)
    assert res.passed
    assert res.dimension_bound == pytest.approx(0.8)


def test_mdp_atom_fails():
    parts = [[(Fraction(1, 2 ** n), Fraction(1))] + [(Fraction(1, 2 ** n), 0.0)] * (2 ** n - 1)
             for n in range(1, 12)]
    res = ct.mdp_check(parts, eps=0.1, beta=1.0)
    assert not res.passed
    assert res.violation is not None


def test_mdp_middle_thirds_crossover():
    # weights 2^-n on intervals 3^-n: mu/|P| = (3/2)^n, so the check passes
    # iff (1+eps) >= 3/2
    def parts():
        return [[(Fraction(1, 3 ** n), Fraction(1, 2 ** n))] * 2 ** n for n in range(1, 10)]
    assert ct.mdp_check(parts(), eps=0.55, beta=1.0).passed
    res = ct.mdp_check(parts(), eps=0.45, beta=1.0)
    assert not res.passed
    assert res.violation[0] == 1       # fails already at depth 1 for beta=1


def test_tree_partitions_feed_mdp(config, tree):
    parts = ct.tree_partitions(tree)
    res = ct.mdp_check(parts, eps=5.0 / config.N, beta=2.0)
    assert res.passed
    assert res.dimension_bound == pytest.approx(1 - 10 / config.N)


def test_box_dimension_single_interval():
    r = ct.box_dimension([(Fraction(0), Fraction(1))])
    assert abs(r.estimate - 1.0) <= 0.05


def test_box_dimension_middle_thirds_depth8():
    iv = [(Fraction(0), Fraction(1))]
    for _ in range(8):
        nxt = []
        for a, b in iv:
            th = (b - a) / 3
            nxt.append((a, a + th))
            nxt.append((b - th, b))
        iv = nxt
    r = ct.box_dimension(iv)
    assert abs(r.estimate - math.log(2) / math.log(3)) <= 0.05


def test_box_dimension_pruned_flag_and_degenerate():
    r = ct.box_dimension([(Fraction(0), Fraction(1, 2))], pruned=True)
    assert r.caveat == "pruned subset"
    with pytest.raises(ct.InsufficientScales):
        ct.box_dimension([(Fraction(1, 3), Fraction(1, 3))])


def test_forbidden_ball_radius_formula():
    ball = ct.forbidden_ball(BigReal(10, 96), BigReal("0.2", 96), BigReal(2, 96))
    assert float(ball.radius) == pytest.approx(0.025)
    ball2 = ct.forbidden_ball(BigReal(10, 96), BigReal("0.2", 96), BigReal(4, 96))
    assert float(ball2.radius) == pytest.approx(0.0125)


def test_forbidden_ball_rejects_low_arc():
    with pytest.raises(ct.ArcTooLow):
        ct.forbidden_ball(BigReal("0.5", 96), BigReal("0.2", 96), BigReal(2, 96))


def test_slope_bound_value():
    assert float(ct.slope_bound("0.3")) == pytest.approx(1.3 / 0.7)
    with pytest.raises(ValueError):
        ct.slope_bound("1.5")


def test_export_theta():
    alpha = BigReal.log2(256) / (2 * BigReal.pi(256))
    th = ct.export_theta(alpha)
    assert abs(float(th) - 2.0) <= 1e-15
    with pytest.raises(ct.InvalidAlpha):
        ct.export_theta(Fraction(0))


def test_theta_window_check_avoids_far_window():
    # {2^k} = 0 for all k: distance to the 3/4-centred window is 1/4
    alpha = Fraction(11532, 104576)   # rough log2/(2 pi) stand-in; use exact check below
    m = ct.theta_window_check(Fraction(1, 10), 40, Fraction(3, 4), 1e-20)
    assert -1 <= m <= 0.5


def test_tree_save_load_roundtrip(tree, tmp_path):
    path = tmp_path / "tree.txt"
    ct.save_tree(tree, path)
    back = ct.load_tree(path)
    assert back.depth == tree.depth
    assert back.scale_bits == tree.scale_bits
    assert back.config.N == tree.config.N
    assert [(n.lo, n.hi) for n in back.levels[-1]] == \
        [(n.lo, n.hi) for n in tree.levels[-1]]
    # reloaded trees can continue refining
    ct.refine(back)
    assert back.depth == tree.depth + 1
