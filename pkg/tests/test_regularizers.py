import math

import numpy as np
import pytest

from helpers import regularizer_families
from omdkit.oracles import GridSpec, fd_gradient, numeric_argmax
from omdkit.regularizers import (
    CompositeQuadL1,
    FixedQuadratic,
    GrowingQuadratic,
    LinearScheduled,
    MaxScaled,
    PNorm,
    ScaleInvDiag,
    ScaleInvPNorm,
    SqrtScheduled,
    WeightedQNorm,
)

E = math.e


def test_value_examples():
    assert float(FixedQuadratic(2).value([3.0, 4.0])) == 12.5
    assert float(WeightedQNorm(1, 2.0, [4.0]).value([1.0])) == 2.0
    got = float(WeightedQNorm(2, 1.5, [1.0, 1.0]).value([1.0, 1.0]))
    assert got == pytest.approx(2.0 ** (4.0 / 3.0), abs=1e-12)


def test_conjugate_examples():
    assert FixedQuadratic(2).conjugate([3.0, 4.0]) == 12.5
    assert WeightedQNorm(1, 2.0, [4.0]).conjugate([1.0]) == pytest.approx(0.125)
    assert WeightedQNorm(2, 1.5, [1.0, 1.0]).conjugate([1.0, 0.0]) == pytest.approx(0.25)


def test_mirror_map_examples():
    assert FixedQuadratic(2).mirror_map([2.0, -3.0]).tolist() == [2.0, -3.0]

    gq = GrowingQuadratic(2, r=1.0)
    gq.update([1.0, 0.0])  # A = diag(2, 1)
    assert np.allclose(gq.mirror_map([2.0, 2.0]), [1.0, 2.0])

    comp = CompositeQuadL1(3, eta=1.0, lam=1.5, quad=1.0, schedule="constant")
    comp.advance_step()  # c = 1, threshold = 1.5
    assert np.allclose(comp.mirror_map([2.0, -1.0, 0.0]), [0.5, 0.0, 0.0])


def test_strong_convexity_examples():
    assert FixedQuadratic(2).strong_convexity() == 1.0
    assert PNorm(2, 1.5).strong_convexity() == 0.5
    reg = ScaleInvPNorm(8, lipschitz=1.0)
    reg.observe_input(np.ones(8))  # m=8, p = 2 ln 8
    p1 = 2.0 * math.log(8.0)
    assert reg.strong_convexity() == pytest.approx(math.sqrt(E * (p1 - 1.0)), abs=1e-12)
    assert reg.strong_convexity() == pytest.approx(2.930, abs=1e-3)


def test_dual_norm_examples():
    assert FixedQuadratic(2).dual_norm([3.0, 4.0]) == 5.0
    wq = WeightedQNorm(2, 2.0, [4.0, 1.0])
    assert wq.dual_norm([2.0, 1.0]) == pytest.approx(math.sqrt(2.0))
    for reg in regularizer_families(2).values():
        assert reg.dual_norm(np.zeros(2)) == 0.0


def test_advance_examples():
    reg = ScaleInvPNorm(2, lipschitz=1.0)
    reg.observe_input([1.0, 2.0])
    reg.observe_input([3.0, 1.0])
    assert reg.b.tolist() == [3.0, 2.0]
    assert reg.m == 2

    sid = ScaleInvDiag(1, lipschitz=1.0)
    sid.observe_input([1.0])
    sid.observe_gradient([2.0])
    assert sid.gs.tolist() == [4.0]


def test_composite_invalid_parameters():
    with pytest.raises(ValueError):
        CompositeQuadL1(2, eta=1.0, schedule="linear")  # no ridge
    with pytest.raises(ValueError):
        CompositeQuadL1(2, eta=-1.0)
    with pytest.raises(ValueError):
        WeightedQNorm(2, 2.5, [1.0, 1.0])
    with pytest.raises(ValueError):
        PNorm(2, 1.0)


def test_unseen_coordinates_stay_zero():
    reg = ScaleInvPNorm(3, lipschitz=1.0)
    reg.observe_input([1.0, 0.0, 2.0])
    w = reg.mirror_map([0.5, 0.0, -0.5])
    assert w[1] == 0.0
    sid = ScaleInvDiag(3, lipschitz=1.0)
    sid.observe_input([1.0, 0.0, 2.0])
    w = sid.mirror_map([0.5, 0.0, -0.5])
    assert w[1] == 0.0
    assert float(sid.value([0.0, 5.0, 0.0])) == 0.0


def test_mirror_map_zero_everywhere():
    for name, reg in regularizer_families(2).items():
        assert np.allclose(reg.mirror_map(np.zeros(2)), 0.0), name
        assert float(np.asarray(reg.value(np.zeros(2)))) == pytest.approx(0.0, abs=1e-15)


def test_fenchel_young_equality_all_families():
    rng = np.random.default_rng(3)
    for name, reg in regularizer_families(2).items():
        for _ in range(20):
            theta = rng.normal(size=2) * 1.5
            w = reg.mirror_map(theta)
            gap = float(np.asarray(reg.value(w))) + reg.conjugate(theta) - float(w @ theta)
            assert abs(gap) < 1e-9, (name, gap)


def test_mirror_map_matches_argmax_oracle():
    grid = GridSpec(-3.0, 3.0, 41, 2)
    rng = np.random.default_rng(5)
    for name, reg in regularizer_families(2).items():
        for _ in range(3):
            theta = rng.normal(size=2)
            pt, _ = numeric_argmax(lambda V: np.asarray(reg.value(V)), theta, grid,
                                   refine_iters=70)
            assert np.max(np.abs(pt - reg.mirror_map(theta))) < 1e-6, name


def test_gradient_matches_finite_differences():
    rng = np.random.default_rng(9)
    for name, reg in regularizer_families(2).items():
        for _ in range(10):
            w = rng.normal(size=2) + np.sign(rng.normal(size=2)) * 0.3  # keep off kinks
            fd = fd_gradient(lambda V: np.asarray(reg.value(V)), w)
            assert np.max(np.abs(fd - reg.gradient(w))) < 1e-5, name


def test_fd_gradient_of_conjugate_matches_mirror_map():
    # grad f* == mirror map, probed through the analytic conjugate
    rng = np.random.default_rng(15)
    for name, reg in regularizer_families(2).items():
        for _ in range(5):
            theta = rng.normal(size=2) + np.sign(rng.normal(size=2)) * 0.2
            fd = fd_gradient(lambda V: np.array([reg.conjugate(v) for v in np.atleast_2d(V)]),
                             theta, h=1e-5)
            assert np.max(np.abs(fd - reg.mirror_map(theta))) < 1e-5, name


def test_weighted_dual_norm_at_dim_three():
    from omdkit.oracles import numeric_dual_norm

    wq = WeightedQNorm(3, q=1.4, weights=[0.5, 1.0, 2.5])
    rng = np.random.default_rng(16)
    for _ in range(3):
        z = rng.normal(size=3)
        numeric = numeric_dual_norm(lambda V: np.asarray(wq.norm(V)), z,
                                    samples=40_000, refine_rounds=40)
        assert abs(numeric - wq.dual_norm(z)) < 1e-4


def test_strong_convexity_certificates():
    rng = np.random.default_rng(13)
    for name, reg in regularizer_families(2).items():
        beta = reg.strong_convexity()
        for _ in range(50):
            u = rng.normal(size=2)
            v = rng.normal(size=2)
            lhs = float(np.asarray(reg.value(v))) - float(np.asarray(reg.value(u)))
            lhs -= float(reg.gradient(u) @ (v - u))
            rhs = 0.5 * beta * float(np.asarray(reg.norm(u - v))) ** 2
            assert lhs >= rhs - 1e-9, (name, lhs - rhs)


def test_schedule_monotonicity():
    rng = np.random.default_rng(21)
    ws = rng.normal(size=(30, 3))
    fams = {}

    gq = GrowingQuadratic(3, r=1.0)
    fams["growing_quadratic"] = (gq, lambda: gq.update(rng.normal(size=3)))
    gqd = GrowingQuadratic(3, r=1.0, diagonal=True)
    fams["growing_diag"] = (gqd, lambda: gqd.update(rng.normal(size=3)))
    sq = SqrtScheduled(PNorm(3, 1.5))
    fams["sqrt"] = (sq, sq.advance_step)
    ln = LinearScheduled(FixedQuadratic(3))
    fams["linear"] = (ln, ln.advance_step)
    ms = MaxScaled(FixedQuadratic(3))
    fams["max_scaled"] = (ms, lambda: ms.observe_input(rng.normal(size=3)))

    sip = ScaleInvPNorm(3, lipschitz=1.0)

    def adv_sip():
        sip.observe_input(rng.normal(size=3))
        sip.observe_gradient(rng.normal(size=3) * 0.5 * sip.b.max())

    sid = ScaleInvDiag(3, lipschitz=1.0)

    def adv_sid():
        sid.observe_input(rng.normal(size=3))
        sid.observe_gradient(rng.normal(size=3) * 0.5)

    fams["scaleinv_pnorm"] = (sip, adv_sip)
    fams["scaleinv_diag"] = (sid, adv_sid)

    for name, (reg, advance) in fams.items():
        advance()
        prev = np.asarray(reg.value(ws)).copy()
        for _ in range(6):
            advance()
            cur = np.asarray(reg.value(ws))
            assert np.all(cur >= prev - 1e-12), name
            prev = cur.copy()


def test_scaleinv_gradient_stats_bound_lipschitz():
    # |l'_{s,i}| <= L b_{s,i} keeps each grad_stats increment at most e L^2 (p-1)
    rng = np.random.default_rng(31)
    reg = ScaleInvPNorm(6, lipschitz=1.0)
    prev = 0.0
    for _ in range(40):
        x = rng.normal(size=6)
        reg.observe_input(x)
        deriv = rng.uniform(-1, 1)
        reg.observe_gradient(deriv * x)
        inc = reg.grad_stats - prev
        p = reg.p
        assert inc <= E * (p - 1.0) + 1e-9
        prev = reg.grad_stats
