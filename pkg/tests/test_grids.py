import numpy as np
import pytest

from ergohj.grids import Grid, GridOptions, RATIO_CAP, build_grid, domain_scale, refine
from ergohj.model import COMPACT_SUPPORT, ProblemSpec


def spec_ip(**kw):
    base = dict(m=2.0, d=3, delta=1.0, rho=1.0, a=0.0, eta=2.0, R=1.0)
    base.update(kw)
    return ProblemSpec(**base)


def test_uniform_partition():
    g = build_grid(spec_ip(R=0.5), 1.0, GridOptions(n=4, r_max=1.0, uniform=True))
    np.testing.assert_allclose(g.nodes, [0.0, 0.25, 0.5, 0.75, 1.0])


def test_strong_drift_domain_covers_balance_radius():
    g = build_grid(spec_ip(), 100.0)
    assert g.R_max >= 4.0 * 200.0**0.25  # >= 15.04


def test_uniform_refinement_nested():
    g = build_grid(spec_ip(), 1.0, GridOptions(n=8, r_max=2.0, uniform=True))
    g2 = refine(g)
    np.testing.assert_allclose(g2.nodes[::2], g.nodes)


@pytest.mark.parametrize(
    "kw,beta",
    [
        (dict(), 1e6),
        (dict(), 1e2),
        (dict(delta=0.0), 1e4),
        (dict(delta=0.0, a=2.0), 1e3),
        (dict(delta=-0.5), 100.0),
        (dict(delta=0.0, a=2.0, potential_kind=COMPACT_SUPPORT, R_prime=2.0), 50.0),
    ],
)
def test_graded_grid_invariants(kw, beta):
    spec = spec_ip(**kw)
    g = build_grid(spec, beta, GridOptions(n=1024))
    h = np.diff(g.nodes)
    ratios = h[1:] / h[:-1]
    assert g.nodes[0] == 0.0
    assert np.all(h > 0)
    assert ratios.min() >= 1.0 - 1e-9
    assert ratios.max() <= RATIO_CAP + 1e-9
    assert g.nodes[-1] == pytest.approx(g.R_max, rel=1e-12)
    assert g.n == 1024


def test_origin_refinement_at_large_beta():
    coarse = build_grid(spec_ip(), 1.0, GridOptions(n=1024))
    fine = build_grid(spec_ip(), 1e6, GridOptions(n=1024))
    assert fine.nodes[1] < coarse.nodes[1]
    # first cell resolves the near-origin gradient layer ~ sqrt(2/(beta V0))
    assert fine.nodes[1] < 2e-3


def test_rmax_cap_and_floor():
    with pytest.raises(ValueError):
        build_grid(spec_ip(), 1.0, GridOptions(n=64, r_max=0.5))
    g = build_grid(spec_ip(), 1e12, GridOptions(n=512, rmax_cap=100.0))
    assert g.R_max == 100.0


def test_domain_scale_regimes():
    assert domain_scale(spec_ip(), 100.0) == pytest.approx(200.0**0.25)
    assert domain_scale(spec_ip(delta=0.0), 50.0) == pytest.approx(50.0)
    # plateau domains clear the slope-mismatch bias target (sqrt(beta) law)
    plateau = domain_scale(spec_ip(delta=0.0, a=2.0), 100.0)
    assert plateau == pytest.approx((2.0 * 100.0 * 3.3e5) ** 0.5 / 4.0)
    weak = domain_scale(spec_ip(delta=-0.5), 100.0)
    assert weak * 4.0 >= 2e4  # boundary cost target


def test_grid_validation():
    with pytest.raises(ValueError):
        Grid(nodes=np.array([0.0, 1.0, 0.5]), kind="uniform", R_max=1.0)
    with pytest.raises(ValueError):
        Grid(nodes=np.array([0.1, 0.5, 1.0]), kind="uniform", R_max=1.0)
    with pytest.raises(ValueError):  # spacing ratio above the cap
        Grid(nodes=np.array([0.0, 0.1, 0.4, 1.0]), kind="graded", R_max=1.0)
