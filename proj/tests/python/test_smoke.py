import numpy as np
import pytest

import breakwater_design as bw


@pytest.fixture(scope="module")
def domain():
    return bw.synthetic_case(32)


def test_synthetic_case(domain):
    assert domain.width == 32
    assert domain.height == 32
    assert len(domain.targets) == 2
    bathy = domain.bathymetry
    assert bathy.shape == (32, 32)
    assert bathy[31, 31] > bathy[5, 5]
    assert domain.land_mask[0, 0]


def test_cost_examples():
    assert bw.cost([[(0, 0), (3, 4)]]) == pytest.approx(5.0)
    assert bw.cost([]) == 0.0
    assert bw.cost([[(0, 0), (1, 0), (1, 1)], [(5, 5), (5, 7)]]) == pytest.approx(4.0)


def test_constraints(domain):
    feasible, violations = bw.check_constraints([[(14.0, 14.0), (20.0, 18.0)]], domain)
    assert feasible
    assert violations == []
    feasible, violations = bw.check_constraints([[(14.0, 14.0), (90.0, 18.0)]], domain)
    assert not feasible
    assert any(kind == "out_of_bounds" for kind, _ in violations)


def test_rasterize(domain):
    mask = bw.rasterize([[(10.5, 10.5), (13.5, 10.5)]], domain)
    assert mask.dtype == bool
    assert mask[10, 10] and mask[10, 13]
    assert mask.sum() == 4


def test_simulate_deterministic(domain):
    field_a = bw.simulate([[(18.0, 18.0), (24.0, 22.0)]], domain)
    field_b = bw.simulate([[(18.0, 18.0), (24.0, 22.0)]], domain)
    np.testing.assert_array_equal(field_a, field_b)
    assert field_a.min() >= 0.0
    # land corner absorbs
    assert field_a[0, 0] == 0.0
    heights = bw.wave_height_at_targets([], domain)
    assert len(heights) == 2
    assert all(h > 0 for h in heights)


def test_encode_shape(domain):
    mask = bw.encode([[(18.0, 18.0), (24.0, 22.0)]], domain, seed=7)
    assert mask.shape == (3, 32, 32)
    assert set(np.unique(mask[0])) <= {0.0, 1.0}
    assert mask[2].min() >= 0.0 and mask[2].max() <= 1.0


def test_metrics():
    assert bw.dominates((1, 1), (2, 2))
    assert not bw.dominates((1, 2), (2, 1))
    assert bw.hypervolume([(1, 1)], (2, 2)) == pytest.approx(1.0)
    assert bw.hypervolume([(1, 2), (2, 1)], (3, 3)) == pytest.approx(3.0)


def test_small_optimization(domain):
    result = bw.optimize(
        domain,
        approach="baseline",
        seed=3,
        budget=80,
        init_size=40,
        pop_size=12,
        arch_size=6,
    )
    assert result["real_evals"] <= 80
    archive = result["archive"]
    assert archive
    costs = [row["cost"] for row in archive]
    whs = [row["wh"] for row in archive]
    for i in range(len(archive)):
        for j in range(len(archive)):
            if i != j:
                assert not bw.dominates((costs[i], whs[i]), (costs[j], whs[j]))
    hvs = [row["hv"] for row in result["trace"]]
    assert all(b >= a - 1e-12 for a, b in zip(hvs, hvs[1:]))
