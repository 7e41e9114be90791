from __future__ import annotations

import json
import math

import numpy as np
import pytest

from linkmod.core import MultipolygonSpec, residuals_flat
from linkmod.multiquad import MultiquadSpec, classify
from linkmod.sampler import (
    NearWallError,
    OracleError,
    component_count,
    component_summary,
    fiber_clusters,
    graph_chi,
    sample_fiber,
    sample_variety,
    slice_value,
    torus_dist,
    wall_gap,
)
from multiquad_instances import instances

CASE_A_EXAMPLE = MultiquadSpec.from_lengths(2, 1, 3, 2.5, 1.8, 1.2)


@pytest.fixture(scope="module")
def case_a_complex():
    return sample_variety(CASE_A_EXAMPLE.to_multipolygon(), 100000, 0)


def test_empty_variety():
    cx = sample_variety(MultipolygonSpec([[1, 1], [5, 1]]), 2000, 0)
    assert cx.status == "EmptyVariety" and cx.empty
    assert component_count(cx) == 0


def test_rigid_triangle_two_clusters():
    cx = sample_variety(MultipolygonSpec([[3], [4, 5]]), 5000, 0)
    assert component_count(cx) == 2
    assert graph_chi(cx, 0) == 2


def test_samples_lie_on_variety(case_a_complex):
    assert np.abs(residuals_flat(case_a_complex.points, case_a_complex.spec)).max() <= 1e-9


def test_case_a_example_components(case_a_complex):
    assert component_count(case_a_complex) == 2


def test_fiber_clusters_case_a(case_a_complex):
    assert fiber_clusters(case_a_complex, 0.0) == 4
    assert fiber_clusters(case_a_complex, math.pi) == 2


def test_fiber_clusters_outside_image():
    spec = MultiquadSpec.from_lengths(1, 1, 2.5, 1, 1.5, 1.5)
    img = classify(spec).image
    cx = sample_variety(spec.to_multipolygon(), 20000, 0)
    assert fiber_clusters(cx, 0.5 * img.theta_min) == 0


def test_equilateral_pentagon_connected():
    assert component_count(sample_variety(MultipolygonSpec([[1], [1, 1, 1, 1]]), 50000, 0)) == 1


def test_km_polygon_disconnected():
    assert component_count(sample_variety(MultipolygonSpec([[4], [4, 4, 1, 1]]), 100000, 0)) >= 2


def test_graph_chi_equilateral_quadrilateral():
    cx = sample_variety(MultipolygonSpec([[1], [1, 1, 1]]), 50000, 0, check_walls=False)
    assert component_count(cx) == 1
    assert graph_chi(cx, 1) == -3


def test_graph_chi_figure_eights():
    # case B with a (1,1) pair: two figure-8s
    spec = MultiquadSpec.from_lengths(2, 1, 2.2, 0.8, 2.0, 1.9)
    r = classify(spec)
    assert r.homeo_description == "two figure-8s"
    cx = sample_variety(spec.to_multipolygon(), 100000, 0)
    assert (component_count(cx), graph_chi(cx, 1)) == (2, -2)


def test_graph_chi_four_circles():
    cx = sample_variety(MultiquadSpec.from_lengths(2, 1, 2.2, 1.9, 2.1, 2.3).to_multipolygon(), 100000, 0)
    assert (component_count(cx), graph_chi(cx, 1)) == (4, 0)


def test_graph_chi_needs_dimension(case_a_complex):
    with pytest.raises(OracleError):
        graph_chi(case_a_complex)


@pytest.mark.slow
@pytest.mark.parametrize("case, v, L", instances(), ids=lambda x: str(x))
def test_graph_chi_matches_classifier(case, v, L):
    spec = MultiquadSpec.from_lengths(*L)
    cx = sample_variety(spec.to_multipolygon(), 100000, 0)
    r = classify(spec)
    assert component_count(cx) == r.components
    assert graph_chi(cx, 1) == r.euler_characteristic


def test_near_wall_rejected():
    spec = MultipolygonSpec([[1.0, 1.0], [1.0, 1.0 + 1e-8], [1.5, 1.5]])
    assert wall_gap(spec) < 1e-6
    with pytest.raises(NearWallError):
        sample_variety(spec, 100, 0)


def test_exact_wall_allowed():
    # signed sums coincide exactly; only near misses are refused
    spec = MultipolygonSpec([[1], [1, 1, 1]])
    assert wall_gap(spec) >= 1e-6
    assert component_count(sample_variety(spec, 2000, 0)) >= 1


def test_bad_sample_count():
    with pytest.raises(ValueError):
        sample_variety(MultipolygonSpec([[3], [4, 5]]), 0, 0)


def test_determinism_bit_identical():
    spec = CASE_A_EXAMPLE.to_multipolygon()
    a = json.dumps(sample_variety(spec, 20000, 7).to_json())
    b = json.dumps(sample_variety(spec, 20000, 7).to_json())
    assert a == b


def test_save_roundtrip(tmp_path):
    cx = sample_variety(MultipolygonSpec([[3], [4, 5]]), 2000, 1)
    out = tmp_path / "c.json"
    cx.save(out)
    data = json.loads(out.read_text())
    assert data["components"] == 2 and data["seed"] == 1
    assert len(data["labels"]) == len(data["points"])


def test_fixed_slice_sampling():
    spec = MultipolygonSpec([[1.1, 0.9], [1, 1, 1], [1, 1]])
    fib = sample_fiber(spec, 0.3, 20000, 0)
    assert np.allclose(fib.points[:, 0], slice_value(0.3))
    assert component_count(fib) == 4
    assert graph_chi(fib, 1) == 0


def test_fiber_needs_two_edge_chain():
    with pytest.raises(OracleError):
        sample_fiber(MultipolygonSpec([[1, 1, 1], [1, 1], [1, 1]]), 0.3, 10, 0)


def test_component_summary_base_cells(case_a_complex):
    s = component_summary(case_a_complex)
    assert s.count == 2 and s.base_dim == 1
    assert all(len(c) > 0 for c in s.cells)


def test_torus_distance_wraps():
    assert torus_dist(np.array([0.05]), np.array([2 * math.pi - 0.05])) == pytest.approx(0.1)
