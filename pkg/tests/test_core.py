import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from oracles import brute_slic, quantized_image
from sslic.core import (
    ClusterAccumulator,
    ClusterTable,
    PreconditionError,
    SlicParams,
    accumulate_region,
    assign_labels,
    init_centers,
    perturb_centers,
    reduce_and_update,
    run_slic,
    squared_distance,
)
from sslic.image import DistanceMap, ImageRegion, LabelMap, NDImage
from sslic.parallel import decompose


def flat_image(dims, value=5.0, channels=1):
    return NDImage(dims, channels, np.full(int(np.prod(dims)) * channels, value))


# --- parameters -----------------------------------------------------------


def test_param_defaults():
    p = SlicParams((10, 10))
    assert p.weight_m == 10 and p.enforce_connectivity
    assert p.iterations_for(2) == 10 and p.iterations_for(3) == 5
    assert p.residual_threshold is None


@pytest.mark.parametrize("kwargs", [{"grid": (0, 3)}, {"grid": (3,), "weight_m": 0}, {"grid": (3,), "max_iterations": 0}])
def test_param_validation(kwargs):
    with pytest.raises(PreconditionError):
        SlicParams(**kwargs)


def test_grid_larger_than_image():
    with pytest.raises(PreconditionError):
        init_centers(flat_image((10, 10)), SlicParams((11, 5)))


# --- init / perturb ---------------------------------------------------------


def test_init_four_cells():
    t = init_centers(flat_image((100, 100)), SlicParams((50, 50)))
    assert t.k == 4 and t.stride == 3
    assert t.coords.tolist() == [[25, 25], [75, 25], [25, 75], [75, 75]]


def test_init_single_cell():
    t = init_centers(flat_image((50, 50)), SlicParams((50, 50)))
    assert t.coords.tolist() == [[25, 25]]


def test_init_last_center_clamped():
    t = init_centers(flat_image((7,)), SlicParams((3,)))
    assert t.coords[:, 0].tolist() == [1, 4, 6]


def test_init_reads_intensity():
    img = NDImage((7,), 1, np.arange(7.0))
    t = init_centers(img, SlicParams((3,)))
    assert t.intensities[:, 0].tolist() == [1, 4, 6]


def test_perturb_constant_moves_to_first_neighbour():
    img = flat_image((100, 100))
    t = perturb_centers(img, init_centers(img, SlicParams((50, 50))))
    assert t.coords.tolist() == [[24, 24], [74, 24], [24, 74], [74, 74]]


def test_perturb_moves_off_edge():
    arr = np.zeros((7, 7))
    arr[:, 4:] = 10.0  # step between x=3 and x=4
    img = NDImage.from_array(arr, channels=1)
    table = init_centers(img, SlicParams((7, 7)))
    assert table.coords.tolist() == [[3, 3]]
    # hand-computed |grad|^2 in the 3x3 box: column x=2 -> 0, x=3 -> 25, x=4 -> 25
    moved = perturb_centers(img, table)
    assert moved.coords.tolist() == [[2, 2]]
    assert moved.intensities.tolist() == [[0.0]]


def test_perturb_corner_stays_in_bounds():
    img = NDImage((4, 4), 1, np.arange(16.0))
    table = ClusterTable(1, 2, [[0.0, 0.0, 0.0]])
    moved = perturb_centers(img, table)
    x, y = moved.coords[0]
    assert 0 <= x <= 1 and 0 <= y <= 1


# --- distance ---------------------------------------------------------------


def test_distance_identity():
    p = SlicParams((4, 4))
    assert squared_distance([1, 2, 3, 5, 6], [1, 2, 3], [5, 6], p) == 0.0


def test_distance_one_grid_step():
    p = SlicParams((7, 3), weight_m=10)
    assert squared_distance([0, 0, 0], [0], [7, 0], p) == 100.0


def test_distance_color_only():
    p = SlicParams((4, 4))
    assert squared_distance([3, 4, 0, 2, 2], [0, 0, 0], [2, 2], p) == 25.0


@settings(max_examples=1000, deadline=None)
@given(
    st.integers(1, 3),
    st.integers(1, 3),
    st.floats(0.5, 40),
    st.sampled_from([0.5, 2.0, 3.0, 10.0]),
    st.data(),
)
def test_distance_scale_law(n, c, m, lam, data):
    grid = tuple(data.draw(st.integers(1, 50)) for _ in range(n))
    center = data.draw(st.lists(st.integers(-100, 100), min_size=c + n, max_size=c + n))
    val = data.draw(st.lists(st.integers(-100, 100), min_size=c, max_size=c))
    coord = data.draw(st.lists(st.integers(0, 100), min_size=n, max_size=n))
    dc2 = sum((v - cv) ** 2 for v, cv in zip(val, center))
    spatial = _spatial(center, coord, grid, c)
    d1 = squared_distance(center, val, coord, SlicParams(grid, m))
    d2 = squared_distance(center, val, coord, SlicParams(grid, m * lam))
    # colour term unchanged, spatial term scaled by lambda^2
    assert d1 == pytest.approx(dc2 + m * m * spatial, rel=1e-12, abs=1e-12)
    assert d2 == pytest.approx(dc2 + lam * lam * m * m * spatial, rel=1e-12, abs=1e-12)
    if spatial == 0:
        assert d1 == d2 == dc2


def _spatial(center, coord, grid, c):
    return sum(((x - cc) / s) ** 2 for x, cc, s in zip(coord, center[c:], grid))


# --- assignment -------------------------------------------------------------


def test_assign_single_cluster_uniform():
    img = flat_image((9, 9))
    params = SlicParams((4, 4))
    table = ClusterTable(1, 2, [[5.0, 4.0, 4.0]])
    labels, dists = LabelMap(img.dims), DistanceMap(img.dims)
    assign_labels(img, table, params, labels, dists)
    assert (labels.labels == 0).all()
    assert dists.values[labels.labels == 0].max() == 10 * 10 * 2  # corner: (4/4)^2 * 2 axes


def test_assign_tie_keeps_lower_cluster():
    img = flat_image((5,))
    params = SlicParams((4,))
    table = ClusterTable(1, 1, [[5.0, 0.0], [5.0, 4.0]])
    labels, dists = LabelMap(img.dims), DistanceMap(img.dims)
    assign_labels(img, table, params, labels, dists)
    assert labels.labels.tolist() == [0, 0, 0, 1, 1]  # x=2 is equidistant


def test_assign_restricted_to_region():
    img = flat_image((6, 6))
    table = ClusterTable(1, 2, [[5.0, 3.0, 3.0]])
    labels, dists = LabelMap(img.dims), DistanceMap(img.dims)
    assign_labels(img, table, SlicParams((6, 6)), labels, dists, ImageRegion((0, 0), (6, 2)))
    arr = labels.as_array()
    assert (arr[:2] == 0).all() and not labels.complete
    assert np.isinf(dists.values[12:]).all()


def test_one_iteration_matches_brute_force():
    rng = np.random.default_rng(12)
    dims, grid = (12, 12), (6, 6)
    vals = quantized_image(rng, dims, 3)
    img = NDImage(dims, 3, vals)
    labels, table, _ = run_slic(img, SlicParams(grid, 10.0, 1), workers=1)
    ref_labels, ref_centers, _ = brute_slic(vals, dims, 3, grid, 10.0, 1)
    assert np.array_equal(labels.labels, ref_labels)
    assert np.array_equal(table.centers, ref_centers)


# --- accumulate / reduce ------------------------------------------------------


def test_accumulate_constant_block():
    img = flat_image((2, 2), 3.0)
    labels = LabelMap((2, 2), [0, 0, 0, 0])
    acc = accumulate_region(img, labels, ImageRegion((0, 0), (2, 2)))
    assert list(acc) == [0]
    assert acc[0].count == 4
    assert acc[0].sums.tolist() == [12.0, 2.0, 2.0]


def test_accumulate_empty_region():
    img = flat_image((2, 2))
    assert accumulate_region(img, LabelMap((2, 2), [0] * 4), ImageRegion((0, 0), (0, 2))) == {}


def test_accumulate_rejects_undefined():
    with pytest.raises(PreconditionError):
        accumulate_region(flat_image((2, 2)), LabelMap((2, 2)), ImageRegion((0, 0), (2, 2)))


@settings(max_examples=1000, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_accumulation_merge_equals_single_pass(seed):
    rng = np.random.default_rng(seed)
    n = int(rng.integers(1, 4))
    dims = tuple(int(d) for d in rng.integers(1, 9, size=n))
    c = int(rng.choice([1, 3]))
    k = int(rng.integers(1, 6))
    img = NDImage(dims, c, quantized_image(rng, dims, c))
    labels = LabelMap(dims, rng.integers(0, k, size=img.npix))
    grid = tuple(int(rng.integers(1, d + 1)) for d in dims)
    parts = [accumulate_region(img, labels, s) for s in decompose(dims, grid).slabs]
    merged = {}
    for part in parts:
        for lab, acc in part.items():
            merged[lab] = merged[lab].merge(acc) if lab in merged else acc
    whole = accumulate_region(img, labels, ImageRegion((0,) * n, dims))
    assert merged.keys() == whole.keys()
    coords = np.array(np.unravel_index(np.arange(img.npix), tuple(reversed(dims)))[::-1]).T
    for lab, acc in whole.items():
        members = labels.labels == lab
        expected = np.concatenate([img.pixels[members].astype(np.float64).sum(0), coords[members].sum(0)])
        assert acc.count == members.sum() == merged[lab].count
        assert np.array_equal(acc.sums, expected)
        assert np.array_equal(merged[lab].sums, expected)


def test_reduce_single_point_cluster():
    table = ClusterTable(1, 2, [[7.0, 3.0, 4.0], [1.0, 0.0, 0.0]])
    part = {0: ClusterAccumulator(np.array([14.0, 6.0, 8.0]), 2)}
    new, residual = reduce_and_update(table, [part])
    assert new.centers[0].tolist() == [7.0, 3.0, 4.0]
    assert new.centers[1].tolist() == [1.0, 0.0, 0.0]  # empty cluster unchanged
    assert residual == 0.0


def test_reduce_two_partials_is_mean_of_union():
    raw_a = np.array([[1.0, 0, 0], [3.0, 1, 0]])
    raw_b = np.array([[8.0, 2, 5], [4.0, 0, 1], [9.0, 7, 7]])
    table = ClusterTable(1, 2, [[0.0, 0.0, 0.0]])
    parts = [{0: ClusterAccumulator(r.sum(0), len(r))} for r in (raw_a, raw_b)]
    new, residual = reduce_and_update(table, parts)
    expected = np.vstack([raw_a, raw_b]).mean(0)
    assert np.allclose(new.centers[0], expected, rtol=0, atol=1e-12)
    assert residual == pytest.approx(np.linalg.norm(expected))


# --- full runs -------------------------------------------------------------


def test_uniform_image_gives_grid_cells():
    img = flat_image((100, 100))
    labels, table, residuals = run_slic(img, SlicParams((50, 50)), workers=2)
    arr = labels.as_array()
    for k, (ys, xs) in enumerate([(slice(0, 50), slice(0, 50)), (slice(0, 50), slice(50, 100)),
                                   (slice(50, 100), slice(0, 50)), (slice(50, 100), slice(50, 100))]):
        assert (arr[ys, xs] == k).all()
    assert len(residuals) == 10


def test_worker_counts_are_bitwise_identical():
    rng = np.random.default_rng(7)
    img = NDImage((64, 48), 3, rng.random(64 * 48 * 3) * 100)
    params = SlicParams((8, 8))
    ref = run_slic(img, params, 1)
    for w in (2, 3, 8):
        labels, table, residuals = run_slic(img, params, w)
        assert labels == ref[0] and table == ref[1] and residuals == ref[2]


def test_ownership_checked_run_matches():
    rng = np.random.default_rng(8)
    img = NDImage((20, 17), 1, rng.random(340) * 50)
    params = SlicParams((5, 4), max_iterations=3)
    assert run_slic(img, params, 3, check_ownership=True)[0] == run_slic(img, params, 1)[0]


def test_residual_threshold_stops_early():
    img = flat_image((40, 40))
    _, _, residuals = run_slic(img, SlicParams((20, 20), residual_threshold=1e-9), 1)
    assert len(residuals) < 10 and residuals[-1] < 1e-9


def test_workers_must_be_positive():
    with pytest.raises(ValueError):
        run_slic(flat_image((4, 4)), SlicParams((2, 2)), 0)


@settings(max_examples=60, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_oracle_equivalence_small(seed):
    rng = np.random.default_rng(seed)
    n = int(rng.integers(1, 4))
    dims = tuple(int(d) for d in rng.integers(1, 13, size=n))
    grid = tuple(int(rng.integers(1, d + 1)) for d in dims)
    c = int(rng.choice([1, 3]))
    m = float(rng.uniform(0.5, 40))
    vals = quantized_image(rng, dims, c)
    params = SlicParams(grid, m, int(rng.integers(1, 6)))
    img = NDImage(dims, c, vals)
    ref_labels, _, _ = brute_slic(vals, dims, c, grid, m, params.iterations_for(n))
    for w in (1, 2, 4):
        assert np.array_equal(run_slic(img, params, w)[0].labels, ref_labels)


def _stepwise_distances(img, params):
    """Drive the public steps by hand and collect the distance map after every round."""
    table = perturb_centers(img, init_centers(img, params))
    labels, dists = LabelMap(img.dims), DistanceMap(img.dims)
    slabs = decompose(img.dims, params.grid).slabs
    history = []
    for _ in range(params.iterations_for(img.ndim)):
        for s in slabs:
            assign_labels(img, table, params, labels, dists, s)
        history.append((labels.labels.copy(), dists.values.copy()))
        table, _ = reduce_and_update(table, [accumulate_region(img, labels, s) for s in slabs])
    return history


@settings(max_examples=1000, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_distances_monotone_and_full_coverage(seed):
    rng = np.random.default_rng(seed)
    n = int(rng.integers(1, 4))
    dims = tuple(int(d) for d in rng.integers(1, 11, size=n))
    grid = tuple(int(rng.integers(1, d + 1)) for d in dims)
    c = int(rng.choice([1, 3]))
    img = NDImage(dims, c, rng.random(int(np.prod(dims)) * c) * 100)
    params = SlicParams(grid, float(rng.uniform(0.5, 40)), int(rng.integers(1, 5)))
    history = _stepwise_distances(img, params)
    first_labels, first = history[0]
    assert np.isfinite(first).all()  # every pixel labeled after round 1
    assert (first_labels >= 0).all()
    for (_, before), (_, after) in zip(history, history[1:]):
        assert (after <= before).all()


@settings(max_examples=1000, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_duplicate_cluster_never_wins_a_tie(seed):
    rng = np.random.default_rng(seed)
    n = int(rng.integers(1, 4))
    dims = tuple(int(d) for d in rng.integers(1, 9, size=n))
    grid = tuple(int(rng.integers(1, d + 1)) for d in dims)
    c = int(rng.choice([1, 3]))
    img = NDImage(dims, c, quantized_image(rng, dims, c))
    params = SlicParams(grid, float(rng.uniform(0.5, 40)))
    base = perturb_centers(img, init_centers(img, params))
    i = int(rng.integers(0, base.k))
    j = int(rng.integers(i + 1, base.k + 1))  # copy of cluster i inserted at a later index
    dup = ClusterTable(c, n, np.insert(base.centers, j, base.centers[i], axis=0))

    def assign(table):
        labels, dists = LabelMap(dims), DistanceMap(dims)
        assign_labels(img, table, params, labels, dists)
        return labels.labels, dists.values

    ref_labels, ref_dists = assign(base)
    got_labels, got_dists = assign(dup)
    assert not (got_labels == j).any()
    assert np.array_equal(np.where(got_labels > j, got_labels - 1, got_labels), ref_labels)
    assert np.array_equal(got_dists, ref_dists)
