import numpy as np
import pytest
from hypothesis import given, strategies as st

from mdsfeat.errors import DataError, DegenerateConfigurationError, DimensionError, InvalidArgumentError
from mdsfeat.lm import LmOptions
from mdsfeat.mds import (
    Embedding,
    IlmaOptions,
    check_distance_matrix,
    encode_batch,
    encode_new,
    ilma_fit,
    ilma_init,
    pairwise_distances,
    point_objective,
    procrustes_align,
    raw_stress,
    smacof_fit,
    stress1,
)
from mdsfeat.numeric import make_rng


def euclid(x):
    return np.sqrt(((x[:, None, :] - x[None, :, :]) ** 2).sum(-1))


def assert_monotone(trace, slack=1e-9, floor=0.0):
    s = trace.stresses
    assert np.all(s[1:] <= s[:-1] + slack * s[1:] + floor * s[0]), s


# --- stress ------------------------------------------------------------------


def test_raw_stress_examples(rng):
    d = np.array([[0.0, 3.0], [3.0, 0.0]])
    assert raw_stress(d, np.array([[0.0], [3.0]])) == 0.0
    assert raw_stress(d, np.array([[0.0], [1.0]])) == pytest.approx(4.0)
    x = rng.normal(size=(4, 2))
    assert raw_stress(euclid(x), x) < 1e-12


def test_stress1_examples():
    d = np.array([[0.0, 3.0], [3.0, 0.0]])
    assert stress1(d, np.array([[0.0], [3.0]])) == 0.0
    assert stress1(d, np.array([[0.0], [1.0]])) == pytest.approx(2.0)
    assert stress1(d, np.array([[0.0], [2.0]])) == pytest.approx(0.5)
    with pytest.raises(DegenerateConfigurationError):
        stress1(d, np.zeros((2, 1)))


def test_stress_shape_mismatch():
    with pytest.raises(DimensionError):
        raw_stress(np.zeros((3, 3)), np.zeros((2, 2)))


@given(seed=st.integers(0, 2**31), m=st.integers(1, 4))
def test_stress_invariant_under_rigid_motion(seed, m):
    r = np.random.default_rng(seed)
    n = 12
    d = euclid(r.normal(size=(n, 3))) + r.uniform(0, 0.5, size=(n, n))
    d = np.triu(d, 1) + np.triu(d, 1).T
    x = r.normal(size=(n, m))
    q, _ = np.linalg.qr(r.normal(size=(m, m)))
    y = x @ q + r.normal(size=m) * 10
    s0, s1 = raw_stress(d, x), raw_stress(d, y)
    assert abs(s0 - s1) <= 1e-9 * s0


def test_check_distance_matrix_rejects_bad_input():
    good = np.array([[0.0, 1.0], [1.0, 0.0]])
    check_distance_matrix(good)
    for bad in (
        np.array([[0.0, 1.0], [2.0, 0.0]]),
        np.array([[0.0, -1.0], [-1.0, 0.0]]),
        np.array([[1.0, 1.0], [1.0, 0.0]]),
        np.array([[0.0, np.nan], [np.nan, 0.0]]),
    ):
        with pytest.raises(DataError):
            check_distance_matrix(bad)
    with pytest.raises(DimensionError):
        check_distance_matrix(np.zeros((2, 3)))


# --- initialization ------------------------------------------------------------


@pytest.mark.parametrize("strategy", ["random", "largest-first", "smallest-first"])
@pytest.mark.parametrize("m", [1, 3])
def test_init_two_points(strategy, m):
    d = np.array([[0.0, 7.0], [7.0, 0.0]])
    codes, order = ilma_init(d, m, strategy, make_rng(4))
    first, second = codes[order[0]], codes[order[1]]
    np.testing.assert_array_equal(first, np.zeros(m))
    expect = np.zeros(m)
    expect[0] = 7.0
    np.testing.assert_array_equal(second, expect)


def test_init_345_triangle():
    d = np.array([[0.0, 3.0, 4.0], [3.0, 0.0, 5.0], [4.0, 5.0, 0.0]])
    for seed in range(5):
        codes, _ = ilma_init(d, 2, "random", make_rng(seed))
        assert raw_stress(d, codes) < 1e-10


def test_largest_first_starts_at_unique_max(rng):
    x = rng.normal(size=(8, 2))
    d = euclid(x)
    d[2, 5] = d[5, 2] = d.max() + 10.0
    _, order = ilma_init(d, 2, "largest-first", make_rng(0))
    assert set(order[:2]) == {2, 5}
    assert sorted(order) == list(range(8))


def test_smallest_first_starts_at_unique_min(rng):
    x = rng.normal(size=(8, 2)) * 5
    d = euclid(x)
    d[1, 6] = d[6, 1] = 1e-3
    _, order = ilma_init(d, 2, "smallest-first", make_rng(0))
    assert set(order[:2]) == {1, 6}


def test_init_rejects_bad_arguments():
    with pytest.raises(InvalidArgumentError):
        ilma_init(np.zeros((1, 1)), 2, "random", make_rng(0))
    with pytest.raises(InvalidArgumentError):
        ilma_init(np.array([[0.0, 1.0], [1.0, 0.0]]), 0, "random", make_rng(0))
    with pytest.raises(InvalidArgumentError):
        IlmaOptions(strategy="middle-first")


# --- fitting -------------------------------------------------------------------


def test_fit_recovers_planar_points(rng):
    x = rng.normal(size=(10, 2))
    emb, trace = ilma_fit(euclid(x), 2, IlmaOptions(seed=1))
    assert emb.stress1 < 1e-3
    assert_monotone(trace)


def _grid_optimum_three_equidistant(step=1e-3, span=2.0):
    # x0 = 0 and x1 >= 0 without loss of generality
    x1 = np.arange(0.0, span + step / 2, step)
    x2 = np.arange(-span, span + step / 2, step)
    best = np.inf
    for a in x1:
        s = (a - 1.0) ** 2 + (np.abs(x2) - 1.0) ** 2 + (np.abs(x2 - a) - 1.0) ** 2
        best = min(best, s.min())
    return best


def test_fit_three_equidistant_points_matches_grid_search():
    d = np.ones((3, 3)) - np.eye(3)
    oracle = _grid_optimum_three_equidistant()
    assert oracle == pytest.approx(1.0 / 3.0, abs=1e-5)
    for seed in range(5):
        emb, trace = ilma_fit(d, 1, IlmaOptions(seed=seed, tolerance=1e-10, max_sweeps=200))
        assert emb.raw_stress == pytest.approx(oracle, abs=1e-5)
        assert emb.raw_stress <= oracle + 1e-9
        assert_monotone(trace)


@given(seed=st.integers(0, 2**31), n=st.integers(3, 30), q=st.integers(1, 3), extra=st.integers(0, 1))
def test_realizable_distances_are_recovered(seed, n, q, extra):
    r = np.random.default_rng(seed)
    x = r.normal(size=(n, q))
    emb, trace = ilma_fit(euclid(x), q + extra, IlmaOptions(seed=seed % 1000, tolerance=1e-8, max_sweeps=100))
    assert emb.stress1 < 1e-3
    assert_monotone(trace)


@given(seed=st.integers(0, 2**31), n=st.integers(4, 25), m=st.integers(1, 3),
       strategy=st.sampled_from(["random", "largest-first", "smallest-first"]))
def test_sweeps_never_increase_stress(seed, n, m, strategy):
    r = np.random.default_rng(seed)
    d = r.uniform(0.5, 3.0, size=(n, n))
    d = np.triu(d, 1) + np.triu(d, 1).T
    _, trace = ilma_fit(d, m, IlmaOptions(seed=seed % 997, strategy=strategy, max_sweeps=15, tolerance=1e-12))
    assert_monotone(trace)
    assert [s[0] for s in trace.samples] == list(range(len(trace)))


def test_embedding_fields_match_recomputed(rng):
    d = euclid(rng.normal(size=(15, 4)))
    emb, _ = ilma_fit(d, 2, IlmaOptions(seed=3))
    assert emb.raw_stress == pytest.approx(raw_stress(d, emb.codes), rel=1e-9)
    assert emb.stress1 == pytest.approx(stress1(d, emb.codes), rel=1e-9)
    assert emb.dimension == 2


def test_fit_is_deterministic(rng):
    d = euclid(rng.normal(size=(20, 3)))
    a, ta = ilma_fit(d, 2, IlmaOptions(seed=9))
    b, tb = ilma_fit(d, 2, IlmaOptions(seed=9))
    np.testing.assert_array_equal(a.codes, b.codes)
    np.testing.assert_array_equal(ta.stresses, tb.stresses)


def test_compiled_and_generic_backends_agree(rng):
    d = euclid(rng.normal(size=(12, 3)))
    a, ta = ilma_fit(d, 2, IlmaOptions(seed=2, backend="compiled", max_sweeps=5))
    b, tb = ilma_fit(d, 2, IlmaOptions(seed=2, backend="generic", max_sweeps=5))
    np.testing.assert_allclose(ta.stresses, tb.stresses, rtol=1e-6)
    np.testing.assert_allclose(a.codes, b.codes, atol=1e-5)


def test_zero_sweeps_returns_initialization(rng):
    d = euclid(rng.normal(size=(6, 2)))
    emb, trace = ilma_fit(d, 2, IlmaOptions(max_sweeps=0))
    assert len(trace) == 1
    assert trace.stresses[0] == pytest.approx(emb.raw_stress)


def test_rank_two_data_matches_pca_projection(rng):
    basis, _ = np.linalg.qr(rng.normal(size=(4, 2)))
    for seed in range(5):
        r = np.random.default_rng(seed)
        x = r.normal(size=(25, 2)) * [3.0, 1.0] @ basis.T
        x -= x.mean(0)
        emb, _ = ilma_fit(euclid(x), 2, IlmaOptions(seed=seed, tolerance=1e-10, max_sweeps=200))
        _, _, vt = np.linalg.svd(x, full_matrices=False)
        pca = x @ vt[:2].T
        aligned = procrustes_align(emb.codes, pca)
        rms = np.sqrt((x**2).sum(1).mean())
        assert np.linalg.norm(aligned - pca, axis=1).mean() < 1e-2 * rms


def test_procrustes_recovers_rigid_motion(rng):
    a = rng.normal(size=(10, 3))
    q, _ = np.linalg.qr(rng.normal(size=(3, 3)))
    b = a @ q + 5.0
    np.testing.assert_allclose(procrustes_align(a, b), b, atol=1e-10)


# --- SMACOF --------------------------------------------------------------------


def test_smacof_planar(rng):
    x = rng.normal(size=(10, 2))
    emb, trace = smacof_fit(euclid(x), 2, max_iter=2000, tolerance=1e-10)
    assert emb.stress1 < 1e-3
    # once at zero stress the iterates only shuffle rounding noise
    assert_monotone(trace, floor=1e-20)


def test_smacof_two_points_one_update():
    d = np.array([[0.0, 4.0], [4.0, 0.0]])
    emb, trace = smacof_fit(d, 2, max_iter=1)
    assert np.linalg.norm(emb.codes[0] - emb.codes[1]) == pytest.approx(4.0, rel=1e-12)


def test_smacof_time_budget_stops_early(rng):
    d = euclid(rng.normal(size=(60, 5)))
    _, trace = smacof_fit(d, 2, max_iter=10**6, tolerance=1e-300, time_budget=0.05)
    assert trace.times[-1] < 1.0


# --- out-of-sample encoding -------------------------------------------------------


def test_encode_training_row_not_worse(rng):
    d = euclid(rng.normal(size=(30, 4)))
    emb, _ = ilma_fit(d, 2, IlmaOptions(seed=0))
    fitted = pairwise_distances(emb.codes)
    for k in range(30):
        code = encode_new(emb.codes, fitted[k])
        assert point_objective(code, emb.codes, fitted[k]) <= point_objective(emb.codes[k], emb.codes, fitted[k]) + 1e-12


def test_encode_single_anchor():
    code = encode_new(np.array([[2.0]]), np.array([5.0]))
    assert abs(code[0] - 2.0) == pytest.approx(5.0, abs=1e-8)


def test_encode_triangle_centroid():
    tri = np.array([[0.0, 0.0], [1.0, 0.0], [0.5, np.sqrt(3) / 2]])
    c = tri.mean(0)
    code = encode_new(tri, np.linalg.norm(tri - c, axis=1))
    np.testing.assert_allclose(code, c, atol=1e-6)


@given(seed=st.integers(0, 2**31))
def test_encode_not_worse_than_nearest_anchor(seed):
    r = np.random.default_rng(seed)
    codes = r.normal(size=(15, 3))
    dists = r.uniform(0.0, 4.0, size=15)
    code = encode_new(codes, dists)
    start = codes[np.argmin(dists)]
    assert point_objective(code, codes, dists) <= point_objective(start, codes, dists) + 1e-12


def test_encode_validation():
    codes = np.zeros((3, 2))
    with pytest.raises(DimensionError):
        encode_new(codes, np.ones(2))
    with pytest.raises(DataError):
        encode_new(codes, np.array([1.0, -1.0, 1.0]))
    with pytest.raises(DataError):
        encode_new(codes, np.array([1.0, np.inf, 1.0]))


def test_encode_batch_shape(rng):
    codes = rng.normal(size=(5, 2))
    out = encode_batch(codes, rng.uniform(0, 2, size=(3, 5)))
    assert out.shape == (3, 2)
