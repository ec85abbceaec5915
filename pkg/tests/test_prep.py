import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from reefseg.labelmap import INVALID
from reefseg.prep import (
    SampleMatrix,
    downsample,
    from_labels,
    median_composite,
    normalize,
    stack_bands,
    to_samples,
)
from reefseg.raster import Raster


def raster1(values, mask=None):
    arr = np.asarray(values, dtype=np.float32)[np.newaxis]
    return Raster(arr.shape[2], arr.shape[1], 1, arr, mask)


class TestMedianComposite:
    def test_odd_count(self):
        stack = [raster1([[v]]) for v in (5.0, 1.0, 9.0)]
        assert median_composite(stack).data[0, 0, 0] == 5.0

    def test_even_count_mean_of_middles(self):
        stack = [raster1([[v]]) for v in (2.0, 4.0)]
        assert median_composite(stack).data[0, 0, 0] == 3.0

    def test_all_invalid_stays_invalid(self):
        m = np.array([[False]])
        stack = [raster1([[1.0]], m) for _ in range(3)]
        out = median_composite(stack)
        assert not out.mask[0, 0]

    def test_partial_validity_uses_valid_only(self):
        a = raster1([[10.0]])
        b = raster1([[2.0]], np.array([[False]]))
        out = median_composite([a, b])
        assert out.mask[0, 0]
        assert out.data[0, 0, 0] == 10.0

    def test_empty_stack(self):
        with pytest.raises(ValueError):
            median_composite([])

    def test_shape_mismatch(self):
        with pytest.raises(ValueError):
            median_composite([raster1([[1.0]]), raster1([[1.0, 2.0]])])

    @settings(max_examples=40, deadline=None)
    @given(seed=st.integers(0, 10_000), t=st.integers(1, 5))
    def test_permutation_invariant(self, seed, t):
        rng = np.random.default_rng(seed)
        stack = [
            raster1(rng.normal(size=(3, 4)), rng.random((3, 4)) > 0.3)
            for _ in range(t)
        ]
        a = median_composite(stack)
        order = rng.permutation(t)
        b = median_composite([stack[i] for i in order])
        assert a == b


class TestStackBands:
    def test_rgb_plus_depth_order(self):
        rgb = Raster(2, 1, 3, np.arange(6, dtype=np.float32).reshape(3, 1, 2), None)
        depth = raster1([[9.0, 8.0]])
        out = stack_bands([rgb, depth])
        assert out.bands == 4
        assert out.band(0).tolist() == [[0.0, 1.0]]
        assert out.band(3).tolist() == [[9.0, 8.0]]

    def test_single_raster_identity(self):
        r = raster1([[1.0, 2.0]])
        out = stack_bands([r])
        assert out == r

    def test_mask_is_and(self):
        a = raster1([[1.0, 2.0]], np.array([[True, True]]))
        b = raster1([[3.0, 4.0]], np.array([[True, False]]))
        out = stack_bands([a, b])
        assert out.mask.tolist() == [[True, False]]

    def test_dim_mismatch(self):
        with pytest.raises(ValueError):
            stack_bands([raster1([[1.0]]), raster1([[1.0, 2.0]])])

    def test_empty(self):
        with pytest.raises(ValueError):
            stack_bands([])


def matrix(cols):
    vals = np.asarray(cols, dtype=np.float64).T
    return SampleMatrix(vals, np.arange(vals.shape[0]))


class TestNormalize:
    def test_minmax_affine(self):
        out, params = normalize(matrix([[0.0, 2.0, 4.0]]), "minmax")
        assert out.values[:, 0].tolist() == [0.0, 0.5, 1.0]
        assert params.offset[0] == 0.0 and params.scale[0] == 4.0

    def test_minmax_constant_column(self):
        out, _ = normalize(matrix([[3.0, 3.0, 3.0]]), "minmax")
        assert out.values[:, 0].tolist() == [0.0, 0.0, 0.0]

    def test_zscore_population_sd(self):
        # [1, 3]: mean 2, population sd 1 -> exactly [-1, 1]
        out, params = normalize(matrix([[1.0, 3.0]]), "zscore")
        assert out.values[:, 0].tolist() == [-1.0, 1.0]
        assert params.scale[0] == 1.0

    def test_zscore_constant_column(self):
        out, _ = normalize(matrix([[5.0, 5.0]]), "zscore")
        assert out.values[:, 0].tolist() == [0.0, 0.0]

    def test_inverse_transform(self):
        m = matrix([[0.5, 1.5, 9.0], [2.0, 2.0, 2.0]])
        out, params = normalize(m, "minmax")
        back = params.inverse(out.values)
        assert np.allclose(back, m.values)

    def test_unknown_scheme(self):
        with pytest.raises(ValueError):
            normalize(matrix([[1.0]]), "robust")

    @settings(max_examples=40, deadline=None)
    @given(seed=st.integers(0, 10_000), n=st.integers(2, 40), d=st.integers(1, 4))
    def test_ranges_and_moments(self, seed, n, d):
        rng = np.random.default_rng(seed)
        m = SampleMatrix(rng.normal(size=(n, d)) * 5 + 3, np.arange(n))
        mm, _ = normalize(m, "minmax")
        assert mm.values.min() >= 0.0 and mm.values.max() <= 1.0
        zz, _ = normalize(m, "zscore")
        assert np.abs(zz.values.mean(axis=0)).max() < 1e-9
        pop_sd = np.sqrt((zz.values**2).mean(axis=0))
        assert np.abs(pop_sd - 1.0).max() < 1e-9


class TestSamplesRoundTrip:
    def test_direct_flatten(self):
        r = raster1([[7.0, 8.0]])
        m = to_samples(r)
        assert m.n == 2 and m.d == 1
        assert m.values.tolist() == [[7.0], [8.0]]
        assert m.index_map.tolist() == [0, 1]

    def test_mask_filter(self):
        r = raster1([[7.0, 8.0]], np.array([[False, True]]))
        m = to_samples(r)
        assert m.n == 1
        assert m.index_map.tolist() == [1]

    def test_all_invalid_errors(self):
        r = raster1([[1.0]], np.array([[False]]))
        with pytest.raises(ValueError):
            to_samples(r)

    def test_scatter(self):
        m = SampleMatrix(np.zeros((2, 1)), np.array([0, 3]))
        lm = from_labels(np.array([0, 1]), m, 2, 2)
        assert lm.labels.reshape(-1).tolist() == [0, INVALID, INVALID, 1]

    def test_length_mismatch(self):
        m = SampleMatrix(np.zeros((2, 1)), np.array([0, 1]))
        with pytest.raises(ValueError):
            from_labels(np.array([0, 1, 2]), m, 2, 2)

    def test_constant_scatter(self):
        m = SampleMatrix(np.zeros((3, 1)), np.array([0, 1, 3]))
        lm = from_labels(np.full(3, 4), m, 2, 2)
        assert lm.labels.reshape(-1).tolist() == [4, 4, INVALID, 4]

    @settings(max_examples=40, deadline=None)
    @given(seed=st.integers(0, 10_000))
    def test_sentinels_exactly_on_invalid_pixels(self, seed):
        rng = np.random.default_rng(seed)
        mask = rng.random((4, 5)) > 0.4
        if not mask.any():
            mask[0, 0] = True
        r = Raster(5, 4, 2, rng.normal(size=(2, 4, 5)).astype(np.float32), mask)
        m = to_samples(r)
        lm = from_labels(np.zeros(m.n, dtype=int), m, 5, 4)
        assert ((lm.labels == INVALID) == ~mask).all()


class TestDownsample:
    def test_factor_one_identity(self):
        r = raster1([[1.0, 2.0], [3.0, 4.0]])
        assert downsample(r, 1) == r

    def test_block_mean(self):
        r = raster1([[1.0, 3.0], [5.0, 7.0]])
        out = downsample(r, 2)
        assert (out.width, out.height) == (1, 1)
        assert out.data[0, 0, 0] == 4.0

    def test_valid_only_mean(self):
        mask = np.array([[False, False], [False, True]])
        r = raster1([[1.0, 1.0], [1.0, 9.0]], mask)
        out = downsample(r, 2)
        assert out.data[0, 0, 0] == 9.0

    def test_empty_block_invalid(self):
        mask = np.array([[False, False], [False, False]])
        r = raster1([[1.0, 1.0], [1.0, 1.0]], mask)
        out = downsample(r, 2)
        assert not out.mask[0, 0]

    def test_factor_zero(self):
        with pytest.raises(ValueError):
            downsample(raster1([[1.0]]), 0)

    @settings(max_examples=40, deadline=None)
    @given(w=st.integers(1, 17), h=st.integers(1, 17), f=st.integers(1, 6))
    def test_ceil_dims(self, w, h, f):
        r = Raster(w, h, 1, np.ones((1, h, w), dtype=np.float32), None)
        out = downsample(r, f)
        assert out.width == -(-w // f)
        assert out.height == -(-h // f)
