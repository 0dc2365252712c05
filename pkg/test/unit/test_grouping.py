"""
Unit tests for the multi-scale grouping stages.
"""

from dataclasses import replace

import numpy as np
import pytest

from src.errors import ConfigError, SizeError
from src.geometry import NeighborTable, SampleResult, canonical_reindex
from src.grouping import (
    BranchFeatures,
    GroupingConfig,
    GroupStageParams,
    Pyramid,
    aggregate_group,
    build_pyramid,
    embed_points,
    group_normalize,
    run_stage,
)
from src.numerics import Linear, ParameterStore, Tensor


def stage_params(d, seed=0):
    return GroupStageParams.create(ParameterStore(seed).scope("stage"), d)


def random_parent(n=12, d=4, seed=0):
    rng = np.random.default_rng(seed)
    return BranchFeatures(rng.normal(size=(n, 3)), Tensor(rng.normal(size=(n, d))))


def relu(x):
    return np.maximum(x, 0.0)


@pytest.mark.unit
class TestEmbedding:
    """Test cases for the point embedding."""

    def test_zero_weights(self):
        """W = 0 gives all-zero tokens."""
        feats = embed_points(np.ones((5, 3)), Tensor(np.zeros((3, 4))))
        assert np.all(feats.tokens.data == 0)

    def test_identity_weights(self):
        """W = I with d0 = 3 gives the coordinates back."""
        coords = np.random.default_rng(0).normal(size=(6, 3))
        feats = embed_points(coords, Tensor(np.eye(3)))
        np.testing.assert_array_equal(feats.tokens.data, coords)
        assert feats.points is coords

    def test_matches_matmul(self):
        """A random embedding equals coords @ W."""
        rng = np.random.default_rng(1)
        coords, W = rng.normal(size=(7, 3)), rng.normal(size=(3, 5))
        np.testing.assert_allclose(embed_points(coords, Linear(Tensor(W))).tokens.data, coords @ W)


@pytest.mark.unit
class TestGroupNormalize:
    """Test cases for normalised relative grouping."""

    def test_zero_variance_gives_beta(self):
        """Neighbours equal to their center give rel = 0, sigma = 0 and output beta."""
        params = stage_params(4)
        params.beta.assign(np.array([0.5, -1.0, 2.0, 0.0]))
        parent = BranchFeatures(np.zeros((3, 3)), Tensor(np.ones((3, 4))))
        nbrs = NeighborTable(np.array([[0, 1, 2]]), np.zeros((1, 3)))
        patch = group_normalize(parent, SampleResult(np.array([0])), nbrs, params)
        assert float(patch.sigma) == 0.0
        assert np.all(patch.normalized.data == 0)
        np.testing.assert_array_equal(patch.shifted.data, np.broadcast_to(params.beta.data, (1, 3, 4)))

    def test_unit_std_before_shift(self):
        """Over 1000 random groupings with alpha=1, beta=0 the block std is sigma/(sigma+eps), within 1e-3 of 1."""
        rng = np.random.default_rng(9)
        params = {d: stage_params(d) for d in (2, 4, 8)}
        for _ in range(1000):
            n, d = int(rng.integers(4, 17)), int(rng.choice([2, 4, 8]))
            m, k = int(rng.integers(1, 5)), int(rng.integers(2, 7))
            parent = BranchFeatures(rng.normal(size=(n, 3)), Tensor(rng.normal(size=(n, d))))
            centers = rng.choice(n, size=m, replace=False)
            nbrs = NeighborTable(rng.integers(0, n, size=(m, k)), np.zeros((m, k)))
            patch = group_normalize(parent, SampleResult(centers), nbrs, params[d])
            sigma = float(patch.sigma)
            assert patch.shifted.data.std() == pytest.approx(sigma / (sigma + 1e-5), rel=1e-10)
            if sigma >= 1e-2:
                assert abs(patch.normalized.data.std() - 1.0) <= 1e-3

    def test_feature_scale_invariance(self):
        """Scaling parent tokens by 10 leaves the normalised block unchanged (vanishing eps)."""
        parent = random_parent()
        scaled = BranchFeatures(parent.points, Tensor(parent.tokens.data * 10.0))
        nbrs = NeighborTable(np.array([[1, 2, 3], [4, 5, 6]]), np.zeros((2, 3)))
        centers = SampleResult(np.array([1, 4]))
        params = GroupStageParams.create(ParameterStore(0), 4, eps=1e-12)
        a = group_normalize(parent, centers, nbrs, params).normalized.data
        b = group_normalize(scaled, centers, nbrs, params).normalized.data
        np.testing.assert_allclose(a, b, atol=1e-9)

    def test_group_sigma_scope(self):
        """sigma_scope='group' yields one sigma per group."""
        parent = random_parent()
        nbrs = NeighborTable(np.array([[1, 2, 3], [4, 5, 6]]), np.zeros((2, 3)))
        patch = group_normalize(parent, SampleResult(np.array([1, 4])), nbrs, stage_params(4), "group")
        assert patch.sigma.shape == (2,)

    def test_unknown_sigma_scope(self):
        """Only 'sample' and 'group' are accepted."""
        with pytest.raises(ConfigError):
            GroupingConfig(sigma_scope="batch")


@pytest.mark.unit
class TestAggregateGroup:
    """Test cases for the residual MLP and max-pool."""

    def _patch(self, parent, idx, params):
        nbrs = NeighborTable(np.asarray(idx), np.zeros(np.shape(idx)))
        return group_normalize(parent, SampleResult(np.asarray(idx)[:, 0]), nbrs, params)

    def test_matches_loop_reference(self):
        """n=2, k=3, d=4 against a straight-line loop of Phi + max."""
        params = stage_params(4, seed=3)
        parent = random_parent(seed=3)
        patch = self._patch(parent, [[0, 1, 2], [3, 4, 5]], params)
        out = aggregate_group(patch, params).tokens.data

        def lin(layer, v):
            return v @ layer.W.data + layer.b.data

        x = patch.shifted.data
        for j in range(2):
            rows = []
            for m in range(3):
                h = lin(params.lin_in, x[j, m])
                rows.append(relu(h + lin(params.res2, relu(lin(params.res1, h)))))
            np.testing.assert_allclose(out[j], np.max(rows, axis=0), atol=1e-12)

    def test_single_neighbour_is_identity_pool(self):
        """k = 1 pools a single row."""
        params = stage_params(4)
        patch = self._patch(random_parent(), [[0], [5]], params)
        assert aggregate_group(patch, params).tokens.shape == (2, 8)

    def test_neighbour_order_invariance(self):
        """Permuting a group's neighbour rows leaves the pooled output unchanged."""
        params = stage_params(4, seed=1)
        patch = self._patch(random_parent(seed=1), [[0, 1, 2, 3]], params)
        shuffled = replace(patch, shifted=Tensor(patch.shifted.data[:, [0, 3, 1, 2]]))
        a = aggregate_group(patch, params).tokens.data
        b = aggregate_group(shuffled, params).tokens.data
        np.testing.assert_allclose(a, b, rtol=1e-14, atol=0)

    def test_duplicate_neighbour_rows(self):
        """Repeating a neighbour row does not change the max-pooled output."""
        params = stage_params(4, seed=2)
        patch = self._patch(random_parent(seed=2), [[0, 1, 2]], params)
        doubled = replace(patch, shifted=Tensor(patch.shifted.data[:, [0, 1, 2, 2]]))
        a = aggregate_group(patch, params).tokens.data
        b = aggregate_group(doubled, params).tokens.data
        np.testing.assert_allclose(a, b, rtol=1e-14, atol=0)


@pytest.mark.unit
class TestStagesAndPyramid:
    """Test cases for stage arithmetic and the pyramid."""

    def test_stage_halves_points_and_doubles_width(self):
        """d_ratio=2 halves the points and doubles the channels."""
        out = run_stage(random_parent(16, 4), GroupingConfig(2, 4), stage_params(4))
        assert (out.n, out.c) == (8, 8)

    def test_ratio_one_keeps_points(self):
        """d_ratio=1 keeps every point; the width still doubles."""
        out = run_stage(random_parent(10, 4), GroupingConfig(1, 4), stage_params(4))
        assert (out.n, out.c) == (10, 8)

    def test_too_few_points(self):
        """A stage that would emit no points raises SizeError."""
        with pytest.raises(SizeError):
            run_stage(random_parent(1, 4), GroupingConfig(2, 4), stage_params(4))

    def test_pyramid_shapes(self):
        """N=16, d0=4, four stages: large 2x32, small 1x64."""
        pyramid = Pyramid.create(ParameterStore(0).scope("pyramid"), 4, 4, GroupingConfig(2, 16))
        coords = np.random.default_rng(0).normal(size=(16, 3))
        large, small = build_pyramid(coords[canonical_reindex(coords)], pyramid)
        assert (large.n, large.c) == (2, 32)
        assert (small.n, small.c) == (1, 64)
        assert pyramid.dims == [4, 8, 16, 32, 64]

    def test_stage_arithmetic(self):
        """After stage t there are N/2^t points of width d0*2^t."""
        pyramid = Pyramid.create(ParameterStore(0), 8, 3, GroupingConfig(2, 8))
        levels = pyramid.levels(np.random.default_rng(1).normal(size=(64, 3)))
        assert [(lv.n, lv.c) for lv in levels] == [(64, 8), (32, 16), (16, 32), (8, 64)]

    def test_permutation_invariance(self):
        """Shuffled input gives bit-identical branches after canonical ordering."""
        pyramid = Pyramid.create(ParameterStore(2), 4, 3, GroupingConfig(2, 6))
        coords = np.random.default_rng(3).normal(size=(32, 3))
        shuffled = coords[np.random.default_rng(4).permutation(32)]
        a = build_pyramid(coords[canonical_reindex(coords)], pyramid)
        b = build_pyramid(shuffled[canonical_reindex(shuffled)], pyramid)
        for x, y in zip(a, b):
            assert x.tokens.data.tobytes() == y.tokens.data.tobytes()
            assert x.points.tobytes() == y.points.tobytes()

    def test_parameter_names(self):
        """Stage parameters are scoped by stage index."""
        pyramid = Pyramid.create(ParameterStore(0).scope("pyramid"), 4, 2, GroupingConfig())
        names = [p.name for p in pyramid.parameters()]
        assert names[0] == "pyramid.embed.W"
        assert "pyramid.stage1.res2.b" in names
        assert len(names) == 1 + 2 * 8
