"""
Unit tests for model configuration, the classifier and the part segmenter.
"""

import os

import numpy as np
import pytest

from src.errors import ConfigError, LabelError, SizeError
from src.geometry import PointCloud
from src.model import (
    FUSION_MODES,
    Classifier,
    ModelConfig,
    PartSegmenter,
    build_model,
    feature_propagate,
    forward_classify,
    forward_part_segment,
)
from src.numerics import Linear, ParameterStore, Tensor


SEG_EXTRA = {"task": "segment", "num_categories": 2, "num_parts": 4, "label_embed_dim": 4, "seg_hidden": 8}


@pytest.mark.unit
class TestModelConfig:
    """Test cases for ModelConfig validation."""

    def test_defaults_are_valid(self):
        """The default configuration validates."""
        assert ModelConfig().validate().violations() == []

    def test_heads_must_divide_widths(self):
        """heads=3 cannot split a 128-wide branch."""
        with pytest.raises(ConfigError, match="heads=3"):
            ModelConfig(heads=3).validate()

    def test_points_must_divide(self):
        """n_input must be divisible by d_ratio^stages."""
        problems = ModelConfig(n_input=100).violations()
        assert any("n_input=100" in p for p in problems)

    def test_unknown_key(self):
        """from_dict names keys it does not know."""
        with pytest.raises(ConfigError, match="colour"):
            ModelConfig.from_dict({"colour": "red"})

    def test_unknown_fusion(self):
        """Fusion must be one of the four strategies."""
        with pytest.raises(ConfigError, match="fusion"):
            ModelConfig(fusion="concat").validate()

    def test_single_stage_rejected(self):
        """Two branches need at least two stages."""
        with pytest.raises(ConfigError, match="stages=1"):
            ModelConfig(stages=1).validate()

    def test_aux_loss_needs_branch_fusion(self):
        """Per-branch losses only exist for per-branch fusions."""
        with pytest.raises(ConfigError, match="aux_branch_loss"):
            ModelConfig(aux_branch_loss=True, fusion="all_tokens").validate()

    def test_branch_widths(self, tiny_cfg):
        """The large branch is half as wide as the small one."""
        assert (tiny_cfg.c_large, tiny_cfg.c_small) == (16, 32)

    def test_replace_revalidates_keys(self, tiny_cfg):
        """replace returns a new config and leaves the original alone."""
        changed = tiny_cfg.replace(L=3)
        assert changed.L == 3 and tiny_cfg.L == 1


@pytest.mark.unit
class TestClassifier:
    """Test cases for the dual-branch classifier."""

    def test_logit_shape(self, tiny_cfg, make_cloud):
        """forward returns 1 x num_classes logits."""
        assert Classifier(tiny_cfg).forward(make_cloud()).shape == (1, 3)

    def test_wrong_point_count(self, tiny_cfg, make_cloud):
        """Clouds must have exactly n_input points."""
        with pytest.raises(SizeError):
            Classifier(tiny_cfg).forward(make_cloud(n=16))

    @pytest.mark.parametrize("fusion", FUSION_MODES)
    def test_permutation_invariance(self, tiny_cfg, fusion):
        """Shuffling the input points gives bit-identical logits under every fusion."""
        model = Classifier(tiny_cfg.replace(fusion=fusion))
        rng = np.random.default_rng(5)
        for _ in range(3):
            coords = rng.normal(size=(32, 3))
            expected = forward_classify(model, coords).tobytes()
            for _ in range(3):
                assert forward_classify(model, coords[rng.permutation(32)]).tobytes() == expected

    def test_same_seed_same_parameters(self, tiny_cfg):
        """Two models built from one config are identical."""
        a, b = Classifier(tiny_cfg), Classifier(tiny_cfg)
        for p, q in zip(a.parameters(), b.parameters()):
            assert p.name == q.name and p.data.tobytes() == q.data.tobytes()

    def test_fusion_parameter_counts_differ(self, tiny_cfg):
        """Each fusion strategy has its own parameter count."""
        counts = {f: sum(p.size for p in Classifier(tiny_cfg.replace(fusion=f)).parameters()) for f in FUSION_MODES}
        assert len(set(counts.values())) == 4

    def test_feature_fusions_skip_tokens(self, tiny_cfg):
        """Feature fusions build neither class tokens nor the layer stack."""
        names = [p.name for p in Classifier(tiny_cfg.replace(fusion="all_features")).parameters()]
        assert not any(n.startswith(("cls.", "stack.")) for n in names)
        assert "align.W" in names

    def test_token_fusion_parameter_names(self, tiny_cfg):
        """Part-token fusion registers tokens, the stack and two heads."""
        names = [p.name for p in Classifier(tiny_cfg).parameters()]
        assert "cls.large" in names and "cls.small" in names
        assert "stack.0.large.W_q" in names
        assert "head_large.out.b" in names and "head_small.hidden.W" in names

    @pytest.mark.parametrize("fusion", FUSION_MODES)
    def test_every_fusion_runs(self, tiny_cfg, make_cloud, fusion):
        """All four fusions produce finite logits."""
        logits = Classifier(tiny_cfg.replace(fusion=fusion)).forward(make_cloud())
        assert logits.shape == (1, 3)
        assert np.all(np.isfinite(logits.data))

    def test_loss_needs_label(self, tiny_cfg, make_cloud):
        """An unlabelled sample cannot be scored."""
        with pytest.raises(LabelError):
            Classifier(tiny_cfg).loss(make_cloud())

    def test_aux_loss_adds_branch_terms(self, tiny_cfg, make_cloud):
        """With aux_branch_loss the loss exceeds the fused cross entropy."""
        cloud = make_cloud(label=1)
        plain, _ = Classifier(tiny_cfg).loss(cloud)
        aux, _ = Classifier(tiny_cfg.replace(aux_branch_loss=True)).loss(cloud)
        assert aux.item() > plain.item()

    def test_msa_baseline_runs(self, tiny_cfg, make_cloud):
        """The self-attention baseline shares the classifier surface."""
        model = build_model(tiny_cfg.replace(msa_baseline=True))
        assert model.forward(make_cloud()).shape == (1, 3)


@pytest.mark.unit
class TestFeaturePropagate:
    """Test cases for inverse-distance interpolation."""

    def test_single_coarse_point_broadcasts(self):
        """One coarse point copies its features to every fine point."""
        out = feature_propagate(np.zeros((1, 3)), Tensor([[1.0, 2.0]]), np.ones((4, 3)), None)
        np.testing.assert_allclose(out.data, np.tile([1.0, 2.0], (4, 1)))

    def test_coincident_point_dominates(self):
        """A fine point sitting on a coarse point takes its features."""
        coarse = np.array([[0.0, 0, 0], [1.0, 0, 0], [0.0, 1, 0]])
        feats = Tensor(np.array([[1.0, 0.0], [0.0, 1.0], [5.0, 5.0]]))
        out = feature_propagate(coarse, feats, coarse[:1], None)
        np.testing.assert_allclose(out.data[0], [1.0, 0.0], atol=1e-6)

    def test_weights_are_convex(self):
        """Interpolated values stay inside the coarse feature range."""
        rng = np.random.default_rng(0)
        coarse, fine = rng.normal(size=(6, 3)), rng.normal(size=(10, 3))
        feats = Tensor(rng.uniform(-1, 1, size=(6, 1)))
        out = feature_propagate(coarse, feats, fine, None).data
        assert out.min() >= feats.data.min() - 1e-12
        assert out.max() <= feats.data.max() + 1e-12

    def test_unit_applies_skip_and_relu(self):
        """With a unit the skip features are appended before Linear + ReLU."""
        unit = Linear.create(ParameterStore(0), "fp", 2 + 3, 4)
        out = feature_propagate(np.zeros((2, 3)) + [[0, 0, 0], [1, 0, 0]], Tensor(np.ones((2, 2))),
                                np.zeros((5, 3)), Tensor(np.ones((5, 3))), unit)
        assert out.shape == (5, 4)
        assert out.data.min() >= 0.0


@pytest.mark.unit
class TestPartSegmenter:
    """Test cases for per-point part logits."""

    def test_output_shape(self, tiny_cfg, make_cloud):
        """forward gives n_input x num_parts logits."""
        model = PartSegmenter(tiny_cfg.replace(**SEG_EXTRA))
        assert model.forward(make_cloud(), 1).shape == (32, 4)

    def test_rows_follow_input_order(self, tiny_cfg, make_cloud):
        """Permuting the input permutes the logit rows the same way."""
        model = PartSegmenter(tiny_cfg.replace(**SEG_EXTRA))
        cloud = make_cloud(seed=2)
        perm = np.random.default_rng(3).permutation(32)
        a = model.forward(cloud, 0).data
        b = model.forward(cloud.coords[perm], 0).data
        np.testing.assert_array_equal(b, a[perm])

    def test_category_changes_logits(self, tiny_cfg, make_cloud):
        """The category one-hot conditions every point."""
        model = PartSegmenter(tiny_cfg.replace(**SEG_EXTRA))
        cloud = make_cloud()
        assert not np.allclose(model.forward(cloud, 0).data, model.forward(cloud, 1).data)

    def test_category_out_of_range(self, tiny_cfg, make_cloud):
        """Categories outside [0, num_categories) are refused."""
        with pytest.raises(LabelError):
            PartSegmenter(tiny_cfg.replace(**SEG_EXTRA)).forward(make_cloud(), 2)

    def test_loss_needs_part_labels(self, tiny_cfg, make_cloud):
        """A sample without part labels cannot be scored."""
        with pytest.raises(LabelError):
            PartSegmenter(tiny_cfg.replace(**SEG_EXTRA)).loss(make_cloud())

    def test_loss_is_finite(self, tiny_cfg):
        """Mean per-point cross entropy over a labelled sample."""
        coords = np.random.default_rng(4).normal(size=(32, 3))
        cloud = PointCloud(coords, seg_labels=np.arange(32) % 4, category=1)
        loss, logits = PartSegmenter(tiny_cfg.replace(**SEG_EXTRA)).loss(cloud)
        assert np.isfinite(loss.item())
        assert logits.shape == (32, 4)

    def test_build_model_dispatches_on_task(self, tiny_cfg):
        """build_model picks the segmenter for task=segment."""
        assert isinstance(build_model(tiny_cfg.replace(**SEG_EXTRA)), PartSegmenter)
        assert isinstance(build_model(tiny_cfg), Classifier)


@pytest.mark.unit
@pytest.mark.slow
@pytest.mark.skipif(os.environ.get("XBRANCH_SLOW") != "1", reason="set XBRANCH_SLOW=1 for the permutation sweep")
class TestPermutationSweep:
    """100 clouds x 10 permutations for every fusion and the part segmenter."""

    CLOUDS = 100
    PERMUTATIONS = 10

    @pytest.mark.parametrize("fusion", FUSION_MODES)
    def test_classifier_logits_are_bitwise_invariant(self, tiny_cfg, fusion):
        """Every shuffle of every cloud reproduces the logits byte for byte."""
        model = Classifier(tiny_cfg.replace(fusion=fusion))
        rng = np.random.default_rng(11)
        for _ in range(self.CLOUDS):
            coords = rng.normal(size=(32, 3))
            expected = forward_classify(model, coords).tobytes()
            for _ in range(self.PERMUTATIONS):
                assert forward_classify(model, coords[rng.permutation(32)]).tobytes() == expected

    def test_segment_rows_follow_every_shuffle(self, tiny_cfg):
        """Per-point logits move with their points, bit for bit."""
        model = PartSegmenter(tiny_cfg.replace(**SEG_EXTRA))
        rng = np.random.default_rng(12)
        for i in range(self.CLOUDS):
            coords = rng.normal(size=(32, 3))
            category = i % 2
            expected = forward_part_segment(model, coords, category)
            for _ in range(self.PERMUTATIONS):
                perm = rng.permutation(32)
                np.testing.assert_array_equal(forward_part_segment(model, coords[perm], category), expected[perm])
