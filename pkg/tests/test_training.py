import numpy as np
import pytest

from bilinear_retrieval import model as md
from bilinear_retrieval import synthdata as sd
from bilinear_retrieval import training as tr
from bilinear_retrieval.errors import ConfigError, NumericalError

ARCH = md.ArchConfig(num_classes=5)
SPEC = sd.SynthSpec(num_items=5, renders_per_item=3, seed=3)


@pytest.fixture(scope="module")
def samples():
    bundle = sd.generate_dataset(SPEC)
    return [(rec.image, tr.make_targets(rec, ARCH)) for rec in bundle.train]


def fresh_model(seed=0, **overrides):
    return md.build_toy_model(ARCH, seed=seed, **overrides)


class TestTrainStep:
    def test_returns_all_components(self, samples):
        model = fresh_model(1)
        losses = tr.train_step(model, samples[:4], tr.TrainConfig(), tr.Optimizer(tr.TrainConfig()))
        assert set(losses) == {"ce", "attr", "lm", "total"}
        assert losses["total"] == pytest.approx(
            losses["ce"] + losses["attr"] + losses["lm"], rel=1e-12
        )

    def test_pure_id_objective(self, samples):
        model = fresh_model(2)
        cfg = tr.TrainConfig(lambda_attr=0.0, lambda_lm=0.0)
        losses = tr.train_step(
            model, samples[:4], cfg, tr.Optimizer(cfg), use_attr=False, use_lm=False
        )
        assert set(losses) == {"ce", "total"}
        assert losses["total"] == pytest.approx(losses["ce"], rel=1e-12)

    def test_empty_batch_rejected(self):
        model = fresh_model(3)
        with pytest.raises(ConfigError):
            tr.train_step(model, [], tr.TrainConfig(), tr.Optimizer(tr.TrainConfig()))

    def test_nan_aborts_with_diagnostic(self, samples):
        model = fresh_model(4)
        model.params["id.w"][:] = np.inf
        with pytest.raises(NumericalError):
            tr.train_step(model, samples[:2], tr.TrainConfig(), tr.Optimizer(tr.TrainConfig()))

    def test_loss_decreases_over_fifty_steps(self, samples):
        model = fresh_model(5)
        cfg = tr.TrainConfig(learning_rate=3e-3)
        opt = tr.Optimizer(cfg)
        batch = samples[:5]
        trace = [tr.train_step(model, batch, cfg, opt)["total"] for _ in range(50)]
        first = float(np.mean(trace[:5]))
        last = float(np.mean(trace[-5:]))
        assert last < 0.5 * first

    def test_bit_identical_traces_same_seed(self, samples):
        traces = []
        for _ in range(2):
            model = fresh_model(6)
            cfg = tr.TrainConfig()
            opt = tr.Optimizer(cfg)
            traces.append([tr.train_step(model, samples[:4], cfg, opt)["total"] for _ in range(5)])
        assert traces[0] == traces[1]


class TestPretraining:
    def test_landmark_pretraining_isolates_attribute_branch(self, samples):
        model = fresh_model(7)
        before = {n: model.params[n].copy() for n in model.params}
        tr.pretrain_branch(model, "landmark", samples, tr.TrainConfig(max_epochs=1), epochs=1)
        for name, arr in model.params.items():
            if name.startswith("lm."):
                continue
            assert np.array_equal(arr, before[name]), name
        assert any(
            not np.array_equal(model.params[n], before[n])
            for n in model.params
            if n.startswith("lm.")
        )

    def test_attribute_pretraining_reduces_bce(self, samples):
        model = fresh_model(8)
        cfg = tr.TrainConfig(learning_rate=3e-3, batch_size=5)
        history = tr.TrainHistory()
        tr.pretrain_branch(model, "attribute", samples, cfg, epochs=8, history=history)
        rows = [r for r in history.rows if r["phase"] == "pretrain-attribute"]
        assert rows[-1]["attr"] < 0.8 * rows[0]["attr"]
        assert min(r["attr"] for r in rows[1:]) < rows[0]["attr"]

    def test_unknown_branch(self, samples):
        with pytest.raises(ConfigError):
            tr.pretrain_branch(fresh_model(), "fusion", samples, tr.TrainConfig())

    def test_two_phase_schedule_runs_all_phases(self, samples):
        bundle = sd.generate_dataset(SPEC)
        model = fresh_model(9)
        cfg = tr.TrainConfig(max_epochs=1, pretrain_epochs=1)
        history = tr.run_training(model, bundle.train, cfg, two_phase=True)
        phases = [r["phase"] for r in history.rows]
        assert phases == ["pretrain-attribute", "pretrain-landmark", "joint"]

    def test_single_phase_skips_pretraining(self, samples):
        bundle = sd.generate_dataset(SPEC)
        model = fresh_model(10)
        history = tr.run_training(model, bundle.train, tr.TrainConfig(max_epochs=1), two_phase=False)
        assert {r["phase"] for r in history.rows} == {"joint"}


class TestOptimizer:
    def test_sgd_step(self):
        cfg = tr.TrainConfig(optimizer="sgd")
        opt = tr.Optimizer(cfg)
        params = {"w": np.array([1.0, 2.0])}
        opt.step(params, {"w": np.array([0.5, -1.0])}, lr=0.1)
        np.testing.assert_allclose(params["w"], [0.95, 2.1])

    def test_adam_first_step_size(self):
        cfg = tr.TrainConfig(optimizer="adam")
        opt = tr.Optimizer(cfg)
        params = {"w": np.zeros(3)}
        g = np.array([1.0, -2.0, 0.5])
        opt.step(params, {"w": g}, lr=0.1)
        # bias-corrected first Adam step moves every coordinate by ~lr * sign(g)
        np.testing.assert_allclose(params["w"], -0.1 * np.sign(g), rtol=1e-6)

    def test_lr_schedule_halving(self, samples):
        bundle = sd.generate_dataset(SPEC)
        model = fresh_model(11)
        cfg = tr.TrainConfig(max_epochs=5, lr_halving_period=2, pretrain_epochs=0, learning_rate=1e-3)
        history = tr.run_training(model, bundle.train, cfg, two_phase=False)
        lrs = [r["lr"] for r in history.rows]
        np.testing.assert_allclose(lrs, [1e-3, 1e-3, 5e-4, 5e-4, 2.5e-4])


class TestGradCheck:
    def test_full_model_passes(self, samples):
        model = fresh_model(0)
        image, targets = samples[0]
        report = tr.grad_check(model, image, targets, num_coords=60, seed=11)
        assert report.checked >= 60
        assert report.max_rel_error < 1e-5
        assert report.passed

    def test_smooth_micro_model_is_nearly_exact(self, samples):
        # attribute-only path with id loss only: convs + relus are piecewise
        # linear, cross entropy is smooth, so central differences are tight
        arch = md.ArchConfig(num_classes=5, branch_mode="attribute_only",
                             attention=False, fusion_mode="none",
                             attr_channels=(8, 8, 8), attr_feat_channels=8,
                             out_dim=8)
        model = md.build_toy_model(arch, seed=1)
        image, targets = samples[0]
        report = tr.grad_check(model, image, targets, num_coords=40, seed=3,
                               lambda_attr=0.0, lambda_lm=0.0)
        assert report.max_rel_error < 1e-8

    def test_report_counts_skips(self, samples):
        model = fresh_model(12)
        image, targets = samples[1]
        report = tr.grad_check(model, image, targets, num_coords=30, seed=7)
        assert report.checked + report.skipped_kinks >= 30
        assert report.skipped_kinks >= 0

    def test_float32_model_rejected(self, samples):
        arch = md.ArchConfig(num_classes=5, dtype="float32")
        model = md.build_toy_model(arch, seed=0)
        image, targets = samples[0]
        with pytest.raises(ConfigError):
            tr.grad_check(model, image, targets)
