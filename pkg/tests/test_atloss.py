import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from oracles import numeric_gradient
from scatbox.atloss import (
    ATConfig,
    CE_ONLY,
    CLASS_ORDER,
    TargetTransform,
    at_loss,
    at_loss_grad,
    batch_at_loss_and_grad,
    cross_entropy,
    default_at_config,
    default_transforms,
    load_transform_bank,
    save_transform_bank,
    softmax,
)
from scatbox.errors import InputError, ParameterError


def onehot(c, n=6):
    y = np.zeros(n)
    y[c] = 1.0
    return y


WOODWIND = ATConfig(transforms=(TargetTransform("woodwind", (1, 1, 0, 0, 1, 0), 10.0),))


class TestSoftmax:
    def test_uniform_for_equal_logits(self):
        np.testing.assert_allclose(softmax(np.full(6, 3.3)), 1 / 6, atol=1e-15)
        assert softmax(np.zeros(6)).sum() == pytest.approx(1.0, abs=1e-12)

    @given(st.floats(-500, 500))
    def test_shift_invariance(self, c):
        logits = np.array([0.3, -1.2, 4.0, 0.0, 2.5, -3.3])
        np.testing.assert_allclose(softmax(logits + c), softmax(logits), atol=1e-12)

    def test_scalar_example(self):
        p = softmax(np.array([2.0, 0, 0, 0, 0, 0]))
        e2 = np.exp(2.0)
        assert p[0] == pytest.approx(e2 / (e2 + 5), rel=1e-12)
        np.testing.assert_allclose(p[1:], 1 / (e2 + 5), rtol=1e-12)

    def test_nonfinite_rejected(self):
        with pytest.raises(InputError):
            softmax(np.array([1.0, np.inf, 0, 0, 0, 0]))


class TestCrossEntropy:
    def test_uniform_logits_give_log6(self):
        assert cross_entropy(onehot(2), np.zeros(6)) == pytest.approx(np.log(6), rel=1e-12)

    def test_monotone_decrease_with_confidence(self):
        losses = [
            cross_entropy(onehot(0), np.array([a, 0, 0, 0, 0, 0]))
            for a in (0.0, 1.0, 3.0, 10.0, 40.0)
        ]
        assert all(b < a for a, b in zip(losses, losses[1:]))
        assert losses[-1] >= 0

    def test_scalar_example(self):
        e2 = np.exp(2.0)
        got = cross_entropy(onehot(0), np.array([2.0, 0, 0, 0, 0, 0]))
        assert got == pytest.approx(-np.log(e2 / (e2 + 5)), rel=1e-12)

    def test_non_one_hot_rejected(self):
        with pytest.raises(InputError):
            cross_entropy(np.array([0.5, 0.5, 0, 0, 0, 0]), np.zeros(6))
        with pytest.raises(InputError):
            cross_entropy(np.zeros(6), np.zeros(6))


class TestATLoss:
    def test_zero_weights_reduce_to_cross_entropy(self):
        rng = np.random.default_rng(0)
        zeroed = ATConfig(
            transforms=tuple(
                TargetTransform(t.name, t.vector, 0.0) for t in default_transforms()
            )
        )
        for _ in range(20):
            logits = rng.standard_normal(6) * 3
            y = onehot(rng.integers(6))
            assert at_loss(y, logits, zeroed) == pytest.approx(
                cross_entropy(y, logits), abs=1e-12
            )

    def test_perfect_prediction_kills_penalties(self):
        logits = np.array([60.0, 0, 0, 0, 0, 0])
        cfg = default_at_config()
        assert at_loss(onehot(0), logits, cfg) == pytest.approx(0.0, abs=1e-10)

    def test_within_family_confusion_unpenalized_by_woodwind(self):
        # clarinet mistaken for saxophone: both woodwind, zero penalty
        logits = np.array([0, 0, 0, 0, 30.0, 0])
        assert at_loss(onehot(0), logits, WOODWIND) == pytest.approx(
            cross_entropy(onehot(0), logits), abs=1e-12
        )

    def test_loss_nonnegative_and_shift_invariant(self):
        rng = np.random.default_rng(1)
        cfg = default_at_config()
        for _ in range(50):
            logits = rng.standard_normal(6) * 5
            y = onehot(rng.integers(6))
            loss = at_loss(y, logits, cfg)
            assert loss >= 0
            assert at_loss(y, logits + 11.7, cfg) == pytest.approx(loss, abs=1e-10)

    def test_penalty_ordering_over_all_confusion_pairs(self):
        # equally confident wrong predictions: cross-family must cost
        # strictly more than within-family, for every target class
        family = np.array(WOODWIND.transforms[0].vector)
        for target in range(6):
            in_losses, out_losses = [], []
            for pred in range(6):
                if pred == target:
                    continue
                loss = at_loss(onehot(target), 25.0 * onehot(pred), WOODWIND)
                (in_losses if family[pred] == family[target] else out_losses).append(loss)
            assert max(in_losses) < min(out_losses)


class TestATGrad:
    def test_zero_weights_give_softmax_minus_target(self):
        rng = np.random.default_rng(2)
        logits = rng.standard_normal(6)
        y = onehot(3)
        np.testing.assert_allclose(
            at_loss_grad(y, logits, CE_ONLY), softmax(logits) - y, atol=1e-12
        )

    def test_gradient_vanishes_at_perfect_prediction(self):
        logits = np.array([80.0, 0, 0, 0, 0, 0])
        g = at_loss_grad(onehot(0), logits, default_at_config())
        assert np.max(np.abs(g)) < 1e-10

    def test_matches_central_differences(self):
        rng = np.random.default_rng(3)
        cfg = default_at_config()
        worst = 0.0
        for _ in range(300):
            logits = rng.standard_normal(6) * 2
            y = onehot(rng.integers(6))
            analytic = at_loss_grad(y, logits, cfg)
            numeric = numeric_gradient(lambda L: at_loss(y, L, cfg), logits, h=1e-5)
            err = np.max(np.abs(analytic - numeric)) / max(np.max(np.abs(numeric)), 1e-12)
            worst = max(worst, err)
        assert worst <= 1e-6


class TestBatchForm:
    def test_matches_scalar_loop(self):
        rng = np.random.default_rng(4)
        cfg = default_at_config()
        logits = rng.standard_normal((8, 6))
        labels = rng.integers(0, 6, 8)
        targets = np.stack([onehot(c) for c in labels])
        loss, grad = batch_at_loss_and_grad(targets, logits, cfg)
        per = [at_loss(targets[i], logits[i], cfg) for i in range(8)]
        assert loss == pytest.approx(np.mean(per), rel=1e-12)
        for i in range(8):
            np.testing.assert_allclose(
                grad[i], at_loss_grad(targets[i], logits[i], cfg) / 8, atol=1e-12
            )

    def test_shape_mismatch_rejected(self):
        with pytest.raises(InputError):
            batch_at_loss_and_grad(np.eye(6)[:4], np.zeros((3, 6)))


class TestDefaultBank:
    def test_sixteen_transforms(self):
        bank = default_transforms()
        assert len(bank) == 16
        assert len({t.name for t in bank}) == 16

    def test_woodwind_vector_and_weights(self):
        bank = {t.name: t for t in default_transforms()}
        assert bank["woodwind"].vector == (1, 1, 0, 0, 1, 0)
        assert all(t.weight == 10.0 for t in default_transforms())

    def test_indicators_are_binary(self):
        for t in default_transforms():
            if not t.name.endswith("frequency"):
                assert set(t.vector) <= {0.0, 1.0}

    def test_chordophone_aerophone_partition(self):
        bank = {t.name: t for t in default_transforms()}
        total = np.array(bank["chordophone"].vector) + np.array(bank["aerophone"].vector)
        np.testing.assert_array_equal(total, np.ones(6))

    def test_unit_max_normalization(self):
        for t in default_transforms():
            assert np.max(np.abs(t.vector)) == pytest.approx(1.0)

    def test_class_order_is_canonical(self):
        assert CLASS_ORDER == ("clarinet", "flute", "trumpet", "violin", "saxophone", "cello")

    def test_bank_file_roundtrip(self, tmp_path):
        bank = default_transforms()
        path = tmp_path / "bank.tsv"
        save_transform_bank(path, bank)
        loaded = load_transform_bank(path)
        assert len(loaded) == len(bank)
        for a, b in zip(loaded, bank):
            assert a.name == b.name and a.weight == b.weight
            np.testing.assert_allclose(a.vector, b.vector, rtol=1e-6)

    def test_lambda_override(self):
        cfg = default_at_config(lambda_scale=2.5)
        assert all(t.weight == 2.5 for t in cfg.transforms)


def test_negative_weight_rejected():
    with pytest.raises(ParameterError):
        TargetTransform("bad", (1, 0, 0, 0, 0, 0), -1.0)
