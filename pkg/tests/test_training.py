import numpy as np
import pytest

from cubic import codec
from cubic.errors import ConfigError
from cubic.model import ModelConfig, init_params
from cubic.training import Adam, SampleSet, TrainConfig, predict, train

CFG = ModelConfig(n_stocks=3, window=2, embed_dim=4, hidden_dim=8, n_hidden=2, seed=0)


def toy_samples(rng, n_dates=60, lo=1, hi=None):
    feats = rng.normal(size=(n_dates, 3, 16))
    t = np.arange(lo, hi or n_dates)
    y = feats[t, :, 0].mean(axis=1) * 2
    bits = codec.encode(codec.scale_to_unit(y, codec.TargetScaler()))
    return SampleSet(feats, 0, 2, t, bits, y)


def test_sample_windows(rng):
    s = toy_samples(rng)
    w = s.windows(np.array([0, 3]))
    assert w.shape == (2, 2, 3, 16)
    assert np.array_equal(w[1, -1], s.features[s.t[3]])
    assert np.array_equal(w[1, 0], s.features[s.t[3] - 1])
    with pytest.raises(ValueError):
        SampleSet(s.features, 0, 3, np.array([1]), s.bits[:1], s.y_std[:1])


def test_adam_first_step_is_lr_sized():
    p = {"w": np.array([1.0, -2.0, 3.0])}
    opt = Adam(p, lr=0.01)
    opt.step({"w": np.array([0.5, -4.0, 1e-3])})
    assert np.allclose(p["w"], [1.0 - 0.01, -2.0 + 0.01, 3.0 - 0.01], atol=1e-7)


def test_adam_decoupled_decay_with_zero_grad():
    p = {"w": np.array([2.0])}
    Adam(p, lr=0.1, weight_decay=0.5).step({"w": np.array([0.0])})
    assert p["w"][0] == pytest.approx(2.0 * (1 - 0.05))


def test_lr_zero_leaves_params_unchanged(rng):
    s = toy_samples(rng)
    start = init_params(CFG)
    params, _ = train(s, s, CFG, TrainConfig(learning_rate=0.0, max_epochs=3), params=start)
    assert params.equals(start)


def test_training_is_deterministic(rng):
    s = toy_samples(rng)
    tc = TrainConfig(max_epochs=3, loss_variant="ce+trend", seed=7)
    a, log_a = train(s, s, CFG, tc)
    b, log_b = train(s, s, CFG, tc)
    assert a.equals(b)
    assert log_a.epochs == log_b.epochs


def test_log_columns_follow_variant(rng):
    s = toy_samples(rng)
    _, ce = train(s, s, CFG, TrainConfig(max_epochs=1, loss_variant="ce_only"))
    _, mean = train(s, s, CFG, TrainConfig(max_epochs=1, loss_variant="ce+mean"))
    assert all(b["l_conf"] == 0.0 for b in ce.batches)
    assert all(b["l_conf"] != 0.0 for b in mean.batches)
    assert len(ce.batches) == int(np.ceil(59 / 32))


def test_loss_decreases_and_best_checkpoint(rng):
    s = toy_samples(rng, n_dates=200)
    params, log = train(s, s, CFG, TrainConfig(max_epochs=15, learning_rate=3e-3))
    assert log.epochs[-1]["train_l_ce"] < log.epochs[0]["train_l_ce"]
    best = log.best()
    assert best["val_ic"] == max(e["val_ic"] for e in log.epochs)
    out = predict(s, params, CFG)
    assert np.corrcoef(out.decoded_v, s.y_std)[0, 1] == pytest.approx(best["val_ic"])


def test_early_stopping(rng):
    s = toy_samples(rng)
    _, log = train(s, s, CFG, TrainConfig(learning_rate=0.0, max_epochs=30, early_stop_patience=2))
    assert log.stopped_early and len(log.epochs) == 3 and log.best_epoch == 1


@pytest.mark.parametrize("kw", [dict(learning_rate=-1), dict(batch_size=0), dict(beta1=1.0),
                                dict(loss_variant="ce+median")])
def test_train_config_validation(kw):
    with pytest.raises((ConfigError, ValueError)):
        TrainConfig(**kw)
