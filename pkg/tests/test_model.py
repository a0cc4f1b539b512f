import numpy as np
import pytest

import gradcheck
from cubic.errors import ConfigError, NonFiniteActivationError
from cubic.model import (
    INIT_SCHEMES, ModelConfig, embed_stock, forward, forward_logits, init_params, init_weight,
    pair_probabilities, pool, predict_from_logits,
)


def small_cfg(**kw):
    base = dict(n_stocks=4, window=3, embed_dim=6, hidden_dim=10, n_hidden=2, seed=3)
    base.update(kw)
    return ModelConfig(**base)


def test_same_seed_same_params():
    a, b = init_params(small_cfg()), init_params(small_cfg())
    assert a.equals(b)
    assert not a.equals(init_params(small_cfg(seed=4)))


def test_layer_shapes():
    cfg = ModelConfig(n_stocks=30)
    shapes = {k: v.shape for k, v in init_params(cfg).items()}
    assert shapes["emb0.w"] == (16, 32) and shapes["emb1.w"] == (32, 32)
    assert shapes["hid0.w"] == (5 * 96, 128)
    assert shapes["head.w"] == (128, 30) and shapes["head.b"] == (30,)
    assert all(np.all(v == 0) for k, v in init_params(cfg).items() if k.endswith(".b"))


@pytest.mark.parametrize("kw", [dict(out_dim=28), dict(init_scheme="orthogonal"), dict(dropout_p=1.0),
                                dict(n_stocks=0)])
def test_config_validation(kw):
    with pytest.raises(ConfigError):
        small_cfg(**kw)


def test_zero_params_give_zero_embedding(rng):
    params = {k: np.zeros_like(v) for k, v in init_params(small_cfg()).items()}
    assert np.all(embed_stock(rng.normal(size=(4, 16)), params).data == 0)


def test_identical_stocks_identical_embeddings(rng):
    params = init_params(small_cfg())
    row = rng.normal(size=16)
    e = embed_stock(np.stack([row, row, rng.normal(size=16)]), params).data
    assert np.array_equal(e[0], e[1]) and not np.array_equal(e[0], e[2])


def test_pool_examples():
    assert pool(np.array([[1.0, 2.0], [3.0, 0.0]])).data.tolist() == [3, 2, 2, 1, 1, 0]
    single = np.array([[0.5, -1.5]])
    assert pool(single).data.tolist() == [0.5, -1.5] * 3


def test_zero_logits():
    out = predict_from_logits(np.zeros(30))
    assert np.all(out.bit_probs == 0.5)
    assert out.gc_mean == 0.5 and out.gc_trend == 0.5
    # ties resolve to bit 1
    assert np.all(out.predicted_bits == 1)


def test_pair_probabilities_sum_to_one(rng):
    p = pair_probabilities(rng.normal(0, 30, size=(100, 30)))
    assert np.allclose(p.sum(axis=-1), 1.0, atol=1e-12)
    assert np.all(p.max(axis=-1) >= 0.5)


def test_eval_deterministic_and_train_mode_uses_dropout(rng):
    cfg = small_cfg(dropout_p=0.5)
    params = init_params(cfg)
    x = rng.normal(size=(3, 4, 16))
    assert forward(x, params, cfg).equals(forward(x, params, cfg))
    a = forward(x, params, cfg, mode="train", rng=np.random.default_rng(0))
    assert not np.array_equal(a.logits, forward(x, params, cfg).logits)
    with pytest.raises(ValueError):
        forward(x, params, cfg, mode="test")


def test_permutation_invariance(rng):
    cfg = small_cfg(n_stocks=7)
    params = init_params(cfg)
    x = rng.normal(size=(5, 3, 7, 16))
    base = forward(x, params, cfg)
    for _ in range(20):
        assert forward(x[:, :, rng.permutation(7)], params, cfg).equals(base)


def test_shape_errors(rng):
    cfg = small_cfg()
    params = init_params(cfg)
    with pytest.raises(ValueError):
        forward_logits(rng.normal(size=(2, 2, 4, 16)), params, cfg)
    with pytest.raises(ValueError):
        forward_logits(rng.normal(size=(2, 3, 4, 15)), params, cfg)


def test_non_finite_activation_names_layer(rng):
    cfg = small_cfg()
    params = init_params(cfg)
    params["hid1.w"][0, 0] = np.inf
    with pytest.raises(NonFiniteActivationError) as info:
        forward(rng.normal(size=(3, 4, 16)), params, cfg)
    assert info.value.layer == "hid1"


@pytest.mark.parametrize("seed", [0, 1])
def test_gradients_match_finite_differences(seed):
    assert gradcheck.max_relative_error(seed) <= 1e-4


def test_saturated_correct_logits_have_tiny_gradient():
    from cubic.autograd import Tensor
    from cubic.losses import default_weights, total_loss
    bits = np.array([[1, 0] * 7 + [1]])
    o = np.where(np.eye(2)[bits].reshape(1, -1) == 1, 20.0, -20.0)
    t = Tensor(o, requires_grad=True)
    total_loss(bits, t, default_weights(15)).graph.backward()
    assert np.linalg.norm(t.grad) < 1e-6


@pytest.mark.parametrize("scheme,target", [
    ("normal_0.01", 0.01**2),
    ("kaiming_normal_fan_in", 2 / 400),
    ("kaiming_uniform_fan_in", 2 / 400),
    ("kaiming_normal_fan_out", 2 / 250),
    ("xavier_uniform", 2 / 650),
    ("xavier_normal", 2 / 650),
])
def test_init_variance(scheme, target):
    w = init_weight(scheme, 400, 250, np.random.default_rng(1))
    assert abs(w.var() / target - 1) < 0.1
    assert set(INIT_SCHEMES) >= {scheme}
