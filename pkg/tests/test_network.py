import numpy as np
import pytest

from speechdep.network import (
    NetworkConfig,
    NetworkParams,
    backward,
    backward_batch,
    forward,
    forward_batch,
    init_params,
    load_model,
    loss_bce,
    maxpool_time,
    numerical_gradient,
    save_model,
    zeros_like_params,
)

PARAM_FIELDS = ("w_conv", "b_conv", "w_hidden", "b_hidden", "w_out", "b_out")


def _random_instance(seed):
    """Small random net + input; biases jittered so pre-activations avoid 0."""
    rng = np.random.default_rng(seed)
    cfg = NetworkConfig(
        freq_bins=int(rng.integers(2, 9)),
        time_steps=int(rng.integers(2, 11)),
        filters=int(rng.integers(1, 5)),
        pool_kernel=int(rng.integers(1, 5)),
        pool_stride=int(rng.integers(1, 5)),
        hidden=int(rng.integers(1, 6)),
    )
    params = init_params(cfg, seed=seed)
    params.b_conv += rng.normal(scale=0.2, size=params.b_conv.shape)
    params.b_hidden += rng.normal(scale=0.2, size=params.b_hidden.shape)
    params.b_out = float(rng.normal(scale=0.2))
    x = rng.uniform(0.0, 1.0, size=(cfg.freq_bins, cfg.time_steps))
    y = int(rng.integers(0, 2))
    return cfg, params, x, y


def _kink_margin(params, x, cfg):
    """Distance of the forward pass from any ReLU kink or pooling argmax flip."""
    _, cache = forward(params, x, cfg)
    margins = [np.min(np.abs(cache.conv_pre)), np.min(np.abs(cache.hidden_pre))]
    act = cache.conv_act
    for j in range(cfg.pooled_steps):
        lo = j * cfg.pool_stride
        window = list(act[:, lo : lo + cfg.pool_kernel].T)
        window = np.asarray(window)
        if lo + cfg.pool_kernel > cfg.time_steps:  # implicit zero pad competes
            window = np.vstack([window, np.zeros((1, window.shape[1]))])
        if window.shape[0] > 1:
            top2 = np.sort(window, axis=0)[-2:, :]
            margins.append(np.min(top2[1] - top2[0]))
    return min(margins)


def _max_rel_err(analytic, numeric):
    worst = 0.0
    for name in PARAM_FIELDS:
        a = np.atleast_1d(np.asarray(getattr(analytic, name), dtype=float))
        n = np.atleast_1d(np.asarray(getattr(numeric, name), dtype=float))
        denom = np.maximum(np.abs(a) + np.abs(n), 1e-8)
        worst = max(worst, float(np.max(np.abs(a - n) / denom)))
    return worst


def collect_gradient_instances(n_instances=20, h=1e-5):
    """Seeded instances whose loss is smooth within +-h of every parameter."""
    picked = []
    seed = 0
    while len(picked) < n_instances:
        assert seed < 400, "could not find enough kink-free instances"
        cfg, params, x, y = _random_instance(seed)
        seed += 1
        if _kink_margin(params, x, cfg) > 100 * h:
            picked.append((cfg, params, x, y))
    return picked


def test_gradients_match_finite_differences():
    worst = 0.0
    for cfg, params, x, y in collect_gradient_instances(20):
        _, cache = forward(params, x, cfg)
        analytic = backward(params, cache, x, y)
        numeric = numerical_gradient(params, x, y, cfg, h=1e-5)
        worst = max(worst, _max_rel_err(analytic, numeric))
    assert worst < 1e-4, worst


def test_parameter_count_for_reference_architecture():
    cfg = NetworkConfig(freq_bins=513, time_steps=125)
    assert cfg.pooled_steps == 32
    assert cfg.flat_size == 4096
    manual = 128 * 513 + 128 + 128 * 4096 + 128 + 128 + 1
    assert cfg.n_params == manual == 590337


def test_maxpool_hand_case():
    row = np.array([[1.0, 3.0, 2.0, 0.0, 5.0, 4.0]])
    values, argmax = maxpool_time(row, kernel=3, stride=2)
    np.testing.assert_array_equal(values, [[3.0, 5.0, 5.0]])
    np.testing.assert_array_equal(argmax, [[1, 4, 4]])


def test_maxpool_tie_takes_smallest_index():
    row = np.array([[5.0, 5.0, 1.0]])
    _, argmax = maxpool_time(row, kernel=3, stride=3)
    assert argmax[0, 0] == 0


def test_maxpool_padded_zero_can_win_on_raw_input():
    row = np.array([[-1.0, -2.0, -3.0]])
    values, argmax = maxpool_time(row, kernel=4, stride=4)
    assert values[0, 0] == 0.0
    assert argmax[0, 0] == -1


def test_maxpool_kernel_one_is_strided_copy():
    rng = np.random.default_rng(7)
    act = rng.uniform(size=(3, 9))
    values, argmax = maxpool_time(act, kernel=1, stride=2)
    np.testing.assert_array_equal(values, act[:, ::2])
    np.testing.assert_array_equal(argmax, np.tile(np.arange(0, 9, 2), (3, 1)))


def test_forward_validates_shape():
    cfg = NetworkConfig(freq_bins=4, time_steps=6, filters=2, hidden=3)
    params = init_params(cfg, 0)
    with pytest.raises(ValueError):
        forward(params, np.zeros((4, 7)), cfg)
    with pytest.raises(ValueError):
        forward(params, np.zeros((5, 6)), cfg)


def test_forward_extreme_logits_stay_finite():
    cfg = NetworkConfig(freq_bins=2, time_steps=2, filters=1, pool_kernel=1, pool_stride=1, hidden=1)
    params = init_params(cfg, 0)
    params.w_conv[:] = 100.0
    params.w_hidden[:] = 100.0
    params.w_out[:] = 100.0
    with np.errstate(over="raise", invalid="raise"):  # harmless underflow-to-zero allowed
        p_hi, _ = forward(params, np.ones((2, 2)), cfg)
        params.w_out[:] = -100.0
        p_lo, _ = forward(params, np.ones((2, 2)), cfg)
    assert 0.0 <= p_lo < 1e-12 and 1.0 - 1e-12 < p_hi <= 1.0
    assert np.isfinite(loss_bce(p_hi, 0)) and np.isfinite(loss_bce(p_lo, 1))


def test_loss_bce_hand_values():
    assert loss_bce(0.5, 1) == pytest.approx(np.log(2.0))
    assert loss_bce(0.9, 1) == pytest.approx(-np.log(0.9))
    assert loss_bce(0.9, 0) == pytest.approx(-np.log(0.1))


def test_init_params_is_seeded_and_bounded():
    cfg = NetworkConfig(freq_bins=10, time_steps=8, filters=3, hidden=4)
    a = init_params(cfg, seed=5)
    b = init_params(cfg, seed=5)
    c = init_params(cfg, seed=6)
    for name in ("w_conv", "w_hidden", "w_out"):
        np.testing.assert_array_equal(getattr(a, name), getattr(b, name))
        assert not np.array_equal(getattr(a, name), getattr(c, name))
    assert np.abs(a.w_conv).max() <= np.sqrt(6.0 / (cfg.freq_bins + cfg.filters))
    assert np.abs(a.w_hidden).max() <= np.sqrt(6.0 / (cfg.flat_size + cfg.hidden))
    assert not a.b_conv.any() and not a.b_hidden.any() and a.b_out == 0.0


def test_batched_forward_matches_per_sample():
    rng = np.random.default_rng(11)
    cfg = NetworkConfig(freq_bins=6, time_steps=9, filters=3, pool_kernel=4, pool_stride=3, hidden=4)
    params = init_params(cfg, 1)
    params.b_conv += rng.normal(scale=0.1, size=params.b_conv.shape)
    xs = rng.uniform(size=(5, 6, 9))
    batch = forward_batch(params, xs, cfg)
    singles = [forward(params, x, cfg)[0] for x in xs]
    np.testing.assert_allclose(batch.probs, singles, rtol=1e-10, atol=1e-12)


def test_batched_backward_matches_mean_of_per_sample():
    rng = np.random.default_rng(12)
    cfg = NetworkConfig(freq_bins=5, time_steps=7, filters=2, pool_kernel=3, pool_stride=2, hidden=3)
    params = init_params(cfg, 2)
    params.b_hidden += rng.normal(scale=0.1, size=params.b_hidden.shape)
    xs = rng.uniform(size=(4, 5, 7))
    ys = np.array([0, 1, 1, 0])
    cache = forward_batch(params, xs, cfg)
    batched = backward_batch(params, cache, xs, ys, cfg)

    acc = zeros_like_params(params)
    for x, y in zip(xs, ys):
        _, single_cache = forward(params, x, cfg)
        g = backward(params, single_cache, x, int(y))
        for name in PARAM_FIELDS[:-1]:
            getattr(acc, name)[:] += getattr(g, name) / len(xs)
        acc.b_out += g.b_out / len(xs)
    for name in PARAM_FIELDS:
        np.testing.assert_allclose(
            np.asarray(getattr(batched, name)), np.asarray(getattr(acc, name)), rtol=1e-9, atol=1e-12
        )


def test_model_file_round_trip(tmp_path):
    cfg = NetworkConfig(freq_bins=12, time_steps=10, filters=3, hidden=4)
    params = init_params(cfg, 9)
    path = tmp_path / "m.sdm"
    save_model(path, cfg, params)
    cfg2, params2 = load_model(path)
    assert cfg2 == cfg
    for name in PARAM_FIELDS[:-1]:
        np.testing.assert_array_equal(getattr(params, name), getattr(params2, name))
    assert params2.b_out == params.b_out


def test_model_file_detects_corruption(tmp_path):
    cfg = NetworkConfig(freq_bins=4, time_steps=4, filters=2, hidden=2)
    path = tmp_path / "m.sdm"
    save_model(path, cfg, init_params(cfg, 0))
    blob = bytearray(path.read_bytes())
    blob[60] ^= 0xFF
    (tmp_path / "flip.sdm").write_bytes(bytes(blob))
    with pytest.raises(ValueError, match="CRC"):
        load_model(tmp_path / "flip.sdm")
    (tmp_path / "magic.sdm").write_bytes(b"XXXX" + bytes(blob[4:]))
    with pytest.raises(ValueError, match="not a model"):
        load_model(tmp_path / "magic.sdm")


def test_network_config_validation():
    with pytest.raises(ValueError):
        NetworkConfig(freq_bins=0, time_steps=5)
    with pytest.raises(ValueError):
        NetworkConfig(freq_bins=5, time_steps=5, pool_stride=0)
    cfg = NetworkConfig(freq_bins=5, time_steps=5)
    assert cfg.pool_pad == cfg.pool_stride  # defaulted
