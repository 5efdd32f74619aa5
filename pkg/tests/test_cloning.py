import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from causalmask import envs
from causalmask.cloning import (PolicyModel, TrainConfig, evaluate, features,
                                history_frames, init_mlp, manual_mask,
                                mlp_loss_and_grad, open_loop_mse,
                                ridge_gradient, train)
from causalmask.data import Dataset
from causalmask.masking import ObservationMask


def linear_policy_data(n=40, T=6, seed=0, noise=0.0):
    g = np.random.default_rng(seed)
    S = g.standard_normal((n, T, 3))
    K = np.array([[1.5, -2.0, 0.5], [0.3, 0.0, -1.0]])
    A = S @ K.T + 0.25 + noise * g.standard_normal((n, T, 2))
    return Dataset.from_arrays(S, S.copy(), A), K


def test_exact_recovery_of_linear_policy():
    data, K = linear_policy_data()
    model = train(data, None, TrainConfig(lam=0.0))
    W = model.weights["W"]
    assert np.allclose(W[:3].T, K, atol=1e-6)
    assert np.allclose(W[3:], 0, atol=1e-6)
    assert np.allclose(model.weights["b"], 0.25, atol=1e-6)


def test_all_masked_predicts_mean_action():
    data, _ = linear_policy_data(noise=0.1)
    model = train(data, ObservationMask([1, 1, 1]))
    frames = history_frames(data.stacked("o"), 2)
    pred = model.act_on_frames(frames)
    mean = data.stacked("a")[:, 1:].reshape(-1, 2).mean(axis=0)
    assert np.allclose(pred, mean, atol=1e-12)


def test_singular_without_penalty():
    data, _ = linear_policy_data()
    S = data.stacked("s")
    dup = Dataset.from_arrays(S, np.concatenate([S, S[..., :1]], axis=-1), data.stacked("a"))
    with pytest.raises(ValueError, match="lam > 0"):
        train(dup, None, TrainConfig(lam=0.0))
    train(dup, None, TrainConfig(lam=1e-3))


def test_ridge_gradient_vanishes():
    data, _ = linear_policy_data(noise=0.3, seed=2)
    for mask in (None, ObservationMask([0, 1, 0])):
        model = train(data, mask, TrainConfig(lam=0.5))
        gW, gb = ridge_gradient(model, data)
        assert np.linalg.norm(gW) < 1e-8 and np.linalg.norm(gb) < 1e-8


def test_mlp_gradient_check():
    g = np.random.default_rng(0)
    for d_in, hidden, d_out in ((3, 4, 1), (5, 7, 2)):
        w = init_mlp(d_in, d_out, hidden, g)
        z = g.standard_normal((9, d_in))
        y = g.standard_normal((9, d_out))
        _, grad = mlp_loss_and_grad(w, z, y)
        for name, p in w.items():
            num = np.zeros_like(p)
            for idx in np.ndindex(p.shape):
                old = p[idx]
                p[idx] = old + 1e-6
                up = mlp_loss_and_grad(w, z, y)[0]
                p[idx] = old - 1e-6
                down = mlp_loss_and_grad(w, z, y)[0]
                p[idx] = old
                num[idx] = (up - down) / 2e-6
            rel = np.linalg.norm(num - grad[name]) / max(np.linalg.norm(num), 1e-12)
            assert rel < 1e-4, name


def test_mlp_fits_and_is_deterministic():
    data, _ = linear_policy_data(n=60, noise=0.05)
    cfg = TrainConfig(kind="mlp", epochs=40, seed=3)
    a = train(data, None, cfg)
    b = train(data, None, cfg)
    for k in a.weights:
        assert np.array_equal(a.weights[k], b.weights[k])
    var = data.stacked("a").var()
    assert open_loop_mse(a, data) < 0.2 * var


@settings(max_examples=30)
@given(st.sampled_from(["ridge", "mlp"]), st.integers(0, 4), st.floats(-1e3, 1e3),
       st.integers(0, 2**32 - 1))
def test_masked_coordinate_has_no_effect(kind, coord, value, seed):
    data, _ = linear_policy_data(n=10, T=4, seed=seed % 7)
    S = data.stacked("s")
    obs = np.concatenate([S, S[..., :2] ** 2], axis=-1)
    data = Dataset.from_arrays(S, obs, data.stacked("a"))
    bits = [0, 0, 0, 0, 0]
    bits[coord] = 1
    model = train(data, ObservationMask(bits), TrainConfig(kind=kind, epochs=2))
    g = np.random.default_rng(seed)
    frames = g.standard_normal((8, 2, 5))
    base = model.act_on_frames(frames)
    frames[:, :, coord] = value
    assert np.array_equal(model.act_on_frames(frames), base)


def test_features_layout():
    # newest frame first, masked coordinate zeroed in every frame
    frames = np.array([[[1.0, 2.0, 3.0], [4.0, 5.0, 6.0]]])
    out = features(frames, ObservationMask([0, 1, 0]))
    assert np.array_equal(out, [[1.0, 0.0, 3.0, 4.0, 0.0, 6.0]])


def test_history_zero_padding():
    obs = np.arange(1, 7.0).reshape(1, 3, 2)
    h = history_frames(obs, 2)
    assert np.array_equal(h[0, 0], [[1, 2], [0, 0]])
    assert np.array_equal(h[0, 2], [[5, 6], [3, 4]])


def test_model_json_round_trip(tmp_path):
    data, _ = linear_policy_data()
    for cfg in (TrainConfig(), TrainConfig(kind="mlp", epochs=2)):
        model = train(data, ObservationMask([0, 0, 1]), cfg)
        model.save(tmp_path / "m.json")
        back = PolicyModel.load(tmp_path / "m.json")
        frames = np.random.default_rng(0).standard_normal((5, 2, 3))
        assert np.array_equal(back.act_on_frames(frames), model.act_on_frames(frames))
        assert back.mask == model.mask and back.history == 2


def test_manual_masks():
    assert manual_mask(envs.cartpole_spec()).to_list() == [0, 0, 0, 0, 1]
    assert manual_mask(envs.reacher_spec()).to_list() == [0, 0, 0, 0, 0, 0, 1, 1]


def test_evaluate_deterministic_and_validated():
    spec = envs.cartpole_spec(steps=30)
    data = envs.generate_dataset(spec, 50, "intervened", 0)
    model = train(data, manual_mask(spec))
    a = evaluate(model, spec, 5, 11)
    b = evaluate(model, spec, 5, 11)
    assert np.array_equal(a.losses, b.losses) and a.rollouts == 5
    assert np.all(np.isfinite(a.losses))
    with pytest.raises(ValueError):
        evaluate(model, spec, 0, 0)
    with pytest.raises(ValueError):
        evaluate(model, envs.reacher_spec(), 2, 0)


def test_policy_history_interface_matches_offline_features():
    spec = envs.cartpole_spec(steps=10)
    data = envs.generate_dataset(spec, 5, "intervened", 0)
    model = train(data)
    obs = data.stacked("o")
    offline = model.act_on_frames(history_frames(obs, 2))
    model.reset(5)
    online = np.stack([model.act(obs[:, t]) for t in range(10)], axis=1)
    assert np.allclose(online, offline, rtol=0, atol=1e-12)


def test_config_validation():
    with pytest.raises(ValueError):
        TrainConfig(kind="cnn")
    with pytest.raises(ValueError):
        TrainConfig(lam=-1.0)
    with pytest.raises(ValueError):
        TrainConfig(history=0)
    data, _ = linear_policy_data()
    with pytest.raises(ValueError, match="mask"):
        train(data, ObservationMask([0, 1]))
