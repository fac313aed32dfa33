import json

import numpy as np
import pytest

import drivemon.net as net
from drivemon.errors import ArtifactError, DataError, TrainingError
from drivemon.net import (
    AdamState,
    AutoencoderModel,
    TrainConfig,
    adam_step,
    backward,
    build_model,
    encode,
    forward,
    load_model,
    mse_loss,
    new_model,
    save_model,
    sigmoid,
    train,
)

from oracles import central_difference_grads, max_relative_gradient_error

TOY_DIMS = (10, 6, 4, 4, 6, 10)
TOY_ACTS = ("linear", "sigmoid", "linear", "sigmoid", "linear")


def toy_model(seed=0):
    return new_model(TOY_DIMS, TOY_ACTS, seed=seed)


def test_architectures():
    prime = build_model("prime", seed=1)
    refined = build_model("refined", seed=1)
    assert prime.dims == (322, 322, 182, 143, 143, 182, 322)
    assert refined.dims == (301, 301, 176, 141, 141, 176, 301)
    for m in (prime, refined):
        assert m.activations == ("linear", "sigmoid", "linear", "linear", "sigmoid", "linear")
        assert m.bottleneck_dim < m.input_dim
        # symmetric widths: layer l matches layer (7 - l)
        outs = m.dims[1:]
        assert outs == outs[::-1]
    with pytest.raises(DataError):
        build_model("bogus", seed=1)


def test_parameter_counts():
    prime = build_model("prime", seed=0)
    layer2 = prime.weights[1].size + prime.biases[1].size
    assert layer2 == 322 * 182 + 182 == 58_786
    expected = sum(
        i * o + o for i, o in zip(prime.dims[:-1], prime.dims[1:])
    )
    assert prime.parameter_count() == expected


def test_glorot_init_bounds_and_zero_biases():
    model = build_model("prime", seed=42)
    for W, b, (fan_out, fan_in) in zip(model.weights, model.biases,
                                       [w.shape for w in model.weights]):
        limit = np.sqrt(6.0 / (fan_in + fan_out))
        assert np.max(np.abs(W)) <= limit
        assert np.array_equal(b, np.zeros(fan_out))


def test_build_is_deterministic():
    a = build_model("refined", seed=9)
    b = build_model("refined", seed=9)
    for Wa, Wb in zip(a.weights, b.weights):
        assert np.array_equal(Wa, Wb)
    c = build_model("refined", seed=10)
    assert not np.array_equal(a.weights[0], c.weights[0])


def test_sigmoid_stable_at_extremes():
    z = np.array([-1e4, -40.0, 0.0, 40.0, 1e4])
    s = sigmoid(z)
    assert np.all(np.isfinite(s))
    assert s[0] == 0.0 and s[-1] == 1.0
    assert s[2] == 0.5


def test_forward_zero_network():
    model = toy_model()
    for W in model.weights:
        W[:] = 0.0
    out, _ = forward(model, np.ones(10))
    # sigmoid(0) = 0.5 propagates through zero weights to a zero linear output
    assert np.array_equal(out, np.zeros(10))


def test_forward_identity_single_layer():
    model = new_model([3, 3], ["linear"], seed=0)
    model.weights[0][:] = np.eye(3)
    model.biases[0][:] = 0.0
    x = np.array([1.0, -2.0, 3.0])
    out, _ = forward(model, x)
    assert np.array_equal(out, x)


def test_forward_222_hand_computed():
    model = AutoencoderModel(
        variant="custom", dims=(2, 2, 2), activations=("sigmoid", "linear"),
        weights=[np.array([[1.0, 2.0], [3.0, 4.0]]), np.array([[1.0, -1.0], [2.0, 1.0]])],
        biases=[np.array([0.5, -0.5]), np.array([0.0, 1.0])],
    )
    out, cache = forward(model, np.array([0.1, 0.2]))
    # z1 = [1.0, 0.6]; a1 = sigmoid(z1); out = [a1_0 - a1_1, 2 a1_0 + a1_1 + 1]
    expected = np.array([0.0854022724042095, 3.107773463485805])
    assert np.max(np.abs(out - expected)) < 1e-12
    assert np.max(np.abs(cache.zs[0] - np.array([1.0, 0.6]))) < 1e-15


def test_forward_dim_mismatch():
    with pytest.raises(DataError):
        forward(toy_model(), np.zeros(11))


def test_forward_batch_matches_single():
    model = toy_model(3)
    rng = np.random.default_rng(0)
    X = rng.random((5, 10))
    batch_out, _ = forward(model, X)
    for i in range(5):
        single, _ = forward(model, X[i])
        assert np.max(np.abs(batch_out[i] - single)) < 1e-15


def test_encode_hits_bottleneck():
    model = build_model("prime", seed=0)
    h = encode(model, np.zeros(322))
    assert h.shape == (143,)


def test_mse_examples():
    assert mse_loss(np.array([1.0, 2.0]), np.array([1.0, 2.0])) == 0.0
    assert mse_loss(np.array([2.0, 3.0]), np.array([1.0, 2.0])) == 1.0
    assert mse_loss(np.array([3.0, 4.0]), np.array([0.0, 0.0])) == 12.5
    with pytest.raises(DataError):
        mse_loss(np.zeros(2), np.zeros(3))


def test_backward_matches_finite_differences():
    model = toy_model(0)
    rng = np.random.default_rng(1000)
    x = rng.random(10)
    _, cache = forward(model, x)
    dWs, dbs = backward(model, cache, x)
    params = model.weights + model.biases

    def loss():
        out, _ = forward(model, x)
        return mse_loss(out, x)

    numeric = central_difference_grads(loss, params, h=1e-5)
    assert max_relative_gradient_error(dWs + dbs, numeric) < 1e-5


def test_backward_zero_at_stationary_point():
    # identity network reconstructs exactly, so every gradient vanishes
    model = AutoencoderModel(
        variant="custom", dims=(4, 4, 4), activations=("linear", "linear"),
        weights=[np.eye(4), np.eye(4)], biases=[np.zeros(4), np.zeros(4)],
    )
    x = np.array([0.3, -1.2, 0.7, 2.0])
    out, cache = forward(model, x)
    assert np.array_equal(out, x)
    dWs, dbs = backward(model, cache, x)
    for g in dWs + dbs:
        assert np.max(np.abs(g)) <= 1e-10


def test_backward_final_bias_gradient_form():
    model = toy_model(5)
    rng = np.random.default_rng(2)
    x = rng.random(10)
    out, cache = forward(model, x)
    _, dbs = backward(model, cache, x)
    assert np.max(np.abs(dbs[-1] - (2.0 / 10) * (out - x))) < 1e-15


def test_backward_rejects_stale_cache():
    model = toy_model(1)
    x = np.ones(10)
    _, cache = forward(model, x)
    with pytest.raises(DataError):
        backward(model, cache, np.zeros(10))


def test_adam_first_step_closed_form():
    theta = np.array([0.0])
    state = AdamState.for_params([theta])
    adam_step(state, [theta], [np.array([1.0])], t=1)
    assert abs(theta[0] - (-1e-3 / (1.0 + 1e-8))) < 1e-12


def test_adam_zero_gradient_no_move():
    theta = np.array([1.5, -2.0])
    state = AdamState.for_params([theta])
    adam_step(state, [theta], [np.zeros(2)], t=1)
    assert np.array_equal(theta, [1.5, -2.0])


def test_adam_guards():
    theta = np.array([1.0])
    state = AdamState.for_params([theta])
    with pytest.raises(DataError):
        adam_step(state, [theta], [np.array([1.0])], t=0)
    with pytest.raises(DataError):
        adam_step(state, [theta], [np.zeros(2)], t=1)


def test_adam_quadratic_convergence():
    theta = np.array([1.0])
    state = AdamState.for_params([theta])
    trail = []
    for t in range(1, 5001):
        adam_step(state, [theta], [2.0 * theta], t)
        trail.append(abs(float(theta[0])))
    trail = np.array(trail)
    assert trail[-1] < 1e-2
    # |theta| descends monotonically until it first reaches zero's neighborhood
    first_small = int(np.argmax(trail < 1e-3))
    assert np.all(np.diff(trail[:first_small]) <= 0)
    assert trail[first_small:].max() < 1e-2


def _nominal_feature_matrix(duration_s=240.0, seed=0, variant="refined"):
    import drivemon as dm
    from drivemon.synth import NominalProfile, generate_nominal

    stream = generate_nominal(NominalProfile(duration_s=duration_s), seed)
    derived = dm.derive_stream(stream)
    X, _, _ = dm.feature_matrix(derived, dm.WindowSpec(), dm.feature_mask(variant))
    scaler = dm.fit_scaler(X, variant=variant)
    return scaler.transform(X)


def test_train_loss_decreases_on_nominal_data():
    X = _nominal_feature_matrix()
    model = build_model("refined", seed=1)
    model, report = train(model, X, TrainConfig(rng_seed=1, epochs=5))
    assert report.final_train_loss < report.train_losses[0]
    assert all(np.isfinite(report.train_losses))
    assert len(report.train_losses) == len(report.val_losses) == 5


def test_train_is_deterministic():
    X = np.random.default_rng(7).random((50, 8))
    runs = []
    for _ in range(2):
        model = new_model([8, 4, 2, 4, 8], ["linear", "sigmoid", "linear", "linear"], seed=3)
        model, report = train(model, X, TrainConfig(rng_seed=5, epochs=3, batch_size=16))
        runs.append((report, model))
    assert runs[0][0].train_losses == runs[1][0].train_losses
    assert runs[0][0].val_losses == runs[1][0].val_losses
    for Wa, Wb in zip(runs[0][1].weights, runs[1][1].weights):
        assert np.array_equal(Wa, Wb)


def test_train_no_overfit_on_nominal_data():
    # 200-epoch run on a modest nominal set: validation tracks training
    X = _nominal_feature_matrix(duration_s=600.0, seed=2)
    model = build_model("refined", seed=2)
    model, report = train(model, X, TrainConfig(rng_seed=2, epochs=200))
    assert report.final_val_loss < 2.0 * report.final_train_loss


def test_train_aborts_on_divergence():
    X = np.random.default_rng(0).random((40, 6)) * 10.0
    model = new_model([6, 4, 6], ["linear", "linear"], seed=0)
    # a colossal step size overflows the all-linear forward pass immediately
    with pytest.raises(TrainingError, match="epoch"):
        train(model, X, TrainConfig(rng_seed=0, epochs=50, learning_rate=1e200))


def test_train_guards():
    model = new_model([4, 2, 4], ["linear", "linear"], seed=0)
    with pytest.raises(DataError):
        train(model, np.zeros((5, 4)), TrainConfig(rng_seed=0, epochs=1))  # < 10 rows
    with pytest.raises(DataError):
        train(model, np.zeros((20, 3)), TrainConfig(rng_seed=0, epochs=1))  # bad width
    with pytest.raises(DataError):
        TrainConfig(rng_seed=0, epochs=0)
    with pytest.raises(DataError):
        TrainConfig(rng_seed=0, validation_fraction=1.0)


def test_save_load_roundtrip(tmp_path):
    model = toy_model(11)
    x = np.random.default_rng(1).random(10)
    out_before, _ = forward(model, x)
    path = tmp_path / "model.json"
    model.train_config = TrainConfig(rng_seed=11, epochs=2).to_json()
    save_model(model, path)
    doc = json.loads(path.read_text())
    assert set(doc) == {"variant", "dims", "activations", "weights", "biases",
                        "seed", "train_config"}
    back = load_model(path)
    out_after, _ = forward(back, x)
    assert np.array_equal(out_before, out_after)
    assert back.dims == model.dims
    assert back.train_config == model.train_config


def test_load_rejects_truncated_file(tmp_path):
    model = toy_model(0)
    path = tmp_path / "model.json"
    save_model(model, path)
    path.write_text(path.read_text()[:100])
    with pytest.raises(ArtifactError):
        load_model(path)


def test_load_rejects_inconsistent_shapes(tmp_path):
    model = toy_model(0)
    path = tmp_path / "model.json"
    save_model(model, path)
    doc = json.loads(path.read_text())
    doc["dims"][1] = 99
    path.write_text(json.dumps(doc))
    with pytest.raises(ArtifactError, match="layer"):
        load_model(path)


def test_load_variant_mismatch(tmp_path):
    model = build_model("prime", seed=0)
    path = tmp_path / "model.json"
    save_model(model, path)
    assert load_model(path, expect_variant="prime").variant == "prime"
    with pytest.raises(ArtifactError, match="variant"):
        load_model(path, expect_variant="refined")
