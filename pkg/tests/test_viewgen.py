import numpy as np
import pytest

from factorbl.covariance import sample_cov
from factorbl.errors import BadInput, InsufficientData
from factorbl.viewgen import (
    GeneratedView,
    SequenceModel,
    SequenceSample,
    ViewModelConfig,
    _fast_loss_and_grads,
    build_dataset,
    momentum_oracle_view,
    predict_view,
    samples_to_arrays,
    train_sequence_model,
    view_to_viewset,
)

from conftest import panel_from_returns


def toy_config(**kw):
    base = dict(sequence_length=2, window=1, train_span=8, hidden_size=4, epochs=5,
                learning_rate=0.1, seed=0)
    base.update(kw)
    return ViewModelConfig(**base)


def test_config_invariants():
    cfg = ViewModelConfig()
    assert (cfg.sequence_length, cfg.window, cfg.train_span) == (126, 10, 504)
    with pytest.raises(BadInput):
        ViewModelConfig(sequence_length=100, window=10, train_span=504)
    with pytest.raises(BadInput):
        ViewModelConfig(learning_rate=0.0)
    with pytest.raises(BadInput):
        ViewModelConfig(epochs=0)


def test_build_dataset_labels_toy():
    # day 3 returns decide the label of the first sample: factor 1 wins
    factors = np.array(
        [
            [0.001, 0.002, 0.003],
            [0.002, 0.001, 0.000],
            [0.010, 0.050, -0.020],
            [0.000, 0.000, 0.030],
            [0.020, 0.000, 0.000],
        ]
    )
    panel = panel_from_returns(factors)
    samples = build_dataset(panel, None, toy_config())
    # span 5, L=2, H=1, window=1 -> floor((5-3)/1)+1 = 3 samples
    assert len(samples) == 3
    assert np.array_equal(samples[0].features, factors[:2])
    # brute-force oracle for every label
    for k, sample in enumerate(samples):
        future = factors[k + 2 : k + 3]
        expected = int(np.argmax(np.prod(1 + future, axis=0) - 1))
        assert sample.label == expected
    assert samples[0].label == 1


def test_build_dataset_tie_breaks_low_index():
    panel = panel_from_returns(np.full((5, 3), 0.01))
    samples = build_dataset(panel, None, toy_config())
    assert all(s.label == 0 for s in samples)


def test_build_dataset_default_shape():
    rng = np.random.default_rng(44)
    panel = panel_from_returns(0.01 * rng.standard_normal((700, 20)))
    cfg = ViewModelConfig()
    span = (panel.dates[0], panel.dates[cfg.train_span + cfg.sequence_length - 1])
    x, y = samples_to_arrays(build_dataset(panel, span, cfg))
    assert x.shape == (50, 126, 20)
    assert y.shape == (50,)


def test_build_dataset_too_short():
    panel = panel_from_returns(np.full((2, 3), 0.01))
    with pytest.raises(InsufficientData):
        build_dataset(panel, None, toy_config())


def separable_samples(seed=3, count=60):
    rng = np.random.default_rng(seed)
    samples = []
    for k in range(count):
        label = k % 2
        drift = np.array([0.01, -0.01]) if label == 0 else np.array([-0.01, 0.01])
        samples.append(SequenceSample(drift + 0.002 * rng.standard_normal((8, 2)), label))
    return samples


def test_training_loss_decreases_on_repeated_sample():
    rng = np.random.default_rng(0)
    samples = [SequenceSample(rng.standard_normal((6, 3)), 1)] * 4
    cfg = ViewModelConfig(sequence_length=6, window=6, train_span=24, hidden_size=6,
                          epochs=12, learning_rate=0.1, seed=2)
    model = train_sequence_model(samples, cfg)
    first_ten = np.array(model.loss_history[:11])
    assert np.all(np.diff(first_ten) < 0)


def test_training_separable_toy_accuracy():
    samples = separable_samples()
    cfg = ViewModelConfig(sequence_length=8, window=8, train_span=32, hidden_size=8,
                          epochs=200, learning_rate=0.1, seed=5)
    model = train_sequence_model(samples, cfg)
    x, y = samples_to_arrays(samples)
    assert model.accuracy(x, y) >= 0.95


def test_training_deterministic():
    samples = separable_samples(seed=11)
    cfg = ViewModelConfig(sequence_length=8, window=8, train_span=32, hidden_size=8,
                          epochs=30, learning_rate=0.1, seed=9)
    m1 = train_sequence_model(samples, cfg)
    m2 = train_sequence_model(samples, cfg)
    for key in m1.params:
        assert np.array_equal(m1.params[key], m2.params[key])
    assert m1.loss_history == m2.loss_history


def test_training_empty():
    with pytest.raises(InsufficientData):
        train_sequence_model([], toy_config())


def gradient_check(model, x, y, use_fast):
    loss, grads = model.loss_and_grads(x, y, use_fast=use_fast)
    eps = 1e-5
    worst = 0.0
    for key, param in model.params.items():
        flat = param.ravel()
        numeric = np.zeros(flat.size)
        for idx in range(flat.size):
            orig = flat[idx]
            flat[idx] = orig + eps
            up, _ = model.loss_and_grads(x, y, use_fast=use_fast)
            flat[idx] = orig - eps
            down, _ = model.loss_and_grads(x, y, use_fast=use_fast)
            flat[idx] = orig
            numeric[idx] = (up - down) / (2 * eps)
        analytic = grads[key].ravel()
        rel = np.abs(analytic - numeric) / np.maximum(1e-8, np.abs(analytic) + np.abs(numeric))
        worst = max(worst, float(rel.max()))
    return worst


def test_gradients_match_finite_differences():
    rng = np.random.default_rng(7)
    x = rng.standard_normal((5, 3, 2))
    y = rng.integers(0, 2, size=5)
    model = SequenceModel(n_features=2, hidden_size=4, n_classes=2, seed=11)
    assert gradient_check(model, x, y, use_fast=False) < 1e-4
    if _fast_loss_and_grads is not None:
        assert gradient_check(model, x, y, use_fast=True) < 1e-4


@pytest.mark.skipif(_fast_loss_and_grads is None, reason="numba unavailable")
def test_fast_kernel_matches_numpy_path():
    rng = np.random.default_rng(17)
    x = rng.normal(0, 0.02, size=(9, 7, 4))
    y = rng.integers(0, 4, size=9)
    model = SequenceModel(4, 5, 4, seed=3)
    loss_np, grads_np = model.loss_and_grads(x, y, use_fast=False)
    loss_nb, grads_nb = model.loss_and_grads(x, y, use_fast=True)
    assert abs(loss_np - loss_nb) < 1e-12
    for key in grads_np:
        assert np.allclose(grads_np[key], grads_nb[key], atol=1e-12, rtol=1e-10)


def test_softmax_normalised_and_predict_view():
    rng = np.random.default_rng(19)
    model = SequenceModel(3, 4, 3, seed=1)
    features = rng.standard_normal((6, 3))
    probs = model.predict_proba(features)
    assert abs(probs.sum() - 1.0) < 1e-12
    view = predict_view(model, features)
    assert view.factor == int(np.argmax(probs))
    assert view.q == 0.01
    assert view.one_hot_row[view.factor] == 1.0
    assert np.count_nonzero(view.one_hot_row) == 1


def test_predict_tie_breaks_low_index():
    model = SequenceModel(2, 3, 2, seed=0)
    for key in model.params:
        model.params[key] = np.zeros_like(model.params[key])
    view = predict_view(model, np.zeros((4, 2)))  # all logits identical
    assert view.factor == 0


def test_generated_view_validation():
    with pytest.raises(BadInput):
        GeneratedView(1, 0.01, np.array([1.0, 1.0]))


def test_momentum_oracle():
    factors = np.zeros((12, 3))
    factors[:, 2] = 0.02  # strictly dominant factor
    panel = panel_from_returns(factors + 0.0)
    cfg = toy_config(sequence_length=3, train_span=12, window=3)
    assert momentum_oracle_view(panel, None, cfg).factor == 2

    flat = panel_from_returns(np.full((12, 3), 0.01))
    assert momentum_oracle_view(flat, None, cfg).factor == 0

    rng = np.random.default_rng(23)
    rand = panel_from_returns(0.01 * rng.standard_normal((30, 5)))
    view = momentum_oracle_view(rand, None, cfg)
    trailing = rand.factor_matrix()[-3:]
    assert view.factor == int(np.argmax(np.prod(1 + trailing, axis=0) - 1))


def test_view_to_viewset():
    rng = np.random.default_rng(29)
    panel = panel_from_returns(0.01 * rng.standard_normal((80, 4)))
    sigma = sample_cov(panel)
    view = GeneratedView(2, 0.01, np.array([0.0, 0.0, 1.0, 0.0]))
    views = view_to_viewset(view, sigma)
    assert views.k == 1
    assert views.tau == pytest.approx(1 / 252)
    assert views.omega[0, 0] == pytest.approx(views.tau * sigma.sigma[2, 2], rel=1e-12)
    assert views.kinds == ("absolute",)


def test_model_save_load_roundtrip(tmp_path):
    samples = separable_samples(seed=2, count=20)
    cfg = ViewModelConfig(sequence_length=8, window=8, train_span=32, hidden_size=6,
                          epochs=10, learning_rate=0.1, seed=4)
    model = train_sequence_model(samples, cfg)
    model.save(tmp_path / "model.npz")
    again = SequenceModel.load(tmp_path / "model.npz")
    x, _ = samples_to_arrays(samples)
    assert np.array_equal(model.predict_proba(x), again.predict_proba(x))
