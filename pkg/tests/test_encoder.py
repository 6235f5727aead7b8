import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from chemtime.core import ChannelStandardizer, f1_score, prefix
from chemtime.embedding import EmbeddingTable, TargetSequence, build_target_sequence, default_table
from chemtime.encoder import (
    ChemTimeClassifier,
    ChemTimeModel,
    NearestTarget,
    TrainConfig,
    TrainHistory,
    TrainingDivergenceError,
    Trajectory,
    calibrate_early_window,
    earliest_stable_prefix,
    fit_boost,
    forward,
    init_params,
    loss_and_grads,
    model_from_dict,
    model_to_dict,
    predict,
    sequence_loss,
    step,
    step_losses,
    train,
)
from chemtime.margin import DegenerateFitError, LinearMargin

from conftest import make_sample, toy_dataset
from oracles import (
    earliest_stable_bruteforce,
    gru_forward_scalar,
    numeric_grad,
    per_step_loss,
    relative_error,
)


def random_model(k=3, H=4, d=2, seed=0, boost=None):
    rng = np.random.default_rng(seed)
    params = {n: v * 2.0 for n, v in init_params(k, H, d, rng).items()}
    std = ChannelStandardizer(mean=rng.normal(size=k), std=rng.uniform(0.5, 2.0, size=k))
    return ChemTimeModel(params=params, table=default_table(), standardizer=std, boost=boost)


def test_zero_parameters_emit_projection_bias():
    m = random_model()
    params = {n: np.zeros_like(v) for n, v in m.params.items()}
    params["b_p"] = np.array([0.3, -0.7])
    zero = ChemTimeModel(params=params, table=m.table, standardizer=m.standardizer)
    traj = forward(zero, make_sample(np.random.default_rng(1).normal(size=(3, 9))))
    np.testing.assert_array_equal(traj.points, np.tile([0.3, -0.7], (9, 1)))


@pytest.mark.parametrize("seed", range(3))
def test_forward_matches_scalar_reimplementation(seed):
    m = random_model(seed=seed)
    x = make_sample(np.random.default_rng(seed + 10).normal(size=(3, 3)))
    Xs = m.standardizer.transform(x.channels).T
    np.testing.assert_allclose(forward(m, x).points, gru_forward_scalar(m.params, Xs), rtol=1e-12, atol=1e-13)


@given(st.integers(0, 10_000), st.integers(1, 25))
@settings(max_examples=30, deadline=None)
def test_stepwise_equals_batch_forward(seed, T):
    m = random_model(seed=seed % 7)
    x = make_sample(np.random.default_rng(seed).normal(size=(3, T)))
    h = None
    stepped = []
    for t in range(T):
        h, e = step(m, h, x.channels[:, t])
        stepped.append(e)
    assert np.array_equal(np.array(stepped), forward(m, x).points)


def test_forward_rejects_wrong_channel_count():
    with pytest.raises(ValueError):
        forward(random_model(k=3), make_sample(np.zeros((4, 5))))


def test_squared_loss_zero_on_targets():
    t = TargetSequence(targets=np.array([[1.0, 0.0], [0.0, 1.0]]), entry_index=np.array([1, 2]))
    assert sequence_loss(Trajectory(points=t.targets.copy()), t, "squared") == 0.0


def test_squared_loss_hand_value():
    t = TargetSequence(targets=np.array([[0.0, 0.0], [0.0, 1.0]]), entry_index=np.array([0, 2]))
    assert sequence_loss(np.array([[1.0, 0.0], [0.0, 1.0]]), t, "squared") == 1.0


@given(st.floats(0.01, 100.0), st.integers(0, 1000))
def test_cosine_scale_invariance(c, seed):
    rng = np.random.default_rng(seed)
    Y = rng.normal(size=(5, 2))
    t = TargetSequence(targets=Y, entry_index=np.zeros(5, dtype=int))
    assert sequence_loss(c * Y, t, "cosine") == pytest.approx(0.0, abs=1e-12)
    E = rng.normal(size=(5, 2))
    assert sequence_loss(c * E, t, "cosine") == pytest.approx(sequence_loss(E, t, "cosine"), rel=1e-12, abs=1e-12)


def test_cosine_zero_norm_steps_contribute_nothing():
    t = TargetSequence(targets=np.array([[0.0, 0.0], [1.0, 0.0]]), entry_index=np.array([0, 1]))
    assert sequence_loss(np.array([[3.0, 4.0], [0.0, 0.0]]), t, "cosine") == 0.0


def test_loss_length_mismatch():
    t = TargetSequence(targets=np.zeros((3, 2)), entry_index=np.zeros(3, dtype=int))
    with pytest.raises(ValueError):
        sequence_loss(np.zeros((2, 2)), t, "squared")


@pytest.mark.parametrize("kind", ["squared", "cosine", "hinge_rank"])
def test_loss_is_sum_of_independent_step_losses(kind):
    table = default_table()
    rng = np.random.default_rng(5)
    x = make_sample(rng.normal(size=(3, 30)), onset=9, conc=(0, 0, 12.0, 0))
    seq = build_target_sequence(x, table, ("A", "B", "C", "D"))
    E = rng.normal(size=(30, 2))
    rows = table.matrix()
    expect = sum(per_step_loss(E[t], seq.targets[t], kind, rows, seq.entry_index[t]) for t in range(30))
    assert sequence_loss(E, seq, kind, table) == pytest.approx(expect, rel=1e-12)


def test_step_weights_hook():
    t = TargetSequence(targets=np.zeros((3, 2)), entry_index=np.zeros(3, dtype=int))
    E = np.ones((3, 2))
    assert sequence_loss(E, t, "squared", step_weights=[0.0, 1.0, 0.5]) == pytest.approx(3.0)


@pytest.mark.parametrize("kind", ["squared", "cosine", "hinge_rank"])
def test_bptt_gradients_match_finite_differences(kind):
    rng = np.random.default_rng(42)
    params = init_params(3, 4, 2, rng)
    X = rng.normal(size=(2, 10, 3))
    table = default_table()
    idx = rng.integers(0, 5, size=(2, 10))
    Y = table.matrix()[idx]
    f = lambda p: float(loss_and_grads(p, X, Y, idx, kind, table.matrix())[0].mean())  # noqa: E731
    _, grads = loss_and_grads(params, X, Y, idx, kind, table.matrix())
    num = numeric_grad(f, params)
    tol = 1e-4 if kind != "hinge_rank" else 1e-3  # hinge kinks make FD noisier
    for name in params:
        assert relative_error(grads[name], num[name]) < tol, name


def test_training_reduces_loss_and_is_deterministic():
    ds = toy_dataset(n=16, k=3, T=12)
    table = default_table(ds.analyte_names)
    cfg = TrainConfig(hidden=8, epochs=15, seed=3)
    h1, h2 = TrainHistory(), TrainHistory()
    m1 = train(ds, table, cfg, h1)
    m2 = train(ds, table, cfg, h2)
    assert h1.epoch_loss[-1] < h1.epoch_loss[0]
    assert h1.epoch_loss == h2.epoch_loss
    for n in m1.params:
        assert np.array_equal(m1.params[n], m2.params[n])


def test_zero_learning_rate_keeps_initial_parameters():
    ds = toy_dataset(n=8, k=3, T=10)
    cfg = TrainConfig(hidden=4, epochs=3, lr=0.0, seed=9)
    m = train(ds, default_table(ds.analyte_names), cfg)
    init = init_params(3, 4, 2, np.random.default_rng(9))
    for n in init:
        assert np.array_equal(m.params[n], init[n])


@pytest.mark.filterwarnings("ignore::RuntimeWarning")
def test_divergence_names_epoch():
    ds = toy_dataset(n=8, k=3, T=10)
    with pytest.raises(TrainingDivergenceError, match=r"epoch \d+") as err:
        train(ds, default_table(ds.analyte_names), TrainConfig(hidden=4, epochs=3, lr=np.inf))
    assert 0 <= err.value.epoch < 3


def test_unknown_loss_kind():
    ds = toy_dataset(n=4)
    with pytest.raises(ValueError):
        train(ds, default_table(ds.analyte_names), TrainConfig(loss_kind="l1"))


def test_margin_boost_separable_embeddings():
    rng = np.random.default_rng(0)
    pos = rng.normal([2.0, 0.0], 0.2, size=(20, 2))
    neg = rng.normal([-2.0, 0.5], 0.2, size=(30, 2))
    X = np.vstack([pos, neg])
    y = np.r_[np.ones(20), -np.ones(30)]
    from chemtime.margin import fit_linear_margin

    m = fit_linear_margin(X, y)
    assert f1_score(m.predict(X), y > 0) == 1.0
    flipped = fit_linear_margin(X, -y)
    np.testing.assert_array_equal(flipped.decision_function(X), -m.decision_function(X))


def test_margin_rejects_single_class():
    from chemtime.margin import fit_linear_margin

    with pytest.raises(DegenerateFitError):
        fit_linear_margin(np.zeros((3, 2)), np.ones(3))


def test_decision_distance_is_signed_geometric_distance():
    lm = LinearMargin(w=np.array([3.0, 4.0]), b0=-5.0)
    np.testing.assert_allclose(lm.decision_function([[3.0, 4.0], [0.0, 0.0]]), [4.0, -1.0])


def test_nearest_target_on_exact_vectors():
    table = default_table()
    nt = NearestTarget(table, "A")
    for name in ("A", "B", "C", "D", "None"):
        assert nt.nearest(table[name]) == name
    assert nt.predict(table["A"][None])[0]
    assert not nt.predict(table["C"][None])[0]


def test_fit_boost_needs_both_classes():
    ds = toy_dataset(n=8)
    only_neg = ds.subset([s.id for s, y in zip(ds.samples, ds.labels()) if not y])
    m = train(ds, default_table(ds.analyte_names), TrainConfig(hidden=4, epochs=1))
    with pytest.raises(DegenerateFitError):
        fit_boost(m, only_neg)


def test_predict_sign_matches_label_and_full_prefix(trained_chemtime, preset0):
    _, test = preset0
    model = trained_chemtime.model
    for s in test.samples[:8]:
        full = predict(model, s)
        assert full == predict(model, s, s.length) or full.label == predict(model, s, s.length).label
        for l in (1, 5, 40, 100):
            r = predict(model, s, l)
            assert r.label == (r.decision_distance > 0)
            assert r.prefix_len == l and r.infer_seconds >= 0


def test_accuracy_grows_with_prefix(trained_chemtime, preset0):
    _, test = preset0
    truth = test.labels()
    acc = lambda l: np.mean([predict(trained_chemtime.model, s, l).label for s in test.samples] == truth)  # noqa: E731
    assert acc(100) >= acc(5)


def test_trajectory_distances_equal_prefix_predictions(trained_chemtime, preset0):
    _, test = preset0
    model = trained_chemtime.model
    s = test.samples[0]
    traj = forward(model, s)
    for l in (1, 17, 60):
        assert traj.distances[l - 1] == predict(model, s, l).decision_distance


@given(st.integers(0, 10_000), st.floats(0.05, 1.0))
@settings(max_examples=50, deadline=None)
def test_earliest_stable_prefix_matches_bruteforce(seed, floor):
    rng = np.random.default_rng(seed)
    n, T = 10, 15
    truth = rng.random(n) < 0.5
    # prefixes become more accurate as they grow
    flip = rng.random((n, T)) < np.linspace(0.6, 0.0, T)[None, :]
    P = truth[:, None] ^ flip
    scores = [f1_score(P[:, l], truth) for l in range(T)]
    assert earliest_stable_prefix(P, truth, floor) == earliest_stable_bruteforce(scores, floor)


def test_calibrate_trivial_profiles():
    truth = np.array([True, False, True, False])
    perfect = np.repeat(truth[:, None], 12, axis=1)
    assert earliest_stable_prefix(perfect, truth, 0.8) == 1
    assert earliest_stable_prefix(~perfect, truth, 0.8) == 12


def test_calibrate_on_model_matches_exhaustive_scan(trained_chemtime, preset0):
    _, test = preset0
    val = test.subset([s.id for s in test.samples[:10]])
    model = trained_chemtime.model
    T = val.min_length
    scores = [f1_score([predict(model, s, l).label for s in val.samples], val.labels()) for l in range(1, T + 1)]
    for floor in (0.5, 0.8, 1.0):
        assert calibrate_early_window(model, val, floor) == earliest_stable_bruteforce(scores, floor)


def test_calibrate_argument_errors(trained_chemtime, preset0):
    _, test = preset0
    with pytest.raises(ValueError):
        calibrate_early_window(trained_chemtime.model, test.subset([]), 0.8)
    with pytest.raises(ValueError):
        calibrate_early_window(trained_chemtime.model, test, 0.0)


def test_model_roundtrip_is_bit_exact(trained_chemtime, preset0, tmp_path):
    from chemtime.models import load_model, save_model

    save_model(trained_chemtime, tmp_path / "m.json")
    back = load_model(tmp_path / "m.json")
    for n, v in trained_chemtime.model.params.items():
        assert back.model.params[n].tobytes() == v.tobytes()
    assert back.model.boost.w.tobytes() == trained_chemtime.model.boost.w.tobytes()
    _, test = preset0
    np.testing.assert_array_equal(back.decision_function(test.samples), trained_chemtime.decision_function(test.samples))


def test_nearest_target_classifier_roundtrip():
    ds = toy_dataset(n=12, k=3, T=10)
    clf = ChemTimeClassifier(hidden=4, epochs=2, boost="nearest_target").fit(ds)
    back = ChemTimeClassifier.from_dict(clf.to_dict())
    assert isinstance(back.model.boost, NearestTarget)
    np.testing.assert_array_equal(back.predict(ds.samples), clf.predict(ds.samples))
