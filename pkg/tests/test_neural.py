import json
import math

import numpy as np
import pytest

from conftest import games_to_arrays, random_games
from matrixgames.behavioral import ModelParams, parse_model_string, predict_batch
from matrixgames.dataio import GameRecord
from matrixgames.errors import InvalidSpec
from matrixgames.fitting import Dataset, nelder_mead_fit
from matrixgames.games import GameMatrix, transpose_perspective
from matrixgames.neural import (
    INPUT_SCALE,
    AugmentedModel,
    AugmentedModelSpec,
    MLPConfig,
    MLPParams,
    TrainConfig,
    _backward,
    _forward,
    _layout,
    augment_dataset,
    dataset_inputs,
    direct_predictor,
    fit_augmented,
    fit_direct,
    grad_check,
    init_params,
    load_checkpoint,
    mlp_predict,
    save_augmented,
    save_direct,
    train_direct_mlp,
)


def _records(games, y, role="row"):
    return [
        GameRecord(game=g, role=role, n=100, p_first=float(v))
        for g, v in zip(games, y)
    ]


def _zero_params(config):
    return MLPParams(config, np.zeros(_layout(config)[1]))


def _synthetic_dataset(n_games, seed, eta=0.8):
    spec, _ = parse_model_string("L1+QR")
    games = random_games(np.random.default_rng(seed), n_games)
    R, C = games_to_arrays(games)
    y = predict_batch(spec, ModelParams(eta_self=eta), R, C)
    return Dataset.from_records(_records(games, y))


class TestHeads:
    def test_prob_head_at_zero(self):
        p = _zero_params(MLPConfig(hidden=(4,), head="prob"))
        out = mlp_predict(p, np.full(8, 0.3))
        assert np.array_equal(out, [0.5, 0.5])

    def test_positive_head_at_zero(self):
        p = _zero_params(MLPConfig(hidden=(4,), head="positive"))
        assert mlp_predict(p, np.full(8, 0.3)) == pytest.approx(math.log(2.0), rel=1e-15)

    def test_positive_head_stays_positive(self):
        cfg = MLPConfig(hidden=(6,), head="positive")
        p = init_params(cfg, seed=2)
        X = np.random.default_rng(3).random((40, 8))
        assert np.all(mlp_predict(p, X) > 0)

    def test_mixture_head_at_zero(self):
        p = _zero_params(MLPConfig(hidden=(4,), head="mixture"))
        out = mlp_predict(p, np.full(8, 0.3))
        assert out == pytest.approx([0.25] * 4, abs=1e-15)

    def test_mixture_head_simplex(self):
        cfg = MLPConfig(hidden=(6,), head="mixture")
        p = init_params(cfg, seed=4)
        out = mlp_predict(p, np.random.default_rng(5).random((30, 8)))
        assert np.all(out > 0)
        assert np.max(np.abs(out.sum(axis=1) - 1.0)) < 1e-12

    def test_config_validation(self):
        with pytest.raises(InvalidSpec):
            MLPConfig(head="softmax")
        with pytest.raises(InvalidSpec):
            MLPConfig(hidden=(0,))
        with pytest.raises(InvalidSpec):
            TrainConfig(lr=0.0)

    def test_init_deterministic(self):
        cfg = MLPConfig(hidden=(5, 5))
        a, b = init_params(cfg, seed=7), init_params(cfg, seed=7)
        assert np.array_equal(a.theta, b.theta)
        assert not np.array_equal(a.theta, init_params(cfg, seed=8).theta)

    def test_batch_matches_single(self):
        cfg = MLPConfig(hidden=(7, 3))
        p = init_params(cfg, seed=9)
        X = np.random.default_rng(10).random((6, 8))
        batch = mlp_predict(p, X)
        for i in range(6):
            assert mlp_predict(p, X[i]) == pytest.approx(batch[i], abs=1e-12)


def _head_loss(config, X, target):
    size = _layout(config)[1]
    n = X.shape[0]

    def lag(theta):
        out, cache = _forward(config, theta, X)
        if config.head == "prob":
            resid = out[:, 0] - target
        else:
            resid = out - target
        if config.head == "mixture":
            loss = float(np.mean(np.sum(resid * resid, axis=1)))
        else:
            loss = float(np.mean(resid * resid))
        grad = _backward(config, cache, 2.0 * resid / n, size)
        return loss, grad

    return lag


class TestGradients:
    @pytest.mark.parametrize("head", ["prob", "positive", "mixture"])
    def test_direct_heads(self, head):
        cfg = MLPConfig(hidden=(6, 5), head=head)
        rng = np.random.default_rng(11)
        X = rng.random((12, 8))
        if head == "prob":
            t = rng.uniform(0.05, 0.95, 12)
        elif head == "positive":
            t = rng.uniform(0.3, 2.0, 12)
        else:
            t = rng.dirichlet(np.ones(4), 12)
        lag = _head_loss(cfg, X, t)
        assert grad_check(lag, init_params(cfg, seed=12).theta) < 1e-4

    @pytest.mark.parametrize(
        "text",
        [
            "L1+QR",
            "L+QR",
            "L2+nQR",
            "L2+nQR+Belief",
            "L2+nQR+nBelief+Risk",
            "nL+QR+Risk",
            "nQRE+Belief+Risk",
            "QRE+nBelief+Risk",
        ],
    )
    def test_augmented_models(self, text):
        spec = AugmentedModelSpec.from_string(text, hidden=(6, 5))
        model = AugmentedModel(spec, seed=13)
        games = random_games(np.random.default_rng(14), 12)
        R, C = games_to_arrays(games)
        X = np.hstack([R, C]) / INPUT_SCALE
        y = np.random.default_rng(15).uniform(0.05, 0.95, 12)
        lag = lambda th: model.loss_and_grad(th, R, C, X, y)
        assert grad_check(lag, model.theta) < 1e-4


class TestAugmentation:
    def test_fourfold_targets_row_role(self):
        g = GameMatrix((1, 2, 3, 4), (5, 6, 7, 8), id="g1")
        ds = Dataset.from_records(_records([g], [0.75]))
        out = augment_dataset(ds)
        assert len(out) == 4
        assert list(out.y) == [0.75, 0.25, 0.75, 0.25]
        # order is original, row swap, col swap, both
        assert tuple(out.R[1]) == (3, 4, 1, 2)
        assert tuple(out.R[2]) == (2, 1, 4, 3)
        assert tuple(out.R[3]) == (4, 3, 2, 1)
        assert tuple(out.C[3]) == (8, 7, 6, 5)

    def test_fourfold_targets_col_role(self):
        g = GameMatrix((1, 2, 3, 4), (5, 6, 7, 8), id="g1")
        ds = Dataset.from_records(_records([g], [0.75], role="col"))
        out = augment_dataset(ds)
        # the column player's own actions swap on column swaps
        assert list(out.y) == [0.75, 0.75, 0.25, 0.25]

    def test_multiplies_count(self):
        games = random_games(np.random.default_rng(16), 7)
        ds = Dataset.from_records(_records(games, np.linspace(0.1, 0.9, 7)))
        assert len(augment_dataset(ds)) == 28

    def test_dataset_inputs_layout(self):
        g = GameMatrix((10, 20, 30, 40), (5, 15, 25, 35))
        ds = Dataset.from_records(_records([g], [0.5]))
        X = dataset_inputs(ds)
        assert X.shape == (1, 8)
        assert np.array_equal(X[0], np.array([10, 20, 30, 40, 5, 15, 25, 35]) / 50.0)

    def test_dataset_inputs_col_role(self):
        g = GameMatrix((10, 20, 30, 40), (5, 15, 25, 35))
        ds = Dataset.from_records(_records([g], [0.5], role="col"))
        t = transpose_perspective(g)
        assert np.array_equal(
            dataset_inputs(ds)[0], np.array(t.row_payoffs + t.col_payoffs) / 50.0
        )


class TestTraining:
    def test_memorizes_single_game(self):
        ds = _synthetic_dataset(1, seed=17)
        ds.y[:] = 0.8
        cfg = TrainConfig(lr=0.05, batch=4, eval_interval=50, patience=3,
                          max_epochs=500, seed=0)
        params, _ = fit_direct(ds, ds, cfg, MLPConfig(hidden=(8, 8)), augment=False)
        pred = direct_predictor(params)(ds)
        assert pred[0] == pytest.approx(0.8, abs=0.02)

    def test_early_stopping_restores_best(self):
        train = _synthetic_dataset(16, seed=18)
        val = Dataset.from_records(
            [GameRecord(r.game, r.role, r.n, 1.0 - r.p_first) for r in train.records]
        )
        cfg = TrainConfig(lr=0.05, batch=8, eval_interval=1, patience=2,
                          max_epochs=300, seed=1)
        mlp = MLPConfig(hidden=(8,))
        params, history = fit_direct(train, val, cfg, mlp, augment=False)
        assert history.stopped_epoch < 300
        vals = [v for _, _, v in history.checkpoints]
        out = mlp_predict(params, dataset_inputs(val))[:, 0]
        val_mse = float(np.mean((out - val.y) ** 2))
        assert val_mse == pytest.approx(min(vals), rel=1e-12)
        assert history.best_epoch <= history.stopped_epoch

    def test_train_direct_deterministic(self):
        ds = _synthetic_dataset(40, seed=19)
        cfg = TrainConfig(lr=0.02, batch=16, eval_interval=10, patience=2,
                          max_epochs=40, seed=5)
        mlp = MLPConfig(hidden=(8,))
        a = train_direct_mlp(ds, cfg, mlp)
        b = train_direct_mlp(ds, cfg, mlp)
        assert a.test_mse == pytest.approx(b.test_mse, rel=1e-9)
        assert all(np.array_equal(x, y) for x, y in zip(a.splits, b.splits))

    def test_direct_learns_signal(self):
        ds = _synthetic_dataset(150, seed=20)
        cfg = TrainConfig(lr=0.01, batch=32, eval_interval=25, patience=4,
                          max_epochs=400, seed=2)
        res = train_direct_mlp(ds, cfg, MLPConfig(hidden=(16, 16)))
        assert res.test_r2 > 0.8

    def test_scalar_augmented_matches_nelder_mead(self):
        spec, _ = parse_model_string("L1+QR")
        ds = _synthetic_dataset(60, seed=21)
        val = _synthetic_dataset(12, seed=22)
        cfg = TrainConfig(lr=0.02, batch=16, eval_interval=50, patience=4,
                          max_epochs=600, seed=3)
        model, _ = fit_augmented(
            AugmentedModelSpec.from_string("L1+QR"), ds, val, cfg, augment=False
        )
        es = model.slot_values(model.theta, dataset_inputs(ds))[0][0]
        nm = nelder_mead_fit(spec, ds, seed=0)
        assert float(es[0]) == pytest.approx(nm.params.eta_self, rel=0.03)
        assert float(es[0]) == pytest.approx(0.8, rel=0.03)


class TestAugmentedModelStructure:
    def test_scalar_only_layout(self):
        spec = AugmentedModelSpec.from_string("L+QR+Risk")
        model = AugmentedModel(spec, seed=0)
        assert set(model.segments) == {"rho_eta_self", "rho_alpha", "mix_logits"}
        assert model.theta.size == 6
        es, eo, alpha, weights = model.slot_values(model.theta, np.zeros((3, 8)))
        assert es[0][0] == pytest.approx(0.5, rel=1e-12)
        assert eo[1] == "tied"
        assert alpha == pytest.approx(0.02, rel=1e-12)
        assert weights[0][0] == pytest.approx([0.25] * 4, abs=1e-15)

    def test_slot_ordering_normalized(self):
        spec = AugmentedModelSpec(
            parse_model_string("nL+nQR")[0], ("level_mixture", "eta_self"), (4,)
        )
        assert spec.neural_slots == ("eta_self", "level_mixture")

    def test_label_round_trip(self):
        for text in ("L2+nQR+Belief", "nL+QR+Risk", "nQRE", "L1+QR"):
            assert AugmentedModelSpec.from_string(text).label() == text

    def test_invalid_slots(self):
        l2, _ = parse_model_string("L2+QR")
        with pytest.raises(InvalidSpec):
            AugmentedModelSpec(l2, ("eta_other",))  # no belief noise component
        with pytest.raises(InvalidSpec):
            AugmentedModelSpec(l2, ("level_mixture",))
        with pytest.raises(InvalidSpec):
            AugmentedModelSpec(l2, ("eta_self", "eta_self"))

    def test_nash_cannot_train(self):
        nash, _ = parse_model_string("Nash")
        with pytest.raises(InvalidSpec):
            AugmentedModel(AugmentedModelSpec(nash), seed=0)

    def test_tied_belief_uses_same_array(self):
        spec = AugmentedModelSpec.from_string("L2+nQR", hidden=(4,))
        model = AugmentedModel(spec, seed=1)
        X = np.random.default_rng(23).random((5, 8))
        (es, _), (eo, cache), _, _ = model.slot_values(model.theta, X)
        assert cache == "tied"
        assert eo is es


class TestCheckpoints:
    def test_direct_round_trip(self, tmp_path):
        cfg = MLPConfig(hidden=(5, 4), head="prob")
        params = init_params(cfg, seed=24)
        path = tmp_path / "direct.npz"
        save_direct(path, params)
        loaded = load_checkpoint(path)
        assert isinstance(loaded, MLPParams)
        assert loaded.config == cfg
        assert np.array_equal(loaded.theta, params.theta)

    def test_augmented_round_trip(self, tmp_path):
        spec = AugmentedModelSpec.from_string("L2+nQR+Belief", hidden=(5, 4))
        model = AugmentedModel(spec, seed=25)
        model.theta += 0.01  # distinguish from a fresh init
        path = tmp_path / "aug.npz"
        save_augmented(path, model)
        loaded = load_checkpoint(path)
        assert isinstance(loaded, AugmentedModel)
        assert loaded.spec.label() == "L2+nQR+Belief"
        assert np.array_equal(loaded.theta, model.theta)
        games = random_games(np.random.default_rng(26), 6)
        ds = Dataset.from_records(_records(games, np.full(6, 0.5)))
        assert np.array_equal(loaded.predictor()(ds), model.predictor()(ds))

    def test_version_rejected(self, tmp_path):
        path = tmp_path / "bad.npz"
        meta = {"version": 99, "kind": "direct", "input_dim": 8,
                "hidden": [4], "head": "prob"}
        np.savez(path, theta=np.zeros(3),
                 meta=np.frombuffer(json.dumps(meta).encode(), dtype=np.uint8))
        with pytest.raises(InvalidSpec):
            load_checkpoint(path)

    def test_architecture_mismatch_rejected(self, tmp_path):
        path = tmp_path / "mismatch.npz"
        meta = {"version": 1, "kind": "augmented", "model": "L1+nQR", "hidden": [4]}
        np.savez(path, theta=np.zeros(7),
                 meta=np.frombuffer(json.dumps(meta).encode(), dtype=np.uint8))
        with pytest.raises(InvalidSpec):
            load_checkpoint(path)
