"""Feed-forward networks, their training loop, and neural-augmented models.

Everything here is plain numpy: forward passes, backprop, and Adam on a flat
parameter vector. Networks either predict choice probabilities directly from
the eight payoffs (the flexible upper bound) or replace scalar parameters of a
behavioral model, in which case gradients flow through the behavioral
computation (the level-k recursion, or a fixed number of damped fixed-point
iterations for equilibrium models).
"""

from __future__ import annotations

import dataclasses
import json
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.special import expit

from . import kernels
from .behavioral import ModelSpec, Structure, model_string, parse_model_string
from .errors import Divergence, InvalidSpec
from .fitting import Dataset, evaluate, split_indices
from .games import Permutation, apply_permutation

_HEADS = ("prob", "positive", "mixture")
_HEAD_DIM = {"prob": 2, "positive": 1, "mixture": 4}
_ADAM_B1, _ADAM_B2, _ADAM_EPS = 0.9, 0.999, 1e-8
_SLOT_ORDER = ("eta_self", "eta_other", "level_mixture")
_SLOT_HEAD = {"eta_self": "positive", "eta_other": "positive", "level_mixture": "mixture"}

INPUT_SCALE = 50.0  # payoffs divided by this before entering a network


@dataclass(frozen=True)
class MLPConfig:
    input_dim: int = 8
    hidden: tuple = (300, 300, 300)
    head: str = "prob"

    def __post_init__(self):
        if self.head not in _HEADS:
            raise InvalidSpec(f"unknown head {self.head!r}")
        if self.input_dim <= 0 or any(h <= 0 for h in self.hidden):
            raise InvalidSpec("layer sizes must be positive")

    @property
    def out_dim(self):
        return _HEAD_DIM[self.head]


@dataclass(frozen=True)
class TrainConfig:
    lr: float = 1e-3
    batch: int = 64
    eval_interval: int = 100
    patience: int = 2
    max_epochs: int = 5000
    seed: int = 0

    def __post_init__(self):
        if min(self.lr, self.batch, self.eval_interval, self.patience, self.max_epochs) <= 0:
            raise InvalidSpec("training settings must be positive")


def _layer_dims(config: MLPConfig):
    return [config.input_dim, *config.hidden, config.out_dim]


def _layout(config: MLPConfig):
    """Flat-vector slices for each layer's weight matrix and bias."""
    dims = _layer_dims(config)
    slices = []
    pos = 0
    for fan_in, fan_out in zip(dims[:-1], dims[1:]):
        w = slice(pos, pos + fan_out * fan_in)
        pos += fan_out * fan_in
        b = slice(pos, pos + fan_out)
        pos += fan_out
        slices.append((w, b, fan_out, fan_in))
    return slices, pos


@dataclass
class MLPParams:
    config: MLPConfig
    theta: np.ndarray

    def copy(self):
        return MLPParams(self.config, self.theta.copy())


def init_params(config: MLPConfig, seed=0) -> MLPParams:
    """Symmetric uniform weights scaled by fan-in, zero biases."""
    rng = np.random.default_rng(seed)
    slices, size = _layout(config)
    theta = np.zeros(size)
    for w, _, fan_out, fan_in in slices:
        bound = 1.0 / math.sqrt(fan_in)
        theta[w] = rng.uniform(-bound, bound, fan_out * fan_in)
    return MLPParams(config, theta)


def _unpack(config, theta):
    slices, size = _layout(config)
    if theta.shape != (size,):
        raise ValueError(f"theta has {theta.shape}, layout wants ({size},)")
    return [
        (theta[w].reshape(fan_out, fan_in), theta[b])
        for w, b, fan_out, fan_in in slices
    ]


def _forward(config, theta, X):
    """Returns (head output, cache for backprop)."""
    layers = _unpack(config, np.asarray(theta, dtype=float))
    a = np.asarray(X, dtype=float)
    acts = [a]
    for W, b in layers[:-1]:
        a = expit(a @ W.T + b)
        acts.append(a)
    W, b = layers[-1]
    z = acts[-1] @ W.T + b
    if config.head == "prob":
        p = expit(z[:, 0] - z[:, 1])
        out = np.stack([p, 1.0 - p], axis=1)
    elif config.head == "positive":
        out = np.logaddexp(0.0, z[:, 0])
    else:
        shifted = z - z.max(axis=1, keepdims=True)
        ez = np.exp(shifted)
        out = ez / ez.sum(axis=1, keepdims=True)
    return out, (acts, z, layers)


def _backward(config, cache, grad_out, size):
    """Flat gradient for upstream grad_out (matches head output shape)."""
    acts, z, layers = cache
    if config.head == "prob":
        # grad_out may be (B,): gradient wrt p(first) alone
        g = np.asarray(grad_out, dtype=float)
        if g.ndim == 2:
            g = g[:, 0] - g[:, 1]
        p = expit(z[:, 0] - z[:, 1])
        du = g * p * (1.0 - p)
        delta = np.stack([du, -du], axis=1)
    elif config.head == "positive":
        delta = (np.asarray(grad_out, dtype=float) * expit(z[:, 0]))[:, None]
    else:
        P_ = np.exp(z - z.max(axis=1, keepdims=True))
        P_ /= P_.sum(axis=1, keepdims=True)
        G = np.asarray(grad_out, dtype=float)
        delta = P_ * (G - (G * P_).sum(axis=1, keepdims=True))
    grad = np.zeros(size)
    slices, _ = _layout(config)
    for li in range(len(layers) - 1, -1, -1):
        W, _ = layers[li]
        w_sl, b_sl, fan_out, fan_in = slices[li]
        grad[w_sl] = (delta.T @ acts[li]).ravel()
        grad[b_sl] = delta.sum(axis=0)
        if li > 0:
            a = acts[li]
            delta = (delta @ W) * a * (1.0 - a)
    return grad


def mlp_predict(params: MLPParams, game_input):
    """Head output for one 8-payoff input (normalized by 50) or a batch."""
    X = np.asarray(game_input, dtype=float)
    single = X.ndim == 1
    if single:
        X = X[None, :]
    out, _ = _forward(params.config, params.theta, X)
    return out[0] if single else out


def dataset_inputs(data: Dataset) -> np.ndarray:
    """Network inputs: own payoffs then other's, divided by the payoff scale."""
    return np.hstack([data.R, data.C]) / INPUT_SCALE


# ---------------------------------------------------------------------------
# optimizer


class Adam:
    def __init__(self, size, lr):
        self.lr = lr
        self.m = np.zeros(size)
        self.v = np.zeros(size)
        self.t = 0

    def step(self, theta, grad):
        self.t += 1
        self.m = _ADAM_B1 * self.m + (1 - _ADAM_B1) * grad
        self.v = _ADAM_B2 * self.v + (1 - _ADAM_B2) * grad * grad
        mhat = self.m / (1 - _ADAM_B1 ** self.t)
        vhat = self.v / (1 - _ADAM_B2 ** self.t)
        theta -= self.lr * mhat / (np.sqrt(vhat) + _ADAM_EPS)


# ---------------------------------------------------------------------------
# data augmentation


def augment_dataset(data: Dataset) -> Dataset:
    """Original records plus row-swapped, column-swapped, and both-swapped.

    The target flips to 1 - p whenever the permutation swaps the deciding
    player's own actions (rows for row-role records, columns for column-role).
    """
    out = []
    perms = (Permutation(True, False), Permutation(False, True), Permutation(True, True))
    for rec in data.records:
        out.append(rec)
        for p in perms:
            g2 = apply_permutation(rec.game, p)
            own = p.swap_rows if rec.role == "row" else p.swap_cols
            target = 1.0 - rec.p_first if own else rec.p_first
            out.append(dataclasses.replace(rec, game=g2, p_first=target))
    return Dataset.from_records(out)


# ---------------------------------------------------------------------------
# training loop shared by direct and augmented models


@dataclass
class TrainHistory:
    checkpoints: list = field(default_factory=list)  # (epoch, train_mse, val_mse)
    best_epoch: int = 0
    stopped_epoch: int = 0


def _train_loop(theta, loss_and_grad, val_loss, n_train, cfg: TrainConfig, rng):
    """Adam minibatch loop with interval validation and early stopping.

    loss_and_grad(theta, idx) -> (loss, grad) on the given training rows;
    val_loss(theta) -> validation MSE. Keeps the best-validation parameters
    and stops after cfg.patience consecutive validation increases.
    """
    adam = Adam(theta.size, cfg.lr)
    history = TrainHistory()
    best_theta = theta.copy()
    best_val = math.inf
    prev_val = None
    rises = 0
    epoch = 0
    for epoch in range(1, cfg.max_epochs + 1):
        order = rng.permutation(n_train)
        train_loss = 0.0
        n_batches = 0
        for start in range(0, n_train, cfg.batch):
            idx = order[start : start + cfg.batch]
            loss, grad = loss_and_grad(theta, idx)
            if not math.isfinite(loss):
                raise Divergence(f"training loss became {loss} at epoch {epoch}")
            adam.step(theta, grad)
            train_loss += loss
            n_batches += 1
        if epoch % cfg.eval_interval == 0 or epoch == cfg.max_epochs:
            v = val_loss(theta)
            history.checkpoints.append((epoch, train_loss / max(n_batches, 1), v))
            if v < best_val:
                best_val = v
                best_theta = theta.copy()
                history.best_epoch = epoch
            if prev_val is not None and v > prev_val:
                rises += 1
            else:
                rises = 0
            prev_val = v
            if rises >= cfg.patience:
                break
    history.stopped_epoch = epoch
    theta[:] = best_theta
    return history


# ---------------------------------------------------------------------------
# direct choice-probability network


@dataclass
class DirectResult:
    params: MLPParams
    test_mse: float
    test_r2: float
    history: TrainHistory
    splits: tuple  # (train_idx, val_idx, test_idx)


def fit_direct(
    train: Dataset,
    val: Dataset,
    cfg: TrainConfig = TrainConfig(),
    mlp_config: MLPConfig | None = None,
    augment=True,
):
    """Core gradient fit on pre-split folds; returns (params, history)."""
    if mlp_config is None:
        mlp_config = MLPConfig(head="prob")
    seeds = np.random.SeedSequence(cfg.seed).spawn(2)
    if augment:
        train = augment_dataset(train)
    X, y = dataset_inputs(train), train.y
    X_val = dataset_inputs(val)
    params = init_params(mlp_config, seeds[0])
    size = params.theta.size

    def loss_and_grad(theta, idx):
        out, cache = _forward(mlp_config, theta, X[idx])
        resid = out[:, 0] - y[idx]
        grad = _backward(mlp_config, cache, 2.0 * resid / len(idx), size)
        return float(np.mean(resid * resid)), grad

    def val_loss(theta):
        out, _ = _forward(mlp_config, theta, X_val)
        resid = out[:, 0] - val.y
        return float(np.mean(resid * resid))

    rng = np.random.default_rng(seeds[1])
    history = _train_loop(params.theta, loss_and_grad, val_loss, len(train), cfg, rng)
    return params, history


def train_direct_mlp(
    data: Dataset,
    cfg: TrainConfig = TrainConfig(),
    mlp_config: MLPConfig | None = None,
    split=(0.8, 0.1, 0.1),
) -> DirectResult:
    """Fit the flexible benchmark: payoffs in, choice probability out.

    The training split is augmented fourfold with action swaps; validation and
    test stay unaugmented. Minimizes MSE against empirical frequencies.
    """
    split_rng = np.random.default_rng(np.random.SeedSequence(cfg.seed).spawn(3)[2])
    train_idx, val_idx, test_idx = split_indices(len(data), split, split_rng)
    params, history = fit_direct(
        data.subset(train_idx), data.subset(val_idx), cfg, mlp_config
    )
    test = data.subset(test_idx)
    test_mse, test_r2 = evaluate(direct_predictor(params)(test), test)
    return DirectResult(params, test_mse, test_r2, history, (train_idx, val_idx, test_idx))


def direct_predictor(params: MLPParams):
    """Dataset -> p(first) closure for a trained direct network."""
    return lambda ds: mlp_predict(params, dataset_inputs(ds))[:, 0]


# ---------------------------------------------------------------------------
# neural-augmented behavioral models


@dataclass(frozen=True)
class AugmentedModelSpec:
    base: ModelSpec
    neural_slots: tuple = ()
    hidden: tuple = (300, 300, 300)

    def __post_init__(self):
        allowed = {"eta_self"}
        if self.base.use_belief_noise:
            allowed.add("eta_other")
        if self.base.structure is Structure.LEVEL_MIXTURE:
            allowed.add("level_mixture")
        if self.base.structure is Structure.NASH:
            allowed = set()
        bad = set(self.neural_slots) - allowed
        if bad:
            raise InvalidSpec(f"slots {sorted(bad)} not available for this structure")
        if len(set(self.neural_slots)) != len(self.neural_slots):
            raise InvalidSpec("duplicate neural slots")
        ordered = tuple(s for s in _SLOT_ORDER if s in self.neural_slots)
        object.__setattr__(self, "neural_slots", ordered)

    @classmethod
    def from_string(cls, text, hidden=(300, 300, 300)):
        spec, slots = parse_model_string(text)
        return cls(spec, slots, tuple(hidden))

    def label(self):
        return model_string(self.base, self.neural_slots)


class AugmentedModel:
    """Behavioral predictor whose chosen parameters come from per-game nets.

    Parameters live in one flat vector: slot networks first (in slot order),
    then unconstrained scalars (softplus-reparameterized etas and alpha, raw
    mixture logits). Gradients chain analytically through the behavioral
    kernels into each network.
    """

    def __init__(self, spec: AugmentedModelSpec, seed=0):
        if spec.base.structure is Structure.NASH:
            raise InvalidSpec("parameter-free structure cannot be trained")
        self.spec = spec
        self.configs = {
            slot: MLPConfig(input_dim=8, hidden=spec.hidden, head=_SLOT_HEAD[slot])
            for slot in spec.neural_slots
        }
        seeds = np.random.SeedSequence(seed).spawn(max(len(spec.neural_slots), 1))
        segments = []
        pos = 0
        pieces = []
        for i, slot in enumerate(spec.neural_slots):
            p = init_params(self.configs[slot], seeds[i])
            segments.append((slot, slice(pos, pos + p.theta.size)))
            pos += p.theta.size
            pieces.append(p.theta)
        scalars = []
        if "eta_self" not in spec.neural_slots:
            scalars.append(("rho_eta_self", _softplus_inv(0.5)))
        if spec.base.use_belief_noise and "eta_other" not in spec.neural_slots:
            scalars.append(("rho_eta_other", _softplus_inv(0.5)))
        if spec.base.use_risk:
            scalars.append(("rho_alpha", _softplus_inv(0.02)))
        if (
            spec.base.structure is Structure.LEVEL_MIXTURE
            and "level_mixture" not in spec.neural_slots
        ):
            scalars.append(("mix_logits", np.zeros(4)))
        for name, value in scalars:
            v = np.atleast_1d(np.asarray(value, dtype=float))
            segments.append((name, slice(pos, pos + v.size)))
            pos += v.size
            pieces.append(v)
        self.segments = dict(segments)
        self.theta = np.concatenate(pieces) if pieces else np.zeros(0)

    def _seg(self, theta, name):
        return theta[self.segments[name]]

    def slot_values(self, theta, X):
        """Per-game parameter values: eta_self, eta_other, alpha, weights."""
        spec = self.spec
        B = X.shape[0]
        if "eta_self" in self.configs:
            es, es_cache = _forward(self.configs["eta_self"], self._seg(theta, "eta_self"), X)
        else:
            rho = self._seg(theta, "rho_eta_self")[0]
            es, es_cache = np.full(B, _softplus(rho)), None
        if spec.base.use_belief_noise:
            if "eta_other" in self.configs:
                eo, eo_cache = _forward(
                    self.configs["eta_other"], self._seg(theta, "eta_other"), X
                )
            else:
                rho = self._seg(theta, "rho_eta_other")[0]
                eo, eo_cache = np.full(B, _softplus(rho)), None
        else:
            eo, eo_cache = es, "tied"
        alpha = _softplus(self._seg(theta, "rho_alpha")[0]) if spec.base.use_risk else 0.0
        weights = w_cache = None
        if spec.base.structure is Structure.LEVEL_MIXTURE:
            if "level_mixture" in self.configs:
                weights, w_cache = _forward(
                    self.configs["level_mixture"], self._seg(theta, "level_mixture"), X
                )
            else:
                logits = self._seg(theta, "mix_logits")
                ex = np.exp(logits - logits.max())
                weights = np.broadcast_to(ex / ex.sum(), (B, 4))
        return (es, es_cache), (eo, eo_cache), alpha, (weights, w_cache)

    def predict_arrays(self, theta, R, C, X):
        (es, _), (eo, _), alpha, (weights, _) = self.slot_values(theta, X)
        return self._combine(R, C, es, eo, alpha, weights)[0]

    def _combine(self, R, C, es, eo, alpha, weights, with_grad=False):
        spec = self.spec
        B = R.shape[0]
        al = np.full(B, alpha, dtype=float)
        if spec.base.structure is Structure.QRE:
            if with_grad:
                p, dpes, dpeo, dpda = kernels.qre_unrolled_grad(R, C, es, eo, al)
                return p, (dpes, dpeo, dpda, None)
            return kernels.qre_unrolled(R, C, es, eo, al), None
        if with_grad:
            P, dPes, dPeo, dPda = kernels.levelk_all_grad(R, C, es, eo, al)
        else:
            P = kernels.levelk_all(R, C, es, eo, al)
        if spec.base.structure is Structure.LEVEL_K:
            k = spec.base.k
            if with_grad:
                return P[:, k], (dPes[:, k], dPeo[:, k], dPda[:, k], None)
            return P[:, k], None
        pred = np.sum(P * weights, axis=1)
        if with_grad:
            return pred, (
                np.sum(dPes * weights, axis=1),
                np.sum(dPeo * weights, axis=1),
                np.sum(dPda * weights, axis=1),
                P,
            )
        return pred, None

    def loss_and_grad(self, theta, R, C, X, y):
        """Game-level MSE and its gradient in the flat parameter vector."""
        spec = self.spec
        B = R.shape[0]
        (es, es_cache), (eo, eo_cache), alpha, (weights, w_cache) = self.slot_values(theta, X)
        pred, (dpes, dpeo, dpda, P) = self._combine(
            R, C, es, eo, alpha, weights, with_grad=True
        )
        resid = pred - y
        loss = float(np.mean(resid * resid))
        up = 2.0 * resid / B

        grad = np.zeros_like(theta)
        g_es = up * dpes
        g_eo = up * dpeo
        if eo_cache == "tied":
            g_es = g_es + g_eo
        if "eta_self" in self.configs:
            cfg = self.configs["eta_self"]
            grad[self.segments["eta_self"]] = _backward(
                cfg, es_cache, g_es, self.segments["eta_self"].stop - self.segments["eta_self"].start
            )
        else:
            rho = self._seg(theta, "rho_eta_self")[0]
            grad[self.segments["rho_eta_self"]] = np.sum(g_es) * expit(rho)
        if spec.base.use_belief_noise:
            if "eta_other" in self.configs:
                cfg = self.configs["eta_other"]
                sl = self.segments["eta_other"]
                grad[sl] = _backward(cfg, eo_cache, g_eo, sl.stop - sl.start)
            else:
                rho = self._seg(theta, "rho_eta_other")[0]
                grad[self.segments["rho_eta_other"]] = np.sum(g_eo) * expit(rho)
        if spec.base.use_risk:
            rho = self._seg(theta, "rho_alpha")[0]
            grad[self.segments["rho_alpha"]] = np.sum(up * dpda) * expit(rho)
        if spec.base.structure is Structure.LEVEL_MIXTURE:
            G = up[:, None] * P  # upstream grad wrt per-game weights
            if "level_mixture" in self.configs:
                sl = self.segments["level_mixture"]
                grad[sl] = _backward(self.configs["level_mixture"], w_cache, G, sl.stop - sl.start)
            else:
                w = weights[0]
                Gbar = G.sum(axis=0)
                grad[self.segments["mix_logits"]] = w * (Gbar - float(Gbar @ w))
        return loss, grad

    def predictor(self, theta=None):
        th = self.theta if theta is None else theta
        th = th.copy()
        return lambda ds: self.predict_arrays(th, ds.R, ds.C, dataset_inputs(ds))


def _softplus(x):
    return float(np.logaddexp(0.0, x))


def _softplus_inv(y):
    return math.log(math.expm1(y))


@dataclass
class AugmentedResult:
    model: AugmentedModel
    test_mse: float
    test_r2: float
    history: TrainHistory
    splits: tuple


def fit_augmented(
    spec: AugmentedModelSpec,
    train: Dataset,
    val: Dataset,
    cfg: TrainConfig = TrainConfig(),
    augment=True,
):
    """Core gradient fit on pre-split folds; returns (model, history)."""
    seeds = np.random.SeedSequence(cfg.seed).spawn(2)
    if augment:
        train = augment_dataset(train)
    model = AugmentedModel(spec, seed=int(np.random.default_rng(seeds[0]).integers(2**31 - 1)))
    X = dataset_inputs(train)
    X_val = dataset_inputs(val)

    def loss_and_grad(theta, idx):
        return model.loss_and_grad(theta, train.R[idx], train.C[idx], X[idx], train.y[idx])

    def val_loss(theta):
        pred = model.predict_arrays(theta, val.R, val.C, X_val)
        resid = pred - val.y
        return float(np.mean(resid * resid))

    rng = np.random.default_rng(seeds[1])
    history = _train_loop(model.theta, loss_and_grad, val_loss, len(train), cfg, rng)
    return model, history


def train_augmented(
    spec: AugmentedModelSpec,
    data: Dataset,
    cfg: TrainConfig = TrainConfig(),
    split=(0.8, 0.1, 0.1),
    augment=True,
) -> AugmentedResult:
    """Gradient-train slot networks and scalar parameters jointly.

    Same protocol as the direct network: 80/10/10 split over records, fourfold
    action-swap augmentation of the training set, Adam on game-level MSE,
    interval-based early stopping on validation error.
    """
    split_rng = np.random.default_rng(np.random.SeedSequence(cfg.seed).spawn(3)[2])
    train_idx, val_idx, test_idx = split_indices(len(data), split, split_rng)
    model, history = fit_augmented(
        spec, data.subset(train_idx), data.subset(val_idx), cfg, augment
    )
    test = data.subset(test_idx)
    test_mse, test_r2 = evaluate(model.predictor()(test), test)
    return AugmentedResult(model, test_mse, test_r2, history, (train_idx, val_idx, test_idx))


def augmented_fit_fn(spec: AugmentedModelSpec, cfg: TrainConfig = TrainConfig(), augment=True):
    """fit_fn adapter for cross_validate: trains on (train, val) per round."""

    def fn(train, val, round_seed):
        round_cfg = dataclasses.replace(cfg, seed=round_seed)
        model, _ = fit_augmented(spec, train, val, round_cfg, augment)
        return model.predictor()

    return fn


def direct_fit_fn(mlp_config: MLPConfig | None = None, cfg: TrainConfig = TrainConfig()):
    """fit_fn adapter for cross_validate on the direct network."""

    def fn(train, val, round_seed):
        round_cfg = dataclasses.replace(cfg, seed=round_seed)
        params, _ = fit_direct(train, val, round_cfg, mlp_config)
        return direct_predictor(params)

    return fn


# ---------------------------------------------------------------------------
# verification and persistence


def grad_check(loss_and_grad, theta, n_coords=100, step=1e-5, seed=0):
    """Max relative error between analytic and central-difference gradients.

    loss_and_grad(theta) -> (loss, grad). Checks n_coords randomly chosen
    coordinates (all of them if the vector is smaller).
    """
    theta = np.asarray(theta, dtype=float)
    _, grad = loss_and_grad(theta)
    rng = np.random.default_rng(seed)
    n = min(n_coords, theta.size)
    coords = rng.choice(theta.size, size=n, replace=False)
    worst = 0.0
    for j in coords:
        tp = theta.copy()
        tp[j] += step
        tm = theta.copy()
        tm[j] -= step
        fd = (loss_and_grad(tp)[0] - loss_and_grad(tm)[0]) / (2 * step)
        denom = max(abs(grad[j]), abs(fd), 1e-8)
        worst = max(worst, abs(grad[j] - fd) / denom)
    return worst


_CHECKPOINT_VERSION = 1


def save_direct(path, params: MLPParams):
    meta = {
        "version": _CHECKPOINT_VERSION,
        "kind": "direct",
        "input_dim": params.config.input_dim,
        "hidden": list(params.config.hidden),
        "head": params.config.head,
    }
    np.savez(path, theta=params.theta, meta=np.frombuffer(json.dumps(meta).encode(), dtype=np.uint8))


def save_augmented(path, model: AugmentedModel):
    meta = {
        "version": _CHECKPOINT_VERSION,
        "kind": "augmented",
        "model": model.spec.label(),
        "hidden": list(model.spec.hidden),
    }
    np.savez(path, theta=model.theta, meta=np.frombuffer(json.dumps(meta).encode(), dtype=np.uint8))


def load_checkpoint(path):
    """Returns MLPParams for direct checkpoints, AugmentedModel otherwise."""
    with np.load(path) as z:
        meta = json.loads(bytes(z["meta"]).decode())
        theta = z["theta"]
    if meta.get("version") != _CHECKPOINT_VERSION:
        raise InvalidSpec(f"unsupported checkpoint version {meta.get('version')}")
    if meta["kind"] == "direct":
        cfg = MLPConfig(meta["input_dim"], tuple(meta["hidden"]), meta["head"])
        return MLPParams(cfg, theta)
    spec = AugmentedModelSpec.from_string(meta["model"], hidden=tuple(meta["hidden"]))
    model = AugmentedModel(spec, seed=0)
    if theta.shape != model.theta.shape:
        raise InvalidSpec("checkpoint does not match its declared architecture")
    model.theta = theta
    return model
