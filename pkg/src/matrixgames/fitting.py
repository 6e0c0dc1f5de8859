"""Parameter estimation, evaluation metrics, completeness, cross-validation.

All models are evaluated at the game level: the target is the empirical
frequency of the first action and the loss is mean squared error, with R^2
computed about the mean empirical frequency.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import minimize

from .behavioral import ModelParams, ModelSpec, Structure, predict_batch
from .errors import EmptyDataset, InsufficientData, NoConvergence, NonFinite
from .games import transpose_perspective

_THETA_BOX = 20.0  # |log parameter| bound; beyond this the objective is penalized
_PENALTY = 1e6


@dataclass
class Dataset:
    """Game-level records with cached payoff arrays.

    R and C hold the deciding player's row-perspective payoffs (column-role
    records are transposed on ingestion), y the empirical first-action
    frequency, n the observation counts.
    """

    records: list
    R: np.ndarray = field(repr=False, default=None)
    C: np.ndarray = field(repr=False, default=None)
    y: np.ndarray = field(repr=False, default=None)
    n: np.ndarray = field(repr=False, default=None)

    @classmethod
    def from_records(cls, records):
        records = list(records)
        R = np.empty((len(records), 4))
        C = np.empty((len(records), 4))
        y = np.empty(len(records))
        n = np.empty(len(records))
        for i, rec in enumerate(records):
            g = rec.game if rec.role == "row" else transpose_perspective(rec.game)
            R[i] = g.row_payoffs
            C[i] = g.col_payoffs
            y[i] = rec.p_first
            n[i] = rec.n
        return cls(records, R, C, y, n)

    def __len__(self):
        return len(self.records)

    def subset(self, indices):
        idx = np.asarray(indices)
        return Dataset(
            [self.records[i] for i in idx],
            self.R[idx], self.C[idx], self.y[idx], self.n[idx],
        )


@dataclass(frozen=True)
class FitResult:
    spec: ModelSpec
    params: ModelParams
    train_mse: float
    test_mse: float
    test_r2: float
    theta: tuple = ()


@dataclass(frozen=True)
class CompletenessBounds:
    """Floor (random) and ceiling (flexible upper bound) for completeness."""

    random_mse: float
    random_r2: float
    upper_mse: float
    upper_r2: float

    def __post_init__(self):
        if not (self.upper_mse < self.random_mse and self.upper_r2 > self.random_r2):
            raise ValueError("upper bound must beat the random baseline")


@dataclass(frozen=True)
class CVResult:
    mean_mse: float
    se_mse: float
    mean_r2: float
    se_r2: float
    round_mse: tuple
    round_r2: tuple


def evaluate(predictions, data: Dataset):
    """(mse, r2) of predictions against the dataset's empirical frequencies."""
    if len(data) == 0:
        raise EmptyDataset("cannot evaluate on an empty dataset")
    preds = np.asarray(predictions, dtype=float)
    if preds.shape != data.y.shape:
        raise ValueError(f"{preds.shape} predictions for {data.y.shape} records")
    resid = preds - data.y
    mse = float(np.mean(resid * resid))
    centered = data.y - data.y.mean()
    ss_tot = float(np.sum(centered * centered))
    ss_res = float(np.sum(resid * resid))
    # a constant target has no variance to explain; the mean of identical
    # floats is not bitwise exact, so test the values, not ss_tot
    if ss_tot > 0 and not np.all(data.y == data.y[0]):
        r2 = 1.0 - ss_res / ss_tot
    else:
        r2 = 1.0 if ss_res == 0 else float("-inf")
    return mse, r2


def random_baseline(data: Dataset, seed: int = 0):
    """Metrics of uniform-random predictions, one draw per record."""
    rng = np.random.default_rng(seed)
    return evaluate(rng.random(len(data)), data)


def completeness(model_metrics, bounds: CompletenessBounds, r2_only: bool = False) -> float:
    """Percent of the random-to-upper-bound gap the model closes.

    Averages the MSE-based and R^2-based rescalings unless r2_only (used for
    models whose MSE is not on the probability scale).
    """
    mse, r2 = model_metrics
    c_r2 = (r2 - bounds.random_r2) / (bounds.upper_r2 - bounds.random_r2)
    if r2_only:
        return 100.0 * c_r2
    c_mse = (bounds.random_mse - mse) / (bounds.random_mse - bounds.upper_mse)
    return 100.0 * (c_mse + c_r2) / 2.0


def free_parameters(spec: ModelSpec):
    """Names of the fit vector's entries for a scalar spec, in order.

    Positive parameters are optimized as logs; mixture weights as three free
    logits against a pinned zero logit for level 0.
    """
    if spec.structure is Structure.NASH:
        return []
    names = ["log_eta_self"]
    if spec.use_belief_noise:
        names.append("log_eta_other")
    if spec.use_risk:
        names.append("log_alpha")
    if spec.structure is Structure.LEVEL_MIXTURE:
        names.extend(["w_logit_1", "w_logit_2", "w_logit_3"])
    return names


def theta_to_params(spec: ModelSpec, theta) -> ModelParams:
    if spec.structure is Structure.NASH:
        return ModelParams()
    theta = np.asarray(theta, dtype=float)
    i = 0
    eta_self = math.exp(theta[i])
    i += 1
    eta_other = None
    if spec.use_belief_noise:
        eta_other = math.exp(theta[i])
        i += 1
    alpha = 0.0
    if spec.use_risk:
        alpha = math.exp(theta[i])
        i += 1
    weights = None
    if spec.structure is Structure.LEVEL_MIXTURE:
        logits = np.concatenate([[0.0], theta[i : i + 3]])
        ex = np.exp(logits - logits.max())
        weights = tuple(ex / ex.sum())
    return ModelParams(eta_self, eta_other, alpha, weights)


def _objective(spec: ModelSpec, data: Dataset):
    def fun(theta):
        theta = np.asarray(theta, dtype=float)
        excess = np.abs(theta) - _THETA_BOX
        if np.any(excess > 0):
            return _PENALTY + float(np.sum(excess[excess > 0]))
        try:
            preds = predict_batch(spec, theta_to_params(spec, theta), data.R, data.C)
        except NoConvergence:
            return _PENALTY
        resid = preds - data.y
        mse = float(np.mean(resid * resid))
        if not math.isfinite(mse):
            raise NonFinite(f"objective non-finite at theta={theta!r}")
        return mse

    return fun


def _start_points(spec: ModelSpec, n_starts: int, rng) -> np.ndarray:
    names = free_parameters(spec)
    starts = np.empty((n_starts, len(names)))
    for j, name in enumerate(names):
        if name.startswith("log_eta"):
            starts[:, j] = rng.uniform(math.log(1e-3), math.log(10.0), n_starts)
        elif name == "log_alpha":
            starts[:, j] = rng.uniform(math.log(1e-4), math.log(0.5), n_starts)
        else:
            starts[:, j] = rng.normal(0.0, 1.0, n_starts)
    return starts


def nelder_mead_fit(
    spec: ModelSpec,
    data: Dataset,
    init=None,
    seed: int = 0,
    starts: int = 8,
    maxiter: int = 5000,
    tol: float = 1e-8,
    test_data: Dataset | None = None,
) -> FitResult:
    """Minimize train MSE over the spec's free parameters, best of multi-start.

    Positive parameters are optimized in log space; convergence when the
    simplex spread falls below tol or after maxiter iterations. Test metrics
    are computed on test_data when given, else on the training data.
    """
    if len(data) == 0:
        raise EmptyDataset("cannot fit on an empty dataset")
    fun = _objective(spec, data)
    if spec.structure is Structure.NASH:
        best_theta = np.empty(0)
        best_val = fun(best_theta)
    else:
        rng = np.random.default_rng(seed)
        points = _start_points(spec, starts, rng)
        if init is not None:
            points = np.vstack([np.asarray(init, dtype=float)[None, :], points])
        best_theta, best_val = None, math.inf
        for x0 in points:
            res = minimize(
                fun,
                x0,
                method="Nelder-Mead",
                options={"xatol": tol, "fatol": tol, "maxiter": maxiter},
            )
            val = fun(res.x)  # re-evaluate: res.fun can lag the final simplex
            if val < best_val:
                best_theta, best_val = np.asarray(res.x), val
    if spec.structure is Structure.NASH:
        params = ModelParams()
    else:
        params = theta_to_params(spec, best_theta)
    eval_data = test_data if test_data is not None else data
    test_mse, test_r2 = evaluate(predict_batch(spec, params, eval_data.R, eval_data.C), eval_data)
    return FitResult(
        spec=spec,
        params=params,
        train_mse=float(best_val),
        test_mse=test_mse,
        test_r2=test_r2,
        theta=tuple(np.atleast_1d(best_theta).tolist()),
    )


def split_indices(n: int, fractions, rng):
    """Random partition of range(n): returns (train, test) or (train, val, test).

    The test share comes first in the shuffled order, then the validation
    share; every part must be nonempty.
    """
    perm = rng.permutation(n)
    if len(fractions) == 2:
        n_test = max(1, round(fractions[1] * n))
        test, train = perm[:n_test], perm[n_test:]
        if len(train) == 0:
            raise InsufficientData(f"empty training fold for n={n}")
        return train, test
    n_test = max(1, round(fractions[2] * n))
    n_val = max(1, round(fractions[1] * n))
    test = perm[:n_test]
    val = perm[n_test : n_test + n_val]
    train = perm[n_test + n_val :]
    if len(train) == 0 or len(val) == 0:
        raise InsufficientData(f"empty fold for n={n} with fractions {fractions}")
    return train, val, test


def cross_validate(
    spec: ModelSpec,
    data: Dataset,
    rounds: int = 10,
    split=None,
    seed: int = 0,
    fit_fn=None,
) -> CVResult:
    """Repeated random-partition evaluation; mean and SE of test metrics.

    fit_fn(train, val_or_None, round_seed) must return a callable mapping a
    Dataset to per-record predictions; the default fits the scalar spec by
    Nelder-Mead on a 90/10 split. Neural models pass their training strategy
    and an 80/10/10 split.
    """
    if split is None:
        split = (0.9, 0.1)
    if fit_fn is None:
        def fit_fn(train, val, round_seed):
            result = nelder_mead_fit(spec, train, seed=round_seed)
            return lambda ds: predict_batch(spec, result.params, ds.R, ds.C)

    seeds = np.random.SeedSequence(seed).spawn(rounds)
    mses, r2s = [], []
    for rnd in range(rounds):
        rng = np.random.default_rng(seeds[rnd])
        round_seed = int(rng.integers(2**31 - 1))
        if len(split) == 2:
            train_idx, test_idx = split_indices(len(data), split, rng)
            val = None
        else:
            train_idx, val_idx, test_idx = split_indices(len(data), split, rng)
            val = data.subset(val_idx)
        train = data.subset(train_idx)
        test = data.subset(test_idx)
        predict_fn = fit_fn(train, val, round_seed)
        mse, r2 = evaluate(predict_fn(test), test)
        mses.append(mse)
        r2s.append(r2)
    mses = np.asarray(mses)
    r2s = np.asarray(r2s)
    se = lambda v: float(np.std(v, ddof=1) / math.sqrt(rounds)) if rounds > 1 else 0.0
    return CVResult(
        mean_mse=float(mses.mean()),
        se_mse=se(mses),
        mean_r2=float(r2s.mean()),
        se_r2=se(r2s),
        round_mse=tuple(mses.tolist()),
        round_r2=tuple(r2s.tolist()),
    )
