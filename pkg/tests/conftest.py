"""Shared fixtures and oracle helpers for the test suite."""

import itertools

import numpy as np
import pytest

from matrixgames.behavioral import ModelParams, ModelSpec, Structure
from matrixgames.games import GameMatrix
from matrixgames import dataio

# canonical example games used throughout
PD = GameMatrix((30, 10, 40, 20), (30, 40, 10, 20), id="pd")
MATCHING_PENNIES = GameMatrix((10, 1, 1, 10), (1, 10, 10, 1), id="mp")
COORDINATION = GameMatrix((10, 1, 1, 5), (5, 1, 1, 10), id="coord")


@pytest.fixture
def pd_game():
    return PD


@pytest.fixture
def mp_game():
    return MATCHING_PENNIES


@pytest.fixture
def coord_game():
    return COORDINATION


@pytest.fixture(scope="session")
def corpus():
    """Full generated corpus (1208 base + twins), shared across the session."""
    return dataio.generate_games(seed=11)


def random_games(rng, n, payoff_max=50, tie_free=False):
    """n random GameMatrix draws with integer payoffs in [1, payoff_max]."""
    out = []
    while len(out) < n:
        P = rng.integers(1, payoff_max + 1, size=8)
        g = GameMatrix(tuple(int(v) for v in P[:4]), tuple(int(v) for v in P[4:]))
        if tie_free and (
            len(set(g.row_payoffs)) != 4 or len(set(g.col_payoffs)) != 4
        ):
            continue
        out.append(g)
    return out


def all_model_specs():
    """Every scalar ModelSpec the grammar can express, with workable params.

    Returns [(label, spec, params)] covering Nash, QRE, all level-k, and the
    level mixture, each with and without belief noise and risk.
    """
    out = [("Nash", ModelSpec(Structure.NASH), ModelParams())]
    variants = list(itertools.product([False, True], [False, True]))
    for belief, risk in variants:
        suffix = ("+Belief" if belief else "") + ("+Risk" if risk else "")
        params = ModelParams(
            eta_self=0.7,
            eta_other=0.3 if belief else None,
            alpha=0.05 if risk else 0.0,
        )
        out.append((f"QRE{suffix}", ModelSpec(Structure.QRE, use_belief_noise=belief, use_risk=risk), params))
        for k in range(4):
            out.append(
                (
                    f"L{k}+QR{suffix}",
                    ModelSpec(Structure.LEVEL_K, k=k, use_belief_noise=belief, use_risk=risk),
                    params,
                )
            )
        out.append(
            (
                f"L+QR{suffix}",
                ModelSpec(Structure.LEVEL_MIXTURE, use_belief_noise=belief, use_risk=risk),
                ModelParams(
                    eta_self=0.7,
                    eta_other=0.3 if belief else None,
                    alpha=0.05 if risk else 0.0,
                    level_weights=(0.1, 0.4, 0.3, 0.2),
                ),
            )
        )
    return out


def brute_force_pure_nash(g):
    """Independent PSNE oracle: check both deviation directions in each cell."""
    a, b, c, d = g.row_payoffs
    x, y, z, w = g.col_payoffs
    row = {("A", "C"): a, ("A", "D"): b, ("B", "C"): c, ("B", "D"): d}
    col = {("A", "C"): x, ("A", "D"): y, ("B", "C"): z, ("B", "D"): w}
    eqs = []
    for r_act, c_act in (("A", "C"), ("A", "D"), ("B", "C"), ("B", "D")):
        r_dev = "B" if r_act == "A" else "A"
        c_dev = "D" if c_act == "C" else "C"
        if row[(r_act, c_act)] >= row[(r_dev, c_act)] and col[(r_act, c_act)] >= col[(r_act, c_dev)]:
            eqs.append((r_act, c_act))
    return eqs


def games_to_arrays(games):
    R = np.array([g.row_payoffs for g in games], dtype=float)
    C = np.array([g.col_payoffs for g in games], dtype=float)
    return R, C
