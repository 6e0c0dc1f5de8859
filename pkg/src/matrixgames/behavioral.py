"""Behavioral choice models: level-k quantal response, QRE, belief noise, risk.

Every model maps a game and role to p(first action). Models are
context-invariant here: one parameter vector serves every game. Game-specific
(neural) parameterizations live in the neural module and reuse these
primitives.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum

import numpy as np

from . import kernels
from .errors import InvalidSpec, NoEquilibrium
from .games import GameMatrix, transpose_perspective
from .solvers import mixed_nash, pure_nash


@dataclass(frozen=True)
class RiskParam:
    """CARA coefficient per point of payoff; 0 = risk neutral."""

    alpha: float = 0.0


@dataclass(frozen=True)
class NoiseParams:
    """Own precision and believed opponent precision (inverse noisiness)."""

    eta_self: float
    eta_other: float


@dataclass(frozen=True)
class Belief:
    """Probability the opponent plays their first-listed action (C for a
    column opponent, A for a row opponent)."""

    p_first: float


class Structure(Enum):
    NASH = "Nash"
    LEVEL_K = "LevelK_QR"
    QRE = "QRE"
    LEVEL_MIXTURE = "LevelMixture_QR"


@dataclass(frozen=True)
class ModelSpec:
    """Which behavioral structure is active; scalar-parameter family."""

    structure: Structure
    k: int | None = None
    use_belief_noise: bool = False
    use_risk: bool = False

    def __post_init__(self):
        if self.structure is Structure.LEVEL_K:
            if self.k is None or not 0 <= self.k <= 3:
                raise InvalidSpec(f"level-k requires k in 0..3, got {self.k}")
        elif self.k is not None:
            raise InvalidSpec("k is only valid for level-k structures")
        if self.structure is Structure.NASH and (
            self.use_belief_noise or self.use_risk
        ):
            raise InvalidSpec("Nash takes no noise or risk components")


@dataclass(frozen=True)
class ModelParams:
    """Scalar parameter values for a ModelSpec.

    eta_other defaults to eta_self (the standard each-believes-the-other-is-
    as-noisy assumption); level_weights is the mixture distribution over
    k = 0..3 and must sum to 1 when present.
    """

    eta_self: float | None = None
    eta_other: float | None = None
    alpha: float = 0.0
    level_weights: tuple | None = None


# --- model string grammar -------------------------------------------------

_SLOT_TOKENS = {"nQR": "eta_self", "nBelief": "eta_other"}


def parse_model_string(s: str):
    """Parse a model label like "L2+QR+Belief+Risk" or "L2+nQR+nBelief+Risk".

    Returns (ModelSpec, neural_slots) where neural_slots is a tuple drawn from
    {"eta_self", "eta_other", "level_mixture"} naming the parameters supplied
    per game by a network instead of a scalar.
    """
    tokens = [t for t in s.strip().split("+") if t]
    if not tokens:
        raise InvalidSpec("empty model string")
    head, rest = tokens[0], tokens[1:]
    slots = []
    k = None
    if head == "Nash":
        structure = Structure.NASH
    elif head == "QRE":
        structure = Structure.QRE
    elif head == "nQRE":
        structure = Structure.QRE
        slots.append("eta_self")
    elif head == "L":
        structure = Structure.LEVEL_MIXTURE
    elif head == "nL":
        structure = Structure.LEVEL_MIXTURE
        slots.append("level_mixture")
    elif head.startswith("L") and head[1:].isdigit():
        structure = Structure.LEVEL_K
        k = int(head[1:])
        if not 0 <= k <= 3:
            raise InvalidSpec(f"level out of range in {s!r}")
    else:
        raise InvalidSpec(f"unknown structure token {head!r} in {s!r}")

    seen = set()
    use_belief = False
    use_risk = False
    has_qr = False
    for tok in rest:
        if tok in seen:
            raise InvalidSpec(f"duplicate token {tok!r} in {s!r}")
        seen.add(tok)
        if tok == "QR":
            has_qr = True
        elif tok == "nQR":
            has_qr = True
            if "eta_self" in slots:
                raise InvalidSpec(f"eta_self declared neural twice in {s!r}")
            slots.append("eta_self")
        elif tok == "Belief":
            use_belief = True
        elif tok == "nBelief":
            use_belief = True
            slots.append("eta_other")
        elif tok == "Risk":
            use_risk = True
        else:
            raise InvalidSpec(f"unknown token {tok!r} in {s!r}")

    if structure is Structure.NASH:
        if rest:
            raise InvalidSpec("Nash takes no components")
    elif structure in (Structure.LEVEL_K, Structure.LEVEL_MIXTURE):
        if not has_qr:
            raise InvalidSpec(f"{s!r}: level structures need a QR or nQR component")
    elif structure is Structure.QRE and has_qr and "eta_self" not in slots:
        raise InvalidSpec(f"{s!r}: QRE already contains its quantal response")

    spec = ModelSpec(structure, k=k, use_belief_noise=use_belief, use_risk=use_risk)
    return spec, tuple(slots)


def model_string(spec: ModelSpec, neural_slots=()) -> str:
    """Canonical label for a spec, inverse of parse_model_string."""
    slots = set(neural_slots)
    if spec.structure is Structure.NASH:
        return "Nash"
    if spec.structure is Structure.QRE:
        parts = ["nQRE" if "eta_self" in slots else "QRE"]
    elif spec.structure is Structure.LEVEL_MIXTURE:
        parts = ["nL" if "level_mixture" in slots else "L"]
        parts.append("nQR" if "eta_self" in slots else "QR")
    else:
        parts = [f"L{spec.k}"]
        parts.append("nQR" if "eta_self" in slots else "QR")
    if spec.use_belief_noise:
        parts.append("nBelief" if "eta_other" in slots else "Belief")
    if spec.use_risk:
        parts.append("Risk")
    return "+".join(parts)


# --- primitive operations -------------------------------------------------


def cara_utility(x, alpha) -> float:
    """CARA utility of a payoff; alpha may be a RiskParam or a float."""
    a = alpha.alpha if isinstance(alpha, RiskParam) else float(alpha)
    return float(kernels.cara(np.asarray(float(x)), np.asarray(a)))


def logit_choice(delta_eu: float, eta: float) -> float:
    """Probability of the first action given an EU advantage and precision."""
    return float(kernels.logistic(np.asarray(eta * delta_eu)))


def _role_arrays(g: GameMatrix, role: str):
    """Row-perspective payoff arrays for the deciding player."""
    if role == "col":
        g = transpose_perspective(g)
    R = np.asarray([g.row_payoffs], dtype=float)
    C = np.asarray([g.col_payoffs], dtype=float)
    return R, C


def expected_utilities(g: GameMatrix, role: str, belief, alpha=0.0):
    """Expected CARA utilities of the role's two actions under a belief."""
    p = belief.p_first if isinstance(belief, Belief) else float(belief)
    a = alpha.alpha if isinstance(alpha, RiskParam) else float(alpha)
    R, _ = _role_arrays(g, role)
    U = kernels.cara(R, np.asarray(a))[0]
    eu_first = p * U[0] + (1.0 - p) * U[1]
    eu_second = p * U[2] + (1.0 - p) * U[3]
    return float(eu_first), float(eu_second)


def level_k_belief(g: GameMatrix, role: str, k: int, eta_other: float, alpha=0.0) -> Belief:
    """Belief of a level-k player about the opponent's first action.

    k <= 1 is uniform; higher levels simulate the opponent's quantal response
    (precision eta_other, shared alpha) to their own level-(k-1) belief.
    """
    if not 0 <= k <= 3:
        raise InvalidSpec(f"k must be in 0..3, got {k}")
    a = alpha.alpha if isinstance(alpha, RiskParam) else float(alpha)
    R, C = _role_arrays(g, role)
    beliefs = kernels.levelk_beliefs(R, C, np.asarray([eta_other], dtype=float), np.asarray([a]))
    return Belief(float(beliefs[0, k]))


def _effective_params(spec: ModelSpec, params: ModelParams):
    """Resolve defaults and validate spec/params consistency."""
    if spec.structure is Structure.NASH:
        return None
    if params.eta_self is None:
        raise InvalidSpec(f"{spec.structure.value} needs eta_self")
    if params.level_weights is not None and spec.structure is not Structure.LEVEL_MIXTURE:
        raise InvalidSpec("level_weights only apply to the level-mixture structure")
    eta_s = float(params.eta_self)
    if spec.use_belief_noise:
        eta_o = float(params.eta_other if params.eta_other is not None else eta_s)
    else:
        eta_o = eta_s
    alpha = float(params.alpha) if spec.use_risk else 0.0
    weights = None
    if spec.structure is Structure.LEVEL_MIXTURE:
        if params.level_weights is None:
            raise InvalidSpec("level-mixture needs level_weights")
        weights = np.asarray(params.level_weights, dtype=float)
        if weights.shape != (4,) or abs(weights.sum() - 1.0) > 1e-9 or (weights < 0).any():
            raise InvalidSpec("level_weights must be 4 nonnegative values summing to 1")
    return eta_s, eta_o, alpha, weights


def predict_batch(spec: ModelSpec, params: ModelParams, R, C):
    """p(first action) for each game in the (N,4)/(N,4) payoff arrays."""
    R = np.asarray(R, dtype=float)
    C = np.asarray(C, dtype=float)
    n = R.shape[0]
    if spec.structure is Structure.NASH:
        return np.array(
            [predict_nash(GameMatrix(tuple(r), tuple(c)), "row") for r, c in zip(R, C)]
        )
    eta_s, eta_o, alpha, weights = _effective_params(spec, params)
    es = np.full(n, eta_s)
    eo = np.full(n, eta_o)
    al = np.full(n, alpha)
    if spec.structure is Structure.QRE:
        p, _, _ = kernels.qre_solve(R, C, es, eo, al, tol=1e-8)
        return p
    P = kernels.levelk_all(R, C, es, eo, al)
    if spec.structure is Structure.LEVEL_K:
        return P[:, spec.k].copy()
    return P @ weights


def predict(spec: ModelSpec, params: ModelParams, g: GameMatrix, role: str = "row") -> float:
    """p(first action of `role`) under the model."""
    if spec.structure is Structure.NASH:
        return predict_nash(g, role)
    R, C = _role_arrays(g, role)
    return float(predict_batch(spec, params, R, C)[0])


def predict_nash(g: GameMatrix, role: str = "row") -> float:
    """Uniform average over pure equilibria of the role's action indicator,
    falling back to the interior mixed equilibrium."""
    eqs = pure_nash(g)
    if eqs:
        if role == "row":
            return sum(1.0 for e in eqs if e.row_action == "A") / len(eqs)
        return sum(1.0 for e in eqs if e.col_action == "C") / len(eqs)
    mix = mixed_nash(g)
    if mix is None:
        raise NoEquilibrium(f"game {g.id!r} has no pure or interior mixed equilibrium")
    return mix.p_A if role == "row" else mix.q_C


def predict_qre(g: GameMatrix, params: ModelParams, tol: float = 1e-10, max_iter: int = 10000):
    """Logit QRE of the game: (p_A, q_C) satisfying both responses within tol.

    Under belief noise (eta_other set) this is the row player's subjective
    equilibrium: the opponent side responds with precision eta_other.
    """
    if params.eta_self is None:
        raise InvalidSpec("QRE needs eta_self")
    eta_s = float(params.eta_self)
    eta_o = float(params.eta_other if params.eta_other is not None else eta_s)
    R = np.asarray([g.row_payoffs], dtype=float)
    C = np.asarray([g.col_payoffs], dtype=float)
    p, q, _ = kernels.qre_solve(
        R, C, np.full(1, eta_s), np.full(1, eta_o), np.full(1, float(params.alpha)),
        tol=tol, max_iter=max_iter,
    )
    return float(p[0]), float(q[0])
