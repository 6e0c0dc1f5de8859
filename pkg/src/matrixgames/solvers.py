"""Exact equilibrium and dominance analysis for 2x2 games."""

from __future__ import annotations

from dataclasses import dataclass

from .games import COL_ACTIONS, ROW_ACTIONS, GameMatrix

CELLS = (("A", "C"), ("A", "D"), ("B", "C"), ("B", "D"))


@dataclass(frozen=True)
class PureEquilibrium:
    row_action: str
    col_action: str


@dataclass(frozen=True)
class MixedEquilibrium:
    """Interior mixed equilibrium: both players exactly indifferent."""

    p_A: float
    q_C: float


def best_response(g: GameMatrix, role: str, opp_action: str) -> set:
    """Own actions maximizing own payoff against a fixed opponent action; both if tied."""
    own_actions = ROW_ACTIONS if role == "row" else COL_ACTIONS
    if role == "row":
        payoffs = {act: g.payoff("row", act, opp_action) for act in own_actions}
    else:
        payoffs = {act: g.payoff("col", opp_action, act) for act in own_actions}
    best = max(payoffs.values())
    return {act for act, v in payoffs.items() if v == best}


def pure_nash(g: GameMatrix) -> list:
    """All cells where both actions are weak best responses, in cell order."""
    out = []
    for r_act, c_act in CELLS:
        if r_act in best_response(g, "row", c_act) and c_act in best_response(
            g, "col", r_act
        ):
            out.append(PureEquilibrium(r_act, c_act))
    return out


def mixed_nash_info(g: GameMatrix):
    """(interior mixed equilibrium or None, degenerate flag).

    Indifference conditions give q_C = (d-b)/((a-c)+(d-b)) and
    p_A = (w-z)/((x-y)+(w-z)); only strictly interior solutions count.
    The flag reports a zero denominator (a continuum or absence of solutions).
    """
    a, b, c, d = g.row_payoffs
    x, y, z, w = g.col_payoffs
    den_q = (a - c) + (d - b)
    den_p = (x - y) + (w - z)
    if den_q == 0 or den_p == 0:
        return None, True
    q_C = (d - b) / den_q
    p_A = (w - z) / den_p
    if 0 < p_A < 1 and 0 < q_C < 1:
        return MixedEquilibrium(p_A, q_C), False
    return None, False


def mixed_nash(g: GameMatrix):
    """Interior mixed equilibrium, or None (absent or degenerate)."""
    eq, _ = mixed_nash_info(g)
    return eq


def dominant_strategy(g: GameMatrix, role: str):
    """Weakly dominant action per the one-equality-allowed rule, else None.

    For the row player: A dominates iff a>=c and b>=d but not (a==c and b==d);
    symmetrically for B and for the column player's C/D.
    """
    if role == "row":
        a, b, c, d = g.row_payoffs
        first, second = ROW_ACTIONS
    else:
        x, y, z, w = g.col_payoffs
        a, b, c, d = x, z, y, w  # own-major: C beats D cellwise via (x vs y, z vs w)
        first, second = COL_ACTIONS
    if a >= c and b >= d and not (a == c and b == d):
        return first
    if a <= c and b <= d and not (a == c and b == d):
        return second
    return None


def dominance_category(g: GameMatrix) -> str:
    """'double', 'single', or 'non' by how many players have a dominant action."""
    n = (dominant_strategy(g, "row") is not None) + (
        dominant_strategy(g, "col") is not None
    )
    return {2: "double", 1: "single", 0: "non"}[n]


def _response_to_uniform(g: GameMatrix, role: str) -> str:
    """Best response to a uniformly mixing opponent; ties toward the first action."""
    if role == "row":
        a, b, c, d = g.row_payoffs
        return "A" if a + b >= c + d else "B"
    x, y, z, w = g.col_payoffs
    return "C" if x + z >= y + w else "D"


def _response_to_action(g: GameMatrix, role: str, opp_action: str) -> str:
    br = best_response(g, role, opp_action)
    first = "A" if role == "row" else "C"
    return first if first in br else br.pop()


def iterative_rationality_level(g: GameMatrix) -> int:
    """Steps until the best-response dynamic is fixed, capped at 3.

    Both players start by responding to a uniform opponent, then respond to the
    opponent's previous action simultaneously; ties break toward A/C. Returns the
    smallest k with step k+1 equal to step k for both players, or 3 for cycles.
    """
    state = (_response_to_uniform(g, "row"), _response_to_uniform(g, "col"))
    for k in (1, 2, 3):
        nxt = (
            _response_to_action(g, "row", state[1]),
            _response_to_action(g, "col", state[0]),
        )
        if nxt == state:
            return k
        state = nxt
    return 3
