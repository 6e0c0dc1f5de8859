"""2x2 game representation, permutation symmetries, and ordinal topology.

A game is stored from the row player's perspective: ``row_payoffs = (a, b, c, d)``
are the row player's payoffs at cells (A,C), (A,D), (B,C), (B,D) and
``col_payoffs = (x, y, z, w)`` are the column player's payoffs at the same cells.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, replace
from enum import Enum

from .errors import ParseError, RangeError, TiesNotClassifiable

ROW_ACTIONS = ("A", "B")
COL_ACTIONS = ("C", "D")


@dataclass(frozen=True)
class GameMatrix:
    """Payoffs of both players in a 2x2 game (row player's perspective)."""

    row_payoffs: tuple
    col_payoffs: tuple
    id: str = ""

    def __post_init__(self):
        if len(self.row_payoffs) != 4 or len(self.col_payoffs) != 4:
            raise ValueError("each player needs exactly 4 payoffs")
        object.__setattr__(self, "row_payoffs", tuple(self.row_payoffs))
        object.__setattr__(self, "col_payoffs", tuple(self.col_payoffs))

    def payoff(self, role: str, row_action: str, col_action: str):
        """Payoff of ``role`` at the cell (row_action, col_action)."""
        i = 2 * ROW_ACTIONS.index(row_action) + COL_ACTIONS.index(col_action)
        return self.row_payoffs[i] if role == "row" else self.col_payoffs[i]


def validate_game(g: GameMatrix, payoff_max: int = 50) -> None:
    """Check the generated-game invariant: integer payoffs in [1, payoff_max].

    Derived games (scaled or translated payoffs) bypass this deliberately;
    it guards file IO and generation, not in-memory arithmetic.
    """
    for v in g.row_payoffs + g.col_payoffs:
        if v != int(v) or not (1 <= v <= payoff_max):
            raise RangeError(f"payoff {v!r} outside [1, {payoff_max}] in game {g.id!r}")


@dataclass(frozen=True)
class Permutation:
    """Row/column relabeling of a game; the four values form a Klein four-group."""

    swap_rows: bool = False
    swap_cols: bool = False

    def compose(self, other: "Permutation") -> "Permutation":
        return Permutation(
            self.swap_rows ^ other.swap_rows, self.swap_cols ^ other.swap_cols
        )


IDENTITY = Permutation(False, False)
ALL_PERMUTATIONS = (
    Permutation(False, False),
    Permutation(True, False),
    Permutation(False, True),
    Permutation(True, True),
)


def apply_permutation(g: GameMatrix, p: Permutation) -> GameMatrix:
    """Relabel rows and/or columns. Applying the same permutation twice is the identity."""
    a, b, c, d = g.row_payoffs
    x, y, z, w = g.col_payoffs
    if p.swap_rows:
        a, b, c, d = c, d, a, b
        x, y, z, w = z, w, x, y
    if p.swap_cols:
        a, b, c, d = b, a, d, c
        x, y, z, w = y, x, w, z
    return replace(g, row_payoffs=(a, b, c, d), col_payoffs=(x, y, z, w))


def transpose_perspective(g: GameMatrix) -> GameMatrix:
    """The same game as seen by the original column player acting as row player."""
    a, b, c, d = g.row_payoffs
    x, y, z, w = g.col_payoffs
    return replace(g, row_payoffs=(x, z, y, w), col_payoffs=(a, c, b, d))


class OrderGraph(Enum):
    """The 12 ordinal classes of one player's four payoffs.

    Each value is the defining strict ordering, best payoff first, over the
    own-major quadruple (a,b,c,d): own choice varies across the first pair.
    """

    CHICKEN = "cabd"
    LEADER = "cbad"
    HERO = "cbda"
    COMPROMISE = "cdba"
    DEADLOCK = "cdab"
    PRISONERS_DILEMMA = "cadb"
    STAG_HUNT = "acdb"
    ASSURANCE = "adcb"
    SAFE_COORDINATION = "adbc"
    PEACE = "abdc"
    HARMONY = "abcd"
    CONCORD = "acbd"

    @property
    def ordering(self) -> str:
        return self.value


@dataclass(frozen=True)
class Topology:
    """Joint ordinal class of a game: one order graph per player (144 combinations)."""

    row_graph: OrderGraph
    col_graph: OrderGraph


def _rank_pattern(quad) -> tuple:
    """Rank of each position, 0 = largest. Raises on ties."""
    if len(set(quad)) != 4:
        raise TiesNotClassifiable(f"tied payoffs {quad} have no strict ordering")
    order = sorted(range(4), key=lambda i: -quad[i])
    ranks = [0] * 4
    for r, i in enumerate(order):
        ranks[i] = r
    return tuple(ranks)


def _build_pattern_table():
    """pattern -> (OrderGraph, canonical_orientation).

    Each class has two orientations: the listed ordering and its image under
    swapping the opponent's two actions (positions (a,b)<->? no: for the
    own-major quadruple this exchanges the second-pair context, i.e. maps
    (a,b,c,d) -> (b,a,d,c)).
    """
    table = {}
    for graph in OrderGraph:
        vals = {}
        for rank, pos in enumerate(graph.ordering):
            vals[pos] = 4 - rank
        quad = tuple(vals[p] for p in "abcd")
        flipped = (quad[1], quad[0], quad[3], quad[2])
        table[_rank_pattern(quad)] = (graph, True)
        table[_rank_pattern(flipped)] = (graph, False)
    assert len(table) == 24
    return table


_PATTERNS = _build_pattern_table()


def _col_major_quad(g: GameMatrix) -> tuple:
    """Column player's payoffs arranged own-major: (x, z, y, w)."""
    x, y, z, w = g.col_payoffs
    return (x, z, y, w)


def classify_detail(g: GameMatrix):
    """(row_graph, row_canonical, col_graph, col_canonical) for a tie-free game."""
    row_graph, row_canon = _PATTERNS[_rank_pattern(g.row_payoffs)]
    col_graph, col_canon = _PATTERNS[_rank_pattern(_col_major_quad(g))]
    return row_graph, row_canon, col_graph, col_canon


def classify_topology(g: GameMatrix) -> Topology:
    """Ordinal class of each player's payoffs.

    The row graph is invariant under column swaps and the column graph under
    row swaps; the opposite swap moves a player to the partner class.
    """
    row_graph, _, col_graph, _ = classify_detail(g)
    return Topology(row_graph, col_graph)


def canonical_orientation(g: GameMatrix):
    """Permutation-equivalent game whose both order graphs are in listed orientation.

    Returns (game, permutation applied). A column swap toggles the row player's
    orientation and a row swap the column player's.
    """
    _, row_canon, _, col_canon = classify_detail(g)
    p = Permutation(swap_rows=not col_canon, swap_cols=not row_canon)
    return apply_permutation(g, p), p


def game_to_dict(g: GameMatrix) -> dict:
    return {"id": g.id, "row": list(g.row_payoffs), "col": list(g.col_payoffs)}


def game_from_dict(d: dict) -> GameMatrix:
    try:
        g = GameMatrix(tuple(d["row"]), tuple(d["col"]), str(d["id"]))
    except (KeyError, TypeError, ValueError) as exc:
        raise ParseError(f"bad game entry {d!r}: {exc}")
    return g


def games_to_json(games, meta: dict | None = None) -> str:
    doc = {"meta": meta or {}, "games": [game_to_dict(g) for g in games]}
    return json.dumps(doc, indent=None, separators=(",", ":"))


def games_from_json(text: str):
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ParseError(f"invalid games JSON: {exc}", line=exc.lineno)
    if isinstance(doc, list):  # bare array form
        entries, meta = doc, {}
    else:
        entries, meta = doc.get("games", []), doc.get("meta", {})
    games = [game_from_dict(d) for d in entries]
    for g in games:
        validate_game(g, payoff_max=meta.get("payoff_max", 50))
    return games, meta
