"""Game generation, trial CSV ingestion, aggregation, synthetic participants.

Games are drawn from a two-tier uniform (a per-game scale u in [1, payoff_max],
then eight payoffs in [1, u]), filtered to tie-free PSNE-admitting games, and
accepted against per-topology-type quotas in canonical orientation. Trial files
carry displayed-coordinate choices plus the permutation that produced the
display, so aggregation can undo it.
"""

from __future__ import annotations

import csv
import io
import math
import statistics
from dataclasses import dataclass

import numpy as np

from .errors import ParseError, QuotaInfeasible, RangeError, UnknownGame
from .games import (
    GameMatrix,
    Permutation,
    apply_permutation,
    canonical_orientation,
    classify_detail,
    transpose_perspective,
)
from .solvers import dominance_category, pure_nash

ROLES = ("row", "col")
CHOICES = ("first", "second")

TRIAL_COLUMNS = (
    "participant_id",
    "game_id",
    "role",
    "swap_rows",
    "swap_cols",
    "choice",
    "rt_ms",
    "confidence",
)

RECORD_COLUMNS = ("game_id", "role", "n", "p_first", "rt_norm", "conf_norm")


@dataclass(frozen=True)
class TrialRecord:
    participant_id: str
    game_id: str
    role: str
    permutation: Permutation
    choice: str  # displayed coordinates
    rt_ms: int
    confidence: float | None = None


@dataclass(frozen=True)
class GameRecord:
    game: GameMatrix
    role: str
    n: int
    p_first: float
    rt_norm: float | None = None
    conf_norm: float | None = None


# ---------------------------------------------------------------------------
# generation


def _canonical_cells():
    """All (row_graph, col_graph) pairs whose canonical form admits a PSNE.

    Enumerates one representative per joint ordinal type via rank patterns
    1..4 over both players, keeps cells where the both-canonical orientation
    has a pure equilibrium, and returns {cell: dominance category}.
    """
    from itertools import permutations as iperm

    cells = {}
    for rq in iperm((1, 2, 3, 4)):
        for cq in iperm((1, 2, 3, 4)):
            # rq are row payoffs (a,b,c,d); cq own-major (x,z,y,w)
            x, z, y, w = cq
            g = GameMatrix(rq, (x, y, z, w))
            gc, _ = canonical_orientation(g)
            if not pure_nash(gc):
                continue
            rg, _, cg, _ = classify_detail(gc)
            key = (rg, cg)
            if key not in cells:
                cells[key] = dominance_category(gc)
    return cells


def quota_table(quotas=(3, 8, 22), base_total=1208):
    """Per-canonical-cell target counts.

    quotas = (double, single, non) games per cell of each dominance category.
    The base quota leaves a remainder against base_total, which is spread over
    the single-dominance cells round-robin in sorted order (they are the most
    abundant category, so the top-up stays feasible).
    """
    if any(q <= 0 for q in quotas):
        raise ValueError("quotas must be positive")
    cells = _canonical_cells()
    by_cat = {"double": quotas[0], "single": quotas[1], "non": quotas[2]}
    table = {cell: by_cat[cat] for cell, cat in cells.items()}
    base = sum(table.values())
    extra = base_total - base
    if extra < 0:
        raise QuotaInfeasible(
            f"base_total {base_total} below the quota floor {base}"
        )
    singles = sorted(
        [c for c, cat in cells.items() if cat == "single"],
        key=lambda c: (c[0].name, c[1].name),
    )
    i = 0
    while extra > 0:
        table[singles[i % len(singles)]] += 1
        i += 1
        extra -= 1
    return table


def _distinct4(arr):
    s = np.sort(arr, axis=1)
    return np.all(s[:, 1:] > s[:, :-1], axis=1)


def _has_psne(R, C):
    # weak best-response marks per cell, vectorized over games
    a, b, c, d = R.T
    x, y, z, w = C.T
    rbr = np.stack([a >= c, b >= d, c >= a, d >= b], axis=1)
    cbr = np.stack([x >= y, z >= w, y >= x, w >= z], axis=1)
    # cells (A,C),(A,D),(B,C),(B,D): col best-response marks are per row-action
    cbr = cbr[:, [0, 2, 1, 3]]
    return np.any(rbr & cbr, axis=1)


def generate_games(
    seed,
    quotas=(3, 8, 22),
    payoff_max=50,
    base_total=1208,
    batch_size=8192,
    max_draws=50_000_000,
):
    """Procedural 2x2 game corpus: base games plus transposed twins.

    Draws u ~ U[1, payoff_max] per candidate and eight payoffs ~ U[1, u],
    rejects ties within either player's own payoffs and games without a pure
    equilibrium, canonicalizes the orientation, deduplicates, and accepts
    until every topology cell reaches its quota. Returns 2 * base_total games;
    ids are "gNNNN" and "gNNNNT" for the transposed twin.
    """
    table = quota_table(quotas, base_total)
    rng = np.random.default_rng(seed)
    accepted = {cell: [] for cell in table}
    seen = set()
    need = sum(table.values())
    have = 0
    drawn = 0
    while have < need:
        if drawn >= max_draws:
            short = {
                f"{c[0].name}/{c[1].name}": table[c] - len(accepted[c])
                for c in table
                if len(accepted[c]) < table[c]
            }
            raise QuotaInfeasible(
                f"draw budget {max_draws} exhausted with unfilled cells {short}"
            )
        u = rng.integers(1, payoff_max + 1, size=batch_size)
        P = rng.integers(1, u[:, None] + 1, size=(batch_size, 8))
        drawn += batch_size
        R, C = P[:, :4], P[:, 4:]
        ok = _distinct4(R) & _distinct4(C) & _has_psne(R, C)
        for row in P[ok]:
            g = GameMatrix(tuple(int(v) for v in row[:4]), tuple(int(v) for v in row[4:]))
            gc, _ = canonical_orientation(g)
            key = gc.row_payoffs + gc.col_payoffs
            if key in seen:
                continue
            rg, _, cg, _ = classify_detail(gc)
            cell = (rg, cg)
            bucket = accepted[cell]
            if len(bucket) >= table[cell]:
                continue
            seen.add(key)
            bucket.append(gc)
            have += 1
            if have == need:
                break
    out = []
    idx = 1
    for cell in sorted(table, key=lambda c: (c[0].name, c[1].name)):
        for g in accepted[cell]:
            base = GameMatrix(g.row_payoffs, g.col_payoffs, id=f"g{idx:04d}")
            twin = transpose_perspective(base)
            out.append(base)
            out.append(GameMatrix(twin.row_payoffs, twin.col_payoffs, id=f"g{idx:04d}T"))
            idx += 1
    return out


def generation_split(quotas=(3, 8, 22), base_total=1208):
    """Report how base_total decomposes over dominance categories."""
    table = quota_table(quotas, base_total)
    cells = _canonical_cells()
    split = {"double": 0, "single": 0, "non": 0}
    kinds = {"double": 0, "single": 0, "non": 0}
    for cell, cat in cells.items():
        split[cat] += table[cell]
        kinds[cat] += 1
    return {"games": split, "types": kinds, "total": sum(split.values())}


# ---------------------------------------------------------------------------
# trial files


def _parse_bool(text, line_no, column):
    t = text.strip().lower()
    if t in ("0", "false"):
        return False
    if t in ("1", "true"):
        return True
    raise ParseError(f"bad boolean {text!r} in column {column}", line=line_no)


def parse_trials(source):
    """Read TrialRecords from a CSV path, file object, or string.

    Lines starting with '#' are provenance comments and are skipped. The
    header must declare all trial columns; confidence may be empty.
    """
    if hasattr(source, "read"):
        return _parse_trials_stream(source)
    text = str(source)
    if "\n" in text or "," in text:
        return _parse_trials_stream(io.StringIO(text))
    with open(text, "r", encoding="utf-8", newline="") as fh:
        return _parse_trials_stream(fh)


def _parse_trials_stream(fh):
    records = []
    header = None
    reader = csv.reader(fh)
    line_no = 0
    for row in reader:
        line_no = reader.line_num
        if not row or (row[0].lstrip().startswith("#")):
            continue
        if header is None:
            header = [h.strip() for h in row]
            missing = [c for c in TRIAL_COLUMNS if c not in header]
            if missing:
                raise ParseError(f"header missing columns {missing}", line=line_no)
            col = {name: header.index(name) for name in TRIAL_COLUMNS}
            continue
        if len(row) != len(header):
            raise ParseError(
                f"expected {len(header)} fields, got {len(row)}", line=line_no
            )
        try:
            rt_ms = int(row[col["rt_ms"]])
        except ValueError:
            raise ParseError(f"bad rt_ms {row[col['rt_ms']]!r}", line=line_no) from None
        if rt_ms <= 0:
            raise RangeError(f"rt_ms must be positive, got {rt_ms} (line {line_no})")
        role = row[col["role"]].strip()
        if role not in ROLES:
            raise ParseError(f"bad role {role!r}", line=line_no)
        choice = row[col["choice"]].strip()
        if choice not in CHOICES:
            raise ParseError(f"bad choice {choice!r}", line=line_no)
        conf_text = row[col["confidence"]].strip()
        confidence = None
        if conf_text:
            try:
                confidence = float(conf_text)
            except ValueError:
                raise ParseError(f"bad confidence {conf_text!r}", line=line_no) from None
            if not (0.0 <= confidence <= 1.0):
                raise RangeError(
                    f"confidence must lie in [0, 1], got {confidence} (line {line_no})"
                )
        records.append(
            TrialRecord(
                participant_id=row[col["participant_id"]].strip(),
                game_id=row[col["game_id"]].strip(),
                role=role,
                permutation=Permutation(
                    _parse_bool(row[col["swap_rows"]], line_no, "swap_rows"),
                    _parse_bool(row[col["swap_cols"]], line_no, "swap_cols"),
                ),
                choice=choice,
                rt_ms=rt_ms,
                confidence=confidence,
            )
        )
    return records


def write_trials(path, trials, header_lines=()):
    with open(path, "w", encoding="utf-8", newline="") as fh:
        for line in header_lines:
            fh.write(f"# {line}\n")
        writer = csv.writer(fh)
        writer.writerow(TRIAL_COLUMNS)
        for t in trials:
            writer.writerow(
                [
                    t.participant_id,
                    t.game_id,
                    t.role,
                    int(t.permutation.swap_rows),
                    int(t.permutation.swap_cols),
                    t.choice,
                    t.rt_ms,
                    "" if t.confidence is None else repr(t.confidence),
                ]
            )


# ---------------------------------------------------------------------------
# aggregation


def canonical_first(trial: TrialRecord) -> bool:
    """Whether the displayed choice maps to the first canonical action.

    Swapping a player's own actions flips the mapping: rows for the row
    player, columns for the column player.
    """
    own_swapped = (
        trial.permutation.swap_rows if trial.role == "row" else trial.permutation.swap_cols
    )
    return (trial.choice == "first") != own_swapped


def aggregate_trials(trials, games):
    """Collapse trials to per-(game, role) records in canonical coordinates.

    games: iterable of GameMatrix (ids must cover every trial) or an id->game
    mapping. rt_norm is the per-game median of within-participant z-scored
    ln(rt_ms); conf_norm the mean of within-participant z-scored confidence.
    Participants with constant (or single) values z-score via sd fallback 1.
    """
    if isinstance(games, dict):
        by_id = games
    else:
        by_id = {g.id: g for g in games}
    # within-participant normalization first
    per_part_rt = {}
    per_part_conf = {}
    for t in trials:
        per_part_rt.setdefault(t.participant_id, []).append(math.log(t.rt_ms))
        if t.confidence is not None:
            per_part_conf.setdefault(t.participant_id, []).append(t.confidence)
    rt_stats = {p: _stats_or_fallback(v) for p, v in per_part_rt.items()}
    conf_stats = {p: _stats_or_fallback(v) for p, v in per_part_conf.items()}

    groups = {}
    for t in trials:
        if t.game_id not in by_id:
            raise UnknownGame(f"trial references unknown game {t.game_id!r}")
        key = (t.game_id, t.role)
        g = groups.setdefault(key, {"first": 0, "n": 0, "z_rt": [], "z_conf": []})
        g["n"] += 1
        g["first"] += canonical_first(t)
        mu, sd = rt_stats[t.participant_id]
        g["z_rt"].append((math.log(t.rt_ms) - mu) / sd)
        if t.confidence is not None:
            mu_c, sd_c = conf_stats[t.participant_id]
            g["z_conf"].append((t.confidence - mu_c) / sd_c)

    records = []
    for (game_id, role) in sorted(groups):
        g = groups[(game_id, role)]
        records.append(
            GameRecord(
                game=by_id[game_id],
                role=role,
                n=g["n"],
                p_first=g["first"] / g["n"],
                rt_norm=statistics.median(g["z_rt"]),
                conf_norm=(sum(g["z_conf"]) / len(g["z_conf"])) if g["z_conf"] else None,
            )
        )
    return records


def _stats_or_fallback(values):
    mu = sum(values) / len(values)
    sd = statistics.pstdev(values) if len(values) > 1 else 0.0
    return mu, (sd if sd > 0 else 1.0)


def write_records(path, records, header_lines=()):
    with open(path, "w", encoding="utf-8", newline="") as fh:
        for line in header_lines:
            fh.write(f"# {line}\n")
        writer = csv.writer(fh)
        writer.writerow(RECORD_COLUMNS)
        for r in records:
            writer.writerow(
                [
                    r.game.id,
                    r.role,
                    r.n,
                    repr(r.p_first),
                    "" if r.rt_norm is None else repr(r.rt_norm),
                    "" if r.conf_norm is None else repr(r.conf_norm),
                ]
            )


def read_records(source, games):
    """Inverse of write_records; games resolve ids to matrices."""
    if isinstance(games, dict):
        by_id = games
    else:
        by_id = {g.id: g for g in games}
    if hasattr(source, "read"):
        fh = source
        close = False
    else:
        fh = open(source, "r", encoding="utf-8", newline="")
        close = True
    try:
        records = []
        header = None
        reader = csv.reader(fh)
        for row in reader:
            if not row or row[0].lstrip().startswith("#"):
                continue
            if header is None:
                header = [h.strip() for h in row]
                missing = [c for c in RECORD_COLUMNS if c not in header]
                if missing:
                    raise ParseError(f"header missing columns {missing}", line=reader.line_num)
                col = {name: header.index(name) for name in RECORD_COLUMNS}
                continue
            game_id = row[col["game_id"]].strip()
            if game_id not in by_id:
                raise UnknownGame(f"record references unknown game {game_id!r}")
            rt_text = row[col["rt_norm"]].strip()
            conf_text = row[col["conf_norm"]].strip()
            records.append(
                GameRecord(
                    game=by_id[game_id],
                    role=row[col["role"]].strip(),
                    n=int(row[col["n"]]),
                    p_first=float(row[col["p_first"]]),
                    rt_norm=float(rt_text) if rt_text else None,
                    conf_norm=float(conf_text) if conf_text else None,
                )
            )
        return records
    finally:
        if close:
            fh.close()


# ---------------------------------------------------------------------------
# simulation


def _model_probabilities(games, spec, params, predictor):
    if predictor is not None:
        return np.asarray(predictor(games), dtype=float)
    from .behavioral import predict_batch

    R = np.array([g.row_payoffs for g in games], dtype=float)
    C = np.array([g.col_payoffs for g in games], dtype=float)
    return predict_batch(spec, params, R, C)


def simulate_choices(
    games,
    spec,
    params,
    participants_per_game=50,
    seed=0,
    predictor=None,
    games_per_participant=20,
    rt_scores=None,
    rt_loading=0.0,
    rt_game_noise=1.0,
    rt_trial_noise=0.3,
    rt_participant_sd=0.2,
    rt_base=8.0,
    with_confidence=False,
    conf_loading=0.0,
    conf_game_noise=0.3,
):
    """Synthetic trial stream from a choice model, with loaded response times.

    Each pass over the corpus shuffles the games into sessions of
    games_per_participant for fresh participants, so every game collects
    participants_per_game trials (row role; transposed twins cover the column
    side). Displayed order is random per trial: each axis swaps with
    probability 1/2.

    Response times are log-normal: ln rt = rt_base + rt_loading * z(score) +
    rt_game_noise * zeta_g + participant offset + rt_trial_noise * eps, with
    zeta_g a per-game disturbance and rt_scores a game_id -> score mapping
    (z-scored internally). The induced game-level correlation between score
    and normalized RT approaches rt_loading / sqrt(rt_loading^2 +
    rt_game_noise^2 + rt_trial_noise^2 / trials_per_game-ish); with many
    participants the trial-noise term shrinks toward the median's jitter.

    Confidence follows the same shape on a [0, 1] clipped scale:
    0.7 + conf_loading * z(score) + conf_game_noise * zeta'_g + participant
    offset + trial noise. Positive loadings raise both measures on high-score
    games; pass a negative conf_loading for the usual confidence drop.
    """
    rng = np.random.default_rng(seed)
    games = list(games)
    p = _model_probabilities(games, spec, params, predictor)
    if rt_scores is not None:
        s = np.array([rt_scores[g.id] for g in games], dtype=float)
        sd = s.std()
        z_score = (s - s.mean()) / (sd if sd > 0 else 1.0)
    else:
        z_score = np.zeros(len(games))
    zeta = rng.normal(0.0, 1.0, size=len(games))
    ln_rt_game = rt_base + rt_loading * z_score + rt_game_noise * zeta
    conf_game = 0.7 + conf_loading * z_score + conf_game_noise * rng.normal(
        0.0, 1.0, size=len(games)
    )

    trials = []
    participant_counter = 0
    for _ in range(participants_per_game):
        order = rng.permutation(len(games))
        for start in range(0, len(order), games_per_participant):
            block = order[start : start + games_per_participant]
            participant_counter += 1
            pid = f"p{participant_counter:05d}"
            offset = rng.normal(0.0, rt_participant_sd)
            conf_offset = rng.normal(0.0, 0.3)
            for gi in block:
                swap_rows = bool(rng.integers(2))
                swap_cols = bool(rng.integers(2))
                chose_first_canonical = rng.random() < p[gi]
                displayed_first = chose_first_canonical != swap_rows
                ln_rt = (
                    ln_rt_game[gi]
                    + offset
                    + rt_trial_noise * rng.normal()
                )
                rt_ms = max(1, int(round(math.exp(ln_rt))))
                confidence = None
                if with_confidence:
                    raw = conf_game[gi] + conf_offset + 0.15 * rng.normal()
                    confidence = float(min(1.0, max(0.0, raw)))
                trials.append(
                    TrialRecord(
                        participant_id=pid,
                        game_id=games[gi].id,
                        role="row",
                        permutation=Permutation(swap_rows, swap_cols),
                        choice="first" if displayed_first else "second",
                        rt_ms=rt_ms,
                        confidence=confidence,
                    )
                )
    return trials


def simulate_records(games, spec, params, n, seed=0, predictor=None):
    """Game-level shortcut: binomial empirical frequencies, no trial stream."""
    rng = np.random.default_rng(seed)
    games = list(games)
    p = _model_probabilities(games, spec, params, predictor)
    counts = rng.binomial(n, p)
    return [
        GameRecord(game=g, role="row", n=n, p_first=counts[i] / n)
        for i, g in enumerate(games)
    ]
