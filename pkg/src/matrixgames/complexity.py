"""Structural game features, sparse index fitting, trees, and correlations.

Features are cardinal functions of the payoff matrix (plus two solver-derived
counts). The complexity index is a LASSO fit over normalized features whose
target is the negated game-specific precision from a context-dependent model:
higher index means noisier play is expected.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field, fields

import numpy as np
from scipy import stats as _sstats

from .errors import NoConvergence, ZeroVariance
from .games import GameMatrix
from .solvers import (
    dominant_strategy,
    iterative_rationality_level,
    mixed_nash_info,
    pure_nash,
)

CELL_ACTIONS = (("A", "C"), ("A", "D"), ("B", "C"), ("B", "D"))


@dataclass(frozen=True)
class FeatureVector:
    DominantSolvable_self: int
    DominantSolvable_other: int
    Dissimilarity_self: float
    Dissimilarity_other: float
    LevelIterRational: int
    NumPSNE: int
    NumMSNE: int
    PayoffDomEquilibrium: int
    PayoffDomNonEquilibrium: int
    ParetoDomEquilibrium: int
    PureMotives: int
    Max_self: float
    Max_other: float
    PayoffVar_self: float
    PayoffVar_other: float
    NonZeroSum: float
    Inequality: float
    Asymmetry: float

    def as_array(self):
        return np.array([getattr(self, n) for n in FEATURE_NAMES], dtype=float)


FEATURE_NAMES = tuple(f.name for f in fields(FeatureVector))


def _spearman_pure(row, col):
    """1 if the two payoff vectors agree in rank perfectly or perfectly inversely."""
    if len(set(row)) == 1 or len(set(col)) == 1:
        return 0
    rho = _sstats.spearmanr(row, col).statistic
    if not np.isfinite(rho):
        return 0
    return int(abs(rho) > 1.0 - 1e-12)


def compute_features(g: GameMatrix) -> FeatureVector:
    a, b, c, d = (float(v) for v in g.row_payoffs)
    x, y, z, w = (float(v) for v in g.col_payoffs)
    mu_up, mu_down = (a + b) / 2.0, (c + d) / 2.0
    mu_left, mu_right = (x + z) / 2.0, (y + w) / 2.0

    psne = pure_nash(g)
    psne_cells = {(e.row_action, e.col_action) for e in psne}
    row_of = {("A", "C"): a, ("A", "D"): b, ("B", "C"): c, ("B", "D"): d}
    col_of = {("A", "C"): x, ("A", "D"): y, ("B", "C"): z, ("B", "D"): w}
    max_self = max(a, b, c, d)
    max_other = max(x, y, z, w)
    both_max = {
        cell
        for cell in CELL_ACTIONS
        if row_of[cell] == max_self and col_of[cell] == max_other
    }

    pareto_dom = 0
    for e in psne_cells:
        dominating = True
        for o in psne_cells:
            if o == e:
                continue
            ge = row_of[e] >= row_of[o] and col_of[e] >= col_of[o]
            gt = row_of[e] > row_of[o] or col_of[e] > col_of[o]
            if not (ge and gt):
                dominating = False
                break
        if dominating and psne_cells:
            pareto_dom = 1
            break

    return FeatureVector(
        DominantSolvable_self=int(dominant_strategy(g, "row") is not None),
        DominantSolvable_other=int(dominant_strategy(g, "col") is not None),
        Dissimilarity_self=abs(a - c) / 2.0 + abs(b - d) / 2.0 - abs(mu_up - mu_down),
        Dissimilarity_other=abs(x - y) / 2.0 + abs(z - w) / 2.0 - abs(mu_left - mu_right),
        LevelIterRational=iterative_rationality_level(g),
        NumPSNE=len(psne),
        NumMSNE=int(mixed_nash_info(g)[0] is not None),
        PayoffDomEquilibrium=int(bool(both_max & psne_cells)),
        PayoffDomNonEquilibrium=int(bool(both_max - psne_cells)),
        ParetoDomEquilibrium=pareto_dom,
        PureMotives=_spearman_pure([a, b, c, d], [x, y, z, w]),
        Max_self=max_self,
        Max_other=max_other,
        PayoffVar_self=((a - mu_up) ** 2 + (b - mu_up) ** 2 + (c - mu_down) ** 2 + (d - mu_down) ** 2) / 4.0,
        PayoffVar_other=((x - mu_left) ** 2 + (z - mu_left) ** 2 + (y - mu_right) ** 2 + (w - mu_right) ** 2) / 4.0,
        NonZeroSum=abs(a - c + x - z) + abs(a - b + x - y) + abs(c - d + z - w) + abs(b - d + y - w),
        Inequality=max_self - max_other,
        Asymmetry=(abs(a - x) + abs(b - z) + abs(c - y) + abs(d - w)) / 4.0,
    )


def features_matrix(games) -> np.ndarray:
    return np.array([compute_features(g).as_array() for g in games])


@dataclass(frozen=True)
class FeatureStats:
    mean: np.ndarray
    sd: np.ndarray


def normalize_features(X, stats: FeatureStats | None = None):
    """Column z-scores with population sd; constant columns map to zero.

    Returns (Z, stats). Pass previously computed stats to reuse a frozen
    normalization (training-time stats applied to new games).
    """
    X = np.asarray(X, dtype=float)
    if stats is None:
        if X.shape[0] < 2:
            raise ValueError("need at least two games to normalize")
        mean = X.mean(axis=0)
        sd = X.std(axis=0)
        sd = np.where(sd > 0, sd, 1.0)
        stats = FeatureStats(mean, sd)
    return (X - stats.mean) / stats.sd, stats


# ---------------------------------------------------------------------------
# LASSO by cyclic coordinate descent


@dataclass(frozen=True)
class LassoResult:
    coef: np.ndarray
    intercept: float
    r2: float
    sweeps: int
    kkt_violation: float


def _soft_threshold(v, t):
    return math.copysign(max(abs(v) - t, 0.0), v)


def lasso_fit(Z, y, lam=0.2, tol=1e-9, max_sweeps=100_000) -> LassoResult:
    """Minimize (1/2n)‖y − b0 − Zβ‖² + λ‖β‖₁, intercept unpenalized.

    Cyclic coordinate descent with running residuals; converged when no
    coefficient (or the intercept) moves more than tol in a full sweep.
    """
    Z = np.asarray(Z, dtype=float)
    y = np.asarray(y, dtype=float)
    n, p = Z.shape
    col_ss = (Z * Z).sum(axis=0) / n
    beta = np.zeros(p)
    b0 = float(y.mean())
    r = y - b0  # residual y - b0 - Z beta
    sweeps = 0
    while sweeps < max_sweeps:
        sweeps += 1
        delta = 0.0
        for j in range(p):
            if col_ss[j] == 0.0:
                continue
            old = beta[j]
            rho = (Z[:, j] @ r) / n + col_ss[j] * old
            new = _soft_threshold(rho, lam) / col_ss[j]
            if new != old:
                r -= (new - old) * Z[:, j]
                beta[j] = new
                delta = max(delta, abs(new - old))
        new_b0 = b0 + r.mean()
        if new_b0 != b0:
            r -= new_b0 - b0
            delta = max(delta, abs(new_b0 - b0))
            b0 = new_b0
        if delta < tol:
            break
    else:
        raise NoConvergence(f"coordinate descent still moving after {max_sweeps} sweeps")
    resid = y - b0 - Z @ beta
    ss_tot = float(np.sum((y - y.mean()) ** 2))
    r2 = 1.0 - float(resid @ resid) / ss_tot if ss_tot > 0 else 1.0
    return LassoResult(beta, b0, r2, sweeps, kkt_violation(Z, y, beta, b0, lam))


def kkt_violation(Z, y, coef, intercept, lam) -> float:
    """Worst violation of the subgradient optimality conditions.

    For zero coefficients |Zⱼᵀr|/n must not exceed λ; for active ones it must
    equal λ·sign(βⱼ). Ignores identically-zero columns.
    """
    Z = np.asarray(Z, dtype=float)
    n = Z.shape[0]
    r = np.asarray(y, float) - intercept - Z @ coef
    grad = Z.T @ r / n
    live = (Z * Z).sum(axis=0) > 0
    worst = abs(float(r.mean()))  # intercept stationarity
    for j in range(Z.shape[1]):
        if not live[j]:
            continue
        if coef[j] == 0.0:
            worst = max(worst, abs(grad[j]) - lam)
        else:
            worst = max(worst, abs(grad[j] - lam * math.copysign(1.0, coef[j])))
    return worst


# ---------------------------------------------------------------------------
# depth-limited regression tree


@dataclass
class TreeNode:
    value: float
    n: int
    sse: float
    feature: int | None = None
    threshold: float | None = None
    left: "TreeNode | None" = None
    right: "TreeNode | None" = None

    @property
    def is_leaf(self):
        return self.feature is None


def _sse(y):
    if len(y) == 0:
        return 0.0
    m = y.mean()
    return float(((y - m) ** 2).sum())


def _best_split(X, y, min_leaf):
    n, p = X.shape
    best = None  # (sse_total, feature, threshold)
    for j in range(p):
        order = np.argsort(X[:, j], kind="stable")
        xs = X[order, j]
        ys = y[order]
        csum = np.cumsum(ys)
        csq = np.cumsum(ys * ys)
        total_sum, total_sq = csum[-1], csq[-1]
        for i in range(min_leaf - 1, n - min_leaf):
            if xs[i] == xs[i + 1]:
                continue
            nl = i + 1
            sl, ql = csum[i], csq[i]
            nr = n - nl
            sr, qr = total_sum - sl, total_sq - ql
            sse = (ql - sl * sl / nl) + (qr - sr * sr / nr)
            if best is None or sse < best[0] - 1e-12:
                best = (sse, j, (xs[i] + xs[i + 1]) / 2.0)
    return best


def decision_tree_fit(X, y, max_depth=3, min_leaf=5) -> TreeNode:
    """CART regression: variance-reduction splits, midpoint thresholds.

    Splits only when both children hold at least min_leaf rows and the split
    strictly reduces the node's squared error; ties go to the lowest feature
    index, then the lowest threshold.
    """
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=float)

    def grow(idx, depth):
        node = TreeNode(value=float(y[idx].mean()), n=len(idx), sse=_sse(y[idx]))
        if depth >= max_depth or len(idx) < 2 * min_leaf or node.sse <= 1e-15:
            return node
        found = _best_split(X[idx], y[idx], min_leaf)
        if found is None or found[0] >= node.sse - 1e-12:
            return node
        _, j, t = found
        node.feature = j
        node.threshold = t
        mask = X[idx, j] <= t
        node.left = grow(idx[mask], depth + 1)
        node.right = grow(idx[~mask], depth + 1)
        return node

    return grow(np.arange(len(y)), 0)


def predict_tree(node: TreeNode, X) -> np.ndarray:
    X = np.asarray(X, dtype=float)
    out = np.empty(len(X))
    for i, row in enumerate(X):
        cur = node
        while not cur.is_leaf:
            cur = cur.left if row[cur.feature] <= cur.threshold else cur.right
        out[i] = cur.value
    return out


def tree_depth(node: TreeNode) -> int:
    if node.is_leaf:
        return 0
    return 1 + max(tree_depth(node.left), tree_depth(node.right))


def tree_report(node: TreeNode, feature_names=FEATURE_NAMES) -> dict:
    """Root and second-layer split features for quick comparisons."""
    def name(n):
        return None if n.is_leaf else feature_names[n.feature]

    report = {"root": name(node), "root_threshold": None if node.is_leaf else node.threshold}
    second = []
    if not node.is_leaf:
        for child in (node.left, node.right):
            if not child.is_leaf:
                second.append({"feature": name(child), "threshold": child.threshold})
    report["second_layer"] = second
    return report


def describe_tree(node: TreeNode, feature_names=FEATURE_NAMES) -> str:
    lines = []

    def walk(n, indent, prefix):
        pad = "  " * indent
        if n.is_leaf:
            lines.append(f"{pad}{prefix}value={n.value:.4f} (n={n.n})")
            return
        lines.append(f"{pad}{prefix}{feature_names[n.feature]} <= {n.threshold:g} (n={n.n})")
        walk(n.left, indent + 1, "yes: ")
        walk(n.right, indent + 1, "no:  ")

    walk(node, 0, "")
    return "\n".join(lines)


# ---------------------------------------------------------------------------
# complexity index


@dataclass(frozen=True)
class ComplexityIndex:
    weights: np.ndarray  # per FEATURE_NAMES
    intercept: float
    stats: FeatureStats

    def weight_map(self):
        return {
            name: float(wj)
            for name, wj in zip(FEATURE_NAMES, self.weights)
            if wj != 0.0
        }


# Default coefficients estimated on a large human dataset (lambda = 0.2);
# features not listed were shrunk to zero.
DEFAULT_INDEX_WEIGHTS = {
    "Inequality": 0.85,
    "PayoffDomEquilibrium": -0.80,
    "PayoffVar_self": 0.40,
    "LevelIterRational": 0.38,
    "Max_self": 0.30,
    "Dissimilarity_self": 0.28,
    "Asymmetry": -0.09,
}
DEFAULT_INDEX_INTERCEPT = -9.28


def make_index(weight_map, intercept, stats: FeatureStats | None = None) -> ComplexityIndex:
    """Index from a name->weight mapping; identity normalization by default."""
    w = np.zeros(len(FEATURE_NAMES))
    for name, val in weight_map.items():
        w[FEATURE_NAMES.index(name)] = val
    if stats is None:
        stats = FeatureStats(np.zeros(len(FEATURE_NAMES)), np.ones(len(FEATURE_NAMES)))
    return ComplexityIndex(w, float(intercept), stats)


def default_index() -> ComplexityIndex:
    return make_index(DEFAULT_INDEX_WEIGHTS, DEFAULT_INDEX_INTERCEPT)


def index_score(features, index: ComplexityIndex) -> float:
    """Linear score on raw feature values via the index's frozen stats."""
    f = np.asarray(features, dtype=float)
    z = (f - index.stats.mean) / index.stats.sd
    return float(index.intercept + z @ index.weights)


def complexity_index(g: GameMatrix, index: ComplexityIndex) -> float:
    return index_score(compute_features(g).as_array(), index)


def fit_complexity_index(games, eta_self, lam=0.2) -> tuple:
    """LASSO index targeting the negated per-game precision.

    Returns (ComplexityIndex, LassoResult). eta_self holds the game-specific
    precisions of a trained context-dependent model, one per game.
    """
    X = features_matrix(games)
    Z, stats = normalize_features(X)
    res = lasso_fit(Z, -np.asarray(eta_self, dtype=float), lam=lam)
    return ComplexityIndex(res.coef, res.intercept, stats), res


def index_to_json(index: ComplexityIndex, meta: dict | None = None) -> str:
    doc = {
        "version": 1,
        "feature_names": list(FEATURE_NAMES),
        "weights": index.weights.tolist(),
        "intercept": index.intercept,
        "mean": index.stats.mean.tolist(),
        "sd": index.stats.sd.tolist(),
    }
    if meta:
        doc["meta"] = meta
    return json.dumps(doc, indent=2)


def index_from_json(text: str) -> ComplexityIndex:
    doc = json.loads(text)
    if list(doc["feature_names"]) != list(FEATURE_NAMES):
        raise ValueError("index file was built with a different feature set")
    return ComplexityIndex(
        np.asarray(doc["weights"], dtype=float),
        float(doc["intercept"]),
        FeatureStats(np.asarray(doc["mean"], dtype=float), np.asarray(doc["sd"], dtype=float)),
    )


# ---------------------------------------------------------------------------
# correlation and psychometric curves


def pearson_r(x, y):
    """Sample correlation and two-sided p from the t transform (n-2 df)."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if x.shape != y.shape or x.size < 3:
        raise ValueError("need two equally long series with at least 3 points")
    if np.all(x == x[0]) or np.all(y == y[0]):
        raise ZeroVariance("correlation undefined for a constant series")
    xd = x - x.mean()
    yd = y - y.mean()
    sx = math.sqrt(float(xd @ xd))
    sy = math.sqrt(float(yd @ yd))
    if sx == 0.0 or sy == 0.0:
        raise ZeroVariance("correlation undefined for a constant series")
    r = float(xd @ yd) / (sx * sy)
    r = max(-1.0, min(1.0, r))
    n = x.size
    if abs(r) >= 1.0:
        return r, 0.0
    t = r * math.sqrt((n - 2) / (1.0 - r * r))
    p = 2.0 * float(_sstats.t.sf(abs(t), n - 2))
    return r, p


@dataclass(frozen=True)
class BinStat:
    deu_mean: float
    p_mean: float
    se: float | None
    n: int


def _level1_deu(record, alpha=0.0):
    """Expected-utility edge of the first action against a uniform opponent."""
    from .behavioral import Belief, expected_utilities

    eu1, eu2 = expected_utilities(record.game, record.role, Belief(0.5), alpha)
    return eu1 - eu2


def psychometric_bins(records, split_values, n_bins=10, alpha=0.0):
    """Choice frequency against utility difference, split into two regimes.

    split_values (one per record, e.g. fitted precision or index score) are
    median-split into "low" and "high" groups; within each group records are
    binned by ΔEU quantiles. Returns {"low": [...], "high": [...],
    "threshold": median}; bins carry mean ΔEU, mean p(first), SE (absent for
    single-record bins), and count.
    """
    split_values = np.asarray(split_values, dtype=float)
    if len(split_values) != len(records):
        raise ValueError("one split value per record required")
    deu = np.array([_level1_deu(r, alpha) for r in records])
    p = np.array([r.p_first for r in records])
    thr = float(np.median(split_values))
    out = {"threshold": thr}
    for name, mask in (("low", split_values <= thr), ("high", split_values > thr)):
        d, pv = deu[mask], p[mask]
        bins = []
        if len(d):
            edges = np.quantile(d, np.linspace(0, 1, min(n_bins, len(d)) + 1))
            which = np.clip(np.searchsorted(edges, d, side="right") - 1, 0, len(edges) - 2)
            for bi in range(len(edges) - 1):
                sel = which == bi
                nb = int(sel.sum())
                if nb == 0:
                    continue
                se = float(pv[sel].std(ddof=1) / math.sqrt(nb)) if nb > 1 else None
                bins.append(BinStat(float(d[sel].mean()), float(pv[sel].mean()), se, nb))
        out[name] = bins
    return out


def fit_logistic_slope(deu, p, eta0=0.1):
    """One-parameter logistic fit p = sigma(eta * deu) by coarse-to-fine search.

    Used to compare psychometric steepness between groups.
    """
    deu = np.asarray(deu, dtype=float)
    p = np.asarray(p, dtype=float)

    def loss(eta):
        q = 1.0 / (1.0 + np.exp(-np.clip(eta * deu, -500, 500)))
        return float(np.mean((q - p) ** 2))

    lo, hi = 1e-4, 100.0
    etas = np.geomspace(lo, hi, 200)
    best = min(etas, key=loss)
    frac = 0.05
    for _ in range(60):
        step = best * frac
        cands = (best - step, best, best + step)
        nxt = min(cands, key=loss)
        if nxt == best:
            frac *= 0.5  # stalled at this resolution, tighten
        best = nxt
    return float(best)
