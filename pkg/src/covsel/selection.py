"""Greedy weighted-coverage selection, its exact oracle, and the baselines.

The greedy loop repeatedly picks the sample with the largest marginal
weighted coverage of still-uncovered channels (ties broken by lowest
sample index).  Once every coverable channel is covered and all marginal
gains are zero, remaining budget is filled by the sample with the largest
total weighted row mass, again lowest index first.  Runtime is
O(K * N * |C|) worst case; the per-step gain scan is a CSR mat-vec, which
is the vectorized form of the same sum and keeps the lowest-index
tie-break (argmax returns the first maximum).

The brute-force oracle enumerates index subsets in lexicographic order and
is the independent reference for the (1 - 1/e) guarantee tests.  Baselines:
uniform random, top-K perplexity, top-K activation variance, and
stratified sampling over quantile bins of per-sample mean magnitude.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np
from scipy import sparse

from .outliers import CoverageMatrix, covered_channels, objective_value
from .profiles import ActivationProfile

METHODS = ("greedy", "random", "max_ppl", "max_actvar", "stratified", "brute_force")


@dataclass(frozen=True)
class SelectionResult:
    """An ordered calibration selection with its objective value.

    step_gains holds the per-step marginal weighted gain for greedy runs
    and is empty for every other method.  objective is F(selected), or nan
    for baselines produced without a coverage matrix (attach_objective
    fills it in).
    """

    method: str
    selected: np.ndarray
    step_gains: np.ndarray
    objective: float
    seed: int | None = None

    def __post_init__(self):
        sel = np.asarray(self.selected, dtype=np.int64)
        sel.flags.writeable = False
        object.__setattr__(self, "selected", sel)
        gains = np.asarray(self.step_gains, dtype=np.float64)
        gains.flags.writeable = False
        object.__setattr__(self, "step_gains", gains)
        if self.method not in METHODS:
            raise ValueError(f"unknown method {self.method!r}")
        if sel.size != np.unique(sel).size:
            raise ValueError("selected indices must be distinct")

    @property
    def size(self) -> int:
        return int(self.selected.size)

    def to_dict(self, budget: int | None = None) -> dict:
        return {
            "method": self.method,
            "seed": self.seed,
            "K": int(budget) if budget is not None else self.size,
            "selected": [int(i) for i in self.selected],
            "objective": None if math.isnan(self.objective) else self.objective,
            "step_gains": [float(g) for g in self.step_gains],
        }


def attach_objective(result: SelectionResult, cov: CoverageMatrix) -> SelectionResult:
    """Fill in F(selected) for a baseline result produced without a matrix."""
    _, value = objective_value(result.selected, cov)
    return replace(result, objective=value)


def _coverage_csr(cov: CoverageMatrix) -> sparse.csr_matrix:
    indptr = np.zeros(cov.num_samples + 1, dtype=np.int64)
    for i, r in enumerate(cov.rows):
        indptr[i + 1] = indptr[i] + r.size
    indices = np.concatenate(cov.rows) if cov.num_samples else np.empty(0, dtype=np.int32)
    data = np.ones(indices.shape[0], dtype=np.float64)
    return sparse.csr_matrix((data, indices, indptr), shape=(cov.num_samples, cov.num_channels))


def greedy_select(cov: CoverageMatrix, budget: int) -> SelectionResult:
    """Greedy weighted coverage selection with lowest-index tie-break.

    Returns min(budget, N) samples in selection order.  After coverage
    saturates (every remaining marginal gain is zero), picks fall back to
    the unchosen sample with the largest total weighted row mass.
    """
    if budget < 0:
        raise ValueError("budget must be >= 0")
    n = cov.num_samples
    k = min(budget, n)
    if k == 0:
        return SelectionResult("greedy", np.empty(0, dtype=np.int64), np.empty(0), 0.0)

    matrix = _coverage_csr(cov)
    weights = cov.weights
    uncovered_w = weights.copy()
    row_mass = matrix @ weights  # static fallback key
    chosen_mask = np.zeros(n, dtype=bool)
    selected: list[int] = []
    gains_out: list[float] = []
    saturated = False

    for _ in range(k):
        if not saturated:
            gains = matrix @ uncovered_w
            gains[chosen_mask] = -1.0
            best = int(np.argmax(gains))  # first max == lowest index
            if gains[best] > 0.0:
                selected.append(best)
                gains_out.append(float(gains[best]))
                chosen_mask[best] = True
                uncovered_w[cov.rows[best]] = 0.0
                continue
            saturated = True
        masses = np.where(chosen_mask, -1.0, row_mass)
        best = int(np.argmax(masses))
        selected.append(best)
        gains_out.append(0.0)
        chosen_mask[best] = True

    sel = np.array(selected, dtype=np.int64)
    _, value = objective_value(sel, cov)
    return SelectionResult("greedy", sel, np.array(gains_out), value)


def brute_force_optimal(
    cov: CoverageMatrix, budget: int, max_subsets: int = 2_000_000
) -> SelectionResult:
    """Exact maximizer of weighted coverage by exhaustive enumeration.

    Ties resolve to the lexicographically smallest index set because
    subsets are visited in lexicographic order and only strict
    improvements replace the incumbent.  Refuses instances with more than
    max_subsets candidate subsets.
    """
    if budget < 0:
        raise ValueError("budget must be >= 0")
    n = cov.num_samples
    k = min(budget, n)
    if math.comb(n, k) > max_subsets:
        raise ValueError(f"C({n}, {k}) exceeds the enumeration cap {max_subsets}")
    if k == 0:
        return SelectionResult("brute_force", np.empty(0, dtype=np.int64), np.empty(0), 0.0)
    if k == n:
        sel = np.arange(n, dtype=np.int64)
        _, value = objective_value(sel, cov)
        return SelectionResult("brute_force", sel, np.empty(0), value)

    weights = cov.weights
    row_bits = [int(sum(1 << int(j) for j in r)) for r in cov.rows]

    best_value = -1.0
    best_set: tuple[int, ...] = ()
    stack = [(0, (), 0, 0.0)]  # (next index, chosen, union mask, F)
    # Depth-first in increasing index order visits K-subsets lexicographically.
    while stack:
        start, chosen, mask, value = stack.pop()
        if len(chosen) == k:
            if value > best_value:
                best_value = value
                best_set = chosen
            continue
        need = k - len(chosen)
        for i in range(n - need, start - 1, -1):  # push reversed so pops run in lex order
            new_bits = row_bits[i] & ~mask
            gain = 0.0
            b = new_bits
            while b:
                low = b & -b
                gain += weights[low.bit_length() - 1]
                b ^= low
            stack.append((i + 1, chosen + (i,), mask | row_bits[i], value + gain))

    sel = np.array(best_set, dtype=np.int64)
    _, value = objective_value(sel, cov)  # recompute so ties in DFS accumulation cannot drift
    return SelectionResult("brute_force", sel, np.empty(0), value)


def select_random(num_samples: int, budget: int, seed: int) -> SelectionResult:
    """Uniform sample without replacement from a seeded generator."""
    if budget < 0:
        raise ValueError("budget must be >= 0")
    rng = np.random.default_rng(seed)
    k = min(budget, num_samples)
    sel = rng.choice(num_samples, size=k, replace=False).astype(np.int64)
    return SelectionResult("random", sel, np.empty(0), float("nan"), seed=seed)


def select_max_ppl(profile: ActivationProfile, budget: int) -> SelectionResult:
    """Top-K samples by full-precision perplexity, ties by lowest index."""
    if profile.perplexities is None:
        raise ValueError("profile has no perplexities block; Max-PPL selection needs one")
    if budget < 0:
        raise ValueError("budget must be >= 0")
    ppl = profile.perplexities.astype(np.float64)
    order = np.argsort(-ppl, kind="stable")  # stable: equal values keep index order
    k = min(budget, profile.num_samples)
    return SelectionResult("max_ppl", order[:k].astype(np.int64), np.empty(0), float("nan"))


def actvar_scores(profile: ActivationProfile, mode: str = "entries") -> np.ndarray:
    """Per-sample activation-variance score.

    mode "entries": population variance over all (layer, channel) magnitude
    entries of the sample.  mode "layer_means": population variance over
    the per-layer mean magnitudes.  Both readings of "activation variance
    across layers" are offered; "entries" is the default.
    """
    if mode == "entries":
        stacked = np.concatenate([m.astype(np.float64) for m in profile.magnitudes], axis=0)
        return stacked.var(axis=0)
    if mode == "layer_means":
        means = np.stack([m.astype(np.float64).mean(axis=0) for m in profile.magnitudes])
        return means.var(axis=0)
    raise ValueError(f"unknown actvar mode {mode!r}")


def select_max_actvar(profile: ActivationProfile, budget: int, mode: str = "entries") -> SelectionResult:
    """Top-K samples by activation variance, ties by lowest index."""
    if budget < 0:
        raise ValueError("budget must be >= 0")
    scores = actvar_scores(profile, mode)
    order = np.argsort(-scores, kind="stable")
    k = min(budget, profile.num_samples)
    return SelectionResult("max_actvar", order[:k].astype(np.int64), np.empty(0), float("nan"))


def _largest_remainder_quotas(counts: np.ndarray, budget: int) -> np.ndarray:
    total = counts.sum()
    if total == 0:
        return np.zeros_like(counts)
    exact = budget * counts / total
    quotas = np.floor(exact).astype(np.int64)
    short = budget - quotas.sum()
    if short > 0:
        # Largest fractional remainder first; ties go to the lower bin index.
        order = np.lexsort((np.arange(counts.size), -(exact - quotas)))
        quotas[order[:short]] += 1
    return quotas


def select_stratified(
    profile: ActivationProfile, budget: int, num_bins: int, seed: int
) -> SelectionResult:
    """Stratified sampling that matches the pool's magnitude distribution.

    Samples are summarized by their mean magnitude over all (layer,
    channel) entries, split into num_bins quantile bins (equal-population
    by rank), and drawn per bin with quotas proportional to bin population
    (largest-remainder rounding) using a seeded generator.
    """
    if num_bins < 1:
        raise ValueError("num_bins must be >= 1")
    if budget < 0:
        raise ValueError("budget must be >= 0")
    n = profile.num_samples
    k = min(budget, n)
    summary = np.concatenate([m.astype(np.float64) for m in profile.magnitudes], axis=0).mean(axis=0)
    order = np.lexsort((np.arange(n), summary))  # rank by summary, stable in index
    bins = np.array_split(order, num_bins)
    quotas = _largest_remainder_quotas(np.array([b.size for b in bins]), k)

    rng = np.random.default_rng(seed)
    picks = []
    for members, quota in zip(bins, quotas):
        if quota > 0:
            picks.append(rng.choice(members, size=quota, replace=False))
    sel = np.sort(np.concatenate(picks)).astype(np.int64) if picks else np.empty(0, dtype=np.int64)
    return SelectionResult("stratified", sel, np.empty(0), float("nan"), seed=seed)


@dataclass(frozen=True)
class CoverageReport:
    """Coverage and redundancy metrics of a selection.

    Percentages are over the outlier channel set C; when C is empty both
    coverage figures are reported as 100 (there is nothing left to cover).
    mean_pairwise_jaccard averages |Cov(a) & Cov(b)| / |Cov(a) | Cov(b)|
    over unordered sample pairs; a pair of two empty coverage sets
    contributes 0, and selections with fewer than two samples report 0.
    """

    channel_coverage_pct: float
    weighted_coverage_pct: float
    mean_pairwise_jaccard: float
    per_layer_covered: tuple[int, ...]
    per_layer_total: tuple[int, ...]

    def to_dict(self) -> dict:
        return {
            "channel_coverage_pct": self.channel_coverage_pct,
            "weighted_coverage_pct": self.weighted_coverage_pct,
            "mean_pairwise_jaccard": self.mean_pairwise_jaccard,
            "per_layer": [
                {"layer": l, "covered": c, "total": t}
                for l, (c, t) in enumerate(zip(self.per_layer_covered, self.per_layer_total))
            ],
        }


def mean_pairwise_jaccard(rows: list[np.ndarray]) -> float:
    """Mean Jaccard similarity over unordered pairs of coverage rows."""
    m = len(rows)
    if m < 2:
        return 0.0
    total = 0.0
    for a in range(m):
        ra = rows[a]
        for b in range(a + 1, m):
            rb = rows[b]
            if ra.size == 0 and rb.size == 0:
                continue  # convention: empty-empty pair contributes 0
            inter = np.intersect1d(ra, rb, assume_unique=True).size
            union = ra.size + rb.size - inter
            total += inter / union
    return total / (m * (m - 1) / 2)


def coverage_report(selection, cov: CoverageMatrix) -> CoverageReport:
    """Table-3-style coverage profile of a selection."""
    sel = selection.selected if isinstance(selection, SelectionResult) else np.asarray(selection, dtype=np.int64)
    covered = covered_channels(sel, cov)
    total_w = cov.total_weight
    if cov.num_channels == 0:
        channel_pct = weighted_pct = 100.0
    else:
        channel_pct = 100.0 * covered.size / cov.num_channels
        weighted_pct = 100.0 * float(cov.weights[covered].sum()) / total_w if total_w > 0 else 100.0

    totals = cov.per_layer_totals()
    covered_per_layer = np.bincount(cov.channel_layers[covered], minlength=cov.num_layers)
    jac = mean_pairwise_jaccard([cov.rows[i] for i in sel])
    return CoverageReport(
        channel_coverage_pct=channel_pct,
        weighted_coverage_pct=weighted_pct,
        mean_pairwise_jaccard=jac,
        per_layer_covered=tuple(int(x) for x in covered_per_layer),
        per_layer_total=tuple(int(x) for x in totals),
    )


def write_index_list(selection, path) -> None:
    """Plain-text one-index-per-line export for downstream PTQ tooling."""
    sel = selection.selected if isinstance(selection, SelectionResult) else np.asarray(selection, dtype=np.int64)
    with open(path, "w") as f:
        for i in sel:
            f.write(f"{int(i)}\n")
