"""Stylized clipping-deficit simulation, surrogate loss, and threshold refinement.

The deficit model: a covered outlier channel has deficit 0; an uncovered
channel has deficit at most ref/tau.  "worst_case" mode saturates every
uncovered channel at ref/tau; "uniform_fraction" draws u in [0, 1) per
channel from a generator keyed by (seed, layer, channel), so draws do not
depend on iteration order or on which other channels exist.

The surrogate loss sums column_norm * deficit^2 over all outlier channels
and is bounded above by the total uncovered channel weight, i.e. by
sum(w) - F(S); the slack of that bound is zero exactly when coverage is
total or every uncovered deficit is saturated.  The weight and loss terms
share the ratio computation, so worst-case slack is exactly 0.0 in float.

Adaptive refinement runs one selection round, measures per-layer surrogate
error under worst-case deficits, lowers k_sigma for layers whose error
exceeds median + 2 * population-std, and reselects.  (The layer error
stands in for the per-layer Frobenius reconstruction error a real PTQ
backend would report; this artifact deliberately has no backend.)
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .outliers import (
    CoverageMatrix,
    LayerThresholds,
    OutlierModel,
    build_coverage_matrix,
    build_outlier_model,
    compute_thresholds,
    covered_channels,
    objective_value,
)
from .profiles import ActivationProfile
from .selection import SelectionResult, greedy_select

MODES = ("worst_case", "uniform_fraction")


@dataclass(frozen=True)
class DeficitVector:
    """Per-outlier-channel clipping deficits for one selection.

    Enforces the deficit model at construction: zero on covered channels,
    at most ref/tau on uncovered ones.
    """

    values: np.ndarray
    covered: np.ndarray
    max_values: np.ndarray  # ref/tau per channel, the uncovered-deficit cap
    mode: str
    seed: int | None

    def __post_init__(self):
        vals = np.asarray(self.values, dtype=np.float64)
        cov = np.asarray(self.covered, dtype=bool)
        caps = np.asarray(self.max_values, dtype=np.float64)
        if not (vals.shape == cov.shape == caps.shape):
            raise ValueError("values, covered, and max_values must have matching shapes")
        if self.mode not in MODES:
            raise ValueError(f"unknown deficit mode {self.mode!r}")
        if np.any(vals < 0):
            raise ValueError("deficits must be >= 0")
        if np.any(vals[cov] != 0.0):
            raise ValueError("covered channels must have zero deficit")
        if np.any(vals[~cov] > caps[~cov]):
            raise ValueError("uncovered deficits must not exceed ref/tau")
        for name, arr in (("values", vals), ("covered", cov), ("max_values", caps)):
            arr.flags.writeable = False
            object.__setattr__(self, name, arr)


def _keyed_uniform(seed: int, layer: int, channel: int) -> float:
    # Counter-style keying: the draw for (seed, l, c) never depends on
    # iteration order or on the rest of the channel set.
    return np.random.default_rng([seed, layer, channel]).random()


def simulate_deficits(
    model: OutlierModel,
    cov: CoverageMatrix,
    selection,
    seed: int = 0,
    mode: str = "uniform_fraction",
) -> DeficitVector:
    """Draw per-channel deficits for a selection under the clipping model."""
    if mode not in MODES:
        raise ValueError(f"unknown deficit mode {mode!r}")
    covered_idx = covered_channels(selection, cov)
    covered_mask = np.zeros(model.num_channels, dtype=bool)
    covered_mask[covered_idx] = True

    caps = model.ref_magnitudes / model.taus[model.channel_layers]
    values = np.zeros(model.num_channels)
    uncovered = np.flatnonzero(~covered_mask)
    if mode == "worst_case":
        values[uncovered] = caps[uncovered]
    else:
        for j in uncovered:
            u = _keyed_uniform(seed, int(model.channel_layers[j]), int(model.channel_ids[j]))
            values[j] = u * caps[j]
    return DeficitVector(values=values, covered=covered_mask, max_values=caps, mode=mode, seed=seed)


@dataclass(frozen=True)
class SurrogateReport:
    """Surrogate loss, its coverage bound, and the per-layer error split."""

    loss: float               # sum over C of norm * deficit^2
    bound: float              # sum(w) - F(S) == total uncovered weight
    slack: float              # bound - loss, >= 0 by the consistency bound
    per_layer_error: np.ndarray
    per_layer_share: np.ndarray

    def __post_init__(self):
        for name in ("per_layer_error", "per_layer_share"):
            arr = np.asarray(getattr(self, name), dtype=np.float64)
            arr.flags.writeable = False
            object.__setattr__(self, name, arr)

    def to_dict(self) -> dict:
        return {
            "L_sur": self.loss,
            "bound": self.bound,
            "slack": self.slack,
            "per_layer": [
                {"layer": l, "error": float(e), "share": float(s)}
                for l, (e, s) in enumerate(zip(self.per_layer_error, self.per_layer_share))
            ],
        }


def per_layer_surrogate_error(deficits: DeficitVector, model: OutlierModel) -> np.ndarray:
    """Layer-restricted surrogate error: sum of norm * deficit^2 per layer."""
    terms = (deficits.values * deficits.values) * model.norms
    return np.bincount(model.channel_layers, weights=terms, minlength=model.num_layers)


def _uncovered_weight(covered_mask: np.ndarray, model: OutlierModel) -> float:
    # Blocked per-layer accumulation, mirroring per_layer_surrogate_error term
    # for term: a saturated deficit contributes exactly its weight, so the
    # worst-case slack is exactly 0.0 rather than a rounding residue.
    masked = np.where(covered_mask, 0.0, model.weights)
    per_layer = np.bincount(model.channel_layers, weights=masked, minlength=model.num_layers)
    return float(per_layer.sum())


def surrogate_loss(deficits: DeficitVector, model: OutlierModel) -> SurrogateReport:
    """Evaluate the surrogate loss and its uncovered-weight bound (float64)."""
    if deficits.values.shape[0] != model.num_channels:
        raise ValueError("deficit vector does not match the model's channel count")
    per_layer = per_layer_surrogate_error(deficits, model)
    loss = float(per_layer.sum())
    bound = _uncovered_weight(deficits.covered, model)
    total = per_layer.sum()
    shares = per_layer / total if total > 0 else np.zeros_like(per_layer)
    return SurrogateReport(
        loss=loss,
        bound=bound,
        slack=bound - loss,
        per_layer_error=per_layer,
        per_layer_share=shares,
    )


def check_surrogate_bound(
    report: SurrogateReport,
    model: OutlierModel,
    cov: CoverageMatrix,
    selection,
) -> float:
    """Recompute the bound from scratch and return the slack (bound - loss).

    The covered set is re-derived from the coverage matrix and the
    selection, independently of the deficit vector, and the bound is
    cross-checked against the algebraic identity sum(w) - F(S).  Negative
    slack is an implementation error, never a data condition, and raises.
    """
    covered_idx = covered_channels(selection, cov)
    covered_mask = np.zeros(model.num_channels, dtype=bool)
    covered_mask[covered_idx] = True
    bound = _uncovered_weight(covered_mask, model)
    _, value = objective_value(selection, cov)
    if not np.isclose(bound, model.total_weight - value, rtol=1e-12, atol=1e-9):
        raise AssertionError(
            f"uncovered weight {bound} disagrees with sum(w) - F(S) = {model.total_weight - value}"
        )
    if not np.isclose(bound, report.bound, rtol=1e-12, atol=1e-9):
        raise AssertionError(
            f"report bound {report.bound} disagrees with recomputed uncovered weight {bound}"
        )
    slack = bound - report.loss
    if slack < 0:
        raise AssertionError(
            f"surrogate bound violated: loss {report.loss} exceeds bound {bound}"
        )
    return float(slack)


@dataclass(frozen=True)
class RefinementRound:
    """One threshold/selection/surrogate round of adaptive refinement."""

    thresholds: LayerThresholds
    model: OutlierModel
    coverage: CoverageMatrix
    selection: SelectionResult
    report: SurrogateReport


@dataclass(frozen=True)
class AdaptiveResult:
    initial: RefinementRound
    refined: RefinementRound
    flagged_layers: np.ndarray
    per_layer_error: np.ndarray  # worst-case surrogate error behind the flag rule

    def __post_init__(self):
        for name in ("flagged_layers", "per_layer_error"):
            arr = np.asarray(getattr(self, name))
            arr.flags.writeable = False
            object.__setattr__(self, name, arr)


def flag_high_error_layers(per_layer_error: np.ndarray) -> np.ndarray:
    """Layers whose error exceeds median + 2 * population std of all layer errors."""
    eps = np.asarray(per_layer_error, dtype=np.float64)
    cutoff = np.median(eps) + 2.0 * eps.std()
    return np.flatnonzero(eps > cutoff)


def _run_round(profile, thresholds, budget, seed, mode) -> RefinementRound:
    model = build_outlier_model(profile, thresholds)
    coverage = build_coverage_matrix(profile, model)
    selection = greedy_select(coverage, budget)
    deficits = simulate_deficits(model, coverage, selection.selected, seed=seed, mode=mode)
    report = surrogate_loss(deficits, model)
    return RefinementRound(thresholds, model, coverage, selection, report)


def adaptive_refine(
    profile: ActivationProfile,
    budget: int,
    k_sigma_init: float = 6.0,
    k_sigma_low: float = 4.0,
    seed: int = 0,
    mode: str = "uniform_fraction",
) -> AdaptiveResult:
    """One round of adaptive threshold refinement on the surrogate model.

    Selects at k_sigma_init, computes per-layer surrogate error for that
    selection under worst-case deficits, drops k_sigma to k_sigma_low for
    layers flagged by the median + 2-sigma rule, and reselects with the
    mixed thresholds.  Both rounds' deficit reports use `mode`; the flag
    rule itself always uses worst-case errors.
    """
    if profile.num_layers < 2:
        raise ValueError("adaptive refinement needs at least 2 layers for the median flag rule")
    if k_sigma_low > k_sigma_init:
        raise ValueError("k_sigma_low must be <= k_sigma_init")

    stats = compute_thresholds(profile, k_sigma_init)
    round0 = _run_round(profile, stats, budget, seed, mode)

    worst = simulate_deficits(round0.model, round0.coverage, round0.selection.selected, seed=seed, mode="worst_case")
    layer_error = per_layer_surrogate_error(worst, round0.model)
    flagged = flag_high_error_layers(layer_error)

    k_vec = np.full(profile.num_layers, float(k_sigma_init))
    k_vec[flagged] = float(k_sigma_low)
    round1 = _run_round(profile, stats.with_k_sigma(k_vec), budget, seed, mode)

    return AdaptiveResult(
        initial=round0, refined=round1, flagged_layers=flagged, per_layer_error=layer_error
    )
