"""Outlier-channel identification, channel weighting, and coverage matrices.

A channel (l, c) is an outlier when its pool-wide max magnitude strictly
exceeds the layer threshold tau_l = mu_l + k_sigma * sigma_l, where mu/sigma
are the mean and population standard deviation of all d_l x N magnitude
entries of the layer.  Each outlier channel carries the weight

    w = (ref / tau)^2 * column_norm

with ref the channel's pool-wide max magnitude and column_norm defaulting
to 1.0 when the profile carries no norms.  The binary coverage matrix M
marks which samples push which outlier channels above threshold; the
weighted coverage objective F(S) sums the weights of the channels covered
by a selection S.  All statistics and weights are evaluated in float64.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .profiles import ActivationProfile

DEFAULT_K_SIGMA = 6.0


@dataclass(frozen=True)
class LayerThresholds:
    """Per-layer mean, population std, and threshold tau = mu + k * sigma."""

    mu: np.ndarray
    sigma: np.ndarray
    tau: np.ndarray
    k_sigma: np.ndarray
    degenerate: np.ndarray  # sigma == 0: tau == mu, no channel can exceed it

    def __post_init__(self):
        for name in ("mu", "sigma", "tau", "k_sigma"):
            arr = np.asarray(getattr(self, name), dtype=np.float64)
            arr.flags.writeable = False
            object.__setattr__(self, name, arr)
        deg = np.asarray(self.degenerate, dtype=bool)
        deg.flags.writeable = False
        object.__setattr__(self, "degenerate", deg)

    @property
    def num_layers(self) -> int:
        return self.tau.shape[0]

    def diagnostics(self) -> list[str]:
        return [
            f"layer {l}: all magnitudes equal (sigma=0), tau=mu={self.mu[l]:g}; no outlier can exceed it"
            for l in np.flatnonzero(self.degenerate)
        ]

    def with_k_sigma(self, k_sigma) -> "LayerThresholds":
        """Re-derive thresholds from the same mu/sigma with new multipliers."""
        k = np.broadcast_to(np.asarray(k_sigma, dtype=np.float64), self.mu.shape).copy()
        if np.any(k <= 0):
            raise ValueError("k_sigma must be > 0")
        return LayerThresholds(
            mu=self.mu,
            sigma=self.sigma,
            tau=self.mu + k * self.sigma,
            k_sigma=k,
            degenerate=self.degenerate,
        )


def compute_thresholds(profile: ActivationProfile, k_sigma=DEFAULT_K_SIGMA) -> LayerThresholds:
    """Per-layer tau = mu + k_sigma * sigma over all d_l x N entries (float64).

    k_sigma may be a scalar or one value per layer (used by adaptive
    refinement).  sigma is the population standard deviation; a layer with
    all-equal values gets tau = mu and is flagged degenerate.
    """
    num_layers = profile.num_layers
    k = np.broadcast_to(np.asarray(k_sigma, dtype=np.float64), (num_layers,)).copy()
    if np.any(k <= 0):
        raise ValueError("k_sigma must be > 0")
    mu = np.empty(num_layers)
    sigma = np.empty(num_layers)
    for l, m in enumerate(profile.magnitudes):
        flat = m.astype(np.float64, copy=False)
        mu[l] = flat.mean(dtype=np.float64)
        sigma[l] = flat.std(dtype=np.float64)  # population std (ddof=0)
    return LayerThresholds(
        mu=mu, sigma=sigma, tau=mu + k * sigma, k_sigma=k, degenerate=sigma == 0.0
    )


@dataclass(frozen=True)
class OutlierModel:
    """The outlier channel set with per-channel reference magnitudes and weights.

    Channels are stored sorted by (layer, channel) and indexed globally
    0..|C|-1; that global index is shared with CoverageMatrix columns.
    """

    taus: np.ndarray            # (L,) per-layer thresholds
    k_sigma: np.ndarray         # (L,) multipliers behind taus (nan if taus were given raw)
    channel_layers: np.ndarray  # (|C|,) layer of each outlier channel
    channel_ids: np.ndarray     # (|C|,) in-layer channel index
    ref_magnitudes: np.ndarray  # (|C|,) pool-wide max magnitude, float64
    norms: np.ndarray           # (|C|,) column norms (1.0 when profile has none)
    weights: np.ndarray         # (|C|,) (ref/tau)^2 * norm, float64
    layer_dims: tuple[int, ...]
    num_samples: int

    def __post_init__(self):
        for name, dtype in (
            ("taus", np.float64),
            ("k_sigma", np.float64),
            ("channel_layers", np.int32),
            ("channel_ids", np.int32),
            ("ref_magnitudes", np.float64),
            ("norms", np.float64),
            ("weights", np.float64),
        ):
            arr = np.asarray(getattr(self, name), dtype=dtype)
            arr.flags.writeable = False
            object.__setattr__(self, name, arr)

    @property
    def num_channels(self) -> int:
        return self.channel_layers.shape[0]

    @property
    def num_layers(self) -> int:
        return len(self.layer_dims)

    @property
    def total_weight(self) -> float:
        return float(self.weights.sum())

    def channels_in_layer(self, layer: int) -> np.ndarray:
        """Global indices of this layer's outlier channels."""
        return np.flatnonzero(self.channel_layers == layer)

    def summary_dict(self, thresholds: LayerThresholds | None = None) -> dict:
        """JSON-ready summary: thresholds, per-layer outlier counts, weight totals."""
        layers = []
        for l in range(self.num_layers):
            entry = {
                "tau": float(self.taus[l]),
                "outliers": int(np.count_nonzero(self.channel_layers == l)),
            }
            if thresholds is not None:
                entry["mu"] = float(thresholds.mu[l])
                entry["sigma"] = float(thresholds.sigma[l])
            layers.append(entry)
        k = self.k_sigma
        k_scalar = float(k[0]) if k.size and np.all(k == k[0]) else [float(v) for v in k]
        return {
            "k_sigma": k_scalar,
            "layers": layers,
            "total_channels": self.num_channels,
            "total_weight": self.total_weight,
        }


def build_outlier_model(profile: ActivationProfile, thresholds) -> OutlierModel:
    """Identify outlier channels and their Eq.-4-style weights.

    `thresholds` is a LayerThresholds or a raw per-layer tau array.  A
    channel joins the outlier set iff its pool max STRICTLY exceeds its
    layer's tau; ties at tau are excluded.
    """
    if isinstance(thresholds, LayerThresholds):
        taus = thresholds.tau
        k_sigma = thresholds.k_sigma
    else:
        taus = np.asarray(thresholds, dtype=np.float64)
        k_sigma = np.full_like(taus, np.nan)
    if taus.shape != (profile.num_layers,):
        raise ValueError(f"need one threshold per layer, got shape {taus.shape} for {profile.num_layers} layers")

    layers_out, ids_out, refs_out, norms_out = [], [], [], []
    for l, m in enumerate(profile.magnitudes):
        ref = m.max(axis=1).astype(np.float64)
        mask = ref > taus[l]
        ids = np.flatnonzero(mask)
        layers_out.append(np.full(ids.shape[0], l, dtype=np.int32))
        ids_out.append(ids.astype(np.int32))
        refs_out.append(ref[ids])
        norms_out.append(profile.norms_or_default(l)[ids])

    channel_layers = np.concatenate(layers_out)
    channel_ids = np.concatenate(ids_out)
    refs = np.concatenate(refs_out)
    norms = np.concatenate(norms_out)
    ratios = refs / taus[channel_layers]
    weights = ratios * ratios * norms

    return OutlierModel(
        taus=taus,
        k_sigma=k_sigma,
        channel_layers=channel_layers,
        channel_ids=channel_ids,
        ref_magnitudes=refs,
        norms=norms,
        weights=weights,
        layer_dims=profile.layer_dims,
        num_samples=profile.num_samples,
    )


@dataclass(frozen=True)
class CoverageMatrix:
    """Sparse binary sample x outlier-channel incidence plus channel weights.

    rows[i] holds the sorted global channel indices that sample i pushes
    above threshold; the weighted matrix is implicit as M[i, j] * weights[j].
    """

    rows: tuple[np.ndarray, ...]
    weights: np.ndarray
    channel_layers: np.ndarray
    num_layers: int

    def __post_init__(self):
        w = np.asarray(self.weights, dtype=np.float64)
        w.flags.writeable = False
        object.__setattr__(self, "weights", w)
        rows = []
        for i, r in enumerate(self.rows):
            arr = np.unique(np.asarray(r, dtype=np.int32))
            if arr.size and (arr[0] < 0 or arr[-1] >= w.shape[0]):
                raise ValueError(f"row {i} references a channel outside 0..{w.shape[0] - 1}")
            arr.flags.writeable = False
            rows.append(arr)
        object.__setattr__(self, "rows", tuple(rows))
        cl = np.asarray(self.channel_layers, dtype=np.int32)
        cl.flags.writeable = False
        object.__setattr__(self, "channel_layers", cl)

    @property
    def num_samples(self) -> int:
        return len(self.rows)

    @property
    def num_channels(self) -> int:
        return self.weights.shape[0]

    @property
    def total_weight(self) -> float:
        return float(self.weights.sum())

    def row_masses(self) -> np.ndarray:
        """Total weighted row mass of each sample (used by the greedy fallback)."""
        return np.array([self.weights[r].sum() for r in self.rows])

    def per_layer_totals(self) -> np.ndarray:
        """Number of outlier channels per layer."""
        return np.bincount(self.channel_layers, minlength=self.num_layers)


def build_coverage_matrix(profile: ActivationProfile, model: OutlierModel) -> CoverageMatrix:
    """Assemble the binary coverage matrix M[i, j] = 1[a[l_j][c_j][i] > tau_(l_j)].

    The model must come from the same profile; by construction (reference
    pool = candidate pool) every outlier channel is covered by at least
    one sample, which is asserted here.
    """
    if model.layer_dims != profile.layer_dims or model.num_samples != profile.num_samples:
        raise ValueError(
            "outlier model was built from a different profile "
            f"(dims {model.layer_dims} x {model.num_samples} vs {profile.layer_dims} x {profile.num_samples})"
        )
    n = profile.num_samples
    per_sample: list[list[np.ndarray]] = [[] for _ in range(n)]
    base = 0
    for l, m in enumerate(profile.magnitudes):
        ids = model.channel_ids[model.channel_layers == l]
        if ids.size:
            hits = m[ids, :].astype(np.float64) > model.taus[l]  # (|C_l|, N), strict
            for s in range(n):
                local = np.flatnonzero(hits[:, s])
                if local.size:
                    per_sample[s].append((local + base).astype(np.int32))
        base += ids.size

    rows = tuple(
        np.concatenate(chunks) if chunks else np.empty(0, dtype=np.int32) for chunks in per_sample
    )
    covered = np.zeros(model.num_channels, dtype=bool)
    for r in rows:
        covered[r] = True
    if not covered.all():
        missing = np.flatnonzero(~covered)[0]
        raise AssertionError(
            f"channel {missing} is in the outlier set but covered by no pool sample; "
            "reference pool and candidate pool must coincide"
        )
    return CoverageMatrix(
        rows=rows,
        weights=model.weights,
        channel_layers=model.channel_layers,
        num_layers=model.num_layers,
    )


def covered_channels(selection, cov: CoverageMatrix) -> np.ndarray:
    """Sorted union of the coverage rows of a selection."""
    idx = np.asarray(selection, dtype=np.int64).ravel()
    if idx.size == 0:
        return np.empty(0, dtype=np.int32)
    if idx.min() < 0 or idx.max() >= cov.num_samples:
        raise IndexError(f"sample index out of range 0..{cov.num_samples - 1}")
    parts = [cov.rows[i] for i in idx]
    return np.unique(np.concatenate(parts)) if parts else np.empty(0, dtype=np.int32)


def objective_value(selection, cov: CoverageMatrix) -> tuple[np.ndarray, float]:
    """Covered channel set and weighted coverage F(S) of a selection (float64)."""
    covered = covered_channels(selection, cov)
    return covered, float(cov.weights[covered].sum())
