"""Synthetic activation-profile pools with controllable outlier structure.

Pools are built from a half-normal "body" of non-outlier magnitudes with a
configurable fraction of planted outlier channels per layer.  A planted
channel fires (magnitude = body_mean + m * body_std, m drawn from the
configured multiplier range) on a sparse subset of samples and is
guaranteed at least one firing sample, so the pool always covers its own
outlier set.  Column norms are |Normal(1, 0.25)| and per-sample
perplexities LogNormal(1.5, 0.4), so every baseline is exercisable.

Scenarios:

  uniform        independent Bernoulli(p) firing patterns everywhere.
  dominant-layer uniform, but a dominant_boost_fraction share of one
                 designated layer's planted channels get magnitude
                 multipliers scaled by dominant_boost.  The boosted mass
                 makes that layer dominate the surrogate-error split under
                 small selections, and by inflating the layer's sigma it
                 hides the layer's unboosted moderate outliers above the
                 4-sigma line but below 6-sigma, which is what threshold
                 refinement recovers.
  redundant-pool with probability `redundancy` a channel is a "core"
                 channel firing (thinned, prob template_fire_prob) on the
                 layer's shared sample template; otherwise it is a "rare"
                 channel firing on one or two template-free quiet samples
                 that no other rare channel uses.  Core channels draw from
                 the low end of the multiplier range and rare channels
                 from the high end, so high-variance samples are the
                 mutually redundant template members while most of the
                 weight sits on rare channels, each of which needs its own
                 dedicated pick.

Generation is deterministic per seed: layer fills use per-layer child
seeds, so parallelizing over layers cannot change the output.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np

from .outliers import build_outlier_model, compute_thresholds
from .profiles import ActivationProfile

SCENARIOS = ("uniform", "dominant-layer", "redundant-pool")

# Low/high multiplier bands used by the redundant-pool scenario, as
# fractions of the configured [m_lo, m_hi] span.
_CORE_BAND_HI = 0.2
_RARE_BAND_LO = 0.45


@dataclass(frozen=True)
class PoolConfig:
    """Knobs of the synthetic pool generator."""

    num_samples: int
    layer_dims: tuple[int, ...]
    body_mean: float = 0.0
    body_std: float = 1.0
    outlier_fraction: float = 0.03
    magnitude_range: tuple[float, float] = (8.0, 120.0)
    activation_sparsity: float = 0.02
    redundancy: float = 0.0
    scenario: str = "uniform"
    seed: int = 0
    k_sigma_guard: float = 6.0      # m_lo must exceed this so planted channels clear tau
    dominant_layer: int | None = None
    dominant_boost: float = 10.0
    dominant_boost_fraction: float = 0.6
    template_fill: float = 0.3      # fraction of samples in each layer's template
    template_fire_prob: float = 0.25
    rare_fire_max: int = 2

    def __post_init__(self):
        object.__setattr__(self, "layer_dims", tuple(int(d) for d in self.layer_dims))
        if self.num_samples < 1:
            raise ValueError("num_samples must be >= 1")
        if not self.layer_dims or any(d < 1 for d in self.layer_dims):
            raise ValueError("layer_dims must be nonempty with every dim >= 1")
        if not 0.0 < self.outlier_fraction < 1.0:
            raise ValueError("outlier_fraction must be in (0, 1)")
        if not 0.0 < self.activation_sparsity <= 1.0:
            raise ValueError("activation_sparsity must be in (0, 1]")
        if not 0.0 <= self.redundancy <= 1.0:
            raise ValueError("redundancy must be in [0, 1]")
        m_lo, m_hi = self.magnitude_range
        if not (math.isfinite(m_lo) and math.isfinite(m_hi) and m_lo < m_hi):
            raise ValueError("magnitude_range must be finite with m_lo < m_hi")
        if m_lo <= self.k_sigma_guard:
            raise ValueError(
                f"m_lo = {m_lo} must exceed the k_sigma guard {self.k_sigma_guard}, "
                "otherwise planted channels need not clear the threshold"
            )
        if self.body_std <= 0 or not math.isfinite(self.body_mean):
            raise ValueError("body distribution parameters must be finite with body_std > 0")
        if self.scenario not in SCENARIOS:
            raise ValueError(f"unknown scenario {self.scenario!r}")
        if self.dominant_layer is not None and not 0 <= self.dominant_layer < len(self.layer_dims):
            raise ValueError("dominant_layer out of range")
        if self.dominant_boost <= 0:
            raise ValueError("dominant_boost must be > 0")
        if not 0.0 < self.dominant_boost_fraction <= 1.0:
            raise ValueError("dominant_boost_fraction must be in (0, 1]")
        if not 0.0 < self.template_fill < 1.0:
            raise ValueError("template_fill must be in (0, 1)")
        if not 0.0 < self.template_fire_prob <= 1.0:
            raise ValueError("template_fire_prob must be in (0, 1]")
        if self.rare_fire_max < 1:
            raise ValueError("rare_fire_max must be >= 1")

    @property
    def num_layers(self) -> int:
        return len(self.layer_dims)


POOL_PRESETS: dict[str, PoolConfig] = {
    "small": PoolConfig(num_samples=200, layer_dims=(96, 96, 96), outlier_fraction=0.05,
                        activation_sparsity=0.05),
    "medium": PoolConfig(num_samples=2000, layer_dims=(1024,) * 4, outlier_fraction=0.032,
                         activation_sparsity=0.02),
}


def _nonempty_mask(rng: np.random.Generator, size: int, prob: float) -> np.ndarray:
    """Bernoulli(prob) mask, resampled until at least one position fires."""
    for _ in range(10_000):
        mask = rng.random(size) < prob
        if mask.any():
            return mask
    mask = np.zeros(size, dtype=bool)
    mask[rng.integers(size)] = True
    return mask


def _fire(rng, body_mean, body_std, lo, hi, count) -> np.ndarray:
    return body_mean + rng.uniform(lo, hi, count) * body_std


def generate_pool(config: PoolConfig) -> ActivationProfile:
    """Generate a profile with the configured outlier structure (seeded)."""
    n = config.num_samples
    m_lo, m_hi = config.magnitude_range
    span = m_hi - m_lo
    root = np.random.SeedSequence(config.seed)
    *layer_seeds, pool_seed = root.spawn(config.num_layers + 1)
    pool_rng = np.random.default_rng(pool_seed)

    # Redundant-pool structure is drawn up front (and sequentially) so the
    # per-layer fills stay independent of each other.
    templates: list[np.ndarray] = []
    quiet_order: np.ndarray | None = None
    quiet_cursor = 0
    if config.scenario == "redundant-pool":
        in_any = np.zeros(n, dtype=bool)
        for _ in range(config.num_layers):
            members = np.flatnonzero(_nonempty_mask(pool_rng, n, config.template_fill))
            templates.append(members)
            in_any[members] = True
        quiet = np.flatnonzero(~in_any)
        if quiet.size == 0:
            quiet = np.arange(n)
        # Rare channels consume this permutation in disjoint chunks, so no
        # sample hosts two rare channels unless the quiet pool wraps.
        quiet_order = pool_rng.permutation(quiet)

    dominant = config.dominant_layer
    if config.scenario == "dominant-layer" and dominant is None:
        dominant = config.num_layers // 2

    magnitudes = []
    norms = []
    for l, d in enumerate(config.layer_dims):
        rng = np.random.default_rng(layer_seeds[l])
        layer = np.abs(rng.normal(config.body_mean, config.body_std, (d, n)))

        num_planted = math.ceil(config.outlier_fraction * d)
        planted = np.sort(rng.choice(d, size=num_planted, replace=False))

        boosted_layer = config.scenario == "dominant-layer" and l == dominant
        for c in planted:
            boost = 1.0
            if boosted_layer and rng.random() < config.dominant_boost_fraction:
                boost = config.dominant_boost
            if config.scenario == "redundant-pool" and rng.random() < config.redundancy:
                # Core channel: thinned copy of the layer template.
                members = templates[l]
                mask = _nonempty_mask(rng, members.size, config.template_fire_prob)
                fire_at = members[mask]
                layer[c, fire_at] = _fire(rng, config.body_mean, config.body_std,
                                          m_lo, m_lo + _CORE_BAND_HI * span, fire_at.size)
            elif config.scenario == "redundant-pool":
                # Rare channel: one or two dedicated quiet samples, high band.
                count = int(rng.integers(1, config.rare_fire_max + 1))
                picks = [quiet_order[(quiet_cursor + j) % quiet_order.size] for j in range(count)]
                quiet_cursor += count
                fire_at = np.unique(picks)
                layer[c, fire_at] = _fire(rng, config.body_mean, config.body_std,
                                          m_lo + _RARE_BAND_LO * span, m_hi, fire_at.size)
            else:
                fire_at = np.flatnonzero(_nonempty_mask(rng, n, config.activation_sparsity))
                layer[c, fire_at] = _fire(rng, config.body_mean, config.body_std,
                                          m_lo * boost, m_hi * boost, fire_at.size)

        magnitudes.append(layer.astype(np.float32))
        norms.append(np.abs(rng.normal(1.0, 0.25, d)).astype(np.float32))

    perplexities = pool_rng.lognormal(mean=1.5, sigma=0.4, size=n).astype(np.float32)
    return ActivationProfile(
        magnitudes=tuple(magnitudes),
        column_norms=tuple(norms),
        perplexities=perplexities,
    )


def measured_outlier_fraction(profile: ActivationProfile, k_sigma: float = 6.0) -> float:
    """Fraction of (layer, channel) pairs that are outliers at the given k."""
    model = build_outlier_model(profile, compute_thresholds(profile, k_sigma))
    return model.num_channels / sum(profile.layer_dims)


def planted_channel_count(config: PoolConfig) -> int:
    """Number of channels the generator plants across all layers."""
    return sum(math.ceil(config.outlier_fraction * d) for d in config.layer_dims)


def config_from_mapping(base: PoolConfig | None, mapping: dict) -> PoolConfig:
    """Build a PoolConfig from key=value style settings over an optional base.

    Accepts the field names of PoolConfig; layer_dims may be a comma string
    like "64,64".  Used by the CLI's --config file support.
    """
    kwargs = {}
    fields = {f.name for f in PoolConfig.__dataclass_fields__.values()}
    for key, raw in mapping.items():
        if key not in fields:
            raise ValueError(f"unknown pool config key {key!r}")
        if key == "layer_dims":
            if isinstance(raw, str):
                raw = tuple(int(x) for x in raw.replace(" ", "").split(",") if x)
            kwargs[key] = tuple(int(x) for x in raw)
        elif key == "magnitude_range":
            if isinstance(raw, str):
                raw = tuple(float(x) for x in raw.replace(" ", "").split(",") if x)
            kwargs[key] = (float(raw[0]), float(raw[1]))
        elif key == "scenario":
            kwargs[key] = str(raw)
        elif key in ("num_samples", "seed", "rare_fire_max"):
            kwargs[key] = int(raw)
        elif key == "dominant_layer":
            kwargs[key] = None if raw in (None, "", "none") else int(raw)
        else:
            kwargs[key] = float(raw)
    if base is None:
        return PoolConfig(**kwargs)
    return replace(base, **kwargs)
