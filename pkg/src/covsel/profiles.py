"""Activation profile data model and the CCAP v1 binary interchange format.

An :class:`ActivationProfile` holds per-layer, per-channel, per-sample
activation magnitudes for a candidate pool, plus optional weight-column
norms and per-sample perplexities.  The per-sample magnitude of a channel
is the maximum absolute activation of that channel over all token
positions of the sample, so thresholding a profile directly answers
"does this sample push this channel above tau".

CCAP v1 layout (all integers and floats little-endian):

    bytes 0-3   ASCII "CCAP"
    u32         version (= 1)
    u32         N  (number of samples)
    u32         L  (number of layers)
    L x u32     layer dims d_0 .. d_{L-1}
    u32         flags (bit0: perplexities present, bit1: column norms
                present, all other bits must be zero)
    per layer   d_l x N float32 magnitudes, channel-major row-major,
                followed by d_l float32 column norms if bit1 is set
    if bit0     N float32 perplexities
    EOF exactly at the computed size; trailing bytes are an error.

Storage is float32; all downstream statistics are accumulated in float64.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass
from typing import BinaryIO

import numpy as np

MAGIC = b"CCAP"
VERSION = 1
FLAG_PERPLEXITIES = 0x1
FLAG_COLUMN_NORMS = 0x2
_KNOWN_FLAGS = FLAG_PERPLEXITIES | FLAG_COLUMN_NORMS


class ProfileValidationError(ValueError):
    """A profile violates an ActivationProfile invariant."""


class CCAPFormatError(ValueError):
    """Byte stream is not a well-formed CCAP v1 file."""


class CCAPTruncationError(CCAPFormatError):
    """Byte stream ends before (or after) the size computed from the header."""


def _as_f32_matrix(a, what: str) -> np.ndarray:
    arr = np.ascontiguousarray(a, dtype=np.float32)
    if arr.ndim != 2:
        raise ProfileValidationError(f"{what} must be 2-D (channels x samples), got shape {arr.shape}")
    arr.flags.writeable = False
    return arr


def _as_f32_vector(a, what: str) -> np.ndarray:
    arr = np.ascontiguousarray(a, dtype=np.float32)
    if arr.ndim != 1:
        raise ProfileValidationError(f"{what} must be 1-D, got shape {arr.shape}")
    arr.flags.writeable = False
    return arr


@dataclass(frozen=True)
class ActivationProfile:
    """Per-sample activation magnitudes of a candidate pool.

    magnitudes[l][c, s] is the max-abs activation of channel c of layer l
    on sample s.  Arrays are float32 and frozen after construction; the
    profile is safe to share read-only across threads.
    """

    magnitudes: tuple[np.ndarray, ...]
    column_norms: tuple[np.ndarray, ...] | None = None
    perplexities: np.ndarray | None = None

    def __post_init__(self):
        # Only uninterpretable inputs are rejected here; every other
        # invariant (dimensions included) is a validate_profile diagnostic.
        mags = tuple(_as_f32_matrix(m, f"layer {l} magnitudes") for l, m in enumerate(self.magnitudes))
        if not mags:
            raise ProfileValidationError("profile must have at least one layer")
        object.__setattr__(self, "magnitudes", mags)

        if self.column_norms is not None:
            norms = tuple(_as_f32_vector(v, f"layer {l} column norms") for l, v in enumerate(self.column_norms))
            object.__setattr__(self, "column_norms", norms)

        if self.perplexities is not None:
            ppl = _as_f32_vector(self.perplexities, "perplexities")
            object.__setattr__(self, "perplexities", ppl)

    @property
    def num_samples(self) -> int:
        return self.magnitudes[0].shape[1]

    @property
    def num_layers(self) -> int:
        return len(self.magnitudes)

    @property
    def layer_dims(self) -> tuple[int, ...]:
        return tuple(m.shape[0] for m in self.magnitudes)

    def norms_or_default(self, layer: int) -> np.ndarray:
        """Column norms of a layer as float64, defaulting to 1.0 when absent."""
        if self.column_norms is None:
            return np.ones(self.layer_dims[layer], dtype=np.float64)
        return self.column_norms[layer].astype(np.float64)

    def __eq__(self, other) -> bool:
        if not isinstance(other, ActivationProfile):
            return NotImplemented
        if self.layer_dims != other.layer_dims or self.num_samples != other.num_samples:
            return False
        if (self.column_norms is None) != (other.column_norms is None):
            return False
        if (self.perplexities is None) != (other.perplexities is None):
            return False
        for a, b in zip(self.magnitudes, other.magnitudes):
            if a.tobytes() != b.tobytes():
                return False
        if self.column_norms is not None:
            for a, b in zip(self.column_norms, other.column_norms):
                if a.tobytes() != b.tobytes():
                    return False
        if self.perplexities is not None:
            if self.perplexities.tobytes() != other.perplexities.tobytes():
                return False
        return True

    __hash__ = None


def validate_profile(profile: ActivationProfile) -> list[str]:
    """Check every profile invariant, one diagnostic per violation kind.

    An empty list means the profile is valid and every downstream module
    accepts it.  Each diagnostic cites the layer/channel/sample coordinates
    of the first violation of its kind.
    """
    diags: list[str] = []
    n = profile.num_samples
    if n < 1:
        diags.append("profile must have at least one sample (N >= 1)")
    for l, m in enumerate(profile.magnitudes):
        if m.shape[0] < 1:
            diags.append(f"layer {l}: layer dim must be >= 1")
            break
    for l, m in enumerate(profile.magnitudes):
        if m.shape[1] != n:
            diags.append(f"layer {l}: sample count {m.shape[1]} != layer 0 sample count {n}")
            break
    if profile.column_norms is not None:
        if len(profile.column_norms) != profile.num_layers:
            diags.append(
                f"column_norms covers {len(profile.column_norms)} layers, profile has {profile.num_layers}"
            )
        else:
            for l, v in enumerate(profile.column_norms):
                if v.shape[0] != profile.magnitudes[l].shape[0]:
                    diags.append(
                        f"layer {l}: {v.shape[0]} column norms for {profile.magnitudes[l].shape[0]} channels"
                    )
                    break
    if profile.perplexities is not None and profile.perplexities.shape[0] != n:
        diags.append(f"perplexities length {profile.perplexities.shape[0]} != N {n}")
    if diags:
        return diags  # value checks below assume coherent shapes

    nonfinite_seen = negative_seen = False
    for l, m in enumerate(profile.magnitudes):
        if not nonfinite_seen:
            bad = np.argwhere(~np.isfinite(m))
            if bad.size:
                c, s = bad[0]
                diags.append(f"non-finite magnitude at (layer={l}, channel={c}, sample={s})")
                nonfinite_seen = True
        if not negative_seen:
            bad = np.argwhere(m < 0)
            if bad.size:
                c, s = bad[0]
                diags.append(f"negative magnitude at (layer={l}, channel={c}, sample={s})")
                negative_seen = True

    if profile.column_norms is not None:
        nonfinite_seen = negative_seen = False
        for l, v in enumerate(profile.column_norms):
            if not nonfinite_seen:
                bad = np.argwhere(~np.isfinite(v))
                if bad.size:
                    diags.append(f"non-finite column norm at (layer={l}, channel={bad[0][0]})")
                    nonfinite_seen = True
            if not negative_seen:
                bad = np.argwhere(v < 0)
                if bad.size:
                    diags.append(f"negative column norm at (layer={l}, channel={bad[0][0]})")
                    negative_seen = True

    if profile.perplexities is not None:
        ppl = profile.perplexities
        bad = np.argwhere(~np.isfinite(ppl))
        if bad.size:
            diags.append(f"non-finite perplexity at sample {bad[0][0]}")
        bad = np.argwhere(ppl <= 0)
        if bad.size:
            diags.append(f"non-positive perplexity at sample {bad[0][0]}")

    return diags


def _require_valid(profile: ActivationProfile) -> None:
    diags = validate_profile(profile)
    if diags:
        raise ProfileValidationError("; ".join(diags))


def expected_file_size(layer_dims, num_samples: int, has_norms: bool, has_ppl: bool) -> int:
    """Exact CCAP v1 byte size implied by a header."""
    size = 4 + 4 + 4 + 4 + 4 * len(layer_dims) + 4
    for d in layer_dims:
        size += 4 * d * num_samples
        if has_norms:
            size += 4 * d
    if has_ppl:
        size += 4 * num_samples
    return size


def write_profile(profile: ActivationProfile, sink: BinaryIO) -> int:
    """Serialize a profile in CCAP v1; returns the number of bytes written.

    The profile is validated first and rejected before anything is written.
    """
    _require_valid(profile)

    n = profile.num_samples
    dims = profile.layer_dims
    flags = 0
    if profile.perplexities is not None:
        flags |= FLAG_PERPLEXITIES
    if profile.column_norms is not None:
        flags |= FLAG_COLUMN_NORMS

    written = 0
    header = struct.pack(f"<4sIII{len(dims)}II", MAGIC, VERSION, n, len(dims), *dims, flags)
    written += sink.write(header)
    for l, m in enumerate(profile.magnitudes):
        written += sink.write(np.ascontiguousarray(m, dtype="<f4").tobytes())
        if profile.column_norms is not None:
            written += sink.write(np.ascontiguousarray(profile.column_norms[l], dtype="<f4").tobytes())
    if profile.perplexities is not None:
        written += sink.write(np.ascontiguousarray(profile.perplexities, dtype="<f4").tobytes())
    return written


def _read_exact(source: BinaryIO, count: int, what: str) -> bytes:
    data = source.read(count)
    if len(data) != count:
        raise CCAPTruncationError(f"truncated while reading {what}: wanted {count} bytes, got {len(data)}")
    return data


def read_profile(source: BinaryIO) -> ActivationProfile:
    """Parse and validate a CCAP v1 byte stream.

    Raises CCAPFormatError on bad magic/version/flags, CCAPTruncationError
    when the payload does not match the header's size arithmetic, and
    ProfileValidationError when the decoded values violate invariants.
    """
    magic = _read_exact(source, 4, "magic")
    if magic != MAGIC:
        raise CCAPFormatError(f"bad magic {magic!r}, expected {MAGIC!r}")
    (version,) = struct.unpack("<I", _read_exact(source, 4, "version"))
    if version != VERSION:
        raise CCAPFormatError(f"unsupported CCAP version {version}")
    n, num_layers = struct.unpack("<II", _read_exact(source, 8, "sample/layer counts"))
    if n < 1:
        raise CCAPFormatError("header declares zero samples")
    if num_layers < 1:
        raise CCAPFormatError("header declares zero layers")
    dims = struct.unpack(f"<{num_layers}I", _read_exact(source, 4 * num_layers, "layer dims"))
    if any(d < 1 for d in dims):
        raise CCAPFormatError("header declares a zero-size layer")
    (flags,) = struct.unpack("<I", _read_exact(source, 4, "flags"))
    if flags & ~_KNOWN_FLAGS:
        raise CCAPFormatError(f"unknown flag bits 0x{flags & ~_KNOWN_FLAGS:x}")
    has_ppl = bool(flags & FLAG_PERPLEXITIES)
    has_norms = bool(flags & FLAG_COLUMN_NORMS)

    magnitudes = []
    norms = [] if has_norms else None
    for l, d in enumerate(dims):
        raw = _read_exact(source, 4 * d * n, f"layer {l} magnitudes")
        magnitudes.append(np.frombuffer(raw, dtype="<f4").reshape(d, n))
        if has_norms:
            raw = _read_exact(source, 4 * d, f"layer {l} column norms")
            norms.append(np.frombuffer(raw, dtype="<f4"))
    ppl = None
    if has_ppl:
        ppl = np.frombuffer(_read_exact(source, 4 * n, "perplexities"), dtype="<f4")

    if source.read(1) != b"":
        raise CCAPTruncationError("trailing bytes after the computed end of file")

    profile = ActivationProfile(
        magnitudes=tuple(magnitudes),
        column_norms=tuple(norms) if has_norms else None,
        perplexities=ppl,
    )
    _require_valid(profile)
    return profile


def save_profile(profile: ActivationProfile, path) -> int:
    with open(path, "wb") as f:
        return write_profile(profile, f)


def load_profile(path) -> ActivationProfile:
    with open(path, "rb") as f:
        return read_profile(f)
