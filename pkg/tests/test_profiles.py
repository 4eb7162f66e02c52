"""Profile model and CCAP v1 format tests."""

import io
import struct

import numpy as np
import pytest

from covsel import (
    ActivationProfile,
    CCAPFormatError,
    CCAPTruncationError,
    ProfileValidationError,
    read_profile,
    validate_profile,
    write_profile,
)


def roundtrip(profile: ActivationProfile) -> ActivationProfile:
    buf = io.BytesIO()
    write_profile(profile, buf)
    buf.seek(0)
    return read_profile(buf)


def bit_equal(a: ActivationProfile, b: ActivationProfile) -> bool:
    if a.layer_dims != b.layer_dims or a.num_samples != b.num_samples:
        return False
    if any(x.tobytes() != y.tobytes() for x, y in zip(a.magnitudes, b.magnitudes)):
        return False
    if (a.column_norms is None) != (b.column_norms is None):
        return False
    if a.column_norms is not None:
        if any(x.tobytes() != y.tobytes() for x, y in zip(a.column_norms, b.column_norms)):
            return False
    if (a.perplexities is None) != (b.perplexities is None):
        return False
    if a.perplexities is not None and a.perplexities.tobytes() != b.perplexities.tobytes():
        return False
    return True


def test_minimal_profile_is_28_bytes():
    # magic + version + N + L + d_0 + flags + one float32
    profile = ActivationProfile(magnitudes=(np.array([[0.0]], dtype=np.float32),))
    buf = io.BytesIO()
    assert write_profile(profile, buf) == 28
    assert len(buf.getvalue()) == 28


def test_golden_bytes_match_independent_packing():
    mags = np.array([[1.0, 2.0], [0.5, 0.25]], dtype=np.float32)
    norms = np.array([1.5, 2.5], dtype=np.float32)
    ppl = np.array([3.0, 4.0], dtype=np.float32)
    profile = ActivationProfile(magnitudes=(mags,), column_norms=(norms,), perplexities=ppl)

    expected = struct.pack("<4sI", b"CCAP", 1)
    expected += struct.pack("<II", 2, 1)       # N, L
    expected += struct.pack("<I", 2)           # d_0
    expected += struct.pack("<I", 0b11)        # ppl + norms flags
    expected += struct.pack("<4f", 1.0, 2.0, 0.5, 0.25)  # channel-major row-major
    expected += struct.pack("<2f", 1.5, 2.5)
    expected += struct.pack("<2f", 3.0, 4.0)

    buf = io.BytesIO()
    write_profile(profile, buf)
    assert buf.getvalue() == expected


def test_roundtrip_bit_exact(t1_profile):
    assert bit_equal(roundtrip(t1_profile), t1_profile)
    assert roundtrip(t1_profile) == t1_profile


def test_roundtrip_without_optional_blocks():
    profile = ActivationProfile(
        magnitudes=(np.random.default_rng(0).random((3, 4)).astype(np.float32),)
    )
    back = roundtrip(profile)
    assert back.column_norms is None and back.perplexities is None
    assert bit_equal(back, profile)


def test_nan_magnitude_rejected_before_writing():
    profile = ActivationProfile(magnitudes=(np.array([[np.nan]], dtype=np.float32),))
    buf = io.BytesIO()
    with pytest.raises(ProfileValidationError):
        write_profile(profile, buf)
    assert buf.getvalue() == b""


def test_bad_magic_is_format_error(t1_profile):
    buf = io.BytesIO()
    write_profile(t1_profile, buf)
    data = bytearray(buf.getvalue())
    data[:4] = b"NOPE"
    with pytest.raises(CCAPFormatError):
        read_profile(io.BytesIO(bytes(data)))


def test_unsupported_version_rejected(t1_profile):
    buf = io.BytesIO()
    write_profile(t1_profile, buf)
    data = bytearray(buf.getvalue())
    data[4:8] = struct.pack("<I", 2)
    with pytest.raises(CCAPFormatError):
        read_profile(io.BytesIO(bytes(data)))


def test_unknown_flag_bits_rejected():
    header = struct.pack("<4sIIIII", b"CCAP", 1, 1, 1, 1, 0b100)
    with pytest.raises(CCAPFormatError):
        read_profile(io.BytesIO(header + b"\x00" * 4))


def test_header_claims_more_samples_than_payload():
    # N=1000 declared, payload holds 10 floats.
    header = struct.pack("<4sIIIII", b"CCAP", 1, 1000, 1, 1, 0)
    payload = np.zeros(10, dtype="<f4").tobytes()
    with pytest.raises(CCAPTruncationError):
        read_profile(io.BytesIO(header + payload))


def test_trailing_bytes_rejected(t1_profile):
    buf = io.BytesIO()
    write_profile(t1_profile, buf)
    with pytest.raises(CCAPTruncationError):
        read_profile(io.BytesIO(buf.getvalue() + b"\x00"))


def test_every_truncation_point_errors_cleanly(t1_profile):
    buf = io.BytesIO()
    write_profile(t1_profile, buf)
    data = buf.getvalue()
    for cut in range(0, len(data), 97):
        with pytest.raises((CCAPFormatError, CCAPTruncationError)):
            read_profile(io.BytesIO(data[:cut]))


def test_validate_all_zero_profile_is_clean():
    profile = ActivationProfile(magnitudes=(np.zeros((3, 4), dtype=np.float32),))
    assert validate_profile(profile) == []


def test_validate_reports_first_negative_with_coordinates():
    m = np.zeros((3, 6), dtype=np.float32)
    m[2, 5] = -1.0
    diags = validate_profile(ActivationProfile(magnitudes=(m,)))
    assert len(diags) == 1
    assert "layer=0" in diags[0] and "channel=2" in diags[0] and "sample=5" in diags[0]


def test_validate_reports_perplexity_length_mismatch():
    profile = ActivationProfile(
        magnitudes=(np.ones((2, 4), dtype=np.float32),),
        perplexities=np.ones(3, dtype=np.float32),
    )
    diags = validate_profile(profile)
    assert len(diags) == 1 and "perplexities length 3" in diags[0]


def test_validate_reports_nonpositive_perplexity():
    profile = ActivationProfile(
        magnitudes=(np.ones((2, 2), dtype=np.float32),),
        perplexities=np.array([1.0, 0.0], dtype=np.float32),
    )
    assert any("non-positive perplexity" in d for d in validate_profile(profile))


def test_validate_reports_norm_length_mismatch():
    profile = ActivationProfile(
        magnitudes=(np.ones((3, 2), dtype=np.float32),),
        column_norms=(np.ones(2, dtype=np.float32),),
    )
    assert any("column norms" in d for d in validate_profile(profile))


def test_negative_zero_round_trips_and_validates():
    m = np.array([[np.float32(-0.0)]], dtype=np.float32)
    profile = ActivationProfile(magnitudes=(m,))
    assert validate_profile(profile) == []  # -0.0 >= 0
    back = roundtrip(profile)
    assert back.magnitudes[0].tobytes() == m.tobytes()


def test_roundtrip_preserves_extreme_float32_values():
    vals = np.array(
        [[0.0, np.float32(1e-45), np.float32(3.4e38), np.float32(1.1754944e-38)]],
        dtype=np.float32,
    )
    profile = ActivationProfile(magnitudes=(vals,))
    assert bit_equal(roundtrip(profile), profile)
