"""Card identifier parsing, validation, and canonical round trips."""

import binascii

import pytest
from hypothesis import given
from hypothesis import strategies as st

from ams.errors import InvalidHex, InvalidLength
from ams.tagid import (
    ALLOWED_LENGTHS,
    CanonicalTagId,
    TagKind,
    canonical_hex,
    from_hex,
    parse_canonical,
    parse_tag,
)

# Reference identifiers: a 4-byte Type-A value and an 8-byte Felica value.
# Expected hex computed independently via binascii.
NFCA_RAW = bytes([0x01, 0x2E, 0x3D, 0x4C])
NFCF_RAW = bytes([0x01, 0x10, 0x03, 0x10, 0x8B, 0x34, 0x8C, 0xD6])


def test_parse_tag_nfca_reference_vector():
    tag = parse_tag(TagKind.NFCA, NFCA_RAW)
    assert tag.hex == binascii.hexlify(NFCA_RAW).decode().upper() == "012E3D4C"
    assert tag.kind is TagKind.NFCA


def test_parse_tag_nfcf_reference_vector():
    tag = parse_tag(TagKind.NFCF, NFCF_RAW)
    assert tag.hex == binascii.hexlify(NFCF_RAW).decode().upper() == "011003108B348CD6"


def test_parse_tag_rejects_empty():
    with pytest.raises(InvalidLength):
        parse_tag(TagKind.NFCA, b"")


@pytest.mark.parametrize("kind", list(TagKind))
def test_parse_tag_rejects_every_length_outside_whitelist(kind):
    for length in range(0, 33):
        raw = bytes(length)
        if length in ALLOWED_LENGTHS[kind]:
            assert parse_tag(kind, raw).raw == raw
        else:
            with pytest.raises(InvalidLength):
                parse_tag(kind, raw)


def test_from_hex_normalizes_case():
    tag = from_hex(TagKind.NFCA, "012e3d4c")
    assert tag == parse_tag(TagKind.NFCA, NFCA_RAW)
    assert tag.hex == "012E3D4C"


def test_from_hex_wrong_length():
    with pytest.raises(InvalidLength):
        from_hex(TagKind.NFCF, "0110")


def test_from_hex_rejects_non_hex():
    with pytest.raises(InvalidHex):
        from_hex(TagKind.NFCA, "ZZ")
    with pytest.raises(InvalidHex):
        from_hex(TagKind.NFCA, "012E 3D4C")  # whitespace is not hex
    with pytest.raises(InvalidHex):
        from_hex(TagKind.NFCA, "012")  # odd length


def test_canonical_hex_zero_bytes():
    assert canonical_hex(CanonicalTagId(TagKind.NFCA, bytes(4))) == "00000000"


def test_canonical_hex_felica_vector():
    assert canonical_hex(parse_tag(TagKind.NFCF, NFCF_RAW)) == "011003108B348CD6"


def test_canonical_string_form():
    assert str(parse_tag(TagKind.NFCF, NFCF_RAW)) == "NFCF:011003108B348CD6"
    assert parse_canonical("NFCF:011003108B348CD6") == parse_tag(TagKind.NFCF, NFCF_RAW)
    assert parse_canonical("nfca:012e3d4c") == parse_tag(TagKind.NFCA, NFCA_RAW)


def test_parse_canonical_rejects_garbage():
    with pytest.raises(InvalidHex):
        parse_canonical("012E3D4C")  # no kind prefix
    with pytest.raises(InvalidHex):
        parse_canonical("NFCX:0011")


def test_same_hex_different_kind_are_distinct():
    a = from_hex(TagKind.NFCA, "00" * 10)
    f = from_hex(TagKind.NFCF, "00" * 8)
    assert a != f
    assert a.hex != f.hex or a.kind != f.kind


@st.composite
def valid_tags(draw):
    kind = draw(st.sampled_from(list(TagKind)))
    length = draw(st.sampled_from(ALLOWED_LENGTHS[kind]))
    raw = draw(st.binary(min_size=length, max_size=length))
    return parse_tag(kind, raw)


@given(valid_tags())
def test_round_trip_law(tag):
    assert from_hex(tag.kind, canonical_hex(tag)) == tag
    assert canonical_hex(from_hex(tag.kind, tag.hex.lower())) == tag.hex
    assert parse_canonical(tag.canonical()) == tag


@given(valid_tags())
def test_canonical_hex_alphabet(tag):
    assert set(tag.hex) <= set("0123456789ABCDEF")
    assert len(tag.hex) == 2 * len(tag.raw)
