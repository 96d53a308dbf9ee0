"""Contactless-card identifier parsing and canonicalization.

Every other module keys students by the canonical ``"<KIND>:<HEX>"``
string produced here, so validation and normalization live in one place.
"""

from __future__ import annotations

import enum
import re
from dataclasses import dataclass

from .errors import InvalidHex, InvalidLength


class TagKind(enum.Enum):
    """Card families accepted at roll call."""

    NFCA = "NFCA"
    NFCF = "NFCF"


# Permitted identifier sizes in bytes. Type-A identifiers come in single,
# double, and triple sizes; Felica identifiers are always 8 bytes.
ALLOWED_LENGTHS: dict[TagKind, tuple[int, ...]] = {
    TagKind.NFCA: (4, 7, 10),
    TagKind.NFCF: (8,),
}

_HEX_RE = re.compile(r"[0-9a-fA-F]*\Z")


@dataclass(frozen=True)
class CanonicalTagId:
    """A validated card identifier; equality and hashing are on (kind, raw)."""

    kind: TagKind
    raw: bytes

    @property
    def hex(self) -> str:
        return self.raw.hex().upper()

    def canonical(self) -> str:
        """Stable "<KIND>:<HEX>" form used in all files and wire messages."""
        return f"{self.kind.value}:{self.hex}"

    def __str__(self) -> str:
        return self.canonical()


def parse_tag(kind: TagKind, raw: bytes) -> CanonicalTagId:
    """Validate a scanned identifier and wrap it in canonical form."""
    allowed = ALLOWED_LENGTHS[kind]
    if len(raw) not in allowed:
        raise InvalidLength(
            f"{kind.value} identifier must be {' or '.join(map(str, allowed))} "
            f"bytes, got {len(raw)}"
        )
    return CanonicalTagId(kind, bytes(raw))


def from_hex(kind: TagKind, hex_str: str) -> CanonicalTagId:
    """Parse a case-insensitive hex identifier into canonical form."""
    if not _HEX_RE.match(hex_str):
        raise InvalidHex(f"not a hexadecimal string: {hex_str!r}")
    if len(hex_str) % 2:
        raise InvalidHex(f"odd-length hex string: {hex_str!r}")
    return parse_tag(kind, bytes.fromhex(hex_str))


def canonical_hex(tag: CanonicalTagId) -> str:
    """Uppercase hex encoding of the identifier; injective per kind."""
    return tag.hex


def parse_canonical(text: str) -> CanonicalTagId:
    """Parse the "<KIND>:<HEX>" form back into a tag."""
    kind_name, sep, hex_part = text.partition(":")
    if not sep:
        raise InvalidHex(f"expected KIND:HEX, got {text!r}")
    try:
        kind = TagKind(kind_name.upper())
    except ValueError:
        raise InvalidHex(f"unknown card kind {kind_name!r}") from None
    return from_hex(kind, hex_part)
