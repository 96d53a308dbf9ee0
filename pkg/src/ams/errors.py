"""Domain error types.

Every error carries a one-line human-readable message; the gateway maps
them to HTTP statuses and the CLI prints them verbatim.
"""


class AmsError(Exception):
    """Base class for all errors raised by this package."""


# --- tag identifiers ---

class InvalidLength(AmsError):
    """Identifier byte length is not permitted for its card kind."""


class InvalidHex(AmsError):
    """String is not a valid hexadecimal identifier."""


# --- roster ---

class UnknownLecture(AmsError):
    """No lecture registered under this id."""


class DuplicateLecture(AmsError):
    """A lecture with this id already exists."""


class MalformedCsv(AmsError):
    """Roster CSV structure is unparseable (bad header or framing)."""


class UnknownStudent(AmsError):
    """No student registered under this id."""


class TagAlreadyBound(AmsError):
    """Card is already bound to a different student."""


class StudentAlreadyBound(AmsError):
    """Student already holds a different card."""


# --- ledger ---

class MalformedInput(AmsError):
    """A caller-supplied value (date, session key, timestamp) is malformed."""


class UnknownSession(AmsError):
    """No session exists under this (lecture, date, device) key."""


class SessionAlreadyOpen(AmsError):
    """A session already exists for this (lecture, date, device) key."""


class SessionClosed(AmsError):
    """Operation requires an open session but it is closed."""


# --- sync ---

class KeyMismatch(AmsError):
    """Attempt to join two records with different identity keys."""


class TokenMismatch(AmsError):
    """Pairing tokens differ; exchange refused."""


class VersionMismatch(AmsError):
    """Peer speaks a different protocol version."""


class TransportFailure(AmsError):
    """Message channel timed out, closed, or delivered garbage."""


class MalformedScenario(AmsError):
    """Network-simulation script is invalid."""


# --- store ---

class NoSnapshot(AmsError):
    """No snapshot has been saved yet."""


class CorruptSnapshot(AmsError):
    """Snapshot failed checksum or parse validation."""


class ChecksumMismatch(AmsError):
    """Backup archive payload does not match its checksum."""


class CorruptFile(AmsError):
    """Exchange file failed structural, version, or checksum validation."""


class IoFailure(AmsError):
    """Filesystem read/write failed."""


# --- outreach ---

class NoMatchingAbsence(AmsError):
    """Reason submitted for a (lecture, student, date) with no absent record."""
