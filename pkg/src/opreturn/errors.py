"""Exception hierarchy.

Each family maps to its own CLI exit code, see :mod:`opreturn.cli`.
"""


class OpReturnError(Exception):
    pass


# -- decoding ---------------------------------------------------------------

class DecodeError(OpReturnError):
    """Raised for malformed wire-format input."""

    def __init__(self, message, offset=None):
        if offset is not None:
            message = f"{message} (offset {offset})"
        super().__init__(message)
        self.offset = offset


class Truncated(DecodeError):
    pass


class NonCanonical(DecodeError):
    pass


class MalformedScriptLength(DecodeError):
    pass


class TrailingBytes(DecodeError):
    pass


class NotNullData(OpReturnError):
    pass


class TruncatedPush(DecodeError):
    pass


# -- registry ---------------------------------------------------------------

class RegistryError(OpReturnError):
    pass


class CrossProtocolPrefixConflict(RegistryError):
    pass


class DuplicateIdentifier(RegistryError):
    pass


class UnknownCategoryName(RegistryError):
    pass


# -- sources ----------------------------------------------------------------

class SourceError(OpReturnError):
    pass


class BadMagic(SourceError):
    pass


class TruncatedBlock(SourceError):
    pass


class MalformedLine(SourceError):
    def __init__(self, line_no, reason):
        super().__init__(f"line {line_no}: {reason}")
        self.line_no = line_no


class OddLengthHex(MalformedLine):
    pass


# -- rpc --------------------------------------------------------------------

class RpcError(OpReturnError):
    pass


class RpcUnreachable(RpcError):
    pass


class RpcErrorResponse(RpcError):
    def __init__(self, code, message):
        super().__init__(f"RPC error {code}: {message}")
        self.code = code
        self.rpc_message = message


class HeightOutOfRange(RpcErrorResponse):
    pass


# -- store ------------------------------------------------------------------

class StoreError(OpReturnError):
    pass


class StoreCorrupt(StoreError):
    def __init__(self, message, offset):
        super().__init__(f"{message} at byte offset {offset}")
        self.offset = offset


# -- stats ------------------------------------------------------------------

class StatsError(OpReturnError):
    pass


class MissingTimestamp(StatsError):
    pass


class EmptyInput(StatsError):
    pass


class DegenerateDenominator(StatsError):
    pass
