"""Output-script classification and OP_RETURN payload extraction."""

from __future__ import annotations

import enum
from dataclasses import dataclass

from .errors import NotNullData, TruncatedPush

OP_0 = 0x00
OP_PUSHDATA1 = 0x4C
OP_PUSHDATA2 = 0x4D
OP_PUSHDATA4 = 0x4E
OP_1NEGATE = 0x4F
OP_1 = 0x51
OP_16 = 0x60
OP_RETURN = 0x6A
OP_DUP = 0x76
OP_EQUALVERIFY = 0x88
OP_HASH160 = 0xA9
OP_CHECKSIG = 0xAC

_PUSHDATA_WIDTH = {OP_PUSHDATA1: 1, OP_PUSHDATA2: 2, OP_PUSHDATA4: 4}


class ScriptClass(enum.Enum):
    NULL_DATA = "NullData"
    PAY_TO_PUBKEY_HASH = "PayToPubkeyHash"
    OTHER = "Other"


def classify_script(out_script: bytes) -> ScriptClass:
    if out_script[:1] == bytes([OP_RETURN]):
        return ScriptClass.NULL_DATA
    if (len(out_script) == 25
            and out_script[:3] == bytes([OP_DUP, OP_HASH160, 20])
            and out_script[23:] == bytes([OP_EQUALVERIFY, OP_CHECKSIG])):
        return ScriptClass.PAY_TO_PUBKEY_HASH
    return ScriptClass.OTHER


@dataclass(frozen=True)
class OpReturnPayload:
    data: bytes
    push_count: int
    nonpush_opcodes_present: bool
    script_length: int
    # a push declared more bytes than the script holds; data stops at the defect
    malformed: bool = False


def extract_opreturn_payload(out_script: bytes, strict: bool = False) -> OpReturnPayload:
    """Concatenate the bytes pushed after the leading OP_RETURN.

    Opcode bytes never reach ``data``. Small-integer opcodes (OP_0 through
    OP_16, OP_1NEGATE) and any other non-push opcode contribute nothing
    and set ``nonpush_opcodes_present``. A push that overruns the script
    yields the bytes gathered so far with ``malformed`` set, or raises
    :class:`TruncatedPush` when ``strict``.
    """
    if classify_script(out_script) is not ScriptClass.NULL_DATA:
        raise NotNullData("script does not begin with OP_RETURN")

    chunks = []
    pushes = 0
    nonpush = False
    pos, end = 1, len(out_script)
    while pos < end:
        op = out_script[pos]
        pos += 1
        if 0x01 <= op <= 0x4B:
            length = op
        elif op in _PUSHDATA_WIDTH:
            width = _PUSHDATA_WIDTH[op]
            if pos + width > end:
                return _defect(chunks, pushes, nonpush, end, pos - 1, strict)
            length = int.from_bytes(out_script[pos:pos + width], "little")
            pos += width
        else:
            nonpush = True
            continue
        if pos + length > end:
            return _defect(chunks, pushes, nonpush, end, pos, strict)
        chunks.append(out_script[pos:pos + length])
        pushes += 1
        pos += length
    return OpReturnPayload(b"".join(chunks), pushes, nonpush, end)


def _defect(chunks, pushes, nonpush, script_length, offset, strict):
    if strict:
        raise TruncatedPush("push overruns script", offset)
    return OpReturnPayload(b"".join(chunks), pushes, nonpush, script_length, malformed=True)


def nulldata_script(*pushes: bytes) -> bytes:
    """Build ``OP_RETURN <push>...`` using the shortest push encoding for each item."""
    out = bytearray([OP_RETURN])
    for data in pushes:
        n = len(data)
        if n <= 0x4B:
            out.append(n)
        elif n <= 0xFF:
            out += bytes([OP_PUSHDATA1, n])
        elif n <= 0xFFFF:
            out += bytes([OP_PUSHDATA2]) + n.to_bytes(2, "little")
        else:
            out += bytes([OP_PUSHDATA4]) + n.to_bytes(4, "little")
        out += data
    return bytes(out)


@dataclass(frozen=True)
class StandardnessPolicy:
    label: str
    max_payload_bytes: int
    max_script_bytes: int | None = None


POLICY_40 = StandardnessPolicy("40-byte payload", 40)
POLICY_80 = StandardnessPolicy("80-byte payload", 80)
# 80 data bytes + OP_RETURN + OP_PUSHDATA1 + length byte
POLICY_83 = StandardnessPolicy("83-byte script", 80, max_script_bytes=83)

POLICIES = {"40": POLICY_40, "80": POLICY_80, "83": POLICY_83}


def check_standardness(payload: OpReturnPayload, policy: StandardnessPolicy) -> bool:
    if policy.max_script_bytes is not None:
        return payload.script_length <= policy.max_script_bytes
    return len(payload.data) <= policy.max_payload_bytes
