"""Bitcoin block and transaction (de)serialization.

Hashes are kept in wire order throughout; use :func:`hash_to_hex` to get
the byte-reversed form shown by block explorers.
"""

from __future__ import annotations

import hashlib
import logging
import struct
from dataclasses import dataclass, field

from .errors import (
    MalformedScriptLength,
    NonCanonical,
    TrailingBytes,
    Truncated,
)

log = logging.getLogger(__name__)

HEADER_SIZE = 80
MAX_MONEY = 21_000_000 * 100_000_000

_HEADER = struct.Struct("<i32s32sIII")


def double_sha256(data: bytes) -> bytes:
    return hashlib.sha256(hashlib.sha256(data).digest()).digest()


def hash_to_hex(h: bytes) -> str:
    return h[::-1].hex()


def hex_to_hash(s: str) -> bytes:
    return bytes.fromhex(s)[::-1]


# -- compact size -----------------------------------------------------------

def compact_size_len(value: int) -> int:
    if value < 0xFD:
        return 1
    if value <= 0xFFFF:
        return 3
    if value <= 0xFFFF_FFFF:
        return 5
    return 9


def write_compact_size(value: int) -> bytes:
    if value < 0 or value > 0xFFFF_FFFF_FFFF_FFFF:
        raise ValueError(f"compact size out of range: {value}")
    if value < 0xFD:
        return bytes([value])
    if value <= 0xFFFF:
        return b"\xfd" + struct.pack("<H", value)
    if value <= 0xFFFF_FFFF:
        return b"\xfe" + struct.pack("<I", value)
    return b"\xff" + struct.pack("<Q", value)


def read_compact_size(buf: bytes, offset: int = 0, strict: bool = False) -> tuple[int, int]:
    """Decode a compact-size integer at ``offset``.

    Returns ``(value, consumed)``. A value encoded wider than necessary is
    accepted unless ``strict`` is set, in which case :class:`NonCanonical`
    is raised. Callers can detect the non-strict case by comparing
    ``consumed`` with :func:`compact_size_len`.
    """
    if offset >= len(buf):
        raise Truncated("compact size past end of buffer", offset)
    first = buf[offset]
    if first < 0xFD:
        return first, 1
    width = {0xFD: 2, 0xFE: 4, 0xFF: 8}[first]
    end = offset + 1 + width
    if end > len(buf):
        raise Truncated("buffer ends inside compact size", offset)
    value = int.from_bytes(buf[offset + 1:end], "little")
    consumed = 1 + width
    if compact_size_len(value) != consumed:
        if strict:
            raise NonCanonical(f"value {value} encoded in {consumed} bytes", offset)
        log.debug("non-canonical compact size %d at offset %d", value, offset)
    return value, consumed


# -- data types -------------------------------------------------------------

@dataclass(frozen=True)
class TxInput:
    prev_txid: bytes
    prev_output_index: int
    in_script: bytes
    sequence: int
    witness: tuple[bytes, ...] = ()

    def serialize(self) -> bytes:
        return b"".join((
            self.prev_txid,
            struct.pack("<I", self.prev_output_index),
            write_compact_size(len(self.in_script)),
            self.in_script,
            struct.pack("<I", self.sequence),
        ))


@dataclass(frozen=True)
class TxOutput:
    value: int
    out_script: bytes

    def serialize(self) -> bytes:
        return b"".join((
            struct.pack("<Q", self.value),
            write_compact_size(len(self.out_script)),
            self.out_script,
        ))


@dataclass(frozen=True)
class Transaction:
    version: int
    inputs: tuple[TxInput, ...]
    outputs: tuple[TxOutput, ...]
    lock_time: int
    # set when any length prefix used a wider encoding than needed; such
    # transactions re-serialize canonically and so not byte-identically
    noncanonical: bool = field(default=False, compare=False)

    @property
    def has_witness(self) -> bool:
        return any(i.witness for i in self.inputs)

    def serialize(self, include_witness: bool = True) -> bytes:
        segwit = include_witness and self.has_witness
        parts = [struct.pack("<i", self.version)]
        if segwit:
            parts.append(b"\x00\x01")
        parts.append(write_compact_size(len(self.inputs)))
        parts.extend(i.serialize() for i in self.inputs)
        parts.append(write_compact_size(len(self.outputs)))
        parts.extend(o.serialize() for o in self.outputs)
        if segwit:
            for i in self.inputs:
                parts.append(write_compact_size(len(i.witness)))
                for item in i.witness:
                    parts.append(write_compact_size(len(item)))
                    parts.append(item)
        parts.append(struct.pack("<I", self.lock_time))
        return b"".join(parts)

    @property
    def txid(self) -> bytes:
        return double_sha256(self.serialize(include_witness=False))

    @property
    def wtxid(self) -> bytes:
        return double_sha256(self.serialize())

    @property
    def size(self) -> int:
        return len(self.serialize())


@dataclass(frozen=True)
class BlockRecord:
    version: int
    prev_block_hash: bytes
    merkle_root: bytes
    timestamp: int
    difficulty_bits: int
    nonce: int
    transactions: tuple[Transaction, ...]
    height: int | None = None

    def header_bytes(self) -> bytes:
        return _HEADER.pack(self.version, self.prev_block_hash, self.merkle_root,
                            self.timestamp, self.difficulty_bits, self.nonce)

    @property
    def block_hash(self) -> bytes:
        return double_sha256(self.header_bytes())

    def serialize(self) -> bytes:
        return b"".join((
            self.header_bytes(),
            write_compact_size(len(self.transactions)),
            *(tx.serialize() for tx in self.transactions),
        ))


# -- parsing ----------------------------------------------------------------

class _Reader:
    __slots__ = ("buf", "pos", "noncanonical")

    def __init__(self, buf: bytes, pos: int):
        self.buf = buf
        self.pos = pos
        self.noncanonical = False

    def take(self, n: int, what: str) -> bytes:
        end = self.pos + n
        if end > len(self.buf):
            raise Truncated(f"buffer ends inside {what}", self.pos)
        chunk = self.buf[self.pos:end]
        self.pos = end
        return chunk

    def uint32(self, what: str) -> int:
        return struct.unpack("<I", self.take(4, what))[0]

    def compact(self) -> int:
        value, consumed = read_compact_size(self.buf, self.pos)
        if consumed != compact_size_len(value):
            self.noncanonical = True
        self.pos += consumed
        return value

    def script(self, what: str) -> bytes:
        start = self.pos
        length = self.compact()
        if self.pos + length > len(self.buf):
            raise MalformedScriptLength(
                f"{what} declares {length} bytes, {len(self.buf) - self.pos} remain", start)
        return self.take(length, what)


def _parse_tx(r: _Reader) -> Transaction:
    version = struct.unpack("<i", r.take(4, "tx version"))[0]
    segwit = False
    # marker 0x00 cannot be a valid input count for a block transaction
    if r.pos + 1 < len(r.buf) and r.buf[r.pos] == 0x00 and r.buf[r.pos + 1] != 0x00:
        r.take(2, "witness marker")
        segwit = True

    raw_inputs = []
    for _ in range(r.compact()):
        prev = r.take(32, "prev txid")
        index = r.uint32("prev index")
        in_script = r.script("in-script")
        sequence = r.uint32("sequence")
        raw_inputs.append((prev, index, in_script, sequence))

    outputs = []
    for _ in range(r.compact()):
        value = struct.unpack("<Q", r.take(8, "output value"))[0]
        outputs.append(TxOutput(value, r.script("out-script")))

    witnesses = [()] * len(raw_inputs)
    if segwit:
        witnesses = []
        for _ in raw_inputs:
            witnesses.append(tuple(r.script("witness item") for _ in range(r.compact())))

    lock_time = r.uint32("lock time")
    inputs = tuple(TxInput(*fields, witness=w) for fields, w in zip(raw_inputs, witnesses))
    return Transaction(version, inputs, tuple(outputs), lock_time, noncanonical=r.noncanonical)


def parse_transaction(buf: bytes, offset: int = 0) -> tuple[Transaction, int]:
    """Parse one transaction at ``offset``; return it with the bytes consumed."""
    r = _Reader(buf, offset)
    tx = _parse_tx(r)
    return tx, r.pos - offset


def parse_header(buf: bytes, offset: int = 0) -> tuple:
    if offset + HEADER_SIZE > len(buf):
        raise Truncated("buffer ends inside block header", offset)
    return _HEADER.unpack_from(buf, offset)


def parse_block(buf: bytes, height: int | None = None) -> BlockRecord:
    """Parse exactly one serialized block."""
    version, prev, merkle, timestamp, bits, nonce = parse_header(buf)
    r = _Reader(buf, HEADER_SIZE)
    count = r.compact()
    txs = []
    for _ in range(count):
        r.noncanonical = False
        txs.append(_parse_tx(r))
    if r.pos != len(buf):
        raise TrailingBytes(f"{len(buf) - r.pos} bytes after last transaction", r.pos)
    return BlockRecord(version, prev, merkle, timestamp, bits, nonce, tuple(txs), height)


# -- construction helpers ---------------------------------------------------

def merkle_root(txids: list[bytes]) -> bytes:
    if not txids:
        return bytes(32)
    level = list(txids)
    while len(level) > 1:
        if len(level) % 2:
            level.append(level[-1])
        level = [double_sha256(level[i] + level[i + 1]) for i in range(0, len(level), 2)]
    return level[0]


def coinbase_transaction(height: int = 0, value: int = 50 * 100_000_000,
                         out_script: bytes = b"\x51") -> Transaction:
    tag = height.to_bytes(4, "little")
    return Transaction(
        version=1,
        inputs=(TxInput(bytes(32), 0xFFFF_FFFF, b"\x04" + tag, 0xFFFF_FFFF),),
        outputs=(TxOutput(value, out_script),),
        lock_time=0,
    )


def make_block(transactions, timestamp: int, prev_block_hash: bytes = bytes(32),
               version: int = 1, bits: int = 0x1D00FFFF, nonce: int = 0,
               height: int | None = None) -> BlockRecord:
    """Assemble a block with a correct merkle root. Proof of work is not checked anywhere."""
    txs = tuple(transactions)
    return BlockRecord(version, prev_block_hash, merkle_root([t.txid for t in txs]),
                       timestamp, bits, nonce, txs, height)


# in-script sized so the 1-in/1-out empty OP_RETURN transaction is 156 bytes:
# a 72-byte signature push plus a 21-byte push (73 + 22 = 95 bytes)
_EMPTY_TX_IN_SCRIPT = b"\x48" + b"\x30" + bytes(70) + b"\x01" + b"\x15" + bytes(21)


def empty_opreturn_transaction(prev_txid: bytes = b"\x11" * 32) -> Transaction:
    return Transaction(
        version=1,
        inputs=(TxInput(prev_txid, 0, _EMPTY_TX_IN_SCRIPT, 0xFFFF_FFFF),),
        outputs=(TxOutput(0, b"\x6a"),),
        lock_time=0,
    )
