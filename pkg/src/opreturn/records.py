"""Record types shared by ingestion, classification and statistics.

On disk each record is one JSON object per line. Hashes are written in
explorer (byte-reversed) hex and held in wire order in memory.
"""

from __future__ import annotations

import enum
import string
from dataclasses import dataclass

from .errors import MalformedLine, OddLengthHex
from .wire import hash_to_hex


class Category(enum.Enum):
    ASSETS = "Assets"
    DOCUMENT_NOTARY = "DocumentNotary"
    DIGITAL_ARTS = "DigitalArts"
    OTHER = "Other"
    EMPTY = "Empty"
    UNKNOWN = "Unknown"


PROTOCOL_CATEGORIES = (Category.ASSETS, Category.DOCUMENT_NOTARY,
                       Category.DIGITAL_ARTS, Category.OTHER)

EMPTY = "Empty"
UNKNOWN = "Unknown"


@dataclass(frozen=True)
class OpReturnRecord:
    txid: bytes
    block_hash: bytes
    block_timestamp: int | None
    metadata: bytes
    output_index: int = 0


@dataclass(frozen=True)
class ClassifiedRecord:
    record: OpReturnRecord
    label: str
    category: Category
    matched_identifier: bytes | None = None


_HEX = frozenset(string.hexdigits)


def _hex_field(obj, key, line_no, hash_len=None):
    value = obj.get(key)
    if not isinstance(value, str):
        raise MalformedLine(line_no, f"{key!r} must be a hex string")
    if len(value) % 2:
        raise OddLengthHex(line_no, f"{key!r} has odd length {len(value)}")
    if not _HEX.issuperset(value):
        raise MalformedLine(line_no, f"{key!r} is not hex")
    raw = bytes.fromhex(value)
    if hash_len is not None and len(raw) != hash_len:
        raise MalformedLine(line_no, f"{key!r} must be {hash_len} bytes, got {len(raw)}")
    return raw


def _int_field(obj, key, line_no, optional=False):
    value = obj.get(key)
    if value is None and optional:
        return None
    if not isinstance(value, int) or isinstance(value, bool) or value < 0:
        raise MalformedLine(line_no, f"{key!r} must be a non-negative integer")
    return value


def record_to_dict(rec: OpReturnRecord) -> dict:
    return {
        "txid": hash_to_hex(rec.txid),
        "block_hash": hash_to_hex(rec.block_hash),
        "block_time": rec.block_timestamp,
        "metadata": rec.metadata.hex(),
        "output_index": rec.output_index,
    }


def record_from_dict(obj: dict, line_no: int = 0) -> OpReturnRecord:
    if not isinstance(obj, dict):
        raise MalformedLine(line_no, "expected a JSON object")
    txid = _hex_field(obj, "txid", line_no, 32)
    block_hash = _hex_field(obj, "block_hash", line_no, 32)
    return OpReturnRecord(
        txid=txid[::-1],
        block_hash=block_hash[::-1],
        block_timestamp=_int_field(obj, "block_time", line_no, optional=True),
        metadata=_hex_field(obj, "metadata", line_no),
        output_index=_int_field(obj, "output_index", line_no),
    )


def classified_to_dict(c: ClassifiedRecord) -> dict:
    d = record_to_dict(c.record)
    d["label"] = c.label
    d["category"] = c.category.value
    d["matched"] = None if c.matched_identifier is None else c.matched_identifier.hex()
    return d


def classified_from_dict(obj: dict, line_no: int = 0) -> ClassifiedRecord:
    rec = record_from_dict(obj, line_no)
    try:
        category = Category(obj["category"])
        label = obj["label"]
    except (KeyError, ValueError) as exc:
        raise MalformedLine(line_no, f"bad classification fields: {exc}") from None
    matched = obj.get("matched")
    return ClassifiedRecord(rec, label, category,
                            None if matched is None else bytes.fromhex(matched))

