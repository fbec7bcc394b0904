"""Record ingestion (raw block files, JSON-lines imports) and the record store.

Raw block files use Bitcoin Core's on-disk framing: each block is
preceded by the 4-byte network magic and a 4-byte little-endian length.
Files may end in zero padding.

The store is an append-only JSON-lines file. Records are written in
batches, each closed by a checksum line::

    {"batch": {"count": 3, "sha256": "..."}}

where the digest covers the exact bytes of the batch's record lines.
Persisting a batch whose digest is already present is a no-op.
"""

from __future__ import annotations

import fcntl
import hashlib
import io
import json
import logging
import os
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Iterable, Iterator

from .errors import (
    BadMagic,
    DecodeError,
    MalformedLine,
    SourceError,
    StoreCorrupt,
    TruncatedBlock,
)
from .records import OpReturnRecord, record_from_dict, record_to_dict
from .script import ScriptClass, classify_script, extract_opreturn_payload
from .wire import BlockRecord, parse_block

log = logging.getLogger(__name__)

MAINNET_MAGIC = bytes.fromhex("f9beb4d9")


@dataclass
class ScanManifest:
    sources: list[str] = field(default_factory=list)
    blocks: int = 0
    transactions: int = 0
    opreturn_outputs: int = 0
    records: int = 0
    defects: list[str] = field(default_factory=list)

    def as_dict(self) -> dict:
        return {
            "sources": list(self.sources),
            "blocks": self.blocks,
            "transactions": self.transactions,
            "opreturn_outputs": self.opreturn_outputs,
            "records": self.records,
            "defects": list(self.defects),
        }

    def defect(self, message: str):
        log.warning(message)
        self.defects.append(message)


def block_records(block: BlockRecord, manifest: ScanManifest | None = None) -> Iterator[OpReturnRecord]:
    """One record per OP_RETURN output in ``block``."""
    block_hash = block.block_hash
    for tx in block.transactions:
        if manifest is not None:
            manifest.transactions += 1
        txid = None
        for n, out in enumerate(tx.outputs):
            if classify_script(out.out_script) is not ScriptClass.NULL_DATA:
                continue
            if txid is None:
                txid = tx.txid
            payload = extract_opreturn_payload(out.out_script)
            if manifest is not None:
                manifest.opreturn_outputs += 1
                manifest.records += 1
                if payload.malformed:
                    manifest.defect(f"tx {txid[::-1].hex()}:{n}: push overruns script")
            yield OpReturnRecord(txid, block_hash, block.timestamp, payload.data, n)


def iter_framed_blocks(data: bytes, source: str = "<bytes>", magic: bytes = MAINNET_MAGIC,
                       manifest: ScanManifest | None = None,
                       strict: bool = False) -> Iterator[bytes]:
    """Yield the raw bytes of each framed block in ``data``.

    Zero padding is skipped. On a bad magic the reader scans forward to the
    next magic and records a defect, unless ``strict`` in which case
    :class:`BadMagic` / :class:`TruncatedBlock` are raised.
    """
    manifest = manifest if manifest is not None else ScanManifest()
    pos, end = 0, len(data)
    while pos < end:
        if data[pos] == 0:
            nxt = data.find(magic, pos)
            if nxt < 0:
                if any(data[pos:]):
                    _fail(manifest, strict, BadMagic, f"{source}: non-zero garbage after offset {pos}")
                return
            if any(data[pos:nxt]):
                _fail(manifest, strict, BadMagic, f"{source}: garbage at offset {pos}")
            pos = nxt
            continue
        if data[pos:pos + 4] != magic:
            nxt = data.find(magic, pos + 1)
            _fail(manifest, strict, BadMagic,
                  f"{source}: bad magic at offset {pos}, resyncing at {nxt if nxt >= 0 else 'EOF'}")
            if nxt < 0:
                return
            pos = nxt
            continue
        if pos + 8 > end:
            _fail(manifest, strict, TruncatedBlock, f"{source}: truncated frame header at offset {pos}")
            return
        length = int.from_bytes(data[pos + 4:pos + 8], "little")
        start = pos + 8
        if start + length > end:
            _fail(manifest, strict, TruncatedBlock,
                  f"{source}: block at offset {pos} declares {length} bytes, {end - start} remain")
            return
        yield data[start:start + length]
        pos = start + length


def _fail(manifest, strict, exc_type, message):
    if strict:
        raise exc_type(message)
    manifest.defect(message)


def block_files(directory) -> list[Path]:
    path = Path(directory)
    if not path.is_dir():
        raise SourceError(f"not a readable directory: {path}")
    files = sorted(path.glob("blk*.dat"))
    return files


def scan_block_files(directory, manifest: ScanManifest | None = None,
                     allowlist: set[bytes] | None = None, magic: bytes = MAINNET_MAGIC,
                     strict: bool = False) -> Iterator[OpReturnRecord]:
    """Extract OP_RETURN records from every ``blk*.dat`` file in ``directory``.

    Files are read in name order and blocks in file order. ``allowlist``,
    if given, restricts output to blocks whose hash (wire order) it holds.
    """
    manifest = manifest if manifest is not None else ScanManifest()
    for path in block_files(directory):
        try:
            data = path.read_bytes()
        except OSError as exc:
            raise SourceError(f"cannot read {path}: {exc}") from None
        manifest.sources.append(str(path))
        yield from scan_block_bytes(data, str(path), manifest, allowlist, magic, strict)


def scan_block_bytes(data: bytes, source: str = "<bytes>", manifest: ScanManifest | None = None,
                     allowlist: set[bytes] | None = None, magic: bytes = MAINNET_MAGIC,
                     strict: bool = False) -> Iterator[OpReturnRecord]:
    manifest = manifest if manifest is not None else ScanManifest()
    for raw in iter_framed_blocks(data, source, magic, manifest, strict):
        try:
            block = parse_block(raw)
        except DecodeError as exc:
            if strict:
                raise TruncatedBlock(f"{source}: {exc}") from exc
            manifest.defect(f"{source}: undecodable block: {exc}")
            continue
        if allowlist is not None and block.block_hash not in allowlist:
            continue
        manifest.blocks += 1
        yield from block_records(block, manifest)


def frame_block(block_bytes: bytes, magic: bytes = MAINNET_MAGIC) -> bytes:
    return magic + len(block_bytes).to_bytes(4, "little") + block_bytes


# -- JSON-lines import ------------------------------------------------------

def import_records(source) -> Iterator[OpReturnRecord]:
    """Parse a JSON-lines document of records.

    ``source`` is a path or an iterable of text lines. Blank lines are
    skipped; line numbers in errors are 1-based.
    """
    if isinstance(source, (str, os.PathLike)):
        try:
            fh = open(source, encoding="utf-8")
        except OSError as exc:
            raise SourceError(f"cannot read {source}: {exc}") from None
        with fh:
            yield from _import_lines(fh)
    else:
        yield from _import_lines(source)


def _import_lines(lines: Iterable[str]) -> Iterator[OpReturnRecord]:
    for line_no, line in enumerate(lines, start=1):
        if not line.strip():
            continue
        try:
            obj = json.loads(line)
        except json.JSONDecodeError as exc:
            raise MalformedLine(line_no, f"invalid JSON: {exc.msg}") from None
        yield record_from_dict(obj, line_no)


# -- record store -----------------------------------------------------------

def _dumps(obj: dict) -> bytes:
    return json.dumps(obj, separators=(",", ":"), sort_keys=True).encode() + b"\n"


class RecordStore:
    """Append-only JSON-lines store with per-batch checksums.

    One writer at a time is enforced with an exclusive ``flock`` on the
    store file; readers take no lock.
    """

    def __init__(self, path, encode: Callable = record_to_dict, decode: Callable = record_from_dict):
        self.path = Path(path)
        self._encode = encode
        self._decode = decode

    def exists(self) -> bool:
        return self.path.exists()

    def persist(self, records: Iterable) -> bool:
        """Append ``records`` as one batch. Returns False if an identical batch is already stored."""
        body = b"".join(_dumps(self._encode(r)) for r in records)
        count = body.count(b"\n")
        digest = hashlib.sha256(body).hexdigest()
        self.path.parent.mkdir(parents=True, exist_ok=True)
        with open(self.path, "ab+") as fh:
            fcntl.flock(fh, fcntl.LOCK_EX)
            try:
                fh.seek(0)
                existing = {b["sha256"] for b in _scan_batches(fh.read())[1]}
                if digest in existing:
                    return False
                fh.seek(0, io.SEEK_END)
                fh.write(body + _dumps({"batch": {"count": count, "sha256": digest}}))
                fh.flush()
                os.fsync(fh.fileno())
            finally:
                fcntl.flock(fh, fcntl.LOCK_UN)
        return True

    def load(self) -> list:
        if not self.path.exists():
            return []
        data = self.path.read_bytes()
        lines, _ = _scan_batches(data)
        return [self._decode(json.loads(line), n) for n, line in lines]

    def __iter__(self):
        return iter(self.load())

    def size(self) -> int:
        return self.path.stat().st_size if self.path.exists() else 0


def _scan_batches(data: bytes):
    """Verify every batch; return (record lines as (line_no, bytes), batch trailers)."""
    records = []
    batches = []
    batch_start = 0
    pending: list[tuple[int, bytes]] = []
    offset = 0
    for line_no, line in enumerate(data.splitlines(keepends=True), start=1):
        line_offset = offset
        offset += len(line)
        if not line.endswith(b"\n"):
            raise StoreCorrupt("unterminated final line", line_offset)
        try:
            obj = json.loads(line)
        except (json.JSONDecodeError, UnicodeDecodeError):
            raise StoreCorrupt(f"unparseable line {line_no}", line_offset) from None
        if isinstance(obj, dict) and "batch" in obj:
            trailer = obj["batch"]
            body = data[batch_start:line_offset]
            if (not isinstance(trailer, dict)
                    or trailer.get("count") != len(pending)
                    or trailer.get("sha256") != hashlib.sha256(body).hexdigest()):
                raise StoreCorrupt(f"checksum mismatch for batch ending line {line_no}", batch_start)
            batches.append(trailer)
            records.extend(pending)
            pending = []
            batch_start = offset
        else:
            pending.append((line_no, line))
    if pending:
        raise StoreCorrupt("batch without checksum line", batch_start)
    return records, batches
