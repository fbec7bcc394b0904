"""Map OP_RETURN payloads to protocols by identifier prefix."""

from __future__ import annotations

import json
from dataclasses import dataclass
from importlib import resources
from pathlib import Path
from typing import Iterable, Iterator

from .errors import (
    CrossProtocolPrefixConflict,
    DuplicateIdentifier,
    RegistryError,
    UnknownCategoryName,
)
from .records import (
    EMPTY,
    PROTOCOL_CATEGORIES,
    UNKNOWN,
    Category,
    ClassifiedRecord,
    OpReturnRecord,
)

MAX_IDENTIFIER_BYTES = 16


@dataclass(frozen=True)
class ProtocolEntry:
    name: str
    category: Category
    identifiers: tuple[bytes, ...]


class ProtocolRegistry:
    """Validated, immutable identifier table."""

    def __init__(self, entries: Iterable[ProtocolEntry]):
        self.entries = tuple(entries)
        self._by_identifier: dict[bytes, ProtocolEntry] = {}
        for entry in self.entries:
            if entry.category not in PROTOCOL_CATEGORIES:
                raise UnknownCategoryName(f"{entry.name}: {entry.category.value} is reserved")
            if not entry.identifiers:
                raise RegistryError(f"{entry.name}: no identifiers")
            for ident in entry.identifiers:
                if not 0 < len(ident) <= MAX_IDENTIFIER_BYTES:
                    raise RegistryError(
                        f"{entry.name}: identifier {ident!r} must be 1..{MAX_IDENTIFIER_BYTES} bytes")
                if ident in self._by_identifier:
                    raise DuplicateIdentifier(
                        f"{ident!r} listed by {self._by_identifier[ident].name} and {entry.name}")
                self._by_identifier[ident] = entry
        self._check_prefixes()
        self._lengths = sorted({len(i) for i in self._by_identifier}, reverse=True)

    def _check_prefixes(self):
        idents = sorted(self._by_identifier)
        # in sorted order any identifier that prefixes another sits directly
        # before a run of its extensions
        for i, short in enumerate(idents):
            for longer in idents[i + 1:]:
                if not longer.startswith(short):
                    break
                a, b = self._by_identifier[short], self._by_identifier[longer]
                if a.name != b.name:
                    raise CrossProtocolPrefixConflict(
                        f"{short!r} ({a.name}) is a prefix of {longer!r} ({b.name})")

    @property
    def identifier_count(self) -> int:
        return len(self._by_identifier)

    @property
    def protocol_names(self) -> list[str]:
        return [e.name for e in self.entries]

    def category_of(self, label: str) -> Category:
        if label == EMPTY:
            return Category.EMPTY
        if label == UNKNOWN:
            return Category.UNKNOWN
        for e in self.entries:
            if e.name == label:
                return e.category
        raise KeyError(label)

    def lookup(self, payload: bytes) -> tuple[ProtocolEntry, bytes] | None:
        """Longest registered identifier that prefixes ``payload``."""
        for n in self._lengths:
            if n <= len(payload):
                entry = self._by_identifier.get(payload[:n])
                if entry is not None:
                    return entry, payload[:n]
        return None


def _category(name: str, protocol: str) -> Category:
    key = name.replace(" ", "").lower()
    for c in PROTOCOL_CATEGORIES:
        if c.value.lower() == key:
            return c
    raise UnknownCategoryName(f"{protocol}: unknown category {name!r}")


def parse_identifier(text: str) -> bytes:
    """``"0x1f00"`` decodes as hex; any other string is taken byte-for-byte as ASCII."""
    if text.startswith("0x"):
        try:
            return bytes.fromhex(text[2:])
        except ValueError:
            raise RegistryError(f"bad hex identifier {text!r}") from None
    try:
        return text.encode("ascii")
    except UnicodeEncodeError:
        raise RegistryError(f"identifier {text!r} is not 7-bit ASCII") from None


def format_identifier(ident: bytes) -> str:
    if all(0x20 <= b < 0x7F for b in ident) and not ident.startswith(b"0x"):
        return ident.decode("ascii")
    return "0x" + ident.hex()


def load_registry(source=None) -> ProtocolRegistry:
    """Load a registry document.

    ``source`` may be a path, a JSON string, or an already-decoded list or
    dict. ``None`` loads the bundled table.
    """
    if source is None:
        doc = json.loads(resources.files("opreturn").joinpath("data", "registry.json").read_text())
    elif isinstance(source, (list, dict)):
        doc = source
    elif isinstance(source, Path) or (isinstance(source, str) and not source.lstrip().startswith(("{", "["))):
        try:
            doc = json.loads(Path(source).read_text())
        except OSError as exc:
            raise RegistryError(f"cannot read registry: {exc}") from None
        except json.JSONDecodeError as exc:
            raise RegistryError(f"registry is not valid JSON: {exc}") from None
    else:
        try:
            doc = json.loads(source)
        except json.JSONDecodeError as exc:
            raise RegistryError(f"registry is not valid JSON: {exc}") from None

    items = doc.get("protocols") if isinstance(doc, dict) else doc
    if not isinstance(items, list):
        raise RegistryError("registry must be a list of protocols")
    entries = []
    for item in items:
        try:
            name, cat, idents = item["name"], item["category"], item["identifiers"]
        except (KeyError, TypeError):
            raise RegistryError(f"entry needs name, category, identifiers: {item!r}") from None
        if not isinstance(idents, list) or not all(isinstance(i, str) for i in idents):
            raise RegistryError(f"{name}: identifiers must be a list of strings")
        entries.append(ProtocolEntry(name, _category(cat, name),
                                     tuple(parse_identifier(i) for i in idents)))
    return ProtocolRegistry(entries)


def registry_to_document(registry: ProtocolRegistry) -> dict:
    return {"version": 1, "protocols": [
        {"name": e.name, "category": e.category.value,
         "identifiers": [format_identifier(i) for i in e.identifiers]}
        for e in registry.entries
    ]}


def classify_payload(payload: bytes, registry: ProtocolRegistry):
    """Return ``(label, category, matched_identifier)``."""
    if not payload:
        return EMPTY, Category.EMPTY, None
    hit = registry.lookup(payload)
    if hit is None:
        return UNKNOWN, Category.UNKNOWN, None
    entry, ident = hit
    return entry.name, entry.category, ident


def classify_record(record: OpReturnRecord, registry: ProtocolRegistry) -> ClassifiedRecord:
    return ClassifiedRecord(record, *classify_payload(record.metadata, registry))


def classify_stream(records: Iterable[OpReturnRecord],
                    registry: ProtocolRegistry) -> Iterator[ClassifiedRecord]:
    for rec in records:
        yield classify_record(rec, registry)


def partition_counts(classified: Iterable[ClassifiedRecord]) -> dict[str, int]:
    counts = {"known": 0, "empty": 0, "unknown": 0}
    for c in classified:
        if c.category is Category.EMPTY:
            counts["empty"] += 1
        elif c.category is Category.UNKNOWN:
            counts["unknown"] += 1
        else:
            counts["known"] += 1
    return counts
