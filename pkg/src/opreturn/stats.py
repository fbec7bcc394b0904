"""Aggregates over classified records: per-protocol tables, weekly series,
length histograms, category shares and space-consumption estimates.

All counting is done with exact integers and :class:`fractions.Fraction`;
rounding only happens when rendering.
"""

from __future__ import annotations

import datetime as dt
import math
from collections import Counter
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Callable, Iterable, Sequence

from .errors import DegenerateDenominator, EmptyInput, MissingTimestamp
from .records import (
    EMPTY,
    PROTOCOL_CATEGORIES,
    UNKNOWN,
    Category,
    ClassifiedRecord,
    OpReturnRecord,
)

MIB = 2 ** 20
GIB = 2 ** 30

EMPTY_TX_BYTES = 156
PER_BLOCK_OVERHEAD_BYTES = 97

DEFAULT_ANCHOR = dt.date(2014, 3, 12)
DEFAULT_BUCKET_DAYS = 7

CATEGORY_ORDER = (*PROTOCOL_CATEGORIES, Category.EMPTY, Category.UNKNOWN)


def utc_date(ts: int) -> dt.date:
    return dt.datetime.fromtimestamp(ts, tz=dt.timezone.utc).date()


def round_half_up(value: Fraction, places: int = 1) -> Fraction:
    scale = 10 ** places
    return Fraction(math.floor(Fraction(value) * scale + Fraction(1, 2)), scale)


def format_decimal(value: Fraction, places: int = 1) -> str:
    r = round_half_up(value, places)
    sign = "-" if r < 0 else ""
    scaled = abs(r.numerator * 10 ** places // r.denominator)
    whole, frac = divmod(scaled, 10 ** places)
    return f"{sign}{whole}.{frac:0{places}d}" if places else f"{sign}{whole}"


def _unwrap(rec) -> OpReturnRecord:
    return rec.record if isinstance(rec, ClassifiedRecord) else rec


def _shard_map(func: Callable, items: Sequence, jobs: int) -> list:
    if jobs <= 1 or len(items) < 2 * jobs:
        return [func(items)]
    step = -(-len(items) // jobs)
    shards = [items[k:k + step] for k in range(0, len(items), step)]
    with ThreadPoolExecutor(jobs) as pool:
        return list(pool.map(func, shards))


# -- per-protocol table -----------------------------------------------------

@dataclass
class Tally:
    """Mergeable count / byte total / earliest timestamp."""

    count: int = 0
    total_bytes: int = 0
    first_ts: int | None = None

    def add(self, size: int, ts: int | None):
        self.count += 1
        self.total_bytes += size
        if ts is not None and (self.first_ts is None or ts < self.first_ts):
            self.first_ts = ts

    def merge(self, other: Tally) -> Tally:
        firsts = [t for t in (self.first_ts, other.first_ts) if t is not None]
        return Tally(self.count + other.count, self.total_bytes + other.total_bytes,
                     min(firsts) if firsts else None)


@dataclass(frozen=True)
class ProtocolStats:
    label: str
    category: Category | None
    kind: str  # "protocol", "category" or "total"
    tx_count: int
    total_metadata_bytes: int
    first_tx_date: dt.date | None = None

    @property
    def avg_metadata_bytes(self) -> Fraction:
        if self.tx_count == 0:
            return Fraction(0)
        return Fraction(self.total_metadata_bytes, self.tx_count)


def tally_by_label(records: Iterable[ClassifiedRecord]) -> tuple[dict[str, Tally], dict[str, Category]]:
    tallies: dict[str, Tally] = {}
    categories: dict[str, Category] = {}
    for c in records:
        t = tallies.get(c.label)
        if t is None:
            t = tallies[c.label] = Tally()
            categories[c.label] = c.category
        t.add(len(c.record.metadata), c.record.block_timestamp)
    return tallies, categories


def merge_tallies(parts) -> tuple[dict[str, Tally], dict[str, Category]]:
    tallies: dict[str, Tally] = {}
    categories: dict[str, Category] = {}
    for part_tallies, part_categories in parts:
        for label, t in part_tallies.items():
            tallies[label] = tallies[label].merge(t) if label in tallies else t
            categories[label] = part_categories[label]
    return tallies, categories


def summarize(tallies: dict[str, Tally], categories: dict[str, Category],
              protocol_order: Sequence[str] = ()) -> list[ProtocolStats]:
    """Turn per-label tallies into table rows.

    Rows come grouped by category: protocol rows followed by a subtotal
    row for each of the four protocol categories, then one row each for
    Empty and Unknown, then the grand total. Categories with no records
    are left out; the grand total is always present.
    """
    rank = {name: i for i, name in enumerate(protocol_order)}
    rows = []
    grand = Tally()

    def row(label, category, kind, t):
        first = None if t.first_ts is None else utc_date(t.first_ts)
        return ProtocolStats(label, category, kind, t.count, t.total_bytes, first)

    for cat in CATEGORY_ORDER:
        labels = [lb for lb, c in categories.items() if c is cat]
        if not labels:
            continue
        labels.sort(key=lambda lb: (rank.get(lb, len(rank)), lb))
        subtotal = Tally()
        for lb in labels:
            subtotal = subtotal.merge(tallies[lb])
            if cat in PROTOCOL_CATEGORIES:
                rows.append(row(lb, cat, "protocol", tallies[lb]))
        name = {Category.EMPTY: EMPTY, Category.UNKNOWN: UNKNOWN}.get(cat, cat.value)
        rows.append(row(name, cat, "category", subtotal))
        grand = grand.merge(subtotal)
    rows.append(row("TOTAL", None, "total", grand))
    return rows


def aggregate(records: Sequence[ClassifiedRecord], protocol_order: Sequence[str] = (),
              jobs: int = 1) -> list[ProtocolStats]:
    parts = _shard_map(tally_by_label, list(records), jobs)
    return summarize(*merge_tallies(parts), protocol_order=protocol_order)


# -- time series ------------------------------------------------------------

@dataclass(frozen=True)
class TimeSeries:
    anchor: dt.date
    bucket_days: int
    groups: tuple[str, ...]
    points: list = field(default_factory=list)  # (bucket start date, {group: value})


CATEGORY_GROUPS = tuple(c.value for c in CATEGORY_ORDER)
PEAK_GROUPS = (EMPTY, UNKNOWN, "All")


def _bucket_index(ts: int, anchor: dt.date, bucket_days: int) -> int:
    anchor_ts = int(dt.datetime(anchor.year, anchor.month, anchor.day,
                                tzinfo=dt.timezone.utc).timestamp())
    return (ts - anchor_ts) // (bucket_days * 86400)


def _bucket_start(index: int, anchor: dt.date, bucket_days: int) -> dt.date:
    return anchor + dt.timedelta(days=index * bucket_days)


def _group_keys(c: ClassifiedRecord, group_by: str) -> tuple[str, ...]:
    if group_by == "category":
        return (c.category.value,)
    if group_by == "label":
        return (c.label,)
    if group_by == "peaks":
        if c.category is Category.EMPTY:
            return (EMPTY, "All")
        if c.category is Category.UNKNOWN:
            return (UNKNOWN, "All")
        return ("All",)
    raise ValueError(f"unknown grouping {group_by!r}")


def _timestamp(rec: OpReturnRecord) -> int:
    if rec.block_timestamp is None:
        raise MissingTimestamp(f"record {rec.txid[::-1].hex()}:{rec.output_index} has no block time")
    return rec.block_timestamp


def weekly_series(records: Sequence[ClassifiedRecord], group_by: str = "category",
                  anchor: dt.date = DEFAULT_ANCHOR, bucket_days: int = DEFAULT_BUCKET_DAYS,
                  jobs: int = 1) -> TimeSeries:
    """Count records per fixed-width bucket and group.

    ``group_by`` is ``"category"``, ``"label"`` (one column per protocol or
    sentinel) or ``"peaks"`` (Empty, Unknown, All). Buckets run
    contiguously from the earliest to the latest populated one.
    """
    if bucket_days < 1:
        raise ValueError("bucket_days must be >= 1")

    def count(shard):
        cnt = Counter()
        for c in shard:
            idx = _bucket_index(_timestamp(c.record), anchor, bucket_days)
            for key in _group_keys(c, group_by):
                cnt[idx, key] += 1
        return cnt

    counts = sum(_shard_map(count, list(records), jobs), Counter())
    if group_by == "category":
        groups = CATEGORY_GROUPS
    elif group_by == "peaks":
        groups = PEAK_GROUPS
    else:
        groups = tuple(sorted({k for _, k in counts}))
    series = TimeSeries(anchor, bucket_days, groups)
    if not counts:
        return series
    indices = [i for i, _ in counts]
    for idx in range(min(indices), max(indices) + 1):
        series.points.append((_bucket_start(idx, anchor, bucket_days),
                              {g: counts.get((idx, g), 0) for g in groups}))
    return series


def avg_length_series(records: Sequence, anchor: dt.date = DEFAULT_ANCHOR,
                      bucket_days: int = DEFAULT_BUCKET_DAYS) -> TimeSeries:
    """Mean payload length per bucket; buckets without records emit no point."""
    sums: dict[int, list[int]] = {}
    for r in records:
        rec = _unwrap(r)
        idx = _bucket_index(_timestamp(rec), anchor, bucket_days)
        acc = sums.setdefault(idx, [0, 0])
        acc[0] += len(rec.metadata)
        acc[1] += 1
    series = TimeSeries(anchor, bucket_days, ("avg",))
    for idx in sorted(sums):
        total, n = sums[idx]
        series.points.append((_bucket_start(idx, anchor, bucket_days), {"avg": Fraction(total, n)}))
    return series


# -- size histogram ---------------------------------------------------------

@dataclass(frozen=True)
class SizeHistogram:
    bins: dict[int, int]

    @property
    def total(self) -> int:
        return sum(self.bins.values())


def size_histogram(records: Iterable) -> SizeHistogram:
    cnt = Counter(len(_unwrap(r).metadata) for r in records)
    if not cnt:
        return SizeHistogram({})
    return SizeHistogram({n: cnt.get(n, 0) for n in range(max(cnt) + 1)})


# -- category shares --------------------------------------------------------

def category_shares(counts: dict[Category, int]) -> dict[Category, Fraction]:
    """Percentage of records per category, as exact fractions."""
    total = sum(counts.values())
    if total == 0:
        raise EmptyInput("no records to distribute")
    return {c: Fraction(100 * counts.get(c, 0), total) for c in CATEGORY_ORDER}


def category_distribution(records: Iterable[ClassifiedRecord]) -> dict[Category, Fraction]:
    return category_shares(Counter(c.category for c in records))


# -- space estimates --------------------------------------------------------

@dataclass(frozen=True)
class SpaceParams:
    empty_tx_bytes: int = EMPTY_TX_BYTES
    per_block_overhead_bytes: int = PER_BLOCK_OVERHEAD_BYTES


def estimate_opreturn_footprint(tx_count: int, avg_metadata_bytes,
                                params: SpaceParams = SpaceParams()) -> Fraction:
    """Bytes used by ``tx_count`` transactions of average payload ``avg_metadata_bytes``."""
    if tx_count < 0 or avg_metadata_bytes < 0:
        raise ValueError("inputs must be non-negative")
    return tx_count * (params.empty_tx_bytes + Fraction(str(avg_metadata_bytes)))


def estimate_chain_share(footprint_bytes, chain_total_bytes: int, block_count: int,
                         params: SpaceParams = SpaceParams()) -> Fraction:
    """Footprint as a fraction of the chain with per-block overhead removed."""
    denom = chain_total_bytes - block_count * params.per_block_overhead_bytes
    if denom <= 0:
        raise DegenerateDenominator(
            f"chain size {chain_total_bytes} does not exceed {block_count} block overheads")
    return Fraction(str(footprint_bytes)) / denom
