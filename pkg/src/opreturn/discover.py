"""Frequency analysis of unknown payload prefixes.

For every prefix length ``i`` in ``1..max_prefix_units`` the prefixes of
all unknown payloads are tallied and compared with the count expected if
symbols were uniform, ``len(payloads) / alphabet**i``. A prefix becomes a
candidate when it occurs more than ``ratio_threshold`` times the expected
count and more than ``absolute_threshold`` times.
"""

from __future__ import annotations

import io
from collections import Counter
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from fractions import Fraction
from typing import Iterable, Sequence

HEX = "hex"
BYTE = "byte"


@dataclass(frozen=True)
class DiscoveryParams:
    max_prefix_units: int = 12
    ratio_threshold: Fraction = Fraction(2)
    absolute_threshold: int = 100
    prefix_unit: str = HEX

    def __post_init__(self):
        if self.max_prefix_units < 1:
            raise ValueError("max_prefix_units must be >= 1")
        if self.ratio_threshold <= 0:
            raise ValueError("ratio_threshold must be > 0")
        if self.absolute_threshold < 1:
            raise ValueError("absolute_threshold must be >= 1")
        if self.prefix_unit not in (HEX, BYTE):
            raise ValueError(f"prefix_unit must be {HEX!r} or {BYTE!r}")
        object.__setattr__(self, "ratio_threshold", Fraction(self.ratio_threshold))

    @property
    def alphabet(self) -> int:
        return 16 if self.prefix_unit == HEX else 256


@dataclass(frozen=True, order=True)
class CandidateIdentifier:
    length: int
    code: str  # hex text of the prefix
    occurrences: int
    expected_occurrences: Fraction

    @property
    def ratio(self) -> Fraction:
        if self.expected_occurrences == 0:
            return Fraction(0)
        return self.occurrences / self.expected_occurrences

    @property
    def prefix_bytes(self) -> bytes:
        """The prefix as raw bytes; an odd hex prefix has its final nibble dropped."""
        return bytes.fromhex(self.code[: len(self.code) // 2 * 2])


def _symbols(payload: bytes, unit: str):
    return payload.hex() if unit == HEX else payload


def tally_prefixes(payloads: Iterable[bytes], params: DiscoveryParams) -> list[Counter]:
    """Per-length prefix counts; element ``i - 1`` holds length-``i`` prefixes.

    Counts from disjoint shards can be merged by adding the counters.
    """
    tallies = [Counter() for _ in range(params.max_prefix_units)]
    for payload in payloads:
        s = _symbols(payload, params.prefix_unit)
        for i in range(1, min(len(s), params.max_prefix_units) + 1):
            tallies[i - 1][s[:i]] += 1
    return tallies


def _code(prefix, unit: str) -> str:
    return prefix if unit == HEX else prefix.hex()


def select_candidates(tallies: Sequence[Counter], total: int,
                      params: DiscoveryParams) -> set[CandidateIdentifier]:
    found = set()
    for i, counts in enumerate(tallies, start=1):
        expected = Fraction(total, params.alphabet ** i)
        bar = expected * params.ratio_threshold
        for prefix, n in counts.items():
            if n > bar and n > params.absolute_threshold:
                found.add(CandidateIdentifier(i, _code(prefix, params.prefix_unit), n, expected))
    return found


def detect_identifiers(unknown_payloads: Sequence[bytes],
                       params: DiscoveryParams | None = None,
                       jobs: int = 1) -> set[CandidateIdentifier]:
    params = params or DiscoveryParams()
    payloads = list(unknown_payloads)
    if not payloads:
        return set()
    if jobs <= 1 or len(payloads) < 2 * jobs:
        tallies = tally_prefixes(payloads, params)
    else:
        step = -(-len(payloads) // jobs)
        shards = [payloads[k:k + step] for k in range(0, len(payloads), step)]
        with ThreadPoolExecutor(jobs) as pool:
            parts = list(pool.map(lambda s: tally_prefixes(s, params), shards))
        tallies = [sum((p[i] for p in parts), Counter()) for i in range(params.max_prefix_units)]
    return select_candidates(tallies, len(payloads), params)


def format_report(candidates: Iterable[CandidateIdentifier]) -> str:
    """Tab-separated table: code, length, occurrences, expected, ratio."""
    out = io.StringIO()
    out.write("code\tlength\toccurrences\texpected\tratio\n")
    for c in sorted(candidates):
        out.write(f"{c.code}\t{c.length}\t{c.occurrences}\t"
                  f"{float(c.expected_occurrences):.6g}\t{float(c.ratio):.6g}\n")
    return out.getvalue()
