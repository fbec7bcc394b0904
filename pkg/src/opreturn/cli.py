"""Command-line pipeline: scan -> classify -> discover / stats.

Each stage reads and writes files in the ``--out`` directory, so stages
can be re-run independently.
"""

from __future__ import annotations

import argparse
import datetime as dt
import json
import logging
import sys
from fractions import Fraction
from pathlib import Path

from . import discover as disc
from . import report, stats
from .classify import classify_stream, load_registry, partition_counts
from .errors import OpReturnError, RegistryError, RpcError, SourceError, StoreError
from .records import Category, classified_from_dict, classified_to_dict
from .rpc import RpcClient, RpcConfig, fetch_blocks_rpc, parse_height_range
from .script import POLICIES, OpReturnPayload, check_standardness, nulldata_script
from .store import RecordStore, ScanManifest, import_records, scan_block_files

log = logging.getLogger("opreturn")

EXIT_OK = 0
EXIT_OTHER = 1
EXIT_SOURCE = 3
EXIT_REGISTRY = 4
EXIT_STORE = 5
EXIT_RPC = 6

RECORDS_FILE = "records.jsonl"
CLASSIFIED_FILE = "classified.jsonl"
MANIFEST_FILE = "manifest.json"
CANDIDATES_FILE = "candidates.tsv"
PROTOCOL_SERIES_CSV = "ProtocolsByWeek.csv"


def record_store(out: Path) -> RecordStore:
    return RecordStore(out / RECORDS_FILE)


def classified_store(out: Path) -> RecordStore:
    return RecordStore(out / CLASSIFIED_FILE, classified_to_dict, classified_from_dict)


def _load_classified(out: Path):
    store = classified_store(out)
    if not store.exists():
        raise StoreError(f"no classified store at {store.path}; run 'classify' first")
    return store.load()


def cmd_scan(args) -> int:
    sources = [s for s in (args.source_blk, args.source_import, args.source_rpc) if s]
    if len(sources) != 1:
        print("error: give exactly one of --source-blk, --source-import, --source-rpc", file=sys.stderr)
        return EXIT_SOURCE
    manifest = ScanManifest()
    if args.source_blk:
        allow = None
        if args.allowlist:
            allow = {bytes.fromhex(h.strip())[::-1]
                     for h in Path(args.allowlist).read_text().split() if h.strip()}
        records = list(scan_block_files(args.source_blk, manifest, allowlist=allow))
    elif args.source_import:
        manifest.sources.append(args.source_import)
        records = list(import_records(args.source_import))
        manifest.opreturn_outputs = manifest.records = len(records)
    else:
        if not args.heights:
            print("error: --source-rpc needs --heights A..B", file=sys.stderr)
            return EXIT_SOURCE
        config = RpcConfig.from_sources(args.source_rpc, args.rpc_config)
        records = list(fetch_blocks_rpc(RpcClient(config), parse_height_range(args.heights), manifest))

    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    appended = record_store(out).persist(records)
    summary = manifest.as_dict()
    summary["appended"] = appended
    (out / MANIFEST_FILE).write_text(json.dumps(summary, indent=2) + "\n")
    print(json.dumps(summary, indent=2))
    return EXIT_OK


def cmd_classify(args) -> int:
    registry = load_registry(args.registry)
    out = Path(args.out)
    store = record_store(out)
    if not store.exists():
        raise StoreError(f"no record store at {store.path}; run 'scan' first")
    classified = list(classify_stream(store.load(), registry))
    target = classified_store(out)
    # derived data: rebuilt from scratch on every run
    target.path.unlink(missing_ok=True)
    target.persist(classified)
    counts = partition_counts(classified)
    counts["total"] = len(classified)
    print(json.dumps(counts))
    return EXIT_OK


def _params(args) -> disc.DiscoveryParams:
    return disc.DiscoveryParams(args.D, Fraction(args.delta), args.N, args.prefix_unit)


def cmd_discover(args) -> int:
    out = Path(args.out)
    unknown = [c.record.metadata for c in _load_classified(out) if c.category is Category.UNKNOWN]
    candidates = disc.detect_identifiers(unknown, _params(args), jobs=args.jobs)
    text = disc.format_report(candidates)
    (out / CANDIDATES_FILE).write_text(text)
    sys.stdout.write(text)
    print(f"# {len(candidates)} candidate(s) from {len(unknown)} unknown payloads", file=sys.stderr)
    return EXIT_OK


def cmd_stats(args) -> int:
    out = Path(args.out)
    classified = _load_classified(out)
    registry = load_registry(args.registry)
    anchor, width, jobs = args.anchor, args.bucket_days, args.jobs

    rows = stats.aggregate(classified, registry.protocol_names, jobs=jobs)
    report.write_table_csv(out / report.TABLE_CSV, rows, registry)
    sys.stdout.write(report.render_table(rows, registry))

    report.write_categories_csv(out / report.CATEGORIES_CSV,
                                stats.weekly_series(classified, "category", anchor, width, jobs))
    report.write_peaks_csv(out / report.PEAKS_CSV,
                           stats.weekly_series(classified, "peaks", anchor, width, jobs))
    report.write_label_series_csv(out / PROTOCOL_SERIES_CSV,
                                  stats.weekly_series(classified, "label", anchor, width, jobs))
    report.write_length_csv(out / report.LENGTH_CSV,
                            stats.avg_length_series(classified, anchor, width))
    report.write_size_csv(out / report.SIZE_CSV, stats.size_histogram(classified))

    total = rows[-1]
    if classified:
        shares = stats.category_distribution(classified)
        print("\ncategory shares: " + ", ".join(
            f"{c.value} {stats.format_decimal(p, 1)}%" for c, p in shares.items()))

    policy = POLICIES[args.policy]
    over = sum(1 for c in classified if not check_standardness(_payload_of(c), policy))
    print(f"payloads over the {policy.label} limit: {over}")

    footprint = stats.estimate_opreturn_footprint(total.tx_count, total.avg_metadata_bytes)
    print(f"estimated OP_RETURN footprint: {float(footprint):.0f} bytes "
          f"({float(footprint / stats.MIB):.1f} MiB)")
    if args.chain_bytes is not None and args.block_count is not None:
        share = stats.estimate_chain_share(footprint, args.chain_bytes, args.block_count)
        print(f"estimated share of chain: {stats.format_decimal(share * 100, 3)}%")
    return EXIT_OK


def _payload_of(c) -> OpReturnPayload:
    data = c.record.metadata
    return OpReturnPayload(data, 1 if data else 0, False, len(nulldata_script(data) if data else b"\x6a"))


def _date(text: str) -> dt.date:
    try:
        return dt.date.fromisoformat(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected YYYY-MM-DD, got {text!r}") from None


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--out", default="opreturn-out", help="store and report directory")
    common.add_argument("--registry", help="registry JSON (default: bundled table)")
    common.add_argument("--jobs", type=int, default=1, help="worker threads for aggregation")
    common.add_argument("-v", "--verbose", action="store_true")

    parser = argparse.ArgumentParser(prog="opreturn", description="Bitcoin OP_RETURN metadata analysis")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("scan", parents=[common], help="extract OP_RETURN records into the store")
    p.add_argument("--source-blk", metavar="DIR")
    p.add_argument("--source-import", metavar="FILE")
    p.add_argument("--source-rpc", metavar="URL")
    p.add_argument("--heights", metavar="A..B")
    p.add_argument("--rpc-config", metavar="FILE")
    p.add_argument("--allowlist", metavar="FILE", help="block hashes to keep, one per line")
    p.set_defaults(func=cmd_scan)

    p = sub.add_parser("classify", parents=[common], help="label stored records by protocol")
    p.set_defaults(func=cmd_classify)

    p = sub.add_parser("discover", parents=[common], help="frequency analysis of unknown payloads")
    p.add_argument("--D", type=int, default=12)
    p.add_argument("--delta", default="2")
    p.add_argument("--N", type=int, default=100)
    p.add_argument("--prefix-unit", choices=[disc.HEX, disc.BYTE], default=disc.HEX)
    p.set_defaults(func=cmd_discover)

    p = sub.add_parser("stats", parents=[common], help="tables and CSV exports")
    p.add_argument("--anchor", type=_date, default=stats.DEFAULT_ANCHOR)
    p.add_argument("--bucket-days", type=int, default=stats.DEFAULT_BUCKET_DAYS)
    p.add_argument("--policy", choices=sorted(POLICIES), default="80")
    p.add_argument("--chain-bytes", type=int)
    p.add_argument("--block-count", type=int)
    p.set_defaults(func=cmd_stats)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except (OpReturnError, ValueError) as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return exit_code(exc)


def exit_code(exc: BaseException) -> int:
    for family, code in _EXIT_CODES:
        if isinstance(exc, family):
            return code
    return EXIT_OTHER


_EXIT_CODES = (
    (SourceError, EXIT_SOURCE),
    (RegistryError, EXIT_REGISTRY),
    (StoreError, EXIT_STORE),
    (RpcError, EXIT_RPC),
)

if __name__ == "__main__":
    sys.exit(main())
