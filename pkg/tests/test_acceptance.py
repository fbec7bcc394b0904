"""End-to-end acceptance gate; one test per criterion, each with its own time budget."""

import os
import random
import time
from contextlib import contextmanager
from fractions import Fraction


from helpers import (
    EW_HELLO_SCRIPT,
    FakeNode,
    JULY_PEAK_START,
    PUBLISHED_ROWS,
    PUBLISHED_SHARES,
    PUBLISHED_TOTALS,
    blk_bytes,
    block_of,
    brute_force_candidates,
    opreturn_tx,
    oracle_txid_hex,
    payload_tx,
    random_transaction,
)
from opreturn import cli
from opreturn.classify import classify_stream, load_registry, partition_counts
from opreturn.discover import DiscoveryParams, detect_identifiers
from opreturn.records import Category, OpReturnRecord
from opreturn.rpc import RpcClient, RpcConfig, fetch_blocks_rpc
from opreturn.stats import (
    GIB,
    MIB,
    Tally,
    category_shares,
    estimate_chain_share,
    estimate_opreturn_footprint,
    format_decimal,
    round_half_up,
    summarize,
    utc_date,
    weekly_series,
)
from opreturn.store import scan_block_bytes
from opreturn.wire import empty_opreturn_transaction, parse_transaction

DAY = 86_400


@contextmanager
def budget(seconds):
    start = time.perf_counter()
    yield
    elapsed = time.perf_counter() - start
    assert elapsed < seconds, f"took {elapsed:.2f}s, budget {seconds}s"


def as_tuples(cands):
    return {(c.code, c.length, c.occurrences) for c in cands}


def test_01_ew_hello_end_to_end():
    registry = load_registry()
    with budget(1):
        data = blk_bytes([block_of([opreturn_tx(EW_HELLO_SCRIPT)])])
        records = list(scan_block_bytes(data))
        classified = list(classify_stream(records, registry))
    assert len(records) == 1
    assert records[0].metadata == b"EW Hello!"
    assert (classified[0].label, classified[0].category) == ("Eternity Wall", Category.OTHER)


def test_02_registry_fidelity():
    with budget(1):
        registry = load_registry()
        idents = [i for e in registry.entries for i in e.identifiers]
        records = [OpReturnRecord(n.to_bytes(32, "big"), bytes(32), JULY_PEAK_START, i + b"\x00", 0)
                   for n, i in enumerate(idents)]
        counts = partition_counts(classify_stream(records, registry))
    assert len(registry.entries) == 22
    assert registry.identifier_count == 33
    assert counts == {"known": 33, "empty": 0, "unknown": 0}


def test_03_table_average_sizes():
    with budget(1):
        tallies = {p: Tally(n, size) for _, p, _, n, size, _ in PUBLISHED_ROWS}
        categories = {p: Category(c) for c, p, *_ in PUBLISHED_ROWS}
        rows = summarize(tallies, categories, [p for _, p, *_ in PUBLISHED_ROWS])
    printed = {p: avg for _, p, _, _, _, avg in PUBLISHED_ROWS}
    printed.update({k: v[2] for k, v in PUBLISHED_TOTALS.items()})
    by_label = {r.label: r for r in rows}
    assert set(by_label) == set(printed)
    misses = []
    for label, text in printed.items():
        row = by_label[label]
        key = row.category.value if row.category else "TOTAL"
        if row.kind != "protocol":
            assert (row.tx_count, row.total_metadata_bytes) == PUBLISHED_TOTALS[key][:2]
        got = round_half_up(row.avg_metadata_bytes, 1)
        if abs(got - Fraction(text)) > Fraction(5, 100):
            misses.append(f"{label}: computed {format_decimal(got)}, printed {text}")
    assert not misses, "; ".join(misses)


def test_04_category_distribution():
    with budget(1):
        counts = {Category(k): v[0] for k, v in PUBLISHED_TOTALS.items() if k != "TOTAL"}
        shares = category_shares(counts)
    assert sum(counts.values()) == PUBLISHED_TOTALS["TOTAL"][0]
    for name, published in PUBLISHED_SHARES.items():
        assert abs(shares[Category(name)] - Fraction(str(published))) <= Fraction(1, 10), name


def test_05_space_estimates():
    footprint = estimate_opreturn_footprint(1_887_708, Fraction("23.4"))
    assert abs(footprint / MIB - 323) <= 1
    share = estimate_chain_share(footprint, 102 * GIB, 453_200)
    assert Fraction(25, 10_000) <= share <= Fraction(35, 10_000)


def _oracle_corpus(rng):
    size = rng.choice([0, 1, 50, 500, 2000, 5000, 10_000])
    plants = []
    for _ in range(rng.randrange(0, 3)):
        prefix = rng.randbytes(rng.randrange(1, 6))
        plants += [prefix + rng.randbytes(rng.randrange(0, 8))
                   for _ in range(rng.randrange(0, min(size, 400) + 1))]
    plants = plants[:size]
    corpus = plants + [rng.randbytes(rng.randrange(0, 30)) for _ in range(size - len(plants))]
    rng.shuffle(corpus)
    return corpus


def test_06_discovery_oracle_equivalence():
    rng = random.Random(20_160_208)
    with budget(30):
        for _ in range(50):
            corpus = _oracle_corpus(rng)
            D, delta, N = rng.randrange(1, 13), rng.randrange(1, 5), rng.randrange(1, 200)
            unit = rng.choice(["hex", "byte"])
            got = detect_identifiers(corpus, DiscoveryParams(D, delta, N, unit))
            assert as_tuples(got) == brute_force_candidates(corpus, D, delta, N, unit)

        for trial in range(10):
            # 4-byte identifiers: the full 8-hex-digit prefix sits far below N by chance alone
            prefix = rng.randbytes(4)
            background = [rng.randbytes(rng.randrange(4, 30)) for _ in range(10_000 - 200)]
            params = DiscoveryParams()
            expected = Fraction(len(background) + 200, 16 ** 8)
            need = max(2 * params.ratio_threshold * expected, params.absolute_threshold + 1)
            planted = [prefix + rng.randbytes(rng.randrange(0, 20)) for _ in range(int(need))]
            hit = {c.code for c in detect_identifiers(background + planted, params)}
            assert prefix.hex() in hit, trial

            weak = [prefix + rng.randbytes(8) for _ in range(99)]
            miss = {c.code for c in detect_identifiers(background + weak, params)}
            assert prefix.hex() not in miss, trial


def test_07_wire_properties():
    rng = random.Random(7)
    with budget(30):
        for n in range(10_000):
            tx = random_transaction(rng, segwit=n % 4 == 0)
            raw = tx.serialize()
            back, used = parse_transaction(raw)
            assert used == len(raw)
            assert back == tx and back.serialize() == raw
            assert back.txid[::-1].hex() == oracle_txid_hex(tx)
        assert len(empty_opreturn_transaction().serialize()) == 156


def test_08_peak_replay():
    rng = random.Random(8)
    registry = load_registry()
    start_2014 = 1_394_582_400  # 2014-03-12 00:00 UTC
    peak_week = range(JULY_PEAK_START, JULY_PEAK_START + 7 * DAY)  # a bucket starts on 2015-07-08
    background = []
    while len(background) < 20_000:
        ts = start_2014 + rng.randrange(0, 650 * DAY)
        payload = rng.choice([b"", b"EW x", b"\x99" + rng.randbytes(10), b"CC\x01"])
        if payload == b"" and ts in peak_week:
            continue
        background.append((ts, payload))
    peak = [(JULY_PEAK_START + rng.randrange(0, 3 * DAY), b"") for _ in range(36_900)]
    items = background + peak
    records = [OpReturnRecord(n.to_bytes(32, "big"), bytes(32), ts, p, 0)
               for n, (ts, p) in enumerate(items)]
    with budget(5):
        classified = list(classify_stream(records, registry))
        series = weekly_series(classified, "peaks")
    week_start, counts = max(series.points, key=lambda pt: pt[1]["Empty"])
    assert counts["Empty"] == 36_900
    for r in records[len(background):]:
        assert 0 <= (utc_date(r.block_timestamp) - week_start).days < 7
    assert sum(v["All"] for _, v in series.points) == len(records)


def test_09_ingestion_equivalence(rpc_server):
    txs = [opreturn_tx(EW_HELLO_SCRIPT, b"\x6a"), payload_tx(b"DOCPROOF" + bytes(32), seed=2),
           payload_tx(b"\x01\x02\x03", seed=3)]
    block = block_of(txs, height=400_000)
    url = rpc_server(FakeNode({400_000: block}))
    with budget(5):
        via_blk = list(scan_block_bytes(blk_bytes([block])))
        via_rpc = list(fetch_blocks_rpc(RpcClient(RpcConfig(url=url, timeout=5)), [400_000]))
    assert len(via_blk) == 4
    assert set(via_blk) == set(via_rpc)


def test_10_stats_determinism(tmp_path, capsys):
    rng = random.Random(10)
    registry = load_registry()
    idents = [i for e in registry.entries for i in e.identifiers] + [b"", b"\x93"]
    records = [OpReturnRecord(n.to_bytes(32, "big"), bytes(32),
                              JULY_PEAK_START + rng.randrange(-300, 300) * DAY,
                              rng.choice(idents) + rng.randbytes(rng.randrange(0, 40)), 0)
               for n in range(5000)]
    out = tmp_path / "out"
    out.mkdir()
    cli.classified_store(out).persist(list(classify_stream(records, registry)))
    names = sorted(p for p in (cli.PROTOCOL_SERIES_CSV, "Categories.csv", "Peaks.csv",
                               "LengthByTime.csv", "SizeDistribution.csv", "ProtocolTable.csv"))
    snapshots = []
    for jobs in (1, 1, max(32, os.cpu_count() or 1)):
        assert cli.main(["stats", "--out", str(out), "--jobs", str(jobs)]) == 0
        snapshots.append({n: (out / n).read_bytes() for n in names})
    capsys.readouterr()
    assert snapshots[0] == snapshots[1] == snapshots[2]
