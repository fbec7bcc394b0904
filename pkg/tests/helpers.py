"""Synthetic chain data and independent oracles for the test-suite."""

import bisect
import hashlib
import random
import struct
from collections import defaultdict

from opreturn.script import nulldata_script
from opreturn.store import frame_block
from opreturn.wire import (
    Transaction,
    TxInput,
    TxOutput,
    coinbase_transaction,
    hash_to_hex,
    make_block,
)

EW_HELLO_SCRIPT = bytes.fromhex("6a0945572048656c6c6f21")
P2PKH_SCRIPT = bytes.fromhex("76a914") + bytes(range(20)) + bytes.fromhex("88ac")

# 2015-07-08 00:00:00 UTC
JULY_PEAK_START = 1436313600


# -- oracles ----------------------------------------------------------------

def sha256d(data: bytes) -> bytes:
    return hashlib.sha256(hashlib.sha256(data).digest()).digest()


def oracle_varint(n: int) -> bytes:
    if n < 253:
        return struct.pack("B", n)
    if n < 1 << 16:
        return struct.pack("<BH", 253, n)
    if n < 1 << 32:
        return struct.pack("<BI", 254, n)
    return struct.pack("<BQ", 255, n)


def oracle_decode_varint(buf: bytes):
    """Reference decoder written against the table of prefix widths."""
    prefix = buf[0]
    if prefix == 0xFD:
        return struct.unpack_from("<H", buf, 1)[0], 3
    if prefix == 0xFE:
        return struct.unpack_from("<I", buf, 1)[0], 5
    if prefix == 0xFF:
        return struct.unpack_from("<Q", buf, 1)[0], 9
    return prefix, 1


def oracle_serialize_stripped(tx: Transaction) -> bytes:
    """Legacy serialization built field by field with ``struct``."""
    out = [struct.pack("<l", tx.version), oracle_varint(len(tx.inputs))]
    for i in tx.inputs:
        out += [i.prev_txid, struct.pack("<L", i.prev_output_index),
                oracle_varint(len(i.in_script)), i.in_script, struct.pack("<L", i.sequence)]
    out.append(oracle_varint(len(tx.outputs)))
    for o in tx.outputs:
        out += [struct.pack("<q", o.value), oracle_varint(len(o.out_script)), o.out_script]
    out.append(struct.pack("<L", tx.lock_time))
    return b"".join(out)


def oracle_txid_hex(tx: Transaction) -> str:
    return sha256d(oracle_serialize_stripped(tx))[::-1].hex()


def brute_force_candidates(payloads, D=12, delta=2, N=100, unit="hex"):
    """Count prefixes by binary search over the sorted symbol strings."""
    alphabet = 16 if unit == "hex" else 256
    strings = sorted(p.hex() for p in payloads)
    step = 1 if unit == "hex" else 2
    total = len(payloads)
    out = set()
    for i in range(1, D + 1):
        width = i * step
        seen = {s[:width] for s in strings if len(s) >= width}
        for prefix in seen:
            lo = bisect.bisect_left(strings, prefix)
            hi = bisect.bisect_left(strings, prefix + "g")  # 'g' sorts after every hex digit
            n = sum(1 for s in strings[lo:hi] if len(s) >= width)
            if n * alphabet ** i > total * delta and n > N:
                out.add((prefix, i, n))
    return out


# -- synthetic data ---------------------------------------------------------

def spend_input(rng=None, seed=0) -> TxInput:
    rng = rng or random.Random(seed)
    return TxInput(rng.randbytes(32), rng.randrange(4), b"\x48" + rng.randbytes(72), 0xFFFFFFFF)


def opreturn_tx(*scripts, rng=None, seed=0, extra_outputs=()) -> Transaction:
    rng = rng or random.Random(seed)
    outs = tuple(TxOutput(0, s) for s in scripts) + tuple(extra_outputs)
    return Transaction(1, (spend_input(rng),), outs, 0)


def payload_tx(payload: bytes, rng=None, seed=0) -> Transaction:
    return opreturn_tx(nulldata_script(payload) if payload else b"\x6a", rng=rng, seed=seed)


def block_of(txs, timestamp=JULY_PEAK_START, height=1, prev=bytes(32)):
    return make_block([coinbase_transaction(height), *txs], timestamp, prev_block_hash=prev)


def blk_bytes(blocks, padding=0) -> bytes:
    return b"".join(frame_block(b.serialize()) for b in blocks) + bytes(padding)


def random_transaction(rng: random.Random, segwit=False) -> Transaction:
    def script():
        n = rng.choice([0, 1, 20, 25, 75, 76, 80, 83, 255, 256, 300])
        return rng.randbytes(n)

    inputs = tuple(
        TxInput(rng.randbytes(32), rng.getrandbits(32), script(), rng.getrandbits(32),
                tuple(rng.randbytes(rng.choice([0, 33, 72])) for _ in range(rng.randrange(1, 3)))
                if segwit else ())
        for _ in range(rng.randrange(1, 4))
    )
    outputs = tuple(TxOutput(rng.randrange(0, 21 * 10 ** 14 + 1), script())
                    for _ in range(rng.randrange(1, 4)))
    return Transaction(rng.randrange(-2 ** 31, 2 ** 31), inputs, outputs, rng.getrandbits(32))


def block_to_rpc_json(block) -> dict:
    """What ``getblock <hash> 2`` returns for ``block`` (fields used by the extractor)."""
    return {
        "hash": hash_to_hex(block.block_hash),
        "time": block.timestamp,
        "tx": [
            {
                "txid": hash_to_hex(tx.txid),
                "vout": [
                    {"value": o.value / 1e8, "n": n,
                     "scriptPubKey": {"hex": o.out_script.hex()}}
                    for n, o in enumerate(tx.outputs)
                ],
            }
            for tx in block.transactions
        ],
    }


class FakeNode:
    """In-memory stand-in for bitcoind's getblockhash/getblock pair."""

    def __init__(self, blocks_by_height):
        self.blocks = dict(blocks_by_height)
        self.calls = defaultdict(int)

    def handle(self, method, params):
        self.calls[method] += 1
        if method == "getblockhash":
            height = params[0]
            if height not in self.blocks:
                return None, {"code": -8, "message": "Block height out of range"}
            return hash_to_hex(self.blocks[height].block_hash), None
        if method == "getblock":
            for b in self.blocks.values():
                if hash_to_hex(b.block_hash) == params[0]:
                    return block_to_rpc_json(b), None
            return None, {"code": -5, "message": "Block not found"}
        return None, {"code": -32601, "message": "Method not found"}


# -- published aggregates ---------------------------------------------------

# (category, protocol, first tx date, tx count, total metadata bytes, avg as printed)
PUBLISHED_ROWS = [
    ("Assets", "Colu", "2015/07/09", 237_479, 4_290_388, "18.0"),
    ("Assets", "CoinSpark", "2014/07/02", 28_026, 956_904, "34.1"),
    ("Assets", "OpenAssets", "2014/05/03", 133_570, 1_728_350, "12.9"),
    ("Assets", "Omni", "2015/08/10", 105_979, 2_132_565, "20.1"),
    ("DocumentNotary", "Factom", "2014/04/11", 74_159, 2_966_234, "40.0"),
    ("DocumentNotary", "Stampery", "2015/03/09", 74_249, 2_627_540, "35.4"),
    ("DocumentNotary", "Proof of Existence", "2014/04/21", 5_262, 210_433, "40.0"),
    ("DocumentNotary", "Blocksign", "2014/08/04", 1_460, 55_192, "37.8"),
    ("DocumentNotary", "CryptoCopyright", "2014/08/02", 46, 1_840, "40"),
    ("DocumentNotary", "Stampd", "2015/01/03", 473, 18_867, "39.9"),
    ("DocumentNotary", "BitProof", "2015/02/25", 758, 30_320, "40"),
    ("DocumentNotary", "ProveBit", "2015/04/05", 57, 2_280, "40"),
    ("DocumentNotary", "Remembr", "2015/08/25", 28, 1_128, "40.3"),
    ("DocumentNotary", "OriginalMy", "2015/07/12", 126, 4_788, "38"),
    ("DocumentNotary", "LaPreuve", "2014/12/07", 67, 2_623, "39.1"),
    ("DocumentNotary", "Nicosia", "2014/09/12", 20, 684, "34.2"),
    ("DigitalArts", "Monegraph", "2015/06/28", 63_278, 2_317_151, "36.6"),
    ("DigitalArts", "Blockai", "2015/01/09", 527, 34_225, "64.9"),
    ("DigitalArts", "Ascribe", "2014/12/19", 40_859, 847_641, "20.7"),
    ("Other", "Eternity Wall", "2015/06/24", 3_715, 160_191, "43.1"),
    ("Other", "Blockstore", "2014/12/10", 191_907, 5_494_174, "28.6"),
    ("Other", "SmartBit", "2015/11/24", 8_329, 299_844, "36"),
    ("Empty", "Empty", "2014/03/20", 296_491, 0, "0"),
    ("Unknown", "Unknown", "2014/03/12", 620_843, 20_023_345, "32.3"),
]

# per-category subtotal rows and the grand total, as printed
PUBLISHED_TOTALS = {
    "Assets": (505_054, 9_108_207, "18.0"),
    "DocumentNotary": (156_705, 5_921_929, "37.8"),
    "DigitalArts": (104_664, 3_199_017, "30.6"),
    "Other": (203_951, 5_954_209, "29.2"),
    "Empty": (296_491, 0, "0"),
    "Unknown": (620_843, 20_023_345, "32.3"),
    "TOTAL": (1_887_708, 44_206_707, "23.4"),
}

PUBLISHED_SHARES = {
    "Assets": 26.7, "DocumentNotary": 8.3, "DigitalArts": 5.5,
    "Other": 10.8, "Empty": 15.7, "Unknown": 32.8,
}
