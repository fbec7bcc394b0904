"""Minimal bitcoind JSON-RPC client and RPC-driven record extraction.

Configuration comes from a JSON file and/or environment variables::

    OPRETURN_RPC_URL, OPRETURN_RPC_USER, OPRETURN_RPC_PASSWORD, OPRETURN_RPC_TIMEOUT

Environment values override the file.
"""

from __future__ import annotations

import base64
import itertools
import json
import os
import urllib.error
import urllib.request
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Iterator

from .errors import HeightOutOfRange, RpcError, RpcErrorResponse, RpcUnreachable
from .records import OpReturnRecord
from .script import ScriptClass, classify_script, extract_opreturn_payload
from .store import ScanManifest
from .wire import hex_to_hash

# bitcoind: RPC_INVALID_PARAMETER, returned by getblockhash for a bad height
RPC_INVALID_PARAMETER = -8


@dataclass(frozen=True)
class RpcConfig:
    url: str = "http://127.0.0.1:8332"
    user: str | None = None
    password: str | None = None
    timeout: float = 30.0

    @classmethod
    def from_sources(cls, url: str | None = None, config_file=None, env=None) -> RpcConfig:
        env = os.environ if env is None else env
        values: dict = {}
        if config_file:
            try:
                values.update(json.loads(Path(config_file).read_text()))
            except (OSError, json.JSONDecodeError) as exc:
                raise RpcError(f"cannot read RPC config {config_file}: {exc}") from None
        for key in ("url", "user", "password", "timeout"):
            v = env.get(f"OPRETURN_RPC_{key.upper()}")
            if v:
                values[key] = v
        if url:
            values["url"] = url
        if "timeout" in values:
            values["timeout"] = float(values["timeout"])
        return cls(**{k: v for k, v in values.items() if k in ("url", "user", "password", "timeout")})


class RpcClient:
    def __init__(self, config: RpcConfig):
        self.config = config
        self._ids = itertools.count(1)

    def call(self, method: str, *params):
        req_id = next(self._ids)
        body = json.dumps({"jsonrpc": "1.0", "id": req_id, "method": method,
                           "params": list(params)}).encode()
        headers = {"Content-Type": "application/json"}
        if self.config.user is not None:
            token = f"{self.config.user}:{self.config.password or ''}".encode()
            headers["Authorization"] = "Basic " + base64.b64encode(token).decode()
        request = urllib.request.Request(self.config.url, body, headers)
        try:
            with urllib.request.urlopen(request, timeout=self.config.timeout) as resp:
                payload = resp.read()
        except urllib.error.HTTPError as exc:
            # bitcoind answers RPC errors with HTTP 404/500 and a JSON body
            payload = exc.read()
            if not payload:
                raise RpcUnreachable(f"{self.config.url}: HTTP {exc.code}") from None
        except (urllib.error.URLError, OSError) as exc:
            raise RpcUnreachable(f"{self.config.url}: {exc}") from None
        try:
            reply = json.loads(payload)
        except json.JSONDecodeError:
            raise RpcError(f"non-JSON reply to {method}") from None
        error = reply.get("error")
        if error:
            raise RpcErrorResponse(error.get("code"), error.get("message"))
        return reply.get("result")

    def getblockhash(self, height: int) -> str:
        try:
            return self.call("getblockhash", height)
        except RpcErrorResponse as exc:
            if exc.code == RPC_INVALID_PARAMETER:
                raise HeightOutOfRange(exc.code, exc.rpc_message) from None
            raise

    def getblock(self, block_hash: str, verbosity: int = 2) -> dict:
        return self.call("getblock", block_hash, verbosity)


def parse_height_range(text: str) -> range:
    """``"A..B"`` is inclusive on both ends; a bare ``"A"`` is one height."""
    lo, sep, hi = text.partition("..")
    try:
        start = int(lo)
        stop = int(hi) if sep else start
    except ValueError:
        raise ValueError(f"bad height range {text!r}, expected A..B") from None
    if start < 0 or stop < start:
        raise ValueError(f"bad height range {text!r}")
    return range(start, stop + 1)


def block_json_records(block: dict) -> Iterator[OpReturnRecord]:
    """Records from a ``getblock`` verbosity-2 result."""
    block_hash = hex_to_hash(block["hash"])
    timestamp = block["time"]
    for tx in block["tx"]:
        txid = hex_to_hash(tx["txid"])
        for out in tx["vout"]:
            script = bytes.fromhex(out["scriptPubKey"]["hex"])
            if classify_script(script) is not ScriptClass.NULL_DATA:
                continue
            yield OpReturnRecord(txid, block_hash, timestamp,
                                 extract_opreturn_payload(script).data, out["n"])


def fetch_blocks_rpc(client: RpcClient, heights: Iterable[int],
                     manifest: ScanManifest | None = None) -> Iterator[OpReturnRecord]:
    manifest = manifest if manifest is not None else ScanManifest()
    manifest.sources.append(client.config.url)
    for height in heights:
        block = client.getblock(client.getblockhash(height), 2)
        manifest.blocks += 1
        manifest.transactions += len(block["tx"])
        for rec in block_json_records(block):
            manifest.opreturn_outputs += 1
            manifest.records += 1
            yield rec
