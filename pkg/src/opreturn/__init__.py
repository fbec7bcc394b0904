"""Extraction, classification and statistics for Bitcoin OP_RETURN metadata."""

from .classify import ProtocolRegistry, classify_payload, classify_stream, load_registry
from .discover import CandidateIdentifier, DiscoveryParams, detect_identifiers
from .records import Category, ClassifiedRecord, OpReturnRecord
from .script import ScriptClass, classify_script, extract_opreturn_payload
from .wire import BlockRecord, Transaction, parse_block, parse_transaction, read_compact_size

__version__ = "0.1.0"
