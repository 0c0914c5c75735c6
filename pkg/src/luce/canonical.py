"""Canonical byte encoding, digests, and keyed signatures.

Every hash in the system (block hashes, transaction signatures, event-log
hashes) is computed over the same tagged, length-prefixed encoding so that
two runs, or two implementations, produce bit-identical digests.
"""

from __future__ import annotations

import hashlib
import hmac

ZERO_DIGEST = "0" * 64


def canon_bytes(value) -> bytes:
    """Encode a value as tagged, length-prefixed bytes.

    Supported values: None, bool, int, str, bytes, sequences, and dicts with
    string keys. Dict entries are sorted by key, so insertion order never
    leaks into a digest. The encoding is injective up to list/tuple identity.
    """
    if value is None:
        return b"N0:"
    if value is True:
        return b"B1:1"
    if value is False:
        return b"B1:0"
    if isinstance(value, int):
        body = str(value).encode("ascii")
        return b"I%d:%s" % (len(body), body)
    if isinstance(value, str):
        body = value.encode("utf-8")
        return b"S%d:%s" % (len(body), body)
    if isinstance(value, (bytes, bytearray)):
        return b"Y%d:%s" % (len(value), bytes(value))
    if isinstance(value, (list, tuple)):
        parts = [canon_bytes(item) for item in value]
        return b"L%d:%s" % (len(parts), b"".join(parts))
    if isinstance(value, dict):
        keys = sorted(value.keys())
        if any(not isinstance(k, str) for k in keys):
            raise TypeError("canonical dicts require string keys")
        parts = [canon_bytes(k) + canon_bytes(value[k]) for k in keys]
        return b"D%d:%s" % (len(parts), b"".join(parts))
    raise TypeError(f"value of type {type(value).__name__} has no canonical form")


def digest(value) -> str:
    """SHA-256 hex digest of the canonical encoding of `value`."""
    return hashlib.sha256(canon_bytes(value)).hexdigest()


def digest_bytes(data: bytes) -> str:
    """SHA-256 hex digest of raw bytes (used for replicated log copies)."""
    return hashlib.sha256(data).hexdigest()


def sign(key: str, value) -> str:
    """Keyed digest (HMAC-SHA256) of the canonical encoding of `value`."""
    return hmac.new(key.encode("ascii"), canon_bytes(value), hashlib.sha256).hexdigest()


def verify_signature(key: str, value, signature: str) -> bool:
    return hmac.compare_digest(sign(key, value), signature)


def derive_node_key(salt: str, node_id: str) -> str:
    """Deterministic per-node signing secret (stand-in for a real keypair)."""
    return hashlib.sha256(f"node-key|{salt}|{node_id}".encode("utf-8")).hexdigest()
