"""Encrypted blob store with expiring signed download URLs.

Facial profiles are opaque bytes: encrypted at rest with AES-256-GCM under a
single vault key, addressed by a random 128-bit id, and fetched only through
an HMAC-signed URL that binds blob id and expiry. Plaintext never touches
durable storage or logs.
"""

from __future__ import annotations

import hashlib
import hmac
import json
import secrets
import threading
from dataclasses import dataclass
from pathlib import Path
from urllib.parse import parse_qs, urlparse

from cryptography.exceptions import InvalidTag
from cryptography.hazmat.primitives.ciphers.aead import AESGCM

from guidefleet.core.clock import Clock
from guidefleet.core.errors import FleetError

MAX_BLOB_BYTES = 4 * 1024 * 1024
MAX_TTL_S = 3600
DEFAULT_RETENTION_S = 24 * 3600
_NONCE_BYTES = 12


class TooLarge(FleetError):
    pass


class UnknownBlob(FleetError):
    pass


class BadTtl(FleetError):
    pass


class Expired(FleetError):
    pass


class InvalidSignature(FleetError):
    pass


class CorruptCiphertext(FleetError):
    """Authentication tag or content hash check failed."""


@dataclass(frozen=True)
class SignedBlobUrl:
    path: str  # /v1/blobs/{blob_id}
    expires_at: int  # unix seconds
    signature: str  # hex MAC over (blob_id, expires_at)

    @property
    def blob_id(self) -> str:
        return self.path.rsplit("/", 1)[-1]

    def to_url(self) -> str:
        return f"{self.path}?exp={self.expires_at}&sig={self.signature}"

    @classmethod
    def parse(cls, url: str) -> "SignedBlobUrl":
        parsed = urlparse(url)
        params = parse_qs(parsed.query)
        try:
            return cls(
                path=parsed.path,
                expires_at=int(params["exp"][0]),
                signature=params["sig"][0],
            )
        except (KeyError, IndexError, ValueError) as exc:
            raise InvalidSignature(f"unparseable signed URL {url!r}") from exc


class BlobVault:
    """File-backed vault: {blob_id}.bin files plus an index.json sidecar.

    Blob files are nonce || ciphertext(+tag). The index maps blob id to
    created_at_ms and the SHA-256 of the plaintext (a digest only; the
    plaintext itself is never persisted).
    """

    def __init__(self, root: Path | str, key: bytes, clock: Clock):
        if len(key) != 32:
            raise ValueError("vault key must be 32 bytes")
        self.root = Path(root)
        self.root.mkdir(parents=True, exist_ok=True)
        self._aead = AESGCM(key)
        self._mac_key = hashlib.sha256(b"url-signing:" + key).digest()
        self.clock = clock
        self._lock = threading.Lock()
        self._index_path = self.root / "index.json"
        self._index: dict[str, dict] = {}
        if self._index_path.exists():
            self._index = json.loads(self._index_path.read_text(encoding="utf-8"))

    # -- storage ---------------------------------------------------------

    def put_blob(self, plaintext: bytes) -> str:
        if len(plaintext) > MAX_BLOB_BYTES:
            raise TooLarge(f"blob of {len(plaintext)} bytes exceeds {MAX_BLOB_BYTES}")
        blob_id = secrets.token_hex(16)
        nonce = secrets.token_bytes(_NONCE_BYTES)
        ciphertext = self._aead.encrypt(nonce, plaintext, blob_id.encode("ascii"))
        with self._lock:
            (self.root / f"{blob_id}.bin").write_bytes(nonce + ciphertext)
            self._index[blob_id] = {
                "created_at_ms": self.clock.wall(),
                "content_hash": hashlib.sha256(plaintext).hexdigest(),
                "size": len(plaintext),
            }
            self._write_index_locked()
        return blob_id

    def exists(self, blob_id: str) -> bool:
        with self._lock:
            return blob_id in self._index

    def purge_expired(self, retention_s: int = DEFAULT_RETENTION_S) -> int:
        if retention_s <= 0:
            raise ValueError("retention_s must be > 0")
        cutoff_ms = self.clock.wall() - retention_s * 1000
        removed = 0
        with self._lock:
            for blob_id in [b for b, meta in self._index.items() if meta["created_at_ms"] < cutoff_ms]:
                (self.root / f"{blob_id}.bin").unlink(missing_ok=True)
                del self._index[blob_id]
                removed += 1
            if removed:
                self._write_index_locked()
        return removed

    # -- signed URLs -----------------------------------------------------

    def sign_url(self, blob_id: str, ttl_s: int) -> SignedBlobUrl:
        if not (0 < ttl_s <= MAX_TTL_S):
            raise BadTtl(f"ttl must be in (0, {MAX_TTL_S}] seconds, got {ttl_s}")
        with self._lock:
            if blob_id not in self._index:
                raise UnknownBlob(f"no blob {blob_id!r}")
        expires_at = self.clock.wall() // 1000 + ttl_s
        return SignedBlobUrl(
            path=f"/v1/blobs/{blob_id}",
            expires_at=expires_at,
            signature=self._mac(blob_id, expires_at),
        )

    def fetch(self, url: SignedBlobUrl) -> bytes:
        """Verify expiry and MAC (constant-time), then decrypt and check integrity."""
        now_s = self.clock.wall() // 1000
        if now_s > url.expires_at:
            raise Expired(f"URL expired at {url.expires_at}")
        expected = self._mac(url.blob_id, url.expires_at)
        if not hmac.compare_digest(expected, url.signature):
            raise InvalidSignature("signature mismatch")
        with self._lock:
            meta = self._index.get(url.blob_id)
        if meta is None:
            raise UnknownBlob(f"no blob {url.blob_id!r}")
        raw = (self.root / f"{url.blob_id}.bin").read_bytes()
        nonce, ciphertext = raw[:_NONCE_BYTES], raw[_NONCE_BYTES:]
        try:
            plaintext = self._aead.decrypt(nonce, ciphertext, url.blob_id.encode("ascii"))
        except InvalidTag as exc:
            raise CorruptCiphertext("authentication tag failure") from exc
        if hashlib.sha256(plaintext).hexdigest() != meta["content_hash"]:
            raise CorruptCiphertext("content hash mismatch")
        return plaintext

    def _mac(self, blob_id: str, expires_at: int) -> str:
        message = f"{blob_id}:{expires_at}".encode("ascii")
        return hmac.new(self._mac_key, message, hashlib.sha256).hexdigest()

    def _write_index_locked(self) -> None:
        self._index_path.write_text(json.dumps(self._index, sort_keys=True), encoding="utf-8")
