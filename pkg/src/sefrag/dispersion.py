"""Fragment placement across storage backends.

Blobs are content addressed: the id of a blob is SHA-256 of its bytes,
recomputed and checked on every read, so silent corruption on any
backend surfaces as ``CorruptBlob``.  Three interchangeable backends:
in-memory, local directory (two-level fan-out by the first two hex
chars of the id, atomic write via temp file + rename), and a remote
client speaking the wire protocol below.

Wire protocol, one TCP connection carrying any number of requests::

    request:  opcode u8 | id 32B | (PUT only: length u64 LE | payload)
    response: status u8 | (GET, status OK only: length u64 LE | payload)

    opcodes: 0x01 PUT, 0x02 GET, 0x03 DELETE, 0x04 STAT
    status:  0x00 OK, 0x01 NOT_FOUND, 0x02 ERROR

The server re-verifies that a PUT id matches the payload hash and
answers ERROR otherwise.  Payloads are capped at 1 GiB.

``disperse`` enforces the placement rule: the public fragment goes to
the untrusted (cloud) backend, the private fragment to the device
backend, and the two must never share a backend; holding either store,
even together with the key, is then insufficient to reconstruct data.
"""

from __future__ import annotations

import hashlib
import json
import os
import socket
import socketserver
import struct
import tempfile
import threading
from dataclasses import dataclass
from pathlib import Path

from .container import PrfContainer, PufContainer
from .errors import (
    BackendUnavailable,
    BindError,
    CorruptBlob,
    FormatError,
    NotFound,
    SameBackend,
)

MAX_PAYLOAD = 1 << 30

OP_PUT = 0x01
OP_GET = 0x02
OP_DELETE = 0x03
OP_STAT = 0x04

ST_OK = 0x00
ST_NOT_FOUND = 0x01
ST_ERROR = 0x02

_LEN = struct.Struct("<Q")


@dataclass(frozen=True)
class BlobRef:
    """32-byte content address of a stored blob."""

    id: bytes

    def __post_init__(self):
        if len(self.id) != 32:
            raise ValueError("blob id must be 32 bytes")

    @classmethod
    def for_payload(cls, payload: bytes) -> "BlobRef":
        return cls(hashlib.sha256(payload).digest())

    @classmethod
    def from_hex(cls, text: str) -> "BlobRef":
        return cls(bytes.fromhex(text))

    @property
    def hex(self) -> str:
        return self.id.hex()


class Backend:
    """Blob store interface; see the concrete backends below."""

    name: str

    def put(self, payload: bytes) -> BlobRef:
        raise NotImplementedError

    def get(self, ref: BlobRef) -> bytes:
        raise NotImplementedError

    def delete(self, ref: BlobRef) -> bool:
        raise NotImplementedError

    def stat(self, ref: BlobRef) -> bool:
        raise NotImplementedError


class MemoryBackend(Backend):
    def __init__(self, name: str = "memory"):
        self.name = name
        self._blobs: dict[bytes, bytes] = {}

    def __len__(self) -> int:
        return len(self._blobs)

    def put(self, payload: bytes) -> BlobRef:
        ref = BlobRef.for_payload(payload)
        self._blobs[ref.id] = payload
        return ref

    def get(self, ref: BlobRef) -> bytes:
        try:
            payload = self._blobs[ref.id]
        except KeyError:
            raise NotFound(f"no blob {ref.hex}") from None
        if BlobRef.for_payload(payload) != ref:
            raise CorruptBlob(f"blob {ref.hex} fails its hash check")
        return payload

    def delete(self, ref: BlobRef) -> bool:
        return self._blobs.pop(ref.id, None) is not None

    def stat(self, ref: BlobRef) -> bool:
        return ref.id in self._blobs


class DirectoryBackend(Backend):
    def __init__(self, root: str | Path, name: str | None = None):
        self.root = Path(root)
        self.name = name if name is not None else str(self.root)
        self.root.mkdir(parents=True, exist_ok=True)

    def _path(self, ref: BlobRef) -> Path:
        return self.root / ref.hex[:2] / ref.hex

    def put(self, payload: bytes) -> BlobRef:
        ref = BlobRef.for_payload(payload)
        path = self._path(ref)
        if path.exists():
            return ref
        path.parent.mkdir(exist_ok=True)
        # Temp file + rename so readers never observe a partial blob.
        fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=".tmp-")
        try:
            os.write(fd, payload)
        finally:
            os.close(fd)
        os.replace(tmp, path)
        return ref

    def get(self, ref: BlobRef) -> bytes:
        path = self._path(ref)
        try:
            payload = path.read_bytes()
        except FileNotFoundError:
            raise NotFound(f"no blob {ref.hex}") from None
        if BlobRef.for_payload(payload) != ref:
            raise CorruptBlob(f"blob {ref.hex} fails its hash check")
        return payload

    def delete(self, ref: BlobRef) -> bool:
        try:
            self._path(ref).unlink()
            return True
        except FileNotFoundError:
            return False

    def stat(self, ref: BlobRef) -> bool:
        return self._path(ref).exists()


def _recv_exact(sock: socket.socket, n: int) -> bytes:
    buf = bytearray()
    while len(buf) < n:
        chunk = sock.recv(min(n - len(buf), 1 << 20))
        if not chunk:
            raise ConnectionError("peer closed mid-frame")
        buf += chunk
    return bytes(buf)


class RemoteBackend(Backend):
    """Client for a blob server; one connection per call."""

    def __init__(self, host: str, port: int, name: str | None = None, timeout: float = 10.0):
        self.host = host
        self.port = port
        self.timeout = timeout
        self.name = name if name is not None else f"remote:{host}:{port}"

    def _request(self, opcode: int, ref: BlobRef, payload: bytes | None = None) -> tuple[int, bytes]:
        frame = bytes([opcode]) + ref.id
        if payload is not None:
            frame += _LEN.pack(len(payload)) + payload
        try:
            with socket.create_connection((self.host, self.port), timeout=self.timeout) as sock:
                sock.sendall(frame)
                status = _recv_exact(sock, 1)[0]
                body = b""
                if opcode == OP_GET and status == ST_OK:
                    (length,) = _LEN.unpack(_recv_exact(sock, 8))
                    if length > MAX_PAYLOAD:
                        raise FormatError("server announced an oversized payload")
                    body = _recv_exact(sock, length)
                return status, body
        except (ConnectionError, socket.timeout, socket.gaierror) as exc:
            raise BackendUnavailable(f"{self.name}: {exc}") from exc
        except OSError as exc:
            raise BackendUnavailable(f"{self.name}: {exc}") from exc

    def put(self, payload: bytes) -> BlobRef:
        if len(payload) > MAX_PAYLOAD:
            raise ValueError("payload exceeds the 1 GiB protocol cap")
        ref = BlobRef.for_payload(payload)
        status, _ = self._request(OP_PUT, ref, payload)
        if status != ST_OK:
            raise BackendUnavailable(f"{self.name}: server refused put (status {status})")
        return ref

    def get(self, ref: BlobRef) -> bytes:
        status, body = self._request(OP_GET, ref)
        if status == ST_NOT_FOUND:
            raise NotFound(f"no blob {ref.hex}")
        if status != ST_OK:
            raise CorruptBlob(f"server could not produce a valid blob {ref.hex}")
        if BlobRef.for_payload(body) != ref:
            raise CorruptBlob(f"blob {ref.hex} fails its hash check")
        return body

    def delete(self, ref: BlobRef) -> bool:
        status, _ = self._request(OP_DELETE, ref)
        return status == ST_OK

    def stat(self, ref: BlobRef) -> bool:
        status, _ = self._request(OP_STAT, ref)
        return status == ST_OK


class _BlobRequestHandler(socketserver.BaseRequestHandler):
    def handle(self):
        backend: DirectoryBackend = self.server.backend  # type: ignore[attr-defined]
        sock = self.request
        while True:
            try:
                op_raw = sock.recv(1)
            except OSError:
                return
            if not op_raw:
                return
            opcode = op_raw[0]
            if opcode not in (OP_PUT, OP_GET, OP_DELETE, OP_STAT):
                sock.sendall(bytes([ST_ERROR]))
                continue
            try:
                ref = BlobRef(_recv_exact(sock, 32))
                if opcode == OP_PUT:
                    (length,) = _LEN.unpack(_recv_exact(sock, 8))
                    if length > MAX_PAYLOAD:
                        # Framing can't be trusted past an oversize claim.
                        sock.sendall(bytes([ST_ERROR]))
                        return
                    payload = _recv_exact(sock, length)
                    if BlobRef.for_payload(payload) != ref:
                        sock.sendall(bytes([ST_ERROR]))
                        continue
                    backend.put(payload)
                    sock.sendall(bytes([ST_OK]))
                elif opcode == OP_GET:
                    try:
                        payload = backend.get(ref)
                    except NotFound:
                        sock.sendall(bytes([ST_NOT_FOUND]))
                    except CorruptBlob:
                        sock.sendall(bytes([ST_ERROR]))
                    else:
                        sock.sendall(bytes([ST_OK]) + _LEN.pack(len(payload)) + payload)
                elif opcode == OP_DELETE:
                    sock.sendall(bytes([ST_OK if backend.delete(ref) else ST_NOT_FOUND]))
                else:
                    sock.sendall(bytes([ST_OK if backend.stat(ref) else ST_NOT_FOUND]))
            except (ConnectionError, OSError):
                return


class _ThreadingServer(socketserver.ThreadingTCPServer):
    allow_reuse_address = True
    daemon_threads = True


class BlobServer:
    """Wire-protocol server over a directory store."""

    def __init__(self, host: str, port: int, root: str | Path):
        try:
            self._server = _ThreadingServer((host, port), _BlobRequestHandler)
        except OSError as exc:
            raise BindError(f"cannot bind {host}:{port}: {exc}") from exc
        self._server.backend = DirectoryBackend(root)  # type: ignore[attr-defined]
        self._thread: threading.Thread | None = None

    @property
    def address(self) -> tuple[str, int]:
        return self._server.server_address[:2]

    def run(self):
        """Serve until ``stop`` (blocking)."""
        self._server.serve_forever(poll_interval=0.1)

    def start(self):
        self._thread = threading.Thread(target=self.run, daemon=True)
        self._thread.start()

    def stop(self):
        self._server.shutdown()
        self._server.server_close()
        if self._thread is not None:
            self._thread.join(timeout=5)
            self._thread = None

    def __enter__(self) -> "BlobServer":
        self.start()
        return self

    def __exit__(self, *exc_info):
        self.stop()


def serve(bind: tuple[str, int], root: str | Path) -> BlobServer:
    """Bind a blob server on ``bind`` over ``root``; caller runs/stops it."""
    return BlobServer(bind[0], bind[1], root)


@dataclass(frozen=True)
class Placement:
    """Where one record's fragments live."""

    record_id: bytes
    puf_ref: BlobRef
    puf_backend: str
    prf_ref: BlobRef
    prf_backend: str

    def to_json(self) -> dict:
        return {
            "record_id": self.record_id.hex(),
            "puf": {"id": self.puf_ref.hex, "backend": self.puf_backend},
            "prf": {"id": self.prf_ref.hex, "backend": self.prf_backend},
        }

    @classmethod
    def from_json(cls, obj: dict) -> "Placement":
        return cls(
            record_id=bytes.fromhex(obj["record_id"]),
            puf_ref=BlobRef.from_hex(obj["puf"]["id"]),
            puf_backend=obj["puf"]["backend"],
            prf_ref=BlobRef.from_hex(obj["prf"]["id"]),
            prf_backend=obj["prf"]["backend"],
        )


class PlacementIndex:
    """Append-only JSONL record of placements; last write wins per record."""

    def __init__(self, path: str | Path):
        self.path = Path(path)

    def record(self, placement: Placement):
        self.path.parent.mkdir(parents=True, exist_ok=True)
        with self.path.open("a", encoding="utf-8") as fp:
            fp.write(json.dumps(placement.to_json()) + "\n")

    def records(self) -> dict[bytes, Placement]:
        out: dict[bytes, Placement] = {}
        if not self.path.exists():
            return out
        with self.path.open(encoding="utf-8") as fp:
            for line in fp:
                line = line.strip()
                if line:
                    placement = Placement.from_json(json.loads(line))
                    out[placement.record_id] = placement
        return out

    def lookup(self, record_id: bytes) -> Placement | None:
        return self.records().get(record_id)

    def __contains__(self, record_id: bytes) -> bool:
        return self.lookup(record_id) is not None


def disperse(
    puf: PufContainer,
    prf: PrfContainer,
    device_backend: Backend,
    cloud_backend: Backend,
    index: PlacementIndex | None = None,
) -> Placement:
    """Store the pair per the dispersion rule and record the placement.

    The public fragment goes to the cloud first; the private fragment is
    stored only after that succeeds, so a cloud failure leaves no partial
    placement behind.
    """
    if device_backend is cloud_backend or device_backend.name == cloud_backend.name:
        raise SameBackend(
            f"public and private fragments must not share backend {cloud_backend.name!r}"
        )
    puf_ref = cloud_backend.put(puf.to_bytes())
    prf_ref = device_backend.put(prf.to_bytes())
    placement = Placement(
        record_id=puf.file_id,
        puf_ref=puf_ref,
        puf_backend=cloud_backend.name,
        prf_ref=prf_ref,
        prf_backend=device_backend.name,
    )
    if index is not None:
        index.record(placement)
    return placement
