"""Fragment/protect/recover engine.

Content is processed as 256-bit (32-byte) units.  Each unit is cut into
eight 4-byte sub-fragments; a key-driven selector picks one sub-fragment
per unit as private material, and the remaining 28 bytes are XORed with
a keystream hashed from (selected sub-fragment, key, unit index).  The
concatenated protected remainders form the public payload; the selected
sub-fragments, the sub-unit tail, and a content digest form the private
stream.  Without the private stream the keystreams cannot be recomputed,
so holding the public payload plus the key still unlocks nothing.

All functions are pure; keys and streams are plain immutable bytes, so
concurrent use is safe.  ``protect`` accepts a worker count because unit
protection is order-independent once the selector stream is known.
"""

from __future__ import annotations

import hashlib
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

from .errors import IntegrityFailure, LengthMismatch

KEY_LEN = 16
UNIT_LEN = 32
SUB_LEN = 4
SUBS_PER_UNIT = UNIT_LEN // SUB_LEN
REMAINDER_LEN = UNIT_LEN - SUB_LEN
DIGEST_LEN = 32

# Domain separator for selector derivation; one hash yields 32 selectors.
_SELECTOR_DOMAIN = b"FRAG-SEL"
SELECTORS_PER_BLOCK = 32


def _sha256(data: bytes) -> bytes:
    return hashlib.sha256(data).digest()


def _xor(a: bytes, b: bytes) -> bytes:
    return (int.from_bytes(a, "big") ^ int.from_bytes(b, "big")).to_bytes(len(a), "big")


@dataclass(frozen=True)
class ProtectionKey:
    """128-bit secret driving fragment selection, keystreams, and AES."""

    bytes: bytes

    def __post_init__(self):
        if len(self.bytes) != KEY_LEN:
            raise ValueError(f"protection key must be {KEY_LEN} bytes, got {len(self.bytes)}")

    @classmethod
    def from_hex(cls, text: str) -> "ProtectionKey":
        return cls(bytes.fromhex(text))

    @classmethod
    def random(cls) -> "ProtectionKey":
        return cls(os.urandom(KEY_LEN))


@dataclass(frozen=True)
class ContentUnit:
    """One 32-byte unit of content plus its 0-based position."""

    bytes: bytes
    index: int

    def __post_init__(self):
        if len(self.bytes) != UNIT_LEN:
            raise ValueError(f"content unit must be {UNIT_LEN} bytes, got {len(self.bytes)}")
        if self.index < 0:
            raise ValueError("unit index must be non-negative")


@dataclass(frozen=True)
class FragmentSelection:
    """A unit split into its selected sub-fragment and the remainder.

    ``remainder`` keeps the seven non-selected sub-fragments in their
    original order, so ``unit()`` is an exact inverse of the split.
    """

    selector: int
    selected: bytes
    remainder: bytes

    def unit(self) -> bytes:
        return reinsert(self.remainder, self.selected, self.selector)


@dataclass(frozen=True)
class PrimitiveCounters:
    """Primitive-operation tally for one protection pass."""

    protection_hashes: int
    selector_hashes: int
    digest_passes: int

    @property
    def hash_invocations(self) -> int:
        return self.protection_hashes + self.selector_hashes + self.digest_passes


@dataclass(frozen=True)
class ProtectedStreams:
    """Output of ``protect``: the public payload and the private stream.

    ``prf_plain`` is selected sub-fragments ++ tail ++ SHA-256(content);
    it is the part that must go on to cipher protection.
    """

    puf_payload: bytes
    prf_plain: bytes
    unit_count: int
    tail_len: int
    counters: PrimitiveCounters

    @property
    def selected_bytes(self) -> int:
        return SUB_LEN * self.unit_count


def selector_stream(key: ProtectionKey, unit_count: int) -> bytes:
    """Return one selector in [0, 7] per unit, derived from the key alone.

    Block t of 32 selectors is SHA-256(key || "FRAG-SEL" || LE64(t)); each
    byte reduces mod 8 without bias (256 % 8 == 0).  Deterministic, so the
    recovering side regenerates the identical sequence, and bulk-generable
    so units can be protected in parallel.
    """
    if unit_count < 0:
        raise ValueError("unit_count must be non-negative")
    blocks = []
    prefix = key.bytes + _SELECTOR_DOMAIN
    for t in range((unit_count + SELECTORS_PER_BLOCK - 1) // SELECTORS_PER_BLOCK):
        block = _sha256(prefix + t.to_bytes(8, "little"))
        blocks.append(bytes(b % 8 for b in block))
    return b"".join(blocks)[:unit_count]


def split_unit(unit: bytes, selector: int) -> FragmentSelection:
    """Cut a 32-byte unit into the selected 4-byte sub-fragment and the
    28-byte remainder (non-selected sub-fragments, original order)."""
    if len(unit) != UNIT_LEN:
        raise ValueError(f"unit must be {UNIT_LEN} bytes, got {len(unit)}")
    if not 0 <= selector < SUBS_PER_UNIT:
        raise ValueError(f"selector must be in [0, {SUBS_PER_UNIT - 1}], got {selector}")
    off = SUB_LEN * selector
    return FragmentSelection(
        selector=selector,
        selected=unit[off:off + SUB_LEN],
        remainder=unit[:off] + unit[off + SUB_LEN:],
    )


def reinsert(remainder: bytes, selected: bytes, selector: int) -> bytes:
    """Inverse of ``split_unit``."""
    if len(remainder) != REMAINDER_LEN or len(selected) != SUB_LEN:
        raise ValueError("remainder must be 28 bytes and selected 4 bytes")
    if not 0 <= selector < SUBS_PER_UNIT:
        raise ValueError(f"selector must be in [0, {SUBS_PER_UNIT - 1}], got {selector}")
    off = SUB_LEN * selector
    return remainder[:off] + selected + remainder[off:]


def unit_keystream(selected: bytes, key: ProtectionKey, index: int) -> bytes:
    """28-byte keystream for one unit: SHA-256(selected || key || LE64(index))
    truncated to match the seven remaining sub-fragments.

    The index term forces distinct keystreams even for identical units.
    """
    if len(selected) != SUB_LEN:
        raise ValueError(f"selected sub-fragment must be {SUB_LEN} bytes")
    return _sha256(selected + key.bytes + index.to_bytes(8, "little"))[:REMAINDER_LEN]


def protect_unit(unit: ContentUnit, key: ProtectionKey, selector: int | None = None) -> tuple[bytes, bytes]:
    """Protect one unit; returns (public 28 bytes, selected 4 bytes).

    When ``selector`` is omitted it is recomputed from the selector stream
    at the unit's index (convenient but one extra hash per call; bulk
    callers should pass it in).
    """
    if selector is None:
        selector = selector_stream(key, unit.index + 1)[unit.index]
    sel = split_unit(unit.bytes, selector)
    keystream = unit_keystream(sel.selected, key, unit.index)
    return _xor(sel.remainder, keystream), sel.selected


def _protect_range(content: bytes, selectors: bytes, key_bytes: bytes, start: int, stop: int) -> tuple[bytes, bytes]:
    """Protect units [start, stop); returns (puf part, selected part)."""
    sha = hashlib.sha256
    puf = bytearray(REMAINDER_LEN * (stop - start))
    picked = bytearray(SUB_LEN * (stop - start))
    for i in range(start, stop):
        base = UNIT_LEN * i
        off = base + SUB_LEN * selectors[i]
        selected = content[off:off + SUB_LEN]
        keystream = sha(selected + key_bytes + i.to_bytes(8, "little")).digest()[:REMAINDER_LEN]
        remainder = content[base:off] + content[off + SUB_LEN:base + UNIT_LEN]
        j = i - start
        puf[REMAINDER_LEN * j:REMAINDER_LEN * (j + 1)] = _xor(remainder, keystream)
        picked[SUB_LEN * j:SUB_LEN * (j + 1)] = selected
    return bytes(puf), bytes(picked)


def protect(content: bytes, key: ProtectionKey, workers: int = 1) -> ProtectedStreams:
    """Split content into protected public and private streams.

    Full 32-byte units are protected in index order; the tail (content
    length mod 32) goes verbatim into the private stream, never keystream
    protected, so sub-unit files end up fully cipher-protected.  The
    private stream ends with SHA-256(content) as an integrity digest.

    ``workers`` > 1 protects unit ranges on a thread pool; output is
    byte-identical to the sequential path.
    """
    unit_count = len(content) // UNIT_LEN
    tail = content[UNIT_LEN * unit_count:]
    selectors = selector_stream(key, unit_count)

    if workers > 1 and unit_count >= workers:
        step = -(-unit_count // workers)
        ranges = [(s, min(s + step, unit_count)) for s in range(0, unit_count, step)]
        with ThreadPoolExecutor(max_workers=workers) as pool:
            parts = list(pool.map(
                lambda r: _protect_range(content, selectors, key.bytes, r[0], r[1]), ranges))
        puf_payload = b"".join(p for p, _ in parts)
        picked = b"".join(s for _, s in parts)
    else:
        puf_payload, picked = _protect_range(content, selectors, key.bytes, 0, unit_count)

    digest = _sha256(content)
    counters = PrimitiveCounters(
        protection_hashes=unit_count,
        selector_hashes=-(-unit_count // SELECTORS_PER_BLOCK),
        digest_passes=1,
    )
    return ProtectedStreams(
        puf_payload=puf_payload,
        prf_plain=picked + tail + digest,
        unit_count=unit_count,
        tail_len=len(tail),
        counters=counters,
    )


def unprotect_remainders(puf_payload: bytes, selected_stream: bytes, key: ProtectionKey) -> bytes:
    """XOR each public 28-byte block with the keystream implied by the
    given selected sub-fragments.

    This is exactly the computation available to a holder of the public
    payload: with the true selected stream it yields the original
    remainders, with guessed material it yields keystream noise.
    """
    if len(puf_payload) % REMAINDER_LEN:
        raise LengthMismatch("public payload length is not a multiple of 28")
    unit_count = len(puf_payload) // REMAINDER_LEN
    if len(selected_stream) != SUB_LEN * unit_count:
        raise LengthMismatch("selected stream does not cover every unit")
    sha = hashlib.sha256
    key_bytes = key.bytes
    out = bytearray(len(puf_payload))
    for i in range(unit_count):
        selected = selected_stream[SUB_LEN * i:SUB_LEN * (i + 1)]
        keystream = sha(selected + key_bytes + i.to_bytes(8, "little")).digest()[:REMAINDER_LEN]
        off = REMAINDER_LEN * i
        out[off:off + REMAINDER_LEN] = _xor(puf_payload[off:off + REMAINDER_LEN], keystream)
    return bytes(out)


def recover(puf_payload: bytes, prf_plain: bytes, key: ProtectionKey) -> bytes:
    """Rebuild content from the two streams and verify its digest.

    Raises LengthMismatch when the stream lengths cannot belong to one
    protection pass, and IntegrityFailure (carrying the attempted
    reconstruction) when the digest check fails: wrong key, corrupted
    fragment, or a mismatched pair.
    """
    if len(puf_payload) % REMAINDER_LEN:
        raise LengthMismatch("public payload length is not a multiple of 28")
    unit_count = len(puf_payload) // REMAINDER_LEN
    if len(prf_plain) < SUB_LEN * unit_count + DIGEST_LEN:
        raise LengthMismatch("private stream too short for unit count")
    tail_len = len(prf_plain) - SUB_LEN * unit_count - DIGEST_LEN
    if tail_len >= UNIT_LEN:
        raise LengthMismatch("private stream tail exceeds one unit")

    selected_stream = prf_plain[:SUB_LEN * unit_count]
    tail = prf_plain[SUB_LEN * unit_count:SUB_LEN * unit_count + tail_len]
    digest = prf_plain[-DIGEST_LEN:]

    remainders = unprotect_remainders(puf_payload, selected_stream, key)
    selectors = selector_stream(key, unit_count)
    units = []
    for i in range(unit_count):
        remainder = remainders[REMAINDER_LEN * i:REMAINDER_LEN * (i + 1)]
        selected = selected_stream[SUB_LEN * i:SUB_LEN * (i + 1)]
        units.append(reinsert(remainder, selected, selectors[i]))
    content = b"".join(units) + tail

    if _sha256(content) != digest:
        raise IntegrityFailure("content digest mismatch", attempted=content)
    return content


def expected_counters(content_len: int) -> PrimitiveCounters:
    """Primitive counts a protection pass over ``content_len`` bytes performs."""
    unit_count = content_len // UNIT_LEN
    return PrimitiveCounters(
        protection_hashes=unit_count,
        selector_hashes=-(-unit_count // SELECTORS_PER_BLOCK),
        digest_passes=1,
    )
