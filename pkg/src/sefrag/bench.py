"""Timing harness comparing selective protection with whole-file AES.

Both paths run over the same in-memory buffer so the numbers reflect
algorithmic cost rather than disk speed. The selective path is the full
pipeline a seal performs: split, keystream protection, digest, and the
AES pass over the private stream. The baseline is AES-128-CBC over the
entire buffer, the conventional protect-everything approach.
"""

from __future__ import annotations

import os
import statistics
import time
from dataclasses import dataclass

from cryptography.hazmat.primitives import padding
from cryptography.hazmat.primitives.ciphers import Cipher, algorithms, modes

from . import core
from .core import ProtectionKey

MIB = 1 << 20


def _aes_cbc(data: bytes, key: ProtectionKey, iv: bytes) -> bytes:
    padder = padding.PKCS7(128).padder()
    padded = padder.update(data) + padder.finalize()
    enc = Cipher(algorithms.AES(key.bytes), modes.CBC(iv)).encryptor()
    return enc.update(padded) + enc.finalize()


@dataclass(frozen=True)
class BenchReport:
    """Measured timings plus the exact primitive counts behind them.

    Per-iteration wall times are kept so callers can see spread; the
    scalar throughput properties use the median run.
    """

    input_size: int
    iterations: int
    se_elapsed: tuple[float, ...]
    aes_baseline_elapsed: tuple[float, ...]
    aes_bytes_se: int
    aes_bytes_baseline: int
    hash_invocations_se: int
    selected_bytes: int

    @property
    def se_throughput(self) -> float:
        """Selective-path throughput in MB/s (median iteration)."""
        return self.input_size / MIB / statistics.median(self.se_elapsed)

    @property
    def aes_throughput(self) -> float:
        """Whole-buffer AES throughput in MB/s (median iteration)."""
        return self.input_size / MIB / statistics.median(self.aes_baseline_elapsed)

    @property
    def ratio(self) -> float:
        """Speedup of the selective path over the baseline (hardware-dependent)."""
        return self.se_throughput / self.aes_throughput


def run_bench(
    size_mb: int,
    iterations: int = 3,
    key: ProtectionKey | None = None,
    workers: int = 1,
) -> BenchReport:
    """Protect a random ``size_mb`` MiB buffer both ways, ``iterations`` times."""
    if size_mb < 1:
        raise ValueError("bench size must be at least 1 MB")
    if iterations < 1:
        raise ValueError("iterations must be positive")
    if key is None:
        key = ProtectionKey.random()
    buf = os.urandom(size_mb * MIB)
    iv = os.urandom(16)

    se_times: list[float] = []
    aes_times: list[float] = []
    aes_bytes_se = 0
    aes_bytes_baseline = 0
    counters = core.expected_counters(len(buf))

    for _ in range(iterations):
        start = time.perf_counter()
        streams = core.protect(buf, key, workers=workers)
        private_ct = _aes_cbc(streams.prf_plain, key, iv)
        se_times.append(time.perf_counter() - start)
        aes_bytes_se = len(private_ct)

        start = time.perf_counter()
        baseline_ct = _aes_cbc(buf, key, iv)
        aes_times.append(time.perf_counter() - start)
        aes_bytes_baseline = len(baseline_ct)

    return BenchReport(
        input_size=len(buf),
        iterations=iterations,
        se_elapsed=tuple(se_times),
        aes_baseline_elapsed=tuple(aes_times),
        aes_bytes_se=aes_bytes_se,
        aes_bytes_baseline=aes_bytes_baseline,
        hash_invocations_se=counters.hash_invocations,
        selected_bytes=core.SUB_LEN * counters.protection_hashes,
    )


def format_table(report: BenchReport) -> str:
    def spread(times: tuple[float, ...]) -> str:
        return "min %.3fs / median %.3fs / max %.3fs" % (
            min(times),
            statistics.median(times),
            max(times),
        )

    lines = [
        "input size           %d bytes" % report.input_size,
        "iterations           %d" % report.iterations,
        "selective            %.1f MB/s  (%s)" % (report.se_throughput, spread(report.se_elapsed)),
        "aes-128-cbc (full)   %.1f MB/s  (%s)"
        % (report.aes_throughput, spread(report.aes_baseline_elapsed)),
        "ratio                %.2fx" % report.ratio,
        "aes bytes, selective %d" % report.aes_bytes_se,
        "aes bytes, baseline  %d" % report.aes_bytes_baseline,
        "hash invocations     %d" % report.hash_invocations_se,
        "selected bytes       %d" % report.selected_bytes,
    ]
    return "\n".join(lines)


def format_csv(report: BenchReport) -> str:
    """One row per iteration, wall seconds for both paths."""
    rows = ["iteration,se_seconds,aes_seconds"]
    for i, (se, aes) in enumerate(zip(report.se_elapsed, report.aes_baseline_elapsed)):
        rows.append("%d,%.6f,%.6f" % (i, se, aes))
    return "\n".join(rows) + "\n"
