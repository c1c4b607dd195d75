"""Missing-timestamp detection over regular series."""

from __future__ import annotations

import numpy as np


def detect_gaps(series, expected_interval: int) -> list[tuple[int, int]]:
    """One (gap_start, gap_end) entry per maximal run of missing timestamps.

    Bounds are inclusive and expressed in expected timestamps. Accepts a
    sequence of timestamps or of records with a `ts` attribute. Empty or
    single-element input yields no gaps.
    """
    if len(series) == 0:
        return []
    first = series[0]
    if hasattr(first, "ts"):
        ts = np.array([r.ts for r in series], dtype=np.int64)
    else:
        ts = np.asarray(series, dtype=np.int64)
    gaps: list[tuple[int, int]] = []
    jumps = np.nonzero(np.diff(ts) > expected_interval)[0]
    for i in jumps:
        gaps.append((int(ts[i] + expected_interval), int(ts[i + 1] - expected_interval)))
    return gaps


def gap_covered_count(gaps: list[tuple[int, int]], expected_interval: int) -> int:
    """Total number of missing timestamps the gap list covers."""
    return sum((end - start) // expected_interval + 1 for start, end in gaps)
