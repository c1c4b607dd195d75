"""Fixed-parameter feature scaling.

Centers and scales are configuration, never learned from the data being
normalized; that keeps live behavior independent of dataset statistics.
"""

from __future__ import annotations

import numpy as np

from ..errors import InputError


class NormalizationSpec:
    """Per-feature (center, scale) pairs, fixed at configuration time."""

    def __init__(self, entries: dict[str, tuple[float, float]]):
        self._entries: dict[str, tuple[float, float]] = {}
        for name, (center, scale) in entries.items():
            if scale <= 0:
                raise InputError(f"normalization scale for {name!r} must be > 0")
            self._entries[name] = (float(center), float(scale))

    def __contains__(self, name: str) -> bool:
        return name in self._entries

    def names(self) -> list[str]:
        return list(self._entries)

    def pair(self, name: str) -> tuple[float, float]:
        try:
            return self._entries[name]
        except KeyError:
            raise InputError(f"no normalization entry for feature {name!r}") from None

    def normalize(self, name: str, value):
        center, scale = self.pair(name)
        return (np.asarray(value, dtype=np.float64) - center) / scale

    def denormalize(self, name: str, value):
        center, scale = self.pair(name)
        return np.asarray(value, dtype=np.float64) * scale + center

    def items(self):
        return self._entries.items()


def normalize(feature_name: str, raw_value: float, spec: NormalizationSpec) -> float:
    return float(spec.normalize(feature_name, raw_value))


def denormalize(feature_name: str, value: float, spec: NormalizationSpec) -> float:
    return float(spec.denormalize(feature_name, value))
