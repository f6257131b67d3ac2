"""Channel-data containers shared by the simulator, beamformer and file I/O."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .hadamard import GroupingScheme


class DimensionError(ValueError):
    """Raised when array shapes, ranks or groupings disagree."""


@dataclass
class MultistaticDataset:
    """Signals ``s_ij(t)``: one record per (transmit element, receive element).

    ``samples`` has shape ``(n_tx, n_rx, n_samples)``; real RF or analytic.
    """

    samples: np.ndarray
    sample_rate: float
    start_time: float = 0.0

    def __post_init__(self):
        self.samples = np.asarray(self.samples)
        if self.samples.ndim != 3:
            raise DimensionError(f"samples must be 3-D (tx, rx, time), got shape {self.samples.shape}")
        if self.sample_rate <= 0:
            raise ValueError("sample_rate must be positive")

    @property
    def n_tx(self) -> int:
        return self.samples.shape[0]

    @property
    def n_rx(self) -> int:
        return self.samples.shape[1]

    @property
    def n_samples(self) -> int:
        return self.samples.shape[2]

    @property
    def is_analytic(self) -> bool:
        return np.iscomplexobj(self.samples)


@dataclass
class EncodedDataset:
    """Per-event channel data ``g_e(t)`` of a Hadamard-encoded acquisition.

    ``samples`` has shape ``(n_events, n_rx, n_samples)``.
    """

    samples: np.ndarray
    sample_rate: float
    start_time: float = 0.0
    encoding_rank: int | None = None

    def __post_init__(self):
        self.samples = np.asarray(self.samples)
        if self.samples.ndim != 3:
            raise DimensionError(f"samples must be 3-D (event, rx, time), got shape {self.samples.shape}")
        if self.encoding_rank is None:
            self.encoding_rank = self.samples.shape[0]
        if self.encoding_rank != self.samples.shape[0]:
            raise DimensionError(
                f"n_events ({self.samples.shape[0]}) must equal encoding rank ({self.encoding_rank})")

    @property
    def n_events(self) -> int:
        return self.samples.shape[0]

    @property
    def n_rx(self) -> int:
        return self.samples.shape[1]

    @property
    def n_samples(self) -> int:
        return self.samples.shape[2]


@dataclass
class GroupedDataset:
    """An encoded ensemble regrouped into ``S`` sequential groups of ``Q`` events.

    ``groups[s - 1]`` holds events ``(s-1)Q+1 .. sQ`` with shape ``(Q, n_rx, n_samples)``.
    """

    scheme: GroupingScheme
    groups: list[np.ndarray]
    sample_rate: float
    start_time: float = 0.0

    def __post_init__(self):
        if len(self.groups) != self.scheme.n_groups:
            raise DimensionError(f"expected {self.scheme.n_groups} groups, got {len(self.groups)}")
        for g in self.groups:
            if g.shape[0] != self.scheme.group_size:
                raise DimensionError(f"each group must hold {self.scheme.group_size} events, got {g.shape[0]}")

    def group(self, s: int) -> np.ndarray:
        """1-based access to column ``s`` of the regrouped data."""
        if not 1 <= s <= self.scheme.n_groups:
            raise DimensionError(f"group index must lie in 1..{self.scheme.n_groups}, got {s}")
        return self.groups[s - 1]

    def concatenate(self) -> EncodedDataset:
        return EncodedDataset(np.concatenate(self.groups, axis=0), self.sample_rate, self.start_time)


@dataclass
class PartiallyDecodedGroup:
    """``H_Q^-1`` applied to one event group; signal ``v`` mixes element ``v`` of every element group."""

    group_index: int
    signals: np.ndarray
    sample_rate: float
    start_time: float = 0.0
    scheme: GroupingScheme | None = field(default=None, repr=False)
