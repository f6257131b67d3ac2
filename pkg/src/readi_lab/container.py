"""Binary channel-data container.

Layout (all little-endian)::

    magic        6 bytes   b"READI1"
    dtype tag    uint8     0 f32, 1 f64, 2 complex64, 3 complex128
    layout tag   uint8     0 multistatic, 1 encoded, 2 grouped
    n_events     uint32    transmitters or events
    n_rx         uint32
    n_samples    uint32
    n_groups     uint32    grouped layout only, else 0
    group_size   uint32    grouped layout only, else 0
    sample_rate  float64
    start_time   float64
    payload      samples, time fastest, then receive, then transmit/event

The payload of a grouped container is the concatenation of its groups in
acquisition order, so it is also a valid encoded payload.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .datasets import EncodedDataset, GroupedDataset, MultistaticDataset
from .hadamard import GroupingScheme

MAGIC = b"READI1"
_HEADER = struct.Struct("<6sBBIIIIIdd")
HEADER_SIZE = _HEADER.size

DTYPES = {"f32": np.dtype("<f4"), "f64": np.dtype("<f8"),
          "c64": np.dtype("<c8"), "c128": np.dtype("<c16")}
_DTYPE_TAGS = {"f32": 0, "f64": 1, "c64": 2, "c128": 3}
_TAG_DTYPES = {v: k for k, v in _DTYPE_TAGS.items()}
LAYOUTS = ("multistatic", "encoded", "grouped")


class ContainerError(Exception):
    """Base class; ``code`` distinguishes the failure kind."""

    code = 1


class FormatError(ContainerError):
    """Foreign magic bytes or an unknown layout tag."""

    code = 10


class TruncatedError(ContainerError):
    """Payload shorter than the header dimensions require."""

    code = 11


class DtypeMismatchError(ContainerError):
    """Unknown dtype tag, or a dtype other than the one the caller required."""

    code = 12


@dataclass
class DatasetContainer:
    layout: str
    samples: np.ndarray
    sample_rate: float
    start_time: float = 0.0
    scheme: GroupingScheme | None = None

    def __post_init__(self):
        if self.layout not in LAYOUTS:
            raise FormatError(f"layout must be one of {LAYOUTS}, got {self.layout!r}")
        if self.samples.ndim != 3:
            raise ValueError(f"samples must be 3-D, got shape {self.samples.shape}")
        if (self.layout == "grouped") != (self.scheme is not None):
            raise ValueError("a grouping scheme is required for, and only for, the grouped layout")
        if self.scheme is not None and self.scheme.n_total != self.samples.shape[0]:
            raise ValueError(f"scheme covers {self.scheme.n_total} events, samples have {self.samples.shape[0]}")

    @property
    def dtype_tag(self) -> str:
        for tag, dt in DTYPES.items():
            if self.samples.dtype == dt.newbyteorder("="):
                return tag
        raise DtypeMismatchError(f"unsupported sample dtype {self.samples.dtype}")

    @classmethod
    def from_dataset(cls, ds, dtype: str | None = "f32") -> "DatasetContainer":
        """Wrap a dataset, casting to ``dtype`` (f32 or f64 precision; complex kept complex)."""
        if isinstance(ds, MultistaticDataset):
            layout, samples, scheme = "multistatic", ds.samples, None
        elif isinstance(ds, EncodedDataset):
            layout, samples, scheme = "encoded", ds.samples, None
        elif isinstance(ds, GroupedDataset):
            layout, samples, scheme = "grouped", ds.concatenate().samples, ds.scheme
        else:
            raise TypeError(f"cannot store {type(ds).__name__}")
        if dtype is not None:
            if dtype not in ("f32", "f64"):
                raise DtypeMismatchError(f"dtype must be 'f32' or 'f64', got {dtype!r}")
            real = np.float32 if dtype == "f32" else np.float64
            target = np.result_type(real, np.complex64) if np.iscomplexobj(samples) else real
            samples = np.asarray(samples, dtype=target)
        return cls(layout, np.ascontiguousarray(samples), float(ds.sample_rate), float(ds.start_time), scheme)

    def to_dataset(self):
        if self.layout == "multistatic":
            return MultistaticDataset(self.samples, self.sample_rate, self.start_time)
        if self.layout == "encoded":
            return EncodedDataset(self.samples, self.sample_rate, self.start_time)
        q = self.scheme.group_size
        groups = [self.samples[s * q:(s + 1) * q] for s in range(self.scheme.n_groups)]
        return GroupedDataset(self.scheme, groups, self.sample_rate, self.start_time)

    def to_bytes(self) -> bytes:
        tag = self.dtype_tag
        n_events, n_rx, n_samples = self.samples.shape
        n_groups = self.scheme.n_groups if self.scheme else 0
        group_size = self.scheme.group_size if self.scheme else 0
        header = _HEADER.pack(MAGIC, _DTYPE_TAGS[tag], LAYOUTS.index(self.layout), n_events, n_rx,
                              n_samples, n_groups, group_size, self.sample_rate, self.start_time)
        return header + np.ascontiguousarray(self.samples, dtype=DTYPES[tag]).tobytes()

    @classmethod
    def from_bytes(cls, buf: bytes, expect_dtype: str | None = None) -> "DatasetContainer":
        if len(buf) < len(MAGIC) or buf[:len(MAGIC)] != MAGIC:
            raise FormatError("not a READI1 container (bad magic bytes)")
        if len(buf) < HEADER_SIZE:
            raise TruncatedError(f"header truncated: {len(buf)} of {HEADER_SIZE} bytes")
        (_, dtag, ltag, n_events, n_rx, n_samples, n_groups, group_size,
         fs, t0) = _HEADER.unpack_from(buf)
        if dtag not in _TAG_DTYPES:
            raise DtypeMismatchError(f"unknown dtype tag {dtag}")
        tag = _TAG_DTYPES[dtag]
        if expect_dtype is not None and tag != expect_dtype:
            raise DtypeMismatchError(f"container holds {tag}, expected {expect_dtype}")
        if ltag >= len(LAYOUTS):
            raise FormatError(f"unknown layout tag {ltag}")
        dt = DTYPES[tag]
        need = n_events * n_rx * n_samples * dt.itemsize
        have = len(buf) - HEADER_SIZE
        if have < need:
            raise TruncatedError(f"payload truncated: {have} of {need} bytes")
        if have > need:
            raise FormatError(f"{have - need} unexpected trailing bytes after payload")
        samples = np.frombuffer(buf, dtype=dt, count=n_events * n_rx * n_samples, offset=HEADER_SIZE)
        samples = samples.astype(dt.newbyteorder("="), copy=True).reshape(n_events, n_rx, n_samples)
        scheme = None
        if LAYOUTS[ltag] == "grouped":
            try:
                scheme = GroupingScheme(n_events, n_groups, group_size)
            except ValueError as exc:
                raise FormatError(f"invalid grouping in header: {exc}") from None
        return cls(LAYOUTS[ltag], samples, fs, t0, scheme)


def write_container(path, data, dtype: str | None = "f32") -> Path:
    """Write a dataset or :class:`DatasetContainer` to ``path``.

    Datasets are cast to ``dtype``; containers are written as they are.
    """
    c = data if isinstance(data, DatasetContainer) else DatasetContainer.from_dataset(data, dtype)
    path = Path(path)
    path.write_bytes(c.to_bytes())
    return path


def read_container(path, expect_dtype: str | None = None) -> DatasetContainer:
    return DatasetContainer.from_bytes(Path(path).read_bytes(), expect_dtype)
