"""Mixed-radix flat indexing, least-significant digit first."""

from __future__ import annotations

import math
from typing import Sequence

import numpy as np

_INT64_LIMIT = 2**62


class MixedRadixCodec:
    """Bijection between digit vectors and ``range(prod(radices))``.

    ``index = sum_k values[k] * prod_{j<k} radices[j]``.  Bulk encoding
    returns ``int64`` when the index space fits, otherwise an object array
    of Python ints.
    """

    def __init__(self, radices: Sequence[int]):
        radices = tuple(int(r) for r in radices)
        if any(r < 1 for r in radices):
            raise ValueError(f"radices must be positive, got {radices}")
        self.radices = radices
        self.size = math.prod(radices)
        mult = []
        acc = 1
        for r in radices:
            mult.append(acc)
            acc *= r
        self.multipliers = tuple(mult)
        self.fits_int64 = self.size < _INT64_LIMIT

    def __len__(self) -> int:
        return len(self.radices)

    def __repr__(self) -> str:
        return f"MixedRadixCodec({list(self.radices)})"

    def encode(self, values: Sequence[int]) -> int:
        if len(values) != len(self.radices):
            raise ValueError(f"expected {len(self.radices)} digits, got {len(values)}")
        index = 0
        for v, r, m in zip(values, self.radices, self.multipliers):
            v = int(v)
            if not 0 <= v < r:
                raise ValueError(f"digit {v} outside [0, {r})")
            index += v * m
        return index

    def decode(self, index: int) -> tuple[int, ...]:
        index = int(index)
        if not 0 <= index < self.size:
            raise ValueError(f"index {index} outside [0, {self.size})")
        out = []
        for r in self.radices:
            index, v = divmod(index, r)
            out.append(v)
        return tuple(out)

    def encode_many(self, values: np.ndarray) -> np.ndarray:
        """Encode each row of a ``(B, len(radices))`` integer array."""
        values = np.asarray(values)
        if values.ndim != 2 or values.shape[1] != len(self.radices):
            raise ValueError(f"expected shape (B, {len(self.radices)}), got {values.shape}")
        radices = np.asarray(self.radices)
        if values.size and ((values < 0).any() or (values >= radices).any()):
            raise ValueError("digit outside its radix")
        if self.fits_int64:
            return values.astype(np.int64) @ np.asarray(self.multipliers, dtype=np.int64)
        out = np.zeros(values.shape[0], dtype=object)
        for k, m in enumerate(self.multipliers):
            out = out + values[:, k].astype(object) * m
        return out

    def decode_many(self, indices: np.ndarray) -> np.ndarray:
        indices = np.asarray(indices)
        dtype = np.int64 if self.fits_int64 else object
        rem = indices.astype(dtype)
        out = np.empty((indices.shape[0], len(self.radices)), dtype=np.int64)
        for k, r in enumerate(self.radices):
            out[:, k] = (rem % r).astype(np.int64)
            rem = rem // r
        return out
