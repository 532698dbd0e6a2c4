"""Fixed-width SIMD lane model with operation counting.

``LaneVector`` mimics the handful of vector intrinsics the in-tile kernels
need (elementwise multiply, multiply-accumulate, add, horizontal reduce) on
an 8-lane register.  Every operation is recorded in an ``OpCounter`` so the
analytic cost model can turn a kernel's instruction mix into cycles.
"""

from __future__ import annotations

import math
from collections import Counter
from dataclasses import dataclass, field
from typing import Iterable

import numpy as np

from ..errors import InvalidInputError

LANES = 8

_ONES: dict = {}


@dataclass
class OpCounter:
    """Tallies of scalar operations and vector instructions.

    Scalar operations are keyed by kind (``mul``, ``add``, ``mac``, ``div``,
    ``sqrt``, ``cmp``...); a scalar multiply-accumulate counts as one op.
    Vector instructions are keyed the same way.  ``vector_lanes`` keeps the
    populated-lane count of every issued instruction, in issue order.
    """

    scalar: Counter = field(default_factory=Counter)
    vector: Counter = field(default_factory=Counter)
    lane_elements: Counter = field(default_factory=Counter)
    vector_lanes: list = field(default_factory=list)

    def add_scalar(self, kind: str, n: int = 1) -> None:
        if n < 0:
            raise ValueError("op counts only grow")
        self.scalar[kind] += n

    def add_vector(self, kind: str, lanes: int) -> None:
        self.vector[kind] += 1
        self.lane_elements[kind] += lanes
        self.vector_lanes.append(lanes)

    @property
    def scalar_ops(self) -> int:
        return sum(self.scalar.values())

    @property
    def vector_instructions(self) -> int:
        return sum(self.vector.values())

    @property
    def multiplies(self) -> int:
        """Multiplies performed, one per populated lane for vector instructions."""
        return (
            self.scalar["mul"]
            + self.scalar["mac"]
            + self.lane_elements["mul"]
            + self.lane_elements["mac"]
        )

    def vector_cycles(self, lanes_per_mac: int = LANES) -> int:
        """Issue cycles for the recorded vector instructions."""
        if lanes_per_mac < 1:
            raise ValueError("lanes_per_mac must be >= 1")
        return sum(math.ceil(n / lanes_per_mac) for n in self.vector_lanes)

    def merge(self, other: "OpCounter") -> None:
        self.scalar.update(other.scalar)
        self.vector.update(other.vector)
        self.lane_elements.update(other.lane_elements)
        self.vector_lanes.extend(other.vector_lanes)

    def as_dict(self) -> dict:
        return {
            "scalar": dict(sorted(self.scalar.items())),
            "vector": dict(sorted(self.vector.items())),
            "lane_elements": dict(sorted(self.lane_elements.items())),
        }


class LaneVector:
    """An 8-lane float register holding ``size`` populated lanes.

    Lanes past ``size`` are padding.  Arithmetic operates on the populated
    lanes only, and the padding of a result is always zero.
    """

    __slots__ = ("data", "size", "counter")

    def __init__(
        self,
        values: Iterable[float],
        *,
        width: int = LANES,
        dtype=np.float32,
        counter: OpCounter | None = None,
    ):
        vals = np.asarray(values, dtype=dtype).ravel()
        n = vals.size
        if n > width:
            raise InvalidInputError(f"{n} values do not fit in {width} lanes")
        self.data = np.zeros(width, dtype=vals.dtype)
        self.data[:n] = vals
        self.size = int(n)
        self.counter = counter

    @classmethod
    def _wrap(cls, data: np.ndarray, size: int, counter: OpCounter | None) -> "LaneVector":
        out = cls.__new__(cls)
        out.data = data
        out.size = size
        out.counter = counter
        return out

    @classmethod
    def from_register(
        cls, register: np.ndarray, size: int, counter: OpCounter | None = None
    ) -> "LaneVector":
        """Adopt a full-width register as-is, padding included (no validation)."""
        return cls._wrap(np.array(register, copy=True), size, counter)

    @property
    def width(self) -> int:
        return self.data.size

    def padding_is_zero(self) -> bool:
        return not self.data[self.size:].any()

    def values(self) -> np.ndarray:
        return self.data[: self.size].copy()

    def _binary(self, other: "LaneVector", kind: str, fn) -> "LaneVector":
        if other.data.size != self.data.size:
            raise InvalidInputError("lane widths differ")
        n = self.size if self.size >= other.size else other.size
        out = fn(self.data, other.data)
        if n < out.size:
            out[n:] = 0
        counter = self.counter or other.counter
        if counter is not None:
            counter.add_vector(kind, n)
        return LaneVector._wrap(out, n, counter)

    def mul(self, other: "LaneVector") -> "LaneVector":
        return self._binary(other, "mul", np.multiply)

    def add(self, other: "LaneVector") -> "LaneVector":
        return self._binary(other, "add", np.add)

    def mac(self, a: "LaneVector", b: "LaneVector") -> "LaneVector":
        """Return ``self + a * b`` as a single fused instruction."""
        n = max(self.size, a.size, b.size)
        out = self.data + a.data * b.data
        if n < out.size:
            out[n:] = 0
        counter = self.counter or a.counter or b.counter
        if counter is not None:
            counter.add_vector("mac", n)
        return LaneVector._wrap(out, n, counter)

    def reduce_add(self):
        """Horizontal sum of every lane, padding included, like the hardware does."""
        if self.counter is not None:
            self.counter.add_vector("reduce", self.size)
        ones = _ONES.get((self.data.size, self.data.dtype))
        if ones is None:
            ones = _ONES[(self.data.size, self.data.dtype)] = np.ones(self.data.size, self.data.dtype)
        return np.dot(self.data, ones)

    def __repr__(self) -> str:
        return f"LaneVector({self.values().tolist()}, width={self.width})"
