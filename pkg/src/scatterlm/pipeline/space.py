"""Parameter rough ranges, their sub-range slicing, and training-point designs."""

from __future__ import annotations

import itertools
from dataclasses import dataclass, replace
from typing import Mapping, Sequence

import numpy as np

__all__ = ["ParamSpec", "ParameterSpace", "DESIGNS"]

#: cross_product: K_j draws of the sliced parameter times K_l draws of every other
#: parameter, all combinations. independent: the same number of pairs, each pair
#: drawn on its own (no value shared between pairs).
DESIGNS = ("cross_product", "independent")


@dataclass(frozen=True)
class ParamSpec:
    name: str
    low: float
    high: float
    n_subranges: int = 4
    samples_per_subrange: int = 15
    samples_full_range: int = 15

    def __post_init__(self):
        object.__setattr__(self, "low", float(self.low))
        object.__setattr__(self, "high", float(self.high))
        if not self.low < self.high:
            raise ValueError(f"{self.name}: rough range needs low < high")
        if self.n_subranges < 2:
            raise ValueError(f"{self.name}: need at least 2 sub-ranges")
        if self.samples_per_subrange < 1 or self.samples_full_range < 1:
            raise ValueError(f"{self.name}: sample counts must be >= 1")

    @property
    def width(self) -> float:
        return self.high - self.low

    @property
    def median(self) -> float:
        return (self.low + self.high) / 2

    def edges(self) -> np.ndarray:
        N = self.n_subranges
        e = self.low + self.width * np.arange(N + 1) / N
        e[0], e[-1] = self.low, self.high
        return e

    def subranges(self) -> list[tuple[float, float]]:
        e = self.edges()
        return [(float(e[j]), float(e[j + 1])) for j in range(self.n_subranges)]

    def subrange_median(self, j: int) -> float:
        a, b = self.subranges()[j]
        return (a + b) / 2

    def subrange_index(self, value: float) -> int:
        """Class of ``value``; interior edges belong to the upper sub-range, ``high`` to the last."""
        if not self.low <= value <= self.high:
            raise ValueError(f"{self.name}={value} outside rough range [{self.low}, {self.high}]")
        j = int(np.searchsorted(self.edges(), value, side="right")) - 1
        return min(max(j, 0), self.n_subranges - 1)

    def to_dict(self) -> dict:
        return {"name": self.name, "range": [self.low, self.high], "n_subranges": self.n_subranges,
                "samples_per_subrange": self.samples_per_subrange,
                "samples_full_range": self.samples_full_range}

    @classmethod
    def from_dict(cls, d: Mapping) -> "ParamSpec":
        low, high = d["range"]
        return cls(d["name"], low, high, int(d.get("n_subranges", 4)),
                   int(d.get("samples_per_subrange", 15)), int(d.get("samples_full_range", 15)))


@dataclass(frozen=True)
class ParameterSpace:
    params: tuple
    design: str = "cross_product"

    def __post_init__(self):
        ps = tuple(self.params)
        if not ps:
            raise ValueError("parameter space is empty")
        names = [p.name for p in ps]
        if len(set(names)) != len(names):
            raise ValueError("duplicate parameter names")
        if self.design not in DESIGNS:
            raise ValueError(f"unknown design {self.design!r}; expected one of {DESIGNS}")
        object.__setattr__(self, "params", ps)

    def __len__(self):
        return len(self.params)

    def __getitem__(self, i) -> ParamSpec:
        return self.params[i] if isinstance(i, int) else self.params[self.index(i)]

    def index(self, name: str) -> int:
        for i, p in enumerate(self.params):
            if p.name == name:
                return i
        raise KeyError(name)

    @property
    def names(self) -> list[str]:
        return [p.name for p in self.params]

    @property
    def bounds(self) -> dict:
        return {p.name: (p.low, p.high) for p in self.params}

    @property
    def medians(self) -> dict:
        return {p.name: p.median for p in self.params}

    @property
    def lows(self) -> dict:
        return {p.name: p.low for p in self.params}

    def pairs_per_class(self, i: int) -> int:
        n = self.params[i].samples_per_subrange
        for l, p in enumerate(self.params):
            if l != i:
                n *= p.samples_full_range
        return n

    def with_samples(self, samples_per_subrange: int | None = None,
                     samples_full_range: int | None = None) -> "ParameterSpace":
        ps = []
        for p in self.params:
            kw = {}
            if samples_per_subrange is not None:
                kw["samples_per_subrange"] = int(samples_per_subrange)
            if samples_full_range is not None:
                kw["samples_full_range"] = int(samples_full_range)
            ps.append(replace(p, **kw))
        return replace(self, params=tuple(ps))

    def labels_of(self, values: np.ndarray, i: int) -> np.ndarray:
        p = self.params[i]
        return np.array([p.subrange_index(v) for v in np.asarray(values, dtype=float)], dtype=int)

    def class_points(self, i: int, j: int, seed: int) -> np.ndarray:
        """Training parameter vectors (rows, columns in parameter order) for class j of parameter i.

        Draws come from their own stream keyed by (seed, i, j). The independent
        design draws row by row, so a smaller count yields a prefix of a larger one.
        """
        rng = np.random.default_rng([int(seed), int(i), int(j)])
        a, b = self.params[i].subranges()[j]
        lo = np.array([p.low for p in self.params])
        hi = np.array([p.high for p in self.params])
        lo[i], hi[i] = a, b
        if self.design == "independent":
            u = rng.random((self.pairs_per_class(i), len(self.params)))
            return lo + u * (hi - lo)
        axes = []
        for l, p in enumerate(self.params):
            n = p.samples_per_subrange if l == i else p.samples_full_range
            axes.append(rng.uniform(lo[l], hi[l], n))
        return np.array(list(itertools.product(*axes)), dtype=float)

    def random_points(self, n: int, seed) -> np.ndarray:
        """n vectors drawn uniformly in the rough ranges."""
        rng = np.random.default_rng(seed)
        lo = np.array([p.low for p in self.params])
        hi = np.array([p.high for p in self.params])
        return lo + rng.random((int(n), len(self.params))) * (hi - lo)

    def as_dicts(self, points: np.ndarray) -> list[dict]:
        names = self.names
        return [dict(zip(names, (float(v) for v in row))) for row in np.atleast_2d(points)]

    def to_dict(self) -> dict:
        return {"design": self.design, "params": [p.to_dict() for p in self.params]}

    @classmethod
    def from_dict(cls, d: Mapping) -> "ParameterSpace":
        return cls(tuple(ParamSpec.from_dict(p) for p in d["params"]), d.get("design", "cross_product"))

    def check_structure(self, structure_params: Sequence[str]) -> None:
        if list(structure_params) != self.names:
            raise ValueError(f"parameter space {self.names} does not match structure parameters "
                             f"{list(structure_params)}")
