"""Unit-variance atom distributions and counter-based seed streams.

A draw for (sample i, coefficient k) is the k-th value of a Philox stream
keyed by (root_seed, path), so it never depends on how samples are spread
over workers.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

ATOM_KINDS = ("gaussian", "rademacher", "uniform_unitvar", "complex_gaussian")

SQRT3 = math.sqrt(3.0)


class AtomError(ValueError):
    pass


@dataclass(frozen=True)
class AtomSpec:
    kind: str
    mean: float = 0.0

    def __post_init__(self):
        if self.kind not in ATOM_KINDS:
            raise AtomError(f"unknown atom kind {self.kind!r}")
        if self.kind != "gaussian" and self.mean != 0.0:
            raise AtomError("only the gaussian atom takes a nonzero mean")

    @property
    def is_complex(self) -> bool:
        return self.kind == "complex_gaussian"

    @property
    def label(self) -> str:
        if self.kind == "gaussian" and self.mean != 0.0:
            return f"gaussian:mu={self.mean:g}"
        return self.kind

    def to_dict(self) -> dict:
        d = {"kind": self.kind}
        if self.mean:
            d["mean"] = self.mean
        return d

    def draw(self, rng: np.random.Generator, size: int) -> np.ndarray:
        """Vector of iid draws (the coefficient index is the position)."""
        if self.kind == "gaussian":
            return rng.standard_normal(size) + self.mean
        if self.kind == "rademacher":
            return np.where(rng.integers(0, 2, size) == 1, 1.0, -1.0)
        if self.kind == "uniform_unitvar":
            return rng.uniform(-SQRT3, SQRT3, size)
        z = rng.standard_normal((size, 2)) * math.sqrt(0.5)
        return z[:, 0] + 1j * z[:, 1]

    def abs_moment(self, p: float) -> float:
        """E|xi|^p, recorded as the 2+eps moment bound (never used in computation)."""
        if self.kind == "rademacher":
            return 1.0
        if self.kind == "uniform_unitvar":
            return SQRT3 ** p / (p + 1.0)
        if self.kind == "complex_gaussian":
            # |xi|^2 ~ Exp(1)
            return math.gamma(1.0 + p / 2.0)
        if self.mean == 0.0:
            return 2.0 ** (p / 2.0) * math.gamma((p + 1.0) / 2.0) / math.sqrt(math.pi)
        # nonzero mean: numerical expectation by Gauss-Hermite
        x, w = np.polynomial.hermite_e.hermegauss(80)
        return float(np.sum(w * np.abs(x + self.mean) ** p) / math.sqrt(2 * math.pi))


def gaussian(mean: float = 0.0) -> AtomSpec:
    return AtomSpec("gaussian", float(mean))


RADEMACHER = AtomSpec("rademacher")
UNIFORM = AtomSpec("uniform_unitvar")
COMPLEX_GAUSSIAN = AtomSpec("complex_gaussian")


def parse_atom(spec) -> AtomSpec:
    """Accepts an AtomSpec, a dict, or strings like ``gaussian``, ``gaussian:mu=1``."""
    if isinstance(spec, AtomSpec):
        return spec
    if isinstance(spec, dict):
        kind = spec.get("kind")
        return AtomSpec(kind, float(spec.get("mean", spec.get("mu", 0.0))))
    s = str(spec).strip()
    aliases = {"uniform": "uniform_unitvar", "normal": "gaussian", "complex": "complex_gaussian"}
    kind, _, rest = s.partition(":")
    kind = aliases.get(kind, kind)
    mean = 0.0
    if rest:
        for part in rest.split(","):
            key, _, val = part.partition("=")
            if key.strip() in ("mu", "mean"):
                mean = float(val)
            else:
                raise AtomError(f"unknown atom parameter {key!r}")
    return AtomSpec(kind, mean)


def moment(spec: AtomSpec, order: int) -> float:
    """Exact E[xi^order] for real atoms, order 1..4."""
    if order not in (1, 2, 3, 4):
        raise AtomError(f"unsupported moment order {order}")
    if spec.is_complex:
        raise AtomError("moment() covers real atoms; use abs_moment for complex_gaussian")
    if spec.kind == "rademacher":
        return 1.0 if order % 2 == 0 else 0.0
    if spec.kind == "uniform_unitvar":
        # int x^p / (2a) over [-a, a] with a = sqrt(3)
        return 0.0 if order % 2 else 3.0 ** (order / 2) / (order + 1)
    mu = spec.mean
    # raw moments of N(mu, 1)
    return {1: mu, 2: mu**2 + 1, 3: mu**3 + 3 * mu, 4: mu**4 + 6 * mu**2 + 3}[order]


# ----------------------------------------------------------------- streams

def parse_seed(seed) -> int:
    if isinstance(seed, str):
        s = seed.strip().lower()
        seed = int(s, 16) if s.startswith("0x") else int(s)
    seed = int(seed)
    if not 0 <= seed < 2**64:
        raise AtomError("root_seed must fit in 64 unsigned bits")
    return seed


class SeedStream:
    """Deterministic stream addressed by (root_seed, path).

    Streams at distinct paths are derived through SeedSequence hashing and
    are independent; within one stream, successive calls advance the
    counter.
    """

    def __init__(self, root_seed, path=()):
        self.root_seed = parse_seed(root_seed)
        self.path = tuple(int(p) for p in path)
        ss = np.random.SeedSequence(self.root_seed, spawn_key=self.path)
        self.rng = np.random.Generator(np.random.Philox(ss))

    def child(self, *idx) -> "SeedStream":
        return SeedStream(self.root_seed, self.path + tuple(idx))

    def __repr__(self):
        return f"SeedStream({self.root_seed:#x}, path={self.path})"


def sample_atom(spec: AtomSpec, stream: SeedStream):
    """One draw; advances the stream."""
    v = spec.draw(stream.rng, 1)[0]
    return complex(v) if spec.is_complex else float(v)


def sample_atoms(spec: AtomSpec, stream: SeedStream, size: int) -> np.ndarray:
    return spec.draw(stream.rng, size)
