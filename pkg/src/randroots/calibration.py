"""Frozen constants for inequalities whose constants are existence-only.

Each constant is fitted once (seed 0, smallest n of its grid) and stored in
data/frozen_constants.json.  Tests then check the inequality on the whole
grid with the frozen value times HEADROOM.
"""

from __future__ import annotations

import json
import math
from importlib import resources
from pathlib import Path

import numpy as np

from .atoms import RADEMACHER
from .coeff_profiles import hyperbolic
from .variance_kernel import VarianceKernel, f_reciprocal

HEADROOM = 1.5
FIXTURE = "frozen_constants.json"

TAIL_LS = (1.0, 2.0, 4.0)
RECIP_LS = (0.5, 1.0, 2.0, 4.0)
CAL_N = 256
# n(1-x) range for the tail grid; beyond ~18 the right side x^(n+1) drops
# under 1e-8 and the left side is pure rounding noise
TAIL_S = (1.0, 18.0)
ANTI_N = 16
ANTI_SAMPLES = 20000


class CalibrationError(RuntimeError):
    pass


def tail_grid(n: int, points: int = 60) -> np.ndarray:
    s = np.geomspace(TAIL_S[0], TAIL_S[1], points)
    return 1.0 - s / n


def tail_ratios(n: int, L: float, x) -> np.ndarray:
    """|f_n(x)(1-x)^L - 1| / ((1 + [n(1-x)]^(L-1)) x^(n+1)) for the hyperbolic kernel."""
    x = np.asarray(x, dtype=float)
    kern = VarianceKernel.from_profile(hyperbolic(L), n)
    f, _ = kern.eval_f(x)
    lhs = np.abs(f * (1.0 - x) ** L - 1.0)
    rhs = (1.0 + (n * (1.0 - x)) ** (L - 1.0)) * x ** (n + 1)
    return lhs / rhs


def recip_grid(n: int, points: int = 60) -> np.ndarray:
    # x in [1/2, 1 - 1/n], dense near the right end
    s = np.geomspace(1.0, n / 2.0, points)
    return 1.0 - s / n


def recip_ratios(n: int, L: float, x) -> np.ndarray:
    """|f~_{n,L}(x)(1-x) - 1| * n(1-x)."""
    x = np.asarray(x, dtype=float)
    v = np.array([f_reciprocal(n, L, float(xi)) for xi in x])
    return np.abs(v * (1.0 - x) - 1.0) * n * (1.0 - x)


def anticoncentration_scaled(n: int, samples: int = ANTI_SAMPLES, root_seed: int = 0) -> float:
    from .mc import anticoncentration_probe

    p = anticoncentration_probe(RADEMACHER, np.ones(n), 0.0, 0.5, samples, root_seed).estimate
    return p * math.sqrt(n)


def calibrate() -> dict:
    tail = max(float(tail_ratios(CAL_N, L, tail_grid(CAL_N)).max()) for L in TAIL_LS)
    recip = max(float(recip_ratios(CAL_N, L, recip_grid(CAL_N)).max()) for L in RECIP_LS)
    anti = anticoncentration_scaled(ANTI_N)
    return {
        "headroom": HEADROOM,
        "tail_series": {"C": tail, "n": CAL_N, "L": list(TAIL_LS), "s_range": list(TAIL_S)},
        "reciprocal": {"C": recip, "n": CAL_N, "L": list(RECIP_LS)},
        "anticoncentration": {"D": anti, "n": ANTI_N, "samples": ANTI_SAMPLES, "root_seed": 0,
                              "radius": 0.5},
    }


def fixture_path() -> Path:
    return Path(str(resources.files("randroots") / "data" / FIXTURE))


def load_frozen(path=None) -> dict:
    p = Path(path) if path is not None else fixture_path()
    try:
        data = json.loads(p.read_text())
        for key, field in (("tail_series", "C"), ("reciprocal", "C"), ("anticoncentration", "D")):
            v = float(data[key][field])
            if not math.isfinite(v) or v <= 0:
                raise ValueError(f"{key}.{field} must be a positive number")
        float(data["headroom"])
    except (OSError, ValueError, KeyError, TypeError) as exc:
        raise CalibrationError(f"bad frozen-constant fixture {p}: {exc}") from exc
    return data


def write_fixture(path=None) -> dict:
    data = calibrate()
    p = Path(path) if path is not None else fixture_path()
    p.parent.mkdir(parents=True, exist_ok=True)
    p.write_text(json.dumps(data, indent=2, sort_keys=True) + "\n")
    return data


if __name__ == "__main__":
    print(json.dumps(write_fixture(), indent=2))
