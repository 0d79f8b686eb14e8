from dataclasses import dataclass, field

import numpy as np


@dataclass(frozen=True)
class Residual:
    """One measured violation of one identity at one sample point."""

    name: str
    value: float
    tolerance: float
    point: dict = field(default_factory=dict)

    @property
    def passed(self) -> bool:
        return bool(self.value <= self.tolerance)

    def as_record(self) -> dict:
        return {
            "name": self.name,
            "value": float(self.value),
            "tolerance": float(self.tolerance),
            "pass": self.passed,
            "point": self.point,
        }


def magnitude(*arrays) -> float:
    """Largest absolute entry across the given arrays (0 for empty input)."""
    out = 0.0
    for a in arrays:
        a = np.asarray(a)
        if a.size:
            out = max(out, float(np.max(np.abs(a))))
    return out


def serialize_point(**items) -> dict:
    """Round sample coordinates to a stable, JSON-friendly form."""
    out = {}
    for key, val in items.items():
        arr = np.asarray(val)
        if np.iscomplexobj(arr):
            out[key] = {"re": np.round(arr.real, 12).tolist(),
                        "im": np.round(arr.imag, 12).tolist()}
        elif arr.dtype.kind in "fi":
            out[key] = np.round(arr.astype(float), 12).tolist()
        else:
            out[key] = val
    return out
