"""
Measurement distributions.

Bitstrings are keyed as strings with qubit 0 as the leftmost (most significant)
character, so "01" is basis index 1 on two qubits.
"""
import math

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, model_validator


def bitstring(index: int, n_bits: int) -> str:
    """Render a basis index as an n-bit string, qubit 0 first."""
    return format(index, f"0{n_bits}b")


def _check_keys(keys, n_bits: int) -> None:
    for key in keys:
        if len(key) != n_bits or set(key) - {"0", "1"}:
            raise ValueError(f"Bitstring {key!r} is not a {n_bits}-bit string")


class Distribution(BaseModel):
    """Normalized measurement distribution {p_z}; absent keys mean 0."""
    model_config = ConfigDict(frozen=True)

    n_bits: int = Field(..., ge=1)
    probs: dict[str, float] = Field(default_factory=dict)

    @model_validator(mode="after")
    def _validate(self):
        _check_keys(self.probs, self.n_bits)
        for key, value in self.probs.items():
            if not 0.0 <= value <= 1.0:
                raise ValueError(f"Probability of {key} must be in [0, 1], got {value}")
        total = math.fsum(self.probs.values())
        if abs(total - 1.0) > 1e-9:
            raise ValueError(f"Probabilities must sum to 1, got {total}")
        return self

    def get(self, key: str) -> float:
        return self.probs.get(key, 0.0)

    def support(self) -> set[str]:
        return set(self.probs)

    def vector(self) -> np.ndarray:
        """Dense probability vector indexed by basis state."""
        vec = np.zeros(2 ** self.n_bits)
        for key, value in self.probs.items():
            vec[int(key, 2)] = value
        return vec

    @classmethod
    def from_vector(cls, vec: np.ndarray, n_bits: int) -> "Distribution":
        """Build from a dense vector, dropping zero entries."""
        probs = {
            bitstring(i, n_bits): float(p)
            for i, p in enumerate(vec)
            if p > 0.0
        }
        return cls(n_bits=n_bits, probs=probs)


class QuasiDistribution(BaseModel):
    """Mitigated values p_z^QEM; entries may be negative or exceed 1."""
    model_config = ConfigDict(frozen=True)

    n_bits: int = Field(..., ge=1)
    values: dict[str, float] = Field(default_factory=dict)

    @model_validator(mode="after")
    def _validate(self):
        _check_keys(self.values, self.n_bits)
        for key, value in self.values.items():
            if not math.isfinite(value):
                raise ValueError(f"Quasi-probability of {key} is not finite: {value}")
        return self

    def get(self, key: str) -> float:
        return self.values.get(key, 0.0)

    def support(self) -> set[str]:
        return set(self.values)

    @classmethod
    def from_distribution(cls, dist: Distribution) -> "QuasiDistribution":
        return cls(n_bits=dist.n_bits, values=dict(dist.probs))


class Counts(BaseModel):
    """Shot counts per observed bitstring."""
    model_config = ConfigDict(frozen=True)

    n_bits: int = Field(..., ge=1)
    counts: dict[str, int] = Field(default_factory=dict)
    shots: int = Field(0, ge=0)

    @model_validator(mode="after")
    def _validate(self):
        _check_keys(self.counts, self.n_bits)
        if any(c < 0 for c in self.counts.values()):
            raise ValueError("Counts must be non-negative")
        if sum(self.counts.values()) != self.shots:
            raise ValueError(
                f"Counts sum to {sum(self.counts.values())}, expected {self.shots} shots"
            )
        return self


# =============================================================================
# Distribution files
# =============================================================================

def dumps_distribution(dist: Distribution | QuasiDistribution, scale: float = 1) -> str:
    """
    Serialize to the distribution file format.

    Header `n_bits=<n>,lambda=<λ>` followed by one `bitstring,probability` line
    per stored bin in bitstring order, 17 significant digits.
    """
    values = dist.probs if isinstance(dist, Distribution) else dist.values
    lines = [f"n_bits={dist.n_bits},lambda={scale:g}"]
    lines += [f"{key},{values[key]:.17g}" for key in sorted(values)]
    return "\n".join(lines) + "\n"


def loads_distribution(text: str, quasi: bool = False) -> tuple[Distribution | QuasiDistribution, float]:
    """
    Parse the distribution file format.

    Returns:
        (distribution, scale factor from the header)
    """
    lines = [line.strip() for line in text.splitlines() if line.strip()]
    if not lines:
        raise ValueError("Empty distribution file")
    header = dict(part.split("=", 1) for part in lines[0].split(","))
    try:
        n_bits = int(header["n_bits"])
        scale = float(header["lambda"])
    except (KeyError, ValueError):
        raise ValueError(f"Malformed distribution header: {lines[0]!r}")

    values: dict[str, float] = {}
    for line in lines[1:]:
        key, _, raw = line.partition(",")
        values[key] = float(raw)

    if quasi:
        return QuasiDistribution(n_bits=n_bits, values=values), scale
    return Distribution(n_bits=n_bits, probs=values), scale
