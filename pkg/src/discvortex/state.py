from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

from .geometry import FloatArray


def _frozen(a: np.ndarray) -> FloatArray:
    a = np.ascontiguousarray(a, dtype=np.float64)
    a.setflags(write=False)
    return a


@dataclass(frozen=True)
class VortexState:
    """Particles in the closed right half-disc at time ``t``.

    ``omega`` and ``weight`` never change along a run (pure transport);
    ``core`` is the per-particle blob radius used by the regularized kernel.
    """

    t: float
    positions: FloatArray  # (N, 2)
    omega: FloatArray  # (N,)
    weight: FloatArray  # (N,) area weights
    core: FloatArray  # (N,) blob radii
    meta: dict = field(default_factory=dict, compare=False)

    def __post_init__(self) -> None:
        pos = _frozen(self.positions).reshape(-1, 2)
        n = pos.shape[0]
        object.__setattr__(self, "positions", pos)
        for name in ("omega", "weight", "core"):
            arr = _frozen(getattr(self, name)).reshape(-1)
            if arr.shape[0] != n:
                raise ValueError(f"{name} has {arr.shape[0]} entries, expected {n}")
            object.__setattr__(self, name, arr)
        if np.any(self.weight < 0):
            raise ValueError("area weights must be non-negative")
        if n and np.any(self.core <= 0):
            raise ValueError("blob radii must be positive")

    @property
    def n(self) -> int:
        return self.positions.shape[0]

    @property
    def strength(self) -> FloatArray:
        return self.omega * self.weight

    def omega_sup(self) -> float:
        return float(np.max(np.abs(self.omega))) if self.n else 0.0

    def with_positions(self, positions: np.ndarray, t: float) -> "VortexState":
        return replace(self, positions=positions, t=float(t), meta=dict(self.meta))

    @classmethod
    def empty(cls, t: float = 0.0) -> "VortexState":
        z = np.zeros(0)
        return cls(t=t, positions=np.zeros((0, 2)), omega=z, weight=z, core=z)
