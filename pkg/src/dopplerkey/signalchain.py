"""Pilot generation and the baseband inter-spacecraft link."""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np


def db_to_linear(db: float) -> float:
    """Power ratio in dB to linear, reference level 1."""
    return 10.0 ** (db / 10.0)


@dataclass(frozen=True, eq=False)
class ComplexFrame:
    samples: np.ndarray
    symbol_period: float

    def __post_init__(self) -> None:
        arr = np.asarray(self.samples, dtype=complex).reshape(-1)
        if arr.size < 1:
            raise ValueError("frame must hold at least one sample")
        if not np.all(np.isfinite(arr)):
            raise ValueError("frame samples must be finite")
        if not self.symbol_period > 0:
            raise ValueError(f"symbol_period must be positive, got {self.symbol_period}")
        object.__setattr__(self, "samples", arr)

    def __len__(self) -> int:
        return self.samples.size


@dataclass(frozen=True)
class LinkModel:
    """Path loss, Doppler rotation and receiver noise of one directed link.

    Leave ``distance`` unset to use ``zeta`` as given (1 disables path loss).
    """

    zeta: float = 1.0
    pl_exponent: float = 2.0
    distance: float | None = None
    noise_var: float = 0.0
    doppler_cyclic: float = 0.0

    def __post_init__(self) -> None:
        if self.noise_var < 0:
            raise ValueError(f"noise_var must be >= 0, got {self.noise_var}")
        if self.distance is not None:
            if not self.distance > 0:
                raise ValueError(f"distance must be positive, got {self.distance}")
            object.__setattr__(self, "zeta", self.distance ** (-self.pl_exponent))
        if self.zeta < 0:
            raise ValueError(f"zeta must be >= 0, got {self.zeta}")


def bpsk_pilots(
    n: int,
    power: float,
    rng: np.random.Generator | None = None,
    symbol_period: float = 1e-6,
) -> ComplexFrame:
    """``n`` BPSK pilots of energy ``power``.

    Without ``rng`` the phase alternates between -pi and +pi, which is the
    constant symbol ``-sqrt(power)``. With ``rng`` the signs are random and
    equiprobable (phases 0 and pi).
    """
    if n < 1:
        raise ValueError(f"n must be >= 1, got {n}")
    if not power > 0:
        raise ValueError(f"power must be positive, got {power}")
    if rng is None:
        phases = np.where(np.arange(n) % 2 == 0, -math.pi, math.pi)
    else:
        phases = math.pi * rng.integers(0, 2, size=n)
    return ComplexFrame(math.sqrt(power) * np.exp(1j * phases), symbol_period)


def complex_noise(n: int, noise_var: float, rng: np.random.Generator) -> np.ndarray:
    """Circular complex Gaussian samples with ``E|e|^2 = noise_var``."""
    scale = math.sqrt(noise_var / 2.0)
    return scale * (rng.standard_normal(n) + 1j * rng.standard_normal(n))


def apply_link(x: ComplexFrame, link: LinkModel, rng: np.random.Generator) -> ComplexFrame:
    """``y(i) = zeta x(i) exp(j 2 pi f_D i T) + e(i)`` for i = 1..N."""
    n = len(x)
    i = np.arange(1, n + 1)
    rotation = np.exp(2j * math.pi * link.doppler_cyclic * i * x.symbol_period)
    y = link.zeta * x.samples * rotation
    if link.noise_var > 0:
        y = y + complex_noise(n, link.noise_var, rng)
    return ComplexFrame(y, x.symbol_period)
