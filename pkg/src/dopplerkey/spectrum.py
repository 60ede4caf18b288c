"""Power spectra, nominal power spectral density samples (NPSDS) and their
maximum-likelihood estimation.

Two ways to get spectral samples are provided. The frame path transforms a
received pilot frame; the statistical path draws the samples directly from
the exponential law with mean ``theta``. The quantitative experiments use the
statistical path.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .signalchain import ComplexFrame


@dataclass(frozen=True, eq=False)
class PowerSpectrum:
    samples: np.ndarray
    bin_spacing: float

    def __post_init__(self) -> None:
        arr = np.asarray(self.samples, dtype=float).reshape(-1)
        if arr.size < 1:
            raise ValueError("power spectrum must hold at least one sample")
        if np.any(arr < 0):
            raise ValueError("power spectrum samples must be nonnegative")
        object.__setattr__(self, "samples", arr)

    def __len__(self) -> int:
        return self.samples.size


@dataclass(frozen=True)
class NpsdsValue:
    signal_part: float
    noise_part: float

    @property
    def theta(self) -> float:
        return self.signal_part + self.noise_part


def dft(x: ComplexFrame) -> ComplexFrame:
    """Unnormalised forward DFT, ``X(k) = sum_i x(i) exp(-2j pi i k / N)``."""
    return ComplexFrame(np.fft.fft(x.samples), x.symbol_period)


def power_spectrum(x: ComplexFrame) -> PowerSpectrum:
    X = np.fft.fft(x.samples)
    return PowerSpectrum(np.abs(X) ** 2, 1.0 / (len(x) * x.symbol_period))


def quadratic_npsds(doppler_cyclic, power: float, symbol_period: float):
    """Small-Doppler NPSDS law ``P T^3 f_D^2 / 2``; vectorised over Doppler."""
    return 0.5 * power * symbol_period**3 * np.square(doppler_cyclic)


def exact_npsds(doppler_cyclic, power: float, symbol_period: float):
    """BPSK NPSDS ``(P T / 2) sinc^2(1 - f_D T)`` with the normalised sinc.

    Not even in ``f_D``; the quadratic law is what the key generation uses.
    """
    return 0.5 * power * symbol_period * np.sinc(1.0 - np.asarray(doppler_cyclic) * symbol_period) ** 2


def theoretical_npsds_bpsk(
    doppler_cyclic: float, power: float, symbol_period: float, noise_var: float = 0.0
) -> tuple[NpsdsValue, NpsdsValue]:
    """Exact and quadratic NPSDS at a given cyclic Doppler (Hz)."""
    if not power > 0:
        raise ValueError(f"power must be positive, got {power}")
    if not symbol_period > 0:
        raise ValueError(f"symbol_period must be positive, got {symbol_period}")
    exact = NpsdsValue(float(exact_npsds(doppler_cyclic, power, symbol_period)), noise_var)
    quad = NpsdsValue(float(quadratic_npsds(doppler_cyclic, power, symbol_period)), noise_var)
    return exact, quad


def sample_npsds_exponential(
    theta: float, n: int, rng: np.random.Generator, bin_spacing: float = 1.0
) -> PowerSpectrum:
    """``n`` i.i.d. spectral samples, exponential with mean ``theta``."""
    if not theta > 0:
        raise ValueError(f"theta must be positive, got {theta}")
    if n < 1:
        raise ValueError(f"n must be >= 1, got {n}")
    return PowerSpectrum(rng.exponential(theta, size=n), bin_spacing)


def ml_estimate(s: PowerSpectrum) -> float:
    """ML estimate of the NPSDS: the sample mean of the spectrum."""
    return float(np.mean(s.samples))


def ml_estimates(theta, n: int, rng: np.random.Generator) -> np.ndarray:
    """Batched statistical path: one ML estimate per entry of ``theta``.

    Draws an ``(len(theta), n)`` block of unit exponentials, scales each row by
    its ``theta`` and averages. Entries with ``theta == 0`` give 0.
    """
    theta = np.asarray(theta, dtype=float)
    unit = rng.exponential(1.0, size=(theta.size, n))
    return theta.reshape(-1) * unit.mean(axis=1)


def log_likelihood(theta: float, s: PowerSpectrum) -> float:
    """Exponential log-likelihood ``-N ln(theta) - sum(S) / theta``."""
    if not theta > 0:
        raise ValueError(f"theta must be positive, got {theta}")
    return -len(s) * np.log(theta) - float(np.sum(s.samples)) / theta
