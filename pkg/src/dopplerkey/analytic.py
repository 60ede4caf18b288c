"""Closed-form performance theory.

Key rates, the law of the NPSDS under Gaussian Doppler, the truncated-normal
law of its ML estimate, quantisation-bin probabilities and the key matching
probability P_c (nested integral, evaluated numerically).
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import integrate, special

from .geometry import SPEED_OF_LIGHT


class NumericalFailure(RuntimeError):
    """Quadrature did not reach the requested tolerance."""


# ---------------------------------------------------------------------------
# key rate

def gaussian_entropy(variance: float) -> float:
    """Differential entropy (nats) of a normal law with this variance."""
    return 0.5 * math.log(2.0 * math.pi * math.e * variance)


def key_rate(entropy_nats: float, f_c: float) -> float:
    """Achievable key rate ``log(f_c / c) + h`` in nats."""
    if not f_c > 0:
        raise ValueError(f"f_c must be positive, got {f_c}")
    return math.log(f_c / SPEED_OF_LIGHT) + entropy_nats


def max_key_rate(sigma_d_sq: float, f_c: float) -> float:
    """Key rate for Gaussian (Brownian) stochastic Doppler of variance ``sigma_d_sq``."""
    if not sigma_d_sq > 0:
        raise ValueError(f"sigma_d_sq must be positive, got {sigma_d_sq}")
    return key_rate(gaussian_entropy(sigma_d_sq), f_c)


# ---------------------------------------------------------------------------
# NPSDS law

@dataclass(frozen=True)
class NpsdsLaw:
    """Scaled non-central chi-squared law (one degree of freedom).

    ``theta / sigma_theta_sq`` is chi'^2_1 with non-centrality ``lam``.
    """

    sigma_theta_sq: float
    lam: float

    def __post_init__(self) -> None:
        if not (self.sigma_theta_sq > 0 and math.isfinite(self.sigma_theta_sq)):
            raise ValueError(f"sigma_theta_sq must be positive, got {self.sigma_theta_sq}")
        if not (self.lam >= 0 and math.isfinite(self.lam)):
            raise ValueError(f"lam must be >= 0, got {self.lam}")

    @classmethod
    def from_doppler(
        cls, mean_doppler: float, doppler_var: float, power: float, symbol_period: float
    ) -> "NpsdsLaw":
        """Law of ``P T^3 f^2 / 2`` for ``f ~ N(mean_doppler, doppler_var)`` (Hz)."""
        return cls(
            sigma_theta_sq=0.5 * power * symbol_period**3 * doppler_var,
            lam=mean_doppler**2 / doppler_var,
        )

    @property
    def mean(self) -> float:
        return self.sigma_theta_sq * (1.0 + self.lam)

    @property
    def variance(self) -> float:
        return self.sigma_theta_sq**2 * 2.0 * (1.0 + 2.0 * self.lam)

    def upper(self, tail: float = 1e-10) -> float:
        """Value above which at most ``tail`` probability remains."""
        z = -special.ndtri(tail / 2.0)
        return self.sigma_theta_sq * (math.sqrt(self.lam) + z) ** 2


def _log_cosh(z):
    z = np.abs(z)
    return z + np.log1p(np.exp(-2.0 * z)) - math.log(2.0)


def log_bessel_i_minus_half(z):
    """``log I_{-1/2}(z)`` using ``I_{-1/2}(z) = sqrt(2 / (pi z)) cosh z``."""
    z = np.asarray(z, dtype=float)
    return 0.5 * np.log(2.0 / (math.pi * z)) + _log_cosh(z)


def npsds_pdf(theta, law: NpsdsLaw):
    """Density of the NPSDS. Zero for ``theta <= 0``.

    Evaluated in the log domain; for ``lam == 0`` the central chi-squared
    limit is used.
    """
    theta = np.asarray(theta, dtype=float)
    s2, lam = law.sigma_theta_sq, law.lam
    out = np.zeros_like(theta)
    pos = theta > 0
    x = theta[pos] / s2
    if lam == 0:
        logp = -0.5 * x - 0.5 * np.log(2.0 * math.pi * s2 * theta[pos])
    else:
        logp = (
            -math.log(2.0 * s2)
            - 0.5 * (x + lam)
            - 0.25 * np.log(x / lam)
            + log_bessel_i_minus_half(np.sqrt(lam * x))
        )
    out[pos] = np.exp(logp)
    return out if out.ndim else float(out)


def npsds_cdf(theta, law: NpsdsLaw):
    """CDF of the NPSDS via ``P(|Z + sqrt(lam)| <= sqrt(theta / sigma^2))``."""
    theta = np.asarray(theta, dtype=float)
    r = np.sqrt(np.clip(theta, 0.0, None) / law.sigma_theta_sq)
    mu = math.sqrt(law.lam)
    out = special.ndtr(r - mu) - special.ndtr(-r - mu)
    return out if out.ndim else float(out)


# ---------------------------------------------------------------------------
# estimator law

def _estimator_scale(theta_t: float, n: int) -> float:
    if not theta_t > 0:
        raise ValueError(f"theta_t must be positive, got {theta_t}")
    if n < 1:
        raise ValueError(f"n must be >= 1, got {n}")
    return theta_t / math.sqrt(n)


def estimator_pdf(theta_hat, theta_t: float, n: int):
    """Truncated normal on [0, inf) with location theta_t, scale theta_t/sqrt(n)."""
    scale = _estimator_scale(theta_t, n)
    x = np.asarray(theta_hat, dtype=float)
    z = (x - theta_t) / scale
    norm = special.ndtr(math.sqrt(n))  # mass of the untruncated law on [0, inf)
    out = np.where(x >= 0, np.exp(-0.5 * z * z) / (math.sqrt(2.0 * math.pi) * scale * norm), 0.0)
    return out if out.ndim else float(out)


def estimator_cdf(theta_hat, theta_t: float, n: int):
    scale = _estimator_scale(theta_t, n)
    x = np.clip(np.asarray(theta_hat, dtype=float), 0.0, None)
    lo = special.ndtr(-math.sqrt(n))
    out = (special.ndtr((x - theta_t) / scale) - lo) / (1.0 - lo)
    return out if out.ndim else float(out)


def normal_mass(a, b):
    """``Phi(b) - Phi(a)`` for standardised bounds, accurate in both tails."""
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    upper = a > 0
    out = np.where(
        upper,
        special.ndtr(-a) - special.ndtr(-b),
        special.ndtr(b) - special.ndtr(a),
    )
    return out if out.ndim else float(out)


def bin_probability(l: int, delta: float, theta_hat_ab: float, theta_t: float, n: int) -> float:
    """Probability that Bob-to-Alice's estimate falls in ``[l delta, (l+1) delta]``.

    Uses the conditional law ``N(theta_hat_ab, 2 theta_t^2 / n)`` and the
    exact Gaussian CDF difference.
    """
    if not delta > 0:
        raise ValueError(f"delta must be positive, got {delta}")
    sd = math.sqrt(2.0) * _estimator_scale(theta_t, n)
    return float(normal_mass((l * delta - theta_hat_ab) / sd, ((l + 1) * delta - theta_hat_ab) / sd))


# ---------------------------------------------------------------------------
# key matching probability

@dataclass(frozen=True)
class QuadratureSpec:
    """Tolerances and truncation for the nested P_c integral.

    Gaussian factors are integrated over mean +- ``n_sigma`` standard
    deviations; the NPSDS factor over [0, upper(``tail``)].
    """

    epsrel: float = 1e-6
    epsabs: float = 1e-10
    n_sigma: float = 10.0
    tail: float = 1e-10
    limit: int = 200

    def __post_init__(self) -> None:
        if not (self.epsrel > 0 and self.epsabs > 0 and self.n_sigma > 0 and 0 < self.tail < 1):
            raise ValueError("quadrature tolerances must be positive")


CONDITIONING_MODES = ("independent", "conditional")


def _quad(func, a, b, quad: QuadratureSpec, points=None) -> float:
    kwargs = dict(epsabs=quad.epsabs, epsrel=quad.epsrel, limit=quad.limit, full_output=1)
    if points is not None:
        points = [p for p in points if a < p < b]
        if points:
            kwargs["points"] = points
    res = integrate.quad(func, a, b, **kwargs)
    if len(res) > 3:
        raise NumericalFailure(f"quadrature on [{a}, {b}] did not converge: {res[3]}")
    return res[0]


def _fold(masses: np.ndarray, first_index: int, levels: int | None) -> np.ndarray:
    """Group per-bin masses by symbol (index mod levels)."""
    if levels is None:
        return masses
    symbols = (np.arange(masses.size) + first_index) % levels
    return np.bincount(symbols, weights=masses, minlength=levels)


def _bin_masses(theta_t: float, n: int, delta: float, quad: QuadratureSpec):
    """Truncated-normal masses of the estimate over the bins it can reach."""
    scale = theta_t / math.sqrt(n)
    lo = max(0.0, theta_t - quad.n_sigma * scale)
    hi = theta_t + quad.n_sigma * scale
    l0, l1 = int(lo // delta), int(hi // delta)
    edges = np.arange(l0, l1 + 2) * delta
    edges[0] = max(edges[0], 0.0)
    z = (edges - theta_t) / scale
    masses = normal_mass(z[:-1], z[1:]) / special.ndtr(math.sqrt(n))
    return l0, masses


def match_given_theta(
    theta_t: float,
    delta: float,
    n: int,
    levels: int | None = None,
    conditioning: str = "independent",
    quad: QuadratureSpec = QuadratureSpec(),
) -> float:
    """Inner integral of P_c: match probability for a fixed NPSDS ``theta_t``.

    ``conditioning="independent"`` treats both estimates as independent
    draws given ``theta_t``; the inner integral then collapses to a sum over
    bins. ``conditioning="conditional"`` takes Bob-to-Alice's estimate as
    ``N(theta_hat_ab, 2 theta_t^2 / n)`` around Alice-to-Bob's and integrates
    numerically, piecewise between bin edges.
    ``levels=None`` asks for the same index, an integer asks for the same
    symbol ``index mod levels``.
    """
    if theta_t <= 0:
        return 1.0
    if conditioning == "independent":
        l0, masses = _bin_masses(theta_t, n, delta, quad)
        grouped = _fold(masses, l0, levels)
        return float(np.sum(grouped**2))
    if conditioning != "conditional":
        raise ValueError(f"unknown conditioning {conditioning!r}, expected one of {CONDITIONING_MODES}")

    scale = theta_t / math.sqrt(n)
    sd = math.sqrt(2.0) * scale
    lo = max(0.0, theta_t - quad.n_sigma * scale)
    hi = theta_t + quad.n_sigma * scale
    l0, l1 = int(lo // delta), int(hi // delta)

    def landing(x: float, l: int) -> float:
        if levels is None:
            return bin_probability(l, delta, x, theta_t, n)
        # same symbol: sum over bins of equal residue within reach of N(x, sd^2)
        k_lo = int((x - quad.n_sigma * sd) // delta) - 1
        k_hi = int((x + quad.n_sigma * sd) // delta) + 1
        first = l + ((k_lo - l) // levels) * levels
        ks = np.arange(first, k_hi + 1, levels)
        return float(np.sum(normal_mass((ks * delta - x) / sd, ((ks + 1) * delta - x) / sd)))

    total = 0.0
    for l in range(l0, l1 + 1):
        a, b = max(lo, l * delta), min(hi, (l + 1) * delta)
        if b <= a:
            continue
        total += _quad(lambda x, l=l: landing(x, l) * estimator_pdf(x, theta_t, n), a, b, quad)
    return total


def key_match_probability(
    delta: float,
    law: NpsdsLaw,
    n: int,
    quad: QuadratureSpec = QuadratureSpec(),
    levels: int | None = None,
    conditioning: str = "independent",
) -> float:
    """Probability that Alice and Bob quantise to the same index (or symbol).

    The outer integral runs over the NPSDS law; substituting
    ``theta = sigma^2 u^2`` removes the ``theta^{-1/2}`` singularity at zero.
    """
    if not delta > 0:
        raise ValueError(f"delta must be positive, got {delta}")
    if n < 1:
        raise ValueError(f"n must be >= 1, got {n}")
    s2 = law.sigma_theta_sq
    unit_law = NpsdsLaw(1.0, law.lam)
    d = delta / s2  # work in units of sigma_theta_sq; P_c is scale free
    u_max = math.sqrt(unit_law.upper(quad.tail))
    mu = math.sqrt(law.lam)

    def integrand(u: float) -> float:
        if u <= 0:
            return 0.0
        x = u * u
        weight = npsds_pdf(x, unit_law) * 2.0 * u
        return match_given_theta(x, d, n, levels, conditioning, quad) * weight

    pc = _quad(integrand, 0.0, u_max, quad, points=[mu] if mu > 0 else None)
    return min(1.0, max(0.0, pc))


def theoretical_kdr_curve(
    gamma_grid,
    n_set,
    law: NpsdsLaw,
    quad: QuadratureSpec = QuadratureSpec(),
    levels: int | None = None,
    conditioning: str = "independent",
) -> list[dict]:
    """``1 - P_c`` for every (Gamma, N); ``delta = Gamma * E[theta]``."""
    gamma_grid = list(gamma_grid)
    n_set = list(n_set)
    if not gamma_grid or not n_set:
        raise ValueError("gamma_grid and n_set must be nonempty")
    rows = []
    for n in n_set:
        for gamma in gamma_grid:
            delta = gamma * law.mean
            pc = key_match_probability(delta, law, int(n), quad, levels, conditioning)
            rows.append({"gamma": float(gamma), "n": int(n), "delta": delta, "p_c": pc, "kdr": 1.0 - pc})
    return rows
