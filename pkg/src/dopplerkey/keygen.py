"""Key generation: per-duration NPSDS estimation, quantisation and metrics.

Within one key duration Alice and Bob each send N pilots. Both legitimate
links see the same NPSDS (reciprocal Doppler); Eve overhears both
transmissions and gets one estimate per link from her own Doppler.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .config import QuantizerConfig, ScenarioConfig
from .geometry import nominal_doppler, sample_velocities
from .signalchain import LinkModel, apply_link, bpsk_pilots
from .spectrum import ml_estimate, ml_estimates, power_spectrum, quadratic_npsds

LINKS = ("ab", "ba", "ae", "be")


@dataclass(frozen=True)
class DurationRecord:
    t: int
    theta_true: float
    theta_hat: dict[str, float]


@dataclass(frozen=True, eq=False)
class DurationBatch:
    """Column-wise records of many durations.

    ``theta_true`` is the shared NPSDS of the Alice-Bob link; ``theta_link``
    holds each link's own NPSDS (equal to ``theta_true`` for ab and ba) and
    ``theta_hat`` the ML estimates.
    """

    theta_true: np.ndarray
    theta_link: dict[str, np.ndarray]
    theta_hat: dict[str, np.ndarray]

    def __len__(self) -> int:
        return self.theta_true.size

    def records(self, offset: int = 0) -> list[DurationRecord]:
        return [
            DurationRecord(
                t=offset + i,
                theta_true=float(self.theta_true[i]),
                theta_hat={k: float(v[i]) for k, v in self.theta_hat.items()},
            )
            for i in range(len(self))
        ]

    @staticmethod
    def concat(batches: Sequence["DurationBatch"]) -> "DurationBatch":
        return DurationBatch(
            theta_true=np.concatenate([b.theta_true for b in batches]),
            theta_link={k: np.concatenate([b.theta_link[k] for b in batches]) for k in LINKS},
            theta_hat={k: np.concatenate([b.theta_hat[k] for b in batches]) for k in LINKS},
        )


@dataclass(frozen=True, eq=False)
class KeyStream:
    node: str
    indices: np.ndarray
    levels: int = 2

    def __post_init__(self) -> None:
        object.__setattr__(self, "indices", np.asarray(self.indices, dtype=np.int64).reshape(-1))

    def __len__(self) -> int:
        return self.indices.size

    @property
    def symbols(self) -> np.ndarray:
        return np.mod(self.indices, self.levels)

    @property
    def bits(self) -> np.ndarray:
        """Symbols written MSB first, ``ceil(log2 L)`` bits each."""
        width = math.ceil(math.log2(self.levels))
        shifts = np.arange(width - 1, -1, -1)
        return ((self.symbols[:, None] >> shifts) & 1).astype(np.uint8).reshape(-1)


def quantize(theta_hat, q: QuantizerConfig, delta: float | None = None):
    """Floor index and folded symbol of an estimate (scalar or array).

    ``delta`` overrides the step when the quantiser is configured with a
    normalised step.
    """
    step = q.step if delta is None else delta
    if step is None:
        raise ValueError("normalised quantiser needs an explicit delta")
    theta_hat = np.asarray(theta_hat, dtype=float)
    if np.any(theta_hat < 0):
        raise ValueError("NPSDS estimates must be nonnegative")
    index = np.floor(theta_hat / step).astype(np.int64)
    symbol = np.mod(index, q.levels)
    if index.ndim == 0:
        return int(index), int(symbol)
    return index, symbol


def key_stream(node: str, theta_hat, q: QuantizerConfig, delta: float | None = None) -> KeyStream:
    index, _ = quantize(np.atleast_1d(theta_hat), q, delta)
    return KeyStream(node, index, q.levels)


def _check_lengths(s1: KeyStream, s2: KeyStream) -> None:
    if len(s1) != len(s2):
        raise ValueError(f"key streams differ in length: {len(s1)} vs {len(s2)}")
    if len(s1) == 0:
        raise ValueError("key streams are empty")


def kdr(s1: KeyStream, s2: KeyStream) -> float:
    """Fraction of durations whose symbols disagree."""
    _check_lengths(s1, s2)
    return float(np.mean(s1.symbols != s2.symbols))


def index_kdr(s1: KeyStream, s2: KeyStream) -> float:
    """Fraction of durations whose raw quantisation indices disagree."""
    _check_lengths(s1, s2)
    return float(np.mean(s1.indices != s2.indices))


def bit_kdr(s1: KeyStream, s2: KeyStream) -> float:
    _check_lengths(s1, s2)
    return float(np.mean(s1.bits != s2.bits))


def mse(records: Sequence[DurationRecord], link: str) -> float:
    """Mean squared error of one link's estimate against the shared NPSDS."""
    if not records:
        raise ValueError("no records")
    err = np.array([r.theta_hat[link] - r.theta_true for r in records])
    return float(np.mean(err**2))


def batch_mse(batch: DurationBatch, link: str) -> float:
    return float(np.mean((batch.theta_hat[link] - batch.theta_true) ** 2))


def simulate_durations(
    cfg: ScenarioConfig,
    count: int,
    rng: np.random.Generator,
    n_pilots: int | None = None,
    stochastic: bool = True,
    theta_t: float | None = None,
) -> DurationBatch:
    """Simulate ``count`` key durations on the statistical path.

    Each duration draws fresh velocities for all three nodes (positions stay
    at the configured snapshot), turns the four link Dopplers into NPSDS
    values with the quadratic BPSK law and estimates each from ``n_pilots``
    exponential spectral samples.

    ``stochastic=False`` keeps the deterministic velocities. ``theta_t``
    rescales every NPSDS so that the nominal Alice-Bob value equals it.

    Draw order per call: Alice, Bob, Eve velocities, then the spectra of the
    ab, ba, ae and be links.
    """
    n = cfg.n_pilots if n_pilots is None else n_pilots
    a, b, e = cfg.alice_state, cfg.bob_state, cfg.eve
    if stochastic:
        va = sample_velocities(a, count, rng)
        vb = sample_velocities(b, count, rng)
        ve = sample_velocities(e, count, rng)
    else:
        va = np.broadcast_to(a.v_det, (count, 3))
        vb = np.broadcast_to(b.v_det, (count, 3))
        ve = np.broadcast_to(e.v_det, (count, 3))

    f_ab = nominal_doppler(a.position, va, b.position, vb)
    f_ae = nominal_doppler(a.position, va, e.position, ve)
    f_be = nominal_doppler(b.position, vb, e.position, ve)

    def npsds(f_nominal):
        return quadratic_npsds(f_nominal * cfg.doppler_scale, cfg.power, cfg.symbol_period)

    theta = {"ab": npsds(f_ab), "ae": npsds(f_ae), "be": npsds(f_be)}
    if theta_t is not None:
        reference = npsds(cfg.nominal_dopplers()["ab"])
        if reference <= 0:
            raise ValueError("nominal Alice-Bob Doppler is zero; cannot rescale to theta_t")
        theta = {k: v * (theta_t / reference) for k, v in theta.items()}
    theta["ba"] = theta["ab"]  # reciprocal link sees the same Doppler

    hats = {link: ml_estimates(theta[link], n, rng) for link in LINKS}
    return DurationBatch(
        theta_true=theta["ab"],
        theta_link={link: theta[link] for link in LINKS},
        theta_hat=hats,
    )


def run_key_duration(cfg: ScenarioConfig, t: int, rng: np.random.Generator) -> DurationRecord:
    """One key duration (see :func:`simulate_durations`)."""
    return simulate_durations(cfg, 1, rng).records(offset=t)[0]


@dataclass(frozen=True)
class KeyComparison:
    delta: float
    kdr_ab: float
    kdr_ae: float
    kdr_be: float
    index_kdr_ab: float
    index_kdr_ae: float
    index_kdr_be: float
    bit_kdr_ab: float


def compare_keys(batch: DurationBatch, q: QuantizerConfig, delta: float) -> KeyComparison:
    """Quantise all four estimates and score the key agreement.

    Alice keys from the Bob-to-Alice estimate, Bob from Alice-to-Bob; Eve's
    streams from her ae and be estimates are scored against Alice and Bob.
    """
    alice = key_stream("alice", batch.theta_hat["ba"], q, delta)
    bob = key_stream("bob", batch.theta_hat["ab"], q, delta)
    eve_a = key_stream("eve", batch.theta_hat["ae"], q, delta)
    eve_b = key_stream("eve", batch.theta_hat["be"], q, delta)
    return KeyComparison(
        delta=delta,
        kdr_ab=kdr(alice, bob),
        kdr_ae=kdr(alice, eve_a),
        kdr_be=kdr(bob, eve_b),
        index_kdr_ab=index_kdr(alice, bob),
        index_kdr_ae=index_kdr(alice, eve_a),
        index_kdr_be=index_kdr(bob, eve_b),
        bit_kdr_ab=bit_kdr(alice, bob),
    )


def frame_path_estimate(
    cfg: ScenarioConfig,
    doppler_cyclic: float,
    rng: np.random.Generator,
    n_pilots: int | None = None,
    random_pilots: bool = False,
) -> float:
    """NPSDS estimate from an actual pilot frame: pilots, link, spectrum, ML.

    Demonstration path only; path loss is off and the noise variance is the
    configured one.
    """
    n = cfg.n_pilots if n_pilots is None else n_pilots
    x = bpsk_pilots(n, cfg.power, rng if random_pilots else None, cfg.symbol_period)
    link = LinkModel(zeta=1.0, noise_var=cfg.noise_var, doppler_cyclic=doppler_cyclic)
    y = apply_link(x, link, rng)
    return ml_estimate(power_spectrum(y))


def sample_npsds(cfg: ScenarioConfig, count: int, rng: np.random.Generator) -> np.ndarray:
    """Shared Alice-Bob NPSDS for ``count`` durations (velocity draws only)."""
    a, b = cfg.alice_state, cfg.bob_state
    va = sample_velocities(a, count, rng)
    vb = sample_velocities(b, count, rng)
    f_ab = nominal_doppler(a.position, va, b.position, vb)
    return quadratic_npsds(f_ab * cfg.doppler_scale, cfg.power, cfg.symbol_period)
