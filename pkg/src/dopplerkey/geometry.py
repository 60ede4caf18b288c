"""Spacecraft mobility and Doppler geometry.

Velocities are split into a publicly known route component ``v_det`` and a
stochastic component with i.i.d. per-axis Gaussian entries of standard
deviation ``sigma_v``. The nominal Doppler of a link is the radial relative
velocity in m/s; multiplying by ``f_c / c`` gives the cyclic shift in Hz.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

SPEED_OF_LIGHT = 299_792_458.0  # m/s

# relative threshold for numerical rank
RANK_RTOL = 1e-10


def _as_vec3(value, name: str) -> np.ndarray:
    arr = np.array(value, dtype=float).reshape(-1)
    if arr.shape != (3,):
        raise ValueError(f"{name} must have exactly 3 components, got {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise ValueError(f"{name} must be finite, got {arr}")
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True, eq=False)
class SpacecraftState:
    """Kinematic state of one node.

    ``position`` in m, ``v_det`` in m/s, ``sigma_v`` is the per-axis standard
    deviation of the stochastic velocity (m/s), ``a_max`` the acceleration
    magnitude bound used by the timing check (m/s^2).
    """

    id: str
    position: np.ndarray
    v_det: np.ndarray
    sigma_v: float = 0.0
    a_max: float = 0.0

    def __post_init__(self) -> None:
        object.__setattr__(self, "position", _as_vec3(self.position, "position"))
        object.__setattr__(self, "v_det", _as_vec3(self.v_det, "v_det"))
        if not (self.sigma_v >= 0 and math.isfinite(self.sigma_v)):
            raise ValueError(f"sigma_v must be finite and >= 0, got {self.sigma_v}")
        if not (self.a_max >= 0 and math.isfinite(self.a_max)):
            raise ValueError(f"a_max must be finite and >= 0, got {self.a_max}")
        object.__setattr__(self, "sigma_v", float(self.sigma_v))
        object.__setattr__(self, "a_max", float(self.a_max))

    @property
    def speed(self) -> float:
        return float(np.linalg.norm(self.v_det))

    def replace(self, **changes) -> "SpacecraftState":
        kwargs = dict(
            id=self.id,
            position=self.position,
            v_det=self.v_det,
            sigma_v=self.sigma_v,
            a_max=self.a_max,
        )
        kwargs.update(changes)
        return SpacecraftState(**kwargs)


@dataclass(frozen=True)
class DopplerObservation:
    """Doppler of the link ``link[0] -> link[1]``.

    ``f_nominal`` is the radial relative velocity (m/s), ``f_cyclic`` the
    shift in Hz and ``omega`` the angular shift in rad/s.
    """

    f_nominal: float
    f_cyclic: float
    omega: float
    link: tuple[str, str] = field(default=("", ""))


def nominal_doppler(p_m, v_m, p_k, v_k) -> np.ndarray:
    """Vectorised nominal Doppler ``(v_m - v_k) . (p_m - p_k) / |p_m - p_k|``.

    Accepts arrays of shape ``(..., 3)`` that broadcast against each other.
    """
    dp = np.asarray(p_m, dtype=float) - np.asarray(p_k, dtype=float)
    dv = np.asarray(v_m, dtype=float) - np.asarray(v_k, dtype=float)
    dist = np.linalg.norm(dp, axis=-1)
    if np.any(dist == 0):
        raise ValueError("coincident positions: Doppler undefined at zero separation")
    return np.sum(dv * dp, axis=-1) / dist


def cyclic_doppler(f_nominal, f_c: float):
    """Convert nominal Doppler (m/s) to cyclic Doppler (Hz)."""
    return f_nominal * (f_c / SPEED_OF_LIGHT)


def relative_doppler(
    m: SpacecraftState,
    k: SpacecraftState,
    f_c: float,
    v_m=None,
    v_k=None,
) -> DopplerObservation:
    """Doppler observed at ``k`` for a signal sent by ``m``.

    ``v_m``/``v_k`` override the deterministic velocities, e.g. with a
    realised velocity from :func:`brownian_step`.
    """
    vm = m.v_det if v_m is None else v_m
    vk = k.v_det if v_k is None else v_k
    f = float(nominal_doppler(m.position, vm, k.position, vk))
    f_cyc = f * f_c / SPEED_OF_LIGHT
    return DopplerObservation(
        f_nominal=f,
        f_cyclic=f_cyc,
        omega=2.0 * math.pi * f_cyc,
        link=(m.id, k.id),
    )


def brownian_step(
    s: SpacecraftState, dt: float, rng: np.random.Generator
) -> tuple[SpacecraftState, np.ndarray]:
    """Advance one block of length ``dt`` with a freshly drawn velocity.

    The stochastic velocity is held constant over the block, so the
    displacement is ``(v_det + v_tilde) * dt``. Returns the new state and the
    realised total velocity.
    """
    if not dt > 0:
        raise ValueError(f"dt must be positive, got {dt}")
    v_tilde = s.sigma_v * rng.standard_normal(3)
    velocity = s.v_det + v_tilde
    new_state = s.replace(position=s.position + velocity * dt)
    return new_state, velocity


def sample_velocities(s: SpacecraftState, n: int, rng: np.random.Generator) -> np.ndarray:
    """``n`` realised velocities ``v_det + v_tilde`` as an ``(n, 3)`` array."""
    return s.v_det + s.sigma_v * rng.standard_normal((n, 3))


def mobility_constant(s: SpacecraftState) -> float:
    """kappa = sigma_v**2 / |v_det|."""
    speed = s.speed
    if speed == 0:
        raise ValueError("mobility constant undefined for zero deterministic speed")
    return s.sigma_v**2 / speed


def sigma_v_for_kappa(kappa: float, speed: float) -> float:
    """Inverse of :func:`mobility_constant`: per-axis sigma_v giving ``kappa``."""
    if kappa < 0:
        raise ValueError(f"kappa must be >= 0, got {kappa}")
    return math.sqrt(kappa * speed)


def sigma_d_squared(a: SpacecraftState, b: SpacecraftState) -> float:
    """Variance of the stochastic nominal Doppler of the a-b link (m^2/s^2).

    The projection onto a unit direction keeps the per-axis variance, so the
    geometry drops out.
    """
    return a.sigma_v**2 + b.sigma_v**2


def eve_observability_system(
    a: SpacecraftState,
    b: SpacecraftState,
    e: SpacecraftState,
    f_ae: float,
    f_be: float,
) -> tuple[np.ndarray, np.ndarray, int]:
    """Linear system Eve would have to invert to recover Alice/Bob mobility.

    Unknowns are ordered ``[v_a, p_a, v_b, p_b]`` (12 scalars). Returns the
    2x12 coefficient matrix, the right-hand side and its numerical rank.
    """
    if np.array_equal(e.position, a.position) or np.array_equal(e.position, b.position):
        raise ValueError("Eve coincides with a legitimate node")
    zeros = np.zeros(3)
    row_a = np.concatenate([a.position - e.position, -e.v_det, zeros, zeros])
    row_b = np.concatenate([zeros, zeros, b.position - e.position, -e.v_det])
    matrix = np.vstack([row_a, row_b])
    ve_pe = float(e.v_det @ e.position)
    rhs = np.array([f_ae - ve_pe, f_be - ve_pe])
    return matrix, rhs, numerical_rank(matrix)


def numerical_rank(matrix: np.ndarray, rtol: float = RANK_RTOL) -> int:
    sv = np.linalg.svd(matrix, compute_uv=False)
    if sv.size == 0 or sv[0] == 0:
        return 0
    return int(np.sum(sv > rtol * sv[0]))


def minimum_norm_recovery(matrix: np.ndarray, rhs: np.ndarray) -> dict[str, np.ndarray]:
    """Eve's least-squares guess of ``[v_a, p_a, v_b, p_b]``."""
    x, *_ = np.linalg.lstsq(matrix, rhs, rcond=None)
    return {"v_a": x[0:3], "p_a": x[3:6], "v_b": x[6:9], "p_b": x[9:12]}


@dataclass(frozen=True)
class TimingCheck:
    delta_t: float
    bound: float
    feasible: bool


def timing_feasibility(
    a: SpacecraftState, b: SpacecraftState, alpha: float, v_max: float
) -> TimingCheck:
    """Check that velocities stay put over the two-way pilot exchange.

    ``delta_t = (1 + alpha) |p_a - p_b| / c`` and the acceleration budget is
    ``v_max / delta_t``; feasible when ``a.a_max + b.a_max`` fits in it.
    Zero separation gives an unbounded budget.
    """
    if alpha < 0:
        raise ValueError(f"alpha must be >= 0, got {alpha}")
    if not v_max > 0:
        raise ValueError(f"v_max must be positive, got {v_max}")
    distance = float(np.linalg.norm(a.position - b.position))
    delta_t = (1.0 + alpha) * distance / SPEED_OF_LIGHT
    bound = math.inf if delta_t == 0 else v_max / delta_t
    return TimingCheck(delta_t=delta_t, bound=bound, feasible=(a.a_max + b.a_max) <= bound)
