"""Scenario configuration with the reference campaign as defaults."""
from __future__ import annotations

import hashlib
import json
import math
import sys
from dataclasses import dataclass, field, fields, replace
from pathlib import Path

from .analytic import NpsdsLaw
from .geometry import SPEED_OF_LIGHT, SpacecraftState, nominal_doppler, sigma_d_squared, sigma_v_for_kappa
from .signalchain import db_to_linear

if sys.version_info >= (3, 11):
    import tomllib
else:  # pragma: no cover
    import tomli as tomllib


class ConfigError(ValueError):
    """Invalid or unreadable scenario configuration."""


@dataclass(frozen=True)
class QuantizerConfig:
    """Uniform quantiser. Exactly one of ``step`` / ``normalized_step`` is set;
    ``normalized_step`` is the step divided by the mean NPSDS."""

    step: float | None = None
    normalized_step: float | None = 1.0
    levels: int = 2

    def __post_init__(self) -> None:
        if (self.step is None) == (self.normalized_step is None):
            raise ConfigError("set exactly one of quantizer step / normalized_step")
        if self.step is not None and not self.step > 0:
            raise ConfigError(f"quantizer step must be positive, got {self.step}")
        if self.normalized_step is not None and not self.normalized_step > 0:
            raise ConfigError(f"normalized_step must be positive, got {self.normalized_step}")
        if self.levels < 2:
            raise ConfigError(f"quantizer needs at least 2 levels, got {self.levels}")

    def resolve(self, mean_theta: float) -> float:
        """Step size for a given mean NPSDS."""
        return self.step if self.step is not None else self.normalized_step * mean_theta

    @property
    def bits_per_symbol(self) -> int:
        return math.ceil(math.log2(self.levels))


ROUTE_SPEED = 6700.0  # m/s, Alice and Bob
EVE_SPEED = 2000.0  # m/s
BASELINE = 1.0e6  # m, Alice-Bob separation
HEADING_OFFSET_DEG = 1.0  # Alice's heading tilt toward Bob
EVE_HEADING_DEG = 45.0  # Eve's heading relative to the Alice-Bob baseline


def default_alice() -> SpacecraftState:
    h = math.radians(HEADING_OFFSET_DEG)
    return SpacecraftState("alice", (0.0, 0.0, 0.0), (ROUTE_SPEED * math.sin(h), ROUTE_SPEED * math.cos(h), 0.0))


def default_bob() -> SpacecraftState:
    return SpacecraftState("bob", (BASELINE, 0.0, 0.0), (0.0, ROUTE_SPEED, 0.0))


def default_eve() -> SpacecraftState:
    h = math.radians(EVE_HEADING_DEG)
    return SpacecraftState(
        "eve", (0.5 * BASELINE, 0.5 * BASELINE, 0.0), (EVE_SPEED * math.cos(h), EVE_SPEED * math.sin(h), 0.0)
    )


@dataclass(frozen=True)
class ScenarioConfig:
    f_c: float = 1.0e9
    symbol_period: float = 1.0e-6
    n_pilots: int = 20
    n_durations: int = 100_000
    power: float = field(default_factory=lambda: db_to_linear(10.0))
    noise_var: float = field(default_factory=lambda: db_to_linear(1.0))
    quantizer: QuantizerConfig = field(default_factory=QuantizerConfig)
    alice: SpacecraftState = field(default_factory=default_alice)
    bob: SpacecraftState = field(default_factory=default_bob)
    eve: SpacecraftState = field(default_factory=default_eve)
    kappa_a: float | None = 0.1
    kappa_b: float | None = 0.1
    master_seed: int = 20211112
    trials: int = 100_000

    def __post_init__(self) -> None:
        for name in ("f_c", "symbol_period", "power", "noise_var"):
            value = getattr(self, name)
            if not (value > 0 and math.isfinite(value)):
                raise ConfigError(f"{name} must be positive and finite, got {value}")
        for name in ("n_pilots", "n_durations", "trials"):
            if getattr(self, name) < 1:
                raise ConfigError(f"{name} must be >= 1, got {getattr(self, name)}")
        if not 0 <= self.master_seed < 2**64:
            raise ConfigError(f"master_seed must fit in 64 bits, got {self.master_seed}")
        for name, state in (("kappa_a", self.alice), ("kappa_b", self.bob)):
            kappa = getattr(self, name)
            if kappa is not None and kappa < 0:
                raise ConfigError(f"{name} must be >= 0, got {kappa}")
            if kappa is not None and state.speed == 0:
                raise ConfigError(f"{name} needs a nonzero deterministic speed")
        ids = {self.alice.id, self.bob.id, self.eve.id}
        if len(ids) != 3:
            raise ConfigError("alice, bob and eve need distinct ids")
        pos = [tuple(s.position) for s in (self.alice, self.bob, self.eve)]
        if len(set(pos)) != 3:
            raise ConfigError("alice, bob and eve must be at distinct positions")

    # -- derived quantities -------------------------------------------------

    @property
    def alice_state(self) -> SpacecraftState:
        """Alice with ``sigma_v`` resolved from ``kappa_a`` when given."""
        if self.kappa_a is None:
            return self.alice
        return self.alice.replace(sigma_v=sigma_v_for_kappa(self.kappa_a, self.alice.speed))

    @property
    def bob_state(self) -> SpacecraftState:
        if self.kappa_b is None:
            return self.bob
        return self.bob.replace(sigma_v=sigma_v_for_kappa(self.kappa_b, self.bob.speed))

    @property
    def doppler_scale(self) -> float:
        """Hz per m/s of radial velocity."""
        return self.f_c / SPEED_OF_LIGHT

    def nominal_dopplers(self) -> dict[str, float]:
        """Deterministic nominal Doppler (m/s) of the ab, ae and be links."""
        a, b, e = self.alice, self.bob, self.eve
        return {
            "ab": float(nominal_doppler(a.position, a.v_det, b.position, b.v_det)),
            "ae": float(nominal_doppler(a.position, a.v_det, e.position, e.v_det)),
            "be": float(nominal_doppler(b.position, b.v_det, e.position, e.v_det)),
        }

    def doppler_variance(self) -> float:
        """Variance (Hz^2) of the stochastic cyclic Doppler of the ab link."""
        return sigma_d_squared(self.alice_state, self.bob_state) * self.doppler_scale**2

    def npsds_law(self) -> NpsdsLaw:
        var = self.doppler_variance()
        if not var > 0:
            raise ConfigError("NPSDS law needs a nonzero stochastic Doppler (kappa or sigma_v)")
        mean = self.nominal_dopplers()["ab"] * self.doppler_scale
        return NpsdsLaw.from_doppler(mean, var, self.power, self.symbol_period)

    def with_kappa(self, kappa_a: float, kappa_b: float | None = None) -> "ScenarioConfig":
        return replace(self, kappa_a=kappa_a, kappa_b=kappa_a if kappa_b is None else kappa_b)

    # -- serialisation -------------------------------------------------------

    def to_dict(self) -> dict:
        out = {}
        for f in fields(self):
            value = getattr(self, f.name)
            if isinstance(value, SpacecraftState):
                value = {
                    "id": value.id,
                    "position": [float(x) for x in value.position],
                    "v_det": [float(x) for x in value.v_det],
                    "sigma_v": value.sigma_v,
                    "a_max": value.a_max,
                }
            elif isinstance(value, QuantizerConfig):
                value = {"step": value.step, "normalized_step": value.normalized_step, "levels": value.levels}
            out[f.name] = value
        return out

    def config_hash(self) -> str:
        blob = json.dumps(self.to_dict(), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(blob.encode()).hexdigest()[:16]

    @classmethod
    def from_dict(cls, data: dict) -> "ScenarioConfig":
        data = dict(data)
        kwargs = {}
        if "power_db" in data:
            kwargs["power"] = db_to_linear(float(data.pop("power_db")))
        if "noise_var_db" in data:
            kwargs["noise_var"] = db_to_linear(float(data.pop("noise_var_db")))
        defaults = cls()
        known = {f.name for f in fields(cls)}
        for key, value in data.items():
            if key not in known:
                raise ConfigError(f"unknown config field {key!r}")
            if key in ("alice", "bob", "eve"):
                if not isinstance(value, dict):
                    raise ConfigError(f"[{key}] must be a table")
                base = getattr(defaults, key)
                try:
                    value = base.replace(**value)
                except (TypeError, ValueError) as exc:
                    raise ConfigError(f"[{key}]: {exc}") from exc
            elif key == "quantizer":
                if not isinstance(value, dict):
                    raise ConfigError("[quantizer] must be a table")
                q = dict(value)
                if "step" in q and "normalized_step" not in q:
                    q["normalized_step"] = None
                value = QuantizerConfig(**q)
            kwargs[key] = value
        try:
            return cls(**kwargs)
        except TypeError as exc:
            raise ConfigError(str(exc)) from exc


def load_config(path: str | Path | None) -> ScenarioConfig:
    """Read a TOML scenario file; ``None`` gives the reference defaults.

    Missing fields fall back to defaults. Raises :class:`ConfigError` on bad
    content and ``OSError`` when the file cannot be read.
    """
    if path is None:
        return ScenarioConfig()
    with open(path, "rb") as fh:
        try:
            data = tomllib.load(fh)
        except tomllib.TOMLDecodeError as exc:
            raise ConfigError(f"{path}: {exc}") from exc
    scenario = data.pop("scenario", {})
    if not isinstance(scenario, dict):
        raise ConfigError("[scenario] must be a table")
    merged = {**scenario, **data}
    return ScenarioConfig.from_dict(merged)
