"""Seed-reproducible Monte Carlo experiments.

Every experiment returns an :class:`ExperimentResult` (a flat table plus
metadata) that can be written as CSV with a JSON sidecar.

Random streams are derived from ``(master_seed, experiment, sub-key, chunk)``
with :class:`numpy.random.SeedSequence`, and trials are simulated in fixed
size chunks, so results are bit-identical for any number of workers.
"""
from __future__ import annotations

import csv
import io
import json
import math
import subprocess
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Sequence

import numpy as np
from scipy import stats

from . import analytic
from .analytic import QuadratureSpec, max_key_rate
from .config import ScenarioConfig
from .geometry import SPEED_OF_LIGHT, SpacecraftState, sigma_d_squared, timing_feasibility
from .keygen import DurationBatch, batch_mse, compare_keys, sample_npsds, simulate_durations

CHUNK_SIZE = 8192

# stable integer ids for stream derivation
EXPERIMENT_IDS = {
    "key-rate": 1,
    "npsds-pdf": 2,
    "estimator": 3,
    "mse": 4,
    "kdr": 5,
    "timing": 6,
}

# values printed in the source campaign, kept for side-by-side reporting
PRINTED_ACCELERATION_BOUND = 5000.0  # m/s^2
PRINTED_DOPPLER_HZ = 6000.0  # Hz, 1000 m/s at 2 GHz


@dataclass
class ExperimentResult:
    name: str
    columns: list[str]
    rows: list[tuple]
    metadata: dict = field(default_factory=dict)
    summary: dict = field(default_factory=dict)

    def column(self, name: str) -> np.ndarray:
        i = self.columns.index(name)
        return np.array([row[i] for row in self.rows])

    def where(self, **conditions) -> list[dict]:
        out = []
        for row in self.rows:
            rec = dict(zip(self.columns, row))
            if all(rec[k] == v for k, v in conditions.items()):
                out.append(rec)
        return out

    def to_csv(self) -> str:
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(self.columns + ["config_hash"])
        tag = self.metadata.get("config_hash", "")
        for row in self.rows:
            writer.writerow([_fmt(v) for v in row] + [tag])
        return buf.getvalue()

    def write(self, outdir: str | Path) -> tuple[Path, Path]:
        """Write ``<name>.csv`` and ``<name>.json``; creates ``outdir``."""
        outdir = Path(outdir)
        outdir.mkdir(parents=True, exist_ok=True)
        csv_path = outdir / f"{self.name}.csv"
        json_path = outdir / f"{self.name}.json"
        csv_path.write_text(self.to_csv(), encoding="utf-8")
        sidecar = {**self.metadata, "columns": self.columns, "summary": self.summary}
        json_path.write_text(json.dumps(_jsonable(sidecar), indent=2, sort_keys=True) + "\n", encoding="utf-8")
        return csv_path, json_path


def _fmt(value) -> str:
    if isinstance(value, (bool, np.bool_)):
        return str(bool(value)).lower()
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if isinstance(value, (float, np.floating)):
        return repr(float(value))
    return str(value)


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, (np.bool_,)):
        return bool(obj)
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        value = float(obj)
        return value if math.isfinite(value) else repr(value)
    if isinstance(obj, np.ndarray):
        return _jsonable(obj.tolist())
    return obj


def git_describe() -> str:
    try:
        out = subprocess.run(
            ["git", "describe", "--always", "--dirty", "--tags"],
            capture_output=True,
            text=True,
            timeout=5,
            cwd=Path(__file__).resolve().parent,
        )
    except (OSError, subprocess.SubprocessError):
        return "unknown"
    return out.stdout.strip() or "unknown"


def _metadata(cfg: ScenarioConfig, name: str, started: float, **params) -> dict:
    return {
        "experiment": name,
        "seed": cfg.master_seed,
        "config": cfg.to_dict(),
        "config_hash": cfg.config_hash(),
        "git_describe": git_describe(),
        "runtime_s": time.perf_counter() - started,
        "parameters": params,
    }


# ---------------------------------------------------------------------------
# chunked trial runner

def stream(master_seed: int, *key: int) -> np.random.Generator:
    """Independent generator for a ``(master_seed, key...)`` counter tuple."""
    return np.random.default_rng(np.random.SeedSequence(master_seed, spawn_key=tuple(int(k) for k in key)))


def chunk_sizes(total: int, chunk: int = CHUNK_SIZE) -> list[int]:
    full, rest = divmod(total, chunk)
    return [chunk] * full + ([rest] if rest else [])


def run_chunked(task: Callable, args: Sequence[tuple], workers: int = 1) -> list:
    """Map ``task`` over ``args`` preserving order; parallel when workers > 1."""
    if workers <= 1 or len(args) <= 1:
        return [task(*a) for a in args]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(task, *zip(*args)))


def _duration_chunk(cfg, key, index, size, n_pilots, stochastic, theta_t) -> DurationBatch:
    rng = stream(cfg.master_seed, *key, index)
    return simulate_durations(cfg, size, rng, n_pilots=n_pilots, stochastic=stochastic, theta_t=theta_t)


def _npsds_chunk(cfg, key, index, size) -> np.ndarray:
    return sample_npsds(cfg, size, stream(cfg.master_seed, *key, index))


def simulate(
    cfg: ScenarioConfig,
    key: tuple[int, ...],
    total: int,
    n_pilots: int | None = None,
    stochastic: bool = True,
    theta_t: float | None = None,
    workers: int = 1,
) -> DurationBatch:
    sizes = chunk_sizes(total)
    args = [(cfg, key, i, s, n_pilots, stochastic, theta_t) for i, s in enumerate(sizes)]
    return DurationBatch.concat(run_chunked(_duration_chunk, args, workers))


def simulate_npsds(cfg: ScenarioConfig, key: tuple[int, ...], total: int, workers: int = 1) -> np.ndarray:
    sizes = chunk_sizes(total)
    args = [(cfg, key, i, s) for i, s in enumerate(sizes)]
    return np.concatenate(run_chunked(_npsds_chunk, args, workers))


# ---------------------------------------------------------------------------
# experiments

DEFAULT_KAPPA_GRID = tuple(float(k) for k in np.round(np.linspace(0.02, 1.0, 50), 6))
DEFAULT_KAPPA_SET = (0.1, 0.25, 0.5, 0.8)
DEFAULT_N_SET = (10, 20, 50)
DEFAULT_GAMMA_GRID = (0.2, 0.25, 0.5, 0.75, 1.0, 1.5, 2.0, 2.5, 3.0)
DEFAULT_DISTANCES = (0.0, 1.0e6, 1.0e7, 3.8e7, 1.0e8, 3.8e8)


def exp_key_rate_surface(
    cfg: ScenarioConfig,
    kappa_grid_a: Sequence[float] = DEFAULT_KAPPA_GRID,
    kappa_grid_b: Sequence[float] = DEFAULT_KAPPA_GRID,
) -> ExperimentResult:
    """Maximum key rate over a grid of mobility constants."""
    started = time.perf_counter()
    for k in list(kappa_grid_a) + list(kappa_grid_b):
        if not 0 < k <= 1:
            raise ValueError(f"mobility constants must lie in (0, 1], got {k}")
    rows = []
    for ka in kappa_grid_a:
        for kb in kappa_grid_b:
            c = cfg.with_kappa(ka, kb)
            sd2 = sigma_d_squared(c.alice_state, c.bob_state)
            rows.append((float(ka), float(kb), sd2, max_key_rate(sd2, cfg.f_c)))
    result = ExperimentResult(
        "key_rate_surface",
        ["kappa_a", "kappa_b", "sigma_d_sq", "max_key_rate_nats"],
        rows,
    )
    rates = result.column("max_key_rate_nats")
    result.summary = {"min_rate_nats": float(rates.min()), "max_rate_nats": float(rates.max())}
    result.metadata = _metadata(cfg, "key-rate", started, kappa_grid_a=list(kappa_grid_a), kappa_grid_b=list(kappa_grid_b))
    return result


def histogram_mode(samples: np.ndarray, edges: np.ndarray) -> float:
    counts, _ = np.histogram(samples, bins=edges)
    i = int(np.argmax(counts))
    return 0.5 * (edges[i] + edges[i + 1])


def exp_npsds_pdf(
    cfg: ScenarioConfig,
    kappa_set: Sequence[float] = DEFAULT_KAPPA_SET,
    trials: int | None = None,
    bins: int = 400,
    workers: int = 1,
) -> ExperimentResult:
    """Simulated NPSDS histograms against the analytic density, per kappa."""
    started = time.perf_counter()
    trials = cfg.trials if trials is None else trials
    if trials < 10_000:
        raise ValueError(f"need at least 1e4 trials, got {trials}")
    laws = {k: cfg.with_kappa(k).npsds_law() for k in kappa_set}
    upper = max(law.upper(1e-4) for law in laws.values())
    edges = np.linspace(0.0, upper, bins + 1)
    centers = 0.5 * (edges[:-1] + edges[1:])
    rows, summary = [], {}
    for j, kappa in enumerate(kappa_set):
        c = cfg.with_kappa(kappa)
        theta = simulate_npsds(c, (EXPERIMENT_IDS["npsds-pdf"], j), trials, workers)
        counts, _ = np.histogram(theta, bins=edges)
        density = counts / (trials * np.diff(edges))
        law = laws[kappa]
        pdf = analytic.npsds_pdf(centers, law)
        ks = stats.kstest(theta, lambda x, law=law: analytic.npsds_cdf(x, law)).statistic
        summary[str(kappa)] = {
            "lambda": law.lam,
            "sigma_theta_sq": law.sigma_theta_sq,
            "ks": float(ks),
            "mode": histogram_mode(theta, edges),
            "min_sample": float(theta.min()),
        }
        rows.extend((float(kappa), float(x), float(d), float(p)) for x, d, p in zip(centers, density, pdf))
    result = ExperimentResult("npsds_pdf", ["kappa", "theta", "empirical_density", "analytic_pdf"], rows, summary=summary)
    result.metadata = _metadata(cfg, "npsds-pdf", started, kappa_set=list(kappa_set), trials=trials, bins=bins)
    return result


def exp_estimator_hist(
    cfg: ScenarioConfig,
    theta_t: float = 5.0,
    n_set: Sequence[int] = DEFAULT_N_SET,
    trials: int | None = None,
    bins: int = 100,
    workers: int = 1,
) -> ExperimentResult:
    """Histograms of the four links' NPSDS estimates at a fixed NPSDS.

    The Doppler is held at its deterministic value and every NPSDS is scaled
    so the Alice-Bob value equals ``theta_t``; Eve's links keep their own
    Doppler ratio to it.
    """
    started = time.perf_counter()
    trials = cfg.trials if trials is None else trials
    if trials < 10_000:
        raise ValueError(f"need at least 1e4 trials, got {trials}")
    rows, summary = [], {}
    for n in n_set:
        batch = simulate(cfg, (EXPERIMENT_IDS["estimator"], n), trials, n_pilots=n, stochastic=False, theta_t=theta_t, workers=workers)
        stats_n = {}
        for link, est in batch.theta_hat.items():
            center = float(batch.theta_link[link][0])
            half = 6.0 * center / math.sqrt(n)
            edges = np.linspace(max(0.0, center - half), center + half, bins + 1)
            counts, _ = np.histogram(est, bins=edges)
            density = counts / (trials * np.diff(edges))
            rows.extend(
                (int(n), link, float(0.5 * (lo + hi)), float(d))
                for lo, hi, d in zip(edges[:-1], edges[1:], density)
            )
            stats_n[link] = {
                "theta": center,
                "mean": float(est.mean()),
                "var": float(est.var(ddof=1)),
                "std": float(est.std(ddof=1)),
            }
        ab = batch.theta_hat["ab"]
        stats_n["ks_truncated_normal_ab"] = float(
            stats.kstest(ab, lambda x: analytic.estimator_cdf(x, theta_t, n)).statistic
        )
        summary[str(n)] = stats_n
    result = ExperimentResult("estimator_hist", ["n", "link", "theta_hat", "density"], rows, summary=summary)
    result.metadata = _metadata(cfg, "estimator", started, theta_t=theta_t, n_set=list(n_set), trials=trials)
    return result


def exp_mse(
    cfg: ScenarioConfig,
    n_range: Sequence[int] = tuple(range(1, 51)),
    trials: int | None = None,
    theta_t: float = 5.0,
    workers: int = 1,
) -> ExperimentResult:
    """MSE of every link's estimate against the shared NPSDS, versus N."""
    started = time.perf_counter()
    trials = cfg.trials if trials is None else trials
    if trials < 10_000:
        raise ValueError(f"need at least 1e4 trials, got {trials}")
    rows = []
    for n in n_range:
        batch = simulate(cfg, (EXPERIMENT_IDS["mse"], n), trials, n_pilots=n, stochastic=False, theta_t=theta_t, workers=workers)
        rows.append(
            (int(n), *(batch_mse(batch, link) for link in ("ab", "ba", "ae", "be")), theta_t**2 / n)
        )
    result = ExperimentResult("mse", ["n", "mse_ab", "mse_ba", "mse_ae", "mse_be", "theory_ab"], rows)
    result.summary = {"theta_t": theta_t}
    result.metadata = _metadata(cfg, "mse", started, n_range=list(n_range), trials=trials, theta_t=theta_t)
    return result


def exp_kdr(
    cfg: ScenarioConfig,
    gamma_grid: Sequence[float] = DEFAULT_GAMMA_GRID,
    n_set: Sequence[int] = DEFAULT_N_SET,
    durations: int | None = None,
    quad: QuadratureSpec = QuadratureSpec(),
    conditional_overlay: bool = True,
    workers: int = 1,
) -> ExperimentResult:
    """Simulated KDR against the quadrature prediction over (Gamma, N).

    Theory columns: ``theory_kdr`` (same symbol) and ``theory_index_kdr``
    (same index) with both estimates independent given the NPSDS, and
    ``theory_kdr_conditional`` with the conditioning on Alice-to-Bob's estimate.
    """
    started = time.perf_counter()
    durations = cfg.n_durations if durations is None else durations
    if durations < 10_000:
        raise ValueError(f"need at least 1e4 durations, got {durations}")
    law = cfg.npsds_law()
    q = cfg.quantizer
    rows = []
    for n in n_set:
        batch = simulate(cfg, (EXPERIMENT_IDS["kdr"], n), durations, n_pilots=n, workers=workers)
        for gamma in gamma_grid:
            delta = gamma * law.mean
            cmp = compare_keys(batch, q, delta)
            sym = 1.0 - analytic.key_match_probability(delta, law, n, quad, levels=q.levels)
            idx = 1.0 - analytic.key_match_probability(delta, law, n, quad, levels=None)
            cond = (
                1.0 - analytic.key_match_probability(delta, law, n, quad, levels=q.levels, conditioning="conditional")
                if conditional_overlay
                else float("nan")
            )
            rows.append(
                (
                    float(gamma), int(n), delta,
                    cmp.kdr_ab, cmp.kdr_ae, cmp.kdr_be,
                    cmp.index_kdr_ab, cmp.index_kdr_ae, cmp.index_kdr_be,
                    cmp.bit_kdr_ab,
                    sym, idx, cond,
                )
            )
    columns = [
        "gamma", "n", "delta",
        "kdr_ab", "kdr_ae", "kdr_be",
        "index_kdr_ab", "index_kdr_ae", "index_kdr_be",
        "bit_kdr_ab",
        "theory_kdr", "theory_index_kdr", "theory_kdr_conditional",
    ]
    result = ExperimentResult("kdr", columns, rows)
    gap = np.abs(result.column("kdr_ab") - result.column("theory_kdr"))
    igap = np.abs(result.column("index_kdr_ab") - result.column("theory_index_kdr"))
    result.summary = {
        "lambda": law.lam,
        "mean_theta": law.mean,
        "max_abs_gap_symbol": float(gap.max()),
        "max_abs_gap_index": float(igap.max()),
    }
    if conditional_overlay:
        pgap = np.abs(result.column("kdr_ab") - result.column("theory_kdr_conditional"))
        result.summary["max_abs_gap_conditional"] = float(pgap.max())
    result.metadata = _metadata(
        cfg, "kdr", started, gamma_grid=list(gamma_grid), n_set=list(n_set), durations=durations, levels=q.levels
    )
    return result


def doppler_check(f_c: float = 2.0e9, radial_speed: float = 1000.0) -> dict:
    """Cyclic Doppler of a radial speed, next to the printed rough value."""
    hz = f_c * radial_speed / SPEED_OF_LIGHT
    rel = abs(hz - PRINTED_DOPPLER_HZ) / PRINTED_DOPPLER_HZ
    return {"f_c": f_c, "radial_speed": radial_speed, "doppler_hz": hz, "printed_hz": PRINTED_DOPPLER_HZ, "relative_gap": rel}


def exp_appendix_timing(
    cfg: ScenarioConfig,
    alpha: float = 1.0,
    v_max: float = 1000.0,
    distance_grid: Sequence[float] = DEFAULT_DISTANCES,
) -> ExperimentResult:
    """Two-way timing budget and acceleration bound versus separation."""
    started = time.perf_counter()
    rows = []
    a_sum = cfg.alice.a_max + cfg.bob.a_max
    for d in distance_grid:
        if d < 0:
            raise ValueError(f"distances must be >= 0, got {d}")
        a = SpacecraftState("alice", (0.0, 0.0, 0.0), (0.0, 0.0, 0.0), a_max=cfg.alice.a_max)
        b = SpacecraftState("bob", (float(d), 0.0, 0.0), (0.0, 0.0, 0.0), a_max=cfg.bob.a_max)
        chk = timing_feasibility(a, b, alpha, v_max)
        rows.append((float(d), chk.delta_t, chk.bound, a_sum, chk.feasible))
    result = ExperimentResult("appendix_timing", ["distance_m", "delta_t_s", "accel_bound", "accel_sum", "feasible"], rows)
    ref_d = 3.8e7
    ref = timing_feasibility(
        SpacecraftState("alice", (0.0, 0.0, 0.0), (0.0, 0.0, 0.0)),
        SpacecraftState("bob", (ref_d, 0.0, 0.0), (0.0, 0.0, 0.0)),
        alpha,
        v_max,
    )
    rel = abs(ref.bound - PRINTED_ACCELERATION_BOUND) / PRINTED_ACCELERATION_BOUND
    result.summary = {
        "reference_distance_m": ref_d,
        "reference_bound": ref.bound,
        "printed_bound": PRINTED_ACCELERATION_BOUND,
        "printed_bound_relative_gap": rel,
        "printed_bound_inconsistent": bool(rel > 0.01),
        "doppler_check": doppler_check(),
    }
    result.metadata = _metadata(cfg, "timing", started, alpha=alpha, v_max=v_max, distance_grid=list(distance_grid))
    return result
