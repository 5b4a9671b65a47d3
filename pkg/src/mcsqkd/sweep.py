"""Experiment orchestration: key rate against distance, decoy intensity,
pulse count and the photon-elimination parameter."""
from __future__ import annotations

import dataclasses
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from enum import Enum
from functools import lru_cache
from typing import Iterable, Sequence

import numpy as np

from .bsm import (
    PHOTON_CUTOFF,
    Basis,
    ChannelDetector,
    ClickModel,
    exact_single_photon_stats,
    gain_and_qber,
)
from .decoy_lp import DecoyConfig, LpStatus, apply_fluctuation, decoy_bounds, simulate_gains
from .keyrate import KeyRateInputs, key_rate
from .sources import CalibrationError, PhotonDistribution, SourceKind, SourceSpec, source_distribution

__all__ = [
    "Mode",
    "Placement",
    "ExperimentConfig",
    "KeyRatePoint",
    "EliminationPoint",
    "LpInfeasibleError",
    "NoPositiveRateError",
    "SOURCE_PRESETS",
    "DECOY_GRID",
    "channel_from_distance",
    "simulate_point",
    "distance_sweep",
    "find_max_distance",
    "optimize_decoy",
    "sweep_elimination",
    "finite_size_sweep",
    "max_distance_from_curve",
    "finite_max_distance",
    "zero_crossings",
]

COARSE_STEP_KM = 5.0
BISECTION_TOL_KM = 0.1
MAX_SEARCH_KM = 500.0
DECOY_GRID = tuple(round(0.005 * k, 3) for k in range(1, 41))

# named source families: (kind, elimination parameter C)
SOURCE_PRESETS = {
    "wcs": ("wcs", None),
    "mcs2": ("mcs", 1.0),
    "mcs3": ("mcs", 3.0),
}


class LpInfeasibleError(RuntimeError):
    pass


class NoPositiveRateError(ValueError):
    pass


class Mode(str, Enum):
    LP_BOUNDED = "lp_bounded"
    INFINITE_DECOY = "infinite_decoy"


class Placement(str, Enum):
    # the distance axis is the Alice-relay (= Bob-relay) fiber length
    PER_ARM = "per_arm"
    # the distance axis is the Alice-Bob length with the relay at the midpoint
    MIDPOINT = "midpoint"


def _default_distances() -> tuple[float, ...]:
    return tuple(float(x) for x in range(0, 201, 5))


@dataclass(frozen=True)
class ExperimentConfig:
    source: str = "wcs"
    elimination_c: float = 3.0
    signal_mu: float = 0.5
    decoy_nu: float = 0.1
    loss_db_per_km: float = 0.2
    dark: float = 6e-6
    det_eff: float = 1.0
    f_ec: float = 1.2
    distances: tuple[float, ...] = field(default_factory=_default_distances)
    pulses_n: float | None = None
    k_sigma: float = 5.0
    mode: Mode = Mode.LP_BOUNDED
    placement: Placement = Placement.PER_ARM
    click_model: ClickModel = ClickModel.LITERAL
    n_cut: int = 10
    photon_cutoff: int = PHOTON_CUTOFF

    def __post_init__(self):
        set_ = lambda k, v: object.__setattr__(self, k, v)  # noqa: E731
        set_("mode", Mode(self.mode))
        set_("placement", Placement(self.placement))
        set_("click_model", ClickModel(self.click_model))
        set_("distances", tuple(float(d) for d in self.distances))
        if self.source not in ("wcs", "mcs"):
            raise ValueError(f"source must be 'wcs' or 'mcs', got {self.source!r}")
        if self.source == "mcs" and not self.elimination_c > 0:
            raise ValueError("elimination_c must be > 0")
        if any(d < 0 for d in self.distances):
            raise ValueError("distances must be >= 0")
        if self.loss_db_per_km < 0:
            raise ValueError("loss must be >= 0")
        if not 0 < self.det_eff <= 1:
            raise ValueError("det_eff must lie in (0, 1]")
        if not 0 < self.decoy_nu < self.signal_mu:
            raise ValueError("need 0 < decoy_nu < signal_mu")
        if self.pulses_n is not None and not self.pulses_n > 0:
            raise ValueError("pulses_n must be positive")
        if self.f_ec < 1:
            raise ValueError("f_ec must be >= 1")

    def replace(self, **changes) -> "ExperimentConfig":
        return dataclasses.replace(self, **changes)

    @classmethod
    def preset(cls, name: str, **changes) -> "ExperimentConfig":
        source, c = SOURCE_PRESETS[name]
        if c is not None:
            changes.setdefault("elimination_c", c)
        return cls(source=source, **changes)

    @property
    def source_kind(self) -> SourceKind:
        return SourceKind.WEAK_COHERENT if self.source == "wcs" else SourceKind.MODIFIED_COHERENT

    @property
    def label(self) -> str:
        return "wcs" if self.source == "wcs" else f"mcs(C={self.elimination_c:g})"

    def decoy_config(self) -> DecoyConfig:
        return DecoyConfig(
            intensities=(0.0, self.decoy_nu, self.signal_mu),
            source_kind=self.source_kind,
            elimination_c=self.elimination_c if self.source == "mcs" else None,
            n_cut=self.n_cut,
        )


@dataclass(frozen=True)
class KeyRatePoint:
    distance_km: float
    rate_lp: float
    rate_infinite: float
    y11_lower: float
    e11_upper: float
    q_z: float
    e_z: float

    COLUMNS = ("distance_km", "rate_lp", "rate_infinite", "y11_lower", "e11_upper", "q_z", "e_z")

    def as_row(self) -> tuple[float, ...]:
        return tuple(getattr(self, c) for c in self.COLUMNS)


@dataclass(frozen=True)
class EliminationPoint:
    c: float
    max_distance_km: float
    increment_km: float
    error: str | None = None


def channel_from_distance(distance_km: float, cfg: ExperimentConfig) -> ChannelDetector:
    if distance_km < 0:
        raise ValueError("distance must be >= 0")
    arm_km = distance_km if cfg.placement is Placement.PER_ARM else distance_km / 2.0
    eta = cfg.det_eff * 10.0 ** (-cfg.loss_db_per_km * arm_km / 10.0)
    return ChannelDetector(eta, cfg.dark, cfg.click_model)


@lru_cache(maxsize=256)
def _distribution(kind: SourceKind, mu: float, c: float | None) -> PhotonDistribution:
    spec = SourceSpec(SourceKind.VACUUM) if mu == 0 else SourceSpec(kind, mu, c)
    return source_distribution(spec)


def simulate_point(cfg: ExperimentConfig, distance_km: float) -> KeyRatePoint:
    cd = channel_from_distance(distance_km, cfg)
    c = cfg.elimination_c if cfg.source == "mcs" else None
    signal = _distribution(cfg.source_kind, cfg.signal_mu, c)
    z = gain_and_qber(signal, signal, Basis.Z, cd, cfg.photon_cutoff)
    p1 = signal[1]
    exact = exact_single_photon_stats(cd)

    def rate(y11: float, e11: float) -> float:
        # an upper bound above 1/2 only says the true error could be 1/2, the worst case
        return key_rate(
            KeyRateInputs(p1, p1, min(1.0, y11), min(0.5, e11), z.gain, z.error_fraction, cfg.f_ec)
        )

    rate_inf = rate(exact.y11_z, exact.e11_x)
    if cfg.mode is Mode.INFINITE_DECOY:
        return KeyRatePoint(
            distance_km, rate_inf, rate_inf, exact.y11_z, exact.e11_x, z.gain, z.error_fraction
        )

    dcfg = cfg.decoy_config()
    obs = simulate_gains(dcfg, cd, cfg.photon_cutoff)
    if cfg.pulses_n is not None:
        obs = apply_fluctuation(obs, cfg.pulses_n, cfg.k_sigma)
    bounds = decoy_bounds(dcfg, obs)
    if bounds.status is not LpStatus.OPTIMAL:
        raise LpInfeasibleError(
            f"decoy LP {bounds.status.value} at {distance_km} km for {cfg.label}"
        )
    return KeyRatePoint(
        distance_km,
        rate(bounds.y11_lower, bounds.e11_upper),
        rate_inf,
        bounds.y11_lower,
        bounds.e11_upper,
        z.gain,
        z.error_fraction,
    )


def distance_sweep(
    cfg: ExperimentConfig, distances: Iterable[float] | None = None, workers: int = 1
) -> list[KeyRatePoint]:
    """Key-rate points over a distance grid, in grid order."""
    grid = list(cfg.distances if distances is None else distances)
    if workers <= 1:
        return [simulate_point(cfg, d) for d in grid]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(simulate_point, [cfg] * len(grid), grid))


def find_max_distance(cfg: ExperimentConfig) -> float:
    """Largest distance with a positive key rate (5 km grid, then bisection to 0.1 km)."""

    def positive(d: float) -> bool:
        return simulate_point(cfg, d).rate_lp > 0

    if not positive(0.0):
        raise NoPositiveRateError(f"no key at 0 km for {cfg.label}")
    lo = 0.0
    hi = None
    d = COARSE_STEP_KM
    while d <= MAX_SEARCH_KM:
        if positive(d):
            lo = d
        else:
            hi = d
            break
        d += COARSE_STEP_KM
    if hi is None:
        raise ValueError(f"key rate still positive at {MAX_SEARCH_KM} km")
    while hi - lo > BISECTION_TOL_KM:
        mid = 0.5 * (lo + hi)
        if positive(mid):
            lo = mid
        else:
            hi = mid
    return lo


def optimize_decoy(
    cfg: ExperimentConfig, distance_km: float, grid: Sequence[float] = DECOY_GRID
) -> float:
    """Decoy intensity from ``grid`` that maximizes the LP-bounded rate (ties go low)."""
    best_nu, best_rate = None, -math.inf
    for nu in sorted(grid):
        r = simulate_point(cfg.replace(decoy_nu=nu, mode=Mode.LP_BOUNDED), distance_km).rate_lp
        if r > best_rate:
            best_nu, best_rate = nu, r
    return best_nu


def sweep_elimination(
    cfg: ExperimentConfig, c_grid: Iterable[float]
) -> list[EliminationPoint]:
    """Max-distance gain of MCS over WCS as a function of C, with exact single-photon statistics."""
    base = cfg.replace(mode=Mode.INFINITE_DECOY)
    wcs_km = find_max_distance(base.replace(source="wcs"))
    out = []
    for c in c_grid:
        c = float(c)
        try:
            km = find_max_distance(base.replace(source="mcs", elimination_c=c))
        except (CalibrationError, NoPositiveRateError, ValueError) as exc:
            out.append(EliminationPoint(c, math.nan, math.nan, str(exc)))
            continue
        out.append(EliminationPoint(c, km, km - wcs_km))
    return out


def finite_size_sweep(
    cfg: ExperimentConfig,
    n_grid: Iterable[float],
    distances: Iterable[float] | None = None,
) -> dict[float, list[KeyRatePoint]]:
    """One LP-bounded distance curve per pulse count; ``math.inf`` gives the
    fluctuation-free curve."""
    grid = list(cfg.distances if distances is None else distances)
    base = cfg.replace(mode=Mode.LP_BOUNDED)
    return {float(n): distance_sweep(base.replace(pulses_n=float(n)), grid) for n in n_grid}


def max_distance_from_curve(points: Sequence[KeyRatePoint]) -> float:
    """Last grid distance with positive LP-bounded rate before the first non-positive one."""
    last = math.nan
    for p in points:
        if p.rate_lp > 0:
            last = p.distance_km
        else:
            break
    return last


def finite_max_distance(cfg: ExperimentConfig, pulses_n: float) -> float:
    return find_max_distance(cfg.replace(pulses_n=float(pulses_n), mode=Mode.LP_BOUNDED))


def zero_crossings(points: Sequence[KeyRatePoint]) -> np.ndarray:
    """Distances where the LP-bounded rate changes sign, by linear interpolation."""
    d = np.array([p.distance_km for p in points])
    r = np.array([p.rate_lp for p in points])
    idx = np.nonzero((r[:-1] > 0) & (r[1:] <= 0))[0]
    return d[idx] - r[idx] * (d[idx + 1] - d[idx]) / (r[idx + 1] - r[idx])
