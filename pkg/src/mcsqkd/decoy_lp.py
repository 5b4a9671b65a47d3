"""Decoy-state bounds on single-photon-pair statistics by linear programming.

Every intensity pair (mu_a, nu_b) gives one linear relation between the
observed gain and the unknown photon-number yields ``Y[n, m]``, and another
between the observed error gain and the unknown error yields ``X[n, m]``.
Yields with n or m above ``n_cut`` are eliminated by bounding their total
contribution with the exact tail mass of the source distributions.
"""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from enum import Enum
from os import PathLike
from typing import Iterable, Mapping

import numpy as np
from scipy.optimize import linprog

from .bsm import PHOTON_CUTOFF, Basis, ChannelDetector, gain_and_qber
from .sources import (
    PhotonDistribution,
    SourceKind,
    SourceSpec,
    source_distribution,
)

__all__ = [
    "DecoyConfig",
    "GainObservation",
    "ObservedGains",
    "ConstraintSystem",
    "LpStatus",
    "LpBounds",
    "CoverageError",
    "simulate_gains",
    "build_constraints",
    "solve_bounds",
    "decoy_bounds",
    "pair_pulses",
    "apply_fluctuation",
    "read_observed_gains",
    "write_observed_gains",
]

FEASIBILITY_TOL = 1e-10
_KEY_DIGITS = 12


class CoverageError(KeyError):
    """An intensity pair required by the configuration has no observation."""


def _key(mu_a: float, nu_b: float, basis) -> tuple[float, float, Basis]:
    return (round(float(mu_a), _KEY_DIGITS), round(float(nu_b), _KEY_DIGITS), Basis(basis))


@dataclass(frozen=True)
class DecoyConfig:
    """Intensity settings shared by both parties and the LP truncation."""

    intensities: tuple[float, ...] = (0.0, 0.1, 0.5)
    source_kind: SourceKind = SourceKind.WEAK_COHERENT
    elimination_c: float | None = None
    n_cut: int = 10

    def __post_init__(self):
        object.__setattr__(self, "intensities", tuple(float(x) for x in self.intensities))
        object.__setattr__(self, "source_kind", SourceKind(self.source_kind))
        mus = self.intensities
        if not mus or mus[0] != 0.0:
            raise ValueError("the first intensity must be the vacuum (0)")
        if any(b <= a for a, b in zip(mus, mus[1:])):
            raise ValueError("intensities must be strictly increasing")
        if self.n_cut < 2:
            raise ValueError("n_cut must be >= 2")
        if self.source_kind is SourceKind.VACUUM:
            raise ValueError("source_kind names the family used for non-zero intensities")

    def source(self, mu: float) -> SourceSpec:
        if mu == 0.0:
            return SourceSpec(SourceKind.VACUUM)
        return SourceSpec(self.source_kind, mu, self.elimination_c)

    def distributions(self) -> list[PhotonDistribution]:
        return [source_distribution(self.source(mu)) for mu in self.intensities]

    def pairs(self) -> list[tuple[float, float]]:
        return [(a, b) for a in self.intensities for b in self.intensities]


@dataclass(frozen=True)
class GainObservation:
    """Gain and error gain, each as an interval (equal ends for point data)."""

    q_low: float
    q_high: float
    eq_low: float
    eq_high: float

    def __post_init__(self):
        if not (0.0 <= self.q_low <= self.q_high and 0.0 <= self.eq_low <= self.eq_high):
            raise ValueError(f"malformed observation {self}")

    @classmethod
    def point(cls, q: float, eq: float) -> "GainObservation":
        return cls(q, q, eq, eq)

    @property
    def is_point(self) -> bool:
        return self.q_low == self.q_high and self.eq_low == self.eq_high


@dataclass(frozen=True)
class ObservedGains:
    entries: Mapping[tuple[float, float, Basis], GainObservation] = field(default_factory=dict)

    def __post_init__(self):
        object.__setattr__(
            self, "entries", {_key(*k): v for k, v in dict(self.entries).items()}
        )

    def get(self, mu_a: float, nu_b: float, basis) -> GainObservation:
        try:
            return self.entries[_key(mu_a, nu_b, basis)]
        except KeyError:
            raise CoverageError(f"no observation for ({mu_a}, {nu_b}, {Basis(basis).value})") from None

    def __contains__(self, key) -> bool:
        return _key(*key) in self.entries

    def __len__(self) -> int:
        return len(self.entries)

    def intensities(self) -> list[float]:
        return sorted({k[0] for k in self.entries} | {k[1] for k in self.entries})

    @property
    def is_point(self) -> bool:
        return all(v.is_point for v in self.entries.values())


def simulate_gains(
    config: DecoyConfig, cd: ChannelDetector, cutoff: int = PHOTON_CUTOFF
) -> ObservedGains:
    """Point-valued gains of every intensity pair in both bases from the relay model."""
    dists = dict(zip(config.intensities, config.distributions()))
    entries = {}
    for basis in Basis:
        for a, b in config.pairs():
            g = gain_and_qber(dists[a], dists[b], basis, cd, cutoff)
            entries[(a, b, basis)] = GainObservation.point(g.gain, g.error_gain)
    return ObservedGains(entries)


@dataclass(frozen=True)
class ConstraintSystem:
    """Rows ``low <= coefficients @ vec(Y) <= high`` for one basis.

    ``error_low``/``error_high`` bound the same combinations of the error
    yields ``X`` (with ``0 <= X <= Y``).
    """

    basis: Basis
    n_cut: int
    pairs: tuple[tuple[float, float], ...]
    coefficients: np.ndarray
    tail: np.ndarray
    gain_low: np.ndarray
    gain_high: np.ndarray
    error_low: np.ndarray
    error_high: np.ndarray

    @property
    def n_vars(self) -> int:
        return (self.n_cut + 1) ** 2

    def index(self, n: int, m: int) -> int:
        return n * (self.n_cut + 1) + m

    def subset(self, pairs: Iterable[tuple[float, float]]) -> "ConstraintSystem":
        wanted = {(round(a, _KEY_DIGITS), round(b, _KEY_DIGITS)) for a, b in pairs}
        rows = [i for i, (a, b) in enumerate(self.pairs) if (round(a, _KEY_DIGITS), round(b, _KEY_DIGITS)) in wanted]
        return ConstraintSystem(
            self.basis,
            self.n_cut,
            tuple(self.pairs[i] for i in rows),
            self.coefficients[rows],
            self.tail[rows],
            self.gain_low[rows],
            self.gain_high[rows],
            self.error_low[rows],
            self.error_high[rows],
        )


def build_constraints(
    config: DecoyConfig, obs: ObservedGains, basis, pairs=None
) -> ConstraintSystem:
    basis = Basis(basis)
    dists = dict(zip(config.intensities, config.distributions()))
    pairs = tuple(config.pairs() if pairs is None else pairs)
    k = config.n_cut + 1
    coef, tail, ql, qh, el, eh = [], [], [], [], [], []
    for a, b in pairs:
        ob = obs.get(a, b, basis)
        row = np.outer(dists[a].truncated(config.n_cut), dists[b].truncated(config.n_cut))
        # exact mass of all (n, m) pairs outside the LP variables; every yield is <= 1
        t = max(0.0, 1.0 - math.fsum(row.ravel()))
        coef.append(row.reshape(k * k))
        tail.append(t)
        ql.append(ob.q_low - t)
        qh.append(ob.q_high)
        el.append(ob.eq_low - t)
        eh.append(ob.eq_high)
    return ConstraintSystem(
        basis,
        config.n_cut,
        pairs,
        np.array(coef).reshape(len(pairs), k * k),
        np.array(tail),
        np.array(ql),
        np.array(qh),
        np.array(el),
        np.array(eh),
    )


class LpStatus(str, Enum):
    OPTIMAL = "optimal"
    INFEASIBLE = "infeasible"
    UNBOUNDED = "unbounded"


@dataclass(frozen=True)
class LpBounds:
    y11_lower: float
    e11_upper: float
    status: LpStatus
    y11_lower_x: float = math.nan
    x11_upper: float = math.nan


_STATUS = {0: LpStatus.OPTIMAL, 2: LpStatus.INFEASIBLE, 3: LpStatus.UNBOUNDED}


def _solve(c, a_ub, b_ub, n_vars):
    if a_ub.shape[0]:
        # rows are normalized by their right-hand side; gains span ~10 decades
        scale = np.where(np.abs(b_ub) > 0, np.abs(b_ub), 1.0)
        a_ub = a_ub / scale[:, None]
        b_ub = b_ub / scale
    res = linprog(
        c,
        A_ub=a_ub if a_ub.shape[0] else None,
        b_ub=b_ub if a_ub.shape[0] else None,
        bounds=[(0.0, 1.0)] * n_vars,
        method="highs",
        options={
            "primal_feasibility_tolerance": FEASIBILITY_TOL,
            "dual_feasibility_tolerance": FEASIBILITY_TOL,
        },
    )
    if res.status not in _STATUS:
        raise RuntimeError(f"LP solver failed: {res.message}")
    return _STATUS[res.status], res.fun


def _gain_rows(system: ConstraintSystem, low, high):
    # a lower edge at or below zero says nothing about non-negative yields; keeping
    # it would put a near-zero right-hand side into the row scaling
    live = low > 0
    a = np.vstack([system.coefficients, -system.coefficients[live]])
    return a, np.concatenate([high, -low[live]])


def solve_bounds(z_system: ConstraintSystem, x_system: ConstraintSystem) -> LpBounds:
    """Lower bound on the Z-basis Y11 and upper bound on the X-basis e11."""
    nv = z_system.n_vars
    c = np.zeros(nv)
    c[z_system.index(1, 1)] = 1.0
    a, b = _gain_rows(z_system, z_system.gain_low, z_system.gain_high)
    status, fun = _solve(c, a, b, nv)
    if status is not LpStatus.OPTIMAL:
        return LpBounds(math.nan, math.nan, status)
    y11_lower = min(1.0, max(0.0, fun))

    # X system: variables [Y, X] with X <= Y
    nx = x_system.n_vars
    ay, by = _gain_rows(x_system, x_system.gain_low, x_system.gain_high)
    ax, bx = _gain_rows(x_system, x_system.error_low, x_system.error_high)
    a_joint = np.vstack(
        [
            np.hstack([ay, np.zeros_like(ay)]),
            np.hstack([np.zeros_like(ax), ax]),
            np.hstack([-np.eye(nx), np.eye(nx)]),
        ]
    )
    b_joint = np.concatenate([by, bx, np.zeros(nx)])
    i11 = x_system.index(1, 1)
    c = np.zeros(2 * nx)
    c[i11] = 1.0
    status, fun = _solve(c, a_joint, b_joint, 2 * nx)
    if status is not LpStatus.OPTIMAL:
        return LpBounds(y11_lower, math.nan, status)
    y11_x = max(0.0, fun)
    c = np.zeros(2 * nx)
    c[nx + i11] = -1.0
    status, fun = _solve(c, a_joint, b_joint, 2 * nx)
    if status is not LpStatus.OPTIMAL:
        return LpBounds(y11_lower, math.nan, status, y11_x)
    x11 = max(0.0, -fun)
    e11 = min(1.0, x11 / y11_x) if y11_x > 0 else 1.0
    return LpBounds(y11_lower, e11, LpStatus.OPTIMAL, y11_x, x11)


def decoy_bounds(config: DecoyConfig, obs: ObservedGains) -> LpBounds:
    return solve_bounds(
        build_constraints(config, obs, Basis.Z), build_constraints(config, obs, Basis.X)
    )


def pair_pulses(pulses_n: float, n_intensities: int = 3) -> float:
    """Pulses observed by one intensity pair in one basis.

    Each party sends ``pulses_n`` pulses per intensity, so one pair sees
    ``pulses_n / n_intensities`` joint pulses, half of them in each basis.
    """
    return pulses_n / n_intensities / 2.0


def _interval(value: float, n_pair: float, k_sigma: float) -> tuple[float, float]:
    half = k_sigma * math.sqrt(value / n_pair)
    # zero-count guard: a Gaussian width vanishes at zero, the Poisson edge does not
    guard = k_sigma**2 / n_pair
    return max(0.0, value - half), min(1.0, value + half + guard)


def apply_fluctuation(obs: ObservedGains, pulses_n: float, k_sigma: float = 5.0) -> ObservedGains:
    """Widen point observations to ``value +- k_sigma * sqrt(value / N_pair)``."""
    if not pulses_n > 0:
        raise ValueError("pulses_n must be positive")
    if not obs.is_point:
        raise ValueError("fluctuation is applied to point-valued observations only")
    n_pair = pair_pulses(pulses_n, len(obs.intensities()))
    entries = {}
    for key, ob in obs.entries.items():
        ql, qh = _interval(ob.q_low, n_pair, k_sigma)
        el, eh = _interval(ob.eq_low, n_pair, k_sigma)
        entries[key] = GainObservation(ql, qh, el, eh)
    return ObservedGains(entries)


_POINT_COLUMNS = ["mu_a", "nu_b", "basis", "Q", "EQ"]
_INTERVAL_COLUMNS = ["Q_low", "Q_high", "EQ_low", "EQ_high"]


def read_observed_gains(path: str | PathLike) -> ObservedGains:
    """Read a gain table with columns mu_a, nu_b, basis, Q, EQ.

    Optional Q_low, Q_high, EQ_low, EQ_high columns give interval data.
    """
    entries = {}
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        missing = set(_POINT_COLUMNS) - set(reader.fieldnames or ())
        if missing:
            raise ValueError(f"gain table is missing columns {sorted(missing)}")
        for row in reader:
            q, eq = float(row["Q"]), float(row["EQ"])
            if all(row.get(c) not in (None, "") for c in _INTERVAL_COLUMNS):
                ob = GainObservation(*(float(row[c]) for c in _INTERVAL_COLUMNS))
            else:
                ob = GainObservation.point(q, eq)
            entries[(float(row["mu_a"]), float(row["nu_b"]), row["basis"].strip())] = ob
    return ObservedGains(entries)


def write_observed_gains(obs: ObservedGains, path: str | PathLike) -> None:
    interval = not obs.is_point
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(_POINT_COLUMNS + (_INTERVAL_COLUMNS if interval else []))
        for (a, b, basis), ob in sorted(obs.entries.items(), key=lambda kv: (kv[0][2].value, kv[0][0], kv[0][1])):
            q, eq = 0.5 * (ob.q_low + ob.q_high), 0.5 * (ob.eq_low + ob.eq_high)
            row = [repr(a), repr(b), basis.value, f"{q:.17g}", f"{eq:.17g}"]
            if interval:
                row += [f"{x:.17g}" for x in (ob.q_low, ob.q_high, ob.eq_low, ob.eq_high)]
            writer.writerow(row)
