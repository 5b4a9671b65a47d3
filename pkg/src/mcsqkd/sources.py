"""Photon-number statistics of vacuum, weak-coherent and modified-coherent sources.

A modified coherent state (MCS) is a displaced-then-squeezed state whose
Fock amplitudes are proportional to Hermite polynomials evaluated at a fixed
argument. Choosing ``alpha**2 = C * gamma * xi`` puts that argument at
``sqrt(C / 2)``, which is a root of ``H_2`` for ``C = 1`` and of ``H_3`` for
``C = 3``, so the corresponding Fock component vanishes.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum
from functools import lru_cache

import numpy as np

__all__ = [
    "SourceKind",
    "SourceSpec",
    "McsParams",
    "PhotonDistribution",
    "CalibrationError",
    "DegenerateSqueezingError",
    "TailTooHeavyError",
    "hermite",
    "hermite_log_sequence",
    "poisson_distribution",
    "mcs_distribution",
    "mean_photon_number",
    "calibrate_mcs",
    "source_distribution",
    "PROTOCOL_N_MAX",
    "MOMENT_N_MAX",
]

PROTOCOL_N_MAX = 40
MOMENT_N_MAX = 60

_XI_MAX = 4.0
_XI_TOL = 1e-12
_CALIBRATION_N_MAX = 200


class CalibrationError(ValueError):
    """No squeezing parameter in the search interval reaches the target mean."""


class DegenerateSqueezingError(ValueError):
    """MCS amplitudes are undefined at zero squeezing; use a Poisson source."""


class TailTooHeavyError(ValueError):
    """The truncated distribution misses too much probability for a moment."""


class SourceKind(str, Enum):
    VACUUM = "vacuum"
    WEAK_COHERENT = "weak_coherent"
    MODIFIED_COHERENT = "modified_coherent"


@dataclass(frozen=True)
class SourceSpec:
    """One intensity setting of a source family."""

    kind: SourceKind
    mean_photon: float = 0.0
    elimination_c: float | None = None

    def __post_init__(self):
        object.__setattr__(self, "kind", SourceKind(self.kind))
        if self.mean_photon < 0:
            raise ValueError(f"mean photon number must be >= 0, got {self.mean_photon}")
        if self.kind is SourceKind.VACUUM and self.mean_photon != 0:
            raise ValueError("vacuum source must have mean_photon = 0")
        if self.kind is SourceKind.MODIFIED_COHERENT:
            if self.elimination_c is None or self.elimination_c <= 0:
                raise ValueError("modified coherent source needs elimination_c > 0")

    def distribution(self, n_max: int = PROTOCOL_N_MAX) -> "PhotonDistribution":
        return source_distribution(self, n_max)


@dataclass(frozen=True)
class McsParams:
    """Real, non-negative MCS parameters: amplitude, cosh and sinh of the squeezing."""

    alpha: float
    gamma: float
    xi: float

    def __post_init__(self):
        if self.alpha < 0 or self.xi < 0 or self.gamma < 1:
            raise ValueError(f"invalid MCS parameters {self}")
        if abs(self.gamma**2 - 1.0 - self.xi**2) > 1e-10:
            raise ValueError("gamma**2 must equal 1 + xi**2")

    @classmethod
    def from_xi(cls, xi: float, c: float) -> "McsParams":
        """Parameters on the elimination line ``alpha**2 = c * gamma * xi``."""
        gamma = math.sqrt(1.0 + xi * xi)
        return cls(alpha=math.sqrt(c * gamma * xi), gamma=gamma, xi=xi)

    @property
    def elimination_c(self) -> float:
        return self.alpha**2 / (self.gamma * self.xi)

    def analytic_mean(self) -> float:
        """Closed-form mean photon number of the squeezed displaced state."""
        return self.alpha**2 * (self.gamma - self.xi) ** 2 + self.xi**2


@dataclass(frozen=True)
class PhotonDistribution:
    """Photon-number probabilities for n = 0..n_max plus the mass beyond n_max."""

    probs: np.ndarray
    tail_mass: float = field(init=False)

    def __post_init__(self):
        probs = np.array(self.probs, dtype=float)
        if probs.ndim != 1 or probs.size == 0:
            raise ValueError("probs must be a non-empty 1-d sequence")
        if np.any(probs < 0) or np.any(probs > 1):
            raise ValueError("probabilities must lie in [0, 1]")
        probs.setflags(write=False)
        object.__setattr__(self, "probs", probs)
        object.__setattr__(self, "tail_mass", 1.0 - math.fsum(probs))

    @property
    def n_max(self) -> int:
        return self.probs.size - 1

    def __getitem__(self, n: int) -> float:
        return float(self.probs[n]) if 0 <= n <= self.n_max else 0.0

    def truncated(self, cutoff: int) -> np.ndarray:
        """Probabilities for n = 0..cutoff, zero-padded if the cutoff exceeds n_max."""
        out = np.zeros(cutoff + 1)
        k = min(cutoff, self.n_max) + 1
        out[:k] = self.probs[:k]
        return out

    def multi_photon(self) -> float:
        return math.fsum(self.probs[2:])


def hermite(n: int, x: float) -> float:
    """Physicists' Hermite polynomial ``H_n(x)`` by three-term recurrence."""
    if n < 0:
        raise ValueError("n must be >= 0")
    h_prev, h = 1.0, 2.0 * x
    if n == 0:
        return h_prev
    for k in range(1, n):
        h_prev, h = h, 2.0 * x * h - 2.0 * k * h_prev
    return h


def hermite_log_sequence(n_max: int, x: float) -> tuple[np.ndarray, np.ndarray]:
    """Signs and ``log|H_k(x)|`` for k = 0..n_max.

    The recurrence is run on rescaled values so that ``H_k`` for k in the
    hundreds never overflows; the rescaling is folded into the log.
    """
    sign = np.zeros(n_max + 1)
    logabs = np.full(n_max + 1, -math.inf)
    sign[0], logabs[0] = 1.0, 0.0
    h_prev, h = 1.0, 2.0 * x
    log_scale = 0.0
    for k in range(1, n_max + 1):
        if k > 1:
            h_prev, h = h, 2.0 * x * h - 2.0 * (k - 1) * h_prev
        if h != 0.0:
            sign[k] = math.copysign(1.0, h)
            logabs[k] = math.log(abs(h)) + log_scale
        big = abs(h)
        if big > 1e150:
            h_prev /= big
            h /= big
            log_scale += math.log(big)
    return sign, logabs


def poisson_distribution(mu: float, n_max: int = PROTOCOL_N_MAX) -> PhotonDistribution:
    if mu < 0:
        raise ValueError("mu must be >= 0")
    if n_max < 0:
        raise ValueError("n_max must be >= 0")
    probs = np.zeros(n_max + 1)
    probs[0] = math.exp(-mu)
    for n in range(1, n_max + 1):
        probs[n] = probs[n - 1] * mu / n
    return PhotonDistribution(probs)


def _mcs_probs(params: McsParams, n_max: int) -> np.ndarray:
    if params.xi <= 0:
        raise DegenerateSqueezingError("xi = 0: the state is coherent, use poisson_distribution")
    g, xi, a2 = params.gamma, params.xi, params.alpha**2
    x = params.alpha / math.sqrt(2.0 * g * xi)
    _, log_h = hermite_log_sequence(n_max, x)
    n = np.arange(n_max + 1)
    log_fact = np.array([math.lgamma(k + 1.0) for k in n])
    # log|C_n|^2
    log_p = (
        -log_fact
        - math.log(g)
        + n * math.log(xi / (2.0 * g))
        + (xi * a2 / g - a2)
        + 2.0 * log_h
    )
    with np.errstate(under="ignore"):
        return np.exp(log_p)


def mcs_distribution(params: McsParams, n_max: int = PROTOCOL_N_MAX) -> PhotonDistribution:
    if n_max < 0:
        raise ValueError("n_max must be >= 0")
    return PhotonDistribution(np.clip(_mcs_probs(params, n_max), 0.0, 1.0))


def mean_photon_number(dist: PhotonDistribution) -> float:
    if dist.tail_mass >= 1e-8:
        raise TailTooHeavyError(
            f"tail mass {dist.tail_mass:.3g} beyond n_max={dist.n_max} is too large"
        )
    return math.fsum(np.arange(dist.n_max + 1) * dist.probs)


def _mcs_mean(xi: float, c: float) -> float:
    probs = _mcs_probs(McsParams.from_xi(xi, c), _CALIBRATION_N_MAX)
    return math.fsum(np.arange(probs.size) * probs)


@lru_cache(maxsize=256)
def calibrate_mcs(target_mu: float, c: float) -> McsParams:
    """Find the MCS on the line ``alpha**2 = c*gamma*xi`` with mean ``target_mu``.

    Bisection on xi in (0, 4]; the mean is increasing in xi along the line.
    """
    if target_mu <= 0 or c <= 0:
        raise CalibrationError("target_mu and c must be positive")
    lo, hi = 0.0, _XI_MAX
    if _mcs_mean(hi, c) < target_mu:
        raise CalibrationError(
            f"mean photon {target_mu} not reachable with xi <= {_XI_MAX} at C={c}"
        )
    while hi - lo > _XI_TOL:
        mid = 0.5 * (lo + hi)
        if _mcs_mean(mid, c) < target_mu:
            lo = mid
        else:
            hi = mid
    return McsParams.from_xi(0.5 * (lo + hi), c)


def source_distribution(spec: SourceSpec, n_max: int = PROTOCOL_N_MAX) -> PhotonDistribution:
    if spec.kind is SourceKind.VACUUM or spec.mean_photon == 0:
        return poisson_distribution(0.0, n_max)
    if spec.kind is SourceKind.WEAK_COHERENT:
        return poisson_distribution(spec.mean_photon, n_max)
    return mcs_distribution(calibrate_mcs(spec.mean_photon, spec.elimination_c), n_max)
