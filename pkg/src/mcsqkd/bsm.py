"""Bell-state measurement at the untrusted relay.

Alice's and Bob's pulses meet on a 50:50 beamsplitter; each output arm ends
in a polarizing beamsplitter and two threshold detectors, giving four
detectors ordered ``D1H, D1V, D2H, D2V``. Only the four H/V two-detector
coincidences are accepted: same-arm pairs announce psi+, cross-arm pairs psi-.

Two routes compute the same yields:

* the closed form for orthogonal rectangular inputs (binomial splitting of
  distinguishable photons, per-subset detector factors), and
* a second-quantized engine that expands creation operators through the
  optics and works for any input polarizations, including bunching inputs
  (H,H) and the diagonal basis.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum
from functools import lru_cache
from typing import NamedTuple

import numpy as np

from .kernels import fock_product, segment_pattern_sums
from .sources import PhotonDistribution

__all__ = [
    "Basis",
    "Polarization",
    "ClickModel",
    "CoincidencePattern",
    "ChannelDetector",
    "PairGain",
    "YieldTable",
    "SinglePhotonStats",
    "PhotonBudgetError",
    "BASIS_COMBOS",
    "PHOTON_CUTOFF",
    "MAX_PHOTON_BUDGET",
    "mode_vector",
    "fock_output",
    "subset_probability",
    "subset_yields",
    "pattern_yields",
    "yield_pair",
    "yield_tables",
    "polarization_gain",
    "gain_and_qber",
    "exact_single_photon_stats",
]

PHOTON_CUTOFF = 12
MAX_PHOTON_BUDGET = 32


class PhotonBudgetError(ValueError):
    """Requested photon numbers exceed what the engine enumerates."""


class Basis(str, Enum):
    Z = "Z"
    X = "X"


class Polarization(str, Enum):
    H = "H"
    V = "V"
    PLUS = "+"
    MINUS = "-"

    @property
    def basis(self) -> Basis:
        return Basis.Z if self in (Polarization.H, Polarization.V) else Basis.X


class ClickModel(str, Enum):
    # click 1-(1-eta)^k + d, silence ((1-eta)(1-d))^k, as tabulated for the relay
    LITERAL = "literal"
    # click 1-(1-d)(1-eta)^k, silence (1-d)(1-eta)^k
    NORMALIZED = "normalized"


class CoincidencePattern(Enum):
    D1H_D1V = 0
    D2H_D2V = 1
    D1H_D2V = 2
    D2H_D1V = 3

    @property
    def bell_class(self) -> str:
        return "psi_plus" if self.value < 2 else "psi_minus"


BASIS_COMBOS: dict[Basis, tuple[tuple[Polarization, Polarization], ...]] = {
    Basis.Z: (
        (Polarization.H, Polarization.V),
        (Polarization.V, Polarization.H),
        (Polarization.H, Polarization.H),
        (Polarization.V, Polarization.V),
    ),
    Basis.X: (
        (Polarization.PLUS, Polarization.MINUS),
        (Polarization.MINUS, Polarization.PLUS),
        (Polarization.PLUS, Polarization.PLUS),
        (Polarization.MINUS, Polarization.MINUS),
    ),
}


@dataclass(frozen=True)
class ChannelDetector:
    """Per-arm transmittance (channel times detector efficiency) and dark-count probability."""

    eta: float
    dark: float
    click_model: ClickModel = ClickModel.LITERAL

    def __post_init__(self):
        object.__setattr__(self, "click_model", ClickModel(self.click_model))
        if not 0.0 <= self.eta <= 1.0:
            raise ValueError(f"eta must lie in [0, 1], got {self.eta}")
        if not 0.0 <= self.dark < 1e-2:
            raise ValueError(f"dark count probability must lie in [0, 1e-2), got {self.dark}")

    def click_factors(self, k_max: int) -> np.ndarray:
        k = np.arange(k_max + 1)
        miss = (1.0 - self.eta) ** k
        if self.click_model is ClickModel.LITERAL:
            return 1.0 - miss + self.dark
        return 1.0 - (1.0 - self.dark) * miss

    def silence_factors(self, k_max: int) -> np.ndarray:
        k = np.arange(k_max + 1)
        if self.click_model is ClickModel.LITERAL:
            return ((1.0 - self.eta) * (1.0 - self.dark)) ** k
        return (1.0 - self.dark) * (1.0 - self.eta) ** k


@dataclass(frozen=True)
class PairGain:
    gain: float
    error_fraction: float

    @property
    def error_gain(self) -> float:
        return self.gain * self.error_fraction


class YieldTable(NamedTuple):
    """Basis-averaged yields ``gain[n, m]`` and error yields ``error[n, m]``."""

    gain: np.ndarray
    error: np.ndarray


class SinglePhotonStats(NamedTuple):
    y11_z: float
    y11_x: float
    e11_x: float


_INV_SQRT2 = 1.0 / math.sqrt(2.0)
_POL_VECTORS = {
    Polarization.H: np.array([1.0, 0.0]),
    Polarization.V: np.array([0.0, 1.0]),
    Polarization.PLUS: np.array([_INV_SQRT2, _INV_SQRT2]),
    Polarization.MINUS: np.array([_INV_SQRT2, -_INV_SQRT2]),
}
# a_A -> (a_D1 + i a_D2)/sqrt2, a_B -> (i a_D1 + a_D2)/sqrt2
_PATH_VECTORS = {
    "alice": np.array([1.0, 1j]) * _INV_SQRT2,
    "bob": np.array([1j, 1.0]) * _INV_SQRT2,
}


def mode_vector(party: str, pol: Polarization) -> np.ndarray:
    """Coefficients of one input photon on the detector modes D1H, D1V, D2H, D2V."""
    return np.kron(_PATH_VECTORS[party], _POL_VECTORS[Polarization(pol)]).astype(complex)


def _check_budget(n: int, m: int) -> None:
    if n < 0 or m < 0:
        raise ValueError("photon numbers must be non-negative")
    if n + m > MAX_PHOTON_BUDGET:
        raise PhotonBudgetError(f"n + m = {n + m} exceeds {MAX_PHOTON_BUDGET}")


@lru_cache(maxsize=None)
def fock_output(n: int, m: int, pol_a: Polarization, pol_b: Polarization):
    """Exact detector-mode Fock distribution for n photons from Alice and m from Bob."""
    _check_budget(n, m)
    configs, probs = fock_product(
        n, m, mode_vector("alice", pol_a), mode_vector("bob", pol_b)
    )
    configs.setflags(write=False)
    probs.setflags(write=False)
    return configs, probs


def subset_probability(n: int, m: int, p: int, q: int) -> float:
    """Weight of the subset with p, q, n-p, m-q photons at D1H, D1V, D2H, D2V.

    Orthogonally polarized inputs do not interfere, so this is the product of
    two fair binomials.
    """
    if not (0 <= p <= n and 0 <= q <= m):
        raise IndexError(f"subset (p={p}, q={q}) outside 0..{n} x 0..{m}")
    if n + m > MAX_PHOTON_BUDGET:
        raise IndexError(f"n + m = {n + m} exceeds {MAX_PHOTON_BUDGET}")
    return math.comb(n, p) * math.comb(m, q) / 2.0 ** (n + m)


def _click(k: int, cd: ChannelDetector) -> float:
    miss = (1.0 - cd.eta) ** k
    if cd.click_model is ClickModel.LITERAL:
        return 1.0 - miss + cd.dark
    return 1.0 - (1.0 - cd.dark) * miss


def _silence(k: int, cd: ChannelDetector) -> float:
    if cd.click_model is ClickModel.LITERAL:
        return ((1.0 - cd.eta) * (1.0 - cd.dark)) ** k
    return (1.0 - cd.dark) * (1.0 - cd.eta) ** k


def _counts_yields(k1h: int, k1v: int, k2h: int, k2v: int, cd: ChannelDetector):
    return (
        _click(k1h, cd) * _click(k1v, cd) * _silence(k2h, cd) * _silence(k2v, cd),
        _click(k2h, cd) * _click(k2v, cd) * _silence(k1h, cd) * _silence(k1v, cd),
        _click(k1h, cd) * _click(k2v, cd) * _silence(k2h, cd) * _silence(k1v, cd),
        _click(k2h, cd) * _click(k1v, cd) * _silence(k1h, cd) * _silence(k2v, cd),
    )


def subset_yields(p: int, q: int, n: int, m: int, cd: ChannelDetector):
    """Coincidence probabilities (y1, y2, y3, y4) of one subset for (H, V) inputs."""
    return _counts_yields(p, q, n - p, m - q, cd)


def _closed_form_yields(n, m, pol_a, pol_b, cd) -> np.ndarray:
    out = np.zeros(4)
    for p in range(n + 1):
        for q in range(m + 1):
            w = subset_probability(n, m, p, q)
            if pol_a is Polarization.H:
                ys = subset_yields(p, q, n, m, cd)
            else:
                # Alice's p photons now sit in the V modes, Bob's q in the H modes
                ys = _counts_yields(q, p, m - q, n - p, cd)
            out += w * np.asarray(ys)
    return out


def _engine_yields(n, m, pol_a, pol_b, cd) -> np.ndarray:
    configs, probs = fock_output(n, m, pol_a, pol_b)
    k_max = n + m
    return segment_pattern_sums(
        configs,
        probs,
        np.array([0, probs.size]),
        cd.click_factors(k_max),
        cd.silence_factors(k_max),
    )[0]


def pattern_yields(
    n: int,
    m: int,
    pol_a: Polarization,
    pol_b: Polarization,
    cd: ChannelDetector,
    engine: bool = False,
) -> np.ndarray:
    """Probabilities of the four accepted coincidences (y1..y4) for Fock inputs."""
    _check_budget(n, m)
    pol_a, pol_b = Polarization(pol_a), Polarization(pol_b)
    if pol_a.basis is not pol_b.basis:
        raise ValueError("both parties must use the same basis")
    orthogonal_rect = {pol_a, pol_b} == {Polarization.H, Polarization.V}
    if orthogonal_rect and not engine:
        return _closed_form_yields(n, m, pol_a, pol_b, cd)
    return _engine_yields(n, m, pol_a, pol_b, cd)


def _error_part(ys: np.ndarray, pol_a: Polarization, pol_b: Polarization) -> float:
    if pol_a.basis is Basis.Z:
        return float(ys.sum()) if pol_a is pol_b else 0.0
    # same diagonal expects psi+, opposite diagonal expects psi-
    return float(ys[2] + ys[3]) if pol_a is pol_b else float(ys[0] + ys[1])


def yield_pair(
    n: int,
    m: int,
    pol_a: Polarization,
    pol_b: Polarization,
    cd: ChannelDetector,
    engine: bool = False,
) -> PairGain:
    pol_a, pol_b = Polarization(pol_a), Polarization(pol_b)
    ys = pattern_yields(n, m, pol_a, pol_b, cd, engine=engine)
    gain = float(ys.sum())
    err = _error_part(ys, pol_a, pol_b)
    return PairGain(gain, err / gain if gain > 0 else 0.0)


@lru_cache(maxsize=8)
def _packed_engine(basis: Basis, cutoff: int):
    """All engine-evaluated (n, m, combo) distributions concatenated for one pass."""
    chunks, probs, offsets, segments = [], [], [0], []
    for ci, (pa, pb) in enumerate(BASIS_COMBOS[basis]):
        if {pa, pb} == {Polarization.H, Polarization.V}:
            continue
        for n in range(cutoff + 1):
            for m in range(cutoff + 1):
                k, p = fock_output(n, m, pa, pb)
                chunks.append(k)
                probs.append(p)
                offsets.append(offsets[-1] + p.size)
                segments.append((n, m, ci))
    return (
        np.concatenate(chunks),
        np.concatenate(probs),
        np.asarray(offsets, dtype=np.int64),
        segments,
    )


def _closed_form_table(cd: ChannelDetector, cutoff: int) -> np.ndarray:
    """Per-pattern (H,V) yields for all n, m <= cutoff, shape (cutoff+1, cutoff+1, 4).

    The subset sum factorizes into Alice and Bob parts because the subset
    weight and every detector factor do.
    """
    c = cd.click_factors(cutoff)
    s = cd.silence_factors(cutoff)
    f_near = np.zeros(cutoff + 1)  # photons counted at the D1 detector of its polarization
    f_far = np.zeros(cutoff + 1)
    for n in range(cutoff + 1):
        p = np.arange(n + 1)
        w = np.array([math.comb(n, k) for k in p]) / 2.0**n
        f_near[n] = np.sum(w * c[p] * s[n - p])
        f_far[n] = np.sum(w * c[n - p] * s[p])
    return np.stack(
        [
            np.outer(f_near, f_near),
            np.outer(f_far, f_far),
            np.outer(f_near, f_far),
            np.outer(f_far, f_near),
        ],
        axis=-1,
    )


@lru_cache(maxsize=512)
def yield_tables(cd: ChannelDetector, basis: Basis, cutoff: int = PHOTON_CUTOFF) -> YieldTable:
    """Basis-averaged yield and error-yield matrices over n, m <= cutoff."""
    basis = Basis(basis)
    size = cutoff + 1
    gain = np.zeros((size, size))
    error = np.zeros((size, size))
    combos = BASIS_COMBOS[basis]
    if basis is Basis.Z:
        hv = _closed_form_table(cd, cutoff)
        # (V, H) relabels which polarization detector sees which party; the total is symmetric
        gain += 2.0 * hv.sum(axis=-1)
    configs, probs, offsets, segments = _packed_engine(basis, cutoff)
    k_max = 2 * cutoff
    sums = segment_pattern_sums(
        configs, probs, offsets, cd.click_factors(k_max), cd.silence_factors(k_max)
    )
    for (n, m, ci), ys in zip(segments, sums):
        pa, pb = combos[ci]
        gain[n, m] += ys.sum()
        error[n, m] += _error_part(ys, pa, pb)
    gain /= 4.0
    error /= 4.0
    gain.setflags(write=False)
    error.setflags(write=False)
    return YieldTable(gain, error)


def polarization_gain(
    dist_a: PhotonDistribution,
    dist_b: PhotonDistribution,
    pol_a: Polarization,
    pol_b: Polarization,
    cd: ChannelDetector,
    cutoff: int = PHOTON_CUTOFF,
) -> PairGain:
    """Intensity-level gain for one fixed polarization pair (no basis averaging)."""
    pa, pb = dist_a.truncated(cutoff), dist_b.truncated(cutoff)
    gain = err = 0.0
    for n in range(cutoff + 1):
        for m in range(cutoff + 1):
            w = pa[n] * pb[m]
            if w == 0.0:
                continue
            r = yield_pair(n, m, pol_a, pol_b, cd)
            gain += w * r.gain
            err += w * r.error_gain
    return PairGain(gain, err / gain if gain > 0 else 0.0)


def gain_and_qber(
    dist_a: PhotonDistribution,
    dist_b: PhotonDistribution,
    basis: Basis,
    cd: ChannelDetector,
    cutoff: int = PHOTON_CUTOFF,
) -> PairGain:
    """Gain Q and error rate E for one intensity pair, averaged over the basis's four
    polarization pairs. A zero gain (only possible without light and dark counts)
    is reported with error fraction 0."""
    table = yield_tables(cd, Basis(basis), cutoff)
    pa, pb = dist_a.truncated(cutoff), dist_b.truncated(cutoff)
    q = float(pa @ table.gain @ pb)
    eq = float(pa @ table.error @ pb)
    return PairGain(q, eq / q if q > 0 else 0.0)


def exact_single_photon_stats(cd: ChannelDetector) -> SinglePhotonStats:
    """Single-photon-pair yields in both bases and the X-basis error rate."""
    z = [yield_pair(1, 1, pa, pb, cd) for pa, pb in BASIS_COMBOS[Basis.Z]]
    x = [yield_pair(1, 1, pa, pb, cd) for pa, pb in BASIS_COMBOS[Basis.X]]
    y11_z = sum(r.gain for r in z) / 4.0
    y11_x = sum(r.gain for r in x) / 4.0
    e_x = sum(r.error_gain for r in x) / 4.0
    return SinglePhotonStats(y11_z, y11_x, e_x / y11_x if y11_x > 0 else 0.0)
