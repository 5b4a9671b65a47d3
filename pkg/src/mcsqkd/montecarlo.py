"""Stochastic reference for the relay gains of phase-randomized weak coherent pulses.

A phase-randomized coherent state is a Poisson mixture of Fock states, and a
coherent state stays coherent through linear optics. So each trial draws
the two global phases, forms the coherent amplitude reaching every detector,
draws detected photon counts and dark counts, and classifies the clicks.
Nothing here shares code with the Fock-space model it is used to check.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

__all__ = ["MonteCarloEstimate", "simulate_coincidences"]

_R = 1.0 / math.sqrt(2.0)

# (horizontal, vertical) field components of each input polarization
_POL = {
    "H": (1.0, 0.0),
    "V": (0.0, 1.0),
    "+": (_R, _R),
    "-": (_R, -_R),
}
_COMBOS = {
    "Z": (("H", "V"), ("V", "H"), ("H", "H"), ("V", "V")),
    "X": (("+", "-"), ("-", "+"), ("+", "+"), ("-", "-")),
}


def _detector_amplitudes(pol: str, alice: bool) -> np.ndarray:
    """Field on D1H, D1V, D2H, D2V per unit input amplitude."""
    h, v = _POL[pol]
    # Alice's port reaches D1 directly and D2 with a quarter-wave phase; Bob's the reverse
    to_d1, to_d2 = (_R, 1j * _R) if alice else (1j * _R, _R)
    return np.array([to_d1 * h, to_d1 * v, to_d2 * h, to_d2 * v], dtype=complex)


@dataclass(frozen=True)
class MonteCarloEstimate:
    gain: float
    gain_se: float
    error_gain: float
    error_gain_se: float
    trials: int


def simulate_coincidences(
    mu_a: float,
    nu_b: float,
    basis: str,
    eta: float,
    dark: float,
    trials: int,
    seed: int | None = None,
    chunk: int = 1_000_000,
) -> MonteCarloEstimate:
    """Estimate the basis-averaged gain and error gain by direct sampling."""
    rng = np.random.default_rng(seed)
    combos = _COMBOS[basis]
    amp_a = np.stack([_detector_amplitudes(a, True) for a, _ in combos])
    amp_b = np.stack([_detector_amplitudes(b, False) for _, b in combos])
    same = np.array([a == b for a, b in combos])

    accepted = errors = 0
    done = 0
    while done < trials:
        size = min(chunk, trials - done)
        which = rng.integers(0, 4, size)
        phase_a = np.exp(2j * np.pi * rng.random(size))[:, None]
        phase_b = np.exp(2j * np.pi * rng.random(size))[:, None]
        field = math.sqrt(mu_a) * phase_a * amp_a[which] + math.sqrt(nu_b) * phase_b * amp_b[which]
        detected = rng.poisson(eta * np.abs(field) ** 2)
        clicks = (detected > 0) | (rng.random((size, 4)) < dark)
        d1h, d1v, d2h, d2v = clicks.T
        psi_plus = (d1h & d1v & ~d2h & ~d2v) | (d2h & d2v & ~d1h & ~d1v)
        psi_minus = (d1h & d2v & ~d2h & ~d1v) | (d2h & d1v & ~d1h & ~d2v)
        ok = psi_plus | psi_minus
        if basis == "Z":
            wrong = ok & same[which]
        else:
            wrong = np.where(same[which], psi_minus, psi_plus)
        accepted += int(ok.sum())
        errors += int(wrong.sum())
        done += size

    q = accepted / trials
    eq = errors / trials
    return MonteCarloEstimate(
        gain=q,
        gain_se=math.sqrt(q * (1.0 - q) / trials),
        error_gain=eq,
        error_gain_se=math.sqrt(eq * (1.0 - eq) / trials),
        trials=trials,
    )
