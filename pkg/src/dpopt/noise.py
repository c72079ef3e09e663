"""Counter-based Laplace noise for privacy-preserving message passing.

Every message an agent sends at iteration k is obscured by one Laplace
draw per coordinate, and all receivers of that message see the same
draw.  To make that reproducible without sharing mutable generator
state, draws are derived statelessly: the tuple (seed, agent, stream
tag, iteration, coordinate) is mixed into a 64-bit word, the word is
mapped to a uniform in the open interval (0, 1) with 53 bits of
precision, and the uniform is pushed through the Laplace inverse CDF

    x = -scale * sign(q - 1/2) * ln(1 - 2|q - 1/2|).

Identical tuples give identical draws across runs, platforms, and
variants, which is what lets baseline comparisons share "the same
noise" exactly.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .conditions import ConditionReport
from .errors import RangeError
from .schedules import PowerSchedule

STATE_STREAM = 0
TRACKER_STREAM = 1

_STREAMS = {"state": STATE_STREAM, "tracker": TRACKER_STREAM}

_M1 = np.uint64(0x9E3779B97F4A7C15)
_M2 = np.uint64(0xBF58476D1CE4E5B9)
_M3 = np.uint64(0x94D049BB133111EB)
_FIELD_SALTS = (
    np.uint64(0xD6E8FEB86659FD93),
    np.uint64(0xA5A5A5A5A5A5A5A5),
    np.uint64(0xC2B2AE3D27D4EB4F),
    np.uint64(0x165667B19E3779F9),
)


def _mix64(x: np.ndarray) -> np.ndarray:
    # uint64 arithmetic wraps modulo 2^64 by design.
    with np.errstate(over="ignore"):
        x = (x + _M1).astype(np.uint64)
        x = (x ^ (x >> np.uint64(30))) * _M2
        x = (x ^ (x >> np.uint64(27))) * _M3
        return x ^ (x >> np.uint64(31))


def _counter_words(seed, agents, stream, iteration, coords):
    """Mix the five counter fields into one 64-bit word per (agent, coord)."""
    h = np.uint64(seed & 0xFFFFFFFFFFFFFFFF)
    fields = (
        np.asarray(agents, dtype=np.uint64),
        np.asarray(stream, dtype=np.uint64),
        np.asarray(iteration, dtype=np.uint64),
        np.asarray(coords, dtype=np.uint64),
    )
    out = h
    with np.errstate(over="ignore"):
        for salt, f in zip(_FIELD_SALTS, fields):
            out = _mix64(out ^ ((f + np.uint64(1)) * salt))
    return out


def _open_uniform(words: np.ndarray) -> np.ndarray:
    # Top 53 bits, offset by half a step: values lie strictly inside (0, 1).
    return ((words >> np.uint64(11)).astype(np.float64) + 0.5) * 2.0**-53


def laplace_inverse_cdf(q, scale):
    """Map uniform q in (0, 1) to a Laplace draw with the given scale."""
    q = np.asarray(q, dtype=float)
    centered = q - 0.5
    return -scale * np.sign(centered) * np.log1p(-2.0 * np.abs(centered))


def derive_seed(base_seed: int, index: int) -> int:
    """Stable per-run seed derived from a base seed and a run index."""
    with np.errstate(over="ignore"):
        word = _mix64(np.uint64(base_seed & 0xFFFFFFFFFFFFFFFF) ^
                      ((np.uint64(index) + np.uint64(1)) * _M2))
    return int(word & np.uint64(0x7FFFFFFFFFFFFFFF))


@dataclass(frozen=True)
class LaplaceNoiseSource:
    """Stateless Laplace noise keyed by (agent, stream, iteration, coord).

    scale is the noise-scale schedule; None disables the source (every
    sample is exactly zero), which is how noiseless diagnostics run.
    """

    scale: PowerSchedule | None
    seed: int

    def sample(self, agent: int, stream: str, iteration: int, dim: int) -> np.ndarray:
        """The noise vector agent attaches to its message at iteration.

        All receivers of the message observe this same vector; calling
        twice with the same arguments returns identical values.
        """
        if agent < 0 or iteration < 0 or dim < 1:
            raise RangeError("agent, iteration and dim must be nonnegative")
        if self.scale is None:
            return np.zeros(dim)
        words = _counter_words(
            self.seed, np.full(dim, agent), _STREAMS[stream], iteration,
            np.arange(dim),
        )
        return laplace_inverse_cdf(_open_uniform(words), self.scale.value(iteration))

    def sample_block(
        self, n_agents: int, stream: str, iterations: np.ndarray, dim: int
    ) -> np.ndarray:
        """Draws for all agents and coordinates over a range of iterations.

        Returns an array of shape (len(iterations), n_agents, dim) that
        matches per-call sample() entrywise.
        """
        if self.scale is None:
            return np.zeros((len(iterations), n_agents, dim))
        ks = np.asarray(iterations, dtype=np.uint64)
        agents = np.arange(n_agents, dtype=np.uint64)
        coords = np.arange(dim, dtype=np.uint64)
        words = _counter_words(
            self.seed,
            agents[None, :, None],
            _STREAMS[stream],
            ks[:, None, None],
            coords[None, None, :],
        )
        scales = self.scale.values(np.asarray(iterations, dtype=float))
        return laplace_inverse_cdf(_open_uniform(words), scales[:, None, None])

    def variance(self, iteration: int) -> float:
        """Per-coordinate message noise variance at the given iteration."""
        if self.scale is None:
            return 0.0
        s = self.scale.value(iteration)
        return 2.0 * s * s


def validate_noise_attenuation(
    nu: PowerSchedule | None, couplings: dict
) -> ConditionReport:
    """Check that every coupling schedule attenuates the injected noise
    variance fast enough for its perturbation series to converge.

    couplings maps a label to a coupling schedule; each label yields one
    entry testing sum coupling^2 * (2 nu^2) < inf.
    """
    from .schedules import series_class

    report = ConditionReport("noise attenuation conditions")
    for label, gamma in couplings.items():
        name = f"{label}_noise_attenuation_sums"
        if nu is None:
            report.add(name, "zero noise", 0.0, True)
            continue
        res = series_class(gamma**2 * nu**2)
        report.add(
            name,
            "sum coupling^2 nu^2 < inf (p-series)",
            res.decay_exponent,
            res.convergent,
        )
    return report
