"""Binary noise channels and the entropy/KL primitives built on them.

A channel is the row-stochastic 2x2 matrix ``(p00, p01, p10, p11)``: a test
whose true (noiseless) outcome is negative displays negative with probability
``p00``, and a truly positive test displays positive with probability ``p11``.
All logarithms are natural; rates are in nats.

Extended values follow the usual information-theoretic conventions:
``0 log 0 = 0``, ``log(1/0) = inf``.  Divergences may be ``inf`` but are
never NaN.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

__all__ = [
    "NoiseChannel",
    "entropy",
    "kl_div",
    "kl_div_vec",
    "phi",
    "shannon_constant",
    "d_shannon",
    "marginal_output_rates",
    "mutual_info_rate",
    "transmit",
    "parse_channel",
]

_ROW_TOL = 1e-12


def entropy(z):
    """Binary entropy h(z) in nats, with h(0) = h(1) = 0."""
    if not 0.0 <= z <= 1.0:
        raise ValueError(f"entropy argument {z!r} outside [0, 1]")
    if z == 0.0 or z == 1.0:
        return 0.0
    return -z * math.log(z) - (1.0 - z) * math.log(1.0 - z)


def kl_div(y, z):
    """KL(y || z) between Bernoulli(y) and Bernoulli(z), possibly +inf.

    Conventions: 0 log 0 = 0 log(0/0) = 0 and log(1/0) = +inf, so the
    divergence is +inf exactly when y puts mass where z has none.
    """
    if not 0.0 <= y <= 1.0 or not 0.0 <= z <= 1.0:
        raise ValueError(f"kl_div arguments ({y!r}, {z!r}) outside [0, 1]")
    if y > 0.0:
        if z == 0.0:
            return math.inf
        pos = y * math.log(y / z)
    else:
        pos = 0.0
    if y < 1.0:
        if z == 1.0:
            return math.inf
        neg = (1.0 - y) * math.log((1.0 - y) / (1.0 - z))
    else:
        neg = 0.0
    return pos + neg


def kl_div_vec(y, z):
    """Vectorized KL(y || z) for an array y and scalar z in (0, 1)."""
    y = np.asarray(y, dtype=float)
    if not 0.0 < z < 1.0:
        # fall back to the scalar conventions elementwise
        return np.array([kl_div(float(v), z) for v in np.atleast_1d(y)]).reshape(y.shape)
    with np.errstate(divide="ignore", invalid="ignore"):
        pos = np.where(y > 0.0, y * np.log(np.maximum(y, 1e-300) / z), 0.0)
        neg = np.where(
            y < 1.0, (1.0 - y) * np.log(np.maximum(1.0 - y, 1e-300) / (1.0 - z)), 0.0
        )
    return pos + neg


@dataclass(frozen=True)
class NoiseChannel:
    """Immutable binary channel (p00, p01, p10, p11) with p11 > p01.

    Rows must sum to one; inputs off by at most 1e-12 are renormalized,
    anything worse is rejected.  ``p11 > p01`` (a truly positive test is more
    likely to display positive) is required; a channel violating it can be
    used after inverting the displayed results, which is the caller's job.
    """

    p00: float
    p01: float
    p10: float
    p11: float

    def __post_init__(self):
        vals = (self.p00, self.p01, self.p10, self.p11)
        if any(not 0.0 <= v <= 1.0 for v in vals):
            raise ValueError(f"channel entries {vals} outside [0, 1]")
        r0 = self.p00 + self.p01
        r1 = self.p10 + self.p11
        if abs(r0 - 1.0) > _ROW_TOL or abs(r1 - 1.0) > _ROW_TOL:
            raise ValueError(f"channel rows must sum to 1, got {r0!r} and {r1!r}")
        # normalize exactly: keep p00 and p11, recompute complements
        object.__setattr__(self, "p01", 1.0 - self.p00)
        object.__setattr__(self, "p10", 1.0 - self.p11)
        if not self.p11 > self.p01:
            raise ValueError(
                f"need p11 > p01 (got p11={self.p11}, p01={self.p01}); "
                "invert the displayed results first"
            )

    @classmethod
    def bsc(cls, p):
        """Binary symmetric channel with flip probability p < 1/2."""
        return cls(1.0 - p, p, p, 1.0 - p)

    @classmethod
    def z_channel(cls, p11):
        """Perfect specificity (p00 = 1) with sensitivity p11."""
        return cls(1.0, 0.0, 1.0 - p11, p11)

    @classmethod
    def noiseless(cls):
        return cls(1.0, 0.0, 0.0, 1.0)

    @property
    def is_symmetric(self):
        return self.p00 == self.p11

    @property
    def is_noiseless(self):
        return self.p00 == 1.0 and self.p11 == 1.0

    def row(self, actual):
        """Display distribution (P[show 0], P[show 1]) given the actual bit."""
        return (self.p10, self.p11) if actual else (self.p00, self.p01)

    def __str__(self):
        return f"({self.p00:g},{self.p01:g},{self.p10:g},{self.p11:g})"


def phi(ch: NoiseChannel):
    """The channel tilt (h(p00) - h(p10)) / (p00 - p10).

    Zero for symmetric channels (and in particular the noiseless one).
    ``p00 != p10`` is guaranteed by the construction invariant p11 > p01.
    """
    return (entropy(ch.p00) - entropy(ch.p10)) / (ch.p00 - ch.p10)


def _capacity_output_neg(ch: NoiseChannel):
    # probability of a displayed-negative under the capacity-achieving input
    return (1.0 - math.tanh(phi(ch) / 2.0)) / 2.0


def shannon_constant(ch: NoiseChannel):
    """c_Sh = 1 / KL(p10 || (1 - tanh(phi/2))/2), the inverse channel capacity.

    The required number of tests for approximate recovery is
    ``c_Sh * k * log(n/k)``.
    """
    return 1.0 / kl_div(ch.p10, _capacity_output_neg(ch))


def sparc_test_budget(ch: NoiseChannel, n, k):
    """Approximate-recovery test budget c_Sh * k * log(n/k)."""
    return shannon_constant(ch) * k * math.log(n / k)


def d_shannon(ch: NoiseChannel):
    """The test density maximizing the per-test mutual information.

    d = log(p11 - p01) - log((1 - tanh(phi/2))/2 - p10).  Picking the mean
    test degree so that a fraction exp(-d) of tests is truly negative turns
    each test into one use of the channel at its capacity-achieving input.
    """
    q = _capacity_output_neg(ch)
    if q <= ch.p10:
        raise ValueError(f"degenerate channel {ch}: capacity output {q} <= p10")
    return math.log(ch.p11 - ch.p01) - math.log(q - ch.p10)


def marginal_output_rates(ch: NoiseChannel, d):
    """(q0-, q0+): displayed-negative/positive rates when exp(-d) of tests
    are truly negative."""
    ed = math.exp(-d)
    q0m = ed * ch.p00 + (1.0 - ed) * ch.p10
    return q0m, 1.0 - q0m


def mutual_info_rate(ch: NoiseChannel, d):
    """Per-test information I(X, Y) in nats for input X ~ Be(exp(-d)).

    Equals h(q0-) - exp(-d) h(p00) - (1 - exp(-d)) h(p10); maximized at
    d = d_shannon(ch) where it equals 1/shannon_constant(ch).
    """
    ed = math.exp(-d)
    q0m = ed * ch.p00 + (1.0 - ed) * ch.p10
    return entropy(q0m) - ed * entropy(ch.p00) - (1.0 - ed) * entropy(ch.p10)


def transmit(ch: NoiseChannel, actual, rand):
    """Push one actual bit through the channel using a uniform variate."""
    if actual:
        return 1 if rand < ch.p11 else 0
    return 1 if rand < ch.p01 else 0


def transmit_vec(ch: NoiseChannel, actual, rng):
    """Vectorized channel application to a 0/1 array of actual outcomes."""
    actual = np.asarray(actual)
    u = rng.random(actual.shape)
    show_pos = np.where(actual == 1, u < ch.p11, u < ch.p01)
    return show_pos.astype(np.uint8)


def parse_channel(spec):
    """Parse a channel from "p00,p01,p10,p11", "bsc:<p>", or "z:<p11>"."""
    spec = spec.strip().lower()
    if spec in ("noiseless", "id"):
        return NoiseChannel.noiseless()
    if spec.startswith("bsc:"):
        return NoiseChannel.bsc(float(spec[4:]))
    if spec.startswith("z:"):
        return NoiseChannel.z_channel(float(spec[2:]))
    parts = [float(x) for x in spec.split(",")]
    if len(parts) != 4:
        raise ValueError(f"channel spec {spec!r}: expected 4 comma-separated entries")
    return NoiseChannel(*parts)
