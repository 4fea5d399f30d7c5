"""Certified rational threshold functions for the exact-recovery decoder.

The clean-up decoder thresholds the fraction of positively displayed
untainted tests against a step function Z of the untainted fraction
y = Y_x / Delta.  This module builds that step function together with a
rational admissible interval I = (l, r) so that, with slack delta,

  Z1: c d (1-theta) KL(y || e^-d) > theta + delta  outside (l+delta, r-delta)
  Z2: c d (1-theta) (KL(y || e^-d) + y KL(Z(y) || p11)) > theta + delta on I
  Z3: c d (1-theta) (KL(y || e^-d) + y KL(Z(y) || p01)) > 1 + delta      on I
  Z4: |Z(y) - Z(y')| < eps_prime whenever |y - y'| < delta_prime.

Z2 makes truly infected individuals pass the threshold except with
probability o(1/k); Z3 does the same for healthy ones failing it, and Z1
confines every infected individual's untainted fraction to I.  The
constructor verifies all four conditions on a dense grid before returning,
so a returned spec is self-certifying.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np

from .channel import NoiseChannel, kl_div, kl_div_vec
from .rates import admissible_interval, c_ex1, c_ex2

__all__ = ["ThresholdSpec", "ThresholdError", "build_threshold"]

_DENOM = 10**6


class ThresholdError(ValueError):
    """Construction failed: margin too small or verification violated."""


def _rat(x, round_up):
    n = math.ceil(x * _DENOM) if round_up else math.floor(x * _DENOM)
    return Fraction(n, _DENOM)


@dataclass(frozen=True)
class ThresholdSpec:
    """Rational interval and step function driving the clean-up rounds.

    ``breakpoints`` has one more entry than ``values``; cell i is
    [breakpoints[i], breakpoints[i+1]) with constant value values[i].
    """

    lo: Fraction
    hi: Fraction
    breakpoints: tuple  # Fractions, increasing, breakpoints[0]=lo, [-1]=hi
    values: tuple  # Fractions in (p01, p11)
    delta: float
    delta_prime: float
    eps_prime: float
    c: float
    d: float
    theta: float
    _bp_float: np.ndarray = field(repr=False, default=None)
    _val_float: np.ndarray = field(repr=False, default=None)

    def __post_init__(self):
        object.__setattr__(
            self, "_bp_float", np.array([float(b) for b in self.breakpoints])
        )
        object.__setattr__(
            self, "_val_float", np.array([float(v) for v in self.values])
        )

    def contains(self, y):
        """Whether y lies in the open interval (lo, hi)."""
        return float(self.lo) < y < float(self.hi)

    def value_at(self, y):
        """Step-function value at y in (lo, hi)."""
        i = int(np.searchsorted(self._bp_float, y, side="right")) - 1
        return float(self._val_float[min(max(i, 0), len(self.values) - 1)])

    def value_at_vec(self, ys):
        idx = np.searchsorted(self._bp_float, ys, side="right") - 1
        idx = np.clip(idx, 0, len(self.values) - 1)
        return self._val_float[idx]


def _balanced_value(cell_kl, cell_y, scale, theta, ch: NoiseChannel, gap=1e-3):
    """Step value for one cell: maximize the worse of the Z2/Z3 margins.

    m2(v) = min over the cell of scale*(KL + y KL(v||p11)) - theta  (dec. in v)
    m3(v) = min over the cell of scale*(KL + y KL(v||p01)) - 1      (inc. in v)
    The maximizer of min(m2, m3) is their crossing when it lies inside
    (p01, p11), else the better endpoint.  With one-sided noise the vacuous
    margin is +inf and the midpoint is used as a robust default.
    """
    p01, p11 = ch.p01, ch.p11
    lo = p01 + (p11 - p01) * gap
    hi = p11 - (p11 - p01) * gap

    def m2(v):
        return float(np.min(scale * (cell_kl + cell_y * kl_div(v, p11)))) - theta

    def m3(v):
        return float(np.min(scale * (cell_kl + cell_y * kl_div(v, p01)))) - 1.0

    mid = p01 + 0.5 * (p11 - p01)

    def root(m, increasing):
        # v where the margin crosses zero, clamped to [lo, hi]
        if m(lo) > 0.0 and m(hi) > 0.0:
            return hi if increasing else hi
        if m(lo) <= 0.0 and m(hi) <= 0.0:
            return lo
        a, b = lo, hi
        for _ in range(60):
            v = 0.5 * (a + b)
            if (m(v) > 0.0) == increasing:
                b = v
            else:
                a = v
        return 0.5 * (a + b)

    if p11 >= 1.0 and p01 <= 0.0:
        return 0.5
    if p01 <= 0.0:
        # Z3 vacuous.  A mid-range threshold keeps healthy individuals with
        # a few tainted tests from sneaking over; v = min(mid, v2max/2) is
        # continuous in the cell, so Z4 stays satisfiable.
        v2max = root(m2, increasing=False)
        return min(mid, 0.5 * (p01 + v2max))
    if p11 >= 1.0:
        v3min = root(m3, increasing=True)
        return max(mid, 0.5 * (v3min + p11))
    if m2(lo) - m3(lo) <= 0.0:
        return lo
    if m2(hi) - m3(hi) >= 0.0:
        return hi
    a, b = lo, hi
    for _ in range(60):
        v = 0.5 * (a + b)
        if m2(v) - m3(v) > 0.0:
            a = v
        else:
            b = v
    return 0.5 * (a + b)


def build_threshold(c, d, theta, ch: NoiseChannel, eps_prime=None, verify_grid=2**14):
    """Construct a self-certifying ThresholdSpec for the given design point.

    Requires c to exceed both c_ex1(d, theta) and c_ex2(d) for this channel;
    the admissible interval is widened to the one at c' halfway between
    c_ex1 and c, endpoints are rounded inward to rationals with denominator
    1e6, and the step values balance the Z2/Z3 margins cell by cell.  The
    number of cells doubles until the continuity condition Z4 holds for
    delta_prime equal to the cell width.  delta is set to half the smallest
    margin found during verification.
    """
    p01, p11 = ch.p01, ch.p11
    ce1 = c_ex1(d, theta, ch)
    ce2 = c_ex2(d, ch)
    if c <= max(ce1, ce2) * (1.0 + 1e-9):
        raise ThresholdError(
            f"c={c:.6g} does not exceed the exact-recovery requirement "
            f"max(c_ex1={ce1:.6g}, c_ex2={ce2:.6g}) at d={d:.6g}"
        )
    if eps_prime is None:
        eps_prime = (p11 - p01) / 16.0
    ed = math.exp(-d)
    scale = c * d * (1.0 - theta)

    c_prime = ce1 + 0.5 * (c - ce1)
    outer = admissible_interval(c_prime, d, theta)
    inner = admissible_interval(c, d, theta)
    gap_l = inner.lo - outer.lo
    gap_r = outer.hi - inner.hi
    if gap_l <= 2.0 / _DENOM or gap_r <= 2.0 / _DENOM:
        raise ThresholdError(
            f"margin too small: admissible intervals at c and c' differ by "
            f"less than {2.0 / _DENOM} (gaps {gap_l:.3g}, {gap_r:.3g})"
        )
    lo = _rat(outer.lo + 0.25 * gap_l, round_up=True)
    hi = _rat(outer.hi - 0.25 * gap_r, round_up=False)
    flo, fhi = float(lo), float(hi)
    if not (0.0 < flo < inner.lo and inner.hi < fhi < 1.0):
        raise ThresholdError(f"rational endpoints ({lo}, {hi}) failed to bracket")

    ygrid = np.linspace(flo, fhi, verify_grid)
    klgrid = kl_div_vec(ygrid, ed)

    nu = 64
    while True:
        bps = [lo + (hi - lo) * Fraction(i, nu) for i in range(nu + 1)]
        bpf = np.array([float(b) for b in bps])
        values = []
        ok_z4 = True
        for i in range(nu):
            sel = (ygrid >= bpf[i] - 1e-15) & (ygrid <= bpf[i + 1] + 1e-15)
            ck = klgrid[sel]
            cy = ygrid[sel]
            if ck.size == 0:
                cy = np.array([0.5 * (bpf[i] + bpf[i + 1])])
                ck = kl_div_vec(cy, ed)
            v = _balanced_value(ck, cy, scale, theta, ch)
            vr = _rat(v, round_up=False)
            vr = min(max(vr, _rat(p01, True) + Fraction(1, _DENOM)),
                     _rat(p11, False) - Fraction(1, _DENOM))
            values.append(vr)
        diffs = [abs(float(values[i + 1] - values[i])) for i in range(nu - 1)]
        if diffs and max(diffs) >= eps_prime:
            ok_z4 = False
        if ok_z4 or nu >= 4096:
            break
        nu *= 2
    if not ok_z4:
        raise ThresholdError("Z4 continuity unreachable; decrease eps_prime less")

    val_f = np.array([float(v) for v in values])
    idx = np.clip(np.searchsorted(bpf, ygrid, side="right") - 1, 0, nu - 1)
    zvals = val_f[idx]
    m2 = scale * (klgrid + ygrid * kl_div_vec(zvals, p11)) - theta
    m3 = (
        scale * (klgrid + ygrid * kl_div_vec(zvals, p01)) - 1.0
        if p01 > 0.0
        else np.full_like(klgrid, math.inf)
    )
    margin23 = float(min(m2.min(), m3.min()))
    if margin23 <= 0.0:
        raise ThresholdError(f"Z2/Z3 violated on the verification grid ({margin23:.3g})")

    # Z1 with its delta fixed point: shrink delta until the level set fits
    def z1_margin(delta):
        ys_out = np.concatenate(
            [np.linspace(1e-12, flo + delta, 4096), np.linspace(fhi - delta, 1.0, 4096)]
        )
        return float(np.min(scale * kl_div_vec(ys_out, ed))) - theta

    delta = min(margin23, flo, 1.0 - fhi) / 2.0
    for _ in range(80):
        if z1_margin(delta) > delta:
            break
        delta /= 2.0
    else:
        raise ThresholdError("no positive slack satisfies Z1")
    delta = min(delta, margin23 / 2.0)

    return ThresholdSpec(
        lo=lo,
        hi=hi,
        breakpoints=tuple(bps),
        values=tuple(values),
        delta=delta,
        delta_prime=float(hi - lo) / nu,
        eps_prime=eps_prime,
        c=c,
        d=d,
        theta=theta,
    )
