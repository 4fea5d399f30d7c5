"""Rate thresholds for noisy group testing.

Everything here answers one question for a channel and infection density
theta: how many tests per k*log(n/k) are needed?  The module computes

* ``c_ex0 / c_ex1 / c_ex2`` -- the local-stability and counting thresholds
  whose maximum, minimized over the test density d, is the exact-recovery
  constant ``c_exact``;
* ``c_dd`` -- the constant for the two-pass DD decoder on the constant
  column design, together with its optimal thresholds (alpha, beta, d);
* closed forms for the Z-channel and bounds for the symmetric channel,
  used as independent oracles;
* the Chen--Scarlett formulation of the symmetric-channel threshold, used
  as a cross-check.

All scalar optimizations are bisections or golden-section searches with
fixed tolerances (1e-8 in c, 1e-10 in y and z); the objectives are convex
or piecewise smooth, so this is more robust than a generic solver.
Near the boundary, theta is clamped to [1e-3, 1 - 1e-3] because every
threshold diverges as theta -> 1.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .channel import (
    NoiseChannel,
    kl_div,
    kl_div_vec,
    mutual_info_rate,
    shannon_constant,
)

__all__ = [
    "YInterval",
    "DdSolution",
    "RateReport",
    "admissible_interval",
    "z_of_y",
    "c_ex0",
    "c_ex1",
    "c_ex2",
    "c_exact",
    "c_dd",
    "chen_scarlett_cls",
    "closed_form_z_channel",
    "bsc_cex1_bounds",
    "kl_min_profile",
    "rate_report",
]

C_TOL = 1e-8
Y_TOL = 1e-10
_THETA_CLAMP = 1e-3
D_BRACKET = (0.05, 6.0)

_GOLDEN = (math.sqrt(5.0) - 1.0) / 2.0


def _clamp_theta(theta):
    if not 0.0 < theta < 1.0:
        raise ValueError(f"theta={theta!r} outside (0, 1)")
    return min(max(theta, _THETA_CLAMP), 1.0 - _THETA_CLAMP)


def golden_min(f, a, b, tol=1e-12, iters=200):
    """Golden-section minimum of a unimodal f on [a, b]; returns (x, f(x))."""
    c = b - _GOLDEN * (b - a)
    d = a + _GOLDEN * (b - a)
    fc, fd = f(c), f(d)
    for _ in range(iters):
        if b - a < tol:
            break
        if fc < fd:
            b, d, fd = d, c, fc
            c = b - _GOLDEN * (b - a)
            fc = f(c)
        else:
            a, c, fc = c, d, fd
            d = a + _GOLDEN * (b - a)
            fd = f(d)
    x = 0.5 * (a + b)
    return x, f(x)


@dataclass(frozen=True)
class YInterval:
    """Closure endpoints of the admissible untainted-fraction interval."""

    lo: float
    hi: float

    def __contains__(self, y):
        return self.lo <= y <= self.hi

    @property
    def width(self):
        return self.hi - self.lo


def admissible_interval(c, d, theta, tol=Y_TOL):
    """Endpoints of {y in [0,1] : c d (1-theta) KL(y || exp(-d)) < theta}.

    The constraint function is convex in y with its zero at y = exp(-d), so
    each endpoint is found by bisection on one side.
    """
    if c <= 0 or d <= 0:
        raise ValueError("need c, d > 0")
    theta = _clamp_theta(theta)
    target = theta / (c * d * (1.0 - theta))
    ed = math.exp(-d)

    def endpoint(a, b, left):
        # invariant: constraint > target at the outer point, <= at the inner
        for _ in range(200):
            if b - a < tol:
                break
            m = 0.5 * (a + b)
            if (kl_div(m, ed) > target) == left:
                a = m
            else:
                b = m
        return 0.5 * (a + b)

    lo = 0.0 if kl_div(0.0, ed) <= target else endpoint(0.0, ed, True)
    hi = 1.0 if kl_div(1.0, ed) <= target else endpoint(ed, 1.0, False)
    return YInterval(lo, hi)


def z_of_y(c, d, theta, y, ch: NoiseChannel, tol=Y_TOL):
    """The unique z in [p01, p11] balancing the deviation budget at y.

    Solves c d (1-theta) (KL(y||exp(-d)) + y KL(z||p11)) = theta by bisection
    on the strictly decreasing map z -> KL(z||p11) over [p01, p11].  Clamps
    to p01 if even z = p01 cannot exhaust the budget (possible only near
    y = 0).  Requires p11 < 1; for perfect sensitivity the threshold curve
    is identically 1 and callers must branch.
    """
    p01, p11 = ch.p01, ch.p11
    if p11 >= 1.0:
        raise ValueError("z_of_y undefined for p11 = 1 (threshold curve is 1)")
    theta = _clamp_theta(theta)
    budget = theta / (c * d * (1.0 - theta)) - kl_div(y, math.exp(-d))
    if budget < -1e-12:
        raise ValueError(f"y={y} outside the admissible interval")
    if y <= 0.0:
        return p01
    need = max(budget, 0.0) / y
    if need >= kl_div(p01, p11):
        return p01
    a, b = p01, p11
    for _ in range(200):
        if b - a < tol:
            break
        m = 0.5 * (a + b)
        if kl_div(m, p11) > need:
            a = m
        else:
            b = m
    return 0.5 * (a + b)


def _z_of_y_vec(c, d, theta, ys, ch: NoiseChannel, iters=48):
    """Vectorized z_of_y over an array of admissible y values."""
    p01, p11 = ch.p01, ch.p11
    budget = theta / (c * d * (1.0 - theta)) - kl_div_vec(ys, math.exp(-d))
    need = np.where(ys > 0.0, np.maximum(budget, 0.0) / np.maximum(ys, 1e-300), np.inf)
    kmax = kl_div(p01, p11)
    lo = np.full_like(ys, p01)
    hi = np.full_like(ys, p11)
    lq = math.log(p11)
    l1q = math.log1p(-p11)
    for _ in range(iters):
        mid = 0.5 * (lo + hi)
        # KL(mid || p11) without edge guards: mid stays inside (0, 1)
        v = mid * (np.log(mid) - lq) + (1.0 - mid) * (np.log1p(-mid) - l1q)
        above = v > need
        lo = np.where(above, mid, lo)
        hi = np.where(above, hi, mid)
    z = 0.5 * (lo + hi)
    return np.where(need >= kmax, p01, z)


def _bisect_c(predicate, lo, hi, tol=C_TOL):
    """Smallest c with predicate(c) true; predicate must be monotone in c."""
    while not predicate(hi):
        lo, hi = hi, hi * 2.0
        if hi > 1e12:
            return math.inf
    for _ in range(400):
        if hi - lo < tol:
            break
        m = 0.5 * (lo + hi)
        if predicate(m):
            hi = m
        else:
            lo = m
    return 0.5 * (lo + hi)


def c_ex0(d, theta, ch: NoiseChannel):
    """Smallest c making the truly-positive deviation budget infeasible.

    For p11 = 1 this is the c at which y = 0 leaves the admissible interval,
    available in closed form.  Otherwise: outer bisection on c against the
    predicate  min_y c d (1-theta)(KL(y||exp(-d)) + y KL(p01||p11)) >= theta,
    whose inner objective is convex in y (KL plus a linear term).
    """
    theta = _clamp_theta(theta)
    ed = math.exp(-d)
    if ch.p11 >= 1.0:
        return theta / (d * (1.0 - theta) * -math.log1p(-ed))
    kappa = kl_div(ch.p01, ch.p11)

    def predicate(c):
        f = lambda y: c * d * (1.0 - theta) * (kl_div(y, ed) + y * kappa)
        _, v = golden_min(f, 0.0, 1.0, tol=Y_TOL)
        return v >= theta

    return _bisect_c(predicate, 1e-9, 1.0)


def _cex1_inf(c, d, theta, ch: NoiseChannel, ngrid=768):
    """inf over the admissible interval of the healthy-deviation exponent,
    with the threshold curve z(y) plugged in.

    A dense grid keeps the infimum error well below the 1e-8 bisection
    tolerance on c without per-call golden refinement.
    """
    ed = math.exp(-d)
    p01, p11 = ch.p01, ch.p11
    iv = admissible_interval(c, d, theta)
    lo = iv.lo + 1e-13
    hi = iv.hi - 1e-13
    if hi <= lo:
        return math.inf
    ys = np.linspace(lo, hi, ngrid)
    if p11 >= 1.0:
        kz = np.full_like(ys, kl_div(1.0, p01))
    else:
        zs = _z_of_y_vec(c, d, theta, ys, ch)
        kz = kl_div_vec(zs, p01)
    obj = c * d * (1.0 - theta) * (kl_div_vec(ys, ed) + ys * kz)
    i = int(np.argmin(obj))
    # parabolic sharpening around the grid minimum
    if 0 < i < ngrid - 1:
        y2 = np.linspace(ys[i - 1], ys[i + 1], 33)
        if p11 >= 1.0:
            k2 = np.full_like(y2, kl_div(1.0, p01))
        else:
            k2 = kl_div_vec(_z_of_y_vec(c, d, theta, y2, ch), p01)
        o2 = c * d * (1.0 - theta) * (kl_div_vec(y2, ed) + y2 * k2)
        return float(min(obj[i], o2.min()))
    return float(obj[i])


def c_ex1(d, theta, ch: NoiseChannel, hint=None, tol=C_TOL):
    """Local-stability threshold: smallest c >= c_ex0 at which no healthy
    individual can disguise itself across the whole admissible interval.

    For p01 = 0 the disguise exponent is infinite and c_ex1 = c_ex0.
    ``hint`` (a nearby known value) narrows the initial bisection bracket.
    """
    theta = _clamp_theta(theta)
    c0 = c_ex0(d, theta, ch)
    if ch.p01 <= 0.0:
        return c0

    def predicate(c):
        return _cex1_inf(c, d, theta, ch) >= 1.0

    lo = c0 * (1.0 + 1e-12)
    if predicate(lo * (1.0 + 1e-9)):
        return c0
    if hint is not None and hint > c0:
        hlo, hhi = max(lo, hint * 0.9), hint * 1.1
        if not predicate(hlo):
            lo = hlo
            if predicate(hhi):
                return _bisect_c(predicate, lo, hhi, tol)
    return _bisect_c(predicate, lo, max(2.0 * c0, 1.0), tol)


def c_ex2(d, ch: NoiseChannel):
    """Counting threshold 1 / I(X, Y) at test density d."""
    rate = mutual_info_rate(ch, d)
    return math.inf if rate <= 0.0 else 1.0 / rate


@lru_cache(maxsize=512)
def c_exact(theta, ch: NoiseChannel, d_bracket=D_BRACKET, ngrid=33):
    """min over d of max{c_ex1(d, theta), c_ex2(d)} and its minimizer.

    Coarse log-spaced d grid over ``d_bracket`` followed by golden-section
    refinement around the best cell; accurate to ~1e-5 in c.  Grid points
    are pruned with the cheap lower bounds c_ex2(d) and the closed-form
    value of c_ex0(d), and each c_ex1 bisection is warm-started from the
    previous d.
    """
    theta = _clamp_theta(theta)
    last = {"c1": None}

    def cex0_closed(d):
        # analytic minimum of the c_ex0 objective; only a pruning bound
        a = math.exp(-kl_div(ch.p01, ch.p11))
        v = -math.log1p(-(1.0 - a) * math.exp(-d))
        return theta / (d * (1.0 - theta) * v)

    def F(d, best=math.inf):
        c2 = c_ex2(d, ch)
        if c2 >= best:
            return c2
        if cex0_closed(d) >= best:
            return max(cex0_closed(d), c2)
        c1 = c_ex1(d, theta, ch, hint=last["c1"])
        last["c1"] = c1
        return max(c1, c2)

    ds = np.exp(np.linspace(math.log(d_bracket[0]), math.log(d_bracket[1]), ngrid))
    order = np.argsort(np.abs(np.log(ds) - math.log(0.7)))  # start near log 2
    vals = np.full(ngrid, math.inf)
    best = math.inf
    for j in order:
        vals[j] = F(float(ds[j]), best)
        best = min(best, vals[j])
    i = int(np.argmin(vals))
    d_opt, val = golden_min(
        lambda d: F(d), ds[max(0, i - 1)], ds[min(ngrid - 1, i + 1)], tol=1e-6, iters=36
    )
    if vals[i] < val:
        d_opt, val = float(ds[i]), float(vals[i])
    return val, d_opt


@dataclass(frozen=True)
class DdSolution:
    """Optimal DD constant and the thresholds that achieve it."""

    c_dd: float
    alpha: float
    beta: float
    d: float


def _dd_c4_exact(alpha, beta, d, theta, ch: NoiseChannel):
    """c_DD,4 at a point, minimizing over z on each smooth piece.

    The objective has an indicator discontinuity at z* = beta q0+ / (e^-d
    p01); each side is optimized separately (golden-section) and the pieces'
    minima combined.
    """
    p01 = ch.p01
    ed = math.exp(-d)
    q0m = ed * ch.p00 + (1.0 - ed) * ch.p10
    q0p = 1.0 - q0m
    zmin = max(1.0 - alpha, beta)
    if zmin >= 1.0:
        return 0.0
    if p01 <= 0.0:
        return 0.0
    r = ed * p01 / q0p

    def obj(z):
        v = kl_div(z, q0p)
        if beta > z * r:
            v += z * kl_div(min(beta / z, 1.0), r)
        return d * (1.0 - theta) * v

    zstar = beta * q0p / (ed * p01) if p01 > 0 else math.inf
    best = math.inf
    pieces = []
    if zstar > zmin:
        pieces.append((zmin, min(zstar, 1.0)))
    if zstar < 1.0:
        pieces.append((max(zstar, zmin), 1.0))
    if not pieces:
        pieces.append((zmin, 1.0))
    for a, b in pieces:
        if b <= a:
            continue
        _, v = golden_min(obj, a, b, tol=1e-11)
        best = min(best, v, obj(a + 1e-15), obj(b - 1e-15))
    return math.inf if best <= 0.0 else 1.0 / best


def _dd_max_at(alpha, beta, d, theta, ch: NoiseChannel):
    """max of the four DD constants at one parameter point (inf if infeasible).

    Note: the infected pass-1 constant is theta / (d (1-theta) KL(alpha||p10));
    the d belongs there because an individual's degree is d c log(n/k), even
    though it is sometimes typeset without it.
    """
    ed = math.exp(-d)
    q0m = ed * ch.p00 + (1.0 - ed) * ch.p10
    if not (ch.p10 < alpha < q0m and 0.0 < beta < ed * ch.p11):
        return math.inf
    c1 = (
        theta / (d * (1.0 - theta) * kl_div(alpha, ch.p10))
        if ch.p10 > 0.0
        else 0.0
    )
    c2 = 1.0 / (d * kl_div(alpha, q0m))
    c3 = theta / (d * (1.0 - theta) * kl_div(beta, ch.p11 * ed))
    c4 = _dd_c4_exact(alpha, beta, d, theta, ch)
    return max(c1, c2, c3, c4)


def _dd_scan_d(d, theta, ch: NoiseChannel, na=40, nb=40, nz=400):
    """Vectorized (alpha, beta) scan at fixed d.  Returns (value, alpha, beta).

    c_DD,4's inner minimum over z >= max(1-alpha, beta) is evaluated on a
    z grid with suffix minima, so each (alpha, beta) pair costs O(1).
    """
    ed = math.exp(-d)
    p01, p10, p11 = ch.p01, ch.p10, ch.p11
    q0m = ed * ch.p00 + (1.0 - ed) * p10
    q0p = 1.0 - q0m
    if q0m - p10 < 1e-12 or ed * p11 < 1e-12:
        return math.inf, math.nan, math.nan
    alphas = p10 + (q0m - p10) * np.linspace(1e-4, 1.0 - 1e-4, na)
    betas = ed * p11 * np.linspace(1e-4, 1.0 - 1e-4, nb) ** 2  # denser near 0
    c1 = (
        theta / (d * (1.0 - theta) * kl_div_vec(alphas, p10))
        if p10 > 0.0
        else np.zeros(na)
    )
    c2 = 1.0 / (d * kl_div_vec(alphas, q0m))
    c3 = theta / (d * (1.0 - theta) * kl_div_vec(betas, p11 * ed))
    c12 = np.maximum(c1, c2)  # (na,)

    if p01 <= 0.0:
        c4 = np.zeros((na, nb))
    else:
        r = ed * p01 / q0p
        zmin_all = max(min(1.0 - alphas.max(), betas.min()), 1e-9)
        zs = np.linspace(zmin_all, 1.0 - 1e-12, nz)  # (nz,)
        klzq = kl_div_vec(zs, q0p)
        # g[b, z] = KL(z||q0+) + 1{beta > z r} z KL(beta/z || r)
        ratio = np.minimum(betas[:, None] / zs[None, :], 1.0)
        pen = zs[None, :] * (
            ratio * np.log(np.maximum(ratio, 1e-300) / r)
            + (1.0 - ratio)
            * np.log(np.maximum(1.0 - ratio, 1e-300) / (1.0 - r))
        )
        g = klzq[None, :] + np.where(betas[:, None] > zs[None, :] * r, pen, 0.0)
        suffmin = np.minimum.accumulate(g[:, ::-1], axis=1)[:, ::-1]  # (nb, nz)
        zmins = np.maximum(1.0 - alphas[:, None], betas[None, :])  # (na, nb)
        idx = np.searchsorted(zs, zmins.ravel(), side="left").reshape(na, nb)
        idx = np.minimum(idx, nz - 1)
        vals = suffmin[np.arange(nb)[None, :], idx]  # (na, nb)
        vals = d * (1.0 - theta) * vals
        with np.errstate(divide="ignore"):
            c4 = np.where(vals > 0.0, 1.0 / vals, np.inf)

    total = np.maximum(np.maximum(c12[:, None], c3[None, :]), c4)
    i, j = np.unravel_index(int(np.argmin(total)), total.shape)
    return float(total[i, j]), float(alphas[i]), float(betas[j])


@lru_cache(maxsize=512)
def c_dd(theta, ch: NoiseChannel, d_bracket=D_BRACKET, nd=36, refine=4):
    """Optimal DD constant: minimize max{c_DD,1..4} over (alpha, beta, d).

    Coarse vectorized grids per d, then shrinking local grids around the
    best point using the exact piecewise c_DD,4.  Tolerance ~1e-4.
    """
    theta = _clamp_theta(theta)
    ds = np.exp(np.linspace(math.log(d_bracket[0]), math.log(d_bracket[1]), nd))
    best = (math.inf, math.nan, math.nan, math.nan)
    for d in ds:
        v, a, b = _dd_scan_d(d, theta, ch)
        if v < best[0]:
            best = (v, a, b, float(d))
    if not math.isfinite(best[0]):
        raise ValueError(f"DD infeasible for {ch} on d bracket {d_bracket}")
    for step in range(refine):
        v0, a0, b0, d0 = best
        shrink = 0.35 ** (step + 1)
        for d in np.linspace(max(1e-3, d0 * (1 - shrink)), d0 * (1 + shrink), 9):
            ed = math.exp(-d)
            q0m = ed * ch.p00 + (1.0 - ed) * ch.p10
            arange = (q0m - ch.p10) * shrink
            brange = ed * ch.p11 * shrink
            for a in np.linspace(
                max(ch.p10 + 1e-9, a0 - arange), min(q0m - 1e-9, a0 + arange), 9
            ):
                for b in np.linspace(
                    max(1e-9, b0 - brange), min(ed * ch.p11 - 1e-9, b0 + brange), 9
                ):
                    v = _dd_max_at(a, b, d, theta, ch)
                    if v < best[0]:
                        best = (v, a, b, d)
    return DdSolution(best[0], best[1], best[2], best[3])


def chen_scarlett_cls(d, theta, ch: NoiseChannel, nw=2001, ny=700):
    """Chen--Scarlett symmetric-channel constant max{c_ex2(d), c_ls(d, theta)}.

    c_ls is a min-max over (y, z) with an inner minimization over
    y' in [|y(2z-1)|, 1] of KL(y'||e^-d) + y' KL(z'||p01), where
    z'(z, y, y') = 1/2 + y(2z-1)/(2y').  Both layers depend on (y, z) only
    through w = y(2z-1), so the problem reduces to two 1-D profiles over w:

        h(w) = min_{y >= |w|} [KL(y||e^-d) + y KL((1 + w/y)/2 || p11)] / theta
        m(w) = min_{y >= |w|}  KL(y||e^-d) + y KL((1 + w/y)/2 || p01)
        c_ls = 1 / (d (1-theta) min_w max{h(w), m(w)})

    evaluated on dense grids with golden polish.  Raises for asymmetric
    channels, where the rephrasing is not valid.
    """
    if not ch.is_symmetric:
        raise ValueError("Chen--Scarlett form applies to symmetric channels only")
    theta = _clamp_theta(theta)
    ed = math.exp(-d)
    p01, p11 = ch.p01, ch.p11

    ws = np.linspace(-1.0 + 1e-9, 1.0 - 1e-9, nw)
    yg = np.linspace(1e-9, 1.0, ny)
    kly = kl_div_vec(yg, ed)

    def profiles(w_arr):
        zz = 0.5 * (1.0 + w_arr[:, None] / np.maximum(yg[None, :], 1e-300))
        zz = np.clip(zz, 0.0, 1.0)
        mask = yg[None, :] >= np.abs(w_arr)[:, None]
        f1 = kly[None, :] + yg[None, :] * kl_div_vec(zz, p11)
        g = kly[None, :] + yg[None, :] * kl_div_vec(zz, p01)
        big = np.where(mask, 0.0, np.inf)
        return (f1 + big).min(axis=1) / theta, (g + big).min(axis=1)

    h, m = profiles(ws)
    tot = np.maximum(h, m)
    i = int(np.argmin(tot))

    def prof_scalar(w):
        lo = max(abs(w), 1e-9)

        def fy(y, ref):
            z = min(max(0.5 * (1.0 + w / y), 0.0), 1.0)
            return kl_div(y, ed) + y * kl_div(z, ref)

        def minimize(ref):
            ys = np.linspace(lo, 1.0, 160)
            vals = np.array([fy(float(y), ref) for y in ys])
            j = int(np.argmin(vals))
            _, v = golden_min(
                lambda y: fy(y, ref), ys[max(0, j - 1)], ys[min(158, j + 1)], tol=1e-11
            )
            return min(v, float(vals[j]))

        return max(minimize(p11) / theta, minimize(p01))

    a = ws[max(0, i - 1)]
    b = ws[min(nw - 1, i + 1)]
    _, v0 = golden_min(prof_scalar, a, b, tol=1e-11)
    v0 = min(v0, float(tot[i]))
    c_ls = math.inf if v0 <= 0.0 else 1.0 / (d * (1.0 - theta) * v0)
    return max(c_ex2(d, ch), c_ls)


def closed_form_z_channel(d, theta, p11):
    """Z-channel closed forms (c_ex1, c_ex2); independent oracle."""
    if not 0.0 < p11 < 1.0:
        raise ValueError("closed form needs 0 < p11 < 1")
    theta = _clamp_theta(theta)
    p10 = 1.0 - p11
    ed = math.exp(-d)
    cex1 = -theta / (d * (1.0 - theta) * math.log1p(-ed * p11))
    from .channel import entropy

    denom = entropy(p10 + (1.0 - p10) * ed) - (1.0 - ed) * entropy(p10)
    cex2 = math.inf if denom <= 0.0 else 1.0 / denom
    return cex1, cex2


def bsc_cex1_bounds(d, theta, p01):
    """Sandwich (lower, upper] for c_ex1 on the symmetric channel, p01 < 1/2.

    a = exp(-KL(1/2 || p01)) = 2 sqrt(p01 (1-p01)); the lower bound is
    theta / (-(1-theta) d log(1 - (1-a) e^-d)) and the upper bound is the
    same with theta replaced by 1, i.e. lower / theta.
    """
    if not 0.0 < p01 < 0.5:
        raise ValueError("bounds require 0 < p01 < 1/2")
    theta = _clamp_theta(theta)
    a = 2.0 * math.sqrt(p01 * (1.0 - p01))
    denom = -(1.0 - theta) * d * math.log1p(-(1.0 - a) * math.exp(-d))
    lower = theta / denom
    return lower, lower / theta


def kl_min_profile(d, z, p):
    """Analytic minimum of y -> KL(y||exp(-d)) + y KL(z||p) over [0, 1].

    Returns (y*, value) with y* = a e^-d / (1 - (1-a) e^-d) and value
    -log(1 - (1-a) e^-d), where a = exp(-KL(z||p)).
    """
    if d <= 0.0 or not 0.0 < p < 1.0:
        raise ValueError("need d > 0 and p in (0, 1)")
    a = math.exp(-kl_div(z, p))
    ed = math.exp(-d)
    y_star = a * ed / (1.0 - (1.0 - a) * ed)
    value = -math.log1p(-(1.0 - a) * ed)
    return y_star, value


@dataclass(frozen=True)
class RateReport:
    """Per-(theta, channel) record of every threshold the toolkit computes."""

    theta: float
    c_sh: float
    c_ex: float
    d_opt: float
    c_ex1_at_dopt: float
    c_ex2_at_dopt: float
    c_dd: float = math.nan
    dd_alpha: float = math.nan
    dd_beta: float = math.nan
    dd_d: float = math.nan

    @property
    def rate_ex(self):
        return 1.0 / self.c_ex

    @property
    def rate_sh(self):
        return 1.0 / self.c_sh

    def check(self):
        """Assert the internal consistency the construction guarantees."""
        assert self.c_ex >= self.c_sh - 1e-6, (self.c_ex, self.c_sh)
        assert (
            abs(self.c_ex - max(self.c_ex1_at_dopt, self.c_ex2_at_dopt)) < 1e-6
        ), self
        if not math.isnan(self.c_dd):
            assert self.c_dd >= self.c_ex - 1e-4, (self.c_dd, self.c_ex)
        return self


def rate_report(theta, ch: NoiseChannel, with_dd=False):
    """Assemble the full threshold record for one (theta, channel) point."""
    c_ex_val, d_opt = c_exact(theta, ch)
    rep = dict(
        theta=theta,
        c_sh=shannon_constant(ch),
        c_ex=c_ex_val,
        d_opt=d_opt,
        c_ex1_at_dopt=c_ex1(d_opt, theta, ch),
        c_ex2_at_dopt=c_ex2(d_opt, ch),
    )
    if with_dd:
        sol = c_dd(theta, ch)
        rep.update(c_dd=sol.c_dd, dd_alpha=sol.alpha, dd_beta=sol.beta, dd_d=sol.d)
    return RateReport(**rep)
