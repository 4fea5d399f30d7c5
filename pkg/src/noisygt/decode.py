"""Decoders: DD, SPARC, SPEX, reference BP, and the exhaustive posterior.

Labels live in int8 arrays: 0 healthy, 1 infected, -1 undetermined.  The
combinatorial decoders never return undetermined labels; -1 only appears
in intermediate SPARC states.

All hot loops are vectorized over edges of the bipartite design: a test's
diagnosed-infected count, an individual's untainted-test count and the
per-compartment score sums are all O(edges) bincounts.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field

import numpy as np

from .channel import NoiseChannel
from .design import TestDesign
from .thresholds import ThresholdSpec

__all__ = [
    "UNDETERMINED",
    "dd_decode",
    "sparc_weights",
    "expected_scores",
    "plausible_set",
    "sparc_decode",
    "SparcResult",
    "untainted_counts",
    "untainted_counts_all",
    "spex_decode",
    "SpexResult",
    "bp_decode",
    "BpResult",
    "exhaustive_posterior",
    "PosteriorTable",
    "hamming_error",
]

UNDETERMINED = np.int8(-1)


def hamming_error(tau, sigma):
    """Number of coordinates where the estimate disagrees with the truth."""
    tau = np.asarray(tau)
    sigma = np.asarray(sigma)
    if tau.shape != sigma.shape:
        raise ValueError("length mismatch")
    if (tau == UNDETERMINED).any():
        raise ValueError("undetermined labels in final estimate")
    return int(np.count_nonzero(tau != sigma))


# ---------------------------------------------------------------------------
# DD

def dd_decode(design: TestDesign, displayed, alpha, beta, Delta,
              individuals=None, tests=None):
    """Two-pass DD: rule out by negative-test counts, rule in by solo
    positives.

    Pass 1 declares uninfected every individual appearing in at least
    alpha*Delta negatively displayed tests.  Pass 2 declares infected every
    remaining individual with at least beta*Delta positively displayed
    tests whose other members were all ruled out in pass 1.  Everyone else
    is healthy.  ``individuals``/``tests`` restrict the decoder to a
    subdesign (used for the seed); labels outside stay undetermined.
    """
    n = design.n
    x_arr = np.repeat(np.arange(n, dtype=np.int64), np.diff(design.ind_ptr))
    a_arr = design.ind_tests

    ind_mask = np.zeros(n, dtype=bool)
    if individuals is None:
        ind_mask[:] = True
    else:
        ind_mask[individuals] = True
    test_mask = np.zeros(design.m_total, dtype=bool)
    if tests is None:
        test_mask[:] = True
    else:
        test_mask[tests] = True

    valid = ind_mask[x_arr] & test_mask[a_arr]
    disp = np.asarray(displayed)

    negcnt = np.bincount(
        x_arr[valid & (disp[a_arr] == 0)], minlength=n
    )
    declared0 = ind_mask & (negcnt >= alpha * Delta - 1e-9)

    undecl = ind_mask & ~declared0
    u_per_test = np.bincount(
        a_arr[valid], weights=undecl[x_arr[valid]].astype(float),
        minlength=design.m_total,
    )
    solo = (
        valid
        & (disp[a_arr] == 1)
        & undecl[x_arr]
        & (np.abs(u_per_test[a_arr] - 1.0) < 0.5)
    )
    poscnt = np.bincount(x_arr[solo], minlength=n)
    infected = undecl & (poscnt >= beta * Delta - 1e-9)

    tau = np.full(n, UNDETERMINED, dtype=np.int8)
    tau[ind_mask] = 0
    tau[infected] = 1
    return tau


# ---------------------------------------------------------------------------
# SPARC

def sparc_weights(ch: NoiseChannel, d, s):
    """Per-block message weights (w_j^+, w_j^-) for j = 1..s.

    w_j^+ = log(p11 / (p11 + (p01 - p11) exp(-d j / s)));
    w_j^- = -log(p10 / (p10 + (p00 - p10) exp(-d j / s))), infinite when
    p10 = 0 (a negatively displayed informative test then certifies health).
    """
    if d <= 0 or s < 1:
        raise ValueError("need d > 0 and s >= 1")
    js = np.arange(1, s + 1, dtype=float)
    e = np.exp(-d * js / s)
    w_plus = np.log(ch.p11 / (ch.p11 + (ch.p01 - ch.p11) * e))
    if ch.p10 > 0.0:
        w_minus = -np.log(ch.p10 / (ch.p10 + (ch.p00 - ch.p10) * e))
    else:
        w_minus = np.full(s, math.inf)
    return w_plus, w_minus


def expected_scores(ch: NoiseChannel, Delta, d, s, weights):
    """Conditional expectations (W+, W-) of an infected individual's scores.

    An infected individual has Delta/s tests per block; a block-j test is
    informative with probability exp(d (j-s)/s) and displays +/- with
    probability p11/p10, so

        W+ = p11 (Delta/s) sum_j exp(d (j-s)/s) w_j^+,

    and likewise for W- with p10 (zero when p10 = 0, where w^- is infinite
    but no negatively displayed informative test exists in expectation).
    """
    w_plus, w_minus = weights
    s = int(s)
    js = np.arange(1, s + 1, dtype=float)
    e = np.exp(d * (js - s) / s)
    w_pos = ch.p11 * (Delta / s) * float(np.sum(e * w_plus))
    if ch.p10 > 0.0:
        w_neg = ch.p10 * (Delta / s) * float(np.sum(e * w_minus))
    else:
        w_neg = 0.0
    return w_pos, w_neg


def _default_zeta(n):
    # the asymptotic 1/logloglog(n) exceeds 1 for any practical n
    return min(max(1.0 / math.log(math.log(math.log(n))), 0.05), 0.5)


def _vplus_tolerance(n, multiplier=1.0):
    return multiplier * math.log(n) ** (4.0 / 7.0)


def _block_weight_tables(ch: NoiseChannel, d, ell, s):
    """Weights and informative-test factors per (compartment, block offset).

    When compartment i is processed, the test block for offset j recruits
    from s compartments of which nu_d(i, j) = (s - j) + max(0, i + j - 1 - ell)
    are already diagnosed (ring wraparound puts seed compartments behind the
    last blocks).  The message weight uses the number of undiagnosed feeder
    compartments nu_u = s - nu_d and the informative-test probability is
    exp(-d nu_d / s); away from the wraparound this reduces to the j-indexed
    weights of ``sparc_weights``.
    """
    w_plus = np.zeros((ell + 1, s + 1))
    w_minus = np.zeros((ell + 1, s + 1))
    inf_factor = np.zeros((ell + 1, s + 1))
    for i in range(1, ell + 1):
        for j in range(1, s + 1):
            nu_d = (s - j) + max(0, i + j - 1 - ell)
            nu_u = s - nu_d
            e_u = math.exp(-d * nu_u / s)
            w_plus[i, j] = math.log(ch.p11 / (ch.p11 + (ch.p01 - ch.p11) * e_u))
            if ch.p10 > 0.0:
                w_minus[i, j] = -math.log(
                    ch.p10 / (ch.p10 + (ch.p00 - ch.p10) * e_u)
                )
            else:
                w_minus[i, j] = math.inf
            inf_factor[i, j] = math.exp(-d * nu_d / s)
    return w_plus, w_minus, inf_factor


def plausible_set(design: TestDesign, displayed, ch: NoiseChannel, x,
                  multiplier=1.0):
    """Whether x's per-block positive-display counts look infected.

    True iff sum_j | |tests of x in F+[i+j-1]| - Delta p11 / s | stays
    within the tolerance log(n)^(4/7) * multiplier.
    """
    p = design.sc
    disp = np.asarray(displayed)
    i = int(design.comp_of_ind[x])
    if i <= p.s:
        raise ValueError("plausibility filter applies to non-seed individuals")
    tests = design.tests_of(x)
    blocks = design.comp_of_test[tests]
    tol = _vplus_tolerance(design.n, multiplier)
    dev = 0.0
    for j in range(1, p.s + 1):
        block = (i + j - 2) % p.ell + 1
        cnt = int(np.sum((blocks == block) & (disp[tests] == 1)))
        dev += abs(cnt - p.Delta * ch.p11 / p.s)
    return dev <= tol


def sparc_decode(design: TestDesign, displayed, ch: NoiseChannel,
                 zeta=None, vplus_multiplier=1.0, seed_thresholds=None):
    """Seeded compartment-by-compartment score decoder.

    The seed compartments are decoded by DD on the extra test block; the
    remaining compartments are processed in ring order, classifying each
    individual by comparing its informative-test score sums against the
    expected scores of an infected individual.
    """
    if design.kind != "sc":
        raise ValueError("sparc_decode requires a spatially coupled design")
    p = design.sc
    n, ell, s, Delta = design.n, p.ell, p.s, p.Delta
    d = p.d_eff
    disp = np.asarray(displayed)
    if zeta is None:
        zeta = _default_zeta(n)
    alpha, beta = (
        seed_thresholds if seed_thresholds is not None else (p.dd_alpha, p.dd_beta)
    )

    tau = np.full(n, UNDETERMINED, dtype=np.int8)
    seed = design.seed_individuals()
    seed_tests = design.block_tests(0)
    tau_seed = dd_decode(
        design, disp, alpha, beta, p.Delta0, individuals=seed, tests=seed_tests
    )
    tau[seed] = tau_seed[seed]
    assert not (tau[seed] == UNDETERMINED).any()

    w_plus, w_minus, inf_factor = _block_weight_tables(ch, d, ell, s)
    tol = _vplus_tolerance(n, vplus_multiplier)

    # per-test count of members already diagnosed infected
    diag_inf = np.zeros(design.m_total, dtype=np.int64)
    e_x = np.repeat(np.arange(n, dtype=np.int64), np.diff(design.ind_ptr))
    is_seed_inf = (tau[e_x] == 1)
    np.add.at(diag_inf, design.ind_tests[is_seed_inf], 1)

    vsizes = np.bincount(design.comp_of_ind, minlength=ell + 1)
    vstart = np.zeros(ell + 2, dtype=np.int64)
    np.cumsum(vsizes, out=vstart[1:])

    for i in range(s + 1, ell + 1):
        lo, hi = int(vstart[i]), int(vstart[i + 1])
        rows = hi - lo
        tests = design.ind_tests[design.ind_ptr[lo] : design.ind_ptr[hi]].reshape(
            rows, Delta
        )
        blocks = design.comp_of_test[tests]
        jmat = (blocks - i) % ell + 1  # block offset 1..s
        informative = diag_inf[tests] == 0
        pos = disp[tests] == 1

        wp = w_plus[i, jmat]
        score_pos = np.where(informative & pos, wp, 0.0).sum(axis=1)
        if ch.p10 > 0.0:
            wm = w_minus[i, jmat]
            score_neg = np.where(informative & ~pos, wm, 0.0).sum(axis=1)
        else:
            score_neg = np.where(informative & ~pos, 1.0, 0.0).sum(axis=1)

        # expected scores of an infected individual in this compartment
        w_exp_pos = ch.p11 * (Delta / s) * float(
            np.sum(inf_factor[i, 1:] * w_plus[i, 1:])
        )
        if ch.p10 > 0.0:
            w_exp_neg = ch.p10 * (Delta / s) * float(
                np.sum(inf_factor[i, 1:] * w_minus[i, 1:])
            )
        else:
            w_exp_neg = 0.0

        dev = np.zeros(rows)
        for j in range(1, s + 1):
            cnt = ((jmat == j) & pos).sum(axis=1)
            dev += np.abs(cnt - Delta * ch.p11 / s)
        in_vplus = dev <= tol

        healthy = ~in_vplus | (score_pos < (1.0 - zeta) * w_exp_pos)
        if ch.p10 > 0.0:
            healthy |= score_neg > (1.0 + zeta) * w_exp_neg
        else:
            healthy |= score_neg > 0
        comp_tau = np.where(healthy, 0, 1).astype(np.int8)
        tau[lo:hi] = comp_tau

        new_inf = lo + np.flatnonzero(comp_tau == 1)
        if new_inf.size:
            newly = tests[comp_tau == 1].ravel()
            np.add.at(diag_inf, newly, 1)

    return SparcResult(labels=tau, zeta=zeta, vplus_tolerance=tol)


@dataclass(frozen=True)
class SparcResult:
    labels: np.ndarray
    zeta: float
    vplus_tolerance: float


# ---------------------------------------------------------------------------
# SPEX

def untainted_counts_all(design: TestDesign, displayed, tau):
    """(Y, Z) for every individual: untainted / positively displayed
    untainted non-seed tests, where untainted means every other member
    carries label 0 under tau."""
    disp = np.asarray(displayed)
    tau_int = np.asarray(tau, dtype=np.int64)
    if (tau_int < 0).any():
        raise ValueError("tau must be fully determined")
    n = design.n
    e_x = np.repeat(np.arange(n, dtype=np.int64), np.diff(design.ind_ptr))
    e_a = design.ind_tests
    inf_per_test = np.bincount(
        e_a, weights=tau_int[e_x].astype(float), minlength=design.m_total
    )
    if design.kind == "sc":
        nonseed = design.comp_of_test[e_a] != 0
    else:
        nonseed = np.ones(e_a.size, dtype=bool)
    untainted = nonseed & (inf_per_test[e_a] - tau_int[e_x] == 0)
    y = np.bincount(e_x[untainted], minlength=n)
    z = np.bincount(e_x[untainted & (disp[e_a] == 1)], minlength=n)
    return y, z


def untainted_counts(design: TestDesign, displayed, tau, x):
    """(Y_x, Z_x) for a single individual (reference implementation)."""
    disp = np.asarray(displayed)
    tau = np.asarray(tau)
    y = z = 0
    for a in design.tests_of(x):
        if design.kind == "sc" and design.comp_of_test[a] == 0:
            continue
        others = design.members(a)
        if any(tau[v] == 1 for v in others if v != x):
            continue
        y += 1
        if disp[a] == 1:
            z += 1
    return y, z


def spex_decode(design: TestDesign, displayed, ch: NoiseChannel,
                spec: ThresholdSpec, tau_init=None, max_rounds=None, **sparc_kw):
    """SPARC followed by iterated untainted-count thresholding.

    Each round recomputes, for every non-seed individual, the number Y of
    untainted tests and the number Z of positively displayed untainted
    tests, then relabels x infected iff Y/Delta lies in the certified
    interval and the positive fraction Z/Y clears the step function, i.e.
    Z > Y * Zfun(Y/Delta).  Seed labels stay frozen.  Runs ceil(log n)
    rounds with an early exit at a fixed point.
    """
    if design.kind != "sc":
        raise ValueError("spex_decode requires a spatially coupled design")
    p = design.sc
    n, Delta = design.n, p.Delta
    if tau_init is None:
        tau = sparc_decode(design, displayed, ch, **sparc_kw).labels.copy()
    else:
        tau = np.asarray(tau_init, dtype=np.int8).copy()
    seed = design.seed_individuals()
    seed_mask = np.zeros(n, dtype=bool)
    seed_mask[seed] = True

    rounds = max_rounds if max_rounds is not None else math.ceil(math.log(n))
    flo, fhi = float(spec.lo), float(spec.hi)
    used = 0
    trajectory = [tau.copy()]
    for _ in range(rounds):
        y, z = untainted_counts_all(design, displayed, tau)
        yfrac = y / Delta
        thr = spec.value_at_vec(yfrac)
        new = ((yfrac > flo) & (yfrac < fhi) & (z > thr * y)).astype(np.int8)
        new[seed_mask] = tau[seed_mask]
        used += 1
        trajectory.append(new.copy())
        if (new == tau).all():
            tau = new
            break
        tau = new
    return SpexResult(labels=tau, rounds_used=used, trajectory=trajectory)


@dataclass(frozen=True)
class SpexResult:
    labels: np.ndarray
    rounds_used: int
    trajectory: list = field(default_factory=list, repr=False)

    def errors_per_round(self, sigma, rounds=None):
        """Hamming error of each round's estimate; the last value is padded
        out to ``rounds`` after an early fixed-point exit."""
        errs = [hamming_error(t, sigma) for t in self.trajectory]
        if rounds is not None:
            errs = errs + [errs[-1]] * (rounds + 1 - len(errs))
        return errs


# ---------------------------------------------------------------------------
# Belief propagation

@dataclass(frozen=True)
class BpResult:
    marginals: np.ndarray  # log-likelihood ratios eta_x
    labels: np.ndarray  # top-k estimate
    rounds_used: int
    clamp_events: int


_CLAMP = 500.0


def bp_decode(design: TestDesign, displayed, ch: NoiseChannel, k,
              t_max=20, prior_mode="product-bernoulli", tol=1e-9):
    """Sum-product BP on log-likelihood ratios with a Bernoulli(k/n) prior.

    Factor messages follow the channel-weighted OR factors; variable
    messages add the prior log odds log(k/(n-k)).  Messages are clamped to
    [-500, 500] (clamps counted, not hidden).  After t_max rounds (or an
    early exit when the largest message change drops below ``tol``) the k
    individuals with the largest marginal LLR are declared infected, ties
    broken toward the lower index.
    """
    if prior_mode != "product-bernoulli":
        raise ValueError(f"unsupported prior mode {prior_mode!r}")
    if t_max < 0:
        raise ValueError("t_max >= 0 required")
    n, m = design.n, design.m_total
    disp = np.asarray(displayed)

    # ind-major edges and the permutation into test-major order
    deg = np.diff(design.ind_ptr)
    e_x = np.repeat(np.arange(n, dtype=np.int64), deg)
    e_a = design.ind_tests

    prior = math.log(k / (n - k)) if 0 < k < n else (-_CLAMP if k == 0 else _CLAMP)
    eta = np.full(e_x.size, prior)  # eta_{x->a}, ind-major
    clamps = 0
    pos = disp == 1
    m_edge = np.zeros_like(eta)
    rounds = 0
    for t in range(t_max):
        rounds = t + 1
        # factor pass: log mu0 = -log(1 + e^eta), summed per test
        logmu0 = -np.logaddexp(0.0, eta)
        sums = np.bincount(e_a, weights=logmu0, minlength=m)
        # product over the partners' mu0; float roundoff can push it above 1
        prod_excl = np.minimum(np.exp(sums[e_a] - logmu0), 1.0)
        if ch.p10 > 0.0:
            neg_msg = -np.log1p((ch.p00 / ch.p10 - 1.0) * prod_excl)
        else:
            neg_msg = np.full_like(prod_excl, -math.inf)
        if ch.p01 > 0.0:
            pos_msg = -np.log1p((ch.p01 / ch.p11 - 1.0) * prod_excl)
        else:
            with np.errstate(divide="ignore"):
                pos_msg = -np.log1p(-prod_excl)
        msg = np.where(pos[e_a], pos_msg, neg_msg)
        clipped = np.clip(msg, -_CLAMP, _CLAMP)
        clamps += int(np.count_nonzero(clipped != msg))
        # variable pass
        svar = np.bincount(e_x, weights=clipped, minlength=n)
        new_eta = prior + svar[e_x] - clipped
        new_eta = np.clip(new_eta, -_CLAMP, _CLAMP)
        delta = float(np.max(np.abs(new_eta - eta))) if eta.size else 0.0
        eta = new_eta
        m_edge = clipped
        if delta < tol:
            break

    marg = prior + np.bincount(e_x, weights=m_edge, minlength=n)
    order = np.lexsort((np.arange(n), -marg))
    labels = np.zeros(n, dtype=np.int8)
    labels[order[:k]] = 1
    return BpResult(marginals=marg, labels=labels, rounds_used=rounds,
                    clamp_events=clamps)


# ---------------------------------------------------------------------------
# Exhaustive posterior

@dataclass(frozen=True)
class PosteriorTable:
    """Exact posterior over ground truths for small instances."""

    mode: str  # "hard-k" | "product-bernoulli"
    n: int
    probs: dict  # bitmask -> posterior probability
    log_partition: float

    def prob(self, mask):
        return self.probs.get(mask, 0.0)

    def marginals(self):
        marg = np.zeros(self.n)
        for mask, pr in self.probs.items():
            for x in range(self.n):
                if mask >> x & 1:
                    marg[x] += pr
        return marg

    def map_estimate(self):
        best = min(((-pr, mask) for mask, pr in self.probs.items()))
        return best[1]


_GUARD = 10**7


def _log_weight(design: TestDesign, disp, members_cache, ch, mask):
    lw = 0.0
    for a in range(design.m_total):
        hit = bool(mask & members_cache[a])
        if disp[a] == 1:
            pa = ch.p11 if hit else ch.p01
        else:
            pa = ch.p10 if hit else ch.p00
        if pa == 0.0:
            return -math.inf
        lw += math.log(pa)
    return lw


def exhaustive_posterior(design: TestDesign, displayed, ch: NoiseChannel, k,
                         prior_mode="hard-k"):
    """Exact posterior by enumeration; guard C(n, k) (or 2^n) <= 1e7.

    hard-k mode enumerates weight-k vectors with the uniform prior the
    channel model posits; product mode enumerates all 2^n vectors under an
    independent Bernoulli(k/n) prior (the BP reference).
    """
    n = design.n
    disp = np.asarray(displayed)
    members_cache = []
    for a in range(design.m_total):
        mask = 0
        for x in design.members(a):
            mask |= 1 << int(x)
        members_cache.append(mask)

    logs = {}
    if prior_mode == "hard-k":
        if math.comb(n, k) > _GUARD:
            raise ValueError(f"C({n},{k}) exceeds enumeration guard {_GUARD}")
        for combo in itertools.combinations(range(n), k):
            mask = 0
            for x in combo:
                mask |= 1 << x
            logs[mask] = _log_weight(design, disp, members_cache, ch, mask)
    elif prior_mode == "product-bernoulli":
        if 2**n > _GUARD:
            raise ValueError(f"2^{n} exceeds enumeration guard {_GUARD}")
        q = k / n
        if not 0.0 < q < 1.0:
            raise ValueError("product prior needs 0 < k < n")
        lq, l1q = math.log(q), math.log(1.0 - q)
        for mask in range(2**n):
            w = mask.bit_count()
            logs[mask] = (
                w * lq + (n - w) * l1q
                + _log_weight(design, disp, members_cache, ch, mask)
            )
    else:
        raise ValueError(f"unknown prior mode {prior_mode!r}")

    finite = [v for v in logs.values() if v > -math.inf]
    if not finite:
        raise ValueError("posterior has empty support")
    top = max(finite)
    z = sum(math.exp(v - top) for v in finite)
    log_partition = top + math.log(z)
    probs = {
        mask: math.exp(v - log_partition)
        for mask, v in logs.items()
        if v > -math.inf
    }
    return PosteriorTable(mode=prior_mode, n=n, probs=probs,
                          log_partition=log_partition)
