"""Randomized test designs and instance generation.

Two bipartite designs are provided.  In the constant column design every
individual joins exactly Delta tests drawn uniformly without replacement.
The spatially coupled design splits individuals and tests into ``ell`` ring
compartments; an individual in V[i] joins Delta/s uniform tests in each of
the s consecutive test blocks F[i], ..., F[i+s-1] (indices wrap), and the
first s individual compartments (the seed) additionally join Delta0 tests
in an extra block F[0] that bootstraps decoding.

Designs are immutable after construction and stored in CSR form on both
sides, so decoders can sweep either tests or individuals with vectorized
reductions.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from io import StringIO

import numpy as np

from .channel import NoiseChannel, transmit_vec

__all__ = [
    "TestDesign",
    "Instance",
    "ScParams",
    "derive_sc_params",
    "sample_ground_truth",
    "build_cc",
    "build_sc",
    "actual_outcomes",
    "displayed_outcomes",
    "make_instance",
    "dump_design",
    "load_design",
    "dump_instance",
    "load_instance",
]


def _sample_distinct_rows(rng, rows, t, M):
    """(rows, t) array, each row t distinct integers from [0, M), uniform.

    Rejection on rows containing duplicates; resampling a whole offending
    row keeps the distribution exactly uniform.  Falls back to per-row
    permutations when t is a large fraction of M.
    """
    if t > M:
        raise ValueError(f"cannot draw {t} distinct tests from {M}")
    if t == M:
        return np.tile(np.arange(M, dtype=np.int64), (rows, 1))
    if t > 0.5 * M:
        out = np.empty((rows, t), dtype=np.int64)
        chunk = max(1, int(2e6) // max(M, 1))
        for lo in range(0, rows, chunk):
            hi = min(rows, lo + chunk)
            keys = rng.random((hi - lo, M))
            out[lo:hi] = np.argpartition(keys, t - 1, axis=1)[:, :t]
        return out
    out = rng.integers(0, M, size=(rows, t), dtype=np.int64)
    if t == 1:
        return out
    for _ in range(200):
        srt = np.sort(out, axis=1)
        bad = (srt[:, 1:] == srt[:, :-1]).any(axis=1)
        nbad = int(bad.sum())
        if nbad == 0:
            return out
        out[bad] = rng.integers(0, M, size=(nbad, t), dtype=np.int64)
    raise RuntimeError("distinct sampling failed to converge")


@dataclass(frozen=True)
class ScParams:
    """Derived parameters of one spatially coupled design."""

    n: int
    theta: float
    c: float
    d: float
    k: int
    ell: int
    s: int
    m: int  # non-seed tests, divisible by ell
    Delta: int  # per-individual degree outside the seed block, divisible by s
    d_eff: float  # k * Delta / m, the density actually realized
    m0: int  # seed tests
    Delta0: int  # seed-individual degree into F[0]
    c_dd: float
    dd_alpha: float
    dd_beta: float
    dd_d: float


def derive_sc_params(n, theta, c, d, dd_solution):
    """Integer parameters for the coupled design at the requested (c, d).

    k = ceil(n^theta); ell = ceil(sqrt(log n)); s = ceil(log log n);
    m is c*k*log(n/k) rounded to a multiple of ell; Delta is d*m/k rounded
    to a multiple of s (at least s).  The seed block gets
    m0 = ceil(2 c_DD (k s / ell) log(n/k)) tests and each seed individual
    joins Delta0 = round(d_DD m0 ell / (k s)) of them, reproducing the
    DD-optimal test density on the seed subproblem.
    """
    if n < 100:
        raise ValueError("need n >= 100")
    if not 0.0 < theta < 1.0 or c <= 0.0 or d <= 0.0:
        raise ValueError("need theta in (0,1) and c, d > 0")
    k = math.ceil(n**theta)
    logn = math.log(n)
    ell = math.ceil(math.sqrt(logn))
    s = math.ceil(math.log(logn))
    lnk = math.log(n / k)
    m = ell * max(1, round(c * k * lnk / ell))
    Delta = s * max(1, round(d * m / (k * s)))
    if m // ell < Delta:
        raise ValueError(
            f"degenerate design at n={n}: block size {m // ell} < degree {Delta}"
        )
    m0 = math.ceil(2.0 * dd_solution.c_dd * (k * s / ell) * lnk)
    Delta0 = max(1, round(dd_solution.d * m0 * ell / (k * s)))
    if Delta0 > m0:
        raise ValueError(f"seed degenerate: Delta0={Delta0} > m0={m0}")
    return ScParams(
        n=n,
        theta=theta,
        c=c,
        d=d,
        k=k,
        ell=ell,
        s=s,
        m=m,
        Delta=Delta,
        d_eff=k * Delta / m,
        m0=m0,
        Delta0=Delta0,
        c_dd=dd_solution.c_dd,
        dd_alpha=dd_solution.alpha,
        dd_beta=dd_solution.beta,
        dd_d=dd_solution.d,
    )


@dataclass(frozen=True)
class TestDesign:
    """Bipartite incidence structure in CSR form on both sides.

    ``test_ptr``/``test_members``: members of each test, sorted per test.
    ``ind_ptr``/``ind_tests``: tests of each individual, sorted.
    For the coupled design, ``comp_of_test`` is 0 on the seed block F[0]
    and i on F[i]; ``comp_of_ind`` is i on V[i].  Constant-column designs
    carry no compartment arrays.
    """

    n: int
    m_total: int
    kind: str  # "cc" | "sc"
    test_ptr: np.ndarray
    test_members: np.ndarray
    ind_ptr: np.ndarray
    ind_tests: np.ndarray
    Delta: int
    comp_of_test: np.ndarray = None
    comp_of_ind: np.ndarray = None
    sc: ScParams = None

    @property
    def n_edges(self):
        return int(self.ind_tests.size)

    def members(self, a):
        return self.test_members[self.test_ptr[a] : self.test_ptr[a + 1]]

    def tests_of(self, x):
        return self.ind_tests[self.ind_ptr[x] : self.ind_ptr[x + 1]]

    def edge_arrays(self):
        """Aligned (individual, test) edge arrays in test-major order."""
        e_test = np.repeat(np.arange(self.m_total), np.diff(self.test_ptr))
        return self.test_members, e_test

    def seed_individuals(self):
        if self.kind != "sc":
            raise ValueError("no seed on a constant-column design")
        return np.flatnonzero(self.comp_of_ind <= self.sc.s)

    def compartment_individuals(self, i):
        return np.flatnonzero(self.comp_of_ind == i)

    def block_tests(self, i):
        return np.flatnonzero(self.comp_of_test == i)


def _csr_from_edges(e_ind, e_test, n, m_total):
    # fused sort key keeps members sorted within each test
    order = np.argsort(e_test * np.int64(n) + e_ind)
    tm = e_ind[order]
    tcounts = np.bincount(e_test, minlength=m_total)
    tptr = np.zeros(m_total + 1, dtype=np.int64)
    np.cumsum(tcounts, out=tptr[1:])
    order2 = np.argsort(e_ind * np.int64(m_total) + e_test)
    it = e_test[order2]
    icounts = np.bincount(e_ind, minlength=n)
    iptr = np.zeros(n + 1, dtype=np.int64)
    np.cumsum(icounts, out=iptr[1:])
    return tptr, tm, iptr, it


def _test_csr_from_ind_csr(iptr, itests, n, m_total):
    """Test-side CSR given the individual-side one (single fused argsort)."""
    e_ind = np.repeat(np.arange(n, dtype=np.int64), np.diff(iptr))
    order = np.argsort(itests * np.int64(n) + e_ind)
    tm = e_ind[order]
    tcounts = np.bincount(itests, minlength=m_total)
    tptr = np.zeros(m_total + 1, dtype=np.int64)
    np.cumsum(tcounts, out=tptr[1:])
    return tptr, tm


def build_cc(n, m, Delta, rng):
    """Constant column design: each individual joins Delta uniform tests."""
    draws = np.sort(_sample_distinct_rows(rng, n, Delta, m), axis=1)
    it = draws.ravel()
    iptr = np.arange(n + 1, dtype=np.int64) * Delta
    tptr, tm = _test_csr_from_ind_csr(iptr, it, n, m)
    return TestDesign(
        n=n,
        m_total=m,
        kind="cc",
        test_ptr=tptr,
        test_members=tm,
        ind_ptr=iptr,
        ind_tests=it,
        Delta=Delta,
    )


def _split_sizes(total, parts):
    base = total // parts
    sizes = np.full(parts, base, dtype=np.int64)
    sizes[: total - base * parts] += 1
    return sizes


def build_sc(params: ScParams, rng):
    """Spatially coupled design per the ring construction.

    Individual compartments are laid out contiguously (ground truths are
    sampled uniformly, so labeling is irrelevant); tests are F[0] first,
    then F[1..ell] in blocks of m/ell.
    """
    n, ell, s = params.n, params.ell, params.s
    per_block = params.m // ell
    dps = params.Delta // s
    m_total = params.m0 + params.m

    vsizes = _split_sizes(n, ell)
    vstart = np.zeros(ell + 1, dtype=np.int64)
    np.cumsum(vsizes, out=vstart[1:])
    comp_of_ind = np.repeat(np.arange(1, ell + 1), vsizes).astype(np.int32)

    comp_of_test = np.zeros(m_total, dtype=np.int32)
    for i in range(1, ell + 1):
        lo = params.m0 + (i - 1) * per_block
        comp_of_test[lo : lo + per_block] = i

    # per-compartment draw matrices, stacked per individual so the
    # individual-side CSR needs no global sort
    seed_rows = int(vstart[s])
    draws0 = _sample_distinct_rows(rng, seed_rows, params.Delta0, params.m0)
    it_parts = []
    for i in range(1, ell + 1):
        rows = int(vsizes[i - 1])
        cols = [
            _sample_distinct_rows(rng, rows, dps, per_block)
            + params.m0
            + ((i + j - 2) % ell) * per_block
            for j in range(1, s + 1)
        ]
        if vstart[i] <= seed_rows:
            cols.append(draws0[vstart[i - 1] : vstart[i]])
        block = np.sort(np.hstack(cols), axis=1)
        it_parts.append(block.ravel())
    it = np.concatenate(it_parts)
    degrees = np.full(n, params.Delta, dtype=np.int64)
    degrees[:seed_rows] += params.Delta0
    iptr = np.zeros(n + 1, dtype=np.int64)
    np.cumsum(degrees, out=iptr[1:])
    tptr, tm = _test_csr_from_ind_csr(iptr, it, n, m_total)
    return TestDesign(
        n=n,
        m_total=m_total,
        kind="sc",
        test_ptr=tptr,
        test_members=tm,
        ind_ptr=iptr,
        ind_tests=it,
        Delta=params.Delta,
        comp_of_test=comp_of_test,
        comp_of_ind=comp_of_ind,
        sc=params,
    )


def design_from_tests(n, memberships):
    """Explicit design from a list of per-test member lists (testing aid)."""
    e_ind = []
    e_test = []
    for a, members in enumerate(memberships):
        for x in members:
            e_ind.append(int(x))
            e_test.append(a)
    e_ind = np.array(e_ind, dtype=np.int64)
    e_test = np.array(e_test, dtype=np.int64)
    m_total = len(memberships)
    tptr, tm, iptr, it = _csr_from_edges(e_ind, e_test, n, m_total)
    degrees = np.diff(iptr)
    return TestDesign(
        n=n,
        m_total=m_total,
        kind="cc",
        test_ptr=tptr,
        test_members=tm,
        ind_ptr=iptr,
        ind_tests=it,
        Delta=int(degrees.max()) if n and degrees.size else 0,
    )


def sample_ground_truth(n, k, rng):
    """Uniform 0/1 vector of Hamming weight k."""
    if not 0 <= k <= n:
        raise ValueError(f"k={k} outside [0, {n}]")
    sigma = np.zeros(n, dtype=np.uint8)
    if k:
        sigma[rng.choice(n, size=k, replace=False)] = 1
    return sigma


def actual_outcomes(design: TestDesign, sigma):
    """Noiseless per-test OR of the ground truth."""
    if sigma.shape[0] != design.n:
        raise ValueError("sigma length mismatch")
    e_ind, e_test = design.edge_arrays()
    pos = np.bincount(e_test, weights=sigma[e_ind].astype(float), minlength=design.m_total)
    return (pos > 0).astype(np.uint8)


def displayed_outcomes(actual, ch: NoiseChannel, rng):
    """Independent channel noise applied to each actual outcome."""
    return transmit_vec(ch, actual, rng)


@dataclass(frozen=True)
class Instance:
    """Ground truth plus actual and displayed outcomes for one experiment."""

    sigma: np.ndarray
    actual: np.ndarray
    displayed: np.ndarray

    def __post_init__(self):
        if self.actual.shape != self.displayed.shape:
            raise ValueError("outcome length mismatch")


def make_instance(design: TestDesign, k, ch: NoiseChannel, rng_sigma, rng_noise):
    sigma = sample_ground_truth(design.n, k, rng_sigma)
    actual = actual_outcomes(design, sigma)
    displayed = displayed_outcomes(actual, ch, rng_noise)
    return Instance(sigma=sigma, actual=actual, displayed=displayed)


# ---------------------------------------------------------------------------
# line-oriented serialization (debugging / golden tests)

def dump_design(design: TestDesign, fh):
    fh.write(f"{design.n} {design.m_total} {design.kind}\n")
    if design.kind == "sc":
        p = design.sc
        fh.write(
            f"meta {p.theta!r} {p.c!r} {p.d!r} {p.k} {p.ell} {p.s} {p.m} "
            f"{p.Delta} {p.m0} {p.Delta0} {p.c_dd!r} {p.dd_alpha!r} "
            f"{p.dd_beta!r} {p.dd_d!r}\n"
        )
    for a in range(design.m_total):
        comp = -1 if design.comp_of_test is None else int(design.comp_of_test[a])
        members = " ".join(str(x) for x in design.members(a))
        fh.write(f"{a} {comp} {members}\n".replace(" \n", "\n"))


def load_design(fh):
    header = fh.readline().split()
    n, m_total, kind = int(header[0]), int(header[1]), header[2]
    params = None
    if kind == "sc":
        t = fh.readline().split()[1:]
        params = ScParams(
            n=n,
            theta=float(t[0]),
            c=float(t[1]),
            d=float(t[2]),
            k=int(t[3]),
            ell=int(t[4]),
            s=int(t[5]),
            m=int(t[6]),
            Delta=int(t[7]),
            d_eff=int(t[3]) * int(t[7]) / int(t[6]),
            m0=int(t[8]),
            Delta0=int(t[9]),
            c_dd=float(t[10]),
            dd_alpha=float(t[11]),
            dd_beta=float(t[12]),
            dd_d=float(t[13]),
        )
    e_ind = []
    e_test = []
    comp_of_test = np.zeros(m_total, dtype=np.int32)
    for line in fh:
        parts = line.split()
        if not parts:
            continue
        a = int(parts[0])
        comp_of_test[a] = int(parts[1])
        for x in parts[2:]:
            e_ind.append(int(x))
            e_test.append(a)
    e_ind = np.array(e_ind, dtype=np.int64)
    e_test = np.array(e_test, dtype=np.int64)
    tptr, tm, iptr, it = _csr_from_edges(e_ind, e_test, n, m_total)
    degrees = np.diff(iptr)
    if kind == "sc":
        vsizes = _split_sizes(n, params.ell)
        comp_of_ind = np.repeat(np.arange(1, params.ell + 1), vsizes).astype(np.int32)
        Delta = params.Delta
    else:
        comp_of_ind = None
        comp_of_test = None
        Delta = int(degrees.max()) if n else 0
    return TestDesign(
        n=n,
        m_total=m_total,
        kind=kind,
        test_ptr=tptr,
        test_members=tm,
        ind_ptr=iptr,
        ind_tests=it,
        Delta=Delta,
        comp_of_test=comp_of_test,
        comp_of_ind=comp_of_ind,
        sc=params,
    )


def _bits_to_hex(bits):
    return np.packbits(np.asarray(bits, dtype=np.uint8), bitorder="little").tobytes().hex()


def _hex_to_bits(hexstr, length):
    raw = np.frombuffer(bytes.fromhex(hexstr), dtype=np.uint8)
    return np.unpackbits(raw, bitorder="little")[:length].astype(np.uint8)


def dump_instance(inst: Instance, fh):
    fh.write(f"sigma {inst.sigma.size} {_bits_to_hex(inst.sigma)}\n")
    fh.write(f"actual {inst.actual.size} {_bits_to_hex(inst.actual)}\n")
    fh.write(f"displayed {inst.displayed.size} {_bits_to_hex(inst.displayed)}\n")


def load_instance(fh):
    rows = {}
    for _ in range(3):
        name, length, hx = fh.readline().split()
        rows[name] = _hex_to_bits(hx, int(length))
    return Instance(sigma=rows["sigma"], actual=rows["actual"], displayed=rows["displayed"])


def design_to_text(design: TestDesign):
    buf = StringIO()
    dump_design(design, buf)
    return buf.getvalue()
