import math

import numpy as np
import pytest

from noisygt.channel import NoiseChannel
from noisygt.decode import (
    bp_decode,
    dd_decode,
    exhaustive_posterior,
    expected_scores,
    hamming_error,
    plausible_set,
    sparc_decode,
    sparc_weights,
    spex_decode,
    untainted_counts,
    untainted_counts_all,
)
from noisygt import design as design_mod
from noisygt.design import (
    actual_outcomes,
    build_sc,
    derive_sc_params,
    design_from_tests,
    displayed_outcomes,
    make_instance,
    sample_ground_truth,
)
from noisygt.rates import DdSolution, c_dd, c_exact
from noisygt.thresholds import build_threshold

LOG2 = math.log(2.0)
NOISELESS = NoiseChannel.noiseless()


def random_small_instance(rng, n=12, k=3, m=8, ch=None):
    ch = ch or NoiseChannel(0.95, 0.05, 0.1, 0.9)
    tests = [
        sorted(rng.choice(n, size=rng.integers(1, max(2, n // 2)), replace=False).tolist())
        for _ in range(m)
    ]
    ds = design_from_tests(n, tests)
    sigma = sample_ground_truth(n, k, rng)
    disp = displayed_outcomes(actual_outcomes(ds, sigma), ch, rng)
    return ds, sigma, disp


class TestHamming:
    def test_examples(self):
        sig = np.array([0, 1, 1, 0], dtype=np.int8)
        assert hamming_error(sig, sig) == 0
        assert hamming_error(1 - sig, sig) == 4
        rng = np.random.default_rng(0)
        a = rng.integers(0, 2, 10).astype(np.int8)
        b = rng.integers(0, 2, 10).astype(np.int8)
        assert hamming_error(a, b) == int(np.bitwise_xor(a, b).sum())

    def test_rejects_undetermined(self):
        with pytest.raises(ValueError):
            hamming_error(np.array([0, -1], dtype=np.int8), np.array([0, 1], dtype=np.int8))


class TestDD:
    def test_two_singleton_tests(self):
        ds = design_from_tests(2, [[0], [1]])
        disp = np.array([1, 0], dtype=np.uint8)
        tau = dd_decode(ds, disp, alpha=1.0, beta=1.0, Delta=1)
        assert tau.tolist() == [1, 0]

    def test_all_negative_gives_all_zero(self):
        rng = np.random.default_rng(3)
        ds, sigma, _ = random_small_instance(rng)
        disp = np.zeros(ds.m_total, dtype=np.uint8)
        tau = dd_decode(ds, disp, alpha=0.25, beta=0.25, Delta=4)
        assert (tau == 0).all()

    def test_matches_map_on_point_mass(self):
        # noiseless plentiful-test instances where the posterior is a point
        # mass must be solved exactly by DD
        rng = np.random.default_rng(4)
        checked = 0
        while checked < 10:
            ds, sigma, disp = random_small_instance(rng, n=6, k=1, m=8, ch=NOISELESS)
            deg = np.diff(ds.ind_ptr)
            if deg.min() == 0:
                continue
            tab = exhaustive_posterior(ds, disp, NOISELESS, 1, "hard-k")
            mask, prob = tab.map_estimate(), tab.prob(tab.map_estimate())
            if prob < 0.999:
                continue
            tau = dd_decode(ds, disp, alpha=1e-6, beta=1e-6, Delta=1)
            got = sum(1 << x for x in np.flatnonzero(tau == 1))
            assert got == mask
            checked += 1

    def test_restriction(self):
        ds = design_from_tests(4, [[0, 1], [2, 3], [0], [2]])
        disp = np.array([1, 1, 1, 0], dtype=np.uint8)
        tau = dd_decode(ds, disp, 0.5, 0.5, 1, individuals=[0, 1], tests=[0, 2])
        assert tau[2] == -1 and tau[3] == -1
        assert tau[0] == 1  # solo positive test [0]

    def test_monotone_in_negative_evidence(self):
        # adding a negatively displayed test containing x never flips x to 1
        rng = np.random.default_rng(5)
        for _ in range(20):
            n = 10
            tests = [
                sorted(rng.choice(n, size=rng.integers(1, 5), replace=False).tolist())
                for _ in range(6)
            ]
            ds = design_from_tests(n, tests)
            sigma = sample_ground_truth(n, 2, rng)
            disp = actual_outcomes(ds, sigma)  # noiseless display
            tau1 = dd_decode(ds, disp, 0.3, 0.3, 3)
            x = int(rng.integers(0, n))
            ds2 = design_from_tests(n, tests + [[x]])
            disp2 = np.concatenate([disp, [0]]).astype(np.uint8)
            tau2 = dd_decode(ds2, disp2, 0.3, 0.3, 3)
            if tau1[x] == 0:
                assert tau2[x] == 0


class TestSparcPieces:
    def test_weights_noiseless(self):
        d, s = LOG2, 3
        wp, wm = sparc_weights(NOISELESS, d, s)
        for j in range(1, s + 1):
            assert wp[j - 1] == pytest.approx(-math.log1p(-math.exp(-d * j / s)), rel=1e-12)
        assert np.isinf(wm).all()
        wp1, _ = sparc_weights(NOISELESS, LOG2, 1)
        assert wp1[0] == pytest.approx(LOG2, rel=1e-12)

    def test_weights_noisy_finite_nonneg(self):
        wp, wm = sparc_weights(NoiseChannel.bsc(0.05), 0.9, 4)
        assert (wp >= 0).all() and (wm >= 0).all()
        assert np.isfinite(wp).all() and np.isfinite(wm).all()

    def test_expected_scores(self):
        ch = NOISELESS
        w = sparc_weights(ch, LOG2, 1)
        wp, wm = expected_scores(ch, 1, LOG2, 1, w)
        assert wp == pytest.approx(LOG2, rel=1e-12)
        assert wm == 0.0
        # linearity in Delta
        ch2 = NoiseChannel.bsc(0.1)
        w2 = sparc_weights(ch2, 0.8, 3)
        a1 = expected_scores(ch2, 6, 0.8, 3, w2)
        a2 = expected_scores(ch2, 12, 0.8, 3, w2)
        assert a2[0] == pytest.approx(2 * a1[0], rel=1e-12)
        assert a2[1] == pytest.approx(2 * a1[1], rel=1e-12)

    def test_plausible_set(self):
        # need ell > s so a non-seed compartment exists
        dd = DdSolution(4.0, 0.2, 0.1, 0.7)
        p = derive_sc_params(10**4, 0.5, 2.0, LOG2, dd)
        ds = build_sc(p, np.random.default_rng(31))
        x = int(np.flatnonzero(ds.comp_of_ind == p.ell)[0])
        all_pos = np.ones(ds.m_total, dtype=np.uint8)
        assert plausible_set(ds, all_pos, NOISELESS, x)
        none_pos = np.zeros(ds.m_total, dtype=np.uint8)
        # zero positives deviates by Delta * p11 > tolerance at these sizes
        assert not plausible_set(ds, none_pos, NOISELESS, x)


class TestUntainted:
    def test_tau_all_one_vs_all_zero(self):
        rng = np.random.default_rng(41)
        ds, sigma, disp = random_small_instance(rng)
        multi = np.array([ds.members(a).size >= 2 for a in range(ds.m_total)])
        y1, _ = untainted_counts_all(ds, disp, np.ones(ds.n, dtype=np.int8))
        for x in range(ds.n):
            touching_multi = [a for a in ds.tests_of(x) if multi[a]]
            assert y1[x] == len(ds.tests_of(x)) - len(touching_multi)
        y0, z0 = untainted_counts_all(ds, disp, np.zeros(ds.n, dtype=np.int8))
        for x in range(ds.n):
            assert y0[x] == len(ds.tests_of(x))
        assert (z0 <= y0).all()

    def test_matches_scalar_scan(self):
        rng = np.random.default_rng(42)
        for _ in range(10):
            ds, sigma, disp = random_small_instance(rng)
            tau = rng.integers(0, 2, ds.n).astype(np.int8)
            y, z = untainted_counts_all(ds, disp, tau)
            for x in range(ds.n):
                ys, zs = untainted_counts(ds, disp, tau, x)
                assert (y[x], z[x]) == (ys, zs)
            assert (z <= y).all()

    def test_monotone_in_ones(self):
        rng = np.random.default_rng(43)
        ds, sigma, disp = random_small_instance(rng)
        tau = np.zeros(ds.n, dtype=np.int8)
        y_prev, _ = untainted_counts_all(ds, disp, tau)
        order = rng.permutation(ds.n)
        for x in order[:6]:
            tau[x] = 1
            y_new, _ = untainted_counts_all(ds, disp, tau)
            mask = np.arange(ds.n) != x
            assert (y_new[mask] <= y_prev[mask]).all()
            y_prev = y_new


_FIXTURE_CACHE = {}


def _sc_fixture(n=10**4, theta=0.5, ch=NoiseChannel.bsc(0.01), c_mult=1.6, seed=7):
    # n must keep ell > s so the score phase actually runs
    key = (n, theta, str(ch), c_mult, seed)
    if key not in _FIXTURE_CACHE:
        cex, dopt = c_exact(theta, ch)
        sol = c_dd(theta, ch)
        p = derive_sc_params(n, theta, c_mult * cex, dopt, sol)
        ds = build_sc(p, np.random.default_rng(seed))
        inst = make_instance(
            ds, p.k, ch, np.random.default_rng(seed + 1), np.random.default_rng(seed + 2)
        )
        _FIXTURE_CACHE[key] = (p, ds, inst, ch)
    return _FIXTURE_CACHE[key]


class TestSparc:
    def test_no_infection_no_positives(self):
        dd = DdSolution(4.0, 0.2, 0.1, 0.7)
        p = derive_sc_params(1000, 0.5, 2.5, LOG2, dd)
        ds = build_sc(p, np.random.default_rng(51))
        disp = np.zeros(ds.m_total, dtype=np.uint8)
        res = sparc_decode(ds, disp, NOISELESS)
        assert (res.labels == 0).all()

    def test_labels_complete(self):
        p, ds, inst, ch = _sc_fixture()
        res = sparc_decode(ds, inst.displayed, ch)
        assert set(np.unique(res.labels)) <= {0, 1}

    def test_permutation_equivariance(self):
        # relabeling test ids leaves the classification unchanged
        p, ds, inst, ch = _sc_fixture()
        res1 = sparc_decode(ds, inst.displayed, ch)
        perm = np.random.default_rng(99).permutation(ds.m_total)
        inv = np.argsort(perm)
        # rebuild the design with permuted test ids
        memberships = [ds.members(a) for a in inv]
        e_ind = np.concatenate(memberships)
        e_test = np.repeat(np.arange(ds.m_total), [len(mm) for mm in memberships])
        tptr, tm, iptr, it = design_mod._csr_from_edges(e_ind, e_test, ds.n, ds.m_total)
        ds2 = design_mod.TestDesign(
            n=ds.n, m_total=ds.m_total, kind="sc", test_ptr=tptr, test_members=tm,
            ind_ptr=iptr, ind_tests=it, Delta=ds.Delta,
            comp_of_test=ds.comp_of_test[inv], comp_of_ind=ds.comp_of_ind, sc=ds.sc,
        )
        res2 = sparc_decode(ds2, inst.displayed[inv], ch)
        assert (res1.labels == res2.labels).all()

    def test_reasonable_accuracy_above_threshold(self):
        p, ds, inst, ch = _sc_fixture()
        res = sparc_decode(ds, inst.displayed, ch)
        assert hamming_error(res.labels, inst.sigma) <= 0.25 * p.k


class TestSpex:
    def test_truth_is_fixed_point(self):
        p, ds, inst, ch = _sc_fixture()
        c_eff = p.m / (p.k * math.log(p.n / p.k))
        spec = build_threshold(c_eff, p.d_eff, p.theta, ch)
        res = spex_decode(ds, inst.displayed, ch, spec,
                          tau_init=inst.sigma.astype(np.int8), max_rounds=1)
        assert (res.labels == inst.sigma).all()

    def test_deterministic(self):
        p, ds, inst, ch = _sc_fixture()
        c_eff = p.m / (p.k * math.log(p.n / p.k))
        spec = build_threshold(c_eff, p.d_eff, p.theta, ch)
        r1 = spex_decode(ds, inst.displayed, ch, spec)
        r2 = spex_decode(ds, inst.displayed, ch, spec)
        assert (r1.labels == r2.labels).all()
        assert r1.rounds_used == r2.rounds_used

    def test_cleanup_improves_on_sparc(self):
        p, ds, inst, ch = _sc_fixture(seed=11)
        c_eff = p.m / (p.k * math.log(p.n / p.k))
        spec = build_threshold(c_eff, p.d_eff, p.theta, ch)
        sparc = sparc_decode(ds, inst.displayed, ch)
        res = spex_decode(ds, inst.displayed, ch, spec)
        assert hamming_error(res.labels, inst.sigma) <= hamming_error(
            sparc.labels, inst.sigma
        )
        errs = res.errors_per_round(inst.sigma)
        assert errs[-1] <= errs[0]


class TestBP:
    def test_zero_rounds_returns_prior(self):
        rng = np.random.default_rng(61)
        ds, sigma, disp = random_small_instance(rng)
        res = bp_decode(ds, disp, NoiseChannel.bsc(0.1), 3, t_max=0)
        prior = math.log(3 / (ds.n - 3))
        assert np.allclose(res.marginals, prior)

    def test_singleton_positive_certain(self):
        ds = design_from_tests(3, [[0]])
        disp = np.array([1], dtype=np.uint8)
        res = bp_decode(ds, disp, NOISELESS, 1, t_max=2)
        assert res.marginals[0] >= 400.0  # clamped near +inf
        assert res.clamp_events > 0
        assert res.labels[0] == 1

    def test_forest_matches_product_prior_posterior(self):
        rng = np.random.default_rng(62)
        ch = NoiseChannel(0.9, 0.1, 0.2, 0.8)
        for _ in range(10):
            n = int(rng.integers(4, 11))
            touched = set()
            tests = []
            for _ in range(int(rng.integers(1, 6))):
                fresh = [x for x in range(n) if x not in touched]
                if not fresh:
                    break
                members = []
                if touched and rng.random() < 0.5:
                    members.append(int(rng.choice(sorted(touched))))
                take = min(len(fresh), int(rng.integers(1, 4)))
                members += [int(v) for v in rng.choice(fresh, size=take, replace=False)]
                tests.append(members)
                touched.update(members)
            ds = design_from_tests(n, tests)
            k = int(rng.integers(1, n))
            sigma = sample_ground_truth(n, min(k, n - 1), rng)
            disp = displayed_outcomes(actual_outcomes(ds, sigma), ch, rng)
            tab = exhaustive_posterior(ds, disp, ch, k, "product-bernoulli")
            res = bp_decode(ds, disp, ch, k, t_max=64)
            bp_marg = 1.0 / (1.0 + np.exp(-res.marginals))
            assert np.max(np.abs(bp_marg - tab.marginals())) < 1e-8

    def test_topk_tiebreak_deterministic(self):
        ds = design_from_tests(4, [[0, 1, 2, 3]])
        disp = np.array([1], dtype=np.uint8)
        res = bp_decode(ds, disp, NoiseChannel.bsc(0.2), 2, t_max=5)
        assert res.labels.sum() == 2
        assert res.labels[0] == 1 and res.labels[1] == 1  # symmetric -> low index


class TestPosterior:
    def test_symmetric_pair(self):
        ds = design_from_tests(3, [[0, 1]])
        disp = np.array([1], dtype=np.uint8)
        tab = exhaustive_posterior(ds, disp, NOISELESS, 1, "hard-k")
        assert tab.prob(0b001) == pytest.approx(0.5, abs=1e-12)
        assert tab.prob(0b010) == pytest.approx(0.5, abs=1e-12)
        assert tab.prob(0b100) == 0.0

    def test_z_channel_negative_display(self):
        ds = design_from_tests(3, [[0, 1]])
        disp = np.array([0], dtype=np.uint8)
        tab = exhaustive_posterior(ds, disp, NoiseChannel.z_channel(0.9), 1, "hard-k")
        assert tab.prob(0b100) == pytest.approx(1.0 / 1.2, abs=1e-12)
        assert tab.prob(0b001) == pytest.approx(0.1 / 1.2, abs=1e-12)

    def test_normalization_random(self):
        rng = np.random.default_rng(63)
        for _ in range(20):
            ds, sigma, disp = random_small_instance(rng)
            tab = exhaustive_posterior(ds, disp, NoiseChannel(0.95, 0.05, 0.1, 0.9), 3)
            assert abs(sum(tab.probs.values()) - 1.0) < 1e-12

    def test_empty_design_uniform(self):
        ds = design_from_tests(6, [])
        tab = exhaustive_posterior(ds, np.zeros(0, dtype=np.uint8), NoiseChannel.bsc(0.1), 2)
        vals = list(tab.probs.values())
        assert len(vals) == math.comb(6, 2)
        assert np.allclose(vals, 1.0 / math.comb(6, 2))

    def test_guard(self):
        ds = design_from_tests(40, [[0, 1]])
        with pytest.raises(ValueError):
            exhaustive_posterior(ds, np.array([1], dtype=np.uint8),
                                 NoiseChannel.bsc(0.1), 12)
