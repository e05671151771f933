import numpy as np
import pytest

from qmemcap.capacity import (
    LIMIT_CASES, BasisOutputs, chi_for_basis, evaluate_point, f_closed_form, limit_relation,
    limit_relation_residual, optimize_capacity, optimize_model, simplex_grid, sweep_capacity,
    xstate_entropy,
)
from qmemcap.channel import ChannelParams, NoisyChannel, RateMatrices
from qmemcap.errors import ConstraintError, DomainError
from qmemcap.qcore import BELL, COMBINED, FACTORIZED, BasisParams, basis_vectors

from conftest import brute_chi, f_oracle, random_feasible_params


class TestXStateRoute:
    def test_entropy_matches_full_diagonalisation(self, rng):
        for _ in range(20):
            ch = NoisyChannel(random_feasible_params(rng), rng.uniform(0, 3))
            m = rng.uniform(size=2)
            x = BasisOutputs(ch).states(*m)
            full = ch.outputs(*m)
            lam = np.linalg.eigvalsh(full)
            lam = np.where(lam > 1e-12, lam, 1.0)
            np.testing.assert_allclose(xstate_entropy(x), -np.sum(lam * np.log2(lam), axis=-1), atol=1e-12)

    def test_chi_matches_full_route(self, rng):
        probs = rng.dirichlet(np.ones(4), size=30)
        for _ in range(10):
            ch = NoisyChannel(random_feasible_params(rng), rng.uniform(0, 3))
            m = rng.uniform(size=2)
            fast = BasisOutputs(ch).chi_function(*m)
            np.testing.assert_allclose(fast(probs), brute_chi(ch, *m, probs), atol=1e-12)
            assert fast(probs[0]) == pytest.approx(brute_chi(ch, *m, probs[:1])[0], abs=1e-12)


class TestChiForBasis:
    def test_noiseless_is_two_bits(self):
        r = chi_for_basis(ChannelParams(0), 1.0, BasisParams(0.3, 0.6))
        assert r.chi_bits == pytest.approx(2.0, abs=1e-12)
        np.testing.assert_allclose(r.p, 0.25, atol=1e-6)

    def test_long_time_unbiased_memoryless_vanishes(self):
        r = chi_for_basis(ChannelParams(1, alpha=0, zeta=0, mu=0), 10.0, BELL)
        assert r.chi_bits < 1e-3
        assert chi_for_basis(ChannelParams(1), 10.0, FACTORIZED).chi_bits < 1e-3

    def test_entangled_beats_factorized_with_memory(self):
        p = ChannelParams(1, alpha=0, zeta=0, mu=1)
        assert chi_for_basis(p, 0.1, BELL).chi_bits > chi_for_basis(p, 0.1, FACTORIZED).chi_bits + 0.05

    def test_against_dense_grid_oracle(self, rng):
        dense = simplex_grid(0.01)
        for _ in range(4):
            p = random_feasible_params(rng)
            t = rng.uniform(0.05, 1.0)
            b = BasisParams(*np.round(rng.uniform(size=2), 2))
            got = chi_for_basis(p, t, b)
            oracle = brute_chi(NoisyChannel(p, t), b.m_phi, b.m_psi, dense).max()
            assert got.chi_bits >= oracle - 1e-12
            assert got.chi_bits - oracle <= 1e-4
            assert sum(got.p) == pytest.approx(1, abs=1e-12) and min(got.p) >= 0


class TestOptimizeCapacity:
    def test_noiseless(self):
        r = optimize_capacity(ChannelParams(1, 0.3, 0.2, 0.2), 0.0)
        assert r.capacity_bits == pytest.approx(2.0, abs=1e-12)
        assert (r.m_phi, r.m_psi) == (0.0, 0.0)

    def test_bounds_and_simplex(self, rng):
        p = random_feasible_params(rng)
        r = optimize_capacity(p, 0.3)
        assert 0 <= r.capacity_bits <= 2
        assert sum(r.p) == pytest.approx(1, abs=1e-12) and min(r.p) >= 0
        assert 0 <= r.m_phi <= 1 and 0 <= r.m_psi <= 1
        assert r.evaluations > 0

    def test_soundness_on_coarse_set(self, rng):
        coarse_p = simplex_grid(0.25)
        ms = np.arange(5) / 4
        for _ in range(3):
            p = random_feasible_params(rng)
            ch = NoisyChannel(p, 0.2)
            brute = max(brute_chi(ch, a, b, coarse_p).max() for a in ms for b in ms)
            assert optimize_capacity(p, 0.2).capacity_bits >= brute - 1e-6

    def test_deterministic(self):
        p = ChannelParams(1, 0.4, 0.3, 0.6)
        assert optimize_capacity(p, 0.2) == optimize_capacity(p, 0.2)

    def test_depolarizing_memory_prefers_entangled_psi_pair(self):
        r = optimize_capacity(ChannelParams(1, alpha=0, zeta=0, mu=1), 0.1)
        assert r.m_psi == pytest.approx(1, abs=0.05)
        # the phi pair is insensitive to memory, so the tie resolves to m_phi = 0
        assert r.m_phi == 0.0

    def test_asymmetric_channel_prefers_factorized(self):
        for alpha in (0.0, 0.5, 1.0):
            r = optimize_capacity(ChannelParams(1, alpha=alpha, zeta=1, mu=0), 0.1)
            assert (r.m_phi, r.m_psi) == pytest.approx((0, 0), abs=0.05)

    def test_biased_memory_channel_prefers_combined(self):
        r = optimize_capacity(ChannelParams(1, alpha=1, zeta=0, mu=1), 0.1)
        assert (r.m_phi, r.m_psi) == pytest.approx((0, 1), abs=0.05)

    def test_factorized_beats_bell_under_bias_and_asymmetry(self):
        for zeta in np.linspace(0, 1, 6):
            p = ChannelParams(1, alpha=1, zeta=zeta, mu=0)
            assert chi_for_basis(p, 0.1, FACTORIZED).chi_bits >= chi_for_basis(p, 0.1, BELL).chi_bits - 1e-12

    @pytest.mark.parametrize("zeta, alpha", [(0.2, 0.5), (0.6, 1.0), (0.8, 0.3)])
    def test_partial_memory_keeps_factorized_phi_pair(self, zeta, alpha):
        r = optimize_capacity(ChannelParams(1, alpha=alpha, zeta=zeta, mu=0.5), 0.2)
        assert r.m_phi == 0.0


def _swapped(p, t):
    r = NoisyChannel(p, t).rates
    return NoisyChannel.from_rates(RateMatrices(r.r1[::-1, ::-1], r.r0[::-1, ::-1]), t)


class TestRelabeling:
    @pytest.mark.parametrize("zeta, alpha", [(0.4, 0.0), (0.7, 1.0), (1.0, 0.5)])
    def test_memoryless_capacity_invariant_under_qubit_swap(self, zeta, alpha):
        p = ChannelParams(1, alpha=alpha, zeta=zeta, mu=0)
        a = optimize_capacity(p, 0.2)
        b = optimize_model(BasisOutputs(_swapped(p, 0.2)))
        assert a.capacity_bits == pytest.approx(b.capacity_bits, abs=1e-9)

    def test_swap_maps_m_psi_to_its_negative(self, rng):
        # swapping qubits maps psi_3(m) -> -psi_4(-m) and psi_4(m) -> -psi_3(-m)
        probs = rng.dirichlet(np.ones(4), size=10)
        p = ChannelParams(1, alpha=0.6, zeta=0.5, mu=0.5)
        orig, swap = NoisyChannel(p, 0.3), _swapped(p, 0.3)
        for mf, mp in rng.uniform(size=(5, 2)):
            a = BasisOutputs(swap).chi_function(mf, mp)(probs)
            b = BasisOutputs(orig).chi_function(mf, -mp)(probs[:, [0, 1, 3, 2]])
            np.testing.assert_allclose(a, b, atol=1e-12)


class TestClosedForm:
    @pytest.mark.parametrize("x", [1e-4, 1e-3, 0.1, 0.2, 1.0, 5.0, 30.0])
    def test_matches_multiprecision(self, x):
        assert f_closed_form(x) == pytest.approx(f_oracle(x), rel=1e-10)

    def test_nonnegative(self):
        assert all(f_closed_form(x) >= -1e-12 for x in np.linspace(1e-3, 5, 100))

    def test_single_hump(self):
        # rises from 0, peaks once, decays: the inset's shape
        xs = np.linspace(1e-3, 5, 200)
        ys = np.array([f_closed_form(x) for x in xs])
        k = int(np.argmax(ys))
        assert 0 < k < len(xs) - 1
        assert np.all(np.diff(ys[: k + 1]) > 0) and np.all(np.diff(ys[k:]) < 0)

    @pytest.mark.parametrize("x", [0.0, 5e-5, -1.0, np.nan])
    def test_cutoff(self, x):
        with pytest.raises(DomainError, match="singularity"):
            f_closed_form(x)


class TestLimits:
    def test_cases(self):
        assert set(LIMIT_CASES) == {"a", "b", "c", "d"}

    def test_unbiased_pair_coincides_at_zero(self):
        assert abs(limit_relation_residual("c", 0.0, 0.1)) <= 1e-9
        assert abs(limit_relation_residual(LIMIT_CASES["d"], 0.0, 0.1)) <= 1e-9

    def test_ba_relation(self):
        res = [limit_relation("b", p, 0.1) for p in (0, 0.25, 0.5, 0.75, 1)]
        assert max(abs(r.residual_bits) for r in res) <= 0.05
        assert all(r.offset_bits == pytest.approx(f_closed_form(0.1)) for r in res)

    def test_rejects_degenerate_duration(self):
        with pytest.raises(DomainError):
            limit_relation_residual("a", 0.5, 0.0)


class TestSweep:
    def test_empty_grid(self):
        with pytest.raises(DomainError):
            sweep_capacity({}, {}, 0.1)
        with pytest.raises(DomainError):
            sweep_capacity({"mu": []}, {}, 0.1)

    def test_unknown_axis(self):
        with pytest.raises(DomainError):
            sweep_capacity({"nu": [0.1]}, {}, 0.1)

    def test_single_point_matches_optimize(self):
        rows = sweep_capacity({"mu": [0.5]}, {"alpha": 1, "zeta": 0.3}, 0.2)
        assert len(rows) == 1
        assert rows[0].result == optimize_capacity(ChannelParams(1, alpha=1, zeta=0.3, mu=0.5), 0.2)

    def test_infeasible_points_skipped_and_ordered(self):
        rows = sweep_capacity({"zeta": [0.9, 0.0], "mu": [0.9, 0.1]}, {"alpha": 0}, 0.1, bases=["bell", "fac"])
        keys = [(r.zeta, r.mu, r.basis) for r in rows]
        assert keys == [
            (0.0, 0.1, "bell"), (0.0, 0.1, "fac"), (0.0, 0.9, "bell"), (0.0, 0.9, "fac"),
            (0.9, 0.1, "bell"), (0.9, 0.1, "fac"), (0.9, 0.9, "bell"), (0.9, 0.9, "fac"),
        ]
        assert [r.status for r in rows][-2:] == ["skipped", "skipped"]
        assert all(r.status == "ok" for r in rows[:-2])

    def test_parallel_matches_serial(self):
        grid = {"mu": [0.0, 0.5, 1.0]}
        serial = sweep_capacity(grid, {"alpha": 1}, 0.1, bases=["com", "bell"], workers=1)
        parallel = sweep_capacity(grid, {"alpha": 1}, 0.1, bases=["com", "bell"], workers=2)
        assert serial == parallel

    def test_unknown_basis(self):
        with pytest.raises(DomainError):
            evaluate_point(0.1, 0.1, 0.1, 0.1, basis="ghz")

    def test_fig2a_regime_transition(self):
        rows = sweep_capacity({"mu": [0.0, 0.8], "zeta": [0.5]}, {"alpha": 1}, 0.2)
        assert [r.result.m_psi for r in rows] == pytest.approx([0, 1], abs=0.05)
