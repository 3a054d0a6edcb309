import numpy as np
import pytest

from qrex.classical import (
    ClassicalChain,
    bottleneck_ratio,
    classical_defected_ising_energy,
    classical_gap,
    classical_re_generator,
    glauber_generator,
    spin_table,
)


def ising_fn(J):
    return lambda z: classical_defected_ising_energy(z, J)


class TestEnergy:
    def test_all_up(self):
        assert classical_defected_ising_energy(np.ones(4), 3.0) == pytest.approx(-6.0)

    def test_single_flip_matches_brute_force(self):
        z = np.ones(4)
        z[0] = -1
        # direct formula: -J z0 z1 - (z1 z2 + z2 z3 + z3 z0)
        expected = -3.0 * (-1) - (1 + 1 - 1)
        assert classical_defected_ising_energy(z, 3.0) == pytest.approx(expected)

    def test_uniform_ring_translation_symmetry(self):
        # J = 1 removes the defect; the energy multiset is shift invariant
        states = spin_table(5)
        E = classical_defected_ising_energy(states, 1.0)
        shifted = np.roll(states, 1, axis=1)
        E2 = classical_defected_ising_energy(shifted, 1.0)
        assert np.allclose(np.sort(E), np.sort(E2))


class TestGlauber:
    def test_free_spin_unit_rates(self):
        chain = glauber_generator(lambda z: np.zeros(z.shape[0]), 1, 1.0)
        assert np.allclose(chain.generator, np.array([[-1.0, 1.0], [1.0, -1.0]]))

    def test_reversibility_residual(self):
        chain = glauber_generator(ising_fn(3.0), 4, 1.0)
        flow = chain.stationary[:, None] * chain.generator
        assert np.abs(flow - flow.T).max() < 1e-12

    def test_uphill_rate_value_and_scaling(self):
        beta = 1.0
        rates = {}
        for J in (3.0, 4.0):
            chain = glauber_generator(ising_fn(J), 4, beta)
            states = spin_table(4)
            E = classical_defected_ising_energy(states, J)
            # flip spin 0 out of the all-up state (index 0)
            target = 0 ^ (1 << 3)
            dE = E[target] - E[0]
            assert chain.generator[0, target] == pytest.approx(np.exp(-beta * dE))
            rates[J] = chain.generator[0, target]
        # the 2J barrier dominates: one unit of J costs e^{-2 beta}
        assert rates[4.0] / rates[3.0] == pytest.approx(np.exp(-2 * beta), rel=1e-10)

    def test_state_guard(self):
        with pytest.raises(ValueError):
            glauber_generator(lambda z: np.zeros(z.shape[0]), 15, 1.0)


class TestBottleneckRatio:
    def test_two_state_closed_form(self):
        p, q = 0.3, 0.7
        Q = np.array([[-p, p], [q, -q]])
        pi = np.array([q, p]) / (p + q)
        chain = ClassicalChain(generator=Q, stationary=pi, beta=1.0)
        phi, members = bottleneck_ratio(chain, mode="exact")
        # the smaller-pi side is state 1 (weight p/(p+q)); its exit rate is q
        assert members == (1,)
        assert phi == pytest.approx(q)

    def test_exact_slope_in_window(self):
        beta = 1.0
        phis = []
        Js = np.arange(1.0, 6.0)
        for J in Js:
            chain = glauber_generator(ising_fn(J), 4, beta)
            phi, _ = bottleneck_ratio(chain, mode="exact")
            phis.append(phi)
        slope = np.polyfit(Js, np.log(phis), 1)[0]
        assert -2.5 * beta <= slope <= -1.5 * beta

    def test_exponential_bottleneck_law(self):
        beta = 1.0
        prev = None
        for J in (2.0, 3.0, 4.0):
            chain = glauber_generator(ising_fn(J), 4, beta)
            phi, _ = bottleneck_ratio(chain, mode="exact")
            if prev is not None:
                assert phi / prev <= np.exp(-beta) + 1e-12
            prev = phi

    def test_candidate_agrees_with_exact(self):
        for J in (2.0, 4.0):
            chain = glauber_generator(ising_fn(J), 4, 1.0)
            E = classical_defected_ising_energy(spin_table(4), J)
            exact, _ = bottleneck_ratio(chain, mode="exact")
            cand, _ = bottleneck_ratio(chain, mode="candidate", energies=E)
            assert cand >= exact - 1e-14
            assert cand == pytest.approx(exact, rel=1e-9)

    def test_exact_mode_guard(self):
        chain = glauber_generator(ising_fn(2.0), 6, 1.0)
        with pytest.raises(ValueError):
            bottleneck_ratio(chain, mode="exact")


class TestReplicaExchange:
    def test_swap_rate_for_equal_energy_pair(self):
        chain = classical_re_generator(ising_fn(2.0), 3, 1.0, 0.2)
        states = spin_table(3)
        E = classical_defected_ising_energy(states, 2.0)
        m = 8
        # all-up and all-down have equal energy; swap rate must be exactly 1
        x1, x2 = 0, 7
        assert E[x1] == pytest.approx(E[x2])
        assert chain.generator[x1 * m + x2, x2 * m + x1] == pytest.approx(1.0)

    def test_stationarity_residual(self):
        chain = classical_re_generator(ising_fn(2.0), 3, 1.0, 0.2)
        resid = np.abs(chain.stationary @ chain.generator).max()
        assert resid < 1e-12

    def test_re_gap_flat_while_single_collapses(self):
        beta1, beta2 = 1.0, 0.2
        single, re = [], []
        for J in (1.0, 2.0, 3.0, 4.0, 5.0):
            single.append(classical_gap(glauber_generator(ising_fn(J), 4, beta1)))
            re.append(classical_gap(classical_re_generator(ising_fn(J), 4, beta1, beta2)))
        single, re = np.array(single), np.array(re)
        assert single.max() / single.min() >= 50.0
        assert re.max() / re.min() <= 3.0


class TestClassicalGap:
    def test_two_state_closed_form(self):
        p, q = 0.4, 1.1
        Q = np.array([[-p, p], [q, -q]])
        pi = np.array([q, p]) / (p + q)
        chain = ClassicalChain(generator=Q, stationary=pi, beta=1.0)
        assert classical_gap(chain) == pytest.approx(p + q)

    def test_cheeger_upper_bound(self):
        for J in (1.0, 3.0):
            chain = glauber_generator(ising_fn(J), 4, 1.0)
            gap = classical_gap(chain)
            phi, _ = bottleneck_ratio(chain, mode="exact")
            assert gap <= 2 * phi + 1e-12

    def test_positive_for_irreducible(self):
        chain = glauber_generator(ising_fn(2.0), 4, 1.0)
        assert classical_gap(chain) > 0
