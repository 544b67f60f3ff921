"""Seeded forward simulation and empirical estimator laws."""

from fractions import Fraction

import pytest

from gwlab import (
    FamilySpec,
    SimConfig,
    build,
    empirical_estimator_law,
    estimator_law,
    joint_law,
    prohorov,
    simulate_paths,
)

DELTA2 = FamilySpec.raw([0.0, 0.0, 1.0])


class TestSimulatePaths:
    def test_rerun_is_bit_identical(self, b75):
        cfg = SimConfig(seed=99, replications=1, n_max=4)
        assert simulate_paths(b75, cfg).equals(simulate_paths(b75, cfg))

    def test_larger_runs_deterministic_across_jobs(self, b75):
        cfg = SimConfig(seed=42, replications=50_000, n_max=3)
        a = simulate_paths(b75, cfg, jobs=1)
        b = simulate_paths(b75, cfg, jobs=3)
        assert a.equals(b)

    def test_seed_changes_the_draws(self, b75):
        cfg1 = SimConfig(seed=1, replications=2_000, n_max=2)
        cfg2 = SimConfig(seed=2, replications=2_000, n_max=2)
        assert not simulate_paths(b75, cfg1).equals(simulate_paths(b75, cfg2))

    def test_binary_extinction_frequency_near_exact_value(self, b75):
        reps = 1_000_000
        table = simulate_paths(b75, SimConfig(seed=7, replications=reps, n_max=2))
        prev, curr, counts = table.pairs(2)
        extinct = counts[curr == 0].sum()
        exact = 0.296875
        se = (exact * (1 - exact) / reps) ** 0.5
        assert abs(extinct / reps - exact) <= 3 * se

    def test_deterministic_branching_is_a_single_path(self):
        law = build(DELTA2)
        for z0 in (1, 3):
            table = simulate_paths(law, SimConfig(seed=5, replications=20, n_max=4, z0=z0))
            for n in range(1, 5):
                prev, curr, counts = table.pairs(n)
                assert list(prev) == [z0 * 2 ** (n - 1)]
                assert list(curr) == [z0 * 2**n]
                assert list(counts) == [20]

    def test_population_cap_excludes_and_reports(self):
        law = build(DELTA2)
        table = simulate_paths(law, SimConfig(seed=5, replications=10, n_max=5, cap=8))
        # Z_4 = 16 exceeds the cap, so levels 4 and 5 lose every replication.
        assert table.included(3) == 10
        assert table.included(4) == 0
        assert table.excluded[4] == 10
        assert table.pairs(4)[2].sum() == 0

    def test_rows_are_sorted_and_complete(self, b75):
        table = simulate_paths(b75, SimConfig(seed=11, replications=500, n_max=3))
        rows = list(table.rows())
        assert rows == sorted(rows)
        level_totals = {}
        for n, _, _, count in rows:
            level_totals[n] = level_totals.get(n, 0) + count
        assert level_totals == {1: 500, 2: 500, 3: 500}


class TestEmpiricalEstimatorLaw:
    def test_all_extinct_gives_point_mass_at_zero(self):
        law = build(FamilySpec.raw([1.0]))
        table = simulate_paths(law, SimConfig(seed=3, replications=100, n_max=3))
        emp = empirical_estimator_law(table, 2)
        assert emp.support == (Fraction(0),)
        assert emp.weights == (1.0,)

    def test_ratios_are_reduced_fractions(self, t1):
        table = simulate_paths(t1, SimConfig(seed=13, replications=5_000, n_max=3))
        emp = empirical_estimator_law(table, 3)
        for x in emp.support:
            assert Fraction(x.numerator, x.denominator) == x
        assert len(set(emp.support)) == len(emp.support)
        assert sum(emp.weights) == pytest.approx(1.0, abs=1e-12)

    def test_conditioned_variant_drops_extinct_rows(self, b75):
        table = simulate_paths(b75, SimConfig(seed=17, replications=20_000, n_max=3))
        cond = empirical_estimator_law(table, 3, conditioned=True)
        assert cond.mass_at(0) < empirical_estimator_law(table, 3).mass_at(0)

    @pytest.mark.parametrize(
        "spec,n,reps",
        [
            (FamilySpec.binary(0.75), 5, 1_000_000),
            (FamilySpec.three_point(0.20, 0.50, 0.30), 4, 200_000),
            (FamilySpec.poisson(2.0), 3, 100_000),
        ],
    )
    def test_close_to_exact_law(self, spec, n, reps):
        law = build(spec)
        table = simulate_paths(law, SimConfig(seed=23, replications=reps, n_max=n))
        emp = empirical_estimator_law(table, n)
        exact = estimator_law(joint_law(law, n)).law
        assert prohorov(emp, exact).value <= 0.01
