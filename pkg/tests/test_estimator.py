"""Exact ratio-estimator laws, conditioning, and deviation probabilities."""

from fractions import Fraction

import numpy as np
import pytest

import oracles
from conftest import as_dict
from gwlab import (
    DegenerateConditioning,
    DiscreteMeasure,
    EstimatorLaw,
    FamilySpec,
    build,
    consistency_probability,
    estimator_law,
    extinction_by_n,
    joint_law,
)

B75_PMF = {0: 0.25, 2: 0.75}
T1_PMF = {0: 0.20, 2: 0.50, 3: 0.30}


class TestEstimatorLaw:
    def test_first_step_reproduces_offspring_law(self, b75):
        e = estimator_law(joint_law(b75, 1))
        assert e.law == b75.measure
        assert e.n == 1 and e.z0 == 1 and not e.conditioned

    def test_binary_second_step_unconditional(self, b75):
        law = estimator_law(joint_law(b75, 2)).law
        assert as_dict(law) == {
            Fraction(0): pytest.approx(0.296875, abs=1e-15),
            Fraction(1): pytest.approx(0.28125, abs=1e-15),
            Fraction(2): pytest.approx(0.421875, abs=1e-15),
        }

    def test_binary_second_step_conditioned(self, b75):
        law = estimator_law(joint_law(b75, 2), conditioned=True).law
        assert as_dict(law) == {
            Fraction(0): pytest.approx(0.0625, abs=1e-15),
            Fraction(1): pytest.approx(0.375, abs=1e-15),
            Fraction(2): pytest.approx(0.5625, abs=1e-15),
        }

    @pytest.mark.parametrize("conditioned", [False, True])
    def test_matches_ratio_enumeration(self, t1, conditioned):
        for n, z0 in [(1, 1), (2, 1), (2, 2), (3, 1)]:
            got = as_dict(estimator_law(joint_law(t1, n, z0=z0), conditioned=conditioned).law)
            ref = oracles.ratio_law(T1_PMF, n, z0, conditioned=conditioned)
            assert oracles.tv(got, ref) <= 1e-13

    def test_equal_ratios_merge_into_one_atom(self, t1):
        # (Z_1, Z_2) = (2, 4) and (3, 6) both produce the value 2.
        j = joint_law(t1, 2)
        law = estimator_law(j).law
        entries = j.entries()
        expected = entries[(2, 4)] + entries[(3, 6)]
        assert law.mass_at(2) == pytest.approx(expected, abs=1e-15)
        assert len(set(law.support)) == len(law.support)

    def test_extinction_and_zero_ratio_share_the_atom_at_zero(self, t1):
        # Mass at 0 collects both never-started rows (j = 0) and died-now
        # rows (k = 0, j > 0).
        j = joint_law(t1, 2)
        law = estimator_law(j).law
        from_rows = sum(
            p for (prev, curr), p in j.entries().items() if curr == 0 or prev == 0
        )
        assert law.mass_at(0) == pytest.approx(from_rows, abs=1e-15)

    def test_decomposition_into_survival_and_extinction_parts(self, b75):
        n = 2
        unconditional = estimator_law(joint_law(b75, n)).law
        conditional = estimator_law(joint_law(b75, n), conditioned=True).law
        survival = 1.0 - extinction_by_n(b75, n - 1)
        for x in set(unconditional.support) | set(conditional.support):
            expected = survival * conditional.mass_at(x)
            if x == 0:
                expected += 1.0 - survival
            assert unconditional.mass_at(x) == pytest.approx(expected, abs=1e-12)

    def test_conditioning_needs_survivors(self):
        law = build(FamilySpec.raw([1.0]))
        with pytest.raises(DegenerateConditioning):
            estimator_law(joint_law(law, 2), conditioned=True)

    def test_json_dict_round_trips_measure(self, b75):
        e = estimator_law(joint_law(b75, 2), conditioned=True)
        doc = e.to_json_dict()
        assert doc["n"] == 2 and doc["conditioned"] is True
        assert DiscreteMeasure.from_json_dict(doc["law"]) == e.law
        assert e.defect == e.law.defect


class TestConsistencyProbability:
    def test_wide_threshold_gives_zero(self, b75):
        e = estimator_law(joint_law(b75, 2), conditioned=True)
        value, slack = consistency_probability(e, 1.5, 10.0)
        assert value == 0.0
        assert slack <= 1e-12

    def test_binary_second_step_every_atom_deviates(self, b75):
        # The conditioned atoms sit at 0, 1 and 2; each is at least 0.4 away
        # from the mean 1.5, so the deviation event is certain.
        e = estimator_law(joint_law(b75, 2), conditioned=True)
        value, _ = consistency_probability(e, 1.5, 0.4)
        assert value == 1.0

    def test_probability_shrinks_with_generation(self, b75):
        values = []
        for n in (2, 4, 6, 8):
            e = estimator_law(joint_law(b75, n), conditioned=True)
            values.append(consistency_probability(e, 1.5, 0.4)[0])
        assert all(x > y for x, y in zip(values, values[1:]))

    def test_nonincreasing_in_eta(self, b75):
        e = estimator_law(joint_law(b75, 3), conditioned=True)
        values = [
            consistency_probability(e, 1.5, eta)[0]
            for eta in np.linspace(0.05, 2.0, 25)
        ]
        assert all(x >= y - 1e-15 for x, y in zip(values, values[1:]))

    def test_exact_rational_threshold_includes_boundary_atoms(self, b75):
        # With m = 3/2 and eta = 1/2 the atoms at 1 and 2 deviate by exactly
        # eta and must count; rational arithmetic makes that decision exact.
        e = estimator_law(joint_law(b75, 2), conditioned=True)
        exact, _ = consistency_probability(e, Fraction(3, 2), Fraction(1, 2))
        assert exact == pytest.approx(1.0, abs=1e-15)
        floating, _ = consistency_probability(e, 1.5, 0.5)
        assert floating == exact

    def test_matches_direct_mass_computation(self, t1):
        e = estimator_law(joint_law(t1, 2), conditioned=True)
        m, eta = t1.mean_m, 0.3
        expected = sum(
            w for x, w in e.law.items() if abs(float(x) - m) >= eta
        )
        value, _ = consistency_probability(e, m, eta)
        assert value == pytest.approx(expected, abs=1e-15)
