import math
from fractions import Fraction

import numpy as np
import pytest

from choqflow.functionals import ProblemParams
from choqflow.grid import Field, make_grid, sample_gaussian
from choqflow.regimes import (
    ContradictionReport,
    CriticalExponents,
    RegimeLabel,
    classify,
    classify_exponent,
    critical_exponents,
    mu_star_equivalence,
    mu_star_l2critical,
    nonexistence_contradiction,
)


class TestCriticalExponents:
    def test_reference_values_exact(self):
        # n=3, alpha=2, s=1/2: boundaries 5/3, 2, 7/3 and 5
        ce = critical_exponents(3, 2, Fraction(1, 2))
        assert ce.lower == Fraction(5, 3)
        assert ce.s_upper == Fraction(2, 1)
        assert ce.l2_critical == Fraction(7, 3)
        assert ce.hls_upper == Fraction(5, 1)

    def test_rational_in_rational_out(self):
        ce = critical_exponents(3, 2, Fraction(1, 2))
        for v in (ce.lower, ce.s_upper, ce.l2_critical, ce.hls_upper):
            assert isinstance(v, Fraction)

    def test_float_inputs_give_floats(self):
        ce = critical_exponents(3, 2.0, 0.5)
        assert isinstance(ce.lower, float)
        assert ce.lower == pytest.approx(5.0 / 3.0)

    def test_no_hls_below_dimension_three(self):
        assert critical_exponents(1, 0.5, 0.5).hls_upper is None
        assert critical_exponents(2, 1.0, 0.5).hls_upper is None

    def test_s_one_merges_window_top_with_mass_critical(self):
        ce = critical_exponents(3, 2, 1)
        assert ce.s_upper == ce.l2_critical == Fraction(7, 3)

    def test_ordering_always_holds(self):
        for n in (1, 2, 3):
            for alpha in (Fraction(1, 4), Fraction(1, 2), Fraction(n, 1) - Fraction(1, 4)):
                for s in (Fraction(1, 4), Fraction(3, 4), 1):
                    ce = critical_exponents(n, alpha, s)
                    assert ce.lower < ce.s_upper <= ce.l2_critical
                    if n == 3:
                        assert ce.l2_critical < ce.hls_upper

    def test_rejects_invalid_inputs(self):
        with pytest.raises(ValueError, match="1, 2 or 3"):
            critical_exponents(4, 2, 0.5)
        with pytest.raises(ValueError, match=r"\(0, n\)"):
            critical_exponents(3, 3, 0.5)
        with pytest.raises(ValueError, match=r"\(0, 1\]"):
            critical_exponents(3, 2, 1.5)

    def test_as_dict(self):
        d = critical_exponents(3, 2, Fraction(1, 2)).as_dict()
        assert d == {"lower": pytest.approx(5 / 3), "s_upper": 2.0,
                     "l2_critical": pytest.approx(7 / 3), "hls_upper": 5.0}

    def test_direct_construction_validates_order(self):
        with pytest.raises(ValueError, match="out of order"):
            CriticalExponents(lower=2.0, s_upper=1.0, l2_critical=3.0, hls_upper=None)


class TestClassifyExponent:
    @pytest.mark.parametrize("p,label", [
        (Fraction(5, 3), RegimeLabel.LOWER_CRITICAL),
        (1.7, RegimeLabel.EXISTENCE_WINDOW),
        (1.8, RegimeLabel.EXISTENCE_WINDOW),
        (1.9, RegimeLabel.EXISTENCE_WINDOW),
        (2, RegimeLabel.BOUNDED_BELOW_OPEN),
        (2.1, RegimeLabel.BOUNDED_BELOW_OPEN),
        (Fraction(7, 3), RegimeLabel.L2_CRITICAL),
        (3, RegimeLabel.UNBOUNDED_BELOW),
        (4.5, RegimeLabel.UNBOUNDED_BELOW),
        (5, RegimeLabel.HLS_CRITICAL),
        (6, RegimeLabel.SUPERCRITICAL),
    ])
    def test_reference_partition(self, p, label):
        assert classify_exponent(3, 2, Fraction(1, 2), p) is label

    def test_below_lower_raises(self):
        with pytest.raises(ValueError, match="below the lower critical"):
            classify_exponent(3, 2, Fraction(1, 2), 1.5)

    def test_tie_at_window_top_is_open(self):
        # the existence window is open at its right end: a tie goes outside
        assert classify_exponent(3, 2, Fraction(1, 2), 2) is RegimeLabel.BOUNDED_BELOW_OPEN

    def test_float_tie_detected_within_tolerance(self):
        p = 7.0 / 3.0  # not exactly representable; must still land on the boundary
        assert classify_exponent(3, 2.0, 0.5, p) is RegimeLabel.L2_CRITICAL

    def test_no_hls_regimes_in_low_dimension(self):
        # in 1-D and 2-D arbitrarily large p never reaches an upper endpoint
        assert classify_exponent(1, 0.5, 0.5, 50.0) is RegimeLabel.UNBOUNDED_BELOW
        assert classify_exponent(2, 1.0, 0.5, 50.0) is RegimeLabel.UNBOUNDED_BELOW

    def test_partition_is_total_and_monotone(self):
        # sweeping p upward visits the labels in their canonical order
        order = [
            RegimeLabel.LOWER_CRITICAL,
            RegimeLabel.EXISTENCE_WINDOW,
            RegimeLabel.BOUNDED_BELOW_OPEN,
            RegimeLabel.L2_CRITICAL,
            RegimeLabel.UNBOUNDED_BELOW,
            RegimeLabel.HLS_CRITICAL,
            RegimeLabel.SUPERCRITICAL,
        ]
        ps = [Fraction(5, 3)] + [Fraction(5, 3) + Fraction(k, 30) for k in range(1, 120)]
        seen = [classify_exponent(3, 2, Fraction(1, 2), p) for p in ps]
        ranks = [order.index(lbl) for lbl in seen]
        assert ranks == sorted(ranks)
        assert set(seen) == set(order)

    def test_classify_from_params(self):
        params = ProblemParams(n=3, alpha=2, s=Fraction(1, 2), p=Fraction(7, 3),
                               lam=0.05, mu=0.1, tau=1.0)
        assert classify(params) is RegimeLabel.L2_CRITICAL

    def test_labels_serialize_as_strings(self):
        assert RegimeLabel.EXISTENCE_WINDOW.value == "ExistenceWindow"
        assert str(RegimeLabel.SUPERCRITICAL.value) == "Supercritical"


class TestThresholds:
    def test_mass_critical_reference_value(self):
        # (2 + n + alpha) / (2 n C tau^{(alpha+2)/n}) = 7/6 at unit inputs
        assert mu_star_l2critical(3, 2.0, 1.0, 1.0) == pytest.approx(7.0 / 6.0, rel=1e-15)

    def test_mass_critical_tau_scaling(self):
        a = mu_star_l2critical(3, 2.0, 1.0, 1.0)
        b = mu_star_l2critical(3, 2.0, 2.0, 1.0)
        assert b == pytest.approx(a * 2.0 ** (-4.0 / 3.0), rel=1e-13)

    def test_mass_critical_validation(self):
        with pytest.raises(ValueError, match="tau"):
            mu_star_l2critical(3, 2.0, 0.0, 1.0)
        with pytest.raises(ValueError, match="interpolation constant"):
            mu_star_l2critical(3, 2.0, 1.0, 0.0)

    def test_equivalence_reference_value(self):
        # p tau^{1-p} / (C e^{e/2}) with e = n + alpha + 2 - n p = 1.6 at p = 1.8
        val = mu_star_equivalence(3, 2.0, 1.8, 1.0, 1.0)
        assert val == pytest.approx(1.8 / 1.6 ** 0.8, rel=1e-13)
        assert val == pytest.approx(1.2358806112193823, rel=1e-12)

    def test_equivalence_rejects_mass_critical_and_above(self):
        with pytest.raises(ValueError, match="between the lower and mass-critical"):
            mu_star_equivalence(3, 2.0, 7.0 / 3.0, 1.0, 1.0)
        with pytest.raises(ValueError, match="between the lower and mass-critical"):
            mu_star_equivalence(3, 2.0, 3.0, 1.0, 1.0)

    def test_equivalence_decreasing_in_constant(self):
        lo = mu_star_equivalence(3, 2.0, 1.8, 1.0, 2.0)
        hi = mu_star_equivalence(3, 2.0, 1.8, 1.0, 0.5)
        assert lo < hi


class TestNonexistenceContradiction:
    def params(self, p):
        return ProblemParams(n=3, alpha=2, s=Fraction(1, 2), p=p,
                             lam=0.1, mu=1.0, tau=1.0)

    def test_lower_endpoint_signs(self):
        g = make_grid(3, 16, 12.0)
        u = sample_gaussian(g, 1.0)
        rep = nonexistence_contradiction(u, self.params(Fraction(5, 3)))
        assert isinstance(rep, ContradictionReport)
        assert rep.regime is RegimeLabel.LOWER_CRITICAL
        assert rep.lhs > 0.0 > rep.rhs
        assert rep.opposite_signs

    def test_upper_endpoint_signs(self):
        g = make_grid(3, 16, 12.0)
        u = sample_gaussian(g, 1.0)
        rep = nonexistence_contradiction(u, self.params(Fraction(5, 1)))
        assert rep.regime is RegimeLabel.HLS_CRITICAL
        assert rep.lhs < 0.0 < rep.rhs
        assert rep.opposite_signs

    def test_zero_field_no_contradiction(self):
        g = make_grid(3, 16, 12.0)
        zero = Field(g, np.zeros(g.shape))
        rep = nonexistence_contradiction(zero, self.params(Fraction(5, 3)))
        assert not rep.opposite_signs

    def test_interior_exponent_rejected(self):
        g = make_grid(3, 16, 12.0)
        u = sample_gaussian(g, 1.0)
        with pytest.raises(ValueError, match="endpoint exponents"):
            nonexistence_contradiction(u, self.params(1.8))

    def test_as_dict(self):
        g = make_grid(3, 16, 12.0)
        u = sample_gaussian(g, 1.0)
        d = nonexistence_contradiction(u, self.params(Fraction(5, 3))).as_dict()
        assert d["regime"] == "LowerCritical"
        assert d["opposite_signs"] is True
        assert set(d) == {"regime", "lhs_name", "rhs_name", "lhs", "rhs", "opposite_signs"}
