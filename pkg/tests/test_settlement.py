"""Settlement arithmetic: prices, opportunity costs, revenue identities."""

from __future__ import annotations

import numpy as np
import pytest

from windbid.errors import PriceError
from windbid.settlement import (
    derive_settlement,
    derive_settlement_arrays,
    opportunity_loss,
    revenue,
)


class TestDeriveSettlement:
    def test_balancing_above_day_ahead(self):
        rec = derive_settlement(30.0, 40.0)
        assert (rec.lambda_minus, rec.lambda_plus) == (40.0, 30.0)
        assert (rec.psi_minus, rec.psi_plus) == (10.0, 0.0)

    def test_tie_gives_zero_costs(self):
        rec = derive_settlement(30.0, 30.0)
        assert (rec.psi_minus, rec.psi_plus) == (0.0, 0.0)

    def test_balancing_below_day_ahead(self):
        rec = derive_settlement(50.0, 20.0)
        assert (rec.lambda_minus, rec.lambda_plus) == (50.0, 20.0)
        assert (rec.psi_minus, rec.psi_plus) == (0.0, 30.0)

    def test_non_finite_rejected(self):
        with pytest.raises(PriceError, match="invalid price"):
            derive_settlement(float("nan"), 10.0)
        with pytest.raises(PriceError, match="invalid price"):
            derive_settlement(10.0, float("inf"))

    def test_random_pairs_properties(self):
        rng = np.random.default_rng(0)
        lam_d = rng.uniform(-80, 120, size=5000)
        lam_b = rng.uniform(-80, 120, size=5000)
        lam_b[::17] = lam_d[::17]  # exact ties
        for d, b in zip(lam_d[:500], lam_b[:500]):
            rec = derive_settlement(float(d), float(b))
            assert rec.psi_minus >= 0 and rec.psi_plus >= 0
            assert rec.psi_minus * rec.psi_plus == 0.0
            assert rec.lambda_minus >= rec.lambda_d >= rec.lambda_plus
        pm, pp = derive_settlement_arrays(lam_d, lam_b)
        assert (pm >= 0).all() and (pp >= 0).all()
        assert (pm * pp == 0.0).all()

    def test_array_form_matches_scalar_form(self):
        rng = np.random.default_rng(3)
        lam_d = rng.uniform(-50, 80, size=100)
        lam_b = rng.uniform(-50, 80, size=100)
        pm, pp = derive_settlement_arrays(lam_d, lam_b)
        for i in range(100):
            rec = derive_settlement(float(lam_d[i]), float(lam_b[i]))
            assert rec.psi_minus == pm[i] and rec.psi_plus == pp[i]


class TestRevenueAndLoss:
    def test_zero_deviation(self):
        assert revenue(30.0, 10.0, 10.0, 5.0, 7.0) == 300.0
        assert opportunity_loss(10.0, 10.0, 5.0, 7.0) == 0.0

    def test_underproduction(self):
        assert revenue(30.0, 8.0, 10.0, 10.0, 0.0) == 220.0
        assert opportunity_loss(8.0, 10.0, 10.0, 0.0) == 20.0

    def test_overproduction(self):
        assert revenue(30.0, 12.0, 10.0, 0.0, 5.0) == 350.0
        assert opportunity_loss(12.0, 10.0, 0.0, 5.0) == 10.0

    def test_unit_weights_give_absolute_error(self):
        rng = np.random.default_rng(1)
        for _ in range(200):
            e, e_d = rng.uniform(0, 100, size=2)
            assert opportunity_loss(e, e_d, 1.0, 1.0) == abs(e - e_d)

    def test_revenue_loss_identity_exact(self):
        # revenue + loss = lambda_d * energy, asserted in the rearranged form
        # that is bit-exact in floats (the sum form re-rounds the subtraction)
        rng = np.random.default_rng(2)
        for _ in range(500):
            lam_d, lam_b = rng.uniform(-60, 100, size=2)
            e, e_d = rng.uniform(0, 100, size=2)
            rec = derive_settlement(float(lam_d), float(lam_b))
            loss = opportunity_loss(e, e_d, rec.psi_minus, rec.psi_plus)
            rev = revenue(lam_d, e, e_d, rec.psi_minus, rec.psi_plus)
            assert rev == lam_d * e - loss  # exact, not approximate
            assert rev + loss == pytest.approx(lam_d * e, rel=1e-12, abs=1e-12)

    def test_vectorized_forms(self):
        e = np.array([8.0, 12.0])
        e_d = np.array([10.0, 10.0])
        loss = opportunity_loss(e, e_d, np.array([10.0, 0.0]), np.array([0.0, 5.0]))
        np.testing.assert_array_equal(loss, [20.0, 10.0])
        rev = revenue(np.array([30.0, 30.0]), e, e_d, np.array([10.0, 0.0]), np.array([0.0, 5.0]))
        np.testing.assert_array_equal(rev, [220.0, 350.0])
