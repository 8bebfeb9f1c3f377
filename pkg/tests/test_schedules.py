import math

import numpy as np
import pytest

from pdflow.schedules import (
    Curve,
    CurveDomainError,
    cumulative_integral,
    integral,
    validate_regimes,
    validate_role,
)


class TestCurveEval:
    def test_power_rule(self):
        v, d = Curve.power(1.0, 0.5).eval(4.0)
        assert v == 2.0
        assert d == 0.25

    def test_negative_exponent(self):
        v, d = Curve.power(3.0, -1.6).eval(1.0)
        assert v == 3.0
        assert d == pytest.approx(-4.8, rel=1e-15)

    def test_zero_everywhere(self):
        z = Curve.zero()
        for t in (0.0, 1.0, 17.5, 1e9):
            assert z.eval(t) == (0.0, 0.0)

    def test_domain_guard(self):
        with pytest.raises(CurveDomainError):
            Curve.power(3.0, -1.6, t0=1.0).eval(0.5)

    def test_user_oracle(self):
        c = Curve.user(lambda t: (t * t, 2 * t), t0=0.0)
        assert c.eval(3.0) == (9.0, 6.0)
        assert not c.is_power

    def test_vectorized_values(self):
        c = Curve.power(2.0, 1.0, t0=0.0)
        ts = np.array([1.0, 2.0, 3.0])
        assert np.allclose(c.values(ts), [2.0, 4.0, 6.0])
        assert np.allclose(c.derivatives(ts), 2.0)


class TestRoles:
    def test_beta_role_rejects_decay(self):
        with pytest.raises(ValueError):
            validate_role(Curve.power(1.0, -0.5), "beta")
        with pytest.raises(ValueError):
            validate_role(Curve.zero(), "beta")
        validate_role(Curve.power(1.0, 0.5), "beta")

    def test_eps_role_rejects_growth(self):
        with pytest.raises(ValueError):
            validate_role(Curve.power(1.0, 0.5), "eps")
        validate_role(Curve.power(3.0, -1.6), "eps")
        validate_role(Curve.zero(), "eps")


class TestRegimes:
    def test_experiment1_configuration(self):
        # beta = sqrt(t), eps = 3/t^1.6, gamma = 0.25, delta = 9
        rep = validate_regimes(Curve.power(1, 0.5), Curve.power(3, -1.6), 0.25, 9.0, t0=1.0)
        assert rep.exact
        assert rep.conditions["beta_eps_integrable"]      # exponent -1.1 < -1
        assert rep.conditions["damping_margin"]           # 1/9 < 0.25
        assert rep.earliest_valid_t == pytest.approx(4.5)
        assert not rep.conditions["growth_bound_from_t0"]
        assert not rep.thm41_ok

    def test_strong_convergence_tension(self):
        # beta = sqrt(t), eps = 15/t^1.6, delta = 0.5, gamma = 10: the product
        # decays (exponent -1.1), so the strong-convergence hypotheses fail
        # even though the minimizing-trajectory ones hold.
        rep = validate_regimes(Curve.power(1, 0.5), Curve.power(15, -1.6), 10.0, 0.5, t0=1.0)
        assert not rep.conditions["beta_eps_unbounded"]
        assert not rep.thm51_ok
        assert rep.thm42_ok

    def test_power_pair_classification(self):
        rep = validate_regimes(Curve.power(1, 2.0), Curve.power(3, -2.5), 10.0, 0.5, t0=1.0)
        assert rep.thm43 is not None
        assert rep.thm43["r1"] == 2.0 and rep.thm43["r2"] == 2.5
        assert rep.thm43["case"] == "1<r2<r1+1"
        assert rep.thm43["predicted_order"] == "t^-1.5"

        rep = validate_regimes(Curve.power(1, 2.0), Curve.power(3, -3.0), 10.0, 0.5, t0=1.0)
        assert rep.thm43["case"] == "r2=r1+1"
        assert rep.thm43["predicted_order"] == "ln(t)/t^2"

        rep = validate_regimes(Curve.power(1, 2.0), Curve.power(3, -4.0), 10.0, 0.5, t0=1.0)
        assert rep.thm43["case"] == "out_of_range"
        assert rep.thm43["predicted_order"] is None

    def test_zero_eps_notes(self):
        rep = validate_regimes(Curve.power(1, 0.5), Curve.zero(), 10.0, 0.5, t0=1.0)
        assert not rep.thm51_ok
        assert any("not applicable" in n for n in rep.notes)
        # with eps identically zero the product conditions are trivial
        assert rep.conditions["beta_eps_integrable"]
        assert not rep.conditions["beta_eps_unbounded"]

    def test_power_agrees_with_numeric_sweep(self):
        # horizon-limited checks on user-wrapped copies reproduce every boolean
        cases = [
            ((1, 0.5), (3, -1.6), 0.25, 9.0),
            ((1, 0.5), (15, -1.6), 10.0, 0.5),
            ((1, 2.0), (3, -2.5), 10.0, 0.5),
            ((1, 0.0), (1, -2.0), 10.0, 0.2),
            ((2, 1.0), (1, -0.5), 10.0, 0.5),
        ]
        for (bc, br), (ec, er), gamma, delta in cases:
            exact = validate_regimes(Curve.power(bc, br), Curve.power(ec, er), gamma, delta, t0=1.0)

            def wrap(c, r):
                return Curve.user(lambda t, c=c, r=r: (c * t**r, c * r * t ** (r - 1)), t0=1.0)

            numeric = validate_regimes(wrap(bc, br), wrap(ec, er), gamma, delta, t0=1.0)
            assert not numeric.exact
            assert numeric.conditions == exact.conditions, (bc, br, ec, er)


class TestIntegrals:
    def test_power_antiderivative(self):
        T = 1e3
        got = integral("beta_eps", beta=Curve.power(1, 0.5), eps=Curve.power(3, -1.6), lo=1.0, hi=T)
        assert got == pytest.approx(30.0 * (1.0 - T**-0.1), rel=1e-14)

    def test_improper_limit(self):
        got = integral("beta_eps", beta=Curve.power(1, 0.5), eps=Curve.power(3, -1.6),
                       lo=1.0, hi=math.inf)
        assert got == pytest.approx(30.0, rel=1e-14)

    def test_divergence_flagged_as_inf(self):
        got = integral("beta", beta=Curve.power(1, -1.0), lo=1.0, hi=math.inf)
        assert got == math.inf
        # finite horizon still evaluates to ln T
        got = integral("beta", beta=Curve.power(1, -1.0), lo=1.0, hi=100.0)
        assert got == pytest.approx(math.log(100.0), rel=1e-14)

    def test_constant_product(self):
        got = integral("beta_eps", beta=Curve.power(1, 2.0), eps=Curve.power(1, -2.0),
                       lo=1.0, hi=10.0)
        assert got == pytest.approx(9.0, rel=1e-14)

    def test_simpson_matches_closed_form(self):
        beta_u = Curve.user(lambda t: (t**0.5, 0.5 * t**-0.5), t0=1.0)
        eps_u = Curve.user(lambda t: (3 * t**-1.6, -4.8 * t**-2.6), t0=1.0)
        got = integral("beta_eps", beta=beta_u, eps=eps_u, lo=1.0, hi=50.0)
        want = integral("beta_eps", beta=Curve.power(1, 0.5), eps=Curve.power(3, -1.6),
                        lo=1.0, hi=50.0)
        assert got == pytest.approx(want, abs=1e-9)

    def test_user_improper_rejected(self):
        with pytest.raises(ValueError):
            integral("beta", beta=Curve.user(lambda t: (1.0, 0.0), t0=1.0), lo=1.0, hi=math.inf)

    def test_cumulative_matches_pointwise(self):
        ts = np.geomspace(1.0, 100.0, 7)
        cum = cumulative_integral("eps", ts, eps=Curve.power(3, -1.6), lo=1.0)
        for t, v in zip(ts, cum):
            assert v == pytest.approx(integral("eps", eps=Curve.power(3, -1.6), lo=1.0, hi=t),
                                      rel=1e-12, abs=1e-14)

    def test_running_average_vanishes(self):
        # integrable phi = t^-2 against nondecreasing psi = t: the psi-weighted
        # running average must die out; at t = 1e4 it is ln(t)/t < 1e-3.
        t_end = 1e4
        closed = cumulative_integral("beta_eps", [t_end],
                                     beta=Curve.power(1, 1.0), eps=Curve.power(1, -2.0), lo=1.0)[0]
        assert closed / t_end < 1e-3
        psi = Curve.user(lambda t: (t, 1.0), t0=1.0)
        phi = Curve.user(lambda t: (t**-2, -2 * t**-3), t0=1.0)
        quad = cumulative_integral("beta_eps", [t_end], beta=psi, eps=phi, lo=1.0)[0]
        assert quad / t_end < 1e-3
        assert quad == pytest.approx(closed, abs=1e-6)
