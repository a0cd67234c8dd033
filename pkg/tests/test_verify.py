import math

import numpy as np
import pytest

from ecdnorms import verify
from ecdnorms.enorm import enorm
from ecdnorms.operators import make_discrete, operator_family
from ecdnorms.verify import (
    CheckResult,
    analytic_tail,
    check_continuity_bounds,
    check_gkls_bounds,
    check_inequality_suite,
    check_series_convergence,
    check_taylor_rates,
    check_threshold_sweep,
    fit_loglog_slope,
    run_suite,
)


def hard_ok(checks):
    bad = [(c.check_id, c.lhs, c.rhs, c.parameters) for c in checks if not c.passed and not c.advisory]
    assert not bad, bad


class TestSlopeFit:
    def test_power_law(self):
        t = np.geomspace(1e-3, 1e-1, 9)
        assert fit_loglog_slope(t, 3 * t**2.5) == pytest.approx(2.5, abs=1e-12)

    def test_drops_noise_floor(self):
        t = np.geomspace(1e-3, 1e-1, 9)
        y = t**3
        y[:2] = 1e-15
        assert fit_loglog_slope(t, y) == pytest.approx(3.0, abs=1e-12)

    def test_too_few_points(self):
        assert fit_loglog_slope([1, 2, 3, 4], [1, 2, 3, 4]) is None


class TestCheckResult:
    def test_margin_and_pass(self):
        import time

        r = verify._result("x", "claim", {"d": 2, "seed": 0}, 1.0, 0.9, 0.2, time.perf_counter())
        assert r.margin == pytest.approx(-0.1) and r.passed
        assert r.parameters["tolerance"] == 0.2
        r = verify._result("x", "claim", {}, 1.0, 0.9, 0.0, time.perf_counter())
        assert not r.passed


class TestContinuity:
    def test_sqrt_g_example(self):
        G = make_discrete("number", 32)
        A = operator_family(G, "power", 0.5)
        checks = check_continuity_bounds(A, G, 4.0, [0.0, 0.1], kinds=("unitary",), restarts=4)
        zero, main = checks
        assert zero.lhs == 0.0 and zero.rhs == 0.0 and zero.passed
        assert main.rhs == pytest.approx(0.4, abs=1e-9)
        assert main.passed and 0 < main.lhs <= 0.4
        assert main.parameters["d"] == 32 and main.parameters["seed"] == 0

    def test_gaussian(self):
        G = make_discrete("number", 16)
        A = operator_family(G, "power", 0.25)
        hard_ok(check_continuity_bounds(A, G, 1.0, [0.01, 0.1], kinds=("gaussian",), restarts=4))

    def test_qubit_flip_gkls(self):
        G = make_discrete("number", 2)
        X = np.array([[0.0, 1.0], [1.0, 0.0]])
        checks = check_gkls_bounds([X], -0.5 * np.eye(2), G, 1.0, [0.01, 0.1], restarts=4)
        hard_ok(checks)
        chain = checks[0]
        assert chain.check_id == "bound.gkls_chain"
        # {V} = {X} gives ||{V}|| = 1 and ||K|| = 1/2, so the chain reads 1 + 1 <= 2
        assert chain.lhs == pytest.approx(2.0) and chain.rhs == pytest.approx(2.0)
        advisory = [c for c in checks if c.advisory]
        assert advisory and all(c.check_id == "bound.continuity.generator_estimate" for c in advisory)


class TestTaylor:
    def test_unitary_first_order_slope(self):
        G = make_discrete("number", 16)
        A = operator_family(G, "power", 0.25)
        sweeps, checks = check_taylor_rates(A, G, 4.0, 1, np.geomspace(1e-3, 1e-1, 7), restarts=2)
        hard_ok(checks)
        assert sweeps[0].fitted_slope == pytest.approx(2.0, abs=0.1)

    def test_gaussian_second_order_bound(self):
        G = make_discrete("number", 16)
        A = operator_family(G, "power", 0.25)
        sweeps, checks = check_taylor_rates(A, G, 4.0, 2, np.geomspace(1e-3, 1e-1, 6), kind="gaussian",
                                            restarts=2, k_min=2)
        hard_ok(checks)
        rhs_expected = 2 * (2 * 0.1) ** 2 * enorm(np.linalg.matrix_power(A, 4), G, 4.0).value / 2
        last = [c for c in checks if c.check_id == "bound.taylor.gaussian"][-1]
        assert last.rhs == pytest.approx(rhs_expected, rel=1e-12)

    def test_sweep_points_sorted(self):
        G = make_discrete("number", 8)
        A = operator_family(G, "power", 0.25)
        sweeps, _ = check_taylor_rates(A, G, 1.0, 1, [0.1, 0.001, 0.01, 0.003, 0.03], restarts=2)
        xs = [p[0] for p in sweeps[0].points]
        assert xs == sorted(xs)


class TestSeries:
    def test_trivial(self):
        G = make_discrete("number", 8)
        sweep, checks = check_series_convergence(operator_family(G, "sqrt_log"), G, 1.0, 0.0, 0, restarts=1)
        assert sweep.points[0][1] == 0.0

    def test_analytic_tail_value(self):
        direct = math.sqrt(4.0) * sum(2.0**j / math.sqrt(math.factorial(j)) for j in range(21, 150))
        assert analytic_tail(4.0, 1.0, 20) == pytest.approx(direct, rel=1e-12)

    def test_small_series(self):
        G = make_discrete("number", 16)
        sweep, checks = check_series_convergence(operator_family(G, "sqrt_log"), G, 4.0, 0.5, 14, restarts=2,
                                                 target=1e-5)
        hard_ok(checks)
        assert [p[0] for p in sweep.points] == list(range(15))


class TestThreshold:
    def test_examples(self):
        sweeps, checks = check_threshold_sweep((0.25, 0.5, 0.75), (16, 32, 64), (1.0, 16.0))
        hard_ok(checks)
        ratios = {s.sweep_id: dict((p[0], p[1]) for p in s.points) for s in sweeps}
        assert ratios["threshold.a0.25.E16"][64] == pytest.approx(0.5, abs=1e-9)
        for d in (16, 32, 64):
            assert ratios["threshold.a0.75.E1"][d] == pytest.approx((d - 1) ** 0.25, rel=1e-9)
            assert ratios["threshold.a0.5.E1"][d] == pytest.approx(1.0, abs=1e-9)

    def test_gaussian_variant(self):
        _, checks = check_threshold_sweep((0.125, 0.25, 0.375), (16, 32, 64), (1.0, 4.0), exponent_scale=2)
        hard_ok(checks)
        assert {c.check_id for c in checks} >= {"threshold.at.unit_ratio", "threshold.above.growth_factor"}


class TestInequalities:
    def test_small_suite(self):
        checks = check_inequality_suite(E=0.5, seed=1, n_samples=40, n_phi_cb=4, restarts=2)
        hard_ok(checks)
        ids = {c.check_id for c in checks}
        assert ids == {"inequality.star", "inequality.ab_cb", "inequality.tensor_identity", "inequality.power",
                       "inequality.concave_rescaling", "inequality.phi_cb"}
        assert [c for c in checks if c.check_id == "inequality.phi_cb"][0].advisory


SMALL = {
    "duality": {"n_instances": 5, "d_max": 6},
    "oracles": {"n_enorm": 2, "n_ecd": 1, "E": [0.5], "restarts": 2},
    "norm_profile": {"d": 8, "n_ops": 2},
    "channels": {"n": 2},
    "ecd_properties": {"E": [0.2, 1.0]},
    "continuity": {"d": 8, "E": [1.0], "t": [0.1], "operators": ["sqrt"]},
    "gkls": {"n_instances": 1, "E": [1.0], "t": [0.1]},
    "taylor": {"d": 8, "k_max": 1, "t": [0.001, 0.003, 0.01, 0.03, 0.1]},
    "series": {"d": 8, "n_max": 6},
    "generator_scaling": {"d": 8, "E": [1.0, 2.0], "k_max": 1},
    "threshold": {"d": [8, 16]},
    "threshold_gaussian": {"d": [8, 16]},
    "inequalities": {"n_samples": 10},
    "restarts": 2,
}


def test_run_suite_small_is_deterministic(monkeypatch):
    only = ["duality", "channels", "continuity", "taylor", "threshold"]
    a, sa, cfg = run_suite(SMALL, only=only)
    b, sb, _ = run_suite(SMALL, only=only)
    strip = lambda cs: [{k: v for k, v in c.to_dict().items() if k != "runtime_ms"} for c in cs]
    assert strip(a) == strip(b)
    assert [s.to_dict() for s in sa] == [s.to_dict() for s in sb]
    assert cfg["duality"]["n_instances"] == 5 and cfg["duality"]["E"] == [0.5, 1.0, 4.0]
    monkeypatch.setenv("ECDNORMS_MAX_WORKERS", "2")
    c, sc, _ = run_suite(SMALL, only=only)
    assert strip(c) == strip(a)


def test_all_results_carry_reproducibility_fields():
    checks, _, _ = run_suite(SMALL, only=["duality", "continuity", "inequalities", "semigroup_laws"])
    for c in checks:
        assert isinstance(c, CheckResult)
        assert "tolerance" in c.parameters
        assert any(k in c.parameters for k in ("d", "dims", "d_max"))
        assert c.passed == (c.margin >= -c.parameters["tolerance"])
