"""Numerical checks of the energy-constrained norm bounds on truncated spaces.

Every check compares two computed quantities and records the margin
``rhs - lhs``. A check passes when ``margin >= -tolerance``. Hard checks
compare a lower-bound estimate (or an exact value) against an exact value;
checks whose right-hand side is itself only a lower-bound estimate are
marked ``advisory`` and never fail the suite.
"""

from __future__ import annotations

import math
import os
import time
from dataclasses import asdict, dataclass, field

import numpy as np

from .enorm import enorm, enorm_brute, family_norm, max_linear_objective
from .linalg import hermitian_function, partial_trace, trace_norm
from .operators import make_discrete, operator_family, sample_constrained_vector, sqrtg_bound_estimate
from .semigroups import (
    SemigroupSpec,
    commutator_generator,
    exp_semigroup_at,
    gaussian_channel_at,
    gaussian_generator,
    gkls_generator,
    random_gkls,
    random_hermitian,
    taylor_polynomial,
    unitary_channel_at,
)
from .superop import Superoperator, ecd_brute, ecd_lower, extended_trace_norm, sandwich


@dataclass
class CheckResult:
    check_id: str
    claim_ref: str
    parameters: dict
    lhs: float
    rhs: float
    margin: float
    passed: bool
    runtime_ms: int
    advisory: bool = False

    def to_dict(self):
        return asdict(self)


@dataclass
class SweepResult:
    sweep_id: str
    axis: str
    points: list
    fitted_slope: float = None
    parameters: dict = field(default_factory=dict)

    def to_dict(self):
        return asdict(self)


def _clean(v):
    if isinstance(v, (np.floating, np.integer)):
        return v.item()
    if isinstance(v, (list, tuple, np.ndarray)):
        return [_clean(x) for x in v]
    if isinstance(v, dict):
        return {k: _clean(x) for k, x in v.items()}
    return v


def _result(check_id, claim_ref, params, lhs, rhs, tol, start, advisory=False):
    margin = float(rhs) - float(lhs)
    params = dict(params)
    params["tolerance"] = tol
    return CheckResult(
        check_id=check_id,
        claim_ref=claim_ref,
        parameters=_clean(params),
        lhs=float(lhs),
        rhs=float(rhs),
        margin=margin,
        passed=bool(margin >= -tol),
        runtime_ms=int(round(1000 * (time.perf_counter() - start))),
        advisory=advisory,
    )


def _sweep(sweep_id, axis, points, params, fit=False, drop_below=1e-12):
    points = sorted((float(x), float(y), float(m)) for x, y, m in points)
    slope = fit_loglog_slope([p[0] for p in points], [p[1] for p in points], drop_below) if fit else None
    return SweepResult(sweep_id, axis, points, slope, _clean(params))


def fit_loglog_slope(x, y, drop_below=1e-12):
    """Least-squares slope of ``log y`` against ``log x``.

    Up to two of the smallest-``x`` points are dropped when their value is
    below ``drop_below`` (rounding floor). Needs at least 5 usable points.
    """
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    order = np.argsort(x)
    x, y = x[order], y[order]
    for _ in range(2):
        if y.size and y[0] < drop_below:
            x, y = x[1:], y[1:]
    keep = y > 0
    x, y = x[keep], y[keep]
    if x.size < 5:
        return None
    return float(np.polyfit(np.log(x), np.log(y), 1)[0])


def _family(G, spec):
    """Operator from a family spec: ``('power', alpha)``, ``'sqrt_log'``, ``'sqrt'``."""
    if isinstance(spec, str):
        if spec == "sqrt":
            return operator_family(G, "power", 0.5), "power 0.5"
        if spec == "sqrt_log":
            return operator_family(G, "sqrt_log"), "sqrt_log"
        raise ValueError(f"unknown operator spec {spec!r}")
    fam, alpha = spec
    return operator_family(G, fam, alpha), f"{fam} {alpha}"


def _semigroup(kind, A):
    if kind == "unitary":
        return (lambda t: unitary_channel_at(A, t)), commutator_generator(A)
    if kind == "gaussian":
        return (lambda t: gaussian_channel_at(A, t)), gaussian_generator(A)
    raise ValueError(f"unknown semigroup kind {kind!r}")


# -- E-norm solver ------------------------------------------------------------


def check_duality(n_instances=200, d_max=16, E_list=(0.5, 1.0, 4.0), seed=0):
    """Duality gap, weak duality and witness feasibility on random Hermitian objectives."""
    start = time.perf_counter()
    rng = np.random.default_rng(seed)
    worst_rel, min_gap, worst_tr, worst_en = 0.0, np.inf, 0.0, -np.inf
    for _ in range(n_instances):
        d = int(rng.integers(2, d_max + 1))
        G = make_discrete("number", d)
        M = random_hermitian(d, rng)
        for E in E_list:
            res = max_linear_objective(M, G, E)
            worst_rel = max(worst_rel, res.gap / (1.0 + abs(res.value)))
            min_gap = min(min_gap, res.gap)
            rho = res.primal_witness
            worst_tr = max(worst_tr, abs(np.trace(rho).real - 1.0))
            worst_en = max(worst_en, float(np.real(np.diagonal(rho)) @ G.eigenvalues) - E)
    params = {"n_instances": n_instances, "d_max": d_max, "E": list(E_list), "seed": seed, "criterion": 1}
    return [
        _result("enorm.duality_gap", "strong duality of the energy-constrained eigenvalue problem",
                params, worst_rel, 1e-7, 0.0, start),
        _result("enorm.weak_duality", "dual value bounds the primal value", params, -min_gap, 1e-10, 0.0, start),
        _result("enorm.witness_trace", "witness has unit trace", params, worst_tr, 1e-10, 0.0, start),
        _result("enorm.witness_energy", "witness meets the energy budget", params, worst_en, 1e-8, 0.0, start),
    ]


def check_sqrt_values(d=64, E_list=(1.0, 2.0, 4.0, 7.5)):
    """``||sqrt G||_E = sqrt E``, ``||G^{1/4}||_16 / 4 = 1/2`` and ``||I||_E = 1``."""
    out = []
    G = make_discrete("number", d)
    A = operator_family(G, "power", 0.5)
    for E in E_list:
        start = time.perf_counter()
        v = enorm(A, G, E).value
        out.append(_result("enorm.sqrt_G", "E-norm of sqrt(G) equals sqrt(E)",
                           {"d": d, "E": E, "value": v, "criterion": 2}, abs(v - math.sqrt(E)), 1e-9, 0.0, start))
    start = time.perf_counter()
    est = sqrtg_bound_estimate(operator_family(G, "power", 0.25), G, [16.0])
    out.append(_result("enorm.quarter_power", "ratio of G^(1/4) at E = 16 is 1/2",
                       {"d": d, "E": 16.0, "ratio": est.ratios[0]}, abs(est.ratios[0] - 0.5), 1e-9, 0.0, start))
    start = time.perf_counter()
    worst = max(abs(enorm(np.eye(d), G, E).value - 1.0) for E in E_list)
    out.append(_result("enorm.identity", "E-norm of the identity is 1", {"d": d, "E": list(E_list)},
                       worst, 1e-12, 0.0, start))
    return out


def _random_psd(d, rng):
    X = rng.standard_normal((d, d)) + 1j * rng.standard_normal((d, d))
    return X @ X.conj().T / d


def check_norm_profile(d=32, n_ops=20, E_grid=None, seed=0):
    """Concavity of ``E -> ||A||_E^2``, the two-sided equivalence bounds,
    monotone ``||A||_E / sqrt(E)`` and feasibility of the relative-bound pairs."""
    start = time.perf_counter()
    rng = np.random.default_rng(seed)
    G = make_discrete("number", d)
    E_grid = np.geomspace(0.25, d - 1, 20) if E_grid is None else np.asarray(E_grid, dtype=float)
    worst_conc, worst_mono, worst_upper, worst_ratio, worst_ab = -np.inf, -np.inf, -np.inf, -np.inf, -np.inf
    for _ in range(n_ops):
        A = random_hermitian(d, rng)
        est = sqrtg_bound_estimate(A, G, E_grid)
        f = est.norms**2
        # second divided differences of a concave function are <= 0
        for i in range(1, len(E_grid) - 1):
            e0, e1, e2 = E_grid[i - 1 : i + 2]
            s1 = (f[i] - f[i - 1]) / (e1 - e0)
            s2 = (f[i + 1] - f[i]) / (e2 - e1)
            worst_conc = max(worst_conc, (s2 - s1) / (1.0 + abs(s1)))
        n = est.norms
        for i in range(len(E_grid)):
            for j in range(i + 1, len(E_grid)):
                worst_mono = max(worst_mono, n[i] - n[j])
                worst_upper = max(worst_upper, n[j] - math.sqrt(E_grid[j] / E_grid[i]) * n[i])
        worst_ratio = max(worst_ratio, float(np.max(np.diff(est.ratios))))
        phis = rng.standard_normal((200, d)) + 1j * rng.standard_normal((200, d))
        Aphi = np.sum(np.abs(phis @ A.T) ** 2, axis=1)
        nrm = np.sum(np.abs(phis) ** 2, axis=1)
        gph = np.abs(phis) ** 2 @ G.eigenvalues
        for a, b in est.ab_pairs:
            worst_ab = max(worst_ab, float(np.max((Aphi - a * a * nrm - b * b * gph) / (1.0 + Aphi))))
    params = {"d": d, "n_ops": n_ops, "E_grid": E_grid, "seed": seed, "criterion": 4}
    return [
        _result("enorm.concavity", "E -> ||A||_E^2 is concave", params, worst_conc, 0.0, 1e-8, start),
        _result("enorm.monotone", "E -> ||A||_E is nondecreasing", params, worst_mono, 0.0, 1e-9, start),
        _result("enorm.equivalence", "||A||_E2 <= sqrt(E2/E1) ||A||_E1", params, worst_upper, 0.0, 1e-9, start),
        _result("enorm.ratio_monotone", "||A||_E / sqrt(E) is nonincreasing", params, worst_ratio, 0.0, 1e-8, start),
        _result("enorm.relative_bound_pairs", "(a, b) pairs bound ||A phi||^2", params, worst_ab, 0.0, 1e-10, start),
    ]


def check_oracles(n_enorm=50, n_ecd=10, E_list=(0.1, 0.5, 1.0), seed=0, n_points=1_000_000, restarts=16):
    """E-norm and ECD estimator against independent brute-force searches on a qubit."""
    out = []
    rng = np.random.default_rng(seed)
    G = make_discrete("number", 2)
    start = time.perf_counter()
    worst = 0.0
    for _ in range(n_enorm):
        A = random_hermitian(2, rng)
        E = float(rng.uniform(0.05, 1.0))
        worst = max(worst, abs(enorm(A, G, E).value - enorm_brute(A, G, E, n_points)))
    out.append(_result("oracle.enorm", "dual E-norm solver matches a grid search",
                       {"n": n_enorm, "seed": seed, "criterion": 3}, worst, 2e-3, 0.0, start))
    start = time.perf_counter()
    worst = 0.0
    for i in range(n_ecd):
        J = random_hermitian(4, rng) / 2
        phi = Superoperator.from_choi(J, 2)
        for E in E_list:
            est = ecd_lower(phi, G, E, restarts=restarts, seed=seed + i)
            worst = max(worst, abs(est.value - ecd_brute(phi, G, E, seed=seed + i)))
    out.append(_result("oracle.ecd", "ECD estimator matches a brute-force search",
                       {"n": n_ecd, "E": list(E_list), "seed": seed, "restarts": restarts, "criterion": 3},
                       worst, 1e-2, 0.0, start))
    return out


# -- superoperators -----------------------------------------------------------


def _random_unitary(d, rng):
    X = rng.standard_normal((d, d)) + 1j * rng.standard_normal((d, d))
    Q, R = np.linalg.qr(X)
    return Q * (np.diagonal(R) / np.abs(np.diagonal(R)))


def random_channels(n, d, rng):
    """Alternating random GKLS exponentials and random unitary conjugations."""
    chans = []
    for i in range(n):
        if i % 2 == 0:
            V, K = random_gkls(d, 2, rng)
            chans.append(exp_semigroup_at(gkls_generator(V, K), float(rng.uniform(0.1, 2.0))))
        else:
            chans.append(Superoperator.from_unitary(_random_unitary(d, rng)))
    return chans


def check_channel_normalization(n=20, d=3, E_list=(0.25, 1.0, 2.0), seed=0, restarts=4):
    start = time.perf_counter()
    rng = np.random.default_rng(seed)
    G = make_discrete("number", d)
    worst = 0.0
    for i, phi in enumerate(random_channels(n, d, rng)):
        for E in E_list:
            worst = max(worst, abs(ecd_lower(phi, G, E, restarts=restarts, seed=seed + i).value - 1.0))
    return [_result("ecd.channel_normalization", "ECD norm of a channel is 1",
                    {"n": n, "d": d, "E": list(E_list), "seed": seed, "restarts": restarts, "criterion": 5},
                    worst, 1e-6, 0.0, start)]


def check_ecd_properties(d=2, E_list=(0.1, 0.3, 0.6, 1.0), seed=0, restarts=8, n_subunit=200):
    """Monotonicity and equivalence in E, the triangle inequality and the
    sub-normalized-input form of the ECD estimator."""
    out = []
    rng = np.random.default_rng(seed)
    G = make_discrete("number", d)
    chans = random_channels(3, d, rng)
    diff = chans[0] - chans[1]
    start = time.perf_counter()
    vals = [ecd_lower(diff, G, E, restarts=restarts, seed=seed).value for E in E_list]
    mono = max(vals[i] - vals[i + 1] for i in range(len(vals) - 1))
    equiv = max(vals[j] - E_list[j] / E_list[i] * vals[i] for i in range(len(vals)) for j in range(i + 1, len(vals)))
    params = {"d": d, "E": list(E_list), "seed": seed, "restarts": restarts}
    out.append(_result("ecd.monotone", "E -> ECD norm is nondecreasing", params, mono, 0.0, 1e-8, start))
    out.append(_result("ecd.equivalence", "ECD(E2) <= (E2/E1) ECD(E1)", params, equiv, 0.0, 1e-6, start))
    out.append(_result("ecd.upper_two", "ECD norm of a channel difference is at most 2",
                       params, max(vals), 2.0, 1e-9, start))

    start = time.perf_counter()
    worst = -np.inf
    for E in E_list:
        a = ecd_lower(chans[0] - chans[1], G, E, restarts=restarts, seed=seed).value
        b = ecd_lower(chans[0] - chans[2], G, E, restarts=restarts, seed=seed).value
        c = ecd_lower(chans[2] - chans[1], G, E, restarts=restarts, seed=seed).value
        worst = max(worst, a - b - c)
    out.append(_result("ecd.triangle", "triangle inequality for ECD distances", params, worst, 0.0, 1e-6, start))

    start = time.perf_counter()
    E = E_list[-1]
    est = ecd_lower(diff, G, E, restarts=restarts, seed=seed).value
    best = 0.0
    for _ in range(n_subunit):
        r = int(rng.integers(1, d * d + 1))
        X = rng.standard_normal((d * d, r)) + 1j * rng.standard_normal((d * d, r))
        rho = X @ X.conj().T
        rho /= np.trace(rho).real
        en = float(np.real(np.diagonal(partial_trace(rho, d, d))) @ G.eigenvalues)
        if en > E:
            w = 1.0 - E / en
            ground = np.zeros(d * d)
            ground[:d] = 1.0 / d  # |0><0| ⊗ I/d
            rho = (1 - w) * rho + w * np.diag(ground)
        rho *= rng.uniform(0.2, 1.0)
        best = max(best, trace_norm(diff.apply_extended(rho, d)))
    out.append(_result("ecd.subunit_inputs", "sub-normalized feasible inputs do not exceed the estimate",
                       {**params, "n": n_subunit, "E": E}, best, est, 1e-8, start))
    return out


# -- semigroups ---------------------------------------------------------------


def _normalized_hermitian(d, rng, norm=1.0):
    A = random_hermitian(d, rng)
    return norm * A / np.max(np.abs(np.linalg.eigvalsh(A)))


def check_semigroup_laws(dims=(2, 4, 8), times=(0.1, 0.3, 1.0), seed=0):
    """Composition laws, generator cross-checks and quadrature of the Gaussian integral."""
    rng = np.random.default_rng(seed)
    out = []
    acc = {"compose_unitary": 0.0, "compose_gaussian": 0.0, "exp_vs_unitary": 0.0,
           "exp_vs_gaussian": 0.0, "z_equals_half_s2": 0.0, "closed_vs_quadrature": 0.0,
           "channel_cp": 0.0, "channel_tp": 0.0, "generator_trace": 0.0}
    start = time.perf_counter()
    for d in dims:
        A = _normalized_hermitian(d, rng)
        S, Z = commutator_generator(A), gaussian_generator(A)
        acc["z_equals_half_s2"] = max(acc["z_equals_half_s2"], float(np.max(np.abs(Z.action - 0.5 * S.action @ S.action))))
        V, K = random_gkls(d, 2, rng)
        L = gkls_generator(V, K)
        for gen in (S, Z, L):
            rho = _random_state(d, rng)
            acc["generator_trace"] = max(acc["generator_trace"], abs(np.trace(gen.apply(rho))))
        for t in times:
            for s in times:
                acc["compose_unitary"] = max(acc["compose_unitary"],
                                             (unitary_channel_at(A, t) @ unitary_channel_at(A, s)).distance(unitary_channel_at(A, t + s)))
                acc["compose_gaussian"] = max(acc["compose_gaussian"],
                                              (gaussian_channel_at(A, t) @ gaussian_channel_at(A, s)).distance(gaussian_channel_at(A, t + s)))
            acc["exp_vs_unitary"] = max(acc["exp_vs_unitary"], exp_semigroup_at(S, t).distance(unitary_channel_at(A, t)))
            acc["exp_vs_gaussian"] = max(acc["exp_vs_gaussian"], exp_semigroup_at(Z, t).distance(gaussian_channel_at(A, t)))
            for ch in (unitary_channel_at(A, t), gaussian_channel_at(A, t), exp_semigroup_at(L, t)):
                acc["channel_cp"] = max(acc["channel_cp"], -float(np.linalg.eigvalsh((ch.choi + ch.choi.conj().T) / 2)[0]))
                acc["channel_tp"] = max(acc["channel_tp"], ch.trace_residual())
        for t in (0.5, 1.0, 2.0):
            acc["closed_vs_quadrature"] = max(acc["closed_vs_quadrature"],
                                              gaussian_channel_at(A, t).distance(gaussian_channel_at(A, t, "quadrature", 64)))
    tols = {"compose_unitary": 1e-10, "compose_gaussian": 1e-10, "exp_vs_unitary": 1e-9, "exp_vs_gaussian": 1e-9,
            "z_equals_half_s2": 1e-12, "closed_vs_quadrature": 1e-8, "channel_cp": 1e-9, "channel_tp": 1e-10,
            "generator_trace": 1e-10}
    params = {"dims": list(dims), "times": list(times), "seed": seed, "A_spectral_norm": 1.0, "criterion": 6}
    for key, val in acc.items():
        out.append(_result(f"semigroup.{key}", key.replace("_", " "), params, val, tols[key], 0.0, start))
    return out


def _random_state(d, rng, rank=None):
    rank = d if rank is None else rank
    X = rng.standard_normal((d, rank)) + 1j * rng.standard_normal((d, rank))
    rho = X @ X.conj().T
    return rho / np.trace(rho).real


def check_generator_consistency(d=4, seed=0, t_grid=None):
    """``||(Phi_t(rho) - rho)/t - S(rho)||_1`` decays linearly in ``t`` for all three kinds.

    The Gaussian semigroup is built by quadrature of its defining integral,
    independently of its closed form.
    """
    rng = np.random.default_rng(seed)
    t_grid = np.geomspace(1e-4, 1e-1, 7) if t_grid is None else t_grid
    A = _normalized_hermitian(d, rng)
    V, K = random_gkls(d, 2, rng)
    rho = _random_state(d, rng)
    kinds = {
        "unitary": (lambda t: unitary_channel_at(A, t), commutator_generator(A)),
        "gaussian": (lambda t: gaussian_channel_at(A, t, "quadrature", 64), gaussian_generator(A)),
        "gkls": (lambda t: exp_semigroup_at(gkls_generator(V, K), t), gkls_generator(V, K)),
    }
    out, sweeps = [], []
    for name, (chan, gen) in kinds.items():
        start = time.perf_counter()
        target = gen.apply(rho)
        pts = []
        for t in t_grid:
            err = trace_norm((chan(t).apply(rho) - rho) / t - target)
            pts.append((t, err, 0.0))
        sw = _sweep(f"generator.finite_difference.{name}", "time t", pts, {"d": d, "seed": seed}, fit=True)
        sweeps.append(sw)
        out.append(_result(f"generator.finite_difference.{name}", "difference quotient converges at rate t",
                           {"d": d, "seed": seed, "slope": sw.fitted_slope}, -(sw.fitted_slope or 0.0), -0.9, 0.0, start))
    return out, sweeps


# -- continuity and rate bounds ----------------------------------------------


def check_continuity_bounds(A, G, E, t_grid, kinds=("unitary", "gaussian"), restarts=8, seed=0, label=""):
    """``||Phi_t - id||`` against ``2t||A||_E`` (unitary) and ``t(||A||_E^2 + ||A^2||_E)`` (Gaussian)."""
    out = []
    a = enorm(A, G, E).value
    a2 = enorm(A @ A, G, E).value
    ident = Superoperator.identity(G.dim)
    for kind in kinds:
        chan, _ = _semigroup(kind, A)
        for t in t_grid:
            start = time.perf_counter()
            if t == 0:
                lhs = 0.0
            else:
                lhs = ecd_lower(chan(t) - ident, G, E, restarts=restarts, seed=seed).value
            rhs = 2 * t * a if kind == "unitary" else t * (a * a + a2)
            claim = ("unitary group continuity bound 2t||A||_E" if kind == "unitary"
                     else "Gaussian semigroup continuity bound t(||A||_E^2 + ||A^2||_E)")
            out.append(_result(f"bound.continuity.{kind}", claim,
                               {"A": label, "d": G.dim, "E": E, "t": t, "seed": seed, "restarts": restarts, "criterion": 7},
                               lhs, rhs, 1e-9, start))
    return out


def check_gkls_bounds(V, K, G, E, t_grid, restarts=8, seed=0, label=""):
    """Continuity of a GKLS semigroup against ``t(||{V_k}||_E + 2||K||_E)`` and the
    chain ``||{V_k}||_E + 2||K||_E <= 4||K||_E``."""
    out = []
    start = time.perf_counter()
    fv = family_norm(V, G, E).value
    k = enorm(K, G, E).value
    params = {"instance": label, "d": G.dim, "E": E, "seed": seed, "criterion": 7}
    out.append(_result("bound.gkls_chain", "||{V_k}||_E + 2||K||_E <= 4||K||_E", params, fv + 2 * k, 4 * k, 1e-9, start))
    S = gkls_generator(V, K)
    ident = Superoperator.identity(G.dim)
    s_est = ecd_lower(S, G, E, restarts=restarts, seed=seed)
    for t in t_grid:
        start = time.perf_counter()
        lhs = ecd_lower(exp_semigroup_at(S, t) - ident, G, E, restarts=restarts, seed=seed).value
        p = {**params, "t": t, "restarts": restarts}
        out.append(_result("bound.continuity.gkls", "GKLS continuity bound t(||{V_k}||_E + 2||K||_E)",
                           p, lhs, t * (fv + 2 * k), 1e-9, start))
        spread = max(s_est.restart_values) - min(s_est.restart_values)
        out.append(_result("bound.continuity.generator_estimate", "||Phi_t - id|| <= t ||S|| with estimated ||S||",
                           {**p, "generator_estimate": s_est.value, "restart_spread": spread},
                           lhs, t * (s_est.value + spread), 1e-9, start, advisory=True))
    return out


def check_generator_scaling(d=32, E_grid=(1.0, 2.0, 4.0, 8.0, 16.0), specs=("sqrt", ("power", 0.25)), k_max=3,
                            restarts=8, seed=0):
    """``||S_A^k||_{ECD,E} <= 2^k ||A^k||_E`` across an energy grid, with the
    scaling ``||S_A||_{ECD,E} / sqrt(E)`` recorded as a sweep."""
    G = make_discrete("number", d)
    out, sweeps = [], []
    for spec in specs:
        A, label = _family(G, spec)
        S = commutator_generator(A)
        pts = []
        for E in E_grid:
            for k in range(1, k_max + 1):
                start = time.perf_counter()
                Sk = S
                for _ in range(k - 1):
                    Sk = Sk @ S
                lhs = ecd_lower(Sk, G, E, restarts=restarts, seed=seed).value
                rhs = 2**k * enorm(_power(A, k), G, E).value
                out.append(_result("bound.generator_power", "||S_A^k|| <= 2^k ||A^k||_E",
                                   {"A": label, "d": d, "E": E, "k": k, "seed": seed, "restarts": restarts},
                                   lhs, rhs, 1e-9, start))
                if k == 1:
                    pts.append((E, lhs / math.sqrt(E), (rhs - lhs) / math.sqrt(E)))
        sweeps.append(_sweep(f"generator.scaling.{label.replace(' ', '')}", "energy E", pts, {"A": label, "d": d}))
    return out, sweeps


def _power(A, k):
    return np.linalg.matrix_power(A, k) if k > 0 else np.eye(A.shape[0], dtype=complex)


def check_taylor_rates(A, G, E, k_max, t_grid, kind="unitary", restarts=8, seed=0, label="", k_min=1):
    """Taylor remainders of the unitary or Gaussian dynamics: bound at each ``t``
    and log-log slope at least ``k + 0.9``."""
    chan, gen = _semigroup(kind, A)
    sweeps, out = [], []
    for k in range(k_min, k_max + 1):
        norm_k = enorm(_power(A, k if kind == "unitary" else 2 * k), G, E).value
        pts = []
        for t in t_grid:
            start = time.perf_counter()
            rem = chan(t) - taylor_polynomial(gen, t, k)
            lhs = ecd_lower(rem, G, E, restarts=restarts, seed=seed).value
            rhs = 2 * (2 * t) ** k * norm_k / math.factorial(k)
            pts.append((t, lhs, rhs - lhs))
            out.append(_result(f"bound.taylor.{kind}", f"Taylor remainder of order {k} below 2(2t)^k||A^{'k' if kind == 'unitary' else '2k'}||_E/k!",
                               {"A": label, "d": G.dim, "E": E, "t": t, "k": k, "seed": seed, "restarts": restarts, "criterion": 8},
                               lhs, rhs, 1e-9, start))
        start = time.perf_counter()
        sw = _sweep(f"taylor.{kind}.k{k}", "time t", pts, {"A": label, "d": G.dim, "E": E, "k": k}, fit=True)
        sweeps.append(sw)
        if k >= 1:
            slope = sw.fitted_slope if sw.fitted_slope is not None else -np.inf
            out.append(_result(f"rate.taylor.{kind}", f"remainder of order {k} decays at rate >= k + 0.9",
                               {"A": label, "d": G.dim, "E": E, "k": k, "slope": slope, "criterion": 8},
                               k + 0.9, slope, 0.0, start))
    return sweeps, out


def series_tail(norms, t, n):
    """``sum_{j>n} (2t)^j norms[j] / j!`` over the supplied norms."""
    return float(sum((2 * t) ** j * norms[j] / math.factorial(j) for j in range(n + 1, len(norms))))


def analytic_tail(E, t, n, terms=200):
    """``sqrt(E) * sum_{j>n} (2t)^j / sqrt(j!)``."""
    if t == 0:
        return 0.0
    return math.sqrt(E) * sum(math.exp(j * math.log(2 * t) - 0.5 * math.lgamma(j + 1)) for j in range(n + 1, n + 1 + terms))


def check_series_convergence(A, G, E, t, n_max, kind="unitary", restarts=8, seed=0, label="", hyp_n=10,
                             target=1e-6, tail_terms=80):
    """Taylor remainders of growing order for ``A`` with ``||A^n||_E <= sqrt(n! E)``."""
    chan, gen = _semigroup(kind, A)
    out = []
    start = time.perf_counter()
    norms = [enorm(_power(A, j), G, E).value for j in range(n_max + tail_terms)]
    worst = max(norms[n] - math.sqrt(math.factorial(n) * E) for n in range(hyp_n + 1))
    out.append(_result("series.hypothesis", "||A^n||_E <= sqrt(n! E)",
                       {"A": label, "d": G.dim, "E": E, "n_max": hyp_n, "criterion": 9}, worst, 0.0, 1e-8, start))
    pts = []
    phi_t = chan(t) if t > 0 else Superoperator.identity(G.dim)
    for n in range(n_max + 1):
        rem = phi_t - taylor_polynomial(gen, t, n)
        r = ecd_lower(rem, G, E, restarts=restarts, seed=seed).value if t > 0 else 0.0
        pts.append((n, r, series_tail(norms, t, n) - r))
    sweep = _sweep(f"series.{kind}", "series length n", pts, {"A": label, "d": G.dim, "E": E, "t": t})
    r = [p[1] for p in sweep.points]
    hump = int(np.argmax(r))
    start = time.perf_counter()
    rise = max([r[i + 1] - r[i] for i in range(hump, len(r) - 1)] + [0.0])
    params = {"A": label, "d": G.dim, "E": E, "t": t, "n_max": n_max, "hump": hump, "criterion": 9}
    out.append(_result("series.monotone_tail", "remainders decrease beyond the hump", params, rise, 0.0, 1e-12, start))
    out.append(_result("series.target", f"remainder at n_max below {target:g}", params, r[-1], target, 0.0, start))
    out.append(_result("series.tail_bound", "remainder below the computed tail sum", params, r[-1],
                       series_tail(norms, t, n_max), 1e-12, start))
    out.append(_result("series.analytic_tail", "remainder below sqrt(E) sum (2t)^j / sqrt(j!)", params, r[-1],
                       analytic_tail(E, t, n_max), 1e-12, start))
    return sweep, out


def check_threshold_sweep(alpha_list=(0.25, 0.5, 0.75), d_list=(16, 32, 64, 128), E_list=(1.0, 4.0, 16.0),
                          exponent_scale=1, stable_tol=1e-6):
    """Ratios ``||G^a||_E / sqrt(E)`` across truncations, with ``a = exponent_scale * alpha``.

    Below the threshold the ratios are stable in ``d`` and decrease in ``E``;
    at it they equal 1; above it they grow like ``E_max^{a - 1/2}``.
    """
    sweeps, out = [], []
    threshold = 0.5 / exponent_scale
    for alpha in alpha_list:
        power = exponent_scale * alpha
        ratio = {}
        for d in d_list:
            G = make_discrete("number", d)
            A = operator_family(G, "power", power)
            for E in E_list:
                ratio[d, E] = enorm(A, G, E).value / math.sqrt(E)
        for E in E_list:
            sweeps.append(_sweep(f"threshold.a{power:g}.E{E:g}", "dimension d",
                                 [(d, ratio[d, E], 0.0) for d in d_list], {"alpha": alpha, "power": power, "E": E}))
        start = time.perf_counter()
        params = {"alpha": alpha, "power": power, "d": list(d_list), "E": list(E_list), "criterion": 10}
        if alpha < threshold:
            d1, d2 = d_list[-2], d_list[-1]
            change = max(abs(ratio[d2, E] - ratio[d1, E]) / ratio[d2, E] for E in E_list)
            out.append(_result("threshold.below.d_stable", "ratios stable in the truncation dimension",
                               params, change, stable_tol, 0.0, start))
            rise = max(ratio[d, E_list[i + 1]] - ratio[d, E_list[i]] for d in d_list for i in range(len(E_list) - 1))
            out.append(_result("threshold.below.E_decreasing", "ratios decrease in E", params, rise, 0.0, 0.0, start))
        elif alpha == threshold:
            # a budget above the top level leaves the constraint inactive
            dev = max(abs(v - 1.0) for (d, E), v in ratio.items() if E <= d - 1)
            out.append(_result("threshold.at.unit_ratio", "ratios equal 1 for budgets within the spectrum",
                               params, dev, 1e-9, 0.0, start))
        else:
            dev, drop = 0.0, -np.inf
            for E in E_list:
                for d1, d2 in zip(d_list[:-1], d_list[1:]):
                    if E > d1 - 1:
                        continue
                    expected = ((d2 - 1) / (d1 - 1)) ** (power - 0.5)
                    dev = max(dev, abs(ratio[d2, E] / ratio[d1, E] - expected))
                    drop = max(drop, ratio[d1, E] - ratio[d2, E])
            out.append(_result("threshold.above.growth_factor", "ratios grow by (E_max ratio)^(a - 1/2)",
                               params, dev, 1e-6, 0.0, start))
            out.append(_result("threshold.above.increasing", "ratios increase with d", params, drop, 0.0, 0.0, start))
    return sweeps, out


# -- inequality suite -----------------------------------------------------------


def _feasible_state(d, G, E, rng, trace_scale=True):
    rho = _random_state(d, rng, rank=int(rng.integers(1, d + 1)))
    en = float(np.real(np.diagonal(rho)) @ G.eigenvalues)
    if en > E:
        w = 1.0 - E / en
        rho = (1 - w) * rho
        rho[0, 0] += w
    if trace_scale:
        rho = rho * float(rng.uniform(0.5, 1.0))
    return rho


def check_inequality_suite(d_list=(2, 3), E=0.5, seed=0, n_samples=500, restarts=4, n_phi_cb=20):
    """Sandwich inequalities, tensoring with the identity, power bounds and the
    rescaling inequality for concave functions, on random instances."""
    rng = np.random.default_rng(seed)
    agg = {name: [-np.inf, 0, 0.0, 0.0] for name in ("star", "ab_cb", "tensor_identity", "power", "concave_rescaling")}
    starts = {name: time.perf_counter() for name in agg}
    elapsed = {name: 0.0 for name in agg}

    def record(name, lhs, rhs):
        slot = agg[name]
        if lhs - rhs > slot[0]:
            slot[0], slot[2], slot[3] = lhs - rhs, lhs, rhs
        slot[1] += 1

    for i in range(n_samples):
        d = d_list[i % len(d_list)]
        G = make_discrete("number", d)
        A = random_hermitian(d, rng)
        B = random_hermitian(d, rng)
        rho = _feasible_state(d, G, E, rng)
        na, nb = enorm(A, G, E).value, enorm(B, G, E).value

        t0 = time.perf_counter()
        record("star", abs(np.trace(sandwich(A, rho, B))), na * nb)
        elapsed["star"] += time.perf_counter() - t0

        t0 = time.perf_counter()
        sigma = _feasible_state(d, G, E, rng)
        mix = float(rng.uniform(0.0, 1.0))
        sigma = (1 - mix) * rho + mix * sigma
        eps = trace_norm(rho - sigma)
        if eps > 1e-12:
            lhs = trace_norm(sandwich(A, rho, B) - sandwich(A, sigma, B))
            rhs = na * math.sqrt(eps) * enorm(B, G, 4 * E / eps).value + nb * math.sqrt(eps) * enorm(A, G, 4 * E / eps).value
            record("ab_cb", lhs, rhs)
        elapsed["ab_cb"] += time.perf_counter() - t0

        t0 = time.perf_counter()
        dk = 3
        ext = enorm(np.kron(A, np.eye(dk)), G.extended(dk), E).value
        record("tensor_identity", abs(ext - na), 1e-8)
        elapsed["tensor_identity"] += time.perf_counter() - t0

        t0 = time.perf_counter()
        P = _random_psd(d, rng)
        nP = enorm(P, G, E).value
        for p in (0.25, 0.5, 0.75):
            Pp = hermitian_function(P, lambda x, p=p: np.power(np.clip(x, 0, None), p))
            record("power", enorm(Pp, G, E).value, nP**p + 1e-8)
        elapsed["power"] += time.perf_counter() - t0

        t0 = time.perf_counter()
        x, y = np.sort(rng.uniform(0.2, 3.0, 2))
        z = float(rng.uniform(0.05, 3.0))
        if y > x:
            record("concave_rescaling", x * enorm(A, G, z / x).value ** 2, y * enorm(A, G, z / y).value ** 2 + 1e-8 * (1 + na**2))
        elapsed["concave_rescaling"] += time.perf_counter() - t0

    claims = {
        "star": "|Tr A rho B^*| <= ||A||_E ||B||_E",
        "ab_cb": "||A rho B^* - A sigma B^*||_1 <= ||A||_E f_B + ||B||_E f_A",
        "tensor_identity": "||A ⊗ I||_E = ||A||_E",
        "power": "||A^p||_E <= ||A||_E^p",
        "concave_rescaling": "x f(z/x) <= y f(z/y) for f = ||A||^2",
    }
    out = []
    for name, (worst, count, lhs, rhs) in agg.items():
        r = _result(f"inequality.{name}", claims[name],
                    {"d": list(d_list), "E": E, "seed": seed, "n_samples": count, "criterion": 11},
                    lhs, rhs, 0.0, starts[name])
        r.runtime_ms = int(round(1000 * elapsed[name]))
        out.append(r)
    out.extend(_phi_cb_checks(E, seed, n_phi_cb, restarts))
    return out


def _phi_cb_checks(E, seed, n, restarts):
    """Continuity of ``Phi ⊗ id`` on pure inputs with the estimated ECD norm on the right."""
    rng = np.random.default_rng([seed, 7])
    d = 2
    G = make_discrete("number", d)
    g_comp = G.extended(d)
    start = time.perf_counter()
    worst, info = -np.inf, {}
    for i in range(n):
        chans = random_channels(2, d, rng)
        phi = chans[0] - chans[1]
        u = sample_constrained_vector(g_comp, E, rng=rng)
        v = u + 0.3 * float(rng.uniform()) * sample_constrained_vector(g_comp, E, rng=rng)
        v = v / np.linalg.norm(v)
        if float(g_comp @ np.abs(v) ** 2) > E:
            v = u
        rho, sigma = np.outer(u, u.conj()), np.outer(v, v.conj())
        eps = 0.5 * trace_norm(rho - sigma)
        if eps < 1e-6:
            continue
        lhs = trace_norm(phi.apply_extended(rho - sigma, d))
        est = ecd_lower(phi, G, 2 * E / eps**2, restarts=restarts, seed=seed + i)
        spread = max(est.restart_values) - min(est.restart_values)
        rhs = 2 * eps * (est.value + spread)
        if lhs - rhs > worst:
            worst, info = lhs - rhs, {"lhs": lhs, "rhs": rhs, "eps": eps, "spread": spread}
    lhs = info.get("lhs", 0.0)
    rhs = info.get("rhs", 0.0)
    return [_result("inequality.phi_cb", "||Phi⊗id(rho - sigma)||_1 <= 2 eps ||Phi||_{2E/eps^2} (estimated)",
                    {"d": d, "E": E, "seed": seed, "n": n, "restarts": restarts, "criterion": 11, **info},
                    lhs, rhs, 1e-9, start, advisory=True)]


# -- suite --------------------------------------------------------------------

DEFAULT_SUITE = {
    "seed": 0,
    "restarts": 8,
    "duality": {"n_instances": 200, "d_max": 16, "E": [0.5, 1.0, 4.0]},
    "sqrt_values": {"d": 64, "E": [1.0, 2.0, 4.0, 7.5]},
    "oracles": {"n_enorm": 50, "n_ecd": 10, "E": [0.1, 0.5, 1.0], "restarts": 16},
    "norm_profile": {"d": 32, "n_ops": 20},
    "channels": {"n": 20, "d": 3, "E": [0.25, 1.0, 2.0], "restarts": 4},
    "ecd_properties": {"d": 2, "E": [0.1, 0.3, 0.6, 1.0]},
    "semigroup_laws": {"dims": [2, 4, 8], "times": [0.1, 0.3, 1.0]},
    "generator": {"d": 4},
    "continuity": {"d": 32, "E": [1.0, 4.0], "t": [0.01, 0.1, 0.5], "operators": ["sqrt", ["power", 0.25], "sqrt_log"]},
    "generator_scaling": {"d": 32, "E": [1.0, 2.0, 4.0, 8.0, 16.0], "k_max": 2},
    "gkls": {"d": 4, "n_instances": 3, "E": [0.5, 2.0], "t": [0.01, 0.1]},
    "taylor": {"d": 16, "E": 4.0, "k_max": 3, "t": [0.001, 0.0018, 0.0032, 0.0056, 0.01, 0.018, 0.032, 0.056, 0.1],
               "operator": ["power", 0.25]},
    "series": {"d": 32, "E": 4.0, "t": 1.0, "n_max": 20},
    "threshold": {"alpha": [0.25, 0.5, 0.75], "d": [16, 32, 64, 128], "E": [1.0, 4.0, 16.0]},
    "threshold_gaussian": {"alpha": [0.125, 0.25, 0.375], "d": [16, 32, 64, 128], "E": [1.0, 4.0, 16.0]},
    "inequalities": {"d": [2, 3], "E": 0.5, "n_samples": 500},
}


def _merge(base, override):
    out = dict(base)
    for k, v in (override or {}).items():
        if isinstance(v, dict) and isinstance(out.get(k), dict):
            out[k] = _merge(out[k], v)
        else:
            out[k] = v
    return out


def _task_list(cfg):
    seed = cfg["seed"]
    rs = cfg["restarts"]
    tasks = []
    c = cfg["duality"]
    tasks.append(("duality", check_duality, dict(n_instances=c["n_instances"], d_max=c["d_max"], E_list=tuple(c["E"]), seed=seed)))
    c = cfg["sqrt_values"]
    tasks.append(("sqrt_values", check_sqrt_values, dict(d=c["d"], E_list=tuple(c["E"]))))
    c = cfg["oracles"]
    tasks.append(("oracles", check_oracles, dict(n_enorm=c["n_enorm"], n_ecd=c["n_ecd"], E_list=tuple(c["E"]),
                                                 seed=seed, restarts=c.get("restarts", rs))))
    c = cfg["norm_profile"]
    tasks.append(("norm_profile", check_norm_profile, dict(d=c["d"], n_ops=c["n_ops"], seed=seed)))
    c = cfg["channels"]
    tasks.append(("channels", check_channel_normalization, dict(n=c["n"], d=c["d"], E_list=tuple(c["E"]), seed=seed,
                                                                restarts=c.get("restarts", rs))))
    c = cfg["ecd_properties"]
    tasks.append(("ecd_properties", check_ecd_properties, dict(d=c["d"], E_list=tuple(c["E"]), seed=seed, restarts=rs)))
    c = cfg["semigroup_laws"]
    tasks.append(("semigroup_laws", check_semigroup_laws, dict(dims=tuple(c["dims"]), times=tuple(c["times"]), seed=seed)))
    tasks.append(("generator", check_generator_consistency, dict(d=cfg["generator"]["d"], seed=seed)))
    c = cfg["continuity"]
    for spec in c["operators"]:
        for E in c["E"]:
            tasks.append(("continuity", _continuity_task, dict(d=c["d"], spec=spec, E=E, t_grid=tuple(c["t"]), restarts=rs, seed=seed)))
    c = cfg["generator_scaling"]
    tasks.append(("generator_scaling", check_generator_scaling, dict(d=c["d"], E_grid=tuple(c["E"]), k_max=c["k_max"],
                                                                     restarts=rs, seed=seed)))
    c = cfg["gkls"]
    for i in range(c["n_instances"]):
        for E in c["E"]:
            tasks.append(("gkls", _gkls_task, dict(d=c["d"], index=i, E=E, t_grid=tuple(c["t"]), restarts=rs, seed=seed)))
    c = cfg["taylor"]
    for kind in ("unitary", "gaussian"):
        tasks.append(("taylor", _taylor_task, dict(d=c["d"], spec=c["operator"], E=c["E"], k_max=c["k_max"],
                                                   t_grid=tuple(c["t"]), kind=kind, restarts=rs, seed=seed)))
    c = cfg["series"]
    tasks.append(("series", _series_task, dict(d=c["d"], E=c["E"], t=c["t"], n_max=c["n_max"], restarts=rs, seed=seed)))
    c = cfg["threshold"]
    tasks.append(("threshold", check_threshold_sweep, dict(alpha_list=tuple(c["alpha"]), d_list=tuple(c["d"]), E_list=tuple(c["E"]))))
    c = cfg["threshold_gaussian"]
    tasks.append(("threshold", check_threshold_sweep, dict(alpha_list=tuple(c["alpha"]), d_list=tuple(c["d"]),
                                                          E_list=tuple(c["E"]), exponent_scale=2)))
    c = cfg["inequalities"]
    tasks.append(("inequalities", check_inequality_suite, dict(d_list=tuple(c["d"]), E=c["E"], seed=seed,
                                                               n_samples=c["n_samples"], restarts=min(rs, 4))))
    return tasks


def _continuity_task(d, spec, E, t_grid, restarts, seed):
    G = make_discrete("number", d)
    A, label = _family(G, spec if isinstance(spec, str) else tuple(spec))
    return check_continuity_bounds(A, G, E, t_grid, restarts=restarts, seed=seed, label=label)


def _gkls_task(d, index, E, t_grid, restarts, seed):
    rng = np.random.default_rng([seed, index])
    V, K = random_gkls(d, 2, rng)
    G = make_discrete("number", d)
    return check_gkls_bounds(V, K, G, E, t_grid, restarts=restarts, seed=seed, label=f"random#{index}")


def _taylor_task(d, spec, E, k_max, t_grid, kind, restarts, seed):
    G = make_discrete("number", d)
    A, label = _family(G, spec if isinstance(spec, str) else tuple(spec))
    return check_taylor_rates(A, G, E, k_max, t_grid, kind=kind, restarts=restarts, seed=seed, label=label)


def _series_task(d, E, t, n_max, restarts, seed):
    G = make_discrete("number", d)
    A = operator_family(G, "sqrt_log")
    sweep, checks = check_series_convergence(A, G, E, t, n_max, restarts=restarts, seed=seed, label="sqrt_log")
    return [sweep], checks


def _run_task(task):
    name, fn, kwargs = task
    res = fn(**kwargs)
    checks, sweeps = [], []
    items = res if isinstance(res, tuple) else (res,)
    for item in items:
        for obj in item if isinstance(item, list) else [item]:
            (sweeps if isinstance(obj, SweepResult) else checks).append(obj)
    return name, checks, sweeps


def max_workers():
    """Worker cap from ``ECDNORMS_MAX_WORKERS`` (default 1)."""
    try:
        return max(1, int(os.environ.get("ECDNORMS_MAX_WORKERS", "1")))
    except ValueError:
        return 1


def run_suite(config=None, only=None):
    """Run the default verification suite, optionally overridden by ``config``.

    Returns ``(checks, sweeps, resolved_config)``. Results come back in task
    order regardless of the worker count.
    """
    cfg = _merge(DEFAULT_SUITE, config)
    tasks = _task_list(cfg)
    if only:
        tasks = [t for t in tasks if t[0] in set(only)]
    workers = min(max_workers(), len(tasks))
    if workers > 1:
        from concurrent.futures import ProcessPoolExecutor

        with ProcessPoolExecutor(workers) as pool:
            results = list(pool.map(_run_task, tasks))
    else:
        results = [_run_task(t) for t in tasks]
    checks, sweeps = [], []
    for _, c, s in results:
        checks.extend(c)
        sweeps.extend(s)
    return checks, sweeps, cfg
