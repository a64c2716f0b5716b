"""Acceptance suite: one test per release criterion.

Each test prints a single verdict line (run with ``pytest -v -s
tests/test_acceptance.py`` to see them all) and then asserts, so the
suite doubles as a human-readable checklist.  Tolerances are stated
inline and are not adjusted anywhere else.
"""

import itertools
import math

import numpy as np
import pytest
from scipy import stats as sstats

from annealipm.annealing import SamplerConfig, anneal, make_schedule
from annealipm.bodies import ConvexBody, contains, support_min
from annealipm.boltzmann import (
    BoltzmannParams,
    l2_ratio_norm,
    l2_ratio_pair,
    log_partition,
    moments,
)
from annealipm.equivalence import (
    central_path,
    compare_paths,
    default_temperature_grid,
    heat_path,
    reweighting_update,
)
from annealipm.ipm import (
    DEFAULT_PATH_C,
    EntropicBarrier,
    LogBarrier,
    NewtonState,
    SampledStepConfig,
    damped_newton_step,
    follow_path,
    newton_decrement,
    sampled_newton_direction,
    sampled_newton_step,
)
from annealipm.walker import make_chain_state, run_chain


def _verdict(num, name, passed, detail=""):
    tag = "PASS" if passed else "FAIL"
    print(f"ACCEPTANCE {num:02d} {name}: {tag}" + (f" ({detail})" if detail else ""))
    assert passed, f"criterion {num} ({name}) failed: {detail}"


def test_01_quadrature_oracle_fidelity():
    a_exact = math.log(1.0 - math.exp(-1.0))
    mean_target = 0.418023
    ok = True
    detail = []
    for body in (ConvexBody.box(0.0, 1.0, n=1),
                 ConvexBody.hpolytope([[1.0], [-1.0]], [1.0, 0.0])):
        p = BoltzmannParams(np.array([1.0]), body)
        a_err = abs(log_partition(p) - a_exact)
        ms = moments(p)
        m_err = abs(ms.mean[0] - mean_target)
        h = 1e-4
        ap = log_partition(BoltzmannParams(np.array([1.0 + h]), body))
        am = log_partition(BoltzmannParams(np.array([1.0 - h]), body))
        a0 = log_partition(p)
        grad_err = abs((ap - am) / (2 * h) + ms.mean[0])
        hess_err = abs((ap - 2 * a0 + am) / h**2 - ms.covariance[0, 0])
        ok &= a_err <= 1e-8 and m_err <= 1e-6 and grad_err <= 1e-5 and hess_err <= 1e-4
        detail.append(f"{body.kind}: dA={a_err:.1e} dmean={m_err:.1e} "
                      f"dgrad={grad_err:.1e} dhess={hess_err:.1e}")
    _verdict(1, "quadrature-oracle-fidelity", ok, "; ".join(detail))


def test_02_gap_bound_exact():
    cases = [(ConvexBody.box(0.0, 1.0, n=1), np.array([1.0])),
             (ConvexBody.box(0.0, 1.0, n=2), np.array([1.0, 0.0])),
             (ConvexBody.simplex(2), np.array([1.0, 0.0]))]
    worst = -np.inf
    ok = True
    for body, theta_hat in cases:
        opt = support_min(body, theta_hat)
        for t in (1.0, 0.3, 0.1, 0.03):
            gap = float(theta_hat @ moments(BoltzmannParams(theta_hat / t, body)).mean) - opt
            ok &= gap <= body.n * t
            worst = max(worst, gap / (body.n * t))
    _verdict(2, "expected-gap-below-n-times-t", ok, f"worst gap/(n t) = {worst:.3f}")


def test_03_l2_schedule_condition():
    ok = True
    worst_norm = 0.0
    worst_agree = 0.0
    for n in (1, 2):
        body = ConvexBody.box(0.0, 1.0, n=n)
        theta_hat = np.zeros(n)
        theta_hat[0] = 1.0
        sched = make_schedule("entropic", body, theta_hat, eps=0.05, nu=float(n))
        temps = sched.temperatures()
        for t_prev, t_cur in zip(temps, temps[1:]):
            p_prev = BoltzmannParams(theta_hat / t_prev, body)
            pair = l2_ratio_pair(p_prev, theta_hat / t_cur)
            worst_norm = max(worst_norm, pair)
            ok &= pair <= 10.0
            gamma = t_prev / t_cur - 1.0
            ident = l2_ratio_norm(p_prev, gamma)
            direct = l2_ratio_norm(p_prev, gamma, method="direct")
            rel = abs(ident - direct) / direct
            worst_agree = max(worst_agree, rel)
            ok &= rel <= 1e-6
    _verdict(3, "l2-schedule-condition", ok,
             f"max ratio norm {worst_norm:.3f} <= 10, route agreement {worst_agree:.1e}")


def test_04_hit_and_run_stationarity():
    body = ConvexBody.box(0.0, 1.0, n=2)
    p = BoltzmannParams(np.array([2.0, 0.0]), body)
    state = make_chain_state(body, seed=0)
    trace = []
    run_chain(state, p, 200000, record_every=20, trace=trace)
    X = np.asarray(trace)
    ks1 = sstats.kstest(X[:, 0], lambda r: (1 - np.exp(-2 * r)) / (1 - np.exp(-2)))
    ks2 = sstats.kstest(X[:, 1], lambda r: np.asarray(r))
    ms = moments(p)
    se = X.std(axis=0, ddof=1) / math.sqrt(len(X))
    dev = np.abs(X.mean(axis=0) - ms.mean) / se
    ok = ks1.pvalue > 0.01 and ks2.pvalue > 0.01 and np.all(dev <= 3.0)
    _verdict(4, "hit-and-run-stationarity", ok,
             f"KS p = ({ks1.pvalue:.3f}, {ks2.pvalue:.3f}), mean dev = "
             f"({dev[0]:.2f}, {dev[1]:.2f}) se")


def _random_lp(n, m, seed):
    rng = np.random.default_rng(seed)
    A = rng.standard_normal((m, n))
    A -= A.mean(axis=0)  # rows sum to zero: positive spanning, bounded body
    A /= np.linalg.norm(A, axis=1)[:, None]
    b = np.ones(m)
    idx = np.array(list(itertools.combinations(range(m), n)))
    M, rhs = A[idx], b[idx]
    keep = np.abs(np.linalg.det(M)) > 1e-9
    pts = np.linalg.solve(M[keep], rhs[keep][..., None])[..., 0]
    verts = pts[np.all(pts @ A.T <= b + 1e-8, axis=1)]
    theta_hat = rng.standard_normal(n)
    theta_hat /= np.linalg.norm(theta_hat)
    body = ConvexBody.hpolytope(A, b, x0=np.zeros(n),
                                R=float(np.linalg.norm(verts, axis=1).max()) * 1.001)
    return body, theta_hat, float((verts @ theta_hat).min())


def test_05_ipm_invariant_suite():
    eps = 1e-4
    ok = True
    detail = []
    for n, m, seed in ((5, 10, 0), (10, 15, 1)):
        body, theta_hat, opt = _random_lp(n, m, seed)
        lb = LogBarrier(body)
        states = follow_path(lb, body, theta_hat, eps=eps, c=DEFAULT_PATH_C)
        cert = lb.nu + math.sqrt(lb.nu) / 4.0
        lam_ok = all(s.decrement < 1.0 / 3.0 for s in states)
        quad_ok = True
        bump_ok = True
        bump = 1.0 + DEFAULT_PATH_C / math.sqrt(lb.nu)
        for prev, cur in zip(states, states[1:]):
            entry = newton_decrement(lb, prev.x_hat, cur.t, theta_hat)
            if entry <= 1.0 / 3.0:
                quad_ok &= cur.decrement <= 2.0 * entry**2
            lam_here = newton_decrement(lb, prev.x_hat, prev.t, theta_hat)
            bump_ok &= entry <= (1.0 + DEFAULT_PATH_C) * lam_here + DEFAULT_PATH_C
        gap = float(theta_hat @ states[-1].x_hat) - opt
        gap_ok = gap <= cert / states[-1].t <= eps
        ok &= lam_ok and quad_ok and bump_ok and gap_ok
        detail.append(f"n={n}: {len(states)} epochs, gap {gap:.1e}, "
                      f"lam<1/3 {lam_ok}, quad {quad_ok}, bump {bump_ok}")
    _verdict(5, "ipm-invariant-suite", ok, "; ".join(detail))


def test_06_heat_path_equals_central_path():
    theta_hat = np.array([1.0, 0.0])
    ok = True
    detail = []
    for body, name in ((ConvexBody.box(0.0, 1.0, n=2), "box"),
                       (ConvexBody.simplex(2), "triangle")):
        grid = default_temperature_grid(body, 7)
        heat = heat_path(body, theta_hat, grid)
        ent = compare_paths(heat, central_path(body, theta_hat, EntropicBarrier(body), grid))
        log = compare_paths(heat, central_path(body, theta_hat, LogBarrier(body), grid))
        ok &= ent.max_residual <= 1e-4 and log.max_residual >= 1e-2
        detail.append(f"{name}: entropic {ent.max_residual:.1e}, log control {log.max_residual:.1e}")
    _verdict(6, "heat-path-equals-central-path", ok, "; ".join(detail))


def test_07_end_to_end_annealing():
    body = ConvexBody.box(0.0, 1.0, n=2)
    theta_hat = np.array([1.0, 0.0])
    sched = make_schedule("entropic", body, theta_hat, eps=0.05, nu=2.0)
    finals = np.array([
        float(theta_hat @ anneal(body, theta_hat, sched,
                                 SamplerConfig(seed=seed, steps=60, replicas=64)).final_x)
        for seed in range(20)
    ])
    bound = 2.0 * sched.temperatures()[-1]
    se = finals.std(ddof=1) / math.sqrt(len(finals))
    ok = finals.mean() <= bound + 3.0 * se
    _verdict(7, "end-to-end-annealing", ok,
             f"mean objective {finals.mean():.4f} <= {bound:.4f} + {3 * se:.4f}")


def test_08_epoch_count_scaling():
    ok = True
    worst = 0.0
    for n in (16, 64, 256, 1024):
        body = ConvexBody.box(0.0, 1.0, n=n)
        nus = sorted({max(1, n // 64), max(1, n // 16), max(1, n // 4), n})
        for nu in nus:
            t_c = make_schedule("classic", body, np.ones(n), eps=1e-3, t1=2.0).epochs
            t_e = make_schedule("entropic", body, np.ones(n), eps=1e-3,
                                nu=float(nu), t1=2.0).epochs
            ratio = t_e / t_c
            limit = 4.5 * math.sqrt(nu / n)
            worst = max(worst, ratio / limit)
            ok &= ratio <= limit
    _verdict(8, "epoch-count-scaling", ok, f"worst ratio/limit {worst:.3f}")


def test_09_entropic_self_concordance():
    ok = True
    detail = []
    fixtures = [
        (ConvexBody.box(0.0, 1.0, n=1), [[0.15], [0.3], [0.5], [0.7], [0.85]], [[1.0]]),
        (ConvexBody.box(0.0, 1.0, n=2),
         [(a, b) for a in (0.2, 0.5, 0.8) for b in (0.2, 0.5, 0.8)],
         [[1, 0], [0, 1], [1, 1], [1, -2]]),
    ]
    for body, points, dirs in fixtures:
        eb = EntropicBarrier(body)
        worst_third = 0.0
        nu_est = 0.0
        delta = 1e-3
        for xp in points:
            x = np.asarray(xp, dtype=float)
            ev = eb.evaluate(x)
            for hd in dirs:
                h = np.asarray(hd, dtype=float)
                h = h / np.linalg.norm(h)
                hp = eb.evaluate(x + delta * h).hessian
                hm = eb.evaluate(x - delta * h).hessian
                third = float(h @ (hp - hm) @ h) / (2.0 * delta)
                quad = float(h @ ev.hessian @ h)
                worst_third = max(worst_third, abs(third) / (2.0 * quad**1.5))
                nu_est = max(nu_est, float(ev.gradient @ h) ** 2 / quad)
        ok &= worst_third <= 1.05 and nu_est <= 1.3 * body.n
        detail.append(f"n={body.n}: third-deriv ratio {worst_third:.3f} <= 1.05, "
                      f"nu_est {nu_est:.2f} <= {1.3 * body.n:.1f}")
    _verdict(9, "entropic-self-concordance-spot-check", ok, "; ".join(detail))


def test_10_sampled_ipm():
    body = ConvexBody.box(0.0, 1.0, n=2)
    theta_hat = np.array([1.0, 0.0])
    state = NewtonState(x_hat=np.array([0.4, 0.5]), t=4.0, decrement=0.0, k=0)
    exact_step = damped_newton_step(EntropicBarrier(body), state, theta_hat)
    limit_step = sampled_newton_step(body, theta_hat, state,
                                     SampledStepConfig(exact_moments=True))
    limit_err = float(np.abs(exact_step.x_hat - limit_step.x_hat).max())
    d_exact, _, _ = sampled_newton_direction(body, theta_hat, state.x_hat, state.t,
                                             SampledStepConfig(exact_moments=True))
    angles = []
    for seed in range(10):
        cfg = SampledStepConfig(samples=2000, steps=40, seed=seed)
        d_s, _, _ = sampled_newton_direction(body, theta_hat, state.x_hat, state.t, cfg)
        cos = d_exact @ d_s / (np.linalg.norm(d_exact) * np.linalg.norm(d_s))
        angles.append(math.degrees(math.acos(min(1.0, max(-1.0, cos)))))
    ok = limit_err <= 1e-6 and max(angles) < 15.0
    _verdict(10, "sampled-ipm", ok,
             f"exact-moment mismatch {limit_err:.1e}, max angle {max(angles):.1f} deg")


def test_11_reweighting_diagnostic():
    body = ConvexBody.box(0.0, 1.0, n=1)
    ok = True
    detail = []
    for theta0 in (np.array([1.0]), np.array([2.0])):
        def err(delta):
            approx = reweighting_update(body, theta0, theta0 + delta)
            exact = moments(BoltzmannParams(theta0 + delta, body)).mean
            return float(np.linalg.norm(approx - exact))

        ratio = err(0.05) / err(0.025)
        ok &= 3.0 <= ratio <= 5.0
        detail.append(f"theta={theta0[0]}: ratio {ratio:.2f}")
    _verdict(11, "reweighting-first-order-diagnostic", ok, "; ".join(detail))
