"""Release gates, one test per shipped guarantee.

Every test prints a single ACCEPTANCE line (visible even under capture)
so a full run reads as a checklist.  Fixtures are self-contained; only
the public API is exercised.  Tolerances and draw counts are stated
inline next to each check.
"""

import math
import time

import numpy as np
import pytest
import scipy.sparse as sp

from support import (
    ALL_KINDS,
    finite_difference_gradient,
    finite_difference_hessian,
    make_spec,
    random_interior,
)
from test_bench import FRONTIER_SWEEP, L1_SWEEP, sweep_records

from conepath.bench import (
    perturbation_study,
    reduction_metrics,
    run_sequence,
    trend_statistic,
)
from conepath.cones import (
    ConeProduct,
    ConeSpec,
    barrier_gradient,
    barrier_hessian,
    barrier_value,
    svec,
)
from conepath.ipm import ConicProblem, SolveStatus, cold_start, solve
from conepath.problems import Family, SequenceSpec
from conepath.smoothing import project, project_dual, smooth, smooth_newton
from conepath.warmstart import (
    PreviousSolution,
    certify_central_path,
    residual_bound_check,
    warmstart,
)

LAMBDA_STAR = 2.0 - math.sqrt(3.0)


def omega(t):
    return t - math.log1p(t)


@pytest.fixture
def announce(capsys):
    """Print one PASS/FAIL line per criterion, then assert it."""

    def _announce(num, ok, detail):
        with capsys.disabled():
            print(f"\nACCEPTANCE {num:2d} [{'PASS' if ok else 'FAIL'}] {detail}")
        assert ok, f"acceptance {num}: {detail}"

    return _announce


# ---------------------------------------------------------------------------
# 1: barrier calculus on interior samples


def test_01_barrier_calculus(announce):
    rng = np.random.default_rng(101)
    t0 = time.perf_counter()
    worst_ident = 0.0
    worst_fd = 0.0
    for kind in ALL_KINDS:
        for _ in range(1000):
            spec = make_spec(kind, rng=rng)
            s = random_interior(spec, rng)
            nu = spec.degree
            f = barrier_value(spec, s)
            g = barrier_gradient(spec, s)
            H = barrier_hessian(spec, s)
            gn = float(np.linalg.norm(g))
            Hn = float(np.linalg.norm(H))
            t = float(np.exp(rng.uniform(np.log(0.1), np.log(10.0))))

            checks = (
                abs(float(g @ s) + nu) / nu,
                float(np.linalg.norm(barrier_gradient(spec, t * s) - g / t))
                / (gn / t),
                float(np.linalg.norm(barrier_hessian(spec, t * s) - H / t**2))
                / (Hn / t**2),
                abs(barrier_value(spec, t * s) - f + nu * math.log(t))
                / max(1.0, abs(f)),
                float(np.linalg.norm(H @ s + g)) / gn,
            )
            worst_ident = max(worst_ident, *checks)

            gf = finite_difference_gradient(lambda v: barrier_value(spec, v), s)
            worst_fd = max(worst_fd, float(np.linalg.norm(gf - g)) / max(1.0, gn))
            Hf = finite_difference_hessian(lambda v: barrier_gradient(spec, v), s)
            worst_fd = max(worst_fd, float(np.linalg.norm(Hf - H)) / max(1.0, Hn))
    elapsed = time.perf_counter() - t0
    ok = worst_ident <= 1e-10 and worst_fd <= 1e-6 and elapsed < 30.0
    announce(
        1,
        ok,
        f"identities worst {worst_ident:.2e} (tol 1e-10), finite differences "
        f"worst {worst_fd:.2e} (tol 1e-6), 1000 points/kind in {elapsed:.1f}s",
    )


# ---------------------------------------------------------------------------
# 2: closed-form smoothing residuals and the Newton cross-check


def test_02_closed_form_smoothing(announce):
    rng = np.random.default_rng(202)
    worst_resid = 0.0
    for kind in ("nonneg", "soc", "psd"):
        spec = make_spec(kind, dim=8, order=4)
        for _ in range(1000):
            c = rng.normal(scale=2.0, size=spec.dim)
            mu = 10 ** rng.uniform(-8, 1)
            res = smooth(spec, c, mu)
            worst_resid = max(
                worst_resid,
                res.optimality_residual / max(1.0, float(np.linalg.norm(c))),
            )
    # the Newton route resolves the minimizer to ~1e-11 for mu >= 1e-4;
    # below that its stopping rule is looser than the closed forms
    worst_agree = 0.0
    for kind in ("nonneg", "soc"):
        spec = make_spec(kind, dim=8)
        for _ in range(200):
            c = rng.normal(scale=2.0, size=spec.dim)
            mu = 10 ** rng.uniform(-4, 1)
            a = smooth(spec, c, mu).s
            b = smooth_newton(spec, c, mu).s
            worst_agree = max(
                worst_agree,
                float(np.linalg.norm(a - b)) / max(1.0, float(np.linalg.norm(a))),
            )
    ok = worst_resid <= 1e-8 and worst_agree <= 1e-8
    announce(
        2,
        ok,
        f"stationarity residual worst {worst_resid:.2e} (tol 1e-8, 1000 "
        f"draws/family), closed form vs Newton worst {worst_agree:.2e} (tol 1e-8)",
    )


# ---------------------------------------------------------------------------
# 3: damped-Newton decrease and the quadratic-phase cascade


def test_03_damped_newton_contract(announce):
    rng = np.random.default_rng(303)
    viol_dec = 0
    viol_cascade = 0
    iters = {"exp": [], "pow": []}
    for kind in ("exp", "pow"):
        for _ in range(200):
            spec = make_spec(kind, rng=rng)
            c = rng.normal(scale=2.0, size=spec.dim)
            mu = 10 ** rng.uniform(-2, 1)
            res = smooth_newton(spec, c, mu, collect_trace=True)
            iters[kind].append(res.newton_iters)
            rows = res.trace
            for i in range(len(rows) - 1):
                lam, fs, alpha = rows[i]
                lam1 = rows[i + 1][0]
                fs1 = rows[i + 1][1]
                if alpha <= 0.0:
                    continue
                if fs1 > fs - omega(lam) + 1e-12 * max(1.0, abs(fs)):
                    viol_dec += 1
                # the 1.5-power contraction needs lam above the float
                # floor; below 1e-6 the next decrement is rounding noise
                if 1e-6 <= lam <= LAMBDA_STAR and lam1 > lam**1.5 * (1.0 + 1e-9):
                    viol_cascade += 1
    med_exp = float(np.median(iters["exp"]))
    med_pow = float(np.median(iters["pow"]))
    ok = viol_dec == 0 and viol_cascade == 0 and max(med_exp, med_pow) <= 20.0
    announce(
        3,
        ok,
        f"decrease violations {viol_dec}, cascade violations {viol_cascade}, "
        f"median steps exp {med_exp:.0f} / pow {med_pow:.0f} (limit 20)",
    )


# ---------------------------------------------------------------------------
# 4: warmstart outputs sit on the certified central path


def test_04_warmstart_path_certificates(announce):
    rng = np.random.default_rng(404)
    trials = 0
    certified = 0
    fallbacks = 0
    for kind in ALL_KINDS:
        for _ in range(200):
            trials += 1
            spec = make_spec(kind, rng=rng)
            cones = ConeProduct((spec,))
            s_star = random_interior(spec, rng)
            # -grad f of an interior point is strictly dual-interior
            z_star = -barrier_gradient(spec, random_interior(spec, rng))
            mu0 = 10 ** rng.uniform(-8, -1)
            prev = PreviousSolution(np.zeros(1), s_star, z_star, problem=None)
            ws = warmstart(prev, cones, overrides={0: {"mu0": mu0}})
            fallbacks += len(ws.fallback_blocks)
            certified += bool(certify_central_path(ws, cones).ok)
    ok = certified == trials and fallbacks == 0
    announce(
        4,
        ok,
        f"{certified}/{trials} certified (gradient 1e-8, complementarity "
        f"1e-10 relative, strict interiority), {fallbacks} fallbacks",
    )


# ---------------------------------------------------------------------------
# 5: worst-case residual growth bounds on strictly complementary optima


def _bound_problem(cones, q, b):
    n = cones.dim
    return ConicProblem(
        P=sp.csc_matrix((n, n)),
        q=np.asarray(q, dtype=float),
        A=sp.csc_matrix(-np.eye(n)),
        b=np.asarray(b, dtype=float),
        cones=cones,
    )


def _perturbed_rhs(rng, s, x):
    # the residual scale must stay above ~1e-5: the bounds are tight for
    # these constructions and float rounding eats a smaller true slack
    delta = 10 ** rng.uniform(-5, -2)
    noise = delta * rng.choice([-1.0, 1.0], s.size) * rng.uniform(0.5, 1.0, s.size)
    return s - x + noise


def _bound_trial_nn(rng):
    m = 6
    cones = ConeProduct((ConeSpec.nonnegative(m),))
    active = rng.random(m) < 0.5
    active[0] = True
    active[1] = False
    s = np.where(active, 0.0, np.exp(rng.uniform(-1, 1, m)))
    z = np.where(active, np.exp(rng.uniform(-1, 1, m)), 0.0)
    x = rng.normal(size=m)
    return _bound_problem(cones, z.copy(), _perturbed_rhs(rng, s, x)), x, s, z


def _bound_trial_soc(rng):
    d = 5
    cones = ConeProduct((ConeSpec.second_order(d),))
    u = rng.normal(size=d - 1)
    u /= np.linalg.norm(u)
    a = np.exp(rng.uniform(-0.5, 1.0))
    g = np.exp(rng.uniform(-0.5, 1.0))
    s = np.concatenate([[a], a * u])
    z = np.concatenate([[g], -g * u])
    x = rng.normal(size=d)
    return _bound_problem(cones, z.copy(), _perturbed_rhs(rng, s, x)), x, s, z


def _bound_trial_psd(rng):
    order = 3
    cones = ConeProduct((ConeSpec.psd_triangle(order),))
    Q, _ = np.linalg.qr(rng.normal(size=(order, order)))
    a = np.exp(rng.uniform(-0.5, 1.0, 2))
    g = np.exp(rng.uniform(-0.5, 1.0))
    S = (Q * np.array([a[0], a[1], 0.0])) @ Q.T
    Z = (Q * np.array([0.0, 0.0, g])) @ Q.T
    s = svec(S)
    z = svec(Z)
    x = rng.normal(size=s.size)
    return _bound_problem(cones, z.copy(), _perturbed_rhs(rng, s, x)), x, s, z


def test_05_residual_growth_bounds(announce):
    rng = np.random.default_rng(505)
    counts = {}
    for family, gen in (
        ("nonneg", _bound_trial_nn),
        ("soc", _bound_trial_soc),
        ("psd", _bound_trial_psd),
    ):
        good = 0
        for _ in range(200):
            prob, x, s, z = gen(rng)
            prev = PreviousSolution(x, s, z, problem=prob)
            ws = warmstart(prev, prob.cones)
            rep = residual_bound_check(prev, ws, prob)
            good += bool(rep.applicable and rep.satisfied)
        counts[family] = good
    ok = all(v == 200 for v in counts.values())
    announce(
        5,
        ok,
        "bound and slack-shift inequalities hold on "
        + ", ".join(f"{k} {v}/200" for k, v in counts.items()),
    )


# ---------------------------------------------------------------------------
# 6: solver gallery with known optima plus infeasibility detection


def _lp(q, A, b, cones):
    q = np.asarray(q, dtype=float)
    n = q.size
    return ConicProblem(
        P=sp.csc_matrix((n, n)),
        q=q,
        A=sp.csc_matrix(np.asarray(A, dtype=float)),
        b=np.asarray(b, dtype=float),
        cones=cones,
    )


def _qp(P, q, A, b, cones):
    prob = _lp(q, A, b, cones)
    return ConicProblem(
        P=sp.csc_matrix(np.asarray(P, dtype=float)),
        q=prob.q,
        A=prob.A,
        b=prob.b,
        cones=cones,
    )


def _nn(m):
    return ConeProduct((ConeSpec.nonnegative(m),))


def _analytic_fixtures():
    fixtures = []

    def add(name, prob, opt):
        fixtures.append((name, prob, float(opt)))

    for n in (2, 5, 8):
        add(f"lp-box-{n}", _lp(np.ones(n), -np.eye(n), -np.ones(n), _nn(n)), n)
    add("lp-weighted", _lp([1.0, 2.0, 3.0, 4.0], -np.eye(4), -np.ones(4), _nn(4)), 10.0)
    add(
        "lp-simplex",
        _lp([-1.0, -1.0], [[1, 1], [-1, 0], [0, -1]], [1.0, 0.0, 0.0], _nn(3)),
        -1.0,
    )

    for n in (2, 4):
        add(
            f"qp-shifted-{n}",
            _qp(np.eye(n), -np.ones(n), -np.eye(n), np.zeros(n), _nn(n)),
            -0.5 * n,
        )
    add(
        "qp-interior",
        _qp(np.eye(3), -2.0 * np.ones(3), -np.eye(3), -np.ones(3), _nn(3)),
        -6.0,
    )
    add(
        "qp-equality",
        _qp(np.eye(2), np.zeros(2), [[1, 1]], [2.0], ConeProduct((ConeSpec.zero(1),))),
        1.0,
    )
    add(
        "qp-simplex-mixed",
        _qp(
            np.eye(2),
            np.zeros(2),
            [[1, 1], [-1, 0], [0, -1]],
            [1.0, 0.0, 0.0],
            ConeProduct((ConeSpec.zero(1), ConeSpec.nonnegative(2))),
        ),
        0.25,
    )

    for tag, v in (("11", (1.0, 1.0)), ("122", (1.0, 2.0, 2.0)), ("34", (3.0, 4.0))):
        d = len(v) + 1
        A = np.zeros((d, 1))
        A[0, 0] = -1.0
        b = np.concatenate([[0.0], v])
        add(
            f"socp-norm-{tag}",
            _lp([1.0], A, b, ConeProduct((ConeSpec.second_order(d),))),
            float(np.linalg.norm(v)),
        )

    for tag, diag in (("eye2", (1.0, 1.0)), ("eye3", (1.0, 1.0, 1.0)), ("d12", (1.0, 2.0))):
        order = len(diag)
        dim = order * (order + 1) // 2
        add(
            f"sdp-trace-{tag}",
            _lp(
                svec(np.eye(order)),
                -np.eye(dim),
                -svec(np.diag(diag)),
                ConeProduct((ConeSpec.psd_triangle(order),)),
            ),
            float(sum(diag)),
        )

    col = np.array([[-1.0], [0.0], [0.0]])
    for x2, x3 in ((1.0, 1.0), (1.0, 2.0), (2.0, 2.0)):
        add(
            f"exp-epigraph-{x2:g}-{x3:g}",
            _lp([1.0], col, [0.0, x2, x3], ConeProduct((ConeSpec.exponential(),))),
            x2 * math.exp(x3 / x2),
        )
    for alpha, x3 in ((0.6, 1.0), (0.3, 1.0), (0.5, 2.0), (0.7, 1.5)):
        add(
            f"pow-epigraph-{alpha:g}-{x3:g}",
            _lp([1.0], col, [0.0, 1.0, x3], ConeProduct((ConeSpec.power(alpha),))),
            x3 ** (1.0 / alpha),
        )
    return fixtures


def _infeasibility_fixtures():
    return [
        (
            "primal-empty-box",
            _lp([1.0], [[1.0], [-1.0]], [-1.0, 0.0], _nn(2)),
            SolveStatus.PRIMAL_INFEASIBLE,
        ),
        (
            "primal-crossed-bounds",
            _lp([1.0], [[-1.0], [1.0]], [-1.0, 0.0], _nn(2)),
            SolveStatus.PRIMAL_INFEASIBLE,
        ),
        (
            "primal-negative-sum",
            _lp(
                [1.0, 1.0],
                [[1, 1], [-1, 0], [0, -1]],
                [-1.0, 0.0, 0.0],
                ConeProduct((ConeSpec.zero(1), ConeSpec.nonnegative(2))),
            ),
            SolveStatus.PRIMAL_INFEASIBLE,
        ),
        (
            "dual-unbounded-descent",
            _lp(-np.ones(2), -np.eye(2), -np.ones(2), _nn(2)),
            SolveStatus.DUAL_INFEASIBLE,
        ),
        (
            "dual-unbounded-3d",
            _lp([-1.0, -2.0, -1.0], -np.eye(3), -np.ones(3), _nn(3)),
            SolveStatus.DUAL_INFEASIBLE,
        ),
    ]


def test_06_solver_fixture_gallery(announce):
    t0 = time.perf_counter()
    fixtures = _analytic_fixtures()
    solved = []
    worst_obj = 0.0
    for name, prob, opt in fixtures:
        rep = solve(prob, cold_start(prob))
        xs = rep.solution[0]
        obj = float(0.5 * (xs @ (prob.P @ xs)) + prob.q @ xs)
        err = abs(obj - opt) / max(1.0, abs(opt))
        worst_obj = max(worst_obj, err)
        if rep.status is SolveStatus.OPTIMAL and err <= 1e-6:
            solved.append(name)
    misses = [
        name
        for name, prob, expected in _infeasibility_fixtures()
        if solve(prob, cold_start(prob)).status is not expected
    ]
    elapsed = time.perf_counter() - t0
    ok = (
        len(fixtures) >= 20
        and len(solved) == len(fixtures)
        and not misses
        and elapsed < 60.0
    )
    announce(
        6,
        ok,
        f"{len(solved)}/{len(fixtures)} optima matched within 1e-6 "
        f"(worst {worst_obj:.2e}), {5 - len(misses)}/5 infeasibility statuses "
        f"correct, {elapsed:.1f}s",
    )


# ---------------------------------------------------------------------------
# 7: warm chains beat cold solves across three parametric families


def _arith_schedule(lo, step, hi):
    out = []
    v = lo
    while v <= hi + 1e-12:
        out.append(round(v, 10))
        v += step
    return tuple(out)


def test_07_sequence_reductions(announce):
    sequences = {
        "svm-l1": SequenceSpec(
            Family.SVM_L1,
            _arith_schedule(0.02, 0.01, 0.11),
            params={"samples": 60, "features": 6},
        ),
        "frontier": SequenceSpec(
            Family.EFFICIENT_FRONTIER,
            _arith_schedule(0.0002, 0.0002, 0.002),
            params={"assets": 20, "days": 60},
        ),
        "rebalance": SequenceSpec(
            Family.PORTFOLIO_REBALANCE,
            tuple(range(10)),
            params={"assets": 50, "window": 191},
        ),
    }
    ok = True
    parts = []
    for name, seq in sequences.items():
        rep = run_sequence(seq)
        cold = {r.problem_id: r.objective for r in rep.records if r.mode == "cold"}
        gaps = [
            abs(r.objective - cold[r.problem_id]) / max(1.0, abs(cold[r.problem_id]))
            for r in rep.records
            if r.mode == "warm" and r.status == "Optimal"
        ]
        gap = max(gaps) if gaps else float("inf")
        ok = ok and rep.r_iter <= 0.9 and gap <= 1e-6
        parts.append(f"{name} {rep.r_iter:.4f}")
    announce(
        7,
        ok,
        "geometric-mean iteration ratios " + ", ".join(parts) + " (target <= 0.9), warm objectives match cold within 1e-6",
    )


# ---------------------------------------------------------------------------
# 8: warm-start benefit decays monotonically with perturbation size


def test_08_perturbation_monotonicity(announce):
    grid = (1e-6, 1e-5, 1e-4, 1e-3, 1e-2, 1e-1)
    study = perturbation_study(grid, seeds=range(20), dims=(4, 2), horizon=10)
    rho = trend_statistic(study.curves)
    first = study.curves[0][1]
    last = study.curves[-1][1]
    ok = rho >= 0.8 and first < last
    announce(
        8,
        ok,
        f"trend statistic {rho:.3f} (need >= 0.8), ratio {first:.4f} at 1e-6 "
        f"vs {last:.4f} at 1e-1, {study.excluded} pairs excluded",
    )


# ---------------------------------------------------------------------------
# 9: aggregation reproduces the frozen sweep reductions to four decimals


def test_09_frozen_sweep_rates(announce):
    r1, _, _, _ = reduction_metrics(sweep_records(L1_SWEEP, "svm-l1"))
    r3, _, _, _ = reduction_metrics(sweep_records(FRONTIER_SWEEP, "frontier"))
    ok = round(r1, 4) == 0.4984 and round(r3, 4) == 0.5353
    announce(
        9,
        ok,
        f"regularization sweep {r1:.4f} (want 0.4984), frontier sweep "
        f"{r3:.4f} (want 0.5353)",
    )


# ---------------------------------------------------------------------------
# 10: smoothing converges to the projection; Moreau identity holds


def test_10_projection_limits(announce):
    rng = np.random.default_rng(1010)
    mus = (1e-2, 1e-4, 1e-6)
    viol = 0
    for kind in ALL_KINDS:
        spec = make_spec(kind, rng=rng, dim=6, order=3)
        for _ in range(100):
            c = rng.normal(scale=1.5, size=spec.dim)
            p = project(spec, c)
            d = [float(np.linalg.norm(smooth(spec, c, mu).s - p)) for mu in mus]
            viol += not (d[0] > d[1] > d[2])
    worst_moreau = 0.0
    for kind in ("nonneg", "soc", "psd"):
        spec = make_spec(kind, dim=6, order=3)
        for _ in range(100):
            c = rng.normal(scale=1.5, size=spec.dim)
            r = float(np.linalg.norm(project(spec, c) - project_dual(spec, -c) - c))
            worst_moreau = max(worst_moreau, r)
    ok = viol == 0 and worst_moreau <= 1e-10
    announce(
        10,
        ok,
        f"distance-to-projection strictly decreasing in {500 - viol}/500 "
        f"draws, Moreau residual worst {worst_moreau:.2e} (tol 1e-10)",
    )
