"""Parametric problem generators at desk scale.

Each generator returns a ConicProblem in the solver's canonical form
min 0.5*x'Px + q'x s.t. Ax + s = b, s in K.  Families: L1/L2 soft-margin
SVMs, minimum-risk portfolios (variance and higher-moment risk), and
horizon-stacked MPC QPs, plus the entry-perturbation rule used for
warmstart sensitivity studies.  Generators are pure functions of their
arguments; randomness always flows through an explicit seed.
"""

import csv
import math
from dataclasses import dataclass, field
from enum import Enum

import numpy as np
import scipy.sparse as sp

from .cones import ConeProduct, ConeSpec
from .errors import DegenerateData, InfeasibleTarget, ParseError, Unsupported
from .ipm import ConicProblem


@dataclass(frozen=True)
class LabeledData:
    """Feature rows X (m samples by d features) with labels y in {-1,+1}."""

    X: np.ndarray
    y: np.ndarray

    def __post_init__(self):
        X = np.atleast_2d(np.asarray(self.X, dtype=float))
        y = np.asarray(self.y, dtype=float).ravel()
        if X.shape[0] != y.shape[0]:
            raise DegenerateData("sample/label count mismatch")
        if not np.all(np.isin(y, (-1.0, 1.0))):
            raise DegenerateData("labels must be -1 or +1")
        object.__setattr__(self, "X", X)
        object.__setattr__(self, "y", y)

    @property
    def samples(self):
        return self.X.shape[0]

    @property
    def features(self):
        return self.X.shape[1]


@dataclass(frozen=True)
class ReturnsData:
    """Return matrix R, rows = days, columns = assets."""

    R: np.ndarray

    def __post_init__(self):
        R = np.atleast_2d(np.asarray(self.R, dtype=float))
        if R.shape[0] <= 1:
            raise DegenerateData("need more than one day of returns")
        object.__setattr__(self, "R", R)

    @property
    def days(self):
        return self.R.shape[0]

    @property
    def assets(self):
        return self.R.shape[1]

    @property
    def mean(self):
        return self.R.mean(axis=0)

    def window(self, start, length):
        """Contiguous day window, for rolling-rebalance sequences."""
        if start < 0 or start + length > self.days:
            raise DegenerateData(
                f"window [{start}, {start + length}) outside {self.days} days"
            )
        return ReturnsData(self.R[start : start + length])


def synth_samples(m, dim, seed=0, separation=2.0):
    """Two Gaussian clusters, labels by cluster; mildly overlapping."""
    rng = np.random.default_rng(seed)
    half = m // 2
    y = np.concatenate([np.ones(m - half), -np.ones(half)])
    centers = np.zeros((m, dim))
    centers[:, 0] = y * (separation / 2.0)
    return LabeledData(X=centers + rng.standard_normal((m, dim)), y=y)


def synth_returns(n, d, seed=0):
    """Factor-model daily returns: 3 common factors plus idiosyncratic noise."""
    rng = np.random.default_rng(seed)
    k = 3
    factors = 0.01 * rng.standard_normal((d, k))
    loadings = rng.uniform(0.3, 1.0, (k, n))
    drift = rng.uniform(2e-4, 1e-3, n)
    idio = 0.005 * rng.standard_normal((d, n))
    return ReturnsData(R=drift + factors @ loadings + idio)


def load_returns_csv(path):
    """Rows = days, columns = assets; an optional non-numeric header row."""
    rows = []
    with open(path, newline="", encoding="utf-8") as fh:
        for i, rec in enumerate(csv.reader(fh), start=1):
            if not rec or all(cell.strip() == "" for cell in rec):
                continue
            vals = []
            for j, cell in enumerate(rec, start=1):
                try:
                    vals.append(float(cell))
                except ValueError:
                    if i == 1 and not rows:
                        vals = None
                        break
                    raise ParseError(f"row {i}, column {j}: not a number: {cell!r}")
            if vals is None:
                continue
            if rows and len(vals) != len(rows[0]):
                raise ParseError(
                    f"row {i}: expected {len(rows[0])} columns, got {len(vals)}"
                )
            rows.append(vals)
    if len(rows) <= 1:
        raise ParseError("need at least two data rows")
    return ReturnsData(R=np.array(rows))


def _svm_common(data, lam):
    if lam <= 0:
        raise Unsupported("regularization weight must be positive")
    if np.all(data.y > 0) or np.all(data.y < 0):
        raise DegenerateData("need samples from both classes")
    return data.X, data.y, data.samples, data.features


def gen_svm_l1(data, lam):
    """Soft-margin SVM with an L1 penalty on w, as an LP.

    Variables (w+, w-, bias, xi) with w = w+ - w-; minimizes
    lam*|w|_1 + mean hinge loss subject to y_i(x_i'w + bias) >= 1 - xi_i.
    """
    X, y, m, d = _svm_common(data, lam)
    n = 2 * d + 1 + m
    rows = []
    # margin rows: s_i = y_i(x_i'w + b) - 1 + xi_i >= 0
    margins = np.hstack(
        [
            -(y[:, None] * X),
            y[:, None] * X,
            -y[:, None],
            -np.eye(m),
        ]
    )
    rows.append(margins)
    # sign constraints on w+, w-, xi (bias free)
    signs = np.zeros((2 * d + m, n))
    signs[: 2 * d, : 2 * d] = -np.eye(2 * d)
    signs[2 * d :, 2 * d + 1 :] = -np.eye(m)
    rows.append(signs)
    A = sp.csc_matrix(np.vstack(rows))
    b = np.concatenate([-np.ones(m), np.zeros(2 * d + m)])
    q = np.concatenate([lam * np.ones(2 * d), [0.0], np.ones(m) / m])
    cones = ConeProduct((ConeSpec.nonnegative(2 * m + 2 * d),))
    return ConicProblem(P=sp.csc_matrix((n, n)), q=q, A=A, b=b, cones=cones)


def gen_svm_l2(data, lam):
    """Soft-margin SVM with an L2 penalty via epigraph t >= |w|_2 (bias free)."""
    X, y, m, d = _svm_common(data, lam)
    n = d + 1 + 1 + m  # (w, bias, t, xi)
    margins = np.hstack([-(y[:, None] * X), -y[:, None], np.zeros((m, 1)), -np.eye(m)])
    xi_rows = np.zeros((m, n))
    xi_rows[:, d + 2 :] = -np.eye(m)
    soc_rows = np.zeros((d + 1, n))
    soc_rows[0, d + 1] = -1.0  # s_0 = t
    soc_rows[1:, :d] = -np.eye(d)  # s_1.. = w
    A = sp.csc_matrix(np.vstack([margins, xi_rows, soc_rows]))
    b = np.concatenate([-np.ones(m), np.zeros(m + d + 1)])
    q = np.concatenate([np.zeros(d + 1), [lam], np.ones(m) / m])
    cones = ConeProduct((ConeSpec.nonnegative(2 * m), ConeSpec.second_order(d + 1)))
    return ConicProblem(P=sp.csc_matrix((n, n)), q=q, A=A, b=b, cones=cones)


def _covariance_factor(returns):
    """Upper-triangular U with U'U = sample covariance (jittered if needed)."""
    R = returns.R
    d = returns.days
    centered = R - returns.mean
    sigma = centered.T @ centered / (d - 1)
    try:
        return np.linalg.cholesky(sigma).T
    except np.linalg.LinAlgError:
        try:
            return np.linalg.cholesky(sigma + 1e-10 * np.eye(returns.assets)).T
        except np.linalg.LinAlgError:
            raise DegenerateData("covariance is not positive semidefinite")


def gen_portfolio(returns, r0):
    """Minimum-variance portfolio with a required mean return.

    min t  s.t.  e'x = 1,  (t, Ux) in K_soc,  rbar'x >= r0,  x >= 0.
    """
    rbar = returns.mean
    if r0 > np.max(rbar):
        raise InfeasibleTarget(
            f"required return {r0} exceeds best asset mean {np.max(rbar)}"
        )
    U = _covariance_factor(returns)
    na = returns.assets
    n = na + 1  # (x, t)
    budget = np.zeros((1, n))
    budget[0, :na] = 1.0
    ret_row = np.zeros((1, n))
    ret_row[0, :na] = -rbar
    sign_rows = np.hstack([-np.eye(na), np.zeros((na, 1))])
    soc_rows = np.zeros((na + 1, n))
    soc_rows[0, na] = -1.0
    soc_rows[1:, :na] = -U
    A = sp.csc_matrix(np.vstack([budget, ret_row, sign_rows, soc_rows]))
    b = np.concatenate([[1.0, -r0], np.zeros(na), np.zeros(na + 1)])
    q = np.zeros(n)
    q[na] = 1.0
    cones = ConeProduct(
        (ConeSpec.zero(1), ConeSpec.nonnegative(na + 1), ConeSpec.second_order(na + 1))
    )
    return ConicProblem(P=sp.csc_matrix((n, n)), q=q, A=A, b=b, cones=cones)


def gen_hmcr(returns, r0, p, alpha, formulation="power"):
    """Portfolio with a higher-moment coherent risk objective.

    min eta + t/((1-alpha) d^(1/p)) over (x, eta, t, w, r) subject to
    e'x = 1, mean return >= r0, w >= -Rx - eta*e, x,w >= 0, and
    t >= |w|_p written as d power-cone blocks (r_i, t, w_i) with
    exponent 1/p plus sum(r) = t.  formulation="soc" (p = 2 only)
    replaces the power blocks with one second-order block, as a
    cross-check of the same model.
    """
    if p <= 1:
        raise Unsupported("p-norm risk needs p > 1")
    if not 0.0 < alpha < 1.0:
        raise Unsupported("confidence level alpha must be in (0,1)")
    rbar = returns.mean
    if r0 > np.max(rbar):
        raise InfeasibleTarget(
            f"required return {r0} exceeds best asset mean {np.max(rbar)}"
        )
    if formulation not in ("power", "soc"):
        raise Unsupported(f"unknown formulation {formulation!r}")
    if formulation == "soc" and p != 2:
        raise Unsupported("the second-order cross-check needs p = 2")
    R = returns.R
    d, na = returns.days, returns.assets
    use_r = formulation == "power"
    # variable stack: x (na), eta, t, w (d), then r (d) for the power form
    n = na + 2 + d + (d if use_r else 0)
    ix_eta, ix_t, ix_w = na, na + 1, na + 2
    ix_r = na + 2 + d

    zero_rows = np.zeros((2 if use_r else 1, n))
    zero_rows[0, :na] = 1.0  # e'x = 1
    if use_r:
        zero_rows[1, ix_r:] = 1.0  # sum(r) = t
        zero_rows[1, ix_t] = -1.0
    zero_b = np.array([1.0, 0.0]) if use_r else np.array([1.0])

    nn = np.zeros((1 + d + na + d, n))
    nn[0, :na] = -rbar  # rbar'x >= r0
    nn[1 : 1 + d, :na] = -R  # w + Rx + eta >= 0
    nn[1 : 1 + d, ix_eta] = -1.0
    nn[1 : 1 + d, ix_w : ix_w + d] = -np.eye(d)
    nn[1 + d : 1 + d + na, :na] = -np.eye(na)  # x >= 0
    nn[1 + d + na :, ix_w : ix_w + d] = -np.eye(d)  # w >= 0
    nn_b = np.concatenate([[-r0], np.zeros(2 * d + na)])

    if use_r:
        cone_rows = np.zeros((3 * d, n))
        for i in range(d):
            cone_rows[3 * i, ix_r + i] = -1.0
            cone_rows[3 * i + 1, ix_t] = -1.0
            cone_rows[3 * i + 2, ix_w + i] = -1.0
        tail = tuple(ConeSpec.power(1.0 / p) for _ in range(d))
    else:
        cone_rows = np.zeros((1 + d, n))
        cone_rows[0, ix_t] = -1.0
        cone_rows[1:, ix_w : ix_w + d] = -np.eye(d)
        tail = (ConeSpec.second_order(1 + d),)
    cone_b = np.zeros(cone_rows.shape[0])

    A = sp.csc_matrix(np.vstack([zero_rows, nn, cone_rows]))
    b = np.concatenate([zero_b, nn_b, cone_b])
    q = np.zeros(n)
    q[ix_eta] = 1.0
    q[ix_t] = 1.0 / ((1.0 - alpha) * d ** (1.0 / p))
    cones = ConeProduct(
        (ConeSpec.zero(zero_rows.shape[0]), ConeSpec.nonnegative(nn.shape[0])) + tail
    )
    return ConicProblem(P=sp.csc_matrix((n, n)), q=q, A=A, b=b, cones=cones)


def _spectral_scale(M, radius):
    r = np.max(np.abs(np.linalg.eigvals(M)))
    return M * (radius / r) if r > 0 else M


def _check_psd(M, name, strict=False):
    w = np.linalg.eigvalsh(0.5 * (M + M.T))
    if strict and w.min() <= 0:
        raise Unsupported(f"{name} must be positive definite")
    if w.min() < -1e-10:
        raise Unsupported(f"{name} must be positive semidefinite")


def gen_mpc(dims, horizon, seed=0, x0=None, x_ref=None, u_ref=None, bound=4.0,
            system=None, costs=None):
    """Horizon-stacked tracking QP for a linear system.

    dims = (nx, nu).  Variables (x_1..x_N, u_0..u_{N-1}); dynamics
    x_{k+1} = A x_k + B u_k + f enter as Zero rows, interval bounds
    |x| <= bound, |u| <= bound as doubled nonnegative rows.  The
    quadratic cost sum (x_k - x_ref)'Q(x_k - x_ref) + u'Ru plus the
    terminal (x_N - x_ref)'Pf(x_N - x_ref) is stored with the 1/2
    solver convention absorbed (P = 2*blockdiag(Q..Pf, R..)).

    system = (A, B, f) and costs = (Q, R, Pf) override the seeded
    random stable system (spectral radius 0.9) and default costs.
    """
    nx, nu = dims
    N = int(horizon)
    if N < 1 or nx < 1 or nu < 1:
        raise Unsupported("need nx, nu, horizon >= 1")
    rng = np.random.default_rng(seed)
    if system is None:
        Ad = _spectral_scale(rng.standard_normal((nx, nx)), 0.9)
        Bd = rng.standard_normal((nx, nu))
        f = np.zeros(nx)
    else:
        Ad, Bd, f = (np.asarray(M, dtype=float) for M in system)
    if costs is None:
        Q, Rc, Pf = np.eye(nx), 0.1 * np.eye(nu), np.eye(nx)
    else:
        Q, Rc, Pf = (np.asarray(M, dtype=float) for M in costs)
    _check_psd(Q, "Q")
    _check_psd(Rc, "R")
    _check_psd(Pf, "terminal cost", strict=True)
    x0 = np.zeros(nx) if x0 is None else np.asarray(x0, dtype=float)
    x_ref = np.zeros(nx) if x_ref is None else np.asarray(x_ref, dtype=float)
    u_ref = np.zeros(nu) if u_ref is None else np.asarray(u_ref, dtype=float)

    n = N * nx + N * nu
    xoff = lambda k: (k - 1) * nx  # x_k block, k = 1..N
    uoff = lambda k: N * nx + k * nu  # u_k block, k = 0..N-1

    dyn = np.zeros((N * nx, n))
    dyn_b = np.zeros(N * nx)
    for k in range(N):
        rowsl = slice(k * nx, (k + 1) * nx)
        dyn[rowsl, xoff(k + 1) : xoff(k + 1) + nx] = np.eye(nx)
        dyn[rowsl, uoff(k) : uoff(k) + nu] = -Bd
        if k == 0:
            dyn_b[rowsl] = Ad @ x0 + f
        else:
            dyn[rowsl, xoff(k) : xoff(k) + nx] = -Ad
            dyn_b[rowsl] = f

    # doubled interval rows: bound - v >= 0 and v + bound >= 0
    box = np.vstack([np.eye(n), -np.eye(n)])
    box_b = np.full(2 * n, float(bound))
    A = sp.csc_matrix(np.vstack([dyn, box]))
    b = np.concatenate([dyn_b, box_b])

    blocks = [2.0 * Q] * (N - 1) + [2.0 * Pf] + [2.0 * Rc] * N
    P = sp.block_diag([sp.csc_matrix(Bk) for Bk in blocks], format="csc")
    q = np.concatenate(
        [np.tile(-2.0 * (Q @ x_ref), N - 1), -2.0 * (Pf @ x_ref),
         np.tile(-2.0 * (Rc @ u_ref), N)]
    )
    cones = ConeProduct((ConeSpec.zero(N * nx), ConeSpec.nonnegative(2 * n)))
    return ConicProblem(P=P, q=q, A=A, b=b, cones=cones)


@dataclass(frozen=True)
class PerturbationSpec:
    """Entry-perturbation rule: touch at most min(10% of entries, 20)."""

    delta: float
    targets: tuple = ("b", "q", "A")
    seed: int = 0
    fraction: float = 0.1
    cap: int = 20

    def __post_init__(self):
        if self.delta < 0:
            raise Unsupported("perturbation size must be nonnegative")
        bad = set(self.targets) - {"b", "q", "A"}
        if bad:
            raise Unsupported(f"unknown perturbation targets {sorted(bad)}")


def _perturb_vector(v, delta, rng, fraction, cap):
    out = v.copy()
    k = min(math.ceil(fraction * out.size), cap)
    idx = rng.choice(out.size, size=k, replace=False)
    r = rng.uniform(-1.0, 1.0, size=k)
    tiny = np.abs(out[idx]) <= 1e-6
    out[idx] = np.where(tiny, delta * r, (1.0 + delta * r) * out[idx])
    return out


def perturb(problem, pspec):
    """New problem with the entry rule applied per target; input untouched.

    Entries with magnitude <= 1e-6 become delta*r, others scale by
    (1 + delta*r), r uniform on [-1,1].  delta = 0 returns an unchanged
    copy (the literal rule would zero near-zero entries).
    """
    b, q, A = problem.b.copy(), problem.q.copy(), problem.A.copy()
    if pspec.delta > 0:
        rng = np.random.default_rng(pspec.seed)
        for target in pspec.targets:
            if target == "b":
                b = _perturb_vector(b, pspec.delta, rng, pspec.fraction, pspec.cap)
            elif target == "q":
                q = _perturb_vector(q, pspec.delta, rng, pspec.fraction, pspec.cap)
            else:
                flat = _perturb_vector(
                    A.toarray().ravel(), pspec.delta, rng, pspec.fraction, pspec.cap
                )
                A = sp.csc_matrix(flat.reshape(A.shape))
    return ConicProblem(P=problem.P.copy(), q=q, A=A, b=b, cones=problem.cones)


class Family(Enum):
    SVM_L1 = "svm-l1"
    SVM_L2 = "svm-l2"
    PORTFOLIO_REBALANCE = "rebalance"
    EFFICIENT_FRONTIER = "frontier"
    HMCR = "hmcr"
    MPC_PERTURB = "mpc"


@dataclass(frozen=True)
class SequenceSpec:
    """A parametric family plus the schedule that sweeps it.

    schedule meaning by family: regularization weights (SVMs), required
    returns (frontier), window start days (rebalance, hmcr), or
    perturbation seeds (mpc).  params carries family specifics:
    samples/features/seed, window/r0/p/alpha, dims/horizon/delta/targets.
    """

    family: Family
    schedule: tuple
    data: object = None
    params: dict = field(default_factory=dict)

    def __post_init__(self):
        if len(self.schedule) == 0:
            raise Unsupported("schedule must be non-empty")


def _seq_param(spec, key, default):
    return spec.params.get(key, default)


def build_sequence(spec):
    """Materialize the problem list for a SequenceSpec."""
    fam = spec.family
    if fam in (Family.SVM_L1, Family.SVM_L2):
        data = spec.data or synth_samples(
            _seq_param(spec, "samples", 60),
            _seq_param(spec, "features", 6),
            _seq_param(spec, "seed", 0),
        )
        gen = gen_svm_l1 if fam is Family.SVM_L1 else gen_svm_l2
        return [gen(data, lam) for lam in spec.schedule]
    if fam is Family.EFFICIENT_FRONTIER:
        returns = spec.data or synth_returns(
            _seq_param(spec, "assets", 20),
            _seq_param(spec, "days", 60),
            _seq_param(spec, "seed", 0),
        )
        return [gen_portfolio(returns, r0) for r0 in spec.schedule]
    if fam in (Family.PORTFOLIO_REBALANCE, Family.HMCR):
        window = _seq_param(spec, "window", 40)
        need = max(int(k) for k in spec.schedule) + window
        returns = spec.data or synth_returns(
            _seq_param(spec, "assets", 20), need, _seq_param(spec, "seed", 0)
        )
        r0 = _seq_param(spec, "r0", 5e-4)
        if fam is Family.PORTFOLIO_REBALANCE:
            return [
                gen_portfolio(returns.window(int(k), window), r0)
                for k in spec.schedule
            ]
        p = _seq_param(spec, "p", 3.0)
        alpha = _seq_param(spec, "alpha", 0.9)
        return [
            gen_hmcr(returns.window(int(k), window), r0, p, alpha)
            for k in spec.schedule
        ]
    if fam is Family.MPC_PERTURB:
        dims = _seq_param(spec, "dims", (4, 2))
        seed = _seq_param(spec, "seed", 0)
        x0 = _seq_param(spec, "x0", None)
        if x0 is None:
            # a nonzero start keeps the tracking problem off the trivial optimum
            x0 = np.random.default_rng(seed + 1).uniform(-1.0, 1.0, dims[0])
        base = gen_mpc(
            dims,
            _seq_param(spec, "horizon", 10),
            seed=seed,
            x0=x0,
        )
        delta = _seq_param(spec, "delta", 1e-3)
        targets = _seq_param(spec, "targets", ("b", "q", "A"))
        return [base] + [
            perturb(base, PerturbationSpec(delta, targets, seed=int(sd)))
            for sd in spec.schedule
        ]
    raise Unsupported(f"unknown family {fam}")
