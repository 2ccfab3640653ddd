"""Central-path warmstarts from a previous conic solution.

Given an optimum (x*, s*, z*) of a nearby problem, each cone block is
re-centered by smoothing c = s* - lambda*z* with a weight mu0 sized from
the new problem's residual, which lands (s0, z0) exactly on the new
central path at parameter mu0/lambda.  The module also certifies that
membership, evaluates the worst-case residual-growth bounds for
nonnegative / second-order / PSD compositions, and measures proximity
to the path for arbitrary interior points.
"""

import math
from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np

from . import cones as _c
from .cones import ConeKind, barrier_gradient, conjugate_gradient, is_interior, is_interior_dual, smat, unit_point
from .errors import NoConvergence, NotApplicable, Unsupported
from .smoothing import smooth

MU0_FLOOR = 1e-12
MU0_CEIL = 1.0

# Below this relative size, a second-order block's leading previous
# values count as degenerate and the scale-free rule applies.
SOC_DEGENERACY_TOL = 1e-10


@dataclass
class PreviousSolution:
    """Optimal triple from the previous problem, attached to the new one.

    problem supplies (P, q, A, b) for residual sizing; it may be None
    when every block's mu0 is overridden explicitly.
    """

    x_star: np.ndarray
    s_star: np.ndarray
    z_star: np.ndarray
    problem: object | None = None


class SelectedParameters(NamedTuple):
    lam: float
    mu0: float
    rule: str


@dataclass
class BlockParameters:
    lam: float
    mu0: float
    nu: int
    complementarity: float
    rule: str


@dataclass
class WarmStartResult:
    x0: np.ndarray
    s0: np.ndarray
    z0: np.ndarray
    per_block: list
    fallback_blocks: list = field(default_factory=list)


def _clamp_mu0(value):
    return float(min(max(value, MU0_FLOOR), MU0_CEIL))


def _select_lambda(spec, s_star_block, z_star_block):
    """Scaling ratio and rule label for one block; no residual needed."""
    kind = spec.kind
    if kind is ConeKind.ZERO:
        return 1.0, "zero"
    if kind is ConeKind.NONNEGATIVE:
        return 1.0, "nn"
    if kind is ConeKind.PSD_TRIANGLE:
        return 1.0, "psd"
    if kind in (ConeKind.EXPONENTIAL, ConeKind.POWER):
        return 1.0, "nonsymmetric-heuristic"
    s0 = float(s_star_block[0])
    z0 = float(z_star_block[0])
    if z0 <= SOC_DEGENERACY_TOL * max(1.0, s0) or s0 <= SOC_DEGENERACY_TOL * max(
        1.0, z0
    ):
        return 1.0, "soc-degenerate"
    return s0 / z0, "soc"


def select_parameters(spec, s_star_block, z_star_block, r_inf):
    """Per-block (lambda, mu0) from previous block values and ||R||_inf.

    Second-order blocks with healthy leading entries use lambda =
    s0*/z0* and mu0 = lambda*r_inf, which makes every block's local
    path parameter mu0/lambda equal to the clamped r_inf; all other
    kinds use lambda = 1.  mu0 is clamped to [1e-12, 1].
    """
    if not (math.isfinite(r_inf) and r_inf >= 0.0):
        raise Unsupported(f"residual norm must be finite and >= 0, got {r_inf}")
    lam, rule = _select_lambda(spec, s_star_block, z_star_block)
    mu0 = _clamp_mu0(lam * r_inf if rule == "soc" else r_inf)
    return SelectedParameters(lam, mu0, rule)


def residual_infinity(problem, x, s, z):
    """||R(x,s,z)||_inf with R = (Px + A^T z + q, -Ax + b - s)."""
    r_d = problem.P @ x + problem.A.T @ z + problem.q
    r_p = -(problem.A @ x) + problem.b - s
    return float(max(np.max(np.abs(r_d)), np.max(np.abs(r_p))))


def warmstart(prev, cones, overrides=None):
    """Re-center a previous optimum onto the new problem's central path.

    Per non-Zero block: c = s* - lambda*z*, s0 = smooth(c, mu0), and
    z0 = -(mu0/lambda)*grad f(s0), the form the smoothing optimality
    condition gives for (s0 - c)/lambda; evaluating the gradient instead
    of the difference keeps complementarity exact at small mu0.  Zero
    blocks pass (0, z*) through.  x0 = x*.

    overrides maps block index -> {"lambda": ..., "mu0": ...} (either
    key optional).  Blocks whose Newton smoothing fails fall back to the
    cold unit point and are listed in fallback_blocks.
    """
    x_star = np.asarray(prev.x_star, dtype=float)
    s_star = np.asarray(prev.s_star, dtype=float)
    z_star = np.asarray(prev.z_star, dtype=float)
    if s_star.shape != (cones.dim,) or z_star.shape != (cones.dim,):
        raise Unsupported("previous solution does not match the cone product size")
    overrides = overrides or {}

    slices = cones.slices()
    need_r = any(
        spec.kind is not ConeKind.ZERO and "mu0" not in overrides.get(k, {})
        for k, spec in enumerate(cones.blocks)
    )
    r_inf = 0.0
    if need_r:
        if prev.problem is None:
            raise Unsupported(
                "problem data is required to size mu0; pass overrides instead"
            )
        r_inf = residual_infinity(prev.problem, x_star, s_star, z_star)

    s0 = np.zeros(cones.dim)
    z0 = np.zeros(cones.dim)
    per_block = []
    fallback = []
    for k, (spec, sl) in enumerate(zip(cones.blocks, slices)):
        sb = s_star[sl]
        zb = z_star[sl]
        if spec.kind is ConeKind.ZERO:
            z0[sl] = zb
            per_block.append(
                BlockParameters(1.0, _clamp_mu0(r_inf), 0, 0.0, "zero")
            )
            continue
        ov = overrides.get(k, {})
        lam, rule = _select_lambda(spec, sb, zb)
        if "lambda" in ov:
            lam = float(ov["lambda"])
            rule = "override"
        if "mu0" in ov:
            mu0 = float(ov["mu0"])
            rule = "override"
        else:
            mu0 = _clamp_mu0(lam * r_inf if rule == "soc" else r_inf)
        if not (lam > 0.0 and mu0 > 0.0):
            raise Unsupported(f"block {k}: lambda and mu0 must be positive")
        c = sb - lam * zb
        hint = sb if is_interior(spec, sb, 0.0) else None
        try:
            s_blk = smooth(spec, c, mu0, hint=hint).s
        except NoConvergence:
            e_s, e_z = unit_point(spec)
            s0[sl] = e_s
            z0[sl] = e_z
            fallback.append(k)
            per_block.append(
                BlockParameters(1.0, 1.0, spec.degree, float(e_s @ e_z), "fallback")
            )
            continue
        z_blk = -(mu0 / lam) * barrier_gradient(spec, s_blk)
        s0[sl] = s_blk
        z0[sl] = z_blk
        per_block.append(
            BlockParameters(lam, mu0, spec.degree, float(s_blk @ z_blk), rule)
        )
    return WarmStartResult(x_star.copy(), s0, z0, per_block, fallback)


# ---------------------------------------------------------------------------
# certification


@dataclass
class BlockCertificate:
    block: int
    applicable: bool
    gradient_ok: bool | None = None
    complementarity_ok: bool | None = None
    interior_ok: bool | None = None
    gradient_residual: float | None = None
    complementarity_error: float | None = None


@dataclass
class CertReport:
    blocks: list

    @property
    def ok(self):
        return all(
            b.gradient_ok and b.complementarity_ok and b.interior_ok
            for b in self.blocks
            if b.applicable
        )


def certify_central_path(result, cones, grad_tol=1e-8, comp_tol=1e-10):
    """Check the path-membership identities block by block.

    (a) lambda*z0 + mu0*grad f(s0) = 0 within grad_tol (scaled),
    (b) <s0, z0> = nu*mu0/lambda within comp_tol relative,
    (c) s0 strictly interior to K and z0 to K*.
    Zero blocks are reported as not applicable.
    """
    blocks = []
    for k, (spec, sl) in enumerate(zip(cones.blocks, cones.slices())):
        if spec.kind is ConeKind.ZERO:
            blocks.append(BlockCertificate(k, applicable=False))
            continue
        p = result.per_block[k]
        sb = result.s0[sl]
        zb = result.z0[sl]
        interior_ok = bool(
            is_interior(spec, sb, 0.0) and is_interior_dual(spec, zb, 0.0)
        )
        if interior_ok:
            resid = float(np.linalg.norm(p.lam * zb + p.mu0 * barrier_gradient(spec, sb)))
        else:
            resid = float("inf")
        scale = max(1.0, float(np.linalg.norm(sb)), p.lam * float(np.linalg.norm(zb)))
        target = spec.degree * p.mu0 / p.lam
        comp_abs = abs(float(sb @ zb) - target)
        # a dot product cannot resolve below eps times its cancellation
        # mass, so near-boundary blocks at tiny mu0 get that much slack
        float_floor = 16.0 * np.finfo(float).eps * float(np.abs(sb) @ np.abs(zb))
        blocks.append(
            BlockCertificate(
                k,
                applicable=True,
                gradient_ok=resid <= grad_tol * scale,
                complementarity_ok=comp_abs <= comp_tol * target + float_floor,
                interior_ok=interior_ok,
                gradient_residual=resid,
                complementarity_error=comp_abs / target,
            )
        )
    return CertReport(blocks)


# ---------------------------------------------------------------------------
# worst-case residual growth (nonnegative / second-order / PSD)


@dataclass
class BoundReport:
    family: str
    applicable: bool
    reason: str | None
    bound: float | None = None
    actual: float | None = None
    mu0: float | None = None
    r_star_inf: float | None = None
    delta_s_inf: float | None = None
    delta_s_bound: float | None = None

    @property
    def satisfied(self):
        if not self.applicable:
            return None
        return (
            self.actual <= self.bound * (1.0 + 1e-9) + 1e-300
            and self.delta_s_inf <= self.delta_s_bound * (1.0 + 1e-9) + 1e-300
        )


def _row_sum_norm(A):
    """||A||_inf as the max absolute row sum."""
    A = np.asarray(A.todense() if hasattr(A, "todense") else A, dtype=float)
    if A.size == 0:
        return 0.0
    return float(np.max(np.sum(np.abs(A), axis=1)))


def _not_applicable(family, reason):
    return BoundReport(family, False, reason)


def _matrix_max(packed):
    """Entrywise max magnitude of the symmetric matrix a packed vector encodes."""
    return float(np.max(np.abs(smat(packed))))


def residual_bound_check(prev, result, problem):
    """Evaluate the worst-case warmstart residual-growth inequality.

    Supported compositions: any number of nonnegative blocks, a single
    second-order block, or a single PSD block (Zero blocks may
    accompany them).  For PSD compositions, infinity norms of slack
    rows are taken entrywise over the encoded matrices, not over the
    sqrt(2)-scaled packed coordinates.  Returns a report; compositions
    or previous solutions outside the covered assumptions come back
    not-applicable rather than failing.
    """
    kinds = {b.kind for b in problem.cones.blocks if b.kind is not ConeKind.ZERO}
    if len(kinds) != 1:
        return _not_applicable("mixed", "needs exactly one non-Zero cone family")
    family = next(iter(kinds)).value
    live = [
        (k, spec, sl)
        for k, (spec, sl) in enumerate(zip(problem.cones.blocks, problem.cones.slices()))
        if spec.kind is not ConeKind.ZERO
    ]
    if result.fallback_blocks:
        return _not_applicable(family, "cold-start fallback occurred")

    x_star = np.asarray(prev.x_star, dtype=float)
    s_star = np.asarray(prev.s_star, dtype=float)
    z_star = np.asarray(prev.z_star, dtype=float)
    r_star = residual_infinity(problem, x_star, s_star, z_star)
    lam0 = result.per_block[live[0][0]].lam
    mu0 = result.per_block[live[0][0]].mu0
    for k, spec, sl in live:
        p = result.per_block[k]
        if abs(p.mu0 - mu0) > 1e-12 * mu0 or abs(p.lam - lam0) > 1e-12 * lam0:
            return _not_applicable(family, "blocks disagree on lambda or mu0")
    expected = _clamp_mu0(lam0 * r_star)
    if abs(mu0 - expected) > 1e-9 * expected:
        return _not_applicable(
            family, "mu0 was not sized from the previous residual norm"
        )

    A_inf = _row_sum_norm(problem.A)
    kind = live[0][1].kind

    if kind is ConeKind.NONNEGATIVE:
        cmin = math.inf
        for k, spec, sl in live:
            c = s_star[sl] - z_star[sl]
            cmin = min(cmin, float(np.min(np.abs(c))))
        if cmin <= 0.0:
            return _not_applicable(
                family, "previous block has s* = z* = 0 in some coordinate"
            )
        ds = float(
            max(
                np.max(np.abs(result.s0[sl] - s_star[sl]))
                for _, _, sl in live
            )
        )
        ds_bound = min(mu0 / cmin, math.sqrt(mu0))
        bound = (1.0 + (A_inf + 1.0) / cmin) * mu0
    elif kind is ConeKind.SECOND_ORDER:
        if len(live) != 1:
            return _not_applicable(family, "needs a single second-order block")
        _, spec, sl = live[0]
        sb = s_star[sl]
        zb = z_star[sl]
        s0h, s1 = float(sb[0]), sb[1:]
        z0h, z1 = float(zb[0]), zb[1:]
        scale = max(1.0, s0h, z0h)
        tol = 1e-7 * scale
        if s0h <= tol or z0h <= tol:
            return _not_applicable(family, "leading entries are not positive")
        lam = s0h / z0h
        active = (
            abs(s0h - np.linalg.norm(s1)) <= tol
            and abs(z0h - np.linalg.norm(z1)) <= tol
            and np.max(np.abs(s1 + lam * z1)) <= tol
        )
        if not active:
            return _not_applicable(
                family, "previous optimum is not boundary-active and aligned"
            )
        ds = float(np.max(np.abs(result.s0[sl] - sb)))
        ds_bound = mu0 / (2.0 * s0h)
        bound = (1.0 + (A_inf + lam) / (2.0 * s0h)) * r_star
    else:
        if kind is not ConeKind.PSD_TRIANGLE:
            return _not_applicable(family, "unsupported cone family")
        if len(live) != 1:
            return _not_applicable(family, "needs a single PSD block")
        _, spec, sl = live[0]
        C = smat(s_star[sl] - z_star[sl])
        d = np.linalg.eigvalsh(C)
        dmin = float(np.min(np.abs(d)))
        if dmin <= 0.0:
            return _not_applicable(family, "previous difference matrix is singular")
        # A columns reinterpreted as symmetric matrices over the block rows
        A = problem.A.todense() if hasattr(problem.A, "todense") else problem.A
        A = np.asarray(A, dtype=float)
        tr_max = 0.0
        for j in range(A.shape[1]):
            Aj = smat(A[sl, j])
            tr_max = max(tr_max, float(np.sum(np.abs(np.linalg.eigvalsh(Aj)))))
        ds = _matrix_max(result.s0[sl] - s_star[sl])
        ds_bound = min(mu0 / dmin, math.sqrt(mu0))
        bound = (1.0 + (tr_max + 1.0) / dmin) * mu0

    # actual residual with PSD slack rows measured in matrix entries
    r_d = problem.P @ result.x0 + problem.A.T @ result.z0 + problem.q
    r_p = -(problem.A @ result.x0) + problem.b - result.s0
    if kind is ConeKind.PSD_TRIANGLE:
        parts = [float(np.max(np.abs(r_d)))] if r_d.size else [0.0]
        for spec, sl in zip(problem.cones.blocks, problem.cones.slices()):
            block = r_p[sl]
            if spec.kind is ConeKind.PSD_TRIANGLE:
                parts.append(_matrix_max(block))
            elif block.size:
                parts.append(float(np.max(np.abs(block))))
        actual = max(parts)
    else:
        actual = float(max(np.max(np.abs(r_d)), np.max(np.abs(r_p))))

    return BoundReport(
        family,
        True,
        None,
        bound=bound,
        actual=actual,
        mu0=mu0,
        r_star_inf=r_star,
        delta_s_inf=ds,
        delta_s_bound=ds_bound,
    )


# ---------------------------------------------------------------------------
# proximity to the central path


def block_proximity(cones, s, z, hints=None):
    """nu_i / <grad f(s_i), grad f*(z_i)> per block; NaN on Zero blocks.

    Equals the local path parameter mu_i exactly on the central path and
    is strictly smaller off it.  hints optionally carries per-block
    starting points (-grad f*(z_i) guesses) for nonsymmetric blocks.
    """
    rho = np.full(len(cones.blocks), np.nan)
    for k, (spec, sl) in enumerate(zip(cones.blocks, cones.slices())):
        if spec.kind is ConeKind.ZERO:
            continue
        gs = barrier_gradient(spec, s[sl])
        hint = None if hints is None else hints[k]
        gz = conjugate_gradient(spec, z[sl], hint=hint)
        rho[k] = spec.degree / float(gs @ gz)
    return rho


@dataclass
class ProximityReport:
    rho: np.ndarray
    mu: float
    beta: float
    ok: np.ndarray

    @property
    def all_ok(self):
        return bool(np.all(self.ok))


def proximity(result, cones, beta=0.1):
    """Neighborhood test rho_i >= beta*mu for a warmstart output.

    mu is the aggregate <s0, z0>/nu; each non-Zero block must keep its
    proximity value above beta*mu to count as well-centered.
    """
    if not (0.0 < beta <= 1.0):
        raise Unsupported(f"beta must lie in (0, 1], got {beta}")
    if cones.degree == 0:
        raise NotApplicable("proximity is undefined for all-Zero compositions")
    mu = float(result.s0 @ result.z0) / cones.degree
    rho = block_proximity(cones, result.s0, result.z0)
    ok = np.array(
        [
            np.isnan(r) or r >= beta * mu * (1.0 - 1e-9)
            for r in rho
        ]
    )
    return ProximityReport(rho, mu, beta, ok)
