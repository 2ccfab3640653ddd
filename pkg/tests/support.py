"""Shared helpers for the test suite: seeded interior-point sampling."""

import numpy as np

from conepath.cones import ConeKind, ConeSpec, svec

ALL_KINDS = ("nonneg", "soc", "psd", "exp", "pow")


def make_spec(kind, rng=None, dim=4, order=3, alpha=None):
    if kind == "nonneg":
        return ConeSpec.nonnegative(dim)
    if kind == "soc":
        return ConeSpec.second_order(dim)
    if kind == "psd":
        return ConeSpec.psd_triangle(order)
    if kind == "exp":
        return ConeSpec.exponential()
    if kind == "pow":
        if alpha is None:
            alpha = rng.uniform(0.1, 0.9) if rng is not None else 0.6
        return ConeSpec.power(alpha)
    raise ValueError(kind)


def random_interior(spec, rng, scale=1.0):
    """A strictly interior point of the cone, moderate conditioning."""
    kind = spec.kind
    if kind is ConeKind.NONNEGATIVE:
        return scale * np.exp(rng.uniform(-1.5, 1.5, spec.dim))
    if kind is ConeKind.SECOND_ORDER:
        x1 = rng.standard_normal(spec.dim - 1)
        x0 = np.linalg.norm(x1) + scale * np.exp(rng.uniform(-1.0, 1.0))
        return np.concatenate([[x0], x1])
    if kind is ConeKind.PSD_TRIANGLE:
        M = rng.standard_normal((spec.order, spec.order))
        S = M @ M.T + scale * np.exp(rng.uniform(-1.0, 1.0)) * np.eye(spec.order)
        return svec(S)
    if kind is ConeKind.EXPONENTIAL:
        x1 = np.exp(rng.uniform(-1.0, 1.0))
        x2 = np.exp(rng.uniform(-1.0, 1.0))
        x3 = x2 * np.log(x1 / x2) - scale * np.exp(rng.uniform(-1.0, 1.0))
        return np.array([x1, x2, x3])
    if kind is ConeKind.POWER:
        x1 = np.exp(rng.uniform(-1.0, 1.0))
        x2 = np.exp(rng.uniform(-1.0, 1.0))
        lim = x1**spec.alpha * x2 ** (1.0 - spec.alpha)
        return np.array([x1, x2, rng.uniform(-0.85, 0.85) * lim])
    raise ValueError(kind)


def finite_difference_gradient(fn, s, h=1e-6):
    g = np.zeros_like(s)
    for i in range(s.size):
        up = s.copy()
        dn = s.copy()
        up[i] += h
        dn[i] -= h
        g[i] = (fn(up) - fn(dn)) / (2.0 * h)
    return g


def finite_difference_hessian(grad_fn, s, h=1e-6):
    n = s.size
    H = np.zeros((n, n))
    for i in range(n):
        up = s.copy()
        dn = s.copy()
        up[i] += h
        dn[i] -= h
        H[:, i] = (grad_fn(up) - grad_fn(dn)) / (2.0 * h)
    return 0.5 * (H + H.T)
