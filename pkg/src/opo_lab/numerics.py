"""Shared numerical kernels: Gaussian quadrature, 1D root/max search, statistics."""
from __future__ import annotations

import bisect as bisect_module
import math
from dataclasses import dataclass
from typing import Callable

import numpy as np
from scipy import linalg, stats

from .errors import NoBracket, NotUnimodal, RangeError

GOLDEN = (math.sqrt(5.0) - 1.0) / 2.0  # 1/phi


@dataclass(frozen=True)
class QuadratureRule:
    """Nodes and positive weights of a Gauss rule.

    ``kind`` is ``"hermite"`` (weight exp(-t**2) on the real line) or
    ``"legendre"`` (unit weight on [-1, 1]).
    """

    nodes: np.ndarray
    weights: np.ndarray
    kind: str

    def integrate(self, f: Callable[[np.ndarray], np.ndarray]) -> float:
        return float(np.dot(self.weights, f(self.nodes)))


def _orthonormal_values(x, offdiag, n):
    """Return (p_{n-1}, p_n, p_n') of the orthonormal family with zero diagonal recurrence."""
    p_prev = np.zeros_like(x)
    dp_prev = np.zeros_like(x)
    p = np.full_like(x, offdiag[0])
    dp = np.zeros_like(x)
    sq = np.zeros_like(x) + p * p
    for k in range(1, n + 1):
        b_next = offdiag[k]
        b_cur = offdiag[k - 1] if k > 1 else 0.0
        p_new = (x * p - b_cur * p_prev) / b_next
        dp_new = (p + x * dp - b_cur * dp_prev) / b_next
        p_prev, dp_prev, p, dp = p, dp, p_new, dp_new
        if k < n:
            sq = sq + p * p
    return sq, p, dp


def _golub_welsch(b: np.ndarray, p0: float, mu0: float, n: int, kind: str) -> QuadratureRule:
    # b[k] is the k-th sub-diagonal entry of the Jacobi matrix (b[0] unused, set to p0).
    x = linalg.eigh_tridiagonal(np.zeros(n), b[1:n], eigvals_only=True)
    coeffs = np.concatenate(([p0], b[1:n + 1]))
    with np.errstate(over="ignore", invalid="ignore"):
        for _ in range(2):
            _, pn, dpn = _orthonormal_values(x, coeffs, n)
            step = pn / dpn
            x = x - np.where(np.isfinite(step), step, 0.0)
    # symmetric families: enforce exact mirror symmetry
    x = 0.5 * (x - x[::-1])
    with np.errstate(over="ignore"):
        sq, _, _ = _orthonormal_values(x, coeffs, n)
    # extreme Hermite weights for n > ~350 are below the double range and flush to zero
    w = 1.0 / sq
    w = 0.5 * (w + w[::-1])
    return QuadratureRule(nodes=x, weights=w, kind=kind)


def gauss_hermite(n: int) -> QuadratureRule:
    """Gauss-Hermite rule for the weight exp(-t**2), exact to polynomial degree 2n-1."""
    if not 1 <= n <= 512:
        raise RangeError(f"gauss_hermite needs 1 <= n <= 512, got {n}")
    k = np.arange(n + 1, dtype=float)
    b = np.sqrt(k / 2.0)
    return _golub_welsch(b, math.pi ** -0.25, math.sqrt(math.pi), n, "hermite")


def gauss_legendre(n: int) -> QuadratureRule:
    """Gauss-Legendre rule on [-1, 1]."""
    if not 1 <= n <= 512:
        raise RangeError(f"gauss_legendre needs 1 <= n <= 512, got {n}")
    k = np.arange(n + 1, dtype=float)
    with np.errstate(invalid="ignore", divide="ignore"):
        b = k / np.sqrt(4.0 * k * k - 1.0)
    b[0] = 0.0
    return _golub_welsch(b, 1.0 / math.sqrt(2.0), 2.0, n, "legendre")


def bisect(f: Callable[[float], float], lo: float, hi: float, tol: float = 1e-12) -> float:
    """Root of ``f`` in [lo, hi] by bisection; returns the final midpoint."""
    if not hi > lo:
        raise RangeError("bisect requires lo < hi")
    if tol <= 0:
        raise RangeError("tol must be positive")
    flo, fhi = f(lo), f(hi)
    if flo == 0.0:
        return lo
    if fhi == 0.0:
        return hi
    if np.sign(flo) == np.sign(fhi):
        raise NoBracket(f"no sign change on [{lo}, {hi}]: f(lo)={flo}, f(hi)={fhi}")
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        if mid <= lo or mid >= hi:
            break
        fm = f(mid)
        if fm == 0.0:
            return mid
        if np.sign(fm) == np.sign(flo):
            lo, flo = mid, fm
        else:
            hi = mid
    return 0.5 * (lo + hi)


def golden_max(f: Callable[[float], float], lo: float, hi: float, tol: float = 1e-9,
               flat_rtol: float = 1e-12) -> float:
    """Maximiser of a unimodal ``f`` on [lo, hi] by golden-section search.

    Every evaluation (endpoints included) is kept in order of abscissa; a point
    lying strictly below both neighbours is a dip that a unimodal function
    cannot have, and raises NotUnimodal. ``flat_rtol`` is the relative
    evaluation noise tolerated before a dip counts.
    """
    if not hi > lo:
        raise RangeError("golden_max requires lo < hi")
    xs: list[float] = []
    fs: list[float] = []

    def probe(x: float) -> float:
        y = f(x)
        i = bisect_module.bisect(xs, x)
        xs.insert(i, x)
        fs.insert(i, y)
        for j in range(max(i - 1, 1), min(i + 2, len(xs) - 1)):
            slack = flat_rtol * max(1.0, abs(fs[j]))
            if fs[j] < fs[j - 1] - slack and fs[j] < fs[j + 1] - slack:
                raise NotUnimodal(f"f has a dip at x={xs[j]:.6g} on [{lo}, {hi}]")
        return y

    probe(lo)
    probe(hi)
    a, b = lo, hi
    c = b - GOLDEN * (b - a)
    d = a + GOLDEN * (b - a)
    fc, fd = probe(c), probe(d)
    while b - a > tol:
        if fc >= fd:
            b, d, fd = d, c, fc
            c = b - GOLDEN * (b - a)
            fc = probe(c)
        else:
            a, c, fc = c, d, fd
            d = a + GOLDEN * (b - a)
            fd = probe(d)
    return 0.5 * (a + b)


def central_diff(f: Callable[[float], float], x: float, h: float = 1e-5) -> float:
    return (f(x + h) - f(x - h)) / (2.0 * h)


def ks_statistic(samples, cdf: Callable[[np.ndarray], np.ndarray]) -> float:
    """Two-sided Kolmogorov-Smirnov distance between ``samples`` and ``cdf``."""
    x = np.sort(np.asarray(samples, dtype=float))
    n = x.size
    if n == 0:
        raise RangeError("ks_statistic needs at least one sample")
    F = cdf(x)
    i = np.arange(1, n + 1)
    return float(max(np.max(i / n - F), np.max(F - (i - 1) / n)))


def ks_critical(n: int, significance: float = 0.01) -> float:
    """Critical KS distance for ``n`` samples at the given significance."""
    return float(stats.kstwo.isf(significance, n))


def chi2_statistic(histogram, expected) -> float:
    """Pearson chi-square of observed counts against expected counts."""
    o = np.asarray(histogram, dtype=float)
    e = np.asarray(expected, dtype=float)
    if o.shape != e.shape:
        raise RangeError("histogram and expected must have equal shapes")
    if np.any(e <= 0):
        raise RangeError("expected counts must be positive")
    return float(np.sum((o - e) ** 2 / e))


def chi2_pvalue(statistic: float, dof: int) -> float:
    return float(stats.chi2.sf(statistic, dof))
