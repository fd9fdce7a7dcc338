"""Real-root extraction for low-degree polynomials.

Coefficients are always passed in ascending order (constant term first).
The quadratic path uses the cancellation-free formula; the quartic path
reduces degree, takes companion-matrix eigenvalues and polishes candidate
real roots with a few Newton steps. Returned roots are deduplicated
(relative gap below MERGE_RTOL counts as one root), sorted ascending, and
each satisfies |p(r)| <= RESIDUAL_RTOL * max(1, max|coeff|).
"""

from __future__ import annotations

import math

import numpy as np

MERGE_RTOL = 1e-7
RESIDUAL_RTOL = 1e-8
_IMAG_RTOL = 1e-7


def _merge_sorted(roots: list[float]) -> list[float]:
    roots = sorted(roots)
    out: list[float] = []
    for r in roots:
        if out and abs(r - out[-1]) <= MERGE_RTOL * max(1.0, abs(r), abs(out[-1])):
            continue
        out.append(r)
    return out


def real_roots_quadratic(a: float, b: float, c: float) -> list[float]:
    """Real roots of a*x^2 + b*x + c, ascending (0-2 entries).

    Degenerate a == 0 is solved as linear; a == b == 0 with c != 0 has no
    roots; the identically-zero polynomial is rejected.
    """
    if a == 0.0:
        if b == 0.0:
            if c == 0.0:
                raise ValueError("identically zero polynomial has no defined roots")
            return []
        return [-c / b]
    disc = b * b - 4.0 * a * c
    if disc < 0.0:
        return []
    sq = math.sqrt(disc)
    if b == 0.0:
        r = sq / (2.0 * a)
        return _merge_sorted([-r, r])
    q = -0.5 * (b + math.copysign(sq, b))
    roots = [q / a]
    if q != 0.0:
        roots.append(c / q)
    return _merge_sorted(roots)


def _trim_leading_zeros(coeffs: np.ndarray) -> np.ndarray:
    scale = np.max(np.abs(coeffs)) if coeffs.size else 0.0
    if scale == 0.0:
        raise ValueError("identically zero polynomial has no defined roots")
    cutoff = 1e-14 * scale
    deg = len(coeffs) - 1
    while deg > 0 and abs(coeffs[deg]) <= cutoff:
        deg -= 1
    return coeffs[: deg + 1]


def _polish(x: float, coeffs: np.ndarray, dcoeffs: np.ndarray, steps: int = 4) -> float:
    for _ in range(steps):
        p = _horner(coeffs, x)
        dp = _horner(dcoeffs, x)
        if dp == 0.0 or not math.isfinite(dp):
            break
        step = p / dp
        if not math.isfinite(step):
            break
        x -= step
        if abs(step) <= 1e-16 * max(1.0, abs(x)):
            break
    return x


def _horner(coeffs_asc: np.ndarray, x: float) -> float:
    acc = 0.0
    for c in coeffs_asc[::-1]:
        acc = acc * x + c
    return acc


def real_roots_quartic(coeffs) -> list[float]:
    """Real roots of a polynomial of degree <= 4, ascending.

    Args:
        coeffs: ascending coefficients, length up to 5. Trailing (highest
            degree) zeros are trimmed before solving.
    """
    c = np.asarray(coeffs, dtype=float)
    if c.ndim != 1 or c.size == 0 or c.size > 5:
        raise ValueError("expected 1-5 ascending coefficients")
    if not np.all(np.isfinite(c)):
        raise ValueError("coefficients must be finite")
    c = _trim_leading_zeros(c)
    deg = len(c) - 1
    if deg == 0:
        return []  # nonzero constant: no roots
    if deg == 1:
        return [-c[0] / c[1]]
    if deg == 2:
        return real_roots_quadratic(c[2], c[1], c[0])

    scale = np.max(np.abs(c))
    cn = c / scale
    eigs = np.roots(cn[::-1])
    dcoeffs = cn[1:] * np.arange(1, deg + 1)
    bound = RESIDUAL_RTOL * max(1.0, float(np.max(np.abs(coeffs))))

    roots = []
    for z in eigs:
        if abs(z.imag) > _IMAG_RTOL * max(1.0, abs(z.real)):
            continue
        x = _polish(float(z.real), cn, dcoeffs)
        if abs(_horner(c, x)) <= bound:
            roots.append(x)
    return _merge_sorted(roots)


def residual(coeffs, x: float) -> float:
    """|p(x)| for ascending coefficients; convenience for contract checks."""
    return abs(_horner(np.asarray(coeffs, dtype=float), x))


def real_roots_quartic_batch(coeff_rows: np.ndarray) -> list[list[float]]:
    """Row-wise real roots for a batch of degree-<=4 polynomials.

    Semantically identical to calling real_roots_quartic per row; rows whose
    coefficients are all zero yield an empty root list instead of raising
    (batch callers treat them as constraint-free).
    """
    rows = np.asarray(coeff_rows, dtype=float)
    out: list[list[float]] = []
    for row in rows:
        if not np.any(row):
            out.append([])
            continue
        out.append(real_roots_quartic(row))
    return out
