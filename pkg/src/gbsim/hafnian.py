"""Hafnian kernels and Fock matrix elements of Gaussian unitaries.

The hafnian of a complex symmetric 2m x 2m matrix is evaluated with the
power-trace subset algorithm: for every subset of the m index pairs, the
cycle generating function of the pair-swapped submatrix is accumulated with
an inclusion-exclusion sign, costing O(n^3 2^{n/2}) overall.  A perfect
matching enumeration is kept as an independent oracle for small sizes.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from itertools import combinations
from typing import Sequence

import numpy as np
from scipy.special import gammaln

from .exceptions import ResourceCapError, ValidationError
from .gaussian import GaussianUnitaryFactors

__all__ = [
    "hafnian_brute",
    "hafnian",
    "hafnian_batch",
    "build_sigma",
    "repeat_pattern",
    "fock_amplitude",
    "fock_amplitudes",
    "pure_state_vector",
    "pure_output_probability",
    "displacement_matrix",
]

_BRUTE_MAX = 14
_HAF_MAX = 40


def _check_square(X: np.ndarray) -> int:
    X = np.asarray(X)
    if X.ndim != 2 or X.shape[0] != X.shape[1]:
        raise ValidationError(f"expected a square matrix, got shape {X.shape}")
    return X.shape[0]


def hafnian_brute(X: np.ndarray) -> complex:
    """Hafnian by explicit perfect-matching enumeration.

    Oracle-scale only (n <= 14, i.e. at most 135135 matchings).  Odd n gives
    0 and the empty matrix gives 1.
    """
    X = np.asarray(X, dtype=complex)
    n = _check_square(X)
    if n > _BRUTE_MAX:
        raise ResourceCapError(f"brute-force hafnian capped at n={_BRUTE_MAX}, got {n}")
    if n % 2:
        return 0j
    if n == 0:
        return 1 + 0j

    def match(rest: tuple) -> complex:
        if not rest:
            return 1 + 0j
        i, tail = rest[0], rest[1:]
        total = 0j
        for t, j in enumerate(tail):
            total += X[i, j] * match(tail[:t] + tail[t + 1:])
        return total

    return complex(match(tuple(range(n))))


def _exp_poly_coeff(powers: np.ndarray, m: int) -> np.ndarray:
    """Coefficient of x^m in exp(sum_k p_k x^k / (2k)), batched over rows."""
    B = powers.shape[0]
    a = powers / (2.0 * np.arange(1, m + 1))
    e = np.zeros((B, m + 1), dtype=complex)
    e[:, 0] = 1.0
    for j in range(1, m + 1):
        acc = np.zeros(B, dtype=complex)
        for k in range(1, j + 1):
            acc += k * a[:, k - 1] * e[:, j - k]
        e[:, j] = acc / j
    return e[:, m]


def hafnian_batch(mats: np.ndarray, max_size: int = _HAF_MAX) -> np.ndarray:
    """Hafnians of a stack of equal-size complex symmetric matrices.

    Elements are independent, so results are deterministic per entry however
    the batch is chunked.
    """
    mats = np.asarray(mats, dtype=complex)
    if mats.ndim != 3 or mats.shape[1] != mats.shape[2]:
        raise ValidationError(f"expected a (batch, n, n) stack, got shape {mats.shape}")
    B, n = mats.shape[0], mats.shape[1]
    if n > max_size:
        raise ResourceCapError(f"hafnian capped at n={max_size}, got {n}")
    if n % 2:
        return np.zeros(B, dtype=complex)
    if n == 0:
        return np.ones(B, dtype=complex)

    m = n // 2
    total = np.zeros(B, dtype=complex)
    pair_slices = [(2 * i, 2 * i + 1) for i in range(m)]
    for size in range(1, m + 1):
        sign = (-1) ** (m - size)
        for pairs in combinations(range(m), size):
            idx = np.concatenate([pair_slices[p] for p in pairs])
            sub = mats[np.ix_(np.arange(B), idx, idx)]
            # Swap rows within each pair: X @ sub with X = antidiag blocks.
            swapped = sub.reshape(B, size, 2, 2 * size)[:, :, ::-1, :].reshape(B, 2 * size, 2 * size)
            ev = np.linalg.eigvals(swapped)
            powers = np.stack([np.sum(ev ** k, axis=1) for k in range(1, m + 1)], axis=1)
            total += sign * _exp_poly_coeff(powers, m)
    return total


def hafnian(X: np.ndarray, max_size: int = _HAF_MAX) -> complex:
    """Hafnian of a complex symmetric matrix (power-trace algorithm)."""
    X = np.asarray(X, dtype=complex)
    _check_square(X)
    return complex(hafnian_batch(X[None, :, :], max_size=max_size)[0])


def build_sigma(factors: GaussianUnitaryFactors) -> np.ndarray:
    """Complex symmetric 2M x 2M matrix encoding a Gaussian unitary's Fock kernel.

    Blocks: [[U2 tanh(r) U2^T, U2 sech(r) U1], [U1^T sech(r) U2^T, -U1^T tanh(r) U1]].
    """
    u2 = np.asarray(factors.u2, dtype=complex)
    u1 = np.asarray(factors.u1, dtype=complex)
    r = np.asarray(factors.r, dtype=float)
    t = np.tanh(r)
    s = 1.0 / np.cosh(r)
    top_left = (u2 * t) @ u2.T
    top_right = (u2 * s) @ u1
    bot_left = (u1.T * s) @ u2.T
    bot_right = -(u1.T * t) @ u1
    sig = np.block([[top_left, top_right], [bot_left, bot_right]])
    return (sig + sig.T) / 2.0


def repeat_pattern(sigma: np.ndarray, n1: Sequence[int], n2: Sequence[int]) -> np.ndarray:
    """Replicate rows/columns of the two blocks by the photon patterns."""
    sigma = np.asarray(sigma, dtype=complex)
    M = _check_square(sigma) // 2
    n1 = np.asarray(n1, dtype=int)
    n2 = np.asarray(n2, dtype=int)
    if n1.size != M or n2.size != M:
        raise ValidationError("pattern lengths must equal the mode count")
    if np.any(n1 < 0) or np.any(n2 < 0):
        raise ValidationError("photon counts must be nonnegative")
    idx = np.concatenate([np.repeat(np.arange(M), n1), np.repeat(np.arange(M, 2 * M), n2)])
    return sigma[np.ix_(idx, idx)]


def _log_norm(factors: GaussianUnitaryFactors, n1: np.ndarray, n2: np.ndarray) -> float:
    """log of sqrt(n1! n2! prod_i cosh r_i)."""
    lg = sum(math.lgamma(int(k) + 1) for k in np.concatenate([n1, n2]))
    lg += float(np.sum(np.log(np.cosh(factors.r))))
    return 0.5 * lg


def fock_amplitude(
    factors: GaussianUnitaryFactors,
    n1: Sequence[int],
    n2: Sequence[int],
    max_size: int = _HAF_MAX,
) -> complex:
    """Matrix element <n1| U2 S(r) U1 |n2> of a Gaussian unitary.

    haf(Sigma_{n1,n2}) / sqrt(n1! n2! prod cosh r_i); zero whenever
    |n1| + |n2| is odd.  Factorial normalization is taken in log space.
    """
    n1 = np.asarray(n1, dtype=int)
    n2 = np.asarray(n2, dtype=int)
    tot = int(n1.sum() + n2.sum())
    if tot % 2:
        return 0j
    if tot > max_size:
        raise ResourceCapError(f"pattern needs a hafnian of size {tot} > cap {max_size}")
    sig = build_sigma(factors)
    h = hafnian(repeat_pattern(sig, n1, n2), max_size=max_size)
    return complex(h * math.exp(-_log_norm(factors, n1, n2)))


def fock_amplitudes(
    factors: GaussianUnitaryFactors,
    bras: np.ndarray,
    kets: np.ndarray,
    max_size: int = _HAF_MAX,
) -> np.ndarray:
    """Batched matrix elements for rows of bras/kets (single Sigma, grouped by size)."""
    bras = np.asarray(bras, dtype=int)
    kets = np.asarray(kets, dtype=int)
    if bras.shape != kets.shape:
        raise ValidationError("bras and kets must have matching shapes")
    sig = build_sigma(factors)
    totals = bras.sum(axis=1) + kets.sum(axis=1)
    out = np.zeros(bras.shape[0], dtype=complex)
    log_cosh = float(np.sum(np.log(np.cosh(factors.r))))
    for size in np.unique(totals):
        size = int(size)
        if size % 2:
            continue
        if size > max_size:
            raise ResourceCapError(f"pattern needs a hafnian of size {size} > cap {max_size}")
        rows = np.flatnonzero(totals == size)
        stack = np.empty((rows.size, size, size), dtype=complex)
        for t, i in enumerate(rows):
            stack[t] = repeat_pattern(sig, bras[i], kets[i])
        hafs = hafnian_batch(stack, max_size=max_size)
        logs = 0.5 * (gammaln(bras[rows] + 1.0).sum(axis=1) + gammaln(kets[rows] + 1.0).sum(axis=1) + log_cosh)
        out[rows] = hafs * np.exp(-logs)
    return out


def pure_state_vector(factors: GaussianUnitaryFactors, cutoff: int) -> np.ndarray:
    """Dense Fock tensor <n| U2 S(r) U1 |0> with each mode truncated at `cutoff`."""
    M = factors.modes
    grids = np.indices((cutoff,) * M).reshape(M, -1).T
    kets = np.zeros_like(grids)
    amps = fock_amplitudes(factors, grids, kets)
    return amps.reshape((cutoff,) * M)


def pure_output_probability(
    r_in: Sequence[float],
    U: np.ndarray,
    m: Sequence[int],
    max_size: int = _HAF_MAX,
) -> float:
    """Output probability of pattern m for squeezed inputs through unitary U.

    p(m) = |haf(A_m)|^2 / (m! prod cosh r_i) with A = U diag(tanh r) U^T.
    """
    r_in = np.asarray(r_in, dtype=float)
    U = np.asarray(U, dtype=complex)
    m = np.asarray(m, dtype=int)
    if np.any(m < 0):
        raise ValidationError("photon counts must be nonnegative")
    tot = int(m.sum())
    if tot % 2:
        return 0.0
    if tot > max_size:
        raise ResourceCapError(f"pattern needs a hafnian of size {tot} > cap {max_size}")
    A = (U * np.tanh(r_in)) @ U.T
    idx = np.repeat(np.arange(m.size), m)
    h = hafnian(A[np.ix_(idx, idx)], max_size=max_size)
    log_norm = sum(math.lgamma(int(k) + 1) for k in m) + float(np.sum(np.log(np.cosh(r_in))))
    return float(abs(h) ** 2 * math.exp(-log_norm))


def displacement_matrix(beta: complex, dim: int) -> np.ndarray:
    """Fock matrix <m| D(beta) |n> up to `dim`, by the stable two-term recurrence.

    Accepts a scalar or an array of displacements; an array input returns a
    (batch, dim, dim) stack.
    """
    if dim < 1:
        raise ValidationError("dim must be >= 1")
    b = np.atleast_1d(np.asarray(beta, dtype=complex))
    scalar = np.asarray(beta).ndim == 0
    B = b.size
    D = np.zeros((B, dim, dim), dtype=complex)
    D[:, 0, 0] = np.exp(-0.5 * np.abs(b) ** 2)
    for mrow in range(1, dim):
        D[:, mrow, 0] = D[:, mrow - 1, 0] * b / math.sqrt(mrow)
    for ncol in range(1, dim):
        for mrow in range(dim):
            lower = D[:, mrow - 1, ncol - 1] * math.sqrt(mrow) if mrow else 0.0
            D[:, mrow, ncol] = (lower - np.conj(b) * D[:, mrow, ncol - 1]) / math.sqrt(ncol)
    return D[0] if scalar else D
