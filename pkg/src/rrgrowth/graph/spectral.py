"""Linear eigenvalue statistics: shifted Chebyshev polynomials Gamma_k and the cycle-count basis f_k.

Eigenvalues are those of A / (2 sqrt(2d-1)).  Polynomials are numpy coefficient
arrays in the monomial basis, lowest degree first.
"""
from __future__ import annotations

import math

import numpy as np
from numpy.polynomial import chebyshev as C
from numpy.polynomial import polynomial as P

from .cycles import divisors
from .perm import GraphState

#: Largest n for which dense eigendecomposition is attempted.
EIGEN_CAP = 2000


class EigenError(RuntimeError):
    """The symmetric eigensolver failed or the graph is too large for it."""


def mobius(n: int) -> int:
    if n < 1:
        raise ValueError("mobius is defined on positive integers")
    out = 1
    p = 2
    while p * p <= n:
        if n % p == 0:
            n //= p
            if n % p == 0:
                return 0
            out = -out
        p += 1
    return -out if n > 1 else out


def chebyshev_t(k: int, x: np.ndarray) -> np.ndarray:
    """T_k(x) by the three-term recurrence (valid off [-1, 1])."""
    x = np.asarray(x, dtype=float)
    t0, t1 = np.ones_like(x), x
    if k == 0:
        return t0
    for _ in range(k - 1):
        t0, t1 = t1, 2 * x * t1 - t0
    return t1


def gamma_shift(d: int, k: int) -> float:
    """Constant added to 2 T_k: (2d-2)/(2d-1)^(k/2) for even k >= 2, else 0."""
    if k >= 2 and k % 2 == 0:
        return (2 * d - 2) / (2 * d - 1) ** (k // 2)
    return 0.0


def gamma_eval(d: int, k: int, x: np.ndarray) -> np.ndarray:
    if k == 0:
        return np.ones_like(np.asarray(x, dtype=float))
    return 2 * chebyshev_t(k, x) + gamma_shift(d, k)


def gamma_poly(d: int, k: int) -> np.ndarray:
    """Monomial coefficients of Gamma_k."""
    if k == 0:
        return np.array([1.0])
    cheb = np.zeros(k + 1)
    cheb[k] = 2.0
    coef = C.cheb2poly(cheb)
    coef[0] += gamma_shift(d, k)
    return coef


def scaled_eigenvalues(state: GraphState, cap: int = EIGEN_CAP) -> np.ndarray:
    if state.n > cap:
        raise EigenError(f"n={state.n} exceeds the dense eigensolver cap {cap}")
    A = state.adjacency() / (2 * math.sqrt(2 * state.d - 1))
    try:
        return np.linalg.eigvalsh(A)
    except np.linalg.LinAlgError as exc:  # pragma: no cover
        raise EigenError(str(exc)) from exc


def gamma_traces(state: GraphState, K: int, eigenvalues: np.ndarray | None = None) -> np.ndarray:
    """sum_i Gamma_k(lambda_i) for k = 0..K."""
    lam = scaled_eigenvalues(state) if eigenvalues is None else eigenvalues
    d = state.d
    out = np.zeros(K + 1)
    out[0] = len(lam)
    t0, t1 = np.ones_like(lam), lam
    for k in range(1, K + 1):
        if k > 1:
            t0, t1 = t1, 2 * lam * t1 - t0
        out[k] = 2 * t1.sum() + len(lam) * gamma_shift(d, k)
    return out


def f_basis_gamma(d: int, k: int) -> np.ndarray:
    """Coefficients of f_k in the Gamma basis (index j multiplies Gamma_j)."""
    if k < 1:
        raise ValueError("k must be >= 1")
    out = np.zeros(k + 1)
    q = 2 * d - 1
    for j in divisors(k):
        out[j] = mobius(k // j) * q ** (j / 2) / (2 * k)
    return out


def gamma_to_monomial(d: int, coeffs: np.ndarray) -> np.ndarray:
    out = np.zeros(len(coeffs))
    for j, a in enumerate(coeffs):
        if a:
            g = gamma_poly(d, j)
            out[: len(g)] += a * g
    return out


def f_basis(d: int, k: int) -> np.ndarray:
    """Monomial coefficients of the degree-k polynomial whose adjusted trace counts k-cycles."""
    return gamma_to_monomial(d, f_basis_gamma(d, k))


def monomial_to_gamma(d: int, coeffs: np.ndarray) -> np.ndarray:
    """Expand a monomial-basis polynomial in Gamma_0, Gamma_1, ..."""
    cheb = C.poly2cheb(np.asarray(coeffs, dtype=float))
    out = np.zeros(len(cheb))
    out[0] = cheb[0]
    for j in range(1, len(cheb)):
        out[j] = cheb[j] / 2
        out[0] -= out[j] * gamma_shift(d, j)
    return out


def tr_poly(state: GraphState, coeffs: np.ndarray, eigenvalues: np.ndarray | None = None) -> float:
    """Adjusted trace sum_i f(lambda_i) - n a_0, with a_0 the Gamma_0 coefficient of f."""
    lam = scaled_eigenvalues(state) if eigenvalues is None else eigenvalues
    a0 = monomial_to_gamma(state.d, coeffs)[0]
    return float(P.polyval(lam, np.asarray(coeffs, dtype=float)).sum() - len(lam) * a0)


def tr_f_basis(state: GraphState, K: int, eigenvalues: np.ndarray | None = None) -> np.ndarray:
    """tr f_k for k = 1..K via the Gamma expansion (index 0 unused).

    Summing Gamma traces avoids the cancellation of evaluating f_k in monomials.
    """
    g = gamma_traces(state, K, eigenvalues)
    out = np.zeros(K + 1)
    for k in range(1, K + 1):
        out[k] = float(f_basis_gamma(state.d, k) @ g[: k + 1])
    return out
