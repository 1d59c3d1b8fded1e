"""Generalized companion matrix and n-truncation of power-sum systems.

The matrix B_{n,1} closes the infinite chain of power-sum PDEs at order
n: its characteristic polynomial is

    P_n(k) = k^n - p_1 k^(n-1) - ... - p_n,   p_i = (-1)^(i-1) sigma_i,

its eigenvalues are the principal curvatures, and v_j = (1, 2 k_j,
3 k_j^2, ..., n k_j^(n-1)) is an eigenvector for k_j.  The weighted
matrices

    Btilde = sum_{m>=1} (m/2) f_m B^(m-1)
    Atilde_ij = (i/2) sum_{m=0..n-1} tau_{i+m-1} df_m/dtau_j

enter the negative-definiteness hypothesis for short-time existence of
the flows; power sums with index above n are resolved through F_k.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .errors import DefectiveSpectrumError, ValidationError
from .symfun import (
    CurvatureSpectrum,
    ElemSymVector,
    PowerSumVector,
    StructConstants,
    eval_F,
)

__all__ = [
    "CompanionMatrix",
    "TruncationSystem",
    "build_companion",
    "char_poly_coefficients",
    "eigenpair_check",
    "vandermonde_relation",
    "weighted_power_matrix",
    "tilde_A_matrix",
    "hypothesis_check_T02",
    "truncate_second_order",
]


@dataclass(frozen=True)
class CompanionMatrix:
    """B_{n,1} together with the sigma vector that generated it."""

    n: int
    entries: np.ndarray
    sigma: ElemSymVector

    def power(self, p: int) -> np.ndarray:
        return np.linalg.matrix_power(self.entries, p)


@dataclass(frozen=True)
class TruncationSystem:
    """Principal part of the n-truncated system for one flow power m.

    The truncated system reads  d/dt tau = principal * dxx(tau) + a_m,
    where principal = (m/2) B^(m-1) and the first-order remainder
    a_m(tau, dx tau) comes from differentiating the closure relation; it
    is not stored in closed form (see ``note``).
    """

    n: int
    m: int
    principal: np.ndarray
    note: str


def build_companion(sigma: ElemSymVector) -> CompanionMatrix:
    """Assemble B_{n,1} from sigma.

    Superdiagonal entry (i, i+1) is i/(i+1) (1-based), last row entry
    (n, i) is (-1)^(n-i) (n/i) sigma_{n-i+1}.
    """
    n = sigma.n
    B = np.zeros((n, n))
    for i in range(1, n):
        B[i - 1, i] = i / (i + 1)
    for i in range(1, n + 1):
        B[n - 1, i - 1] = (-1.0) ** (n - i) * n / i * sigma.sigma[n - i + 1]
    return CompanionMatrix(n, B, sigma)


def char_poly_coefficients(B: CompanionMatrix) -> np.ndarray:
    """Coefficients of det(xI - B) in descending powers, leading 1.

    Faddeev-LeVerrier recursion on traces of powers; expected to match
    ((-1)^i sigma_i) entry for entry.
    """
    A = B.entries
    n = B.n
    coeffs = np.empty(n + 1)
    coeffs[0] = 1.0
    M = np.zeros((n, n))
    for i in range(1, n + 1):
        M = A @ M + coeffs[i - 1] * np.eye(n)
        coeffs[i] = -np.trace(A @ M) / i
    return coeffs


def _eigvector(n: int, kj: float) -> np.ndarray:
    return np.array([(i + 1) * kj**i for i in range(n)])


def eigenpair_check(B: CompanionMatrix, spec: CurvatureSpectrum) -> float:
    """Largest normalized eigenpair residual over the spectrum.

    For each principal curvature k_j, with v_j = (1, 2 k_j, ..., n k_j^(n-1)):

        r_j = ||B v_j - k_j v_j||_inf / (1 + ||v_j||_inf)

    Returns max_j r_j.  Valid for repeated roots too (the identity does
    not require diagonalizability).
    """
    if spec.n != B.n:
        raise ValidationError("spectrum size does not match matrix")
    worst = 0.0
    for kj in spec.k:
        v = _eigvector(B.n, kj)
        res = np.max(np.abs(B.entries @ v - kj * v)) / (1.0 + np.max(np.abs(v)))
        worst = max(worst, res)
    return float(worst)


def vandermonde_relation(B: CompanionMatrix, spec: CurvatureSpectrum) -> float:
    """Normalized residual of B V = V D on the Vandermonde-type matrix.

    The columns of V are the eigenvectors v_j = (1, 2 k_j, ..., n k_j^(n-1)),
    i.e. V_{ij} = i k_j^(i-1) (weights proportional to the row index;
    rescaling columns leaves the relation invariant), and
    D = diag(k_1, ..., k_n).  For distinct roots V is invertible and
    V^-1 B V = D.  Raises :class:`DefectiveSpectrumError` when the
    minimal spectral gap is below 1e-8: V is (near-)singular there and
    diagonalizability is only guaranteed for distinct roots.
    """
    if spec.n != B.n:
        raise ValidationError("spectrum size does not match matrix")
    k = spec.as_array()
    if spec.n > 1 and np.min(np.diff(k)) < 1e-8:
        raise DefectiveSpectrumError(
            f"minimal spectral gap {np.min(np.diff(k)):.3e} < 1e-8"
        )
    n = B.n
    i = np.arange(1, n + 1)[:, None]
    V = i * k[None, :] ** (i - 1)
    R = B.entries @ V - V @ np.diag(k)
    return float(np.max(np.abs(R)) / (1.0 + np.max(np.abs(V))))


def weighted_power_matrix(f: Sequence[float], B: CompanionMatrix) -> np.ndarray:
    """Btilde = sum_{m=1..len(f)} (m/2) f_m B^(m-1).

    ``f`` lists f_1, f_2, ... evaluated at the point; up to n entries are
    meaningful (single-power flows with m = n still truncate through
    B^(n-1)).
    """
    if len(f) > B.n:
        raise ValidationError(f"at most n={B.n} weights f_1..f_n are meaningful")
    out = np.zeros((B.n, B.n))
    for m, fm in enumerate(f, start=1):
        if fm != 0.0:
            out += (m / 2.0) * fm * B.power(m - 1)
    return out


def tilde_A_matrix(
    tau: PowerSumVector,
    f_partials: np.ndarray,
    consts: StructConstants | None = None,
) -> np.ndarray:
    """Atilde_ij = (i/2) sum_{m=0..n-1} tau_{i+m-1} df_m/dtau_j.

    ``f_partials[m, j-1]`` holds df_m/dtau_j at the evaluation point for
    m = 0..n-1.  Indices i+m-1 run from 0 to 2n-2: tau_0 = n, and any
    index above n is resolved through F_k(tau_1) with the supplied
    structure constants (required whenever n >= 2).
    """
    n = tau.n
    fp = np.asarray(f_partials, dtype=float)
    if fp.shape != (n, n):
        raise ValidationError(f"f_partials must be {n}x{n} (rows m=0..n-1)")

    def tau_at(idx: int) -> float:
        if idx == 0:
            return float(n)
        if idx <= n:
            return tau.tau[idx - 1]
        if consts is None:
            raise ValidationError(
                f"tau_{idx} exceeds n={n}: structure constants required"
            )
        return float(eval_F(idx, tau.tau[0], consts))

    active = [m for m in range(n) if np.any(fp[m] != 0.0)]
    A = np.zeros((n, n))
    for i in range(1, n + 1):
        row = np.zeros(n)
        for m in active:
            row += tau_at(i + m - 1) * fp[m]
        A[i - 1] = (i / 2.0) * row
    return A


def hypothesis_check_T02(Btilde: np.ndarray, Atilde: np.ndarray) -> tuple[bool, float]:
    """Negative definiteness of Btilde + Atilde, tested on the symmetric part.

    Returns (negative_definite, margin) with margin the largest
    eigenvalue of (M + M^T)/2; the hypothesis holds iff margin < 0.
    """
    M = np.asarray(Btilde) + np.asarray(Atilde)
    sym = 0.5 * (M + M.T)
    margin = float(np.max(np.linalg.eigvalsh(sym)))
    return margin < 0.0, margin


def truncate_second_order(sigma: ElemSymVector, m: int) -> TruncationSystem:
    """Principal part (m/2) B_{n,1}^(m-1) of the n-truncated system."""
    if not 1 <= m <= sigma.n:
        raise ValidationError(f"flow power m={m} out of range 1..{sigma.n}")
    B = build_companion(sigma)
    principal = (m / 2.0) * B.power(m - 1)
    return TruncationSystem(
        n=sigma.n,
        m=m,
        principal=principal,
        note=(
            "omitted lower-order remainder a_m(tau, dx tau) collects the "
            "dx-derivatives of the closure coefficients; available only "
            "numerically as the difference of the two sides"
        ),
    )
