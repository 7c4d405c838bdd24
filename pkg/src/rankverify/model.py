"""Gaussian model (x, sigma): validation, covariance families, ingestion helpers."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Literal

import numpy as np

from .errors import ModelValidationError

SYMMETRY_TOL = 1e-10

CovKind = Literal["diagonal", "equicorrelated", "ar1", "multinomial-approx", "general"]


@dataclass(frozen=True, eq=False)
class GaussianModel:
    """Observations ``x`` with known covariance ``sigma``.

    Build instances through :func:`validate`; the arrays are made read-only so
    a model can be shared freely once constructed.
    """

    x: np.ndarray
    sigma: np.ndarray

    @property
    def n(self) -> int:
        return self.x.shape[0]

    def pair_variances(self) -> np.ndarray:
        """Matrix of Var(X_i - X_j) = S_ii - 2 S_ij + S_jj."""
        d = np.diag(self.sigma)
        return d[:, None] - 2.0 * self.sigma + d[None, :]

    def __eq__(self, other):
        if not isinstance(other, GaussianModel):
            return NotImplemented
        return np.array_equal(self.x, other.x) and np.array_equal(self.sigma, other.sigma)

    __hash__ = None


@dataclass(frozen=True)
class CovFamilyTag:
    kind: CovKind
    parameter: float | None = None


def validate(x, sigma) -> GaussianModel:
    """Check (x, sigma) and return a :class:`GaussianModel`.

    Collects every violated invariant into one :class:`ModelValidationError`.
    ``sigma`` only needs symmetric, positive diagonal and Var(X_i - X_j) > 0
    for every pair; it is not required to be positive semi-definite. Matrices
    that are asymmetric within ``SYMMETRY_TOL`` (relative to max |sigma|) are
    symmetrized.
    """
    x = np.array(x, dtype=float)
    sigma = np.array(sigma, dtype=float)
    problems: list[str] = []
    bad_pairs: list[tuple[int, int]] = []

    if x.ndim != 1:
        raise ModelValidationError([f"x must be a vector, got shape {x.shape}"])
    n = x.shape[0]
    if n < 2:
        problems.append(f"need at least 2 observations, got {n}")
    if sigma.shape != (n, n):
        problems.append(f"sigma has shape {sigma.shape}, expected {(n, n)}")
        raise ModelValidationError(problems)
    if not np.all(np.isfinite(x)):
        problems.append("x contains non-finite values")
    if not np.all(np.isfinite(sigma)):
        problems.append("sigma contains non-finite values")
        raise ModelValidationError(problems)

    scale = float(np.max(np.abs(sigma))) if sigma.size else 0.0
    asym = float(np.max(np.abs(sigma - sigma.T))) if sigma.size else 0.0
    if asym > SYMMETRY_TOL * max(scale, np.finfo(float).tiny):
        problems.append(f"sigma is not symmetric (max |S - S^T| = {asym:.3g})")
    else:
        sigma = 0.5 * (sigma + sigma.T)

    diag = np.diag(sigma)
    for i in np.flatnonzero(diag <= 0):
        problems.append(f"sigma[{i},{i}] = {diag[i]:.6g} is not positive")

    if not problems:
        v2 = diag[:, None] - 2.0 * sigma + diag[None, :]
        for i in range(n):
            for j in range(i + 1, n):
                if not v2[i, j] > 0:
                    bad_pairs.append((i, j))
                    problems.append(
                        f"pair ({i}, {j}) is perfectly correlated: Var(X_i - X_j) = {v2[i, j]:.6g}"
                    )

    if problems:
        err = ModelValidationError(problems)
        err.bad_pairs = bad_pairs
        raise err

    x.setflags(write=False)
    sigma.setflags(write=False)
    return GaussianModel(x=x, sigma=sigma)


def is_psd(sigma, tol: float = 1e-10) -> bool:
    sigma = np.asarray(sigma, dtype=float)
    eig = np.linalg.eigvalsh(0.5 * (sigma + sigma.T))
    return bool(eig[0] >= -tol * max(1.0, float(np.max(np.abs(eig)))))


# --- covariance families ----------------------------------------------------


def cov_diagonal(variances) -> np.ndarray:
    variances = np.asarray(variances, dtype=float)
    if variances.ndim != 1 or np.any(~(variances > 0)):
        raise ValueError("variances must be a vector of positive numbers")
    return np.diag(variances)


def cov_equicorrelated(n: int, variance: float, rho: float) -> np.ndarray:
    """Constant variance, constant correlation ``rho``.

    ``rho`` must lie in (-1/(n-1), 1) so that the matrix is positive definite.
    """
    if n < 2:
        raise ValueError("n must be at least 2")
    if not variance > 0:
        raise ValueError("variance must be positive")
    if not -1.0 / (n - 1) < rho < 1.0:
        raise ValueError(f"rho={rho} outside (-1/(n-1), 1) = ({-1.0 / (n - 1):.6g}, 1)")
    sigma = np.full((n, n), rho * variance)
    np.fill_diagonal(sigma, variance)
    return sigma


def cov_ar1(n: int, variance: float, rho: float) -> np.ndarray:
    if n < 2:
        raise ValueError("n must be at least 2")
    if not variance > 0:
        raise ValueError("variance must be positive")
    if not abs(rho) < 1.0:
        raise ValueError(f"AR(1) needs |rho| < 1, got {rho}")
    lag = np.abs(np.subtract.outer(np.arange(n), np.arange(n)))
    return variance * np.power(float(rho), lag)


def multinomial_gaussian_approx(counts, t: int | None = None) -> tuple[np.ndarray, np.ndarray]:
    """Gaussian approximation to multinomial proportions.

    Returns ``(pi_hat, sigma)`` with ``pi_hat = counts / t`` and
    ``sigma = (diag(pi_hat) - pi_hat pi_hat^T) / t``. Every count must be
    positive; a zero category would make its pairwise variances degenerate.
    """
    counts = np.asarray(counts)
    if counts.ndim != 1 or counts.shape[0] < 2:
        raise ValueError("counts must be a vector with at least 2 categories")
    if not np.all(np.equal(np.mod(counts, 1), 0)):
        raise ValueError("counts must be integers")
    counts = counts.astype(np.int64)
    total = int(counts.sum())
    if t is None:
        t = total
    if total != t:
        raise ValueError(f"counts sum to {total}, not t={t}")
    if np.any(counts <= 0):
        raise ValueError(f"every count must be positive; zero categories at {np.flatnonzero(counts <= 0).tolist()}")
    pi_hat = counts / float(t)
    sigma = (np.diag(pi_hat) - np.outer(pi_hat, pi_hat)) / t
    return pi_hat, sigma


def sample_covariance(rows) -> np.ndarray:
    """Unbiased sample covariance of an (m samples x n variables) array."""
    rows = np.asarray(rows, dtype=float)
    if rows.ndim != 2:
        raise ValueError("rows must be a 2-D array (samples x variables)")
    m = rows.shape[0]
    if m < 2:
        raise ValueError(f"need at least 2 samples, got {m}")
    cov = np.cov(rows, rowvar=False, ddof=1).reshape(rows.shape[1], rows.shape[1])
    zero = np.flatnonzero(np.diag(cov) <= 0)
    if zero.size:
        raise ValueError(f"constant columns give zero variance: {zero.tolist()}")
    return cov


def classify_covariance(sigma, tol: float = 1e-10) -> CovFamilyTag:
    """Most specific family that reproduces ``sigma`` within ``tol * max|sigma|``.

    Checked in order: diagonal, equicorrelated, AR(1), multinomial
    approximation. ``parameter`` carries rho for the correlated families and
    the inferred trial count t for the multinomial one.
    """
    sigma = np.asarray(sigma, dtype=float)
    n = sigma.shape[0]
    atol = tol * float(np.max(np.abs(sigma)))

    def close(a, b) -> bool:
        return bool(np.max(np.abs(np.asarray(a) - np.asarray(b))) <= atol)

    off = ~np.eye(n, dtype=bool)
    if close(sigma[off], 0.0):
        return CovFamilyTag("diagonal")

    diag = np.diag(sigma)
    var = float(diag.mean())
    if close(diag, var):
        rho = float(sigma[off].mean()) / var
        if close(sigma[off], rho * var) and -1.0 / (n - 1) + tol < rho < 1.0 - tol:
            return CovFamilyTag("equicorrelated", rho)
        rho = float(sigma[0, 1]) / var
        if abs(rho) < 1.0 and close(sigma, cov_ar1(n, var, rho)):
            return CovFamilyTag("ar1", rho)

    tag = _match_multinomial(sigma, close)
    if tag is not None:
        return tag
    return CovFamilyTag("general")


def _match_multinomial(sigma, close) -> CovFamilyTag | None:
    n = sigma.shape[0]
    if not close(sigma.sum(axis=1), 0.0):
        return None
    if n == 2:
        # (diag(pi) - pi pi^T)/t is not identifiable from a 2x2 matrix
        if sigma[0, 1] < 0:
            return CovFamilyTag("multinomial-approx")
        return None
    # pi_i / t = S_ii - S_ij S_ik / S_jk for any distinct j, k != i
    pi_over_t = np.empty(n)
    for i in range(n):
        j, k = [m for m in range(n) if m != i][:2]
        if sigma[j, k] >= 0:
            return None
        pi_over_t[i] = sigma[i, i] - sigma[i, j] * sigma[i, k] / sigma[j, k]
    if np.any(pi_over_t <= 0):
        return None
    t = 1.0 / pi_over_t.sum()
    pi = pi_over_t * t
    if not close(sigma, (np.diag(pi) - np.outer(pi, pi)) / t):
        return None
    return CovFamilyTag("multinomial-approx", float(t))
