import numpy as np
from scipy import linalg
from scipy.linalg import lapack

from stt.core.config import SYMMETRY_TOL
from stt.core.exceptions import NumericalDegeneracyException


def symmetrize(m: np.ndarray) -> np.ndarray:
    return 0.5 * (m + np.swapaxes(m, -1, -2))


def sigma_min(m: np.ndarray) -> float:
    return float(linalg.svdvals(m)[-1])


def min_eigenvalue(m: np.ndarray) -> float:
    return float(np.min(np.linalg.eigvalsh(symmetrize(m))))


def is_spd(m: np.ndarray) -> bool:
    if np.abs(m - np.swapaxes(m, -1, -2)).max() > SYMMETRY_TOL:
        return False
    try:
        np.linalg.cholesky(m)
    except np.linalg.LinAlgError:
        return False
    return True


def require_spd(m: np.ndarray, what: str) -> np.ndarray:
    if not np.all(np.isfinite(m)):
        raise NumericalDegeneracyException(f"{what} has non-finite entries")
    if not is_spd(m):
        raise NumericalDegeneracyException(
            f"{what} is not symmetric positive definite", min_eigenvalue(m)
        )
    return m


def spd_inverse(m: np.ndarray, what: str) -> np.ndarray:
    """Inverse of a symmetric positive-definite matrix through its Cholesky factor."""
    m = symmetrize(np.asarray(m, dtype=float))
    if not np.isfinite(m).all():
        raise NumericalDegeneracyException(f"{what} has non-finite entries")
    factor, info = lapack.dpotrf(m, lower=1)
    if info != 0:
        raise NumericalDegeneracyException(f"{what} is not positive definite", min_eigenvalue(m))
    inv, info = lapack.dpotri(factor, lower=1)
    if info != 0:
        raise NumericalDegeneracyException(f"{what} is singular", min_eigenvalue(m))
    # dpotri fills the lower triangle only
    return np.tril(inv) + np.tril(inv, -1).T


def spd_inverse_batch(m: np.ndarray, what: str) -> np.ndarray:
    """spd_inverse over a stack of matrices, shape (..., d, d)."""
    m = symmetrize(np.asarray(m, dtype=float))
    if not np.isfinite(m).all():
        raise NumericalDegeneracyException(f"{what} has non-finite entries")
    try:
        L = np.linalg.cholesky(m)
    except np.linalg.LinAlgError:
        raise NumericalDegeneracyException(f"{what} is not positive definite", min_eigenvalue(m))
    Linv = np.linalg.inv(L)
    return symmetrize(np.swapaxes(Linv, -1, -2) @ Linv)


def relative_error(a: np.ndarray, b: np.ndarray) -> float:
    scale = max(float(np.linalg.norm(b)), 1e-300)
    return float(np.linalg.norm(np.asarray(a) - np.asarray(b)) / scale)
