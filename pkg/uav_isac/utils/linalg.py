import numpy as np

# eigenvalue floor of the symmetric square roots
EIG_FLOOR = 1e-12


def sym(m: np.ndarray) -> np.ndarray:
    return 0.5 * (m + m.T)


def inv_sqrtm(j: np.ndarray, floor: float = EIG_FLOOR) -> np.ndarray:
    """Symmetric J^{-1/2} through the eigendecomposition, eigenvalues floored."""
    lam, vecs = np.linalg.eigh(sym(np.asarray(j, dtype=np.float64)))
    return (vecs / np.sqrt(np.maximum(lam, floor))) @ vecs.T


def spd_inv(j: np.ndarray) -> np.ndarray:
    """Inverse of a symmetric positive definite matrix, returned exactly symmetric."""
    lam, vecs = np.linalg.eigh(sym(np.asarray(j, dtype=np.float64)))
    if lam[0] <= 0:
        raise np.linalg.LinAlgError(f"matrix is not positive definite (smallest eigenvalue {lam[0]:.3e})")
    return (vecs / lam) @ vecs.T
