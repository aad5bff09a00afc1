"""Small dense linear algebra for density matrices.

States are plain complex ``numpy`` arrays.  Qubit basis convention used
throughout the package: index 0 is ``|0,1>`` (photon in the second rail),
index 1 is ``|1,0>``.
"""

from __future__ import annotations

import numpy as np
from scipy.stats import unitary_group

HERMITIAN_TOL = 1e-10
TRACE_TOL = 1e-12
PSD_TOL = 1e-10


class NumericalError(ArithmeticError):
    """A computation produced a value that signals a corrupted state or a failed solve."""


def clamp_unit(x: float, slack: float = 1e-9) -> float:
    """Clip roundoff excursions of a quantity bounded by [-1, 1]; larger ones are errors."""
    if abs(x) > 1.0 + slack:
        raise NumericalError(f"value {x!r} lies outside [-1, 1]")
    return min(1.0, max(-1.0, x))


def density_matrix(m, *, trace_tol: float = TRACE_TOL) -> np.ndarray:
    """Validate ``m`` as a density matrix and return its Hermitian part.

    Raises ``ValueError`` if ``m`` is not square, not Hermitian within
    ``HERMITIAN_TOL``, not unit trace, or has an eigenvalue below ``-PSD_TOL``.
    """
    m = np.asarray(m, dtype=np.complex128)
    if m.ndim != 2 or m.shape[0] != m.shape[1] or m.shape[0] < 1:
        raise ValueError(f"density matrix must be square, got shape {m.shape}")
    if np.max(np.abs(m - m.conj().T)) > HERMITIAN_TOL:
        raise ValueError("density matrix is not Hermitian")
    m = 0.5 * (m + m.conj().T)
    tr = np.trace(m).real
    if abs(tr - 1.0) > trace_tol:
        raise ValueError(f"density matrix trace is {tr!r}, expected 1")
    if np.linalg.eigvalsh(m)[0] < -PSD_TOL:
        raise ValueError("density matrix is not positive semi-definite")
    return m


def pure(psi) -> np.ndarray:
    """Projector ``|psi><psi|`` of a normalised state vector."""
    psi = np.asarray(psi, dtype=np.complex128).ravel()
    norm = np.vdot(psi, psi).real
    if abs(norm - 1.0) > TRACE_TOL:
        raise ValueError(f"state vector has norm^2 {norm!r}, expected 1")
    return np.outer(psi, psi.conj())


def tensor(a, b) -> np.ndarray:
    """Kronecker product with ``a``'s index major."""
    return np.kron(np.asarray(a, dtype=np.complex128), np.asarray(b, dtype=np.complex128))


def partial_trace(rho, dims: tuple[int, int], keep: str = "A") -> np.ndarray:
    """Reduce a bipartite ``rho`` on ``dA*dB`` to subsystem ``keep`` ("A" or "B")."""
    rho = np.asarray(rho)
    d_a, d_b = (int(x) for x in dims)
    if rho.shape != (d_a * d_b, d_a * d_b):
        raise ValueError(f"matrix of shape {rho.shape} does not match dims {dims}")
    r = rho.reshape(d_a, d_b, d_a, d_b)
    if keep == "A":
        return np.einsum("ijkj->ik", r)
    if keep == "B":
        return np.einsum("ijil->jl", r)
    raise ValueError(f"keep must be 'A' or 'B', got {keep!r}")


def eig_hermitian(m) -> tuple[np.ndarray, np.ndarray]:
    """Eigen-decomposition with eigenvalues sorted descending.

    Columns of the returned vector matrix follow the eigenvalue order.
    """
    m = np.asarray(m, dtype=np.complex128)
    if m.ndim != 2 or m.shape[0] != m.shape[1]:
        raise ValueError(f"matrix must be square, got shape {m.shape}")
    if np.max(np.abs(m - m.conj().T)) > HERMITIAN_TOL:
        raise ValueError("matrix is not Hermitian")
    vals, vecs = np.linalg.eigh(0.5 * (m + m.conj().T))
    return vals[::-1].copy(), vecs[:, ::-1].copy()


def _psd_sqrt(m: np.ndarray) -> np.ndarray:
    vals, vecs = np.linalg.eigh(0.5 * (m + m.conj().T))
    # eigenvalues at roundoff level would otherwise enter as sqrt(eps)
    cut = vals.size * np.finfo(float).eps * max(vals[-1], 0.0)
    vals = np.where(vals > cut, vals, 0.0)
    return (vecs * np.sqrt(vals)) @ vecs.conj().T


def uhlmann_fidelity(a, b) -> float:
    """``[Tr sqrt(sqrt(a) b sqrt(a))]^2``, clipped to ``[0, 1]``.

    Evaluated as the squared trace norm of ``sqrt(a) sqrt(b)``, which is the
    same quantity without a square root of the product's spectrum.
    """
    a = np.asarray(a, dtype=np.complex128)
    b = np.asarray(b, dtype=np.complex128)
    if a.shape != b.shape:
        raise ValueError(f"dimension mismatch: {a.shape} vs {b.shape}")
    sv = np.linalg.svd(_psd_sqrt(a) @ _psd_sqrt(b), compute_uv=False)
    f = float(np.sum(sv) ** 2)
    return min(max(f, 0.0), 1.0)


def purity(rho) -> float:
    """Tr[rho^2]."""
    rho = np.asarray(rho)
    return float(np.sum(np.abs(rho) ** 2))


def trace_distance(a, b) -> float:
    return 0.5 * float(np.sum(np.abs(np.linalg.eigvalsh(np.asarray(a) - np.asarray(b)))))


def random_density_matrix(d: int, rng: np.random.Generator, rank: int | None = None) -> np.ndarray:
    """Ginibre-ensemble density matrix of dimension ``d`` and given rank (full by default)."""
    rank = d if rank is None else rank
    g = rng.standard_normal((d, rank)) + 1j * rng.standard_normal((d, rank))
    m = g @ g.conj().T
    return m / np.trace(m).real


def random_unitary(d: int, rng: np.random.Generator) -> np.ndarray:
    """Haar-random ``d x d`` unitary."""
    if d == 1:
        return np.exp(2j * np.pi * rng.random()) * np.ones((1, 1), dtype=np.complex128)
    return unitary_group.rvs(d, random_state=rng)
