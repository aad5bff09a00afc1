"""Joint state of the photons' internal ("environmental") degrees of freedom.

The central quantity is ``D = Tr[F rho]`` where ``F`` swaps the internal
states of the two photons.  ``|D|`` measures effective indistinguishability;
``D < 0`` certifies entanglement of the internal degrees of freedom.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field

import numpy as np

from . import _kernels
from .core import NumericalError, clamp_unit, density_matrix, pure

UNITARY_TOL = 1e-10
WITNESS_TOL = 1e-10
_IMAG_TOL = 1e-9


@dataclass(frozen=True)
class EnvState:
    """Density matrix on ``dS*dT`` with joint index ``(i, k) -> i*dT + k``.

    Entry ``rho[i*dT + k, j*dT + l]`` is the coefficient ``c_{ij,kl}`` of
    ``|i><j| (x) |k><l|``.
    """

    rho: np.ndarray = field(repr=False)
    dS: int
    dT: int

    def __post_init__(self):
        if self.dS < 1 or self.dT < 1:
            raise ValueError("subsystem dimensions must be positive")
        rho = density_matrix(self.rho)
        if rho.shape[0] != self.dS * self.dT:
            raise ValueError(
                f"rho has dimension {rho.shape[0]}, expected dS*dT = {self.dS * self.dT}"
            )
        rho.setflags(write=False)
        object.__setattr__(self, "rho", rho)

    @property
    def dim(self) -> int:
        return self.dS * self.dT

    @classmethod
    def from_vector(cls, psi, dS: int, dT: int | None = None) -> "EnvState":
        return cls(pure(psi), dS, dS if dT is None else dT)

    @classmethod
    def product(cls, psi_s, psi_t) -> "EnvState":
        psi_s = np.asarray(psi_s, dtype=np.complex128)
        psi_t = np.asarray(psi_t, dtype=np.complex128)
        return cls(pure(np.kron(psi_s, psi_t)), psi_s.size, psi_t.size)


@dataclass(frozen=True)
class FlipDecomposition:
    p_sym: float
    p_anti: float

    @property
    def D(self) -> float:
        return self.p_sym - self.p_anti


class Witness(str, enum.Enum):
    WITNESSED = "witnessed"
    INCONCLUSIVE = "inconclusive"


def _bell(sign: float) -> EnvState:
    # built from exact halves so that D comes out as exactly +-1
    rho = np.zeros((4, 4), dtype=np.complex128)
    rho[1, 1] = rho[2, 2] = 0.5
    rho[1, 2] = rho[2, 1] = 0.5 * sign
    return EnvState(rho, 2, 2)


def singlet() -> EnvState:
    """``(|01> - |10>)/sqrt(2)``, D = -1."""
    return _bell(-1.0)


def symmetric_bell() -> EnvState:
    """``(|01> + |10>)/sqrt(2)``, D = +1."""
    return _bell(1.0)


def product_with_overlap(c: float) -> EnvState:
    """Pure product ``|0> (x) (c|0> + sqrt(1-c^2)|1>)``; D = c^2."""
    if not -1.0 <= c <= 1.0:
        raise ValueError(f"overlap must lie in [-1, 1], got {c}")
    return EnvState.product([1, 0], [c, np.sqrt(1.0 - c * c)])


def werner(d: int, D: float) -> EnvState:
    """The Werner state of local dimension ``d`` with flip expectation ``D``."""
    if d == 1 and D != 1.0:
        raise ValueError("for d = 1 the only state has D = 1")
    if not -1.0 <= D <= 1.0:
        raise ValueError(f"D must lie in [-1, 1], got {D}")
    return EnvState(_werner_matrix(d, 0.5 * (1 + D), 0.5 * (1 - D)), d, d)


def build_flip(d: int) -> np.ndarray:
    """The ``d^2 x d^2`` swap permutation: ``F|i,k> = |k,i>``."""
    if d < 1:
        raise ValueError("d must be positive")
    f = np.zeros((d * d, d * d), dtype=np.int64)
    i, k = np.divmod(np.arange(d * d), d)
    f[k * d + i, i * d + k] = 1
    return f


def _require_square(env: EnvState) -> int:
    if env.dS != env.dT:
        raise ValueError(f"flip operator needs dS == dT, got {env.dS} and {env.dT}")
    return env.dS


def flip_expectation(env: EnvState) -> float:
    """D = sum_{i,j} c_{ij,ji}, without forming the flip matrix."""
    d = _require_square(env)
    val = _kernels.flip_trace(env.rho, d)
    if abs(val.imag) > _IMAG_TOL:
        raise NumericalError(f"Tr[F rho] has imaginary part {val.imag:.3e}")
    return clamp_unit(float(val.real))


def flip_decompose(env: EnvState) -> FlipDecomposition:
    D = flip_expectation(env)
    return FlipDecomposition(p_sym=0.5 * (1.0 + D), p_anti=0.5 * (1.0 - D))


def witness_entanglement(env: EnvState, tol: float = WITNESS_TOL) -> Witness:
    """``WITNESSED`` when D < -tol.  Never claims separability."""
    return Witness.WITNESSED if flip_expectation(env) < -tol else Witness.INCONCLUSIVE


def _werner_matrix(d: int, p_sym: float, p_anti: float) -> np.ndarray:
    eye = np.eye(d * d)
    f = build_flip(d).astype(float)
    out = p_sym * (eye + f) / (d * (d + 1))
    if d > 1:
        out = out + p_anti * (eye - f) / (d * (d - 1))
    return out.astype(np.complex128)


def twirl(env: EnvState) -> EnvState:
    """Average over identical local unitaries, done analytically.

    The result lives in the commutant of ``U (x) U`` and carries the same D.
    """
    d = _require_square(env)
    dec = flip_decompose(env)
    p_sym, p_anti = dec.p_sym, dec.p_anti
    if d == 1:
        p_sym, p_anti = 1.0, 0.0
    return EnvState(_werner_matrix(d, p_sym, p_anti), d, d)


def _check_unitary(u: np.ndarray, d: int, name: str) -> np.ndarray:
    u = np.asarray(u, dtype=np.complex128)
    if u.shape != (d, d):
        raise ValueError(f"{name} must be {d}x{d}, got {u.shape}")
    if np.max(np.abs(u @ u.conj().T - np.eye(d))) > UNITARY_TOL:
        raise ValueError(f"{name} is not unitary")
    return u


def apply_local_unitary(env: EnvState, U, V) -> EnvState:
    """rho -> (U (x) V) rho (U (x) V)^dagger."""
    u = _check_unitary(U, env.dS, "U")
    v = _check_unitary(V, env.dT, "V")
    w = np.kron(u, v)
    return EnvState(w @ env.rho @ w.conj().T, env.dS, env.dT)


def swap_photons(env: EnvState) -> EnvState:
    """F rho F: relabel which photon is S and which is T."""
    d = _require_square(env)
    f = build_flip(d).astype(np.complex128)
    return EnvState(f @ env.rho @ f, d, d)


def with_mode_overlap(env: EnvState, m: float) -> EnvState:
    """Mix in a fully distinguishable fraction ``1 - m`` of pairs.

    Each photon gets an extra two-level label (doubling the local
    dimension).  With weight ``m`` both carry label 0; otherwise S carries 0
    and T carries 1, so those pairs never interfere.  D scales by ``m``.
    """
    d = _require_square(env)
    if not 0.0 <= m <= 1.0:
        raise ValueError(f"mode overlap must lie in [0, 1], got {m}")
    if m == 1.0:
        return env
    r = env.rho.reshape(d, d, d, d)
    # local index (label, internal) -> label*d + internal
    big = np.zeros((2, d, 2, d, 2, d, 2, d), dtype=np.complex128)
    big[0, :, 0, :, 0, :, 0, :] = m * r
    big[0, :, 1, :, 0, :, 1, :] = (1.0 - m) * r
    n = 2 * d
    return EnvState(big.reshape(n * n, n * n), n, n)
