"""Qubit transfer by partial exchange, measurement and feed-forward.

Composite ordering is ``qubit S (x) qubit T (x) env S (x) env T``.  Qubit
index 0 is ``|0,1>``, index 1 is ``|1,0>``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .core import density_matrix
from .environment import EnvState, flip_expectation

_Z = np.diag([1.0, -1.0]).astype(np.complex128)  # pi-flip on |1,0>
_X = np.array([[0.0, 1.0], [1.0, 0.0]], dtype=np.complex128)  # rail relabelling
_PLUS = np.array([1.0, 1.0], dtype=np.complex128) / math.sqrt(2.0)
_MINUS = np.array([1.0, -1.0], dtype=np.complex128) / math.sqrt(2.0)
_EQUATORIAL_TOL = 1e-12


def make_source(theta: float) -> np.ndarray:
    """(|0,1> + e^{i theta}|1,0>)/sqrt(2)."""
    return np.array([1.0, np.exp(1j * theta)], dtype=np.complex128) / math.sqrt(2.0)


def make_target() -> np.ndarray:
    return make_source(0.0)


def orthogonal_complement(theta: float) -> np.ndarray:
    return np.array([1.0, -np.exp(1j * theta)], dtype=np.complex128) / math.sqrt(2.0)


@dataclass(frozen=True)
class Composite:
    """Post-selected two-qubit-plus-environment state after the partial exchange.

    ``D_prior`` is the carriers' flip expectation, known beforehand from a
    HOM measurement; feed-forward only consults its sign.
    """

    rho: np.ndarray
    d: int
    D_prior: float
    success_probability: float


@dataclass(frozen=True)
class TransferOutcome:
    rho_plus: np.ndarray
    rho_minus: np.ndarray
    rho_corrected: np.ndarray
    p_plus: float
    p_minus: float
    D_effective: float


def _check_equatorial(psi, name: str) -> np.ndarray:
    psi = np.asarray(psi, dtype=np.complex128).ravel()
    if psi.shape != (2,):
        raise ValueError(f"{name} must be a 2-component amplitude vector")
    if np.max(np.abs(np.abs(psi) - 1.0 / math.sqrt(2.0))) > _EQUATORIAL_TOL:
        raise ValueError(f"{name} is not an equatorial dual-rail state")
    return psi


def postselection_probability(source, target) -> float:
    """Chance that each qubit still holds exactly one photon after the rail swap.

    Of the four rail-occupation branches only the two with opposite qubit
    values survive.
    """
    s = np.asarray(source, dtype=np.complex128)
    t = np.asarray(target, dtype=np.complex128)
    return float(abs(s[0] * t[1]) ** 2 + abs(s[1] * t[0]) ** 2)


def partial_exchange(source, target, env: EnvState) -> Composite:
    """Swap one rail of S with one rail of T and post-select one photon per qubit.

    Surviving branches: ``|1,0>_S |0,1>_T`` keeps the environment labels and
    carries the source's ``|0,1>`` amplitude; ``|0,1>_S |1,0>_T`` exchanges the
    environment labels and carries the source's ``|1,0>`` amplitude.
    """
    s = _check_equatorial(source, "source")
    t = _check_equatorial(target, "target")
    if abs(abs(np.vdot(t, make_target())) - 1.0) > _EQUATORIAL_TOL:
        raise ValueError("target must be (|0,1> + |1,0>)/sqrt(2)")
    if env.dS != env.dT:
        raise ValueError(f"environment must be square, got {env.dS}x{env.dT}")
    d = env.dS
    n_env = d * d
    # columns: env basis |i,k>; rows: |qS, qT, env>
    iso = np.zeros((4 * n_env, n_env), dtype=np.complex128)
    i, k = np.divmod(np.arange(n_env), d)
    keep = i * d + k
    swapped = k * d + i
    q_keep = 1 * 2 + 0  # |1,0>_S |0,1>_T
    q_swap = 0 * 2 + 1  # |0,1>_S |1,0>_T
    iso[q_keep * n_env + keep, np.arange(n_env)] = s[0] * t[1]
    iso[q_swap * n_env + swapped, np.arange(n_env)] = s[1] * t[0]
    p_succ = postselection_probability(s, t)
    iso /= math.sqrt(p_succ)
    rho = iso @ env.rho @ iso.conj().T
    return Composite(rho, d, flip_expectation(env), p_succ)


def _conditional(composite: Composite, measured: str, outcome: np.ndarray) -> tuple[np.ndarray, float]:
    n_env = composite.d**2
    r = composite.rho.reshape(2, 2, n_env, 2, 2, n_env)
    r = np.einsum("abecde->abcd", r)  # trace out the environment
    if measured == "S":
        out = np.einsum("a,atbu,b->tu", outcome.conj(), r, outcome)
    else:
        out = np.einsum("a,sauv,v->su", outcome.conj(), r, outcome)
    p = float(np.trace(out).real)
    return out / p, p


def _assemble(rho_p, p_p, rho_m, p_m, post, D, compensate_sign) -> TransferOutcome:
    """Feed-forward: pi-flip on the '-' branch, optional sign fix, then ``post``."""
    fixed = p_p * rho_p + p_m * (_Z @ rho_m @ _Z)
    d_eff = D
    if compensate_sign and D < 0:
        fixed = _Z @ fixed @ _Z
        d_eff = -D
    fixed = post @ fixed @ post.conj().T
    return TransferOutcome(
        rho_plus=rho_p,
        rho_minus=rho_m,
        rho_corrected=density_matrix(fixed),
        p_plus=p_p,
        p_minus=p_m,
        D_effective=d_eff,
    )


def measure_and_feedforward(composite: Composite, compensate_sign: bool = False) -> TransferOutcome:
    """Measure S in the |+->, |-> basis and correct T."""
    rho_p, p_p = _conditional(composite, "S", _PLUS)
    rho_m, p_m = _conditional(composite, "S", _MINUS)
    return _assemble(rho_p, p_p, rho_m, p_m, np.eye(2), composite.D_prior, compensate_sign)


def erase(composite: Composite, compensate_sign: bool = False) -> TransferOutcome:
    """Measure T in the |+->, |-> basis and correct S.

    After the exchange the phase sits on S with its rails crossed, so the
    feed-forward ends with a fixed rail relabelling of S.
    """
    rho_p, p_p = _conditional(composite, "T", _PLUS)
    rho_m, p_m = _conditional(composite, "T", _MINUS)
    return _assemble(rho_p, p_p, rho_m, p_m, _X, composite.D_prior, compensate_sign)


def output_state(theta: float, D: float) -> np.ndarray:
    """((1+D)/2)|Psi><Psi| + ((1-D)/2)|Psi_perp><Psi_perp|."""
    psi = make_source(theta)
    perp = orthogonal_complement(theta)
    return 0.5 * (1 + D) * np.outer(psi, psi.conj()) + 0.5 * (1 - D) * np.outer(perp, perp.conj())


def transfer_analytic(theta: float, D: float, compensate_sign: bool = False) -> TransferOutcome:
    """Closed-form transfer result; no composite simulation."""
    if not -1.0 <= D <= 1.0:
        raise ValueError(f"D must lie in [-1, 1], got {D}")
    rho_p = output_state(theta, D)
    d_eff = abs(D) if compensate_sign else D
    return TransferOutcome(
        rho_plus=rho_p,
        rho_minus=_Z @ rho_p @ _Z,
        rho_corrected=output_state(theta, d_eff),
        p_plus=0.5,
        p_minus=0.5,
        D_effective=d_eff,
    )


def overlap(rho, psi) -> float:
    """<psi|rho|psi>."""
    psi = np.asarray(psi, dtype=np.complex128)
    return float(np.vdot(psi, np.asarray(rho) @ psi).real)
