"""Three-basis qubit tomography with Poisson counts and RrhoR maximum likelihood."""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Iterable, Sequence

import numpy as np

from . import _kernels
from .core import density_matrix, eig_hermitian, purity, uhlmann_fidelity

DEFAULT_MAX_ITERS = 10_000
DEFAULT_TOL = 1e-10

_S = 1.0 / math.sqrt(2.0)


@dataclass(frozen=True)
class MeasurementBasis:
    label: str
    projectors: np.ndarray = field(repr=False)  # shape (2, 2, 2)


def _basis(label: str, u, w) -> MeasurementBasis:
    u = np.asarray(u, dtype=np.complex128)
    w = np.asarray(w, dtype=np.complex128)
    proj = np.stack([np.outer(u, u.conj()), np.outer(w, w.conj())])
    proj.setflags(write=False)
    return MeasurementBasis(label, proj)


BASES = {
    "Z": _basis("Z", [1, 0], [0, 1]),
    "X": _basis("X", [_S, _S], [_S, -_S]),
    "Y": _basis("Y", [_S, 1j * _S], [_S, -1j * _S]),
}


@dataclass(frozen=True)
class CountRecord:
    basis: str
    counts: tuple[float, float]
    efficiencies: tuple[float, float] = (1.0, 1.0)

    def __post_init__(self):
        if self.basis not in BASES:
            raise ValueError(f"unknown basis {self.basis!r}")
        if len(self.counts) != 2 or len(self.efficiencies) != 2:
            raise ValueError("counts and efficiencies must be pairs")
        if min(self.counts) < 0:
            raise ValueError("counts must be non-negative")
        if not all(0.0 < e <= 1.0 for e in self.efficiencies):
            raise ValueError(f"efficiencies must lie in (0, 1], got {self.efficiencies}")


@dataclass(frozen=True)
class ReconstructionResult:
    rho_rec: np.ndarray
    log_likelihood: float
    iterations: int
    converged: bool
    ll_trace: np.ndarray = field(repr=False)
    worst_gain: float = 0.0


def simulate_counts(
    rho,
    mean_total_per_basis: float,
    seed,
    *,
    bases: Sequence[str] = ("Z", "X", "Y"),
    efficiencies: tuple[float, float] = (1.0, 1.0),
) -> list[CountRecord]:
    """Poisson counts ``n_k ~ Poisson(N * eta_k * Tr[Pi_k rho])``.

    ``seed`` is anything ``numpy.random.default_rng`` accepts (PCG64).
    """
    rho = density_matrix(rho)
    if mean_total_per_basis <= 0:
        raise ValueError("mean_total_per_basis must be positive")
    rng = np.random.default_rng(seed)
    eta = np.asarray(efficiencies, dtype=float)
    out = []
    for label in bases:
        probs = np.einsum("kij,ji->k", BASES[label].projectors, rho).real.clip(0.0, None)
        n = rng.poisson(mean_total_per_basis * eta * probs)
        out.append(CountRecord(label, (int(n[0]), int(n[1])), tuple(float(e) for e in eta)))
    return out


def ideal_records(rho, bases: Sequence[str] = ("Z", "X", "Y")) -> list[CountRecord]:
    """Noise-free records: exact outcome probabilities as weights."""
    rho = density_matrix(rho)
    out = []
    for label in bases:
        p = np.einsum("kij,ji->k", BASES[label].projectors, rho).real.clip(0.0, None)
        out.append(CountRecord(label, (float(p[0]), float(p[1]))))
    return out


def correct_efficiencies(record: CountRecord) -> CountRecord:
    """Divide counts by detector efficiency; the result carries unit efficiencies."""
    if min(record.efficiencies) <= 0:
        raise ValueError("efficiencies must be positive")
    counts = tuple(c / e for c, e in zip(record.counts, record.efficiencies))
    return replace(record, counts=counts, efficiencies=(1.0, 1.0))


def _design(records: Iterable[CountRecord]) -> tuple[np.ndarray, np.ndarray]:
    proj, weights = [], []
    for rec in records:
        rec = correct_efficiencies(rec)
        if sum(rec.counts) <= 0:
            raise ValueError(f"record for basis {rec.basis} has no counts")
        proj.extend(BASES[rec.basis].projectors)
        weights.extend(rec.counts)
    if not proj:
        raise ValueError("no records given")
    return np.array(proj), np.array(weights, dtype=float)


def mle_reconstruct(
    records: Sequence[CountRecord],
    max_iters: int = DEFAULT_MAX_ITERS,
    tol: float = DEFAULT_TOL,
) -> ReconstructionResult:
    """Maximum-likelihood state from count records by RrhoR iteration.

    Starts at the maximally mixed state.  Records are efficiency-corrected
    first.  The log-likelihood is reported per unit count
    (``sum_k n_k log p_k / sum_k n_k``) and ``tol`` applies to its gain per
    iteration.
    """
    proj, w = _design(records)
    rho, ll, iters, conv, worst, trace = _kernels.rrr_batch(
        proj, w[None, :], max_iters, tol, trace_len=max_iters + 1
    )
    n = int(iters[0])
    return ReconstructionResult(
        rho_rec=density_matrix(rho[0], trace_tol=1e-10),
        log_likelihood=float(ll[0]),
        iterations=n,
        converged=bool(conv[0]),
        ll_trace=trace[0, : n + 1].copy(),
        worst_gain=float(worst[0]),
    )


def mle_reconstruct_many(
    record_sets: Sequence[Sequence[CountRecord]],
    max_iters: int = DEFAULT_MAX_ITERS,
    tol: float = DEFAULT_TOL,
) -> list[ReconstructionResult]:
    """Batch form of :func:`mle_reconstruct`; all sets must use the same bases in the same order.

    Per-iteration traces are not kept; ``worst_gain`` still records the
    largest likelihood decrease seen.
    """
    if not record_sets:
        return []
    designs = [_design(r) for r in record_sets]
    proj = designs[0][0]
    for p, _ in designs[1:]:
        if p.shape != proj.shape or not np.array_equal(p, proj):
            raise ValueError("all record sets must share one basis layout")
    weights = np.stack([w for _, w in designs])
    rho, ll, iters, conv, worst, _ = _kernels.rrr_batch(proj, weights, max_iters, tol)
    return [
        ReconstructionResult(
            rho_rec=density_matrix(rho[b], trace_tol=1e-10),
            log_likelihood=float(ll[b]),
            iterations=int(iters[b]),
            converged=bool(conv[b]),
            ll_trace=np.empty(0),
            worst_gain=float(worst[b]),
        )
        for b in range(weights.shape[0])
    ]


def analyze(rho_rec, rho_theory, psi_in) -> dict:
    """Fidelity to theory, overlap with the input state, purity and eigenvalues."""
    rho_rec = np.asarray(rho_rec)
    psi_in = np.asarray(psi_in, dtype=np.complex128)
    if rho_rec.shape != np.shape(rho_theory) or rho_rec.shape[0] != psi_in.size:
        raise ValueError("dimension mismatch")
    return {
        "uhlmann_fidelity": uhlmann_fidelity(rho_theory, rho_rec),
        "overlap": float(np.vdot(psi_in, rho_rec @ psi_in).real),
        "purity": purity(rho_rec),
        "eigenvalues": eig_hermitian(rho_rec)[0],
    }
