"""SPDC photon pairs, their spectral flip expectation, and HOM detection.

Units: angular frequency in rad/ps, delays in ps, wavelengths in nm (converted
once, in :func:`wavelength_to_angular`).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from . import _kernels
from .core import NumericalError, clamp_unit
from .environment import EnvState

SPEED_OF_LIGHT = 299_792.458  # nm/ps
GAUSSIAN_SUPPORT_SIGMAS = 4.0
DEFAULT_MARGIN = 1.5
DEFAULT_BINS = 4096
REFERENCE_DELAY = 2.0  # ps
REFERENCE_TOL = 0.02
_IMAG_TOL = 1e-9


def wavelength_to_angular(center_wavelength: float, fwhm: float) -> tuple[float, float]:
    """Map (lambda, delta lambda) in nm to (omega_c, v) in rad/ps, first order in delta lambda."""
    if center_wavelength <= 0 or fwhm <= 0:
        raise ValueError("wavelength and FWHM must be positive")
    omega_c = 2.0 * math.pi * SPEED_OF_LIGHT / center_wavelength
    v = 2.0 * math.pi * SPEED_OF_LIGHT * fwhm / center_wavelength**2
    return omega_c, v


@dataclass(frozen=True)
class FilterShape:
    kind: str
    center_wavelength: float  # nm
    fwhm: float  # nm

    def __post_init__(self):
        if self.kind not in ("rectangular", "gaussian"):
            raise ValueError(f"unknown filter kind {self.kind!r}")
        if not (self.center_wavelength > 0 and self.fwhm > 0):
            raise ValueError("center_wavelength and fwhm must be positive")

    @property
    def omega_c(self) -> float:
        return wavelength_to_angular(self.center_wavelength, self.fwhm)[0]

    @property
    def width(self) -> float:
        """Angular FWHM v of |phi|^2 (rad/ps)."""
        return wavelength_to_angular(self.center_wavelength, self.fwhm)[1]

    @property
    def sigma(self) -> float:
        return self.width / (2.0 * math.sqrt(2.0 * math.log(2.0)))

    @property
    def support_halfwidth(self) -> float:
        if self.kind == "rectangular":
            return 0.5 * self.width
        return GAUSSIAN_SUPPORT_SIGMAS * self.sigma

    @classmethod
    def with_width(cls, kind: str, v: float, center_wavelength: float = 810.0) -> "FilterShape":
        """Filter whose angular width is exactly ``v`` rad/ps."""
        fwhm = v * center_wavelength**2 / (2.0 * math.pi * SPEED_OF_LIGHT)
        return cls(kind, center_wavelength, fwhm)


def filter_amplitude(filt: FilterShape, omega):
    """phi(omega), normalised so that the integral of |phi|^2 is 1."""
    omega = np.asarray(omega, dtype=float)
    x = omega - filt.omega_c
    v = filt.width
    if filt.kind == "rectangular":
        out = np.where(np.abs(x) <= 0.5 * v, 1.0 / math.sqrt(v), 0.0)
    else:
        s = filt.sigma
        out = (2.0 * math.pi * s * s) ** -0.25 * np.exp(-x * x / (4.0 * s * s))
    return out.astype(np.complex128)


@dataclass(frozen=True)
class SpectralGrid:
    """Uniform midpoint grid of ``n_bins`` bins on ``[omega_min, omega_max]``."""

    n_bins: int
    omega_min: float
    omega_max: float

    def __post_init__(self):
        if self.n_bins < 2:
            raise ValueError("n_bins must be at least 2")
        if not self.omega_max > self.omega_min:
            raise ValueError("omega_max must exceed omega_min")

    @property
    def step(self) -> float:
        return (self.omega_max - self.omega_min) / self.n_bins

    @property
    def omegas(self) -> np.ndarray:
        return self.omega_min + (np.arange(self.n_bins) + 0.5) * self.step

    @classmethod
    def for_filter(cls, filt: FilterShape, n_bins: int = DEFAULT_BINS, margin: float = DEFAULT_MARGIN):
        """Grid centred on the filter.

        For a rectangular filter the bin width is chosen so the filter edges
        fall on bin boundaries; the covered range then exceeds ``margin``
        times the support only by the rounding to a whole bin count.
        """
        if margin < 1.0:
            raise ValueError("margin must be at least 1")
        hw = filt.support_halfwidth
        if filt.kind == "rectangular":
            inside = int(math.floor(n_bins / margin))
            if (inside - n_bins) % 2:
                inside -= 1
            if inside < 1:
                raise ValueError("too few bins for the requested margin")
            step = 2.0 * hw / inside
            half = 0.5 * n_bins * step
        else:
            half = margin * hw
        return cls(n_bins, filt.omega_c - half, filt.omega_c + half)

    def covers(self, filt: FilterShape, margin: float = DEFAULT_MARGIN) -> bool:
        need = margin * filt.support_halfwidth * (1.0 - 1e-12)
        return (
            self.omega_min <= filt.omega_c - need
            and self.omega_max >= filt.omega_c + need
        )


@dataclass(frozen=True)
class SpdcState:
    """Frequency-anticorrelated pair: photon a at omega_i, photon b at omega_0 - omega_i.

    ``amplitudes`` are continuum-normalised: ``sum |a_i|^2 * step == 1``.
    The common phase ``exp(-i omega_c dt)`` is dropped.
    """

    filter: FilterShape
    delay: float
    grid: SpectralGrid
    amplitudes: np.ndarray = field(repr=False)

    @property
    def pump_frequency(self) -> float:
        return 2.0 * self.filter.omega_c


def build_spdc(filt: FilterShape, delay: float, grid: SpectralGrid | None = None) -> SpdcState:
    grid = SpectralGrid.for_filter(filt) if grid is None else grid
    if not grid.covers(filt):
        raise ValueError("spectral grid does not cover the filter support with margin 1.5")
    w = grid.omegas
    w0 = 2.0 * filt.omega_c
    amp = filter_amplitude(filt, w) * filter_amplitude(filt, w0 - w)
    amp = amp * np.exp(-1j * (w - filt.omega_c) * delay)
    norm = math.sqrt(float(np.sum(np.abs(amp) ** 2)) * grid.step)
    if norm == 0.0:
        raise ValueError("filtered two-photon amplitude vanishes on the grid")
    amp = amp / norm
    amp.setflags(write=False)
    return SpdcState(filt, float(delay), grid, amp)


def _mirror_ok(state: SpdcState) -> bool:
    g = state.grid
    return abs((g.omega_min + g.omega_max) - state.pump_frequency) <= 1e-9 * state.pump_frequency


def spdc_flip_expectation(state: SpdcState) -> float:
    """D = integral of conj(f(w)) f(w0 - w) dw, by the midpoint rule.

    Needs a grid symmetric about w0/2 so that w0 - w lands on a bin centre.
    """
    if not _mirror_ok(state):
        raise ValueError("grid must be symmetric about the degenerate frequency")
    val = _kernels.mirror_overlap(state.amplitudes) * state.grid.step
    if abs(val.imag) > _IMAG_TOL:
        raise NumericalError(f"spectral flip expectation has imaginary part {val.imag:.3e}")
    return clamp_unit(float(val.real))


def sinc_closed_form(delay: float, v: float) -> float:
    """sin(x)/x at x = v * delay (unnormalised convention)."""
    x = v * delay
    if x == 0.0:
        return 1.0
    return math.sin(x) / x


def _mirror_partition(n: int, parts: int) -> np.ndarray:
    """Boundaries of ``parts`` contiguous groups of ``n`` items, symmetric under reversal."""
    if parts % 2 == 0 and n % 2:
        raise ValueError("an odd number of occupied bins needs an odd truncation_dim")
    bounds = np.empty(parts + 1, dtype=np.int64)
    for k in range(parts // 2 + 1):
        b = int(math.floor(k * n / parts + 0.5))
        bounds[k] = b
        bounds[parts - k] = n - b
    return bounds


def spdc_to_env(state: SpdcState, truncation_dim: int) -> EnvState:
    """Project the pair onto ``d`` box-shaped frequency modes shared by both photons.

    The occupied bins are split into ``d`` contiguous groups, symmetric about
    the degenerate frequency, so mode ``p`` of photon a pairs with mode
    ``d-1-p`` of photon b and the flip operator on the truncated space is the
    physical frequency exchange.  The result is a pure state.
    """
    d = int(truncation_dim)
    if d < 2:
        raise ValueError("truncation_dim must be at least 2")
    if not _mirror_ok(state):
        raise ValueError("grid must be symmetric about the degenerate frequency")
    amp = np.asarray(state.amplitudes) * math.sqrt(state.grid.step)
    occupied = np.flatnonzero(np.abs(amp) > 0)
    lo, hi = occupied[0], occupied[-1] + 1
    n_occ = hi - lo
    if d > n_occ:
        raise ValueError(f"truncation_dim {d} exceeds the kernel rank {n_occ}")
    seg = amp[lo:hi]
    bounds = _mirror_partition(n_occ, d)
    coeffs = np.empty(d, dtype=np.complex128)
    for p in range(d):
        a, b = bounds[p], bounds[p + 1]
        coeffs[p] = seg[a:b].sum() / math.sqrt(b - a)
    psi = np.zeros((d, d), dtype=np.complex128)
    psi[np.arange(d), d - 1 - np.arange(d)] = coeffs
    psi /= np.linalg.norm(psi)
    return EnvState.from_vector(psi.ravel(), d)


def coincidence_probability(env: EnvState) -> float:
    """Probability of one photon in each beam-splitter output.

    Explicit first-quantised simulation: photon S enters port a, photon T
    enters port b, each with its internal state; the balanced splitter acts
    as ``a^dag -> (i c^dag + d^dag)/sqrt(2)``, ``b^dag -> (c^dag + i d^dag)/sqrt(2)``
    on every internal mode.  Post-selects one photon in c and one in d.
    """
    if env.dS != env.dT:
        raise ValueError("both photons need the same internal dimension")
    d = env.dS
    n = 2 * d  # single-photon space: (port, internal)
    # symmetrised embedding |i>_a |k>_b -> (|a,i>|b,k> + |b,k>|a,i>)/sqrt(2)
    emb = np.zeros((n * n, d * d), dtype=np.complex128)
    for i in range(d):
        for k in range(d):
            col = i * d + k
            emb[i * n + (d + k), col] += 1.0 / math.sqrt(2.0)
            emb[(d + k) * n + i, col] += 1.0 / math.sqrt(2.0)
    bs = np.array([[1j, 1.0], [1.0, 1j]]) / math.sqrt(2.0)  # rows c, d; cols a, b
    u1 = np.kron(bs, np.eye(d))
    u2 = np.kron(u1, u1)
    out = u2 @ emb
    rho_out = out @ env.rho @ out.conj().T
    pc = np.kron(np.diag([1.0, 0.0]), np.eye(d))
    pd = np.kron(np.diag([0.0, 1.0]), np.eye(d))
    proj = np.kron(pc, pd) + np.kron(pd, pc)
    p = float(np.real(np.sum(proj * rho_out.T)))
    return min(1.0, max(0.0, p))


@dataclass(frozen=True)
class HomPoint:
    delay: float
    D: float
    P_C: float
    R_rel: float


def hom_scan(
    filt: FilterShape,
    delays: Sequence[float],
    reference_delay: float = REFERENCE_DELAY,
    *,
    mode_overlap: float = 1.0,
    grid: SpectralGrid | None = None,
    reference_tol: float = REFERENCE_TOL,
) -> list[HomPoint]:
    """Coincidence rate versus delay, normalised to the distinguishable-photon level.

    ``R_rel = 1 - m*D``; the reference delay is only checked to sit far
    enough from the dip that this normalisation matches a measured
    ``R(dt)/R(reference)`` to within ``reference_tol``.
    """
    if not 0.0 <= mode_overlap <= 1.0:
        raise ValueError(f"mode_overlap must lie in [0, 1], got {mode_overlap}")
    grid = SpectralGrid.for_filter(filt) if grid is None else grid
    d_ref = spdc_flip_expectation(build_spdc(filt, reference_delay, grid))
    if abs(mode_overlap * d_ref) >= reference_tol:
        raise ValueError(
            f"reference delay {reference_delay} ps is too close to the dip: "
            f"|D| = {abs(mode_overlap * d_ref):.3g} >= {reference_tol}"
        )
    points = []
    for dt in delays:
        D = mode_overlap * spdc_flip_expectation(build_spdc(filt, dt, grid))
        points.append(HomPoint(float(dt), D, 0.5 * (1.0 - D), 1.0 - D))
    return points
