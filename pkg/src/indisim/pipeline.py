"""Sweeps behind the command-line front end.

Each ``run_*`` function takes a :class:`RunConfig` and returns rows as
dicts in output order.  Nothing here touches files.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, replace
from pathlib import Path

import numpy as np

from .core import NumericalError, eig_hermitian, purity, uhlmann_fidelity
from .environment import (
    EnvState,
    flip_expectation,
    product_with_overlap,
    singlet,
    symmetric_bell,
    with_mode_overlap,
)
from .protocol import (
    erase,
    make_source,
    make_target,
    measure_and_feedforward,
    partial_exchange,
    transfer_analytic,
)
from .spectral import (
    REFERENCE_DELAY,
    REFERENCE_TOL,
    FilterShape,
    SpectralGrid,
    build_spdc,
    hom_scan,
    spdc_flip_expectation,
    spdc_to_env,
)
from .tomography import (
    DEFAULT_MAX_ITERS,
    DEFAULT_TOL,
    mle_reconstruct_many,
    simulate_counts,
)

DEFAULT_THETAS = (0.0, 30.0, 60.0, 90.0, 120.0, 150.0, 180.0)


@dataclass
class RunConfig:
    command: str
    center_nm: float = 810.0
    fwhm_nm: float = 2.7
    filter: str = "rectangular"
    delays: tuple[float, ...] = ()
    inset_delays: tuple[float, ...] = ()
    reference_delay: float = REFERENCE_DELAY
    reference_tol: float = REFERENCE_TOL
    thetas: tuple[float, ...] = DEFAULT_THETAS  # degrees
    env: str = "spdc"
    counts: float = 1e6
    repeats: int = 1
    seed: int = 0
    mode_overlap: float = 1.0
    compensate_sign: bool = False
    efficiencies: tuple[float, float] = (1.0, 1.0)
    bins: int = 4096
    max_iters: int = DEFAULT_MAX_ITERS
    tol: float = DEFAULT_TOL
    strict: bool = False
    out: str | None = None

    def filter_shape(self) -> FilterShape:
        return FilterShape(self.filter, self.center_nm, self.fwhm_nm)

    def to_dict(self) -> dict:
        return asdict(self)


# ---------------------------------------------------------------------------
# environment resolution
# ---------------------------------------------------------------------------

def read_env_file(path) -> EnvState:
    """Text matrix: first line ``d=<int>``, then d^2 rows of comma-separated ``re,im`` pairs."""
    lines = [ln.strip() for ln in Path(path).read_text().splitlines() if ln.strip()]
    if not lines or not lines[0].startswith("d="):
        raise ValueError(f"{path}: first line must be 'd=<int>'")
    d = int(lines[0][2:])
    n = d * d
    rows = lines[1:]
    if len(rows) != n:
        raise ValueError(f"{path}: expected {n} matrix rows, found {len(rows)}")
    m = np.empty((n, n), dtype=np.complex128)
    for r, ln in enumerate(rows):
        vals = [float(x) for x in ln.split(",")]
        if len(vals) != 2 * n:
            raise ValueError(f"{path}: row {r + 1} has {len(vals)} numbers, expected {2 * n}")
        m[r] = np.array(vals[0::2]) + 1j * np.array(vals[1::2])
    return EnvState(m, d, d)


def write_env_file(env: EnvState, path) -> None:
    if env.dS != env.dT:
        raise ValueError("only square environments can be written")
    lines = [f"d={env.dS}"]
    for row in env.rho:
        lines.append(",".join(f"{float(z.real)!r},{float(z.imag)!r}" for z in row))
    Path(path).write_text("\n".join(lines) + "\n")


def parse_env_spec(spec: str) -> tuple[str, object]:
    """Split an env spec into (kind, argument); validates the argument."""
    head, _, arg = spec.partition(":")
    if head == "spdc":
        if not arg:
            return "spdc", None
        d = int(arg)
        if d < 2:
            raise ValueError("spdc truncation dimension must be at least 2")
        return "spdc", d
    if head in ("singlet", "symmetric-bell") and not arg:
        return head, None
    if head == "product":
        c = float(arg)
        if not -1.0 <= c <= 1.0:
            raise ValueError("product overlap c must lie in [-1, 1]")
        return head, c
    if head == "file" and arg:
        return head, arg
    raise ValueError(f"unrecognised env spec {spec!r}")


def _named_env(kind: str, arg) -> EnvState:
    if kind == "singlet":
        return singlet()
    if kind == "symmetric-bell":
        return symmetric_bell()
    if kind == "product":
        return product_with_overlap(arg)
    return read_env_file(arg)


@dataclass
class _Cell:
    """One (delay, environment) point of a sweep."""

    delay: float | None
    D: float
    env: EnvState | None  # None -> analytic route


def _cells(cfg: RunConfig) -> list[_Cell]:
    kind, arg = parse_env_spec(cfg.env)
    if kind == "spdc":
        filt = cfg.filter_shape()
        grid = SpectralGrid.for_filter(filt, cfg.bins)
        out = []
        for dt in cfg.delays:
            state = build_spdc(filt, dt, grid)
            if arg is None:
                out.append(_Cell(dt, cfg.mode_overlap * spdc_flip_expectation(state), None))
            else:
                env = with_mode_overlap(spdc_to_env(state, arg), cfg.mode_overlap)
                out.append(_Cell(dt, flip_expectation(env), env))
        return out
    env = with_mode_overlap(_named_env(kind, arg), cfg.mode_overlap)
    return [_Cell(None, flip_expectation(env), env)]


def _transfer(cell: _Cell, theta_rad: float, cfg: RunConfig, direction: str) -> np.ndarray:
    if cell.env is None:
        return transfer_analytic(theta_rad, cell.D, cfg.compensate_sign).rho_corrected
    comp = partial_exchange(make_source(theta_rad), make_target(), cell.env)
    if direction == "erase":
        return erase(comp, cfg.compensate_sign).rho_corrected
    return measure_and_feedforward(comp, cfg.compensate_sign).rho_corrected


def _theory(cell: _Cell, theta_rad: float, cfg: RunConfig) -> np.ndarray:
    return transfer_analytic(theta_rad, cell.D, cfg.compensate_sign).rho_corrected


def _metrics(rho: np.ndarray, theta_rad: float) -> tuple[float, float, float]:
    psi = make_source(theta_rad)
    ov = float(np.vdot(psi, rho @ psi).real)
    return ov, float(eig_hermitian(rho)[0][0]), purity(rho)


# ---------------------------------------------------------------------------
# commands
# ---------------------------------------------------------------------------

def run_hom(cfg: RunConfig) -> list[dict]:
    filt = cfg.filter_shape()
    grid = SpectralGrid.for_filter(filt, cfg.bins)
    pts = hom_scan(
        filt,
        sorted(cfg.delays),
        cfg.reference_delay,
        mode_overlap=cfg.mode_overlap,
        grid=grid,
        reference_tol=cfg.reference_tol,
    )
    return [{"delay_ps": p.delay, "D": p.D, "P_C": p.P_C, "R_rel": p.R_rel} for p in pts]


def run_transfer(cfg: RunConfig, direction: str = "transfer") -> list[dict]:
    """Per-phase rows followed, for each delay, by a row averaging the phases."""
    rows = []
    for cell in _cells(cfg):
        group = []
        for th in cfg.thetas:
            t = math.radians(th)
            rho = _transfer(cell, t, cfg, direction)
            ov, me, pu = _metrics(rho, t)
            group.append(
                {
                    "row_type": "phase",
                    "delay_ps": cell.delay,
                    "D": cell.D,
                    "theta_deg": th,
                    "overlap": ov,
                    "max_eigenvalue": me,
                    "purity": pu,
                    "fidelity_vs_theory": uhlmann_fidelity(_theory(cell, t, cfg), rho),
                }
            )
        rows.extend(group)
        mean = {"row_type": "mean", "delay_ps": cell.delay, "D": cell.D, "theta_deg": None}
        for key in ("overlap", "max_eigenvalue", "purity", "fidelity_vs_theory"):
            mean[key] = float(np.mean([g[key] for g in group]))
        rows.append(mean)
    return rows


def run_erase(cfg: RunConfig) -> list[dict]:
    return run_transfer(cfg, direction="erase")


def _cell_seed(seed: int, index: int) -> np.random.SeedSequence:
    return np.random.SeedSequence([seed, index])


def _tomography_runs(cfg: RunConfig, cells: list[_Cell]):
    """Simulate and reconstruct every (cell, theta, repeat); yields metadata and results."""
    meta, record_sets, theory = [], [], []
    idx = 0
    for cell in cells:
        for th in cfg.thetas:
            t = math.radians(th)
            rho = _transfer(cell, t, cfg, "transfer")
            for rep in range(cfg.repeats):
                recs = simulate_counts(
                    rho, cfg.counts, _cell_seed(cfg.seed, idx), efficiencies=cfg.efficiencies
                )
                meta.append((cell, th, rep))
                record_sets.append(recs)
                theory.append(_theory(cell, t, cfg))
                idx += 1
    results = mle_reconstruct_many(record_sets, cfg.max_iters, cfg.tol)
    if cfg.strict:
        bad = sum(not r.converged for r in results)
        if bad:
            raise NumericalError(f"{bad} reconstructions did not converge in {cfg.max_iters} iterations")
    return meta, results, theory


def run_tomo(cfg: RunConfig) -> list[dict]:
    meta, results, theory = _tomography_runs(cfg, _cells(cfg))
    rows, fids = [], []
    for (cell, th, rep), res, rho_th in zip(meta, results, theory):
        t = math.radians(th)
        fid = uhlmann_fidelity(rho_th, res.rho_rec)
        ov, me, pu = _metrics(res.rho_rec, t)
        fids.append(fid)
        rows.append(
            {
                "row_type": "cell",
                "delay_ps": cell.delay,
                "D": cell.D,
                "theta_deg": th,
                "repeat": rep,
                "fidelity": fid,
                "fidelity_std": None,
                "overlap": ov,
                "max_eigenvalue": me,
                "purity": pu,
                "iterations": res.iterations,
                "converged": int(res.converged),
            }
        )
    rows.append(
        {
            "row_type": "grand",
            "fidelity": float(np.mean(fids)),
            "fidelity_std": float(np.std(fids, ddof=1)) if len(fids) > 1 else 0.0,
        }
    )
    return rows


def run_fig2(cfg: RunConfig) -> tuple[list[dict], list[dict]]:
    """Main panel (overlap and largest eigenvalue against D) and the dip inset.

    With ``counts > 0`` every (delay, phase, repeat) is simulated and
    reconstructed; means and standard deviations are over that ensemble.
    With ``counts == 0`` the transferred states are used directly.
    """
    cells = _cells(cfg)
    main = []
    if cfg.counts > 0:
        meta, results, _ = _tomography_runs(cfg, cells)
        per_cell: dict[int, list] = {}
        for (cell, th, _), res in zip(meta, results):
            ov, me, _ = _metrics(res.rho_rec, math.radians(th))
            per_cell.setdefault(id(cell), []).append((ov, me))
    else:
        per_cell = {}
        for cell in cells:
            per_cell[id(cell)] = [
                _metrics(_transfer(cell, math.radians(th), cfg, "transfer"), math.radians(th))[:2]
                for th in cfg.thetas
            ]
    for cell in cells:
        vals = np.array(per_cell[id(cell)])
        d_used = abs(cell.D) if cfg.compensate_sign else cell.D
        main.append(
            {
                "delay_ps": cell.delay,
                "D": cell.D,
                "overlap_mean": float(vals[:, 0].mean()),
                "overlap_std": float(vals[:, 0].std(ddof=1)) if len(vals) > 1 else 0.0,
                "maxeig_mean": float(vals[:, 1].mean()),
                "maxeig_std": float(vals[:, 1].std(ddof=1)) if len(vals) > 1 else 0.0,
                "overlap_theory": 0.5 * (1.0 + d_used),
                "maxeig_theory": 0.5 * (1.0 + abs(cell.D)),
            }
        )
    inset = [
        {"delay_ps": r["delay_ps"], "R_rel": r["R_rel"]}
        for r in run_hom(replace(cfg, delays=tuple(cfg.inset_delays)))
    ]
    return main, inset


def derived_quantities(cfg: RunConfig) -> dict:
    filt = cfg.filter_shape()
    return {"omega_c_rad_per_ps": filt.omega_c, "v_rad_per_ps": filt.width}
