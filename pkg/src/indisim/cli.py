"""Command-line front end: ``indisim {hom,transfer,erase,tomo,fig2}``.

Every run writes CSV (to ``--out`` or stdout) and, when writing files, a
``<out>.manifest.json`` next to each one.  Exit codes: 0 success, 2 bad
configuration, 3 numerical failure.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import math
import sys
from datetime import datetime, timezone
from pathlib import Path

import numpy as np

from . import __version__
from .core import NumericalError
from .pipeline import (
    DEFAULT_THETAS,
    RunConfig,
    derived_quantities,
    parse_env_spec,
    run_erase,
    run_fig2,
    run_hom,
    run_tomo,
    run_transfer,
)
from .tomography import CountRecord

EXIT_OK, EXIT_CONFIG, EXIT_NUMERIC = 0, 2, 3

COMMANDS = ("hom", "transfer", "erase", "tomo", "fig2")
DEFAULT_DELAYS = {"hom": "0:2:16"}
SWEEP_DELAYS = "0:0.8:16"
INSET_DELAYS = "-1.5:1.5:61"

COLUMNS = {
    "hom": ["delay_ps", "D", "P_C", "R_rel"],
    "transfer": [
        "row_type", "delay_ps", "D", "theta_deg", "overlap",
        "max_eigenvalue", "purity", "fidelity_vs_theory",
    ],
    "tomo": [
        "row_type", "delay_ps", "D", "theta_deg", "repeat", "fidelity", "fidelity_std",
        "overlap", "max_eigenvalue", "purity", "iterations", "converged",
    ],
    "fig2": [
        "delay_ps", "D", "overlap_mean", "overlap_std", "maxeig_mean",
        "maxeig_std", "overlap_theory", "maxeig_theory",
    ],
    "fig2_inset": ["delay_ps", "R_rel"],
}
COLUMNS["erase"] = COLUMNS["transfer"]


class ConfigError(ValueError):
    pass


# ---------------------------------------------------------------------------
# formatting
# ---------------------------------------------------------------------------

def format_value(x) -> str:
    """Shortest round-trip text of ``x`` after rounding to 12 significant digits."""
    if x is None:
        return ""
    if isinstance(x, (bool, np.bool_)):
        return str(int(x))
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    if isinstance(x, (float, np.floating)):
        v = float(f"{float(x):.12g}")
        if v == 0.0:
            v = 0.0  # drop the sign of -0.0
        return repr(v)
    return str(x)


def to_csv(rows: list[dict], columns: list[str]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(columns)
    for r in rows:
        w.writerow([format_value(r.get(c)) for c in columns])
    return buf.getvalue()


RECORD_COLUMNS = ["basis_label", "outcome_index", "counts", "efficiency"]


def records_to_csv(records) -> str:
    rows = [
        {"basis_label": r.basis, "outcome_index": k, "counts": float(r.counts[k]), "efficiency": float(r.efficiencies[k])}
        for r in records
        for k in (0, 1)
    ]
    return to_csv(rows, RECORD_COLUMNS)


def records_from_csv(text: str) -> list[CountRecord]:
    rows = list(csv.DictReader(io.StringIO(text)))
    by_basis: dict[str, dict] = {}
    for r in rows:
        slot = by_basis.setdefault(r["basis_label"], {})
        slot[int(r["outcome_index"])] = (float(r["counts"]), float(r["efficiency"]))
    out = []
    for label, slot in by_basis.items():
        if set(slot) != {0, 1}:
            raise ValueError(f"basis {label}: need outcomes 0 and 1")
        out.append(CountRecord(label, (slot[0][0], slot[1][0]), (slot[0][1], slot[1][1])))
    return out


# ---------------------------------------------------------------------------
# parsing
# ---------------------------------------------------------------------------

def parse_delays(spec: str, field: str = "delays") -> tuple[float, ...]:
    """``start:stop:num`` (inclusive linspace) or a comma-separated list, in ps."""
    try:
        if ":" in spec:
            a, b, n = spec.split(":")
            n = int(n)
            if n < 1:
                raise ValueError
            vals = np.linspace(float(a), float(b), n)
        else:
            vals = [float(x) for x in spec.split(",") if x.strip()]
    except ValueError:
        raise ConfigError(f"{field}: cannot parse {spec!r}") from None
    if len(vals) == 0:
        raise ConfigError(f"{field}: empty delay list")
    if not all(math.isfinite(v) for v in vals):
        raise ConfigError(f"{field}: non-finite delay")
    return tuple(float(v) for v in vals)


def _float_list(spec: str, field: str) -> tuple[float, ...]:
    try:
        vals = tuple(float(x) for x in spec.split(",") if x.strip())
    except ValueError:
        raise ConfigError(f"{field}: cannot parse {spec!r}") from None
    if not vals:
        raise ConfigError(f"{field}: empty list")
    return vals


def _add_options(p: argparse.ArgumentParser) -> None:
    p.add_argument("--seed", type=int, help="master RNG seed (default 0)")
    p.add_argument("--out", help="output CSV path (stdout when omitted, except fig2)")
    p.add_argument("--config", help="key=value file; flags override it")
    p.add_argument("--center-nm", type=float, help="filter centre wavelength [nm] (810)")
    p.add_argument("--fwhm-nm", type=float, help="filter FWHM [nm] (2.7)")
    p.add_argument("--filter", help="rectangular | gaussian")
    p.add_argument("--delays", help="start:stop:num or comma list [ps]")
    p.add_argument("--inset-delays", help="fig2 dip inset delays [ps]")
    p.add_argument("--reference-delay", type=float, help="far-from-dip delay [ps] (2.0)")
    p.add_argument("--reference-tol", type=float, help="max |D| at the reference delay")
    p.add_argument("--thetas", help="comma list of source phases [deg]")
    p.add_argument("--env", help="spdc | spdc:<d> | singlet | symmetric-bell | product:<c> | file:<path>")
    p.add_argument("--counts", type=float, help="mean detections per basis (0 = exact states)")
    p.add_argument("--repeats", type=int, help="Monte-Carlo repetitions per cell")
    p.add_argument("--mode-overlap", type=float, help="visibility factor m in [0, 1]")
    p.add_argument("--compensate-sign", action="store_const", const="true", help="undo D < 0 by feed-forward")
    p.add_argument("--efficiencies", help="detector efficiencies 'eta0,eta1'")
    p.add_argument("--bins", type=int, help="spectral grid bins (4096)")
    p.add_argument("--max-iters", type=int, help="RrhoR iteration cap")
    p.add_argument("--tol", type=float, help="RrhoR log-likelihood gain threshold")
    p.add_argument("--strict", action="store_const", const="true", help="fail (exit 3) on non-convergence")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="indisim", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        _add_options(sub.add_parser(name))
    return parser


_KEYS = {
    "seed", "out", "center_nm", "fwhm_nm", "filter", "delays", "inset_delays",
    "reference_delay", "reference_tol", "thetas", "env", "counts", "repeats",
    "mode_overlap", "compensate_sign", "efficiencies", "bins", "max_iters", "tol", "strict",
}


def read_config_file(path) -> dict[str, str]:
    """Load ``key=value`` lines, or the config echoed inside a run manifest (``*.json``)."""
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ConfigError(f"config: cannot read {path}: {exc.strerror}") from None
    if str(path).endswith(".json"):
        try:
            text = json.loads(text)["config_text"]
        except (ValueError, KeyError, TypeError):
            raise ConfigError(f"config: {path} is not a run manifest") from None
    out = {}
    for n, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"config line {n}: expected key=value")
        key, val = (s.strip() for s in line.split("=", 1))
        key = key.replace("-", "_")
        if key not in _KEYS:
            raise ConfigError(f"config line {n}: unknown key {key!r}")
        out[key] = val
    return out


def _bool(val, field: str) -> bool:
    if isinstance(val, bool):
        return val
    s = str(val).strip().lower()
    if s in ("1", "true", "yes", "on"):
        return True
    if s in ("0", "false", "no", "off"):
        return False
    raise ConfigError(f"{field}: expected a boolean, got {val!r}")


def _num(raw: dict, key: str, kind, default):
    if key not in raw or raw[key] is None:
        return default
    try:
        return kind(raw[key]) if kind is not int else int(float(raw[key]))
    except (TypeError, ValueError):
        raise ConfigError(f"{key}: cannot parse {raw[key]!r}") from None


def make_config(command: str, raw: dict) -> RunConfig:
    """Validate merged settings into a :class:`RunConfig`; raises ``ConfigError`` naming the field."""
    delays_default = DEFAULT_DELAYS.get(command, SWEEP_DELAYS)
    cfg = RunConfig(
        command=command,
        center_nm=_num(raw, "center_nm", float, 810.0),
        fwhm_nm=_num(raw, "fwhm_nm", float, 2.7),
        filter=raw.get("filter") or "rectangular",
        delays=parse_delays(raw.get("delays", delays_default), "delays"),
        inset_delays=parse_delays(raw.get("inset_delays", INSET_DELAYS), "inset_delays"),
        reference_delay=_num(raw, "reference_delay", float, 2.0),
        reference_tol=_num(raw, "reference_tol", float, 0.02),
        thetas=_float_list(raw["thetas"], "thetas") if "thetas" in raw else DEFAULT_THETAS,
        env=raw.get("env") or "spdc",
        counts=_num(raw, "counts", float, 1e6),
        repeats=_num(raw, "repeats", int, 1),
        seed=_num(raw, "seed", int, 0),
        mode_overlap=_num(raw, "mode_overlap", float, 1.0),
        compensate_sign=_bool(raw.get("compensate_sign") or False, "compensate_sign"),
        efficiencies=(1.0, 1.0),
        bins=_num(raw, "bins", int, 4096),
        max_iters=_num(raw, "max_iters", int, 10_000),
        tol=_num(raw, "tol", float, 1e-10),
        strict=_bool(raw.get("strict") or False, "strict"),
        out=raw.get("out"),
    )
    if "efficiencies" in raw:
        eff = _float_list(raw["efficiencies"], "efficiencies")
        if len(eff) != 2:
            raise ConfigError("efficiencies: expected two values")
        cfg.efficiencies = (eff[0], eff[1])

    checks = [
        ("center_nm", cfg.center_nm > 0, "must be positive"),
        ("fwhm_nm", cfg.fwhm_nm > 0, "must be positive"),
        ("filter", cfg.filter in ("rectangular", "gaussian"), "must be rectangular or gaussian"),
        ("reference_delay", math.isfinite(cfg.reference_delay), "must be finite"),
        ("reference_tol", cfg.reference_tol > 0, "must be positive"),
        ("counts", cfg.counts >= 0 and math.isfinite(cfg.counts), "must be non-negative"),
        ("repeats", cfg.repeats >= 1, "must be at least 1"),
        ("mode_overlap", 0.0 <= cfg.mode_overlap <= 1.0, "must lie in [0, 1]"),
        ("efficiencies", all(0 < e <= 1 for e in cfg.efficiencies), "must lie in (0, 1]"),
        ("bins", cfg.bins >= 16, "must be at least 16"),
        ("max_iters", cfg.max_iters >= 1, "must be at least 1"),
        ("tol", cfg.tol >= 0, "must be non-negative"),
        ("seed", cfg.seed >= 0, "must be non-negative"),
    ]
    for name, ok, msg in checks:
        if not ok:
            raise ConfigError(f"{name}: {msg}")
    if command == "tomo" and cfg.counts <= 0:
        raise ConfigError("counts: tomo needs a positive count level")
    try:
        parse_env_spec(cfg.env)
    except ValueError as exc:
        raise ConfigError(f"env: {exc}") from None
    if command == "fig2" and not cfg.out:
        raise ConfigError("out: fig2 writes two files and needs --out")
    return cfg


# ---------------------------------------------------------------------------
# output
# ---------------------------------------------------------------------------

def config_as_text(cfg: RunConfig) -> str:
    """Render a config as ``key=value`` lines that reproduce the run."""
    lines = []
    for key, val in cfg.to_dict().items():
        if key in ("command", "out") or val is None:
            continue
        if isinstance(val, (tuple, list)):
            val = ",".join(repr(float(v)) for v in val)
        elif isinstance(val, bool):
            val = "true" if val else "false"
        elif isinstance(val, float):
            val = repr(val)
        lines.append(f"{key}={val}")
    return "\n".join(lines) + "\n"


def build_manifest(cfg: RunConfig, outputs: list[str]) -> dict:
    return {
        "command": cfg.command,
        "config": cfg.to_dict(),
        "config_text": config_as_text(cfg),
        "version": __version__,
        "seed": cfg.seed,
        "timestamp": datetime.now(timezone.utc).isoformat(timespec="seconds"),
        "derived": derived_quantities(cfg),
        "outputs": outputs,
        "argv": sys.argv[1:],
    }


def _write(path: Path, text: str, cfg: RunConfig, outputs: list[str]) -> None:
    path.write_text(text, newline="")
    man = build_manifest(cfg, outputs)
    man["rerun"] = f"indisim {cfg.command} --config {path}.manifest.json --out <path>"
    Path(f"{path}.manifest.json").write_text(json.dumps(man, indent=2) + "\n")


def execute(cfg: RunConfig, stdout=None) -> list[str]:
    """Run one command and write its outputs.  Returns the written file paths."""
    stdout = sys.stdout if stdout is None else stdout
    if cfg.command == "fig2":
        main, inset = run_fig2(cfg)
        out = Path(cfg.out)
        inset_path = out.with_name(out.stem + "_inset" + (out.suffix or ".csv"))
        paths = [str(out), str(inset_path)]
        _write(out, to_csv(main, COLUMNS["fig2"]), cfg, paths)
        _write(inset_path, to_csv(inset, COLUMNS["fig2_inset"]), cfg, paths)
        return paths
    runner = {"hom": run_hom, "transfer": run_transfer, "erase": run_erase, "tomo": run_tomo}[cfg.command]
    text = to_csv(runner(cfg), COLUMNS[cfg.command])
    if cfg.out:
        _write(Path(cfg.out), text, cfg, [cfg.out])
        return [cfg.out]
    stdout.write(text)
    return []


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        raw = read_config_file(args.config) if args.config else {}
        for key, val in vars(args).items():
            if key in _KEYS and val is not None:
                raw[key] = val
        cfg = make_config(args.command, raw)
        execute(cfg)
    except ConfigError as exc:
        print(f"indisim: config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except NumericalError as exc:
        print(f"indisim: numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except ValueError as exc:
        # contract violations surfacing from the library are configuration problems
        print(f"indisim: config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    return EXIT_OK


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
