"""Command-line entry point: figure data as CSV and the simulated tomography pipeline.

Exit codes: 0 success, 2 configuration error, 3 non-convergence.
"""

from __future__ import annotations

import argparse
import csv
import json
import math
import sys
import warnings
from importlib import resources
from pathlib import Path

import numpy as np

from . import __version__, _kernels
from .detectors import ApdParams, HomodyneParams, povm_from_config
from .errors import NoConvergence, QRetroError, TruncationWarning
from .fock import FockSpace, fidelity
from .metrics import fidelity_off, fidelity_on_profile, metric_report
from .retrodiction import ProbeEnsemble, premeasurement_state
from .tomography import (
    maxlik_povm,
    min_dimension,
    qdt_retrodict,
    qst_premeasurement,
    simulate_counts,
)
from .wigner import (
    HdRetroParams,
    WignerGrid,
    gaussian_fit,
    hd_retro_grid,
    hd_retro_wigner,
    negativity_on,
    negativity_threshold,
    squeezing_db,
    squeezing_parameter,
    wigner_hd,
    write_grid_csv,
)

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_NO_CONVERGENCE = 3
DEFAULT_SEED = 0xC0FFEE


class ConfigError(ValueError):
    pass


def _require(cond: bool, message: str) -> None:
    if not cond:
        raise ConfigError(message)


def _write_rows(path: Path, header, rows) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(header)
        for row in rows:
            writer.writerow([v if isinstance(v, (int, str)) else f"{v:.17g}" for v in row])


def _dump_json(path: Path, payload) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n")


def cmd_negativity_map(eta_steps: int, nu_max: float, nu_steps: int, out_csv) -> int:
    """W_on(0, 0) over an (eta, nu) grid with the zero-crossing dark-count level per row."""
    _require(eta_steps >= 2 and nu_steps >= 2, "eta_steps and nu_steps must be >= 2")
    _require(math.isfinite(nu_max) and nu_max > 0, "nu_max must be positive")
    rows = []
    for eta in np.linspace(0.0, 1.0, eta_steps):
        contour = negativity_threshold(eta)
        for nu in np.linspace(0.0, nu_max, nu_steps):
            rows.append((float(eta), float(nu), negativity_on(ApdParams(float(eta), float(nu))), contour))
    _write_rows(Path(out_csv), ["eta", "nu", "negativity", "nu_threshold"], rows)
    return EXIT_OK


def cmd_fidelity_curves(n_max: int, eta_steps: int, nu_list, out_csv) -> int:
    """F_off(n, eta) and Pr(on | n) for each dark-count level in ``nu_list``."""
    _require(n_max >= 1, "n_max must be >= 1")
    _require(eta_steps >= 2, "eta_steps must be >= 2")
    nu_list = [float(v) for v in nu_list]
    _require(len(nu_list) > 0 and all(v >= 0 and math.isfinite(v) for v in nu_list), "nu values must be >= 0")
    header = ["eta", "n", "f_off"] + [f"pr_on_nu_{v:g}" for v in nu_list]
    rows = []
    for eta in np.linspace(0.0, 1.0, eta_steps):
        eta = float(eta)
        for n in range(n_max + 1):
            on = [fidelity_on_profile(n, ApdParams(eta, nu)) for nu in nu_list]
            rows.append((eta, n, fidelity_off(n, eta), *on))
    _write_rows(Path(out_csv), header, rows)
    return EXIT_OK


def cmd_hd_wigner(
    x_I: float = 1.0,
    eta: float = 0.75,
    phi: float = 0.0,
    grid: WignerGrid | None = None,
    retro: bool = False,
    e_n: float = 1e3,
    out_csv="hd_wigner.csv",
) -> int:
    """Homodyne element ridge, or the retrodicted squeezed state when ``retro`` is set.

    Without an explicit grid the retrodicted state gets a grid spanning six
    standard deviations per axis, since its anti-squeezed width grows with ``e_n``.
    """
    _require(0.0 < eta < 1.0, f"homodyne eta must lie in (0, 1), got {eta}")
    hd = HomodyneParams(eta, phi, x_I)
    meta = {"detector": {"type": "hd", "eta": eta, "phi": phi, "x_I": x_I}, "retro": retro}
    if retro:
        params = HdRetroParams(hd, e_n)
        grid = grid or hd_retro_grid(params)
        result = hd_retro_wigner(params, grid)
        # the squeezed axis is the smallest-variance direction of the fit, whatever phi
        _, cov = gaussian_fit(result)
        meta.update(
            excess_noise=e_n,
            squeezing_s=squeezing_parameter(eta),
            squeezing_db_analytic=10.0 * math.log10(squeezing_parameter(eta)),
            squeezing_db_fit=squeezing_db(float(np.linalg.eigvalsh(cov)[0])),
            integral=result.integral(),
        )
    else:
        result = wigner_hd(hd, grid or WignerGrid())
    write_grid_csv(result, out_csv, meta)
    return EXIT_OK


def _probe_ensemble(spec: dict, space: FockSpace) -> ProbeEnsemble:
    kind = spec.get("type", "rings")
    if kind == "rings":
        radii = spec.get("radii")
        if radii is None:
            r_max = float(spec.get("r_max", 3.0))
            radii = np.linspace(0.0, r_max, int(spec.get("num_radii", 25)))
        phases = int(spec.get("phases", 8))
        _require(phases >= 1, "probe phases must be >= 1")
        return ProbeEnsemble.rings(radii, phases, space, warn=False)
    if kind == "list":
        alphas = [complex(a[0], a[1]) for a in spec["alphas"]]
        return ProbeEnsemble.coherent(alphas, space, warn=False)
    raise ConfigError(f"unknown probe type {kind!r}")


def cmd_tomo(config: dict, out_dir, seed=None, dim=None) -> int:
    """simulate -> reconstruct -> retrodict -> metrics, writing everything under ``out_dir``."""
    out_dir = Path(out_dir)
    detector = config.get("detector")
    _require(isinstance(detector, dict), "config needs a 'detector' object")
    probes = config.get("probes", {})
    shots = int(config.get("shots", 100000))
    _require(shots > 0, "shots must be positive")
    seed = int(config.get("seed", DEFAULT_SEED) if seed is None else seed)
    _require(0 <= seed < 2**64, "seed must be a 64-bit unsigned integer")
    opts = config.get("maxlik", {})
    if dim is None:
        dim = config.get("dim")
    if dim is None:
        dim = min_dimension(float(probes.get("r_max", 3.0)))
    dim = int(dim)
    _require(dim >= 2, "dim must be >= 2")

    space = FockSpace(dim)
    povm = povm_from_config(detector, space)
    ensemble = _probe_ensemble(probes, space)
    diagonal = bool(opts.get("diagonal_constraint", detector.get("type") in ("apd", "pnrd")))
    options = {
        "max_iters": int(opts.get("max_iters", 5000)),
        "ll_tol": float(opts.get("ll_tol", 1e-13)),
        "diagonal_constraint": diagonal,
    }

    table = simulate_counts(ensemble, povm, shots, seed)
    out_dir.mkdir(parents=True, exist_ok=True)
    table.to_csv(out_dir / "counts.csv")

    exit_code = EXIT_OK
    try:
        report = maxlik_povm(table, strict=True, **options)
    except NoConvergence as exc:
        report = exc.report
        exit_code = EXIT_NO_CONVERGENCE
        print(f"qretro: {exc}", file=sys.stderr)

    payload = {
        "seed": seed,
        "dim": dim,
        "shots_per_probe": shots,
        "num_probes": len(ensemble),
        "detector": detector,
        "options": options,
        "reconstruction": report.to_dict(),
    }
    _dump_json(out_dir / "report.json", payload)

    retro_probs = qdt_retrodict(table) if config.get("qst_route", False) else None
    metrics = {}
    for k, (label, element) in enumerate(zip(report.povm.labels, report.povm.elements)):
        if element.trace() <= 1e-12:
            metrics[label] = {"note": "element is zero; no pre-measurement state"}
            continue
        state = premeasurement_state(element)
        name = _safe_name(label)
        _dump_json(out_dir / "states" / f"{name}.json", state.to_dict())
        entry = metric_report(element)
        if retro_probs is not None:
            qst = qst_premeasurement(retro_probs[:, k], ensemble, diagonal_constraint=diagonal)
            _dump_json(out_dir / "states" / f"{name}_qst.json", qst.to_dict())
            entry["qst_route_fidelity"] = fidelity(state, qst)
        metrics[label] = entry
    _dump_json(out_dir / "metrics.json", metrics)
    return exit_code


def _safe_name(label: str) -> str:
    return "".join(ch if ch.isalnum() or ch in "-_." else "_" for ch in label)


def bundled_config_path() -> Path:
    return Path(str(resources.files("qretro") / "data" / "example_tomo.json"))


def _grid_from_args(args) -> WignerGrid | None:
    if args.x_range is None and args.p_range is None and args.points is None:
        return None
    x0, x1 = args.x_range or (-6.0, 6.0)
    p0, p1 = args.p_range or (-6.0, 6.0)
    n = args.points or 201
    _require(x1 > x0 and p1 > p0 and n >= 2, "grid ranges must be increasing with >= 2 points")
    return WignerGrid(x0, x1, p0, p1, n, n)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="qretro", description=__doc__.splitlines()[0])
    parser.add_argument("--out", default=".", help="output directory (default: current directory)")
    parser.add_argument("--seed", type=int, default=None, help="RNG seed for stochastic commands")
    parser.add_argument("--dim", type=int, default=None, help="Fock truncation dimension")
    parser.add_argument("--version", action="store_true", help="print version information as JSON")
    sub = parser.add_subparsers(dest="command")

    p = sub.add_parser("negativity-map", help="W_on(0,0) over (eta, nu) with the zero contour")
    p.add_argument("--eta-steps", type=int, default=21)
    p.add_argument("--nu-max", type=float, default=2.0)
    p.add_argument("--nu-steps", type=int, default=41)
    p.add_argument("--csv", default="negativity_map.csv")

    p = sub.add_parser("fidelity-curves", help="F_off(n, eta) and Pr(on | n)")
    p.add_argument("--n-max", type=int, default=10)
    p.add_argument("--eta-steps", type=int, default=21)
    p.add_argument("--nu", type=float, nargs="+", default=[0.0, 0.1, 0.5, 1.0])
    p.add_argument("--csv", default="fidelity_curves.csv")

    p = sub.add_parser("hd-wigner", help="homodyne element or retrodicted-state Wigner grid")
    p.add_argument("--x-i", type=float, default=1.0)
    p.add_argument("--eta", type=float, default=0.75)
    p.add_argument("--phi", type=float, default=0.0)
    p.add_argument("--retro", action="store_true")
    p.add_argument("--excess-noise", type=float, default=1e3)
    p.add_argument("--x-range", type=float, nargs=2, default=None)
    p.add_argument("--p-range", type=float, nargs=2, default=None)
    p.add_argument("--points", type=int, default=None)
    p.add_argument("--csv", default="hd_wigner.csv")

    p = sub.add_parser("tomo", help="simulated detector tomography from a JSON config")
    p.add_argument("config", nargs="?", default=None, help="config path (default: bundled example)")
    return parser


def version_info() -> dict:
    return {"name": "qretro", "version": __version__, "kernel_backend": _kernels.backend()}


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.version:
        print(json.dumps(version_info(), sort_keys=True))
        return EXIT_OK
    if args.command is None:
        parser.print_usage(sys.stderr)
        return EXIT_CONFIG
    out = Path(args.out)
    try:
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", TruncationWarning)
            if args.command == "negativity-map":
                return cmd_negativity_map(args.eta_steps, args.nu_max, args.nu_steps, out / args.csv)
            if args.command == "fidelity-curves":
                return cmd_fidelity_curves(args.n_max, args.eta_steps, args.nu, out / args.csv)
            if args.command == "hd-wigner":
                return cmd_hd_wigner(
                    args.x_i, args.eta, args.phi, _grid_from_args(args), args.retro, args.excess_noise, out / args.csv
                )
            path = Path(args.config) if args.config else bundled_config_path()
            config = json.loads(path.read_text())
            _require(isinstance(config, dict), "config must be a JSON object")
            return cmd_tomo(config, out, seed=args.seed, dim=args.dim)
    except (ConfigError, QRetroError, ValueError, KeyError, TypeError, OSError) as exc:
        if isinstance(exc, NoConvergence):
            print(f"qretro: {exc}", file=sys.stderr)
            return EXIT_NO_CONVERGENCE
        print(f"qretro: configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
