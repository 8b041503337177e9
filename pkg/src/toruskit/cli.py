"""Batch front-end: scan / threshold / invert / normalize / verify / basin.

Each subcommand reads a flat key=value section from an INI-style config
file, runs the corresponding operation and writes plot-ready CSV and JSON
artifacts into the output directory.  Artifacts are reproducible: they embed
the resolved configuration and a format version, and timings go to a
separate file.
"""

import argparse
import configparser
import json
import math
import sys
import time
from pathlib import Path

import numpy as np

from . import dynamics, explorer, normalform
from .errors import ToruskitError
from .tfseries import SeriesContext

FORMAT_VERSION = 1

_EXIT_OK = 0
_EXIT_MODULE_ERROR = 1
_EXIT_CONFIG_ERROR = 2


class ConfigError(Exception):
    pass


def _fmt(x: float) -> str:
    return format(float(x), ".17g")


_SCHEMAS = {
    "scan": {
        "system": str, "epsilon": float, "eta": float,
        "omega_min": float, "omega_max": float, "n_points": int,
        "N": int, "target_omega1": float,
    },
    "threshold": {
        "system": str, "omega1_star": float, "eta": float,
        "eps_lo": float, "eps_hi": float, "target_uncertainty": float,
        "N": int, "confirm_N": int,
    },
    "invert": {
        "system": str, "omega1_star": float, "epsilon": float, "eta": float,
        "Omega0": float, "alpha": float, "beta": float, "max_iter": int,
        "N": int,
    },
    "normalize": {
        "epsilon": float, "eta": float, "Omega": float, "omega1": float,
        "trunc_fourier": int, "r_max": int,
    },
    "verify": {
        "epsilon": float, "eta": float, "Omega": float, "omega1": float,
        "trunc_fourier": int, "r_max": int, "r_list": str, "n_points": int,
    },
    "basin": {
        "epsilon": float, "eta": float, "Omega": float, "omega1": float,
        "trunc_fourier": int, "r_max": int, "n_curve_samples": int,
        "n_checks": int,
    },
}

_REQUIRED = {
    "scan": ["system", "epsilon", "eta", "omega_min", "omega_max", "n_points"],
    "threshold": ["system", "omega1_star", "eta", "eps_lo", "eps_hi"],
    "invert": ["system", "omega1_star", "epsilon", "eta", "Omega0"],
    "normalize": ["epsilon", "eta", "Omega", "omega1", "r_max"],
    "verify": ["epsilon", "eta", "Omega", "omega1", "r_max", "r_list"],
    "basin": ["epsilon", "eta", "Omega", "omega1", "r_max"],
}


def _load_config(path: str, section: str) -> dict:
    parser = configparser.ConfigParser()
    parser.optionxform = str  # keys are case-sensitive (N vs n)
    read = parser.read(path)
    if not read:
        raise ConfigError(f"config file not found: {path}")
    if not parser.has_section(section):
        raise ConfigError(f"config is missing the [{section}] section")
    schema = _SCHEMAS[section]
    out = {}
    for key, raw in parser.items(section):
        if key not in schema:
            raise ConfigError(f"unknown key {key!r} in [{section}]")
        try:
            out[key] = schema[key](raw)
        except ValueError as exc:
            raise ConfigError(f"bad value for {key!r} in [{section}]: {exc}")
    for key in _REQUIRED[section]:
        if key not in out:
            raise ConfigError(f"missing key {key!r} in [{section}]")
    return out


def _write_json(path: Path, payload: dict):
    payload = dict(payload)
    payload["format_version"] = FORMAT_VERSION
    path.write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n")


def _write_csv(path: Path, header: str, rows):
    lines = [header]
    for row in rows:
        lines.append(",".join(_fmt(v) if isinstance(v, float) else str(v) for v in row))
    path.write_text("\n".join(lines) + "\n")


def cmd_scan(cfg: dict, out: Path, threads: int, seed: int) -> int:
    scan_cfg = explorer.FrequencyScanConfig(
        system=cfg["system"],
        epsilon=cfg["epsilon"],
        eta=cfg["eta"],
        omega_grid=(cfg["omega_min"], cfg["omega_max"], cfg["n_points"]),
        N=cfg.get("N"),
        target_omega1=cfg.get("target_omega1"),
        threads=threads,
    )
    samples = explorer.scan_frequency_map(scan_cfg)
    rows = [
        (s.Omega, s.omega1, s.amplitude, str(s.relaxed).lower(), str(s.plateau_suspect).lower())
        for s in samples
    ]
    _write_csv(out / "scan.csv", "Omega,omega1,amplitude,relaxed,plateau_suspect", rows)
    _write_json(out / "scan.json", {"config": cfg, "n_samples": len(samples),
                                    "folding": "map: [0,pi] per iterate; pendulum: [-0.5,0.5) per unit time"})
    return _EXIT_OK


def cmd_threshold(cfg: dict, out: Path, threads: int, seed: int) -> int:
    res = explorer.find_threshold(
        cfg["omega1_star"],
        cfg["eta"],
        cfg["system"],
        (cfg["eps_lo"], cfg["eps_hi"]),
        target_uncertainty=cfg.get("target_uncertainty", 1e-3),
        N=cfg.get("N"),
        confirm_N=cfg.get("confirm_N"),
    )
    _write_json(out / "threshold.json", {
        "config": cfg,
        "omega1_star": res.omega1_star,
        "eta": res.eta,
        "eps_lo": res.eps_lo,
        "eps_hi": res.eps_hi,
        "eps_c": res.eps_c,
        "uncertainty": res.uncertainty,
        "probes": res.probes,
    })
    return _EXIT_OK


def cmd_invert(cfg: dict, out: Path, threads: int, seed: int) -> int:
    ncfg = explorer.NewtonConfig(
        alpha=cfg.get("alpha", 1e-6),
        beta=cfg.get("beta", 1e-15),
        max_iter=cfg.get("max_iter", 20),
    )
    Omega_star, iterations = explorer.invert_frequency_map(
        cfg["omega1_star"], cfg["system"], cfg["epsilon"], cfg["eta"],
        cfg["Omega0"], ncfg, N=cfg.get("N"),
    )
    _write_json(out / "invert.json", {
        "config": cfg,
        "Omega_star": Omega_star,
        "iterations": iterations,
    })
    return _EXIT_OK


def _run_normalization(cfg: dict):
    ctx = SeriesContext(
        n1=1, n2=1, K=2,
        trunc_fourier=cfg.get("trunc_fourier", 42),
        trunc_action=2,
    )
    params = dynamics.ForcedPendulumParams(cfg["epsilon"], cfg["eta"], cfg["Omega"])
    state0 = normalform.init_normalization(params, cfg["omega1"], cfg["Omega"], ctx)
    state, transform = normalform.run_normalization(state0, cfg["r_max"])
    return params, state, transform


def _norms_rows(state):
    return [
        (rec.r, rec.norms["X"], rec.norms["xi"], rec.norms["chi2"], rec.norms["Omega"])
        for rec in state.history
    ]


def cmd_normalize(cfg: dict, out: Path, threads: int, seed: int) -> int:
    t0 = time.time()
    params, state, transform = _run_normalization(cfg)
    elapsed = time.time() - t0
    _write_csv(out / "norms.csv", "r,norm_X,norm_xi,norm_chi2,norm_Omega", _norms_rows(state))
    (out / "final_series.txt").write_text(state.H.dumps())
    gen_dump = []
    for kind, gen in transform.generators:
        gen_dump.append(f"## generator {kind}")
        if gen.xi is not None:
            gen_dump.append("# xi " + " ".join(_fmt(x) for x in gen.xi))
        gen_dump.append(gen.series.dumps())
    (out / "generators.txt").write_text("\n".join(gen_dump))
    _write_json(out / "manifest.json", {
        "config": cfg,
        "steps_completed": state.r,
        "aborted": state.aborted,
        "omega": list(state.omega),
        "Omega_r": list(state.Omega_r),
        "chi2_norm_ratio": normalform.chi2_norm_ratio(state.history),
        "det_C": [rec.C_matrix_det for rec in state.history],
        "residual_X_max": max((rec.residual_X for rec in state.history), default=0.0),
        "residual_chi2_max": max((rec.residual_chi2 for rec in state.history), default=0.0),
    })
    _write_json(out / "timings.json", {"normalize_seconds": elapsed})
    return _EXIT_OK


def cmd_verify(cfg: dict, out: Path, threads: int, seed: int) -> int:
    params, state, transform = _run_normalization(cfg)
    r_list = [int(tok) for tok in cfg["r_list"].replace(",", " ").split()]
    res = normalform.verify_torus(
        transform, params, r_list, cfg.get("n_points", 10001)
    )
    _write_csv(out / "verify.csv", "r,max_abs_P1", [(r, v) for r, v in res])
    _write_json(out / "verify.json", {"config": cfg, "max_abs_P1": {str(r): v for r, v in res}})
    return _EXIT_OK


def cmd_basin(cfg: dict, out: Path, threads: int, seed: int) -> int:
    params, state, transform = _run_normalization(cfg)
    est = normalform.basin_estimate(state, transform, cfg.get("n_curve_samples", 256))
    rows = []
    if not est.unbounded:
        for label, curve in zip(("plus", "minus"), est.curves):
            for p1, q1 in curve:
                rows.append((label, float(p1), float(q1)))
    _write_csv(out / "basin_curves.csv", "branch,p1,q1", rows)
    payload = {
        "config": cfg,
        "B": est.B,
        "radius": est.radius if math.isfinite(est.radius) else "inf",
        "unbounded": est.unbounded,
    }
    n_checks = cfg.get("n_checks", 0)
    if n_checks and not est.unbounded:
        rng = np.random.default_rng(seed)
        P = rng.uniform(-est.radius, est.radius, n_checks)
        Q = rng.uniform(0.0, 2.0 * math.pi, n_checks)
        hits = sum(
            basin_point_converges(transform, params, float(p), float(q))
            for p, q in zip(P, Q)
        )
        payload["converged_to_torus"] = int(hits)
        payload["n_checks"] = n_checks
    _write_json(out / "basin.json", payload)
    return _EXIT_OK


def basin_point_converges(transform, params, P1, Q1, N=2**12, tol=1e-8) -> bool:
    """Forward-integrate the original-coordinates image of a normalized point
    and test that the measured attractor frequency matches the torus."""
    from . import freqanalysis

    p1, q1 = transform.to_original(P1, Q1, 0.0)
    W = dynamics.relaxation_count(params.eta)
    ps, qs, _ = dynamics.poincare_sections((float(p1[0]), float(q1[0])), W + N, params)
    sig = freqanalysis.orbit_signal_from_map((ps, qs), 2.0 * math.pi, W, N)
    f = explorer.fold_frequency(freqanalysis.principal_frequency(sig), "pendulum")
    return abs(f - transform.omega1) < tol


_COMMANDS = {
    "scan": cmd_scan,
    "threshold": cmd_threshold,
    "invert": cmd_invert,
    "normalize": cmd_normalize,
    "verify": cmd_verify,
    "basin": cmd_basin,
}


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="toruskit",
        description="quasi-periodic attractor toolkit for dissipative systems",
    )
    parser.add_argument("command", choices=sorted(_COMMANDS))
    parser.add_argument("--config", required=True, help="INI config file")
    parser.add_argument("--out", default=".", help="output directory")
    parser.add_argument("--threads", type=int, default=1)
    parser.add_argument("--seed", type=int, default=0)
    args = parser.parse_args(argv)

    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    try:
        cfg = _load_config(args.config, args.command)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return _EXIT_CONFIG_ERROR
    try:
        return _COMMANDS[args.command](cfg, out, args.threads, args.seed)
    except ToruskitError as exc:
        print(f"{type(exc).__name__}: {exc}", file=sys.stderr)
        return _EXIT_MODULE_ERROR


if __name__ == "__main__":
    sys.exit(main())
