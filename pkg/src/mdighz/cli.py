"""Batch front end: sweeps, curve reproduction, validation, CSV emission.

Every CSV starts with `#` comment lines carrying the manifest digest (sha256
of the resolved config, command, seed, and tool version), so identical runs
are byte-identical and every output references the manifest that produced it.
A JSON manifest with timestamps is written next to each CSV.

Exit codes: 0 success, 2 config/usage error, 3 validation failure,
4 internal numerical-tolerance failure.
"""

from __future__ import annotations

import argparse
import datetime
import hashlib
import json
import sys
from pathlib import Path


from . import __version__, decoy, fock, gains, keyrates, mermin, montecarlo
from .params import (ConfigError, ExperimentConfig, NumericsError, parse_config,
                     serialize_config, overall_efficiency)

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_VALIDATION = 3
EXIT_NUMERICS = 4

_FULL_SAMPLES = 10_000_000
_QUICK_SAMPLES = 100_000


def _fmt(value) -> str:
    if value is None:
        return "nan"
    if isinstance(value, float):
        return repr(float(value))  # shortest round-trip; strips numpy scalars
    return str(value)


def _digest(config_text: str, command: str, seed: int) -> str:
    payload = json.dumps({"tool": "mdighz", "version": __version__,
                          "command": command, "seed": seed,
                          "config": config_text}, sort_keys=True)
    return hashlib.sha256(payload.encode()).hexdigest()


def _write_csv(path: Path, command: str, cfg: ExperimentConfig, seed: int,
               header: list[str], rows: list[list]) -> None:
    config_text = serialize_config(cfg)
    digest = _digest(config_text, command, seed)
    lines = [
        f"# mdighz {__version__} {command}",
        f"# manifest_digest=sha256:{digest}",
        f"# seed={seed}",
        f"# rng={montecarlo.RNG_ALGORITHM}",
        ",".join(header),
    ]
    for row in rows:
        lines.append(",".join(_fmt(v) for v in row))
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text("\n".join(lines) + "\n")

    manifest = {
        "tool": "mdighz",
        "version": __version__,
        "command": command,
        "seed": seed,
        "rng": montecarlo.RNG_ALGORITHM,
        "manifest_digest": f"sha256:{digest}",
        "created_utc": datetime.datetime.now(datetime.timezone.utc).isoformat(),
        "output": str(path),
        "config": config_text,
    }
    path.with_suffix(path.suffix + ".manifest.json").write_text(
        json.dumps(manifest, indent=2) + "\n")


def _diag_cell(diags) -> str:
    return ";".join(d.replace(",", ";") for d in diags) if diags else ""


def _load_config(path: str) -> ExperimentConfig:
    try:
        return parse_config(Path(path).read_text())
    except FileNotFoundError:
        raise ConfigError(f"config file not found: {path}")


def _curve_rows(curve: keyrates.KeyRateCurve, extra_cols: list[str]):
    rows = []
    for p in curve.points:
        row = [p.distance_km, p.rate, p.rate_infinite, p.raw_rate]
        row += [p.columns.get(c) for c in extra_cols]
        row.append(_diag_cell(p.diagnostics))
        rows.append(row)
    return rows


def cmd_qcc(args) -> int:
    cfg = _load_config(args.config)
    if cfg.source.kind != "wcs":
        raise ConfigError("conferencing runs use weak coherent sources", key="source.kind")
    distances = cfg.sweep.distances()
    if args.quick:
        distances = distances[:: max(1, int(5 / max(cfg.sweep.l_step, 1e-9)))]
    curve = keyrates.sweep("qcc", cfg, distances, workers=args.workers)
    header = ["distance_km", "rate_two_decoy", "rate_infinite_decoy", "raw_rate",
              "e111_bxu", "Y111_zl", "diagnostics"]
    _write_csv(Path(args.out), "qcc", cfg, args.seed, header,
               _curve_rows(curve, ["e111_bxu", "Y111_zl"]))
    cut = curve.cutoff_km
    print(f"qcc: {len(curve.points)} points, cutoff_km={_fmt(cut)} -> {args.out}")
    return EXIT_OK


def cmd_qss(args) -> int:
    cfg = _load_config(args.config)
    method = cfg.method
    if args.method is not None and args.method != method:
        raise ConfigError(f"--method {args.method} conflicts with source.kind "
                          f"{cfg.source.kind!r} (implies {method})", key="source.kind")
    variant = {"pps": "qss_pps", "heralded": "qss_heralded", "qnd": "qss_qnd"}[method]
    if variant == "qss_pps" and cfg.phase is None:
        raise ConfigError("phase post-selection needs phase.K", key="phase.K")
    distances = cfg.sweep.distances()
    if args.quick:
        distances = distances[:: max(1, int(5 / max(cfg.sweep.l_step, 1e-9)))]
    curve = keyrates.sweep(variant, cfg, distances, workers=args.workers)
    if method == "pps":
        extra = ["e111_bzu", "Y111_xl", "Q_x_sliced", "E_x_sliced"]
    else:
        extra = ["e111_bzu", "Y111_xl", "Q_x", "E_x"]
    header = (["distance_km", "rate_two_decoy", "rate_infinite_decoy", "raw_rate"]
              + extra + ["diagnostics"])
    _write_csv(Path(args.out), f"qss-{method}", cfg, args.seed, header,
               _curve_rows(curve, extra))
    print(f"qss ({method}): {len(curve.points)} points, "
          f"cutoff_km={_fmt(curve.cutoff_km)} -> {args.out}")
    return EXIT_OK


def cmd_mermin(args) -> int:
    cfg = _load_config(args.config)
    if cfg.source.kind != "wcs":
        raise ConfigError("the Mermin estimate uses weak coherent sources",
                          key="source.kind")
    distances = cfg.sweep.distances()
    if args.quick:
        distances = distances[:: max(1, int(5 / max(cfg.sweep.l_step, 1e-9)))]
    points = mermin.mermin_curve(cfg, distances)
    header = ["distance_km", "mermin_lower", "local_realism_bound",
              "y_ppp_lower", "y_ppp_upper", "y_mmm_upper", "diagnostics"]
    rows = []
    for length, est in points:
        rows.append([length, est.m_lower, mermin.LOCAL_REALISM_BOUND,
                     est.bounds.y_ppp_lower, est.bounds.y_ppp_upper,
                     est.bounds.y_mmm_upper, _diag_cell(est.diagnostics)])
    _write_csv(Path(args.out), "mermin", cfg, args.seed, header, rows)
    print(f"mermin: {len(rows)} points -> {args.out}")
    return EXIT_OK


def cmd_optimize(args) -> int:
    cfg = _load_config(args.config)
    variant = {"pps": "qss_pps", "heralded": "qss_heralded",
               "qnd": "qss_qnd"}.get(cfg.method, "qss_pps")
    if args.variant == "qcc":
        variant = "qcc"
    lo, hi = (float(v) for v in args.box.split(":"))
    best_mu, best_rate = keyrates.optimize_intensities(
        variant, cfg, args.at, (lo, hi), points=args.points, rounds=args.rounds)
    header = ["variant", "distance_km", "best_mu", "best_rate"]
    _write_csv(Path(args.out), "optimize", cfg, args.seed, header,
               [[variant, args.at, best_mu, best_rate]])
    print(f"optimize: {variant} at {args.at} km -> mu={best_mu!r} rate={best_rate!r}")
    return EXIT_OK


# ---------------------------------------------------------------------------
# Validation suite
# ---------------------------------------------------------------------------

def _validate_mc(cfg: ExperimentConfig, seed: int, samples: int, rows: list) -> bool:
    """Monte Carlo vs analytic for the six gain classes and the sliced gains."""
    params = cfg.system
    eta = overall_efficiency(params.channel, params.detector)
    p_d = params.detector.p_d
    mu = cfg.decoy.mu2
    ok = True
    mc_cfg = montecarlo.McConfig(samples=samples, seed=seed)

    z = gains.z_gain_components(mu, mu, mu, eta, p_d)
    x = gains.x_gain_components(mu, mu, mu, eta, p_d)
    # one MC run per preparation; both announced classes come out of it
    runs = [
        ("HHH", None, (("A", 8.0 * z.a, 0),)),
        ("HHV", None, (("B", 8.0 * z.b, 0),)),
        ("VHH", None, (("C", 8.0 * z.c, 0),)),
        ("HVH", None, (("D", 8.0 * z.d, 0),)),
        ("+++", None, (("E", 8.0 * x.e, 0), ("F", 8.0 * x.f, 1))),
    ]
    if cfg.phase is not None and cfg.phase.k > 1:
        k = cfg.phase.k
        sliced = gains.phase_sliced_gains(mu, mu, mu, eta, p_d, k)
        runs.append(("+++", k, (("Q~CX", k * k * sliced.q_c, 0),
                                ("Q~EX", k * k * sliced.q_e, 1))))

    for pols, slice_k, wanted in runs:
        ests = montecarlo.mc_coherent_gains(pols, (mu, mu, mu), eta, p_d,
                                            mc_cfg, slice_k=slice_k)
        for label, analytic, which in wanted:
            est = ests[which]
            z_score = est.z_score(analytic)
            good = abs(z_score) < 3.0
            ok &= good
            rows.append(["mc:" + label, analytic, est.mean, est.stderr, z_score,
                         "pass" if good else "FAIL"])
    return ok


def _validate_symmetries(cfg: ExperimentConfig, rows: list) -> bool:
    """Outcome/polarization equalities of the gain formulas, to 1e-10 relative."""
    params = cfg.system
    p_d = params.detector.p_d
    ok = True
    grid = [(cfg.decoy.mu2, overall_efficiency(params.channel, params.detector)),
            (cfg.decoy.mu1, overall_efficiency(params.channel, params.detector)),
            (cfg.decoy.mu2, params.detector.eta_d),
            (0.8, 0.25), (0.05, 0.9)]
    for mu, eta in grid:
        vals = [gains.z_pattern_outcome_gain(pols, mu, mu, mu, eta, p_d, outcome)
                for pols in ("HHH", "VVV") for outcome in ("plus", "minus")]
        spread = (max(vals) - min(vals)) / max(max(vals), 1e-300)
        good = spread < 1e-10
        ok &= good
        rows.append([f"sym:samepol(mu={mu},eta={eta:.3g})", vals[0], vals[-1],
                     "", spread, "pass" if good else "FAIL"])

        # mixed classes: closed forms vs the independent pattern-product path
        z = gains.z_gain_components(mu, mu / 2, mu / 3, eta, p_d)
        worst = 0.0
        for pols, closed in (("HHV", z.b), ("VHH", z.c), ("HVH", z.d)):
            product = gains.z_pattern_outcome_gain(pols, mu, mu / 2, mu / 3,
                                                   eta, p_d)
            worst = max(worst, abs(product - closed) / max(abs(product), 1e-300))
        good = worst < 1e-10
        ok &= good
        rows.append([f"sym:mixedclass(mu={mu},eta={eta:.3g})", z.b, z.c,
                     "", worst, "pass" if good else "FAIL"])

        correct, false = [], []
        for signs in [(sa, sb, sc) for sa in (1, -1) for sb in (1, -1) for sc in (1, -1)]:
            q_plus, q_minus = gains.mermin_outcome_gains(signs, mu, mu, mu, eta, p_d)
            parity = signs[0] * signs[1] * signs[2]
            (correct if parity == 1 else false).append(q_plus)
            (false if parity == 1 else correct).append(q_minus)
        worst = 0.0
        for group in (correct, false):
            worst = max(worst, (max(group) - min(group)) / max(max(group), 1e-300))
        good = worst < 1e-10
        ok &= good
        rows.append([f"sym:signclasses(mu={mu},eta={eta:.3g})", correct[0], false[0],
                     "", worst, "pass" if good else "FAIL"])
    return ok


def _validate_brackets(cfg: ExperimentConfig, rows: list) -> bool:
    """Two-decoy bounds must bracket the exact single-photon quantities."""
    ok = True
    for length in (0.0, 50.0, 100.0, 150.0):
        params = cfg.system.at_distance(length)
        grid = decoy.build_gain_grid(
            lambda a, b, c: gains.wcs_gain_set(a, b, c, params), cfg.decoy)
        bounds = decoy.wcs_bounds(grid, grid, cfg.decoy)
        exact = fock.exact_single_photon_stats_for(params)
        good = bounds.y111_zl <= exact.y111_z + 1e-12
        if bounds.e111_bxu is not None and exact.e111_bx is not None:
            good &= bounds.e111_bxu >= exact.e111_bx - 1e-12
        ok &= good
        rows.append([f"bracket:L={length}", bounds.y111_zl, exact.y111_z, "",
                     bounds.y111_zl - exact.y111_z, "pass" if good else "FAIL"])
    return ok


def cmd_validate(args) -> int:
    cfg = _load_config(args.config)
    samples = _QUICK_SAMPLES if args.quick else _FULL_SAMPLES
    rows: list[list] = []
    ok = True
    ok &= _validate_mc(cfg, args.seed, samples, rows)
    ok &= _validate_symmetries(cfg, rows)
    ok &= _validate_brackets(cfg, rows)
    report = montecarlo.fock_closed_form_check(4 if args.quick else 6)
    good = report.max_deviation < 1e-12
    ok &= good
    rows.append(["fock:closed-form", 0.0, report.max_deviation, "",
                 report.max_deviation, "pass" if good else "FAIL"])

    header = ["check", "analytic", "estimate", "stderr", "deviation", "status"]
    widths = [34, 14, 14, 12, 12, 6]
    print("  ".join(h.ljust(w) for h, w in zip(header, widths)))
    for row in rows:
        cells = [str(row[0])] + [f"{v:.6g}" if isinstance(v, float) else str(v)
                                 for v in row[1:]]
        print("  ".join(c.ljust(w) for c, w in zip(cells, widths)))
    if args.out:
        _write_csv(Path(args.out), "validate", cfg, args.seed, header, rows)
    print(f"validation {'passed' if ok else 'FAILED'} "
          f"({samples} samples, seed {args.seed})")
    return EXIT_OK if ok else EXIT_VALIDATION


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="mdighz",
        description="Rate curves, Mermin bounds and validation for MDI "
                    "multiparty quantum communication.",
        epilog="Config format: lines of 'section.key = value' with sections "
               "channel, detector, system, source, decoy, phase, sweep. "
               "Required keys: channel.beta, detector.eta_d, detector.p_d, "
               "system.e_d, system.f, source.kind, source.mu, decoy.mu1. "
               "qss with source.kind=wcs additionally needs phase.K; "
               "source.kind=heralded accepts source.trigger_eta_d/_p_d.")
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, needs_out=True):
        p.add_argument("--config", required=True, help="config document path")
        if needs_out:
            p.add_argument("--out", required=True, help="output CSV path")
        else:
            p.add_argument("--out", default=None, help="optional report CSV path")
        p.add_argument("--quick", action="store_true",
                       help="coarser grid / fewer samples")
        p.add_argument("--seed", type=int, default=1, help="RNG seed (u64)")
        p.add_argument("--workers", type=int, default=1,
                       help="thread workers for sweep points")

    p = sub.add_parser("qcc", help="conferencing key-rate curve")
    common(p)
    p.set_defaults(fn=cmd_qcc)

    p = sub.add_parser("qss", help="secret-sharing key-rate curve")
    common(p)
    p.add_argument("--method", choices=("pps", "heralded", "qnd"), default=None,
                   help="must match the config's source.kind")
    p.set_defaults(fn=cmd_qss)

    p = sub.add_parser("mermin", help="Mermin-value lower-bound curve")
    common(p)
    p.set_defaults(fn=cmd_mermin)

    p = sub.add_parser("validate", help="Monte Carlo + symmetry + bracket suite")
    common(p, needs_out=False)
    p.set_defaults(fn=cmd_validate)

    p = sub.add_parser("optimize", help="grid-search the signal intensity")
    common(p)
    p.add_argument("--variant", choices=("qcc", "qss"), default="qcc")
    p.add_argument("--at", type=float, default=100.0, help="distance (km)")
    p.add_argument("--box", default="0.05:1.0", help="search box lo:hi")
    p.add_argument("--points", type=int, default=9)
    p.add_argument("--rounds", type=int, default=3)
    p.set_defaults(fn=cmd_optimize)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.fn(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except NumericsError as exc:
        print(f"numerical-tolerance failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICS


if __name__ == "__main__":
    sys.exit(main())
