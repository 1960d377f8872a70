"""
Command-line front end: tpdc spectrum | rate | scan | cache | basis.

Exit codes: 0 success, 2 configuration error, 3 numerical failure.
"""

import argparse
import logging
import sys
import warnings
from pathlib import Path

import mpmath

from tpdc import __version__
from tpdc.cli.cache import SpectrumCache
from tpdc.cli.config import (
    CONFIG_KEYS, RunConfig, apply_overrides, emit_config, parse_state, parse_value,
    preset_for, read_config_file, state_label, validate,
)
from tpdc.cli.reports import Report, render_many
from tpdc.core.basis import SPEED_OF_LIGHT, NuclearModel, basis_values
from tpdc.core.channels import CHANNEL_HELP_TEXT, get_channel
from tpdc.core.dirac import OrbitalClass, exact_energy, solve_spectrum
from tpdc.core.errors import ConfigError, SpuriousStateWarning, TpdcError
from tpdc.core.runner import RateJob, RateWorker
from tpdc.core.specfun import PrecisionCtx
from tpdc.core.twophoton import sum_results, total_rate, transition_states

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_NUMERICAL = 3
LOG_FORMAT = "%(levelname)s %(name)s: %(message)s"


# ── Argument parsing ──────────────────────────────────────────────────

def _common_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    group = common.add_argument_group("run configuration")
    group.add_argument("--config", metavar="PATH", help="key = value configuration file")
    group.add_argument("--emit-config", action="store_true",
                       help="print the resolved configuration and exit")
    group.add_argument("--no-cache", action="store_true", help="neither read nor write the spectrum cache")
    for key, info in CONFIG_KEYS.items():
        flag = "--" + key.replace("_", "-")
        if info["type"] == "bool":
            group.add_argument(flag, dest=key, action="store_const", const="true", default=None,
                               help=info["help"])
            continue
        metavar = "|".join(info["choices"]) if info["type"] == "choice" else key.upper()
        if key == "nuclear":
            metavar = "point|uniform[:R_N]"
        group.add_argument(flag, dest=key, default=None, metavar=metavar, help=info["help"])
    verbosity = common.add_argument_group("logging")
    verbosity.add_argument("-v", "--verbose", action="count", default=0, help="more log output")
    verbosity.add_argument("-q", "--quiet", action="count", default=0, help="less log output")
    return common


def build_parser() -> argparse.ArgumentParser:
    common = _common_parser()
    parser = argparse.ArgumentParser(
        prog="tpdc",
        description="Relativistic two-photon decay rates of hydrogen-like ions from finite-basis Dirac spectra.",
    )
    parser.add_argument("--version", action="version", version=f"tpdc {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)
    sub.add_parser("spectrum", parents=[common], help="bound energies against the exact Dirac values")
    sub.add_parser("rate", parents=[common], help="two-photon rates per channel and restriction",
                   epilog=CHANNEL_HELP_TEXT, formatter_class=argparse.RawDescriptionHelpFormatter)
    sub.add_parser("scan", parents=[common], help="convergence scan over basis size and radius")
    cache = sub.add_parser("cache", parents=[common], help="list or evict cached spectra and rates")
    cache.add_argument("action", choices=["list", "evict"])
    cache.add_argument("keys", nargs="*", help="entry keys to evict (default: all)")
    basis = sub.add_parser("basis", parents=[common], help="sample the basis functions on a grid")
    basis.add_argument("--points", type=int, default=101, help="grid points on [0, R]")
    return parser


def resolve_config(args) -> RunConfig:
    """Schema defaults < config file < command-line flags."""
    cfg = RunConfig()
    if args.config:
        cfg = read_config_file(args.config, cfg)
    overrides = {}
    for key in CONFIG_KEYS:
        text = getattr(args, key, None)
        if text is None:
            continue
        if key == "nuclear" and ":" in text:
            shape, _, radius = text.partition(":")
            overrides["nuclear"] = parse_value("nuclear", shape)
            overrides["nuclear_radius"] = parse_value("nuclear_radius", radius)
            continue
        overrides[key] = parse_value(key, text)
    return validate(apply_overrides(cfg, overrides))


def configure_logging(level: int):
    levels = {-1: logging.WARNING, 0: logging.INFO, 1: logging.DEBUG}
    logging.basicConfig(level=levels[max(-1, min(1, level))], format=LOG_FORMAT, stream=sys.stderr,
                        force=True)


def _write(cfg: RunConfig, text: str):
    if cfg.out:
        Path(cfg.out).write_text(text, encoding="utf-8")
        logger.info("report written to %s", cfg.out)
    else:
        sys.stdout.write(text)


def _cache(args) -> SpectrumCache | None:
    return None if args.no_cache else SpectrumCache()


def _relative(a, b):
    return abs((a - b) / a)


# ── spectrum ──────────────────────────────────────────────────────────

def cmd_spectrum(cfg: RunConfig, args) -> int:
    """Bound energies, exact point-nucleus energies and their relative differences."""
    digits = cfg.digits[0]
    ctx = PrecisionCtx(digits)
    cache = _cache(args)
    states = [parse_state(s) for s in cfg.states]
    reports = []
    for Z in cfg.z:
        spec, nuc = cfg.basis_for(Z), cfg.nucleus_for(Z)
        report = Report(f"Dirac spectrum Z={Z:g} {spec.kind.value} N={spec.count} R={spec.radius:g} "
                        f"nucleus={nuc.shape.value} digits={digits}",
                        ["state", "kappa", "energy", "exact", "delta"], digits=digits)
        spectra = {}
        for n, kappa in states:
            if kappa not in spectra:
                spectra[kappa] = _spectrum(cache, spec, nuc, kappa, ctx, cfg)
            energy = spectra[kappa].bound_state(n).energy
            exact = delta = None
            if nuc.shape.value == "point":
                exact = exact_energy(n, kappa, Z, SPEED_OF_LIGHT, ctx)
                delta = _relative(exact, energy)
            report.add(state_label(n, kappa), kappa, energy, exact, delta)
        for kappa, spectrum in spectra.items():
            counts = {cls.value: len(spectrum.of_class(cls)) for cls in OrbitalClass}
            report.notes.append(f"kappa={kappa:+d}: " + ", ".join(f"{k} {v}" for k, v in counts.items()))
        reports.append(report)
    _write(cfg, render_many(reports, cfg.format))
    return EXIT_OK


def _spectrum(cache, spec, nuc, kappa, ctx, cfg):
    if cache is not None:
        hit = cache.load_spectrum(spec, nuc, kappa, ctx.digits, SPEED_OF_LIGHT, cfg.solver, cfg.bond_variant)
        if hit is not None:
            return hit
    spectrum = solve_spectrum(spec, nuc, kappa, ctx, SPEED_OF_LIGHT, cfg.solver, cfg.bond_variant)
    if cache is not None:
        cache.store_spectrum(spectrum, cfg.solver)
    return spectrum


# ── rate ──────────────────────────────────────────────────────────────

def _jobs(cfg: RunConfig, nucleus=None) -> list:
    channels = tuple(get_channel(name) for name in cfg.channels)
    jobs = []
    for Z in cfg.z:
        nuc = nucleus(Z) if nucleus else cfg.nucleus_for(Z)
        jobs.append(RateJob(cfg.basis_for(Z), nuc, channels, cfg.digits[0], cfg.quad_points,
                            cfg.initial_state, cfg.final_state, cfg.solver, cfg.bond_variant))
    return jobs


def _run_jobs(cfg: RunConfig, args, jobs: list) -> list:
    worker = RateWorker(jobs, _cache(args), cfg.jobs)
    return worker.run()


def cmd_rate(cfg: RunConfig, args) -> int:
    """Rates per channel, gauge and restriction, channel totals and lifetimes."""
    outcomes = _run_jobs(cfg, args, _jobs(cfg))
    point = None
    if cfg.nuclear == "uniform":
        point = _run_jobs(cfg, args, _jobs(cfg, nucleus=NuclearModel))

    digits = cfg.digits[0]
    table = cfg.format == "table"
    transition = f"{cfg.initial} -> {cfg.final}"
    report = Report(f"Two-photon decay {transition}, rates in s^-1 (digits={digits})",
                    ["Z", "channel", "restriction", "gauge", "rate", "delta_lv"], digits=digits)
    failed = []
    for idx, outcome in enumerate(outcomes):
        if not outcome.success:
            failed.append(f"{outcome.job.label}: {outcome.error}")
            continue
        for result in outcome.results:
            for row in result.rows():
                if table and row["restriction"] != cfg.restriction:
                    continue
                report.add(f"{row['Z']:g}", row["channel"], row["restriction"], row["gauge"], row["rate"], row["delta_lv"])
        total = sum_results(outcome.results)
        report.add(f"{outcome.job.nuc.Z:g}", "Total", "all", "length", total, None)
        report.notes.append(f"Z={outcome.job.nuc.Z:g}: lifetime {mpmath.nstr(1 / total, 11)} s")
        if point is not None and point[idx].success:
            ref = sum_results(point[idx].results)
            report.notes.append(f"Z={outcome.job.nuc.Z:g}: finite-nucleus change "
                                f"{mpmath.nstr((total - ref) / ref, 6)} relative to a point nucleus")
    _write(cfg, render_many([report], cfg.format))
    if failed:
        for line in failed:
            logger.error("%s", line)
        return EXIT_NUMERICAL
    return EXIT_OK


# ── scan ──────────────────────────────────────────────────────────────

def _scan_point(cfg: RunConfig, Z: float, count: int, radius: float, digits: int) -> tuple:
    """(delta_omega_t, delta_lv, W^T) of the 2E1 transition for one basis."""
    ctx = PrecisionCtx(digits)
    spec, nuc = cfg.basis_for(Z, count, radius), cfg.nucleus_for(Z)
    channel = get_channel("2E1")
    (n_i, k_i), (n_f, k_f) = cfg.initial_state, cfg.final_state
    job = RateJob(spec, nuc, (channel,), digits, cfg.quad_points, (n_i, k_i), (n_f, k_f),
                  cfg.solver, cfg.bond_variant)
    spectra = {k: solve_spectrum(spec, nuc, k, ctx, SPEED_OF_LIGHT, cfg.solver, cfg.bond_variant)
               for k in job.kappas}
    i, f = transition_states(spectra, (n_i, k_i), (n_f, k_f))
    delta_w = None
    if nuc.shape.value == "point":
        exact = (exact_energy(n_i, k_i, Z, SPEED_OF_LIGHT, ctx) - exact_energy(n_f, k_f, Z, SPEED_OF_LIGHT, ctx))
        delta_w = _relative(exact, i.energy - f.energy)
    result = total_rate(channel, i, f, spectra, cfg.quad_points)
    return delta_w, result.delta_lv, result.total_length


def cmd_scan(cfg: RunConfig, args) -> int:
    """Plot-ready convergence data over basis size, radius and precision."""
    reports = []
    for Z in cfg.z:
        row = preset_for(Z, cfg.basis)
        counts = cfg.scan_counts or (cfg.count or row[3],)
        radii = cfg.scan_radii or (cfg.radius or row[4],)
        report = Report(f"Convergence scan Z={Z:g} {cfg.basis} 2E1 {cfg.initial} -> {cfg.final}",
                        ["Z", "count", "radius", "digits", "delta_omega_t", "delta_lv", "rate"],
                        digits=max(cfg.digits))
        for radius in radii:
            for count in counts:
                for digits in cfg.digits:
                    try:
                        dw, dlv, rate = _scan_point(cfg, Z, count, radius, digits)
                    except (TpdcError, SpuriousStateWarning) as e:
                        logger.warning("scan point N=%d R=%g digits=%d failed: %s", count, radius, digits, e)
                        dw = dlv = rate = None
                    report.add(f"{Z:g}", count, radius, digits, dw, dlv, rate)
        reports.append(report)
    _write(cfg, render_many(reports, cfg.format))
    return EXIT_OK


# ── cache ─────────────────────────────────────────────────────────────

def cmd_cache(cfg: RunConfig, args) -> int:
    cache = SpectrumCache()
    if args.action == "evict":
        removed = cache.evict(args.keys or None)
        report = Report(f"Cache {cache.root}", ["removed"])
        report.add(removed)
    else:
        report = Report(f"Cache {cache.root}", ["kind", "key", "bytes", "summary"])
        for entry in cache.entries():
            report.add(entry.kind, entry.key, entry.size, entry.summary)
    _write(cfg, render_many([report], cfg.format))
    return EXIT_OK


# ── basis ─────────────────────────────────────────────────────────────

def cmd_basis(cfg: RunConfig, args) -> int:
    """Every basis function and their sum on a uniform grid (plot-ready)."""
    if args.points < 2:
        raise ConfigError("--points must be at least 2")
    digits = cfg.digits[0]
    ctx = PrecisionCtx(digits)
    Z = cfg.z[0]
    spec = cfg.basis_for(Z)
    R = ctx.mpf(repr(float(spec.radius)))
    report = Report(f"{spec.kind.value} basis N={spec.count} order={spec.order} R={spec.radius:g}",
                    ["r"] + [f"B{i}" for i in range(spec.count)] + ["sum"], digits=digits)
    for step in range(args.points):
        r = R * step / (args.points - 1)
        vals = basis_values(spec, r, ctx)
        report.add(r, *vals, ctx.mp.fsum(vals))
    _write(cfg, render_many([report], cfg.format))
    return EXIT_OK


COMMANDS = {
    "spectrum": cmd_spectrum,
    "rate": cmd_rate,
    "scan": cmd_scan,
    "cache": cmd_cache,
    "basis": cmd_basis,
}


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    configure_logging(args.verbose - args.quiet)
    try:
        cfg = resolve_config(args)
        if args.emit_config:
            sys.stdout.write(emit_config(cfg))
            return EXIT_OK
        with warnings.catch_warnings():
            if cfg.strict:
                warnings.simplefilter("error", SpuriousStateWarning)
            return COMMANDS[args.command](cfg, args)
    except ConfigError as e:
        logger.error("configuration error: %s", e)
        return EXIT_CONFIG
    except (TpdcError, SpuriousStateWarning) as e:
        logger.error("numerical failure: %s: %s", type(e).__name__, e)
        return EXIT_NUMERICAL
