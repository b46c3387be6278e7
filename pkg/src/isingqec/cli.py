"""Command-line entry point.

Exit codes: 0 success, 1 usage or invalid input, 2 runtime failure, 3 a
matching component exceeded the decoder's capacity.
"""

from __future__ import annotations

import argparse
import configparser
import csv
import json
import logging
import os
import re
import sys
import time
from dataclasses import asdict, dataclass, field
from pathlib import Path

from . import __version__
from ._backend import BACKEND
from .annealer import MODES, AnnealerConfig
from .decoder import DECODERS, decode
from .hamiltonian import (
    CoefficientSearchError,
    DEFAULT_GRID_BOUND,
    build_hobo,
    derive_conversion_coefficients,
    format_qubo,
    hobo_to_qubo,
    verify_conversion,
)
from .harness import (
    FitError,
    ExperimentConfig,
    TrialRecord,
    fit_scaling,
    fit_threshold,
    replay_trial,
    run_experiment,
    summarize,
    write_summary_csv,
    write_summary_json,
    write_trials_csv,
)
from .lattice import SECTORS, build_layout
from .mwpm import LARGE_COMPONENT_POLICIES, MAX_COMPONENT, MatchingCapacityError
from .noise import CONVENTIONS, MODELS, SyndromeFormatError, parse_syndrome

EXIT_OK, EXIT_USAGE, EXIT_RUNTIME, EXIT_CAPACITY = 0, 1, 2, 3
OUTPUT_DIR_ENV = "ISINGQEC_OUTPUT_DIR"
DEFAULT_OUTPUT_DIR = "isingqec-out"

log = logging.getLogger("isingqec")

PRESETS = {
    "phenomenological": {
        "model": "phenomenological", "distances": "5, 7", "ps": "0.02, 0.025, 0.03",
        "trials": "1000", "decoder": "da", "J": "1024", "h": "1", "z_only": "true",
    },
    "circuit_level": {
        "model": "circuit_level", "distances": "3, 5", "ps": "0.001, 0.002, 0.004",
        "trials": "1000", "decoder": "da", "J": "1024", "h": "1",
    },
    "y_detection": {
        "model": "code_capacity", "distances": "6", "ps": "0.1", "trials": "1000",
        "decoder": "da_y_coupled", "couplings": "0:0, 9:2, 9:5", "J": "10240", "h": "10",
        "t_max": "50", "t_min": "1",
    },
}


class UsageError(Exception):
    """Bad input from the user; reported with exit code 1."""


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


# -- configuration files ---------------------------------------------------------

EXPERIMENT_KEYS = {
    "preset", "model", "distances", "ps", "trials", "decoder", "couplings", "J", "h",
    "rounds", "convention", "z_only", "master_seed", "max_component", "large_components",
}
ANNEALER_KEYS = {"mode", "num_replicas", "t_max", "t_min", "sweeps", "exchange_interval", "stale_sweeps"}


def _key_lines(text: str) -> dict[tuple[str, str], int]:
    """Line number of every ``key = value`` entry, by (section, key)."""
    lines, section = {}, None
    for no, raw in enumerate(text.splitlines(), start=1):
        stripped = raw.strip()
        m = re.match(r"\[([^\]]+)\]", stripped)
        if m:
            section = m.group(1).strip()
        elif section and stripped and stripped[0] not in "#;":
            key = re.split(r"[=:]", stripped, maxsplit=1)[0].strip()
            lines[(section, key.lower())] = no
    return lines


def _split(value: str) -> list[str]:
    return [v.strip() for v in value.split(",") if v.strip()]


def load_config(text: str, source: str = "<config>") -> ExperimentConfig:
    """Parse an INI-style experiment description.

    Sections ``[experiment]`` and optional ``[annealer]``; ``preset = name``
    pulls in one of :data:`PRESETS` and later keys override it.  Errors name
    the offending line.
    """
    parser = configparser.ConfigParser(interpolation=None)
    parser.optionxform = str
    try:
        parser.read_string(text, source=source)
    except configparser.Error as exc:
        raise UsageError(str(exc)) from exc
    where = _key_lines(text)
    where_lower = {(s, k.lower()): n for (s, k), n in where.items()}

    def fail(section, key, message):
        line = where_lower.get((section, key.lower()))
        loc = f"{source}:{line}" if line else source
        raise UsageError(f"{loc}: [{section}] {key}: {message}")

    for section in parser.sections():
        if section not in ("experiment", "annealer"):
            raise UsageError(f"{source}: unknown section [{section}]")
    if not parser.has_section("experiment"):
        raise UsageError(f"{source}: missing [experiment] section")
    exp = dict(parser.items("experiment"))
    ann = dict(parser.items("annealer")) if parser.has_section("annealer") else {}
    for key in exp:
        if key not in EXPERIMENT_KEYS:
            fail("experiment", key, "unknown key")
    for key in ann:
        if key not in ANNEALER_KEYS:
            fail("annealer", key, "unknown key")
    values = {}
    if "preset" in exp:
        if exp["preset"] not in PRESETS:
            fail("experiment", "preset", f"unknown preset; choose from {', '.join(PRESETS)}")
        values.update(PRESETS[exp["preset"]])
    values.update({k: v for k, v in exp.items() if k != "preset"})
    ann_values = {k: values.pop(k) for k in list(values) if k in ANNEALER_KEYS}
    ann_values.update(ann)

    def conv(section, key, raw, kind):
        try:
            return kind(raw)
        except (TypeError, ValueError) as exc:
            fail(section, key, f"cannot read {raw!r} ({exc})")

    def as_bool(raw):
        low = raw.strip().lower()
        if low in ("1", "true", "yes", "on"):
            return True
        if low in ("0", "false", "no", "off"):
            return False
        raise ValueError("expected true or false")

    def as_couplings(raw):
        out = []
        for item in _split(raw):
            a, b = item.split(":")
            out.append((int(a), int(b)))
        return tuple(out)

    kinds = {
        "model": str, "decoder": str, "convention": str,
        "distances": lambda r: tuple(int(v) for v in _split(r)),
        "ps": lambda r: tuple(float(v) for v in _split(r)),
        "trials": int, "J": int, "h": int, "master_seed": int, "max_component": int,
        "rounds": lambda r: int(r) if r.strip() else None,
        "z_only": as_bool, "couplings": as_couplings, "large_components": str,
    }
    for key in ("model", "distances", "ps", "trials"):
        if key not in values:
            raise UsageError(f"{source}: [experiment] missing required key {key!r}")
    kwargs = {k: conv("experiment", k, v, kinds[k]) for k, v in values.items()}
    ann_kinds = {"mode": str, "num_replicas": int, "t_max": float, "t_min": float,
                 "sweeps": int, "exchange_interval": int, "stale_sweeps": int}
    ann_kwargs = {k: conv("annealer", k, v, ann_kinds[k]) for k, v in ann_values.items()}
    checks = [
        ("model", lambda v: v in MODELS, f"must be one of {', '.join(MODELS)}"),
        ("decoder", lambda v: v in DECODERS, f"must be one of {', '.join(DECODERS)}"),
        ("convention", lambda v: v in CONVENTIONS, f"must be one of {', '.join(CONVENTIONS)}"),
        ("large_components", lambda v: v in LARGE_COMPONENT_POLICIES,
         f"must be one of {', '.join(LARGE_COMPONENT_POLICIES)}"),
        ("trials", lambda v: v >= 1, "must be at least 1"),
        ("distances", lambda v: len(v) > 0 and all(d >= 2 for d in v), "must list distances >= 2"),
        ("ps", lambda v: len(v) > 0 and all(0 <= p <= 1 for p in v), "must list rates in [0, 1]"),
        ("couplings", lambda v: len(v) > 0 and all(a >= 0 and b >= 0 for a, b in v), "must list Ja:Jb pairs >= 0"),
    ]
    for key, ok, message in checks:
        if key in kwargs and not ok(kwargs[key]):
            fail("experiment", key, message)
    if "mode" in ann_kwargs and ann_kwargs["mode"] not in MODES:
        fail("annealer", "mode", f"must be one of {', '.join(MODES)}")
    try:
        annealer = AnnealerConfig(**ann_kwargs)
    except ValueError as exc:
        raise UsageError(f"{source}: [annealer] {exc}") from exc
    try:
        return ExperimentConfig(annealer=annealer, **kwargs)
    except ValueError as exc:
        raise UsageError(f"{source}: [experiment] {exc}") from exc


# -- manifest --------------------------------------------------------------------------

@dataclass
class RunManifest:
    config: dict
    version: str
    master_seed: int
    backend: str
    outputs: dict[str, str] = field(default_factory=dict)
    started: str = ""
    finished: str = ""

    def write(self, path: Path) -> None:
        path.write_text(json.dumps(asdict(self), indent=2, sort_keys=True) + "\n")

    @classmethod
    def read(cls, path) -> "RunManifest":
        return cls(**json.loads(Path(path).read_text()))


def _now() -> str:
    return time.strftime("%Y-%m-%dT%H:%M:%S%z")


def _output_dir(arg: str | None) -> Path:
    out = Path(arg or os.environ.get(OUTPUT_DIR_ENV) or DEFAULT_OUTPUT_DIR)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _annealer_from_args(args, base: AnnealerConfig | None = None) -> AnnealerConfig:
    base = base or AnnealerConfig()
    overrides = {
        k: getattr(args, k) for k in ("mode", "num_replicas", "t_max", "t_min", "sweeps",
                                      "exchange_interval", "stale_sweeps")
        if getattr(args, k, None) is not None
    }
    if getattr(args, "seed", None) is not None:
        overrides["seed"] = args.seed
    try:
        return AnnealerConfig(**{**asdict(base), **overrides})
    except ValueError as exc:
        raise UsageError(str(exc)) from exc


# -- commands --------------------------------------------------------------------------

def cmd_simulate(args) -> int:
    if args.config:
        path = Path(args.config)
        try:
            text = path.read_text()
        except OSError as exc:
            raise UsageError(f"cannot read config: {exc}") from exc
        config = load_config(text, str(path))
    elif args.preset:
        config = load_config(f"[experiment]\npreset = {args.preset}\n", f"preset:{args.preset}")
    else:
        raise UsageError("simulate needs a config file or --preset")
    overrides = {}
    if args.trials is not None:
        overrides["trials"] = args.trials
    if args.master_seed is not None:
        overrides["master_seed"] = args.master_seed
    if overrides:
        try:
            config = ExperimentConfig.from_dict({**config.to_dict(), **overrides})
        except ValueError as exc:
            raise UsageError(str(exc)) from exc
    if args.jobs < 1:
        raise UsageError("--jobs must be positive")
    out = _output_dir(args.output_dir)
    manifest = RunManifest(config=config.to_dict(), version=__version__,
                           master_seed=config.master_seed, backend=BACKEND, started=_now())
    log.info("running %d points x %d trials into %s", len(config.points()), config.trials, out)
    records = run_experiment(config, jobs=args.jobs)
    rows = summarize(records)
    fit = None
    if len(config.distances) >= 2 and len(config.ps) >= 2:
        try:
            fit = fit_threshold([(r["d"], r["p"], r["P_L"], r["SE"]) for r in rows])
        except FitError as exc:
            log.info("no threshold fit: %s", exc)
    paths = {"trials": out / "trials.csv", "summary_csv": out / "summary.csv",
             "summary_json": out / "summary.json"}
    write_trials_csv(records, paths["trials"])
    write_summary_csv(rows, paths["summary_csv"])
    write_summary_json(config, rows, paths["summary_json"], fit)
    manifest.outputs = {k: str(v) for k, v in paths.items()}
    manifest.finished = _now()
    manifest.write(out / "manifest.json")
    for r in rows:
        print(f"d={r['d']} p={r['p']:g} Ja={r['Ja']} Jb={r['Jb']} "
              f"P_L={r['P_L']:.5f} SE={r['SE']:.5f} mean_iterations={r['mean_iterations']:.1f}")
    if fit is not None:
        print(f"threshold fit: c1={fit.c1:.4g} c2={fit.c2:.4g} p_th={fit.p_th:.4g}")
    print(f"wrote {out / 'manifest.json'}")
    return EXIT_OK


def cmd_replay(args) -> int:
    try:
        manifest = RunManifest.read(args.manifest)
        config = ExperimentConfig.from_dict(manifest.config)
    except (OSError, ValueError, TypeError, KeyError) as exc:
        raise UsageError(f"cannot load manifest: {exc}") from exc
    record = replay_trial(config, args.d, args.p, args.trial, (args.Ja, args.Jb))
    writer = csv.writer(sys.stdout, lineterminator="\n")
    writer.writerow(TrialRecord.columns())
    writer.writerow([int(v) if isinstance(v, bool) else v for v in record.row()])
    return EXIT_OK


def _read_syndrome(path):
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise UsageError(f"cannot read syndrome file: {exc}") from exc
    try:
        return parse_syndrome(text)
    except SyndromeFormatError as exc:
        raise UsageError(f"{path}: {exc}") from exc


def cmd_decode(args) -> int:
    syndrome = _read_syndrome(args.syndrome)
    layout = build_layout(syndrome.d)
    config = _annealer_from_args(args)
    try:
        outcome = decode(layout, syndrome, args.decoder, config=config, J=args.J, h=args.h,
                         y_coupling=(args.Ja, args.Jb), max_component=args.max_component,
                         large_components=args.large_components)
    except ValueError as exc:
        raise UsageError(str(exc)) from exc
    lines = ["# isingqec detection v1", f"d {syndrome.d}", f"layers {syndrome.layers}",
             f"feasible {int(outcome.feasible)}", f"energy {outcome.energy}"]
    for sector in SECTORS:
        sc = outcome.correction.sectors[sector]
        lines.extend(f"data {sector} {t} {q}" for t, q in sc.data_events())
        lines.extend(f"meas {sector} {g} {c}" for g, c in sc.meas_events())
    text = "\n".join(lines) + "\n"
    if args.output:
        Path(args.output).write_text(text)
    print(f"feasible: {outcome.feasible}")
    print(f"energy: {outcome.energy}")
    print(f"events: {outcome.correction.num_events()}")
    print(f"iterations_to_best: {outcome.iterations_to_best}")
    sys.stdout.write("\n".join(lines[5:]) + ("\n" if len(lines) > 5 else ""))
    return EXIT_OK


def cmd_derive_coeffs(args) -> int:
    if not 2 <= args.degree <= 6:
        raise UsageError("degree must lie in 2..6")
    if args.b not in (1, -1):
        raise UsageError("b must be +1 or -1")
    try:
        coeffs = derive_conversion_coefficients(args.degree, args.b, args.grid_bound)
    except CoefficientSearchError as exc:
        print(f"search failed within grid bound {args.grid_bound}: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    cases = verify_conversion(args.degree, args.b, coeffs)
    print(", ".join(str(c) for c in coeffs))
    print(f"verified {cases} assignments (2^{args.degree + 3})")
    return EXIT_OK


def _read_rows(path):
    try:
        with open(path, newline="") as fh:
            lines = [line for line in fh if not line.startswith("#")]
    except OSError as exc:
        raise UsageError(f"cannot read {path}: {exc}") from exc
    return list(csv.DictReader(lines))


def _column(rows, name):
    try:
        return [float(r[name]) for r in rows]
    except KeyError as exc:
        raise UsageError(f"missing column {name!r}") from exc
    except ValueError as exc:
        raise UsageError(f"non-numeric value in column {name!r}: {exc}") from exc


def cmd_fit_threshold(args) -> int:
    rows = _read_rows(args.csv)
    if args.decoder:
        rows = [r for r in rows if r.get("decoder") == args.decoder]
    d, p = _column(rows, "d"), _column(rows, "p")
    pl, se = _column(rows, args.column), _column(rows, args.se_column)
    try:
        fit = fit_threshold(list(zip((int(v) for v in d), p, pl, se)))
    except FitError as exc:
        print(f"fit failed: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    print(f"c1 {fit.c1:.6g}")
    print(f"c2 {fit.c2:.6g}")
    print(f"p_th {fit.p_th:.6g}")
    print(f"residual_norm {fit.residual_norm:.6g}")
    return EXIT_OK


def cmd_fit_scaling(args) -> int:
    rows = _read_rows(args.csv)
    if args.p is not None:
        rows = [r for r in rows if "p" in r and abs(float(r["p"]) - args.p) < 1e-12]
    if rows and "N_d" in rows[0]:
        sizes = _column(rows, "N_d")
    else:
        sizes = [d * d + (d - 1) ** 2 for d in _column(rows, "d")]
    iters = _column(rows, args.column)
    points = [(n, it) for n, it in zip(sizes, iters)
              if (args.min_size is None or n >= args.min_size) and (args.max_size is None or n <= args.max_size)]
    try:
        fit = fit_scaling(points)
    except FitError as exc:
        print(f"fit failed: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    print(f"exponent {fit.exponent:.6g}")
    print(f"residual_norm {fit.residual_norm:.6g}")
    print(f"exponential_rate {fit.exponential_rate:.6g}")
    print(f"exponential_residual_norm {fit.exponential_residual_norm:.6g}")
    print("polynomial fits better" if fit.prefers_power_law else "exponential fits better")
    return EXIT_OK


def cmd_export_qubo(args) -> int:
    syndrome = _read_syndrome(args.syndrome)
    layout = build_layout(syndrome.d)
    coupling = (args.Ja, args.Jb) if args.y_coupling else None
    try:
        qubo = hobo_to_qubo(build_hobo(layout, syndrome, args.J, args.h, coupling))
    except ValueError as exc:
        raise UsageError(str(exc)) from exc
    text = format_qubo(qubo)
    if args.output:
        Path(args.output).write_text(text)
        print(f"wrote {qubo.num_vars} variables to {args.output}")
    else:
        sys.stdout.write(text)
    return EXIT_OK


# -- parser ----------------------------------------------------------------------------------

def _add_annealer_flags(p):
    g = p.add_argument_group("annealer")
    g.add_argument("--mode", choices=MODES)
    g.add_argument("--num-replicas", type=int)
    g.add_argument("--t-max", type=float)
    g.add_argument("--t-min", type=float)
    g.add_argument("--sweeps", type=int)
    g.add_argument("--exchange-interval", type=int)
    g.add_argument("--stale-sweeps", type=int)
    g.add_argument("--seed", type=int, default=0)


def _add_energy_flags(p):
    p.add_argument("--J", type=int, default=1024, help="constraint strength")
    p.add_argument("--h", type=int, default=1, help="field strength")
    p.add_argument("--Ja", type=int, default=0)
    p.add_argument("--Jb", type=int, default=0)


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="isingqec", description="Surface-code decoding with an annealed Ising model.")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__} ({BACKEND} kernels)")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("simulate", help="run an experiment grid")
    p.add_argument("config", nargs="?")
    p.add_argument("--preset", choices=sorted(PRESETS))
    p.add_argument("--output-dir", help=f"defaults to ${OUTPUT_DIR_ENV} or ./{DEFAULT_OUTPUT_DIR}")
    p.add_argument("--jobs", type=int, default=1)
    p.add_argument("--trials", type=int)
    p.add_argument("--master-seed", type=int)
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("replay", help="re-run one trial of a finished run")
    p.add_argument("manifest")
    p.add_argument("--d", type=int, required=True)
    p.add_argument("--p", type=float, required=True)
    p.add_argument("--trial", type=int, required=True)
    p.add_argument("--Ja", type=int, default=0)
    p.add_argument("--Jb", type=int, default=0)
    p.set_defaults(func=cmd_replay)

    p = sub.add_parser("decode", help="decode one syndrome file")
    p.add_argument("syndrome")
    p.add_argument("--decoder", choices=DECODERS, default="da")
    p.add_argument("--output", help="write detected events here")
    p.add_argument("--max-component", type=int, default=MAX_COMPONENT,
                   help="largest defect cluster the subset DP solves")
    p.add_argument("--large-components", choices=LARGE_COMPONENT_POLICIES, default="error",
                   help="fail (exit 3) or use blossom matching above the cap")
    _add_energy_flags(p)
    _add_annealer_flags(p)
    p.set_defaults(func=cmd_decode)

    p = sub.add_parser("derive-coeffs", help="search quadratization coefficients")
    p.add_argument("degree", type=int)
    p.add_argument("b", type=int)
    p.add_argument("--grid-bound", type=int, default=DEFAULT_GRID_BOUND)
    p.set_defaults(func=cmd_derive_coeffs)

    p = sub.add_parser("fit-threshold", help="fit P_L = c1 (p/p_th)^(c2 d_e) to a summary CSV")
    p.add_argument("csv")
    p.add_argument("--column", default="P_L")
    p.add_argument("--se-column", default="SE")
    p.add_argument("--decoder")
    p.set_defaults(func=cmd_fit_threshold)

    p = sub.add_parser("fit-scaling", help="power-law exponent of iterations against N_d")
    p.add_argument("csv")
    p.add_argument("--column", default="mean_iterations")
    p.add_argument("--min-size", type=float)
    p.add_argument("--max-size", type=float)
    p.add_argument("--p", type=float, help="keep only rows at this error rate")
    p.set_defaults(func=cmd_fit_scaling)

    p = sub.add_parser("export-qubo", help="write the QUBO for a syndrome file")
    p.add_argument("syndrome")
    p.add_argument("--output")
    p.add_argument("--y-coupling", action="store_true", help="add the Ja/Jb coupling between sectors")
    _add_energy_flags(p)
    p.set_defaults(func=cmd_export_qubo)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(message)s")
    try:
        return args.func(args)
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except MatchingCapacityError as exc:
        print(f"capacity exceeded: {exc}", file=sys.stderr)
        return EXIT_CAPACITY
    except Exception as exc:  # noqa: BLE001 - last-resort reporting
        log.debug("failure", exc_info=True)
        print(f"failed: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
