"""Command-line frontend: builds geometries, certifies states, runs scans,
simulates the photonic experiment, reconstructs states, reproduces the
published tables/figure data, and self-verifies.

Exit codes: 0 success, 2 invalid input, 3 verification failure.
Every output file is paired with a ``<file>.manifest.json`` reproducibility
record; all randomness flows from ``--seed`` (OS entropy is drawn once and
recorded when the flag is absent).
"""

from __future__ import annotations

import argparse
import csv
import json
import math
import secrets
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .analytic import (
    CertificateReport,
    guessing_probability_analytic,
    hmin_extrema,
    min_entropy,
    scaling_table,
    scan_entropy_grid,
    trusted_min_entropy,
)
from .errors import (
    InfeasibleTargetError,
    InvalidGeometryError,
    TimetagParseError,
    UnphysicalStateError,
    UnsupportedGeometryError,
)
from .geometry import (
    NAMED_STATES,
    BlochVector,
    OutcomeStats,
    PovmGeometry,
    QubitState,
    born_probabilities,
    builtin_geometry,
    load_geometry,
    make_platonic_povm,
    make_polygon_povm,
)
from .manifest import RunManifest, manifest_path_for
from .mle import MleConfig, certify_from_counts, mle_reconstruct
from .oracle import oracle_pguess_lp
from .photonics import (
    CoincidenceConfig,
    SimConfig,
    count_coincidences,
    read_timetags,
    simulate_counts,
    simulate_timetags,
    write_timetags,
)
from .verify import run_verification

EXIT_OK = 0
EXIT_INVALID_INPUT = 2
EXIT_VERIFY_FAILED = 3


def _fmt(value) -> str:
    if isinstance(value, float):
        return format(value, ".9g")
    return str(value)


def write_csv(path, columns, rows) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(columns)
        for row in rows:
            writer.writerow([_fmt(v) for v in row])


def write_json(path, payload) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True)
        fh.write("\n")


def parse_state(text: str) -> BlochVector:
    """Parse ``--state``: a named polarization, ``hilbert:<rad>``, or rz,rx,ry.

    Hilbert-space rotations double on the Bloch sphere, so ``hilbert:x``
    maps to the ZX Bloch angle 2x from +z.
    """
    text = text.strip()
    if text in NAMED_STATES:
        return NAMED_STATES[text]
    if text.startswith("hilbert:"):
        angle = float(eval_angle(text[len("hilbert:"):]))
        return BlochVector.pure_zx(2.0 * angle)
    parts = [float(p) for p in text.split(",")]
    if len(parts) != 3:
        raise ValueError(
            f"state {text!r} is neither a named state ({sorted(NAMED_STATES)}), "
            "hilbert:<radians>, nor 'rz,rx,ry'"
        )
    rz, rx, ry = parts
    return BlochVector(rx, ry, rz)


def eval_angle(text: str) -> float:
    """Angles like '0.5', 'pi/8', '3pi/4' (radians)."""
    text = text.strip().lower().replace(" ", "")
    if "pi" in text:
        head, _, tail = text.partition("pi")
        factor = float(head) if head not in ("", "+", "-") else float(head + "1")
        denom = float(tail[1:]) if tail.startswith("/") else 1.0
        return factor * math.pi / denom
    return float(text)


def load_counts_csv(path) -> OutcomeStats:
    """Counts CSV: ``outcome_index,count`` rows (header optional)."""
    entries = {}
    with open(path, "r", encoding="utf-8") as fh:
        for line in fh:
            line = line.strip()
            if not line or line.startswith("#") or line.lower().startswith("outcome"):
                continue
            idx_str, val_str = line.split(",")[:2]
            entries[int(idx_str)] = float(val_str)
    if not entries:
        raise ValueError(f"no count rows found in {path}")
    n = max(entries) + 1
    values = np.zeros(n)
    for k, v in entries.items():
        values[k] = v
    if np.allclose(values, np.round(values)) and values.sum() > 1.5:
        return OutcomeStats.from_counts(values.astype(np.int64))
    return OutcomeStats.from_probs(values / values.sum())


def resolve_geometry(args) -> PovmGeometry:
    spec = args.geometry
    path = Path(spec)
    if path.suffix == ".json" or path.exists():
        return load_geometry(path)
    orientation = math.radians(getattr(args, "orientation_deg", 0.0) or 0.0)
    return builtin_geometry(spec, orientation=orientation)


def _resolve_seed(args) -> int:
    if getattr(args, "seed", None) is not None:
        return int(args.seed)
    return secrets.randbits(64)


def _out_path(args, name: str) -> Path:
    out_dir = Path(getattr(args, "out_dir", ".") or ".")
    out_dir.mkdir(parents=True, exist_ok=True)
    return out_dir / name


def _finish(manifest: RunManifest, outputs) -> None:
    for path in outputs:
        manifest.add_output(path)
    manifest.write(manifest_path_for(outputs[0]))


# ---------------------------------------------------------------------------
# Subcommand handlers
# ---------------------------------------------------------------------------


def cmd_povm(args) -> int:
    povm = resolve_geometry(args)
    out = _out_path(args, args.out or f"{povm.geometry_id}.json")
    povm.save(out)
    manifest = RunManifest("povm", {"geometry": args.geometry,
                                    "orientation_deg": args.orientation_deg}, None)
    _finish(manifest, [out])
    print(f"wrote {out}")
    return EXIT_OK


def _certificate_payload(report: CertificateReport) -> dict:
    payload = report.to_dict()
    if report.method == "analytic-upper-bound":
        payload["note"] = (
            "3D closed form is a conservative upper bound on p_guess; "
            "run the oracle subcommand for exact values"
        )
    return payload


def cmd_certify(args) -> int:
    povm = resolve_geometry(args)
    if args.state is not None:
        state = parse_state(args.state)
        report = guessing_probability_analytic(state, povm)
    else:
        stats = load_counts_csv(args.probs)
        report, _ = certify_from_counts(stats, povm)
    out = _out_path(args, args.out or "certificate.json")
    payload = _certificate_payload(report)
    if args.format == "csv":
        write_csv(out, sorted(k for k in payload if not isinstance(payload[k], list)),
                  [[payload[k] for k in sorted(payload) if not isinstance(payload[k], list)]])
    else:
        write_json(out, payload)
    manifest = RunManifest("certify", {"geometry": args.geometry, "state": args.state,
                                       "probs": args.probs}, None)
    if args.probs:
        manifest.add_input(args.probs)
    _finish(manifest, [out])
    print(f"H_min(SDI) = {report.hmin_sdi:.6f} bits ({report.method}); wrote {out}")
    return EXIT_OK


def cmd_oracle(args) -> int:
    povm = resolve_geometry(args)
    if args.state is not None:
        target = born_probabilities(parse_state(args.state), povm)
    else:
        target = load_counts_csv(args.probs)
    strategy = oracle_pguess_lp(target, povm, grid_size=args.grid, refine=args.refine)
    payload = {
        "p_guess": strategy.p_guess,
        "hmin_sdi": min_entropy(strategy.p_guess),
        "residual": strategy.residual,
        "geometry": povm.geometry_id,
        "grid_size": strategy.grid_size,
        "refined": strategy.refined,
        "strategy": [
            {
                "p": c.weight,
                "t": [c.direction.x, c.direction.y, c.direction.z],
                "k": c.outcome,
            }
            for c in strategy.components
        ],
    }
    out = _out_path(args, args.out or "oracle.json")
    write_json(out, payload)
    manifest = RunManifest("oracle", {"geometry": args.geometry, "state": args.state,
                                      "probs": args.probs, "grid": args.grid,
                                      "refine": args.refine}, None)
    if args.probs:
        manifest.add_input(args.probs)
    _finish(manifest, [out])
    print(f"oracle p_guess = {strategy.p_guess:.9f}; wrote {out}")
    return EXIT_OK


def cmd_scan(args) -> int:
    if args.solid:
        povm = make_platonic_povm(args.solid)
        domain = "sphere"
    else:
        povm = make_polygon_povm(args.n, orientation=math.radians(args.orientation_deg))
        domain = "disk"
    table = scan_entropy_grid(povm, args.res, domain)
    out = _out_path(args, args.out or f"scan_{povm.geometry_id}.csv")
    write_csv(out, table.columns, table.rows)
    manifest = RunManifest("scan", {"n": args.n, "solid": args.solid, "res": args.res,
                                    "orientation_deg": args.orientation_deg}, None)
    _finish(manifest, [out])
    print(f"wrote {out} ({len(table.rows)} rows)")
    return EXIT_OK


def cmd_bounds(args) -> int:
    table = scaling_table(args.nmax)
    out = _out_path(args, args.out or f"bounds_n{args.nmax}.csv")
    write_csv(out, table.columns, table.rows)
    manifest = RunManifest("bounds", {"nmax": args.nmax}, None)
    _finish(manifest, [out])
    print(f"wrote {out} ({len(table.rows)} rows)")
    return EXIT_OK


def cmd_simulate(args) -> int:
    povm = resolve_geometry(args)
    seed = _resolve_seed(args)
    cfg = SimConfig(
        true_state=QubitState.from_bloch(parse_state(args.state)),
        geometry=povm,
        pair_rate=args.pair_rate,
        n_tot=args.n_tot if args.duration is None else None,
        duration=args.duration,
        accidental_rate=args.accidentals,
        seed=seed,
    )
    outputs = []
    if args.timetags:
        stream = simulate_timetags(cfg)
        out = _out_path(args, args.out or "timetags.csv")
        write_timetags(stream, out)
        outputs.append(out)
        print(f"wrote {out} ({stream.n_records} records)")
    else:
        stats = simulate_counts(cfg)
        out = _out_path(args, args.out or "counts.csv")
        write_csv(out, ("outcome_index", "count"),
                  [(k, int(c)) for k, c in enumerate(stats.counts)])
        outputs.append(out)
        print(f"wrote {out} (N_tot = {stats.n_total})")
    manifest = RunManifest(
        "simulate",
        {"geometry": args.geometry, "state": args.state, "pair_rate": args.pair_rate,
         "n_tot": args.n_tot, "duration": args.duration,
         "accidentals": args.accidentals, "timetags": args.timetags},
        seed,
    )
    _finish(manifest, outputs)
    return EXIT_OK


def cmd_ingest(args) -> int:
    povm = resolve_geometry(args)
    stream = read_timetags(args.timetags, povm.n)
    cfg = CoincidenceConfig(window=args.window_ns * 1e-9)
    stats = count_coincidences(stream, cfg, povm.n)
    out = _out_path(args, args.out or "counts.csv")
    write_csv(out, ("outcome_index", "count"),
              [(k, int(c)) for k, c in enumerate(stats.counts)])
    manifest = RunManifest("ingest", {"geometry": args.geometry,
                                      "timetags": str(args.timetags),
                                      "window_ns": args.window_ns}, None)
    manifest.add_input(args.timetags)
    _finish(manifest, [out])
    print(f"wrote {out} (N_tot = {stats.n_total})")
    return EXIT_OK


def cmd_mle(args) -> int:
    povm = resolve_geometry(args)
    counts = load_counts_csv(args.counts)
    prepared = parse_state(args.true_state) if args.true_state else None
    report, fit = certify_from_counts(counts, povm, prepared=prepared)
    payload = {
        "certificate": _certificate_payload(report),
        "rho_hat": {
            "re": [[fit.rho_hat.matrix[i, j].real for j in (0, 1)] for i in (0, 1)],
            "im": [[fit.rho_hat.matrix[i, j].imag for j in (0, 1)] for i in (0, 1)],
        },
        "log_likelihood": fit.log_likelihood,
        "iterations": fit.iterations,
        "converged": fit.converged,
        "gradient_norm": fit.gradient_norm,
        "y_gauge_fixed": fit.y_gauge_fixed,
    }
    out = _out_path(args, args.out or "mle.json")
    write_json(out, payload)
    manifest = RunManifest("mle", {"geometry": args.geometry, "counts": str(args.counts),
                                   "true_state": args.true_state}, None)
    manifest.add_input(args.counts)
    _finish(manifest, [out])
    print(
        f"H_min(SDI) = {report.hmin_sdi:.6f} bits from {counts.n_total} counts; wrote {out}"
    )
    return EXIT_OK


# Prepared states per published table; T1's analyzer has its first outcome
# at |V>, hence the 180-degree polygon orientation.
TABLE_SPECS = {
    "T1": {
        "geometry": lambda: make_polygon_povm(3, orientation=math.pi),
        "states": [("H", "H"), ("V", "V"), ("+", "+"), ("L", "L")],
    },
    "T2": {
        "geometry": lambda: make_polygon_povm(4),
        "states": [("H", "H"), ("+", "+"), ("L", "L"), ("pi/8", "hilbert:pi/8")],
    },
    "T3": {
        "geometry": lambda: make_polygon_povm(6),
        "states": [("H", "H"), ("pi/6", "hilbert:pi/6"), ("L", "L"),
                   ("pi/12", "hilbert:pi/12")],
    },
    "T4": {
        "geometry": lambda: make_platonic_povm("octahedron"),
        "states": [("H", "H"), ("+", "+"), ("L", "L"), ("int", "int")],
    },
}

TABLE_COLUMNS = ("state", "hmin_theory", "hmin_estimated", "hmin_trusted",
                 "rho00", "rho01_re", "rho01_im", "rho11")


def run_table(table_id: str, seed: int, n_tot: int = 10_000_000,
              accidentals: float = 0.0) -> list[tuple]:
    """Simulate -> reconstruct -> certify the four preparations of one table."""
    spec = TABLE_SPECS[table_id]
    povm = spec["geometry"]()
    seeds = np.random.SeedSequence(seed).spawn(len(spec["states"]))
    rows = []
    for (label, state_text), child in zip(spec["states"], seeds):
        prepared = parse_state(state_text)
        cfg = SimConfig(
            true_state=QubitState.from_bloch(prepared),
            geometry=povm,
            n_tot=n_tot,
            accidental_rate=accidentals,
            seed=int(child.generate_state(1)[0]),
        )
        counts = simulate_counts(cfg)
        report, fit = certify_from_counts(counts, povm, prepared=prepared)
        m = fit.rho_hat.matrix
        rows.append(
            (
                label,
                float(report.hmin_theory),
                float(report.hmin_sdi),
                float(report.hmin_trusted),
                float(m[0, 0].real),
                float(m[0, 1].real),
                float(m[0, 1].imag),
                float(m[1, 1].real),
            )
        )
    return rows


def cmd_tables(args) -> int:
    seed = _resolve_seed(args)
    table_ids = [args.table] if args.table != "all" else list(TABLE_SPECS)
    outputs = []
    manifest = RunManifest(
        "tables", {"table": args.table, "n_tot": args.n_tot,
                   "accidentals": args.accidentals}, seed,
    )
    for i, table_id in enumerate(table_ids):
        rows = run_table(table_id, seed + i, n_tot=args.n_tot,
                         accidentals=args.accidentals)
        out = _out_path(args, f"table_{table_id}.csv")
        write_csv(out, TABLE_COLUMNS, rows)
        outputs.append(out)
        for row in rows:
            print(f"{table_id} {row[0]:>6}: H_t = {row[1]:.4f}  H_a = {row[2]:.4f}")
    _finish(manifest, outputs)
    return EXIT_OK


def cmd_figures(args) -> int:
    outputs = []
    manifest = RunManifest("figures", {"figure": args.figure, "res": args.res,
                                       "nmax": args.nmax}, None)
    fig = args.figure
    if fig in ("F1", "all"):
        table = scan_entropy_grid(make_polygon_povm(3), args.res, "disk")
        out = _out_path(args, "fig1_hmin_disk_n3.csv")
        write_csv(out, table.columns, table.rows)
        outputs.append(out)
    if fig in ("F2", "all"):
        for n in (4, 5, 6, 10):
            table = scan_entropy_grid(make_polygon_povm(n), args.res, "disk")
            out = _out_path(args, f"fig2_hmin_disk_n{n}.csv")
            write_csv(out, table.columns, table.rows)
            outputs.append(out)
    if fig in ("F3", "all"):
        table = scaling_table(args.nmax)
        out = _out_path(args, f"fig3_scaling_n{args.nmax}.csv")
        write_csv(out, table.columns, table.rows)
        outputs.append(out)
    if not outputs:
        raise ValueError(f"unknown figure id {args.figure!r}")
    _finish(manifest, outputs)
    for out in outputs:
        print(f"wrote {out}")
    return EXIT_OK


def cmd_verify(args) -> int:
    seed = _resolve_seed(args)
    checks, log_text = run_verification(
        seed=seed,
        threads=args.threads,
        geometry_path=args.geometry_file,
        planar_samples=args.planar_samples,
        ball_samples=args.ball_samples,
        grid=args.grid,
    )
    out = _out_path(args, "verify_log.txt")
    with open(out, "w", encoding="utf-8") as fh:
        fh.write(log_text)
    manifest = RunManifest(
        "verify",
        {"threads": args.threads, "geometry_file": args.geometry_file,
         "planar_samples": args.planar_samples, "ball_samples": args.ball_samples,
         "grid": args.grid},
        seed,
    )
    if args.geometry_file:
        manifest.add_input(args.geometry_file)
    _finish(manifest, [out])
    sys.stdout.write(log_text)
    return EXIT_OK if all(c.passed for c in checks) else EXIT_VERIFY_FAILED


# ---------------------------------------------------------------------------
# Parser
# ---------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="povmrand",
        description="Source-device-independent randomness certification with "
                    "symmetric qubit POVMs",
    )
    parser.add_argument("--version", action="version", version=f"povmrand {__version__}")
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--seed", type=int, default=None, help="64-bit master seed")
    common.add_argument("--threads", type=int, default=1)
    common.add_argument("--out-dir", dest="out_dir", default=".")
    common.add_argument("--format", choices=("json", "csv"), default="json")
    common.add_argument("--out", default=None, help="output file name")

    geo = argparse.ArgumentParser(add_help=False)
    geo.add_argument("--geometry", required=True,
                     help="builtin name (polygon3/4/6..., octahedron, ...) or JSON file")
    geo.add_argument("--orientation-deg", type=float, default=0.0,
                     help="in-plane rotation for builtin polygons")

    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("povm", parents=[common, geo], help="build + serialize a geometry")
    p.set_defaults(func=cmd_povm)

    p = sub.add_parser("certify", parents=[common, geo],
                       help="closed-form certificate for a state or measured stats")
    p.add_argument("--state", default=None, help="named state, hilbert:<rad>, or rz,rx,ry")
    p.add_argument("--probs", default=None, help="counts/probabilities CSV")
    p.set_defaults(func=cmd_certify)

    p = sub.add_parser("oracle", parents=[common, geo], help="LP guessing-probability oracle")
    p.add_argument("--state", default=None)
    p.add_argument("--probs", default=None)
    p.add_argument("--grid", type=int, default=720)
    p.add_argument("--refine", action=argparse.BooleanOptionalAction, default=True)
    p.set_defaults(func=cmd_oracle)

    p = sub.add_parser("scan", parents=[common], help="H_min grid over the disk/ball")
    p.add_argument("--n", type=int, default=None, help="polygon outcome count")
    p.add_argument("--solid", default=None, choices=(None, "tetrahedron", "octahedron",
                                                     "cube", "icosahedron", "dodecahedron"))
    p.add_argument("--res", type=int, default=200, help="grid points per axis")
    p.add_argument("--orientation-deg", type=float, default=0.0)
    p.set_defaults(func=cmd_scan)

    p = sub.add_parser("bounds", parents=[common], help="m_N / M_N scaling table")
    p.add_argument("--nmax", type=int, default=100)
    p.set_defaults(func=cmd_bounds)

    p = sub.add_parser("simulate", parents=[common, geo], help="simulate one run")
    p.add_argument("--state", required=True)
    p.add_argument("--n-tot", dest="n_tot", type=int, default=10_000_000)
    p.add_argument("--duration", type=float, default=None, help="seconds (overrides --n-tot)")
    p.add_argument("--pair-rate", dest="pair_rate", type=float, default=10_000.0)
    p.add_argument("--accidentals", type=float, default=0.0,
                   help="background rate per detector (Hz)")
    p.add_argument("--timetags", action="store_true",
                   help="emit raw timetags instead of counts")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("ingest", parents=[common, geo], help="timetags -> counts")
    p.add_argument("--timetags", required=True, help="CSV or .bin timetag file")
    p.add_argument("--window-ns", dest="window_ns", type=float, default=1.0)
    p.set_defaults(func=cmd_ingest)

    p = sub.add_parser("mle", parents=[common, geo],
                       help="maximum-likelihood reconstruction + certificate")
    p.add_argument("--counts", required=True)
    p.add_argument("--true-state", dest="true_state", default=None)
    p.set_defaults(func=cmd_mle)

    p = sub.add_parser("tables", parents=[common], help="reproduce published tables")
    p.add_argument("table", choices=("T1", "T2", "T3", "T4", "all"))
    p.add_argument("--n-tot", dest="n_tot", type=int, default=10_000_000)
    p.add_argument("--accidentals", type=float, default=0.0)
    p.set_defaults(func=cmd_tables)

    p = sub.add_parser("figures", parents=[common], help="regenerate figure datasets")
    p.add_argument("figure", choices=("F1", "F2", "F3", "all"))
    p.add_argument("--res", type=int, default=200)
    p.add_argument("--nmax", type=int, default=100)
    p.set_defaults(func=cmd_figures)

    p = sub.add_parser("verify", parents=[common], help="run the invariant audit suite")
    p.add_argument("--geometry-file", default=None,
                   help="additional geometry JSON to audit")
    p.add_argument("--planar-samples", type=int, default=40)
    p.add_argument("--ball-samples", type=int, default=60)
    p.add_argument("--grid", type=int, default=360)
    p.set_defaults(func=cmd_verify)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_INVALID_INPUT if exc.code not in (0, None) else 0
    try:
        return args.func(args)
    except (
        InvalidGeometryError,
        UnsupportedGeometryError,
        UnphysicalStateError,
        InfeasibleTargetError,
        TimetagParseError,
        ValueError,
        FileNotFoundError,
        KeyError,
    ) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVALID_INPUT


if __name__ == "__main__":
    sys.exit(main())
