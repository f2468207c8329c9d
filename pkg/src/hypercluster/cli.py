"""Command-line driver: ``hypercluster {state,verify,scan,tomo,calibrate}``."""

from __future__ import annotations

import argparse
import io
import json
import os
import sys
import tempfile
from pathlib import Path

import numpy as np

from . import __version__, apparatus, calibration, qcore, states, tomo, verify
from .states import NoiseParams


class CliError(Exception):
    pass


def parse_noise(text: str) -> NoiseParams:
    """``v=0.9,mu=0.88[,z=0.01]`` -> NoiseParams."""
    names = {"v": "v_pol", "mu": "mu_mom", "z": "z_err"}
    kwargs = {}
    for part in filter(None, text.split(",")):
        key, _, val = part.partition("=")
        key = key.strip()
        if key not in names or not val:
            raise argparse.ArgumentTypeError(f"bad noise term {part!r}; expected v=..,mu=..[,z=..]")
        try:
            kwargs[names[key]] = float(val)
        except ValueError as exc:
            raise argparse.ArgumentTypeError(f"bad number in {part!r}") from exc
    if "v_pol" not in kwargs or "mu_mom" not in kwargs:
        raise argparse.ArgumentTypeError("noise needs at least v= and mu=")
    try:
        return NoiseParams(**kwargs)
    except ValueError as exc:
        raise argparse.ArgumentTypeError(str(exc)) from exc


def parse_seed(text: str) -> int:
    try:
        seed = int(text)
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"seed must be an integer, got {text!r}") from exc
    if not 0 <= seed < 2**64:
        raise argparse.ArgumentTypeError("seed must lie in [0, 2**64)")
    return seed


def _common(p: argparse.ArgumentParser) -> None:
    src = p.add_mutually_exclusive_group()
    src.add_argument("--ideal", action="store_true", help="noiseless cluster state (default)")
    src.add_argument("--noise", type=parse_noise, metavar="v=..,mu=..[,z=..]", help="explicit noise parameters")
    src.add_argument("--calibrated", action="store_true", help="noise fitted to the measured correlations")
    p.add_argument("--table", type=Path, help="JSON targets for --calibrated (default: bundled table)")
    p.add_argument("--seed", type=parse_seed, default=0)
    p.add_argument("--out", type=Path, help="write output here instead of stdout")
    p.add_argument("--format", choices=("json", "csv", "table"), default="table")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="hypercluster", description=__doc__)
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("state", help="print state amplitudes and stabilizer checks")
    _common(p)
    p.add_argument("--logical", action="store_true", help="also show the logical-basis form")

    p = sub.add_parser("verify", help="witness, fidelity bound and AVN test")
    _common(p)
    p.add_argument("--from-table", type=Path, metavar="JSON", help="pure arithmetic on supplied term values")
    p.add_argument("--counts", type=float, help="simulate this many coincidences per setting")
    p.add_argument("--s-sigma", type=float, help="override the uncertainty used for the AVN significance")

    p = sub.add_parser("scan", help="delay scan of the path interference")
    _common(p)
    p.add_argument("--start", type=float, default=-150.0, help="first delay, um")
    p.add_argument("--stop", type=float, default=150.0, help="last delay, um")
    p.add_argument("--points", type=int, default=121)
    p.add_argument("--bandwidth", type=float, default=6.0, help="filter bandwidth, nm")

    p = sub.add_parser("tomo", help="sector polarization tomography")
    _common(p)
    p.add_argument("--counts", type=float, default=tomo.DEFAULT_MEAN_TOTAL, help="mean counts per projector")
    p.add_argument("--replicas", type=int, default=100)
    p.add_argument("--workers", type=int, default=1)
    p.add_argument("--no-shot-noise", action="store_true", help="use expected counts instead of Poisson draws")

    p = sub.add_parser("calibrate", help="fit the noise model")
    _common(p)
    p.add_argument("--table-only", action="store_true", help="fit the table correlations only")
    return parser


# -- helpers ------------------------------------------------------------------

def _targets(args) -> list[calibration.Target]:
    if args.table is not None:
        if not args.table.exists():
            raise CliError(f"calibration file not found: {args.table}")
        return calibration.load_targets(args.table)
    return calibration.table1_targets()


def _calibrate(args, table_only: bool = False) -> calibration.CalibrationResult:
    targets = _targets(args)
    if not table_only:
        targets = targets + calibration.reported_targets()
    return calibration.calibrate_noise(targets)


def resolve_noise(args) -> tuple[str, NoiseParams]:
    if args.noise is not None:
        return "noise", args.noise
    if args.calibrated:
        return "calibrated", _calibrate(args).params
    return "ideal", NoiseParams.ideal()


def header(args, source: str, params: NoiseParams | None) -> dict:
    return {
        "command": args.command,
        "version": __version__,
        "seed": args.seed,
        "noise_source": source,
        "noise": params.as_dict() if params is not None else None,
    }


def _text_header(h: dict) -> str:
    noise = h["noise"]
    noise_txt = ", ".join(f"{k}={v:.6g}" for k, v in noise.items()) if noise else "n/a"
    return (
        f"# hypercluster {h['version']} {h['command']}  seed={h['seed']}  "
        f"source={h['noise_source']}  noise: {noise_txt}\n"
    )


def write_output(text: str, out: Path | None) -> None:
    if out is None:
        sys.stdout.write(text)
        return
    out = Path(out)
    out.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=out.parent, prefix=f".{out.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w") as fh:
            fh.write(text)
        os.replace(tmp, out)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _fmt_amp(a: complex) -> str:
    re, im = a.real + 0.0, a.imag + 0.0  # drop negative zero
    if abs(im) < 1e-12:
        return f"{re:+.6f}"
    return f"{re:+.6f}{im:+.6f}j"


def _amplitude_rows(psi: np.ndarray) -> list[dict]:
    return [
        {"basis": "".join(map(str, qcore.basis_bits(k))), "re": float(a.real), "im": float(a.imag)}
        for k, a in enumerate(psi)
    ]


# -- commands ---------------------------------------------------------------------

def cmd_state(args) -> str:
    source, params = resolve_noise(args)
    h = header(args, source, params)
    xi = states.hyperentangled_state()
    c4 = states.cluster_state()
    logical = states.logical_map(c4)
    checks = verify.stabilizer_check(c4)
    rho = states.apply_noise(c4, params)
    evals = np.linalg.eigvalsh(rho)
    summary = {
        "trace": float(np.trace(rho).real),
        "purity": float(np.real(np.trace(rho @ rho))),
        "min_eigenvalue": float(evals.min()),
        "fidelity_c4": qcore.fidelity(rho, c4),
        "witness": verify.witness(rho).value,
        "projector_witness": verify.projector_witness(rho),
    }
    if args.format == "json":
        doc = {
            "header": h,
            "hyperentangled": _amplitude_rows(xi),
            "cluster": _amplitude_rows(c4),
            "stabilizers": [vars(c) for c in checks],
            "density_summary": summary,
        }
        if args.logical:
            doc["logical"] = _amplitude_rows(logical)
        return json.dumps(doc, indent=2) + "\n"
    buf = io.StringIO()
    buf.write(_text_header(h))
    cols = ["hyper", "cluster"] + (["logical"] if args.logical else [])
    vecs = [xi, c4] + ([logical] if args.logical else [])
    if args.format == "csv":
        buf.write("basis," + ",".join(cols) + "\n")
        for k in range(qcore.DIM):
            bits = "".join(map(str, qcore.basis_bits(k)))
            buf.write(bits + "," + ",".join(_fmt_amp(v[k]) for v in vecs) + "\n")
        return buf.getvalue()
    buf.write(f"{'q1q2q3q4':<10}" + "".join(f"{c:>14}" for c in cols) + "\n")
    for k in range(qcore.DIM):
        bits = "".join(map(str, qcore.basis_bits(k)))
        buf.write(f"{bits:<10}" + "".join(f"{_fmt_amp(v[k]):>14}" for v in vecs) + "\n")
    buf.write("\nstabilizer checks on the cluster state\n")
    for c in checks:
        buf.write(f"  {c.observable:<14} lambda={c.eigenvalue:+d}  <O>={c.expectation:+.6f}  residual={c.residual:.2e}\n")
    buf.write("\nnoisy density matrix\n")
    for k, v in summary.items():
        buf.write(f"  {k:<18} {v:+.3e}\n" if k == "min_eigenvalue" else f"  {k:<18} {v:+.6f}\n")
    return buf.getvalue()


def cmd_verify(args) -> str:
    if args.from_table is not None:
        if args.noise is not None or args.calibrated:
            raise CliError("--from-table cannot be combined with a noise source")
        if not args.from_table.exists():
            raise CliError(f"table file not found: {args.from_table}")
        entries = json.loads(args.from_table.read_text())
        source_terms = verify.table_source(entries)
        h = header(args, "table", None)
        h["table"] = str(args.from_table)
        values = {o: source_terms[o][0] for o in source_terms}
        sigmas = {o: source_terms[o][1] for o in source_terms}
    else:
        source, params = resolve_noise(args)
        h = header(args, source, params)
        rho = states.apply_noise(states.cluster_state(), params)
        if args.counts:
            h["counts_per_setting"] = args.counts
            source_terms = verify.simulate_counts_source(rho, verify.TABLE_ORDER, args.counts, args.seed)
        else:
            source_terms = rho
        vals, sigs = verify.term_values(source_terms, verify.TABLE_ORDER)
        values = dict(zip(verify.TABLE_ORDER, vals))
        sigmas = dict(zip(verify.TABLE_ORDER, sigs))

    w = verify.witness(source_terms)
    s = verify.avn(source_terms, sigma=args.s_sigma)
    if args.format == "json":
        extra = {"header": h, "table": [{"observable": o, "value": values[o], "sigma": sigmas.get(o, 0.0)} for o in values]}
        return verify.reports_json(w, s, extra) + "\n"
    if args.format == "csv":
        lines = [_text_header(h).rstrip("\n"), "observable,value,sigma"]
        lines += [f"{o},{values[o]:.10g},{sigmas.get(o, 0.0):.10g}" for o in values]
        lines += [
            f"witness,{w.value:.10g},{w.sigma:.10g}",
            f"fidelity_bound,{w.fidelity_bound:.10g},",
            f"S,{s.value:.10g},{s.sigma:.10g}",
            f"sigmas_above_classical,{s.sigmas_above_classical:.10g},",
        ]
        return "\n".join(lines) + "\n"
    out = [_text_header(h), verify.format_table(values, sigmas), ""]
    out.append(f"Tr[W rho]        = {w.value:+.4f} +- {w.sigma:.4f}")
    out.append(f"fidelity bound   >= {w.fidelity_bound:.5f}")
    out.append(f"S                = {s.value:.4f} +- {s.sigma:.4f}  (classical bound {s.classical_bound:g}, quantum {s.quantum_value:g})")
    out.append(f"violation        = {s.sigmas_above_classical:.1f} standard deviations")
    out.append(f"source           : {w.provenance}")
    return "\n".join(out) + "\n"


def cmd_scan(args) -> str:
    if args.points < 2 or not args.stop > args.start:
        raise CliError("empty delay range: need --stop > --start and --points >= 2")
    source, params = resolve_noise(args)
    h = header(args, source, params)
    rho = states.apply_noise(states.cluster_state(), params)
    tau_fs, fwhm_um = apparatus.coherence_envelope(args.bandwidth)
    delays = np.linspace(args.start, args.stop, args.points)
    rows = apparatus.scan_table(rho, delays, fwhm_um=fwhm_um)
    rate_h = np.array([r["rate_H"] for r in rows])
    vis_fit, fwhm_fit = apparatus.fit_scan(delays, rate_h)
    visibility = apparatus.scan_visibility(rho, "H")
    h.update({
        "coherence_time_fs": tau_fs,
        "envelope_fwhm_um": fwhm_um,
        "fitted_visibility_H": vis_fit,
        "fitted_fwhm_um": fwhm_fit,
        "average_visibility": visibility,
    })
    if args.format == "json":
        return json.dumps({"header": h, "rows": rows}, indent=2) + "\n"
    summary = (
        f"# coherence time {tau_fs:.1f} fs, envelope FWHM {fwhm_um:.2f} um\n"
        f"# fitted H trace: visibility {vis_fit:+.4f}, FWHM {fwhm_fit:.2f} um; "
        f"average dip/peak visibility {visibility:.4f}\n"
    )
    return _text_header(h) + summary + apparatus.scan_csv(rows)


def cmd_tomo(args) -> str:
    if args.counts <= 0:
        raise CliError("--counts must be positive")
    source, params = resolve_noise(args)
    h = header(args, source, params)
    h["mean_counts_per_projector"] = args.counts
    h["replicas"] = args.replicas
    h["shot_noise"] = not args.no_shot_noise
    rho = states.apply_noise(states.cluster_state(), params)
    rl, lr = tomo.reconstruct_sectors(rho, mean_total=args.counts, seed=args.seed,
                                      replicas=args.replicas, workers=args.workers,
                                      shot_noise=not args.no_shot_noise)
    if args.format == "json":
        return json.dumps({"header": h, "rl": rl.as_dict(), "lr": lr.as_dict()}, indent=2) + "\n"
    out = [_text_header(h).rstrip("\n")]
    if args.format == "csv":
        out.append("sector,target,fidelity,fidelity_sigma,iterations,log_likelihood")
        for name, r in (("rl", rl), ("lr", lr)):
            out.append(f"{name},{r.target},{r.fidelity:.6f},{r.fidelity_sigma:.6f},{r.iterations},{r.log_likelihood:.6f}")
        return "\n".join(out) + "\n"
    for name, r in (("r_A l_B", rl), ("l_A r_B", lr)):
        out.append(f"sector {name}: F({r.target}) = {r.fidelity:.4f} +- {r.fidelity_sigma:.4f}  "
                   f"({r.iterations} iterations, converged={r.converged})")
        out.append("  Re rho =")
        out.extend("    " + " ".join(f"{x:+.4f}" for x in row) for row in r.rho.real)
    out.append("  error bars: Poisson bootstrap only")
    return "\n".join(out) + "\n"


def cmd_calibrate(args) -> str:
    result = _calibrate(args, table_only=args.table_only)
    h = header(args, "calibrated", result.params)
    if args.format == "json":
        return json.dumps({"header": h, **result.as_dict()}, indent=2) + "\n"
    lines = [_text_header(h).rstrip("\n"), "observable,target,model,residual"]
    sep = "," if args.format == "csv" else "  "
    if args.format == "table":
        lines[-1] = f"{'observable':<14}{'target':>10}{'model':>10}{'residual':>10}"
    for t, m in zip(result.targets, result.model_values):
        if args.format == "csv":
            lines.append(f"{t.observable},{t.value:.6g},{m:.6g},{m - t.value:+.6g}")
        else:
            lines.append(f"{t.observable:<14}{t.value:>10.4f}{m:>10.4f}{m - t.value:>+10.4f}")
    if not result.converged:
        lines.append(f"# fit did not converge: {result.message}")
    return "\n".join(lines) + "\n"


COMMANDS = {
    "state": cmd_state,
    "verify": cmd_verify,
    "scan": cmd_scan,
    "tomo": cmd_tomo,
    "calibrate": cmd_calibrate,
}


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        text = COMMANDS[args.command](args)
        write_output(text, args.out)
    except (CliError, ValueError, KeyError, OSError) as exc:
        print(f"hypercluster {args.command}: error: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
