"""Command-line driver: simulate, weld, verify, certify, reproduce-paper.

Every run writes into its output directory and finishes with
``manifest.json`` listing each file with its sha256.  Failures print a JSON
error object and exit with status 2 (configuration) or 3 (numerical).
"""

import argparse
import hashlib
import json
import logging
import sys
from pathlib import Path

import numpy as np

from . import __version__
from ._backend import BACKEND
from .analysis import certify_blowup, growth_monitor
from .config import load_config, parse_config
from .dynamics import read_snapshot_grid, refine_blowup, simulate, snapshot_grid_csv
from .errors import ConfigError, EulerArnoldError, NumericalError, ValidationError
from .spectral import evaluate_at
from .svg import Series, export_svg
from .verify import report_json, run_all
from .welding import CircleDiffeo, weld, welding_residual

log = logging.getLogger("eulerarnold")

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_NUMERIC = 3


class WeldingFailed(NumericalError):
    pass


class Outputs:
    """Tracks files written under one output directory."""

    def __init__(self, root):
        self.root = Path(root)
        self.root.mkdir(parents=True, exist_ok=True)
        self.files = []

    def write(self, rel, text):
        path = self.root / rel
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(text)
        if rel not in self.files:
            self.files.append(rel)
        return path

    def write_json(self, rel, doc):
        return self.write(rel, json.dumps(doc, indent=2, sort_keys=True) + "\n")

    def manifest(self, verb, config, extra=None, status="ok"):
        entries = []
        for rel in sorted(self.files):
            data = (self.root / rel).read_bytes()
            entries.append({"path": rel, "sha256": hashlib.sha256(data).hexdigest(), "bytes": len(data)})
        doc = {
            "verb": verb,
            "version": __version__,
            "config_digest": config.digest() if config is not None else None,
            "seed": config.seed if config is not None else None,
            "files": entries,
            "status": status,
        }
        if extra:
            doc.update(extra)
        path = self.root / "manifest.json"
        path.write_text(json.dumps(doc, indent=2, sort_keys=True) + "\n")
        return doc


def _tag(t):
    return f"t{t:.6f}"


# --- verbs --------------------------------------------------------------


def _energy_drift(record):
    e = np.asarray(record.column("energy"), dtype=np.float64)
    if e[0] == 0.0:
        return float(np.max(np.abs(e - e[0])))
    return float(np.max(np.abs(e - e[0])) / abs(e[0]))


def _profile_svgs(out, record, cfg, prefix=""):
    frames = sorted(record.snapshots.items())
    if not frames:
        frames = [(record.times[-1], record.states[-1])]
    if not cfg.svg:
        return
    th = np.linspace(0.0, 2 * np.pi, 513)
    u_series = [Series.graph(f"t={t:g}", th, evaluate_at(s.u, th)) for t, (s, _) in frames]
    out.write(f"{prefix}u_profiles.svg", export_svg(u_series, title=f"{cfg.equation}: u(t, theta)",
                                                   xlabel="theta", ylabel="u"))
    eta_series = [Series.graph(f"t={t:g}", lag.theta, lag.eta) for t, (_, lag) in frames]
    out.write(f"{prefix}eta_profiles.svg", export_svg(eta_series, title=f"{cfg.equation}: eta(t, theta)",
                                                     xlabel="theta", ylabel="eta"))


def run_simulate(cfg, out, prefix=""):
    sim = cfg.simulation_config()
    record = simulate(sim, cfg.initial_condition())
    verdict = record.verdict
    if verdict.blowup and sim.refine_levels > 0:
        verdict = refine_blowup(record, sim)
    out.write(f"{prefix}trajectory.csv", record.to_csv())
    snaps = []
    for t, (state, lag) in sorted(record.snapshots.items()):
        tag = _tag(t)
        out.write(f"{prefix}snapshots/{tag}_u.csv", state.u.to_csv())
        out.write(f"{prefix}snapshots/{tag}_grid.csv", snapshot_grid_csv(state, lag))
        snaps.append(t)
    skipped = [t for t in cfg.snapshots if t not in record.snapshots]
    last_state = record.states[-1][0]
    if record.verdict.blowup and len(record.states) > 1:
        # the last state before detection is kept for welding near breaking
        last_state, last_lag = record.states[-2]
        out.write(f"{prefix}snapshots/last_healthy_grid.csv", snapshot_grid_csv(last_state, last_lag))
    _profile_svgs(out, record, cfg, prefix)
    summary = {
        "equation": cfg.equation,
        "verdict": verdict.to_dict(),
        "detection_verdict": record.verdict.to_dict(),
        "energy_initial": record.column("energy")[0],
        "energy_drift_relative": _energy_drift(record),
        "min_eta_theta": float(min(record.column("min_eta_theta"))),
        "t_last": record.times[-1],
        "last_healthy_t": last_state.t if record.verdict.blowup else None,
        "snapshots": snaps,
        "snapshots_skipped": skipped,
        "terminated": record.terminated,
    }
    if skipped:
        summary["snapshots_skipped_reason"] = "run stopped at detected blowup (continue_past_blowup is off)"
    if cfg.equation == "ewp":
        summary["growth_monitor"] = json.loads(growth_monitor(record).to_json())
    out.write_json(f"{prefix}summary.json", summary)
    return summary, record


def _stored_snapshots(out, prefix=""):
    d = out.root / prefix / "snapshots"
    found = []
    for p in sorted(d.glob("t*_grid.csv")):
        found.append((float(p.name[1:].split("_")[0]), p))
    last = d / "last_healthy_grid.csv"
    return found, (last if last.exists() else None)


def run_weld(cfg, out, prefix=""):
    found, last = _stored_snapshots(out, prefix)
    if not found and last is None:
        run_simulate(cfg, out, prefix)
        found, last = _stored_snapshots(out, prefix)
    jobs = [(_tag(t), path) for t, path in found]
    if last is not None:
        jobs.append(("last_healthy", last))
    results = []
    curves = []
    failures = []
    for tag, path in jobs:
        lag, _ = read_snapshot_grid(path)
        eta = CircleDiffeo.from_lagrangian(lag)
        try:
            curve, sol = weld(eta, prefactor=cfg.weld_prefactor, slope_floor=cfg.weld_slope_floor)
        except NumericalError as exc:
            # the frame nearest breaking may be beyond what the grid resolves; it is
            # reported but does not fail the run, unlike a requested snapshot
            doc = _error_doc(exc, EXIT_NUMERIC)
            doc.update(snapshot=tag, min_eta_theta=eta.min_slope(), fatal=tag != "last_healthy")
            failures.append(doc)
            continue
        resid = welding_residual(curve, eta, prefactor=cfg.weld_prefactor)
        out.write(f"{prefix}curves/{tag}.csv", curve.to_csv())
        out.write(f"{prefix}curves/{tag}.json",
                  curve.sidecar(config_hash=cfg.digest(), source=path.name, welding_residual=resid,
                                min_eta_theta=eta.min_slope(), condition=sol.condition) + "\n")
        if cfg.svg:
            out.write(f"{prefix}curves/{tag}.svg",
                      export_svg([Series.curve(tag, curve.points)], title=f"{cfg.equation} weld {tag}",
                                 equal_aspect=True))
        curves.append(Series.curve(tag, curve.points))
        results.append({"snapshot": tag, "solver_residual": sol.residual, "welding_residual": resid,
                        "condition": sol.condition, "min_eta_theta": eta.min_slope(),
                        "negative_energy_fraction": curve.coefficients.negative_energy_fraction()})
    if cfg.svg and curves:
        out.write(f"{prefix}curves/all.svg", export_svg(curves, title=f"{cfg.equation} welded curves",
                                                        equal_aspect=True))
    out.write_json(f"{prefix}weld_report.json", {"curves": results, "failures": failures})
    fatal = [f for f in failures if f["fatal"]]
    if fatal:
        raise WeldingFailed(f"{len(fatal)} snapshot(s) could not be welded; see {prefix}weld_report.json")
    return results


def run_verify(cfg, out):
    report = run_all(trials=cfg.verify_trials, seed=cfg.seed)
    out.write("verify_report.json", report_json(report) + "\n")
    return report


def run_certify(cfg, out):
    cert = certify_blowup(cfg.initial_condition())
    out.write("certificate.json", cert.to_json() + "\n")
    return json.loads(cert.to_json())


def reference_config(equation, t_fin=0.5, snapshots=(0.125, 0.25, 0.5)):
    text = (
        f'equation = "{equation}"\n'
        f"t_fin = {t_fin}\n"
        f"snapshots = [{', '.join(str(s) for s in snapshots)}]\n"
        "[initial]\n"
        'modes = [[2, 1.0, "sin"], [3, 0.5, "cos"]]\n'
    )
    return text


def run_reproduce(cfg_overrides, out, seed=None):
    """Both equations from the same initial data, with their welded curves."""
    index = {}
    for eq, snaps in (("wunsch", (0.0, 0.125, 0.2, 0.25)), ("ewp", (0.0, 0.25, 0.5))):
        cfg = parse_config(reference_config(eq, 0.5, snaps), overrides=cfg_overrides)
        if seed is not None:
            cfg.seed = seed
        summary, _ = run_simulate(cfg, out, prefix=f"{eq}/")
        welds = run_weld(cfg, out, prefix=f"{eq}/")
        index[eq] = {"summary": summary, "welds": welds}
    tables = {
        "wunsch_eulerian": "wunsch/u_profiles.svg",
        "ewp_eulerian": "ewp/u_profiles.svg",
        "wunsch_lagrangian": "wunsch/eta_profiles.svg",
        "ewp_lagrangian": "ewp/eta_profiles.svg",
        "wunsch_welding": "wunsch/curves/all.svg",
        "ewp_welding": "ewp/curves/all.svg",
    }
    out.write_json("reproduce_report.json", {"runs": index, "figures": tables})
    return index


# --- entry point --------------------------------------------------------


def build_parser():
    p = argparse.ArgumentParser(prog="eulerarnold", description=__doc__.splitlines()[0])
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__} ({BACKEND} kernels)")
    sub = p.add_subparsers(dest="verb", required=True)
    for verb in ("simulate", "weld", "verify", "certify", "reproduce-paper"):
        sp = sub.add_parser(verb)
        sp.add_argument("--config", help="TOML configuration file")
        sp.add_argument("--out", help="output directory (overrides the config)")
        sp.add_argument("--seed", type=int, help="random seed (overrides the config)")
        sp.add_argument("--override", action="append", default=[], metavar="KEY=VALUE",
                        help="set a configuration key, e.g. N=128 or weld.enabled=true")
        sp.add_argument("-v", "--verbose", action="store_true")
    return p


def _error_doc(exc, code):
    doc = {"error": type(exc).__name__, "message": str(exc), "exit_code": code}
    for attr in ("line", "field"):
        if getattr(exc, attr, None) is not None:
            doc[attr] = getattr(exc, attr)
    return doc


def _load(args):
    if args.config:
        cfg = load_config(args.config, overrides=args.override)
    elif args.verb == "verify":
        cfg = parse_config('equation = "wunsch"\n[initial]\nmodes = [[1, 1.0, "sin"]]\n',
                           overrides=args.override)
    elif args.verb == "reproduce-paper":
        cfg = None
    else:
        raise ValidationError(f"'{args.verb}' needs --config", field="--config")
    if cfg is not None:
        if args.out:
            cfg.out = args.out
        if args.seed is not None:
            cfg.seed = args.seed
    return cfg


def dispatch(args):
    cfg = _load(args)
    out_dir = args.out or (cfg.out if cfg is not None else "out")
    out = Outputs(out_dir)
    extra = {}
    if args.verb == "simulate":
        summary, _ = run_simulate(cfg, out)
        extra["verdict"] = summary["verdict"]
        extra["energy_drift_relative"] = summary["energy_drift_relative"]
        if cfg.weld:
            run_weld(cfg, out)
    elif args.verb == "weld":
        run_weld(cfg, out)
    elif args.verb == "verify":
        report = run_verify(cfg, out)
        extra["verify_passed"] = report["passed"]
    elif args.verb == "certify":
        extra["certificate"] = run_certify(cfg, out)
    elif args.verb == "reproduce-paper":
        index = run_reproduce(args.override, out, seed=args.seed)
        extra["verdicts"] = {eq: r["summary"]["verdict"] for eq, r in index.items()}
    if args.verb == "verify" and not extra["verify_passed"]:
        out.manifest(args.verb, cfg, extra, status="failed")
        failed = sorted(k for k, v in report["suites"].items() if not v["passed"])
        return EXIT_NUMERIC, {"error": "VerificationFailed", "message": f"suites failed: {failed}",
                              "exit_code": EXIT_NUMERIC}
    manifest = out.manifest(args.verb, cfg, extra)
    manifest["manifest_path"] = str(out.root / "manifest.json")
    return EXIT_OK, manifest


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        code, doc = dispatch(args)
    except ConfigError as exc:
        code, doc = EXIT_CONFIG, _error_doc(exc, EXIT_CONFIG)
    except EulerArnoldError as exc:
        code, doc = EXIT_NUMERIC, _error_doc(exc, EXIT_NUMERIC)
    except (ValueError, ArithmeticError, OSError) as exc:
        code, doc = EXIT_NUMERIC, _error_doc(exc, EXIT_NUMERIC)
    if code == EXIT_OK:
        print(json.dumps({"status": "ok", "manifest": doc["manifest_path"], "files": len(doc["files"])}))
    else:
        print(json.dumps(doc, sort_keys=True), file=sys.stderr)
    return code


if __name__ == "__main__":
    sys.exit(main())
