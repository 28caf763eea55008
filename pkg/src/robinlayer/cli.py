"""Batch command-line front end.

    robinlayer run --config exp.json --out results/ [--seed N] [--threads N] [--format csv,json]
    robinlayer validate --config exp.json
    robinlayer schema

Exit codes: 0 success, 2 invalid configuration, 3 numerical non-convergence
(partial artifacts are kept and listed in the manifest).
"""

from __future__ import annotations

import argparse
import dataclasses
import datetime as dt
import json
import logging
import platform
import sys
import time
from pathlib import Path

import numpy as np
import scipy
from threadpoolctl import threadpool_limits

from . import __version__, config, selftest
from .assembly import assemble_operators, transverse_flip, write_matrix_market
from .linalg import NoConvergence, PencilSingular
from .model import BoundaryCoupling, HypothesisViolation, theorem_constants
from .oracles import shooting_ground_state
from .reports import ArtifactSet, write_json
from .resolvent_study import NORM_FIELDS, rate_sweep, truncation_sensitivity
from .spectral_study import compute_spectrum, coupling_trajectory, threshold, weak_coupling_sweep

log = logging.getLogger("robinlayer")

EXIT_OK, EXIT_CONFIG, EXIT_NUMERIC = 0, 2, 3


class NumericalFailure(RuntimeError):
    """Raised after partial artifacts are written."""


def _now():
    return dt.datetime.now(dt.timezone.utc).isoformat(timespec="seconds")


class _ConfigPolicy:
    def __init__(self, cfg):
        self.cfg = cfg

    def grid(self, epsilon):
        return config.grid_of(self.cfg, epsilon)


# -- commands ------------------------------------------------------------------

def cmd_assemble(cfg, art: ArtifactSet, threads):
    grid = config.grid_of(cfg)
    coupling = config.coupling_of(cfg)
    ops = assemble_operators(grid, coupling)
    mats = {"H_eps": ops.H_eps, "H0": ops.H0, "M_L2": ops.M_L2, "M_W1": ops.M_W1,
            "M0_L2": ops.M0_L2, "P_eps": ops.P_eps}
    rows = []
    for name, A in mats.items():
        path = art.out / f"{name}.mtx"
        write_matrix_market(path, A, comment=f"{name} (form representation)")
        art.file(path)
        rows.append([name, A.shape[0], A.shape[1], A.nnz])
    art.csv("operators.csv", ["name", "rows", "cols", "nnz"], rows)

    neg = assemble_operators(grid, dataclasses.replace(coupling, alpha0=-coupling.alpha0, c=-coupling.c)
                             if coupling.kind != "sampled" else coupling).H_eps
    S = transverse_flip(grid)
    checks = {
        "adjoint_rule_defect": float(abs(ops.H_eps.conj().T - neg).max()) if coupling.kind != "sampled" else None,
        "pt_defect": float(abs(ops.H_eps[S][:, S].conj() - ops.H_eps).max()),
        "projection_idempotency_defect": float(abs(ops.P_eps @ ops.P_eps - ops.P_eps).max()),
    }
    art.json("assemble.json", {"grid": dataclasses.asdict(grid), "n_dof": grid.n_dof,
                               "matrices": {r[0]: {"shape": r[1:3], "nnz": r[3]} for r in rows},
                               "checks": checks})


def cmd_resolvent_sweep(cfg, art: ArtifactSet, threads):
    coupling = config.coupling_of(cfg)
    s = cfg["solver"]
    reports, fits = rate_sweep(coupling, cfg["sweep"]["epsilons"], _ConfigPolicy(cfg),
                               probes=s["probes"], seed=s["seed"], margins=s["margins"],
                               threads=threads, method=s["norm_method"])
    for r in reports:
        art.json(f"points/resolvent_eps_{r.epsilon!r}.json", r.row())
    header = list(reports[0].row().keys())
    art.csv("resolvent_sweep.csv", header, [[r.row()[h] for h in header] for r in reports])
    consts = {repr(r.epsilon): dataclasses.asdict(theorem_constants(coupling, r.epsilon)) for r in reports}
    summary = {
        # first-order channel; the L2 norm decays faster when alpha vanishes
        "slope": fits["W1"].slope,
        "fits": {k: dataclasses.asdict(v) for k, v in fits.items()},
        "norm_fields": NORM_FIELDS,
        "constants": consts,
        "within_bounds": {
            "L2": all(r.norm_L2 <= r.bound_L2 * (1 + (r.margin or 0)) for r in reports),
            "W1": all(r.norm_W1_corrected <= r.bound_W1 * (1 + (r.margin_W1 or 0)) for r in reports),
        },
        "converged": all(r.converged for r in reports),
        # relative change of the L2 norm when the box half-width doubles (largest eps)
        "truncation_sensitivity": truncation_sensitivity(config.grid_of(cfg, reports[-1].epsilon), coupling,
                                                         method=s["norm_method"]),
    }
    art.json("summary.json", summary, always=True)
    if not summary["converged"]:
        raise NumericalFailure("operator-norm estimate did not converge for some epsilon")


def _spectrum_rows(eps, near, rep):
    bad = {(v["re"], v["im"]) for v in rep.enclosure_violations}
    edge = rep.threshold - rep.edge_band
    return [[eps, near.real, near.imag, i, z.real, z.imag, r, z.real < edge, (z.real, z.imag) not in bad]
            for i, (z, r) in enumerate(zip(rep.eigenvalues, rep.residuals))]


SPECTRUM_HEADER = ["epsilon", "near_re", "near_im", "index", "re", "im", "residual",
                   "below_threshold", "in_enclosure"]


def cmd_spectrum(cfg, art: ArtifactSet, threads):
    s = cfg["solver"]
    ops = assemble_operators(config.grid_of(cfg), config.coupling_of(cfg))
    near = complex(*s["near"])
    rep = compute_spectrum(ops, s["operator"], near, s["k"], tol=s["tolerance"], seed=s.get("seed", 0))
    art.csv("spectrum.csv", SPECTRUM_HEADER, _spectrum_rows(ops.grid.epsilon, near, rep))
    art.json("spectrum.json", dataclasses.asdict(rep), always=True)
    if not rep.complete:
        raise NumericalFailure(f"only {rep.n_converged} of {rep.n_requested} eigenpairs converged")


def cmd_enclosure(cfg, art: ArtifactSet, threads):
    s = cfg["solver"]
    coupling = config.coupling_of(cfg)
    rows, violations, incomplete = [], [], []
    for eps in cfg["sweep"]["epsilons"]:
        ops = assemble_operators(config.grid_of(cfg, eps), coupling)
        for near in (complex(*s["near"]), complex(threshold(coupling))):
            rep = compute_spectrum(ops, "H_eps", near, s["k"], tol=s["tolerance"], seed=s.get("seed", 0))
            rows += _spectrum_rows(eps, near, rep)
            violations += [dict(v, epsilon=eps) for v in rep.enclosure_violations]
            if not rep.complete:
                incomplete.append({"epsilon": eps, "near": near, "n_converged": rep.n_converged})
    art.csv("enclosure.csv", SPECTRUM_HEADER, rows)
    art.json("enclosure.json", {"violations": violations, "n_checked": len(rows),
                                "incomplete": incomplete}, always=True)
    if incomplete:
        raise NumericalFailure("some eigenpairs did not converge")


def _template(cfg) -> BoundaryCoupling:
    return config.coupling_of(cfg)


def cmd_weak_coupling(cfg, art: ArtifactSet, threads):
    template = _template(cfg)
    grid = config.grid_of(cfg)
    which = cfg["solver"]["operator"] if cfg.get("_operator_given") else "H0"
    rep = weak_coupling_sweep(grid, template, cfg["sweep"]["c_values"], which=which)
    shoot = [shooting_ground_state(dataclasses.replace(template, c=c)) if grid.d == 2 else None
             for c in rep.c_values]
    rows = [[c, mu, p, r, sh] for c, mu, p, r, sh in
            zip(rep.c_values, rep.mu, rep.prediction, rep.residual_over_c3, shoot)]
    art.csv("weak_coupling.csv", ["c", "mu", "prediction", "residual_over_c3", "shooting"], rows)
    art.json("weak_coupling.json", dict(dataclasses.asdict(rep), shooting=shoot), always=True)


def cmd_trajectory(cfg, art: ArtifactSet, threads):
    traj = coupling_trajectory(config.grid_of(cfg), _template(cfg), cfg["sweep"]["c_values"])
    art.csv("trajectory.csv", ["c", "lowest", "below_threshold"],
            list(zip(traj.c_values, traj.lowest, traj.below)))
    art.json("trajectory.json", dict(dataclasses.asdict(traj), pattern=traj.pattern), always=True)


def cmd_selftest(cfg, art: ArtifactSet, threads):
    s = cfg["solver"]
    res = selftest.run(samples=s["samples"], seed=s["seed"])
    art.csv("selftest.csv", ["check", "passed"], sorted(res["checks"].items()))
    art.json("selftest.json", res, always=True)
    if not res["passed"]:
        raise NumericalFailure("self-test failed: " + ", ".join(k for k, v in res["checks"].items() if not v))


COMMANDS = {
    "assemble": cmd_assemble,
    "resolvent-sweep": cmd_resolvent_sweep,
    "spectrum": cmd_spectrum,
    "weak-coupling": cmd_weak_coupling,
    "trajectory": cmd_trajectory,
    "enclosure-check": cmd_enclosure,
    "selftest": cmd_selftest,
}


# -- orchestration ---------------------------------------------------------------

def _error(out_dir, kind, message, diagnostics=None):
    err = {"error": kind, "message": message}
    if diagnostics is not None:
        err["diagnostics"] = diagnostics
    print(json.dumps(err), file=sys.stderr)
    return err


def run(raw: dict, out_dir, seed=None, threads=1, formats=None) -> int:
    """Validate, execute and write artifacts plus manifest; return the exit code."""
    raw = json.loads(json.dumps(raw))
    if seed is not None:
        raw.setdefault("solver", {})["seed"] = int(seed)
    if formats is not None:
        raw.setdefault("output", {})["formats"] = list(formats)
    diags = config.diagnostics(raw)
    if out_dir is None:
        out_dir = raw.get("output", {}).get("directory", "out")
    out_dir = Path(out_dir)
    if diags:
        err = _error(out_dir, "config", "invalid configuration", diags)
        out_dir.mkdir(parents=True, exist_ok=True)
        write_json(out_dir / "error.json", err)
        return EXIT_CONFIG

    cfg = config.with_defaults(raw)
    art = ArtifactSet(out_dir, cfg["output"]["formats"])
    art.json("config.json", cfg, always=True)
    cfg = dict(cfg, _operator_given="operator" in raw.get("solver", {}))
    started, t0 = _now(), time.perf_counter()
    code, error = EXIT_OK, None
    try:
        with threadpool_limits(limits=1 if threads <= 1 else None):
            COMMANDS[cfg["command"]](cfg, art, threads)
    except (NumericalFailure, NoConvergence, PencilSingular) as exc:
        code, error = EXIT_NUMERIC, _error(out_dir, "numerical", str(exc))
    except HypothesisViolation as exc:
        code, error = EXIT_CONFIG, _error(out_dir, "hypothesis", str(exc))
    if error is not None:
        art.json("error.json", error, always=True)
    art.manifest(
        command=cfg["command"], config_hash=config.config_hash(config.with_defaults(raw)),
        tool_version=__version__, started_at=started, finished_at=_now(),
        wall_time_s=round(time.perf_counter() - t0, 3), exit_code=code,
        seed=cfg["solver"].get("seed"), threads=threads,
        versions={"python": platform.python_version(), "numpy": np.__version__, "scipy": scipy.__version__})
    return code


def build_parser():
    p = argparse.ArgumentParser(prog="robinlayer", description=__doc__.split("\n")[0])
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="action", required=True)
    r = sub.add_parser("run", help="execute an experiment config")
    r.add_argument("--config", required=True, type=Path)
    r.add_argument("--out", type=Path, default=None, help="output directory")
    r.add_argument("--seed", type=int, default=None, help="override solver.seed")
    r.add_argument("--threads", type=int, default=1, help="concurrent sweep points (1 = reproducible)")
    r.add_argument("--format", default=None, help="comma list from {csv,json}")
    v = sub.add_parser("validate", help="print diagnostics for a config")
    v.add_argument("--config", required=True, type=Path)
    sub.add_parser("schema", help="print the config JSON schema")
    return p


def main(argv=None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    if argv and argv[0].startswith("--config"):
        argv.insert(0, "run")
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    if args.action == "schema":
        print(json.dumps(config.SCHEMA, indent=2))
        return EXIT_OK
    if args.action == "validate":
        diags = config.validate(args.config)
        print(json.dumps(diags, indent=2))
        return EXIT_CONFIG if diags else EXIT_OK
    try:
        raw = config.load(args.config)
    except json.JSONDecodeError as exc:
        _error(args.out, "config", f"invalid JSON: {exc}")
        return EXIT_CONFIG
    formats = None
    if args.format:
        formats = [f.strip() for f in args.format.split(",") if f.strip()]
        bad = [f for f in formats if f not in ("csv", "json")]
        if bad:
            _error(args.out, "config", f"unknown format(s): {bad}")
            return EXIT_CONFIG
    return run(raw, args.out, seed=args.seed, threads=args.threads, formats=formats)


if __name__ == "__main__":
    sys.exit(main())
