"""Command-line front end.

Every run resolves a flat INI config (defaults < --config file < flags), executes one
subcommand, and writes into the output directory:

    manifest.json   resolved config, outputs, status and the command that reproduces the run
    resolved.ini    the resolved config itself
    <command>.json  the result
    *.csv           plot-ready tables (when "csv" is among output.formats)

Exit codes: 0 success, 1 reported hypothesis/assertion failure or numerical failure,
2 usage or config error.
"""

import argparse
import configparser
import json
import math
import os
import sys
from pathlib import Path

import numpy as np

from . import branch as br
from . import curvature as cv
from . import kernel as kmod
from . import perimeter as pm
from . import spectrum as sp
from .errors import DegenerateNorm, InvalidParameter, InvalidProfile, LabError, Underdetermined
from .quad import QuadConfig, cosine_eval

OUTPUT_ENV = "NONLOCAL_DELAUNAY_OUT"
COMMANDS = ["kernel-check", "classify", "rstar", "hr", "spectrum", "anmc", "branch", "perimeter",
            "rearrange", "g-check", "firstvar", "compare", "riesz-check"]


class ConfigError(Exception):
    pass


# --- config ---------------------------------------------------------------------------

def _floats(text):
    return [float(x) for x in text.replace(";", ",").split(",") if x.strip()]


def _bool(text):
    low = text.strip().lower()
    if low in ("1", "true", "yes", "on"):
        return True
    if low in ("0", "false", "no", "off"):
        return False
    raise ValueError(text)


def _opt_float(text):
    return None if not text.strip() else float(text)


# section -> key -> (default text, parser)
SCHEMA = {
    "kernel": {
        "family": ("isotropic", str),
        "alpha": ("0.5", float),
        "p": ("1.0", float),
        "eps": ("0.0", float),
        "norm_table": ("", str),
    },
    "quadrature": {
        "trunc_T": ("50.0", float),
        "rel_tol": ("1e-08", float),
        "abs_tol": ("1e-12", float),
        "max_subdivisions": ("200", int),
        "lattice_kmax": ("64", int),
        "tail_constant_policy": ("use-Lambda-bound", str),
    },
    "spectrum": {
        "R": ("", _opt_float),           # empty: use R*
        "kmax": ("64", int),
        "radii": ("1.0", _floats),       # for hr
    },
    "anmc": {
        "profile": ("1.0, 0.3", _floats),
        "points": ("33", int),
    },
    "branch": {
        "a_max": ("0.05", float),
        "a_steps": ("5", int),
        "modes": ("16", int),
        "collocation": ("64", int),
        "certify_tol": ("1e-05", float),
        "both_signs": ("false", _bool),
    },
    "perimeter": {
        "nx": ("64", int),
        "ny": ("64", int),
        "Y": (repr(math.pi), float),
        "seeds": ("50", int),
        "trials": ("200", int),
        "profile": ("1.0", _floats),
        "input": ("", str),
        "operator": ("both", str),
        "x2": ("0.1, 1.0, 5.0", _floats),
        "s_points": ("128", int),
        "derivative_order": ("4", int),
    },
    "firstvar": {
        "profile": ("1.0", _floats),
        "direction": ("0.0, 1.0", _floats),
        "eps": ("0.01", float),
        "tol": ("1e-04", float),
    },
    "compare": {
        "omega": ("0.02, 0.05, 0.1", _floats),
        "levels": ("512, 1024", _floats),
    },
    "output": {
        "directory": ("", str),
        "formats": ("csv, json", str),
    },
}

FAMILIES = ("isotropic", "lp", "perturbed", "norm-table")


def load_config(path=None, overrides=None):
    """Resolved config as {section: {key: text}} plus its parsed values."""
    raw = {sec: {k: d for k, (d, _) in keys.items()} for sec, keys in SCHEMA.items()}
    if path is not None:
        parser = configparser.ConfigParser(interpolation=None)
        parser.optionxform = str
        try:
            with open(path) as fh:
                parser.read_file(fh)
        except FileNotFoundError:
            raise ConfigError(f"config file not found: {path}")
        except configparser.Error as exc:
            raise ConfigError(f"config parse error: {exc}")
        for sec in parser.sections():
            if sec not in SCHEMA:
                raise ConfigError(f"unknown config section [{sec}]")
            for key, val in parser.items(sec):
                if key not in SCHEMA[sec]:
                    raise ConfigError(f"unknown config key '{sec}.{key}'")
                raw[sec][key] = val.strip()
    for (sec, key), val in (overrides or {}).items():
        raw[sec][key] = val
    return raw, _parse(raw)


def _parse(raw):
    vals = {}
    for sec, keys in SCHEMA.items():
        vals[sec] = {}
        for key, (_, conv) in keys.items():
            text = raw[sec][key]
            try:
                vals[sec][key] = conv(text)
            except ValueError:
                raise ConfigError(f"{sec}.{key}: cannot parse '{text}'")
    k = vals["kernel"]
    if k["family"] not in FAMILIES:
        raise ConfigError(f"kernel.family must be one of {', '.join(FAMILIES)}")
    try:
        kmod._check_alpha(k["alpha"])
        vals["quad"] = QuadConfig(**vals["quadrature"])
    except InvalidParameter as exc:
        raise ConfigError(str(exc))
    fmts = {f.strip() for f in vals["output"]["formats"].split(",") if f.strip()}
    if not fmts <= {"csv", "json"}:
        raise ConfigError("output.formats must be a subset of {csv, json}")
    vals["output"]["formats"] = fmts
    if vals["perimeter"]["operator"] not in ("cylindrical", "periodic", "both"):
        raise ConfigError("perimeter.operator must be cylindrical, periodic or both")
    return vals


def make_kernel(k):
    fam = k["family"]
    if fam == "isotropic":
        return kmod.make_isotropic(k["alpha"])
    if fam == "lp":
        return kmod.make_lp_norm(k["p"], k["alpha"])
    if fam == "perturbed":
        return kmod.make_perturbed_isotropic(k["alpha"], k["eps"])
    if not k["norm_table"]:
        raise ConfigError("kernel.norm_table is required for family norm-table")
    return kmod.make_monotonic_norm(kmod.load_norm_table(k["norm_table"]), k["alpha"])


# --- commands ---------------------------------------------------------------------------
# each returns (result dict, ok flag)

def cmd_kernel_check(K, c):
    rep = kmod.check_hypotheses(K)
    out = rep.to_dict()
    return out, not rep.failures()


def cmd_classify(K, c):
    rep = kmod.classify_g_conditions(K, c["perimeter"]["x2"], c["perimeter"]["derivative_order"])
    return rep.to_dict(), True


def cmd_rstar(K, c):
    cfg = c["quad"]
    R = sp.find_rstar(K, cfg)
    mu1 = sp.mu_k(K, R, 1, cfg).value
    print(f"R* = {R!r}")
    print(f"|mu_1(R*)| = {abs(mu1):.3e}")
    scan = [{"R": float(r), "mu1": sp.mu_k(K, float(r), 1, cfg).value} for r in R * np.geomspace(0.25, 4, 13)]
    return {"kernel": K.label, "R_star": R, "mu1_at_R_star": mu1, "scan": scan}, abs(mu1) <= 1e-8


def cmd_hr(K, c):
    rows = [{"R": R, "h": cv.h_straight(K, R, c["quad"])} for R in c["spectrum"]["radii"]]
    for r in rows:
        print(f"h_R({r['R']:g}) = {r['h']!r}")
    return {"kernel": K.label, "values": rows}, True


def cmd_spectrum(K, c):
    cfg = c["quad"]
    R = c["spectrum"]["R"]
    if R is None:
        R = sp.find_rstar(K, cfg)
    rep = sp.spectrum_scan(K, R, c["spectrum"]["kmax"], cfg)
    print(f"R = {R!r}  mu_0 = {rep.mu[0][1]:.6g}  mu_1 = {rep.mu[1][1]:.3e}  positivity_ok = {rep.positivity_ok}")
    # the ratio window lives on 32 <= k <= 64 and is only checked when the scan reaches it
    window_ok = rep.ratio_window_ok or c["spectrum"]["kmax"] < 32
    return rep.to_dict(), rep.positivity_ok and window_ok


def cmd_anmc(K, c):
    u = cv.Profile(c["anmc"]["profile"])
    M = c["anmc"]["points"]
    H = cv.anmc_band_curve(K, u, M, c["quad"])
    s = cv.half_period_grid(u, M)
    return {"kernel": K.label, "profile": list(u.coeffs), "s": s.tolist(), "H": H.tolist()}, True


def cmd_branch(K, c):
    b = c["branch"]
    a = np.linspace(0.0, b["a_max"], b["a_steps"] + 1)
    if b["both_signs"]:
        a = np.concatenate([-a[:0:-1], a])
    run = br.continue_branch(a.tolist(), K, c["quad"], N=b["modes"], M=b["collocation"])
    out = run.to_dict()
    for d, p in zip(out["points"], run.points):
        d["w_coeffs"] = p.w_coeffs(run.R_star).tolist()
    worst = max(p.anmc_residual for p in run.points)
    out["certify_tol"] = b["certify_tol"]
    out["max_anmc_residual"] = worst
    missing = sorted(set(run.a_grid) - {p.a for p in run.points})
    out["unreached"] = missing
    print(f"R* = {run.R_star!r}  points = {len(run.points)}  max residual = {worst:.3e}")
    return out, worst <= b["certify_tol"] and not missing


def _gridset(c):
    p = c["perimeter"]
    if p["input"]:
        try:
            return pm.GridSet.from_rle(Path(p["input"]).read_text())
        except OSError as exc:
            raise ConfigError(f"perimeter.input: {exc}")
    return pm.rasterize_profile(p["profile"], p["nx"], p["ny"], p["Y"])


def cmd_perimeter(K, c):
    cfg = c["quad"]
    E = _gridset(c)
    grid = pm.panp_grid(K, E, cfg)
    out = {"kernel": K.label, "grid": {"nx": E.nx, "ny": E.ny, "Y": E.Y, "cells": E.cell_count,
                                       "value": grid.value, "near_field_error": grid.near_field_error,
                                       "far_tail_bound": grid.far_tail_bound}}
    if not c["perimeter"]["input"]:
        prof = pm.panp_profile(K, c["perimeter"]["profile"], cfg)
        out["profile"] = {"coeffs": c["perimeter"]["profile"], "value": prof.value,
                          "near_field_error": prof.near_field_error, "far_tail_bound": prof.far_tail_bound}
    print(f"panp_grid = {grid.value!r} +- {grid.error:.2e}")
    return out, True


def cmd_rearrange(K, c):
    p = c["perimeter"]
    ops = {"cylindrical": pm.rearrange_cylindrical, "periodic": pm.rearrange_periodic_symmetric}
    names = list(ops) if p["operator"] == "both" else [p["operator"]]
    out = {"kernel": K.label, "suites": {}}
    ok = True
    for name in names:
        rows = pm.monotonicity_suite(K, ops[name], range(p["seeds"]), p["nx"], p["ny"], p["Y"], c["quad"])
        bad = [r["seed"] for r in rows if r["violation"]]
        ok = ok and not bad
        out["suites"][name] = {"rows": rows, "violations": bad}
        print(f"{name}: {len(rows)} sets, {len(bad)} violations")
    return out, ok


def cmd_g_check(K, c):
    p = c["perimeter"]
    rep = pm.check_g_monotone(K, p["x2"], p["s_points"], c["quad"])
    print(f"mode = {rep['mode']}  violations = {len(rep['violations'])}")
    return rep, rep["ok"]


def cmd_firstvar(K, c):
    f = c["firstvar"]
    rep = pm.first_variation_check(K, f["profile"], f["direction"], f["eps"], c["quad"])
    rep["tol"] = f["tol"]
    print(f"derivative = {rep['derivative']!r}  curvature side = {rep['curvature_side']!r}  "
          f"relative = {rep['relative']:.2e}")
    return rep, rep["relative"] <= f["tol"]


def cmd_compare(K, c):
    levels = tuple(int(x) for x in c["compare"]["levels"])
    rows = [pm.compare_ball_cylinder(K, w, c["quad"], levels) for w in c["compare"]["omega"]]
    for r in rows:
        print(f"omega = {r['omega']:g}: balls {r['panp_balls']:.6g}, band {r['panp_band']:.6g} -> {r['winner']}")
    return {"kernel": K.label, "rows": rows}, True


def cmd_riesz_check(K, c):
    rng = np.random.default_rng(0)
    violations = []
    equal = 0
    for trial in range(c["perimeter"]["trials"]):
        n = int(rng.integers(3, 33))
        f, h = rng.integers(0, 6, n), rng.integers(0, 6, n)
        half = np.sort(rng.integers(0, 9, n // 2 + 1))[::-1]
        g = np.concatenate([half, half[1: n - n // 2][::-1]])
        r = pm.riesz_circle_check(f, g, h)
        equal += r["equal"]
        if not r["ok"]:
            violations.append({"trial": trial, "n": n, "lhs": int(r["lhs"]), "rhs": int(r["rhs"])})
    print(f"{c['perimeter']['trials']} triples, {len(violations)} violations, {equal} equalities")
    return {"trials": c["perimeter"]["trials"], "equalities": equal, "violations": violations}, not violations


HANDLERS = {
    "kernel-check": cmd_kernel_check, "classify": cmd_classify, "rstar": cmd_rstar, "hr": cmd_hr,
    "spectrum": cmd_spectrum, "anmc": cmd_anmc, "branch": cmd_branch, "perimeter": cmd_perimeter,
    "rearrange": cmd_rearrange, "g-check": cmd_g_check, "firstvar": cmd_firstvar,
    "compare": cmd_compare, "riesz-check": cmd_riesz_check,
}


# --- plot data ----------------------------------------------------------------------------

def _csv(header, rows):
    return header + "\n" + "".join(",".join(_cell(v) for v in r) + "\n" for r in rows)


def _cell(v):
    if v is None:
        return ""
    if isinstance(v, float):
        return repr(v)
    return str(v)


def _branch_csvs(res):
    files = {"gamma_vs_a.csv": _csv("a,gamma,anmc_residual",
                                    [(p["a"], p["gamma"], p["anmc_residual"]) for p in res["points"]])}
    s = np.linspace(-np.pi, np.pi, 129)
    for p in res["points"]:
        w = cosine_eval(p["w_coeffs"], s)
        files[f"profile_{p['a']:.6g}.csv"] = _csv("s,w", zip(s.tolist(), w.tolist()))
    return files


PLOT_DATA = {
    "spectrum": lambda r: {"mu_vs_k.csv": _csv("k,mu,ratio", [(m["k"], m["value"], m["ratio"]) for m in r["mu"]])},
    "rstar": lambda r: {"mu1_vs_R.csv": _csv("R,mu1", [(x["R"], x["mu1"]) for x in r["scan"]])},
    "hr": lambda r: {"h_vs_R.csv": _csv("R,h", [(x["R"], x["h"]) for x in r["values"]])},
    "anmc": lambda r: {"anmc.csv": _csv("s,H", zip(r["s"], r["H"]))},
    "branch": _branch_csvs,
    "compare": lambda r: {"omega_scan.csv": _csv("omega,panp_balls,panp_band,winner",
                                                 [(x["omega"], x["panp_balls"], x["panp_band"], x["winner"])
                                                  for x in r["rows"]])},
    "rearrange": lambda r: {f"suite_{name}.csv": pm.suite_csv(s["rows"]) for name, s in r["suites"].items()},
}


def emit_plot_data(run_dir):
    """Flatten a finished run directory into its plot-ready CSVs; returns the file names."""
    run_dir = Path(run_dir)
    try:
        manifest = json.loads((run_dir / "manifest.json").read_text())
        result = json.loads((run_dir / f"{manifest['command']}.json").read_text())
    except (OSError, KeyError, ValueError) as exc:
        raise ConfigError(f"missing or unreadable run artifacts in {run_dir}: {exc}")
    files = PLOT_DATA.get(manifest["command"], lambda r: {})(result)
    for name, text in files.items():
        with open(run_dir / name, "w", newline="\n") as fh:
            fh.write(text)
    return sorted(files)


# --- dispatch ---------------------------------------------------------------------------------

# flag dest -> (section, key)
FLAG_KEYS = {
    "kernel": ("kernel", "family"), "alpha": ("kernel", "alpha"), "p": ("kernel", "p"),
    "eps": ("kernel", "eps"), "norm_table": ("kernel", "norm_table"),
    "trunc_T": ("quadrature", "trunc_T"), "rel_tol": ("quadrature", "rel_tol"),
    "R": ("spectrum", "R"), "kmax": ("spectrum", "kmax"), "radii": ("spectrum", "radii"),
    "profile": (None, "profile"), "points": ("anmc", "points"),
    "a_max": ("branch", "a_max"), "a_steps": ("branch", "a_steps"), "modes": ("branch", "modes"),
    "certify_tol": ("branch", "certify_tol"), "both_signs": ("branch", "both_signs"),
    "nx": ("perimeter", "nx"), "ny": ("perimeter", "ny"), "Y": ("perimeter", "Y"),
    "seeds": ("perimeter", "seeds"), "trials": ("perimeter", "trials"), "input": ("perimeter", "input"),
    "operator": ("perimeter", "operator"), "x2": ("perimeter", "x2"),
    "direction": ("firstvar", "direction"), "fd_eps": ("firstvar", "eps"),
    "omega": ("compare", "omega"), "levels": ("compare", "levels"),
    "formats": ("output", "formats"),
}
PROFILE_SECTION = {"anmc": "anmc", "perimeter": "perimeter", "firstvar": "firstvar"}


def build_parser():
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="INI file with [kernel], [quadrature], ... sections")
    common.add_argument("--out", help=f"output directory (overrides ${OUTPUT_ENV} and output.directory)")
    common.add_argument("--kernel", choices=FAMILIES)
    common.add_argument("--alpha")
    common.add_argument("--p", help="exponent of the lp norm")
    common.add_argument("--eps", help="anisotropy of the perturbed kernel")
    common.add_argument("--norm-table", dest="norm_table")
    common.add_argument("--trunc-T", dest="trunc_T")
    common.add_argument("--rel-tol", dest="rel_tol")
    common.add_argument("--formats", help="comma list from {csv, json}")

    ap = argparse.ArgumentParser(prog="nonlocal-delaunay", description=__doc__.splitlines()[0])
    sub = ap.add_subparsers(dest="command", required=True, metavar="command")
    p = {name: sub.add_parser(name, parents=[common]) for name in COMMANDS}
    for name in ("spectrum",):
        p[name].add_argument("--R")
        p[name].add_argument("--kmax")
    p["hr"].add_argument("--radii", help="comma list of radii")
    for name in ("anmc", "perimeter", "firstvar"):
        p[name].add_argument("--profile", help="comma list of cosine coefficients")
    p["anmc"].add_argument("--points")
    p["branch"].add_argument("--a-max", dest="a_max")
    p["branch"].add_argument("--a-steps", dest="a_steps")
    p["branch"].add_argument("--modes")
    p["branch"].add_argument("--certify-tol", dest="certify_tol")
    p["branch"].add_argument("--both-signs", dest="both_signs", action="store_const", const="true")
    for name in ("perimeter", "rearrange"):
        p[name].add_argument("--nx")
        p[name].add_argument("--ny")
        p[name].add_argument("--Y")
    p["perimeter"].add_argument("--input", help="GridSet run-length file")
    p["rearrange"].add_argument("--seeds", help="number of seeded random sets")
    p["rearrange"].add_argument("--operator", choices=("cylindrical", "periodic", "both"))
    for name in ("classify", "g-check"):
        p[name].add_argument("--x2", help="comma list of nonzero transversal offsets")
    p["riesz-check"].add_argument("--trials")
    p["firstvar"].add_argument("--direction", help="comma list of cosine coefficients")
    p["firstvar"].add_argument("--fd-eps", dest="fd_eps")
    p["compare"].add_argument("--omega", help="comma list of volumes per period")
    p["compare"].add_argument("--levels", help="comma list of grid widths nx")
    return ap


def _write(path, text):
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(text)


def run_command(argv):
    ap = build_parser()
    try:
        args = ap.parse_args(argv)
    except SystemExit as exc:
        return 2 if exc.code else 0
    try:
        overrides = {}
        for dest, (sec, key) in FLAG_KEYS.items():
            val = getattr(args, dest, None)
            if val is None:
                continue
            overrides[(sec or PROFILE_SECTION[args.command], key)] = str(val)
        raw, cfg = load_config(args.config, overrides)
        out_dir = args.out or os.environ.get(OUTPUT_ENV) or cfg["output"]["directory"] or f"runs/{args.command}"
        raw["output"]["directory"] = out_dir
        out_dir = Path(out_dir)
        out_dir.mkdir(parents=True, exist_ok=True)
        K = make_kernel(cfg["kernel"])
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except (InvalidParameter, DegenerateNorm, OSError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2

    ini = configparser.ConfigParser(interpolation=None)
    ini.optionxform = str
    ini.read_dict(raw)
    with open(out_dir / "resolved.ini", "w", newline="\n") as fh:
        ini.write(fh)
    manifest = {"command": args.command, "config": raw,
                "rerun": f"nonlocal-delaunay {args.command} --config resolved.ini",
                "status": "running", "outputs": []}

    code = 0
    try:
        result, ok = HANDLERS[args.command](K, cfg)
        manifest["status"] = "ok" if ok else "assertion-failed"
        code = 0 if ok else 1
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except (InvalidParameter, InvalidProfile, Underdetermined) as exc:
        print(f"error [{exc.kind}]: {exc}", file=sys.stderr)
        return 2
    except LabError as exc:
        print(f"error [{exc.kind}]: {exc}", file=sys.stderr)
        manifest["status"] = f"failed: {exc.kind}"
        manifest["error"] = str(exc)
        _write(out_dir / "manifest.json", json.dumps(manifest, indent=2, sort_keys=True) + "\n")
        return 1

    _write(out_dir / f"{args.command}.json", json.dumps(result, indent=2, sort_keys=True, default=_jsonable) + "\n")
    manifest["outputs"] = [f"{args.command}.json", "resolved.ini"]
    _write(out_dir / "manifest.json", json.dumps(manifest, indent=2, sort_keys=True) + "\n")
    if "csv" in cfg["output"]["formats"]:
        manifest["outputs"] += emit_plot_data(out_dir)
    if "json" not in cfg["output"]["formats"]:
        # the result JSON feeds the CSV step; drop it when only CSV was asked for
        os.remove(out_dir / f"{args.command}.json")
        manifest["outputs"].remove(f"{args.command}.json")
    _write(out_dir / "manifest.json", json.dumps(manifest, indent=2, sort_keys=True) + "\n")
    if code:
        print(f"assertion failed; see {out_dir / 'manifest.json'}", file=sys.stderr)
    return code


def _jsonable(v):
    if isinstance(v, (np.integer,)):
        return int(v)
    if isinstance(v, (np.floating,)):
        return float(v)
    if isinstance(v, (np.bool_,)):
        return bool(v)
    if isinstance(v, np.ndarray):
        return v.tolist()
    raise TypeError(f"not serializable: {type(v).__name__}")


def main(argv=None):
    return run_command(sys.argv[1:] if argv is None else argv)


if __name__ == "__main__":
    sys.exit(main())
