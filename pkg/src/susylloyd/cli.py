"""Command-line front end.

Every run reads an optional JSON config, fills in defaults, validates it against
a schema that rejects unknown keys, and writes results that embed the resolved
config and the tool version.  Exit codes: 0 ok, 1 acceptance threshold
breached, 2 config error, 3 numerical failure.
"""

from __future__ import annotations

import argparse
import copy
import csv
import io
import json
import math
import sys
from pathlib import Path

import jsonschema
import numpy as np

from . import __version__
from .disorder import DisorderError, DisorderModel, RngStream, nearest_neighbour_correlation, sample_potential
from .lattice import LatticeError, LatticeSpec, assemble, build_laplacian, free_spectrum
from .lloyd import (UsageError, ToymodelBlocks, combes_thomas_check, default_pair, exact_genfun, schur_bounds_check,
                    shifted_trace, toymodel_decomposition, toymodel_error_sweep, toymodel_oracle, x_form_check)
from .mc import McPlan, mc_average, mc_dos, mc_trace_grid
from .quadrature import QuadratureError
from .resolvent import NumericalError, SpectralProbe, eig_spectrum, gen_function, green
from .suites import SUITES
from .superpolar import verify_g2_single_site

EXIT_OK, EXIT_THRESHOLD, EXIT_CONFIG, EXIT_NUMERICAL = 0, 1, 2, 3

COMMANDS = ("dos", "trace", "g2", "genfun", "toymodel", "decomposition", "verify", "bounds", "spectrum")

_num = {"type": "number"}
_pos = {"type": "number", "exclusiveMinimum": 0}
_nonneg = {"type": "number", "minimum": 0}


def _obj(props: dict, required=()) -> dict:
    return {"type": "object", "properties": props, "additionalProperties": False, "required": list(required)}


SCHEMA = _obj({
    "lattice": _obj({
        "d": {"type": "integer", "minimum": 1},
        "L": {"type": "integer", "minimum": 1},
        "bc": {"enum": ["restriction", "periodic"]},
    }),
    "disorder": _obj({
        "kind": {"enum": ["iid", "nonneg", "toymodel"]},
        "delta": {"type": "number", "minimum": 0, "exclusiveMaximum": 1},
        "pair": {"type": "array", "items": {"type": "integer", "minimum": 0}, "minItems": 2, "maxItems": 2},
        "T_file": {"type": "string"},
        "nn_weight": _nonneg,
    }),
    "probe": _obj({
        "E": _num,
        "E_grid": _obj({"start": _num, "stop": _num, "num": {"type": "integer", "minimum": 1}},
                       ["start", "stop", "num"]),
        "E_tilde": _num,
        "epsilon": _nonneg,
        "lambda": _nonneg,
    }),
    "mc": _obj({
        "samples": {"type": "integer", "minimum": 2},
        "seed": {"type": "integer", "minimum": 0, "maximum": 2 ** 64 - 1},
        "batch_size": {"type": "integer", "minimum": 1},
    }),
    "output": _obj({"path": {"type": "string", "minLength": 1}, "format": {"enum": ["csv", "json"]}}),
    "tolerances": _obj({
        "sigma": _pos,
        "min_pass_fraction": {"type": "number", "minimum": 0, "maximum": 1},
        "rel": _pos,
        "slope_target": _num,
        "slope_tol": _pos,
    }),
    "toymodel": _obj({
        "deltas": {"type": "array", "items": {"type": "number", "minimum": 0, "exclusiveMaximum": 1},
                   "minItems": 1},
        "decomposition": {"type": "boolean"},
        "rel_tol": _pos,
    }),
    "bounds": _obj({"eta": _pos, "n_vectors": {"type": "integer", "minimum": 1}}),
})

DEFAULTS = {
    "lattice": {"d": 1, "L": 16, "bc": "periodic"},
    "disorder": {"kind": "iid"},
    "probe": {"E": 0.0, "epsilon": 0.1, "lambda": 1.0},
    "mc": {"samples": 10000, "seed": 0, "batch_size": 2000},
    "output": {"format": "csv"},
    "tolerances": {"sigma": 3.0, "min_pass_fraction": 0.95, "rel": 1e-6, "slope_target": 2.0, "slope_tol": 0.4},
    "toymodel": {"deltas": [0.05, 0.1, 0.15, 0.2], "decomposition": False, "rel_tol": 1e-11},
    "bounds": {"eta": 1.0, "n_vectors": 100},
}
DEFAULT_GRID = {"start": -1.0, "stop": 5.0, "num": 21}


class ConfigError(ValueError):
    pass


# -- config ----------------------------------------------------------------

def load_config(path: str | None) -> dict:
    if path is None:
        return {}
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc.strerror}") from None
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: line {exc.lineno}, column {exc.colno}: {exc.msg}") from None
    return data


def resolve_config(raw: dict, command: str, seed: int | None = None) -> dict:
    """Validate, then fill defaults.  ``seed`` overrides ``mc.seed``."""
    try:
        jsonschema.validate(raw, SCHEMA)
    except jsonschema.ValidationError as exc:
        where = "/".join(str(p) for p in exc.absolute_path) or "<root>"
        raise ConfigError(f"config {where}: {exc.message}") from None
    cfg = copy.deepcopy(DEFAULTS)
    if command == "decomposition":
        cfg["lattice"] = {"d": 1, "L": 2, "bc": "restriction"}
    for section, values in raw.items():
        cfg[section].update(copy.deepcopy(values))
    if seed is not None:
        cfg["mc"]["seed"] = int(seed)
    probe = cfg["probe"]
    if command in ("dos", "trace") and "E_grid" not in probe:
        if "E" in raw.get("probe", {}):
            probe["E_grid"] = {"start": probe["E"], "stop": probe["E"], "num": 1}
        else:
            probe["E_grid"] = dict(DEFAULT_GRID)
    if command == "genfun":
        probe.setdefault("E_tilde", probe["E"] + 1.0)
    if command not in ("bounds", "toymodel", "decomposition") and probe["epsilon"] <= 0:
        raise ConfigError("config probe/epsilon: must be > 0 for resolvent quantities")
    dis = cfg["disorder"]
    if dis["kind"] == "toymodel":
        dis.setdefault("delta", 0.1)
    if dis["kind"] == "nonneg" and "T_file" not in dis:
        dis.setdefault("nn_weight", 0.5)
    cfg["output"].setdefault("path", command)
    return cfg


def build_lattice(cfg: dict) -> LatticeSpec:
    try:
        return LatticeSpec(**cfg["lattice"])
    except LatticeError as exc:
        raise ConfigError(f"config lattice: {exc}") from None


def build_model(cfg: dict, spec: LatticeSpec) -> DisorderModel:
    dis = cfg["disorder"]
    try:
        if dis["kind"] == "iid":
            return DisorderModel.iid(spec.N)
        if dis["kind"] == "nonneg":
            if "T_file" in dis:
                model = DisorderModel.from_csv(dis["T_file"])
                if model.N != spec.N:
                    raise DisorderError(f"T is {model.N}x{model.N} but the lattice has {spec.N} sites")
                return model
            return nearest_neighbour_correlation(spec, dis["nn_weight"])
        pair = tuple(dis["pair"]) if "pair" in dis else default_pair(spec)
        dis["pair"] = list(pair)
        return DisorderModel.toymodel(spec.N, dis["delta"], pair, spec)
    except (DisorderError, OSError, ValueError) as exc:
        raise ConfigError(f"config disorder: {exc}") from None


def energy_grid(cfg: dict) -> np.ndarray:
    g = cfg["probe"]["E_grid"]
    return np.linspace(g["start"], g["stop"], g["num"])


# -- output ----------------------------------------------------------------

def _jsonable(x):
    if isinstance(x, dict):
        return {str(k): _jsonable(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_jsonable(v) for v in x]
    if isinstance(x, np.ndarray):
        return _jsonable(x.tolist())
    if isinstance(x, (complex, np.complexfloating)):
        return {"re": _jsonable(x.real), "im": _jsonable(x.imag)}
    if isinstance(x, (bool, np.bool_)):
        return bool(x)
    if isinstance(x, (int, np.integer)):
        return int(x)
    if isinstance(x, (float, np.floating)):
        x = float(x)
        return x if math.isfinite(x) else str(x)
    return x


def _fmt(x) -> str:
    return "%.17g" % x if isinstance(x, (float, np.floating)) else str(x)


def csv_text(header: list, rows, cfg: dict) -> str:
    buf = io.StringIO()
    buf.write(f"# susylloyd {__version__}\n")
    buf.write("# config " + json.dumps(cfg, sort_keys=True, separators=(",", ":")) + "\n")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for row in rows:
        w.writerow([_fmt(v) for v in row])
    return buf.getvalue()


def json_text(cfg: dict, results: dict, table: dict | None = None) -> str:
    doc = {"version": f"susylloyd {__version__}", "config": cfg, "results": results}
    if table is not None:
        doc["table"] = table
    return json.dumps(_jsonable(doc), sort_keys=True, indent=2) + "\n"


def write_outputs(out_dir: Path, cfg: dict, header: list | None, rows, results: dict) -> list[Path]:
    """CSV table plus JSON summary, or a single JSON holding both."""
    out_dir.mkdir(parents=True, exist_ok=True)
    stem = cfg["output"]["path"]
    written = []
    if header is not None and cfg["output"]["format"] == "csv":
        p = out_dir / f"{stem}.csv"
        p.write_text(csv_text(header, rows, cfg))
        written.append(p)
        table = None
    elif header is not None:
        table = {h: [r[i] for r in rows] for i, h in enumerate(header)}
    else:
        table = None
    p = out_dir / f"{stem}.json"
    p.write_text(json_text(cfg, results, table))
    written.append(p)
    return written


# -- commands ----------------------------------------------------------------
# Each returns (header, rows, results, passed).

def _plan(cfg: dict) -> McPlan:
    mc = cfg["mc"]
    return McPlan(mc["samples"], mc["seed"], batch_size=mc["batch_size"])


def _exact_trace_grid(spec, model, energies, eps, lam):
    return np.array([shifted_trace(spec, model, float(E), eps, lam) for E in energies])


def _sigma_summary(z: np.ndarray, cfg: dict) -> dict:
    tol = cfg["tolerances"]
    within = z <= tol["sigma"]
    frac = float(np.mean(within))
    return {"max_z": float(np.max(z)), "within": int(np.sum(within)), "points": int(z.size),
            "pass_fraction": frac, "passed": frac >= tol["min_pass_fraction"]}


def cmd_dos(cfg: dict, threads: int):
    spec = build_lattice(cfg)
    model = build_model(cfg, spec)
    p = cfg["probe"]
    E = energy_grid(cfg)
    est = mc_dos(_plan(cfg), spec, model, E, p["epsilon"], p["lambda"], threads=threads)
    exact = -_exact_trace_grid(spec, model, E, p["epsilon"], p["lambda"]).imag / (np.pi * spec.N)
    z = est.z_scores(exact)
    rows = [(float(e), float(m), float(s), float(x)) for e, m, s, x in zip(E, est.mean, est.stderr, exact)]
    results = _sigma_summary(z, cfg)
    results["max_abs_dev_over_stderr"] = results.pop("max_z")
    results["exact"] = "shifted free resolvent" + (" (approximate for toymodel)" if model.kind == "toymodel" else "")
    return ["E", "rho_mc", "stderr", "rho_exact"], rows, results, results["passed"]


def cmd_trace(cfg: dict, threads: int):
    spec = build_lattice(cfg)
    model = build_model(cfg, spec)
    p = cfg["probe"]
    E = energy_grid(cfg)
    est = mc_trace_grid(_plan(cfg), spec, model, E, p["epsilon"], p["lambda"], threads=threads)
    exact = _exact_trace_grid(spec, model, E, p["epsilon"], p["lambda"])
    z = est.z_scores(exact)
    rows = [(float(e), m.real, m.imag, s.real, s.imag, x.real, x.imag, float(zz))
            for e, m, s, x, zz in zip(E, est.mean, est.stderr, exact, z)]
    results = _sigma_summary(z, cfg)
    return (["E", "re_mc", "im_mc", "stderr_re", "stderr_im", "re_exact", "im_exact", "z"], rows, results,
            results["passed"])


def cmd_g2(cfg: dict, threads: int):
    p = cfg["probe"]
    r = verify_g2_single_site(p["E"], p["epsilon"], p["lambda"], rel_tol=cfg["tolerances"]["rel"])
    return None, [], r, r["passed"]


def cmd_genfun(cfg: dict, threads: int):
    spec = build_lattice(cfg)
    model = build_model(cfg, spec)
    p = cfg["probe"]
    probe = SpectralProbe(p["E"], p["epsilon"], p["lambda"], p["E_tilde"])
    plan = McPlan(cfg["mc"]["samples"], cfg["mc"]["seed"], "genfun", cfg["mc"]["batch_size"])
    est = mc_average(plan, spec, model, probe, threads=threads)
    exact = exact_genfun(spec, model, p["E"], p["E_tilde"], p["epsilon"], p["lambda"])
    z = float(est.z_scores(exact)[0])
    # per-sample finite difference in E~ against -Tr G
    h = 1e-5
    stream = RngStream(cfg["mc"]["seed"], 0)
    fd_worst = 0.0
    for m in range(5):
        H = assemble(spec, p["lambda"], sample_potential(model, stream, m))
        up = gen_function(H, SpectralProbe(p["E"], p["epsilon"], p["lambda"], p["E"] + h))
        dn = gen_function(H, SpectralProbe(p["E"], p["epsilon"], p["lambda"], p["E"] - h))
        tr = green(H, probe).trace
        fd_worst = max(fd_worst, abs((up - dn) / (2 * h) + tr) / abs(tr))
    mean, se = est.scalar()
    results = {"mc": mean, "stderr": se, "exact": exact, "z": z, "fd_rel_err": fd_worst,
               "passed": bool(z <= cfg["tolerances"]["sigma"] and fd_worst < cfg["tolerances"]["rel"])}
    return None, [], results, results["passed"]


def cmd_toymodel(cfg: dict, threads: int):
    spec = build_lattice(cfg)
    p, t, tol = cfg["probe"], cfg["toymodel"], cfg["tolerances"]
    dis = cfg["disorder"]
    pair = tuple(dis["pair"]) if "pair" in dis else default_pair(spec)
    dis["pair"] = list(pair)
    try:
        sweep = toymodel_error_sweep(spec, t["deltas"], p["lambda"], p["E"], p["epsilon"], pair,
                                     rel_tol=t["rel_tol"])
    except ValueError as exc:
        raise ConfigError(f"config toymodel: {exc}") from None
    rows = [(d, v, e) for d, v, e in zip(sweep.deltas, sweep.deviations, sweep.errors)]
    results = {"floor": sweep.floor, "slope": sweep.slope, "intercept": sweep.intercept}
    passed = True
    if math.isfinite(sweep.slope):
        passed = abs(sweep.slope - tol["slope_target"]) <= tol["slope_tol"]
    results["slope_passed"] = passed
    if t["decomposition"]:
        checks = _decomposition_rows(t["deltas"], p)
        results["decomposition"] = [{"delta": r[0], "trace": complex(r[1], r[2]), "oracle": complex(r[3], r[4]),
                                     "rel_err": r[6]} for r in checks]
        ok = all(r[6] < 1e-4 for r in checks)
        results["decomposition_passed"] = ok
        passed = passed and ok
    results["passed"] = passed
    return ["delta", "relative_deviation", "quadrature_error"], rows, results, passed


def _decomposition_rows(deltas, p) -> list:
    two = LatticeSpec(1, 2, "restriction")
    rows = []
    for d in deltas:
        if d <= 0:
            continue
        dec = toymodel_decomposition(two, d, p["lambda"], p["E"], p["epsilon"])
        oracle = toymodel_oracle(two, d, p["E"], p["epsilon"], p["lambda"], (0, 1), method="contour").value
        err = abs(dec.trace - oracle) / abs(oracle)
        t = dec.terms
        rows.append((float(d), dec.trace.real, dec.trace.imag, oracle.real, oracle.imag, abs(dec.remainder), err,
                     t["++"].real, t["++"].imag, t["+-"].real, t["+-"].imag, t["-+"].real, t["-+"].imag,
                     dec.remainder.real, dec.remainder.imag))
    return rows


def cmd_decomposition(cfg: dict, threads: int):
    spec = build_lattice(cfg)
    if spec.N != 2:
        raise ConfigError("config lattice: the decomposition command needs the two-site lattice (d=1, L=2)")
    p = cfg["probe"]
    rows = _decomposition_rows(cfg["toymodel"]["deltas"], p)
    if not rows:
        raise ConfigError("config toymodel/deltas: need at least one delta > 0")
    ds = np.array([r[0] for r in rows])
    rs = np.array([r[5] for r in rows])
    results = {"max_rel_err": max(r[6] for r in rows)}
    if len(rows) >= 2:
        results["remainder_order"] = float(np.polyfit(np.log(ds), np.log(rs), 1)[0])
    results["passed"] = results["max_rel_err"] < 1e-4
    header = ["delta", "re_trace", "im_trace", "re_oracle", "im_oracle", "abs_remainder", "rel_err",
              "re_I_pp", "im_I_pp", "re_I_pm", "im_I_pm", "re_I_mp", "im_I_mp", "re_R", "im_R"]
    return header, rows, results, results["passed"]


def cmd_bounds(cfg: dict, threads: int):
    spec = build_lattice(cfg)
    p, b = cfg["probe"], cfg["bounds"]
    delta = cfg["disorder"].get("delta", 0.25)
    ct = combes_thomas_check(spec, p["lambda"], p["E"], b["eta"], n_vectors=b["n_vectors"])
    results = {"combes_thomas": ct}
    passed = ct["passed"]
    if spec.N >= 3:
        sc = schur_bounds_check(spec, delta, p["lambda"], p["E"], n_vectors=b["n_vectors"])
        xf = x_form_check(ToymodelBlocks.build(spec, delta, p["lambda"], p["E"]))
        results.update(schur=sc, x_form=xf)
        passed = passed and sc["passed"] and xf["passed"]
    results["passed"] = passed
    return None, [], results, passed


def cmd_spectrum(cfg: dict, threads: int):
    spec = build_lattice(cfg)
    model = build_model(cfg, spec)
    lam = cfg["probe"]["lambda"]
    V = sample_potential(model, RngStream(cfg["mc"]["seed"], 0), 0)
    ev = eig_spectrum(assemble(spec, lam, V))
    free = np.sort(free_spectrum(spec))
    H0 = np.array(build_laplacian(spec).matrix)
    rows = [(k, float(e), float(f)) for k, (e, f) in enumerate(zip(ev, free))]
    trace_err = abs(float(np.sum(ev)) - float(np.trace(H0) + lam * np.sum(V)))
    results = {"min": float(ev[0]), "max": float(ev[-1]), "trace_error": trace_err, "passed": True}
    return ["k", "eigenvalue", "free_eigenvalue"], rows, results, True


HANDLERS = {
    "dos": cmd_dos,
    "trace": cmd_trace,
    "g2": cmd_g2,
    "genfun": cmd_genfun,
    "toymodel": cmd_toymodel,
    "decomposition": cmd_decomposition,
    "bounds": cmd_bounds,
    "spectrum": cmd_spectrum,
}


def run_verify(suite: str, stream=None) -> bool:
    stream = stream or sys.stdout
    rows = SUITES[suite]()
    width = max(len(r[0]) for r in rows)
    for name, ok, detail in rows:
        print(f"{name:<{width}}  {'PASS' if ok else 'FAIL'}  {detail}", file=stream)
    ok = all(r[1] for r in rows)
    print(f"{suite}: {sum(r[1] for r in rows)}/{len(rows)} passed", file=stream)
    return ok


# -- entry point -------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="susylloyd", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"susylloyd {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        sp = sub.add_parser(name)
        if name == "verify":
            sp.add_argument("suite", choices=sorted(SUITES))
        else:
            sp.add_argument("--config", metavar="PATH")
            sp.add_argument("--seed", type=int, help="overrides mc.seed")
            sp.add_argument("--threads", type=int, default=1, help="worker threads (results do not depend on it)")
            sp.add_argument("--out", metavar="DIR", default=".")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if args.command == "verify":
            return EXIT_OK if run_verify(args.suite) else EXIT_THRESHOLD
        if args.threads < 1:
            raise ConfigError("--threads must be >= 1")
        if args.seed is not None and not 0 <= args.seed < 2 ** 64:
            raise ConfigError("--seed must be an unsigned 64-bit integer")
        cfg = resolve_config(load_config(args.config), args.command, args.seed)
        header, rows, results, passed = HANDLERS[args.command](cfg, args.threads)
        for p in write_outputs(Path(args.out), cfg, header, rows, results):
            print(p)
        print(f"{args.command}: {'PASS' if passed else 'FAIL'}")
        return EXIT_OK if passed else EXIT_THRESHOLD
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (NumericalError, QuadratureError, np.linalg.LinAlgError, FloatingPointError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL


if __name__ == "__main__":
    sys.exit(main())
