"""Batch front end: ``fkising {verify,rate,green,strip,sample,report} [options]``.

Every command writes its primary outputs (CSV or JSON) plus a manifest under
``--out``.  Primary outputs depend only on the parameters, so repeated runs
are byte-identical; wall time and timestamps go to a ``.time.json`` sidecar.

Exit codes: 0 success, 1 a gated check failed, 2 invalid input.
"""

from __future__ import annotations

import argparse
import csv
import hashlib
import io
import json
import math
import sys
import time
from dataclasses import dataclass, field
from datetime import datetime, timezone
from pathlib import Path

from . import __version__
from .exact_loop import EnumerationCapError, config_bonds, medial_of, observable_bulk_exact, observable_exact
from .lattice import (
    BETA_C,
    P_SD,
    build_box,
    build_rectangle_domain,
    build_strip_domain,
    build_wedge_domain,
    params_from_beta,
    params_from_p,
    p_from_beta,
)
from .massive_walk import (
    RateQuery,
    bulk_stencil_residual,
    green_function,
    solve_rate,
    wedge_roles,
    wedge_stencil_residual,
)
from .relations import (
    BRUTE_FORCE_BONDS,
    ResidualReport,
    check_argument_lines,
    check_boundary_modulus,
    check_measure_from_tables,
    check_measure_proportionality,
    check_vertex_relation,
    strip_contraction,
    strip_projection_check,
    strip_ratio_extrapolation,
)

EXIT_OK, EXIT_FAIL, EXIT_INPUT = 0, 1, 2

CATALOG_P = (0.2, 0.3, 0.4, P_SD, 0.7)
CATALOG_CAP = 26  # the strip of height 2 and halfwidth 3 has 26 enumerated bonds
GATES = {
    "check_vertex_relation": 1e-10,
    "check_argument_lines": 1e-12,
    "check_boundary_modulus": 1e-12,
    "bulk_stencil_residual": 1e-10,
    "wedge_stencil_residual": 1e-10,
    "check_measure_proportionality": 1e-12,
}
REPORT_CHECKS = tuple(k for k in GATES if k != "check_measure_proportionality")

DESK_PRESET = {"p": 0.45, "box": 64, "samples": 100_000, "separations": "4-14", "seed": 2026}


class InputError(ValueError):
    """Bad command-line or config-file input (exit code 2)."""


def fmt(v) -> str:
    """17 significant digits, locale independent; other values pass through str()."""
    if isinstance(v, float):
        return f"{v:.17g}"
    if isinstance(v, complex):
        return f"{v.real:.17g}{v.imag:+.17g}j"
    return str(v)


def write_table(path: Path, rows: list[dict], fmt_name: str) -> Path:
    path = path.with_suffix("." + fmt_name)
    path.parent.mkdir(parents=True, exist_ok=True)
    if fmt_name == "json":
        path.write_text(json.dumps(rows, indent=2, sort_keys=False, default=fmt) + "\n")
        return path
    buf = io.StringIO()
    cols = list(rows[0]) if rows else []
    wr = csv.writer(buf, lineterminator="\n")
    wr.writerow(cols)
    for r in rows:
        wr.writerow([fmt(r[c]) for c in cols])
    path.write_text(buf.getvalue())
    return path


def build_id() -> str:
    """Digest of the package sources, stable across checkouts of the same code."""
    h = hashlib.sha256()
    for f in sorted(Path(__file__).parent.glob("*.py")):
        h.update(f.name.encode())
        h.update(f.read_bytes())
    return h.hexdigest()[:12]


@dataclass
class RunConfig:
    subcommand: str
    params: dict
    output_path: Path
    format: str = "csv"
    started: float = field(default_factory=time.time)

    def __post_init__(self):
        if self.format not in ("csv", "json"):
            raise InputError(f"format must be csv or json, not {self.format!r}")
        if self.params.get("p") is not None and self.params.get("beta") is not None:
            raise InputError("give exactly one of --p and --beta")
        tol = self.params.get("tol")
        if tol is not None and not tol > 0:
            raise InputError("tolerances must be positive")

    def p_value(self, required: bool = True) -> float | None:
        p, beta = self.params.get("p"), self.params.get("beta")
        if p is None and beta is None:
            if required:
                raise InputError("this command needs --p or --beta")
            return None
        if p is not None:
            if not 0.0 < p < 1.0:
                raise InputError(f"p must lie in (0, 1); got {p}")
            return p
        if not beta > 0:
            raise InputError(f"beta must be positive; got {beta}")
        return p_from_beta(beta)

    def beta_value(self) -> float:
        if self.params.get("beta") is not None:
            return self.params["beta"]
        p = self.p_value()
        return -0.5 * math.log1p(-p)

    def write_manifest(self, name: str, extra: dict | None = None) -> Path:
        self.output_path.mkdir(parents=True, exist_ok=True)
        manifest = {
            "command": self.subcommand,
            "parameters": {k: v for k, v in sorted(self.params.items()) if k not in ("config",)},
            "format": self.format,
            "version": __version__,
            "build": build_id(),
        }
        if extra:
            manifest.update(extra)
        path = self.output_path / f"{name}.manifest.json"
        path.write_text(json.dumps(manifest, indent=2, sort_keys=True, default=fmt) + "\n")
        sidecar = {
            "finished": datetime.now(timezone.utc).isoformat(timespec="seconds"),
            "wall_seconds": round(time.time() - self.started, 3),
        }
        (self.output_path / f"{name}.time.json").write_text(json.dumps(sidecar, indent=2) + "\n")
        return path


# ---------------------------------------------------------------------------
# verify


def catalog_domains():
    return [
        ("rect_1x1", build_rectangle_domain(1, 1)),
        ("rect_2x1", build_rectangle_domain(2, 1)),
        ("rect_2x2", build_rectangle_domain(2, 2)),
        ("rect_3x2", build_rectangle_domain(3, 2)),
        ("strip_h2_hw3", build_strip_domain(2, 3)),
        ("wedge_w22_r4", build_wedge_domain((2, 2), 4)),
    ]


BULK_BOX = ("bulk_4x4", (-1, 2, -1, 2))


def _inject(obs, medial):
    """Shift F along its own line on one interior edge, so only the vertex relation breaks."""
    from .relations import line_of
    ref = obs.e0 if obs.e0 is not None else medial.e_b
    for e in obs.edges:
        if e.tail in medial.vertices and e.head in medial.vertices and e not in (medial.e_a, medial.e_b):
            if len(medial.outgoing.get(e.tail, ())) == 2 and len(medial.incoming.get(e.head, ())) == 2:
                return obs.with_value(e, obs[e] + 1e-3 * line_of(e, ref)), e
    raise RuntimeError("no interior edge to perturb")


def cmd_verify(cfg: RunConfig) -> int:
    cap = cfg.params.get("cap") or CATALOG_CAP
    workers = cfg.params.get("workers") or 1
    gates = dict(GATES)
    if cfg.params.get("tol") is not None:
        gates = {k: cfg.params["tol"] for k in gates}
    p_grid = [cfg.p_value()] if cfg.params.get("p") is not None or cfg.params.get("beta") is not None \
        else list(CATALOG_P)
    fault = bool(cfg.params.get("inject_fault"))
    merged: dict[str, ResidualReport] = {}
    per_case: dict[str, dict] = {k: {} for k in GATES}
    skipped = []
    first_failure = None
    order = []

    def record(report: ResidualReport, case: str):
        nonlocal first_failure
        name = report.check_name
        merged[name] = report if name not in merged else merged[name].merge(report)
        per_case[name][case] = report.max_abs_residual
        order.append(name)
        if first_failure is None and not report.passed(gates[name]):
            first_failure = (name, case, report.max_abs_residual)

    for name, dom in catalog_domains():
        n_bonds = len(dom.dobrushin_bonds)
        if n_bonds > cap:
            skipped.append({"domain": name, "bonds": n_bonds, "cap": cap})
            continue
        medial = medial_of(dom)
        for p in p_grid:
            pr = params_from_p(p)
            case = f"{name}@p={p:.17g}"
            obs = observable_exact(dom, pr, cap=cap, workers=workers)
            if fault:
                obs, _ = _inject(obs, medial)
                fault = False
            record(check_vertex_relation(obs, medial, pr), case)
            record(check_argument_lines(obs, medial), case)
            record(check_boundary_modulus(dom, pr, obs, cap=cap), case)
            if n_bonds <= BRUTE_FORCE_BONDS:
                record(check_boundary_modulus(dom, pr, obs, cap=cap, probs_from="clusters"), case + ":clusters")
                record(check_measure_proportionality(dom, pr), case)
            else:
                record(check_measure_from_tables(dom, pr, cap=cap), case)
            if name.startswith("wedge"):
                record(wedge_stencil_residual(obs, pr, wedge_roles(dom, (2, 2))), case)

    bname, (x0, x1, y0, y1) = BULK_BOX
    box = build_box(x0, x1, y0, y1)
    if len(config_bonds(box, "free")) > cap:
        skipped.append({"domain": bname, "bonds": len(box.bonds), "cap": cap})
    else:
        medial = medial_of(box)
        for p in p_grid:
            pr = params_from_p(p)
            case = f"{bname}@p={p:.17g}"
            obs = observable_bulk_exact(box, pr, cap=cap, workers=workers)
            record(check_vertex_relation(obs, medial, pr), case)
            record(check_argument_lines(obs, medial), case)
            record(bulk_stencil_residual(obs, pr), case)

    out = cfg.output_path
    out.mkdir(parents=True, exist_ok=True)
    written = []
    for name in REPORT_CHECKS:
        if name not in merged:
            continue
        rep = merged[name]
        rep.notes = {"per_case_max": per_case[name], "gate": gates[name], "passed": rep.passed(gates[name])}
        path = out / f"{name}.json"
        path.write_text(rep.to_json() + "\n")
        written.append(path.name)
    prop = merged.get("check_measure_proportionality")
    summary = {
        "passed": first_failure is None,
        "first_failure": None if first_failure is None else
        {"check": first_failure[0], "case": first_failure[1], "residual": first_failure[2]},
        "gates": gates,
        "max_residuals": {k: r.max_abs_residual for k, r in merged.items()},
        "cross_checks": {"check_measure_proportionality": None if prop is None else
                         {"max_abs_residual": prop.max_abs_residual, "per_case_max": per_case[prop.check_name]}},
        "reports": written,
        "skipped": skipped,
        "p_grid": p_grid,
        "cap": cap,
    }
    (out / "verify_summary.json").write_text(json.dumps(summary, indent=2, sort_keys=True) + "\n")
    cfg.write_manifest("verify")
    for s in skipped:
        print(f"skipped {s['domain']}: {s['bonds']} bonds > cap {s['cap']}")
    if first_failure is not None:
        name, case, val = first_failure
        print(f"FAIL {name} {case} residual={val:.3e} gate={gates[name]:.1e}")
        return EXIT_FAIL
    for name, rep in merged.items():
        print(f"PASS {name} max={rep.max_abs_residual:.3e} checked={rep.count_checked}")
    return EXIT_OK


# ---------------------------------------------------------------------------
# rate


def _direction(text: str) -> tuple[int, int]:
    try:
        a1, a2 = (int(v) for v in text.split(","))
    except ValueError as exc:
        raise InputError(f"direction must look like '1,0'; got {text!r}") from exc
    if (a1, a2) == (0, 0):
        raise InputError("direction must be nonzero")
    return a1, a2


def cmd_rate(cfg: RunConfig) -> int:
    beta = cfg.beta_value()
    if not beta < BETA_C:
        raise InputError(f"the rate function needs beta < beta_c = {BETA_C:.17g} (subcritical); got {beta:.17g}")
    rows = []
    for text in cfg.params.get("direction") or ["1,0"]:
        a = _direction(text)
        res = solve_rate(RateQuery(beta, a))
        row = {"beta": beta, "a1": a[0], "a2": a[1], "s": res.s, "rate": res.rate, "neg_ln_lambda": ""}
        if 0 in a:
            lam = strip_contraction(params_from_beta(beta))
            row["neg_ln_lambda"] = -math.log(lam) * max(abs(a[0]), abs(a[1]))
        rows.append(row)
    path = write_table(cfg.output_path / "rate", rows, cfg.format)
    cfg.write_manifest("rate")
    for r in rows:
        print(f"beta={fmt(r['beta'])} a=({r['a1']},{r['a2']}) rate={fmt(r['rate'])}")
    print(f"wrote {path}")
    return EXIT_OK


# ---------------------------------------------------------------------------
# green


def cmd_green(cfg: RunConfig) -> int:
    mass = cfg.params.get("mass")
    if mass is None:
        mass = params_from_p(cfg.p_value()).mass
    elif cfg.params.get("p") is not None or cfg.params.get("beta") is not None:
        raise InputError("give either --mass or --p/--beta, not both")
    if not 0 < mass < 1:
        raise InputError(f"mass must lie in (0, 1); got {mass} (p >= p_sd gives mass 1)")
    radius = cfg.params.get("radius") or 400
    tol = cfg.params.get("tol") or 1e-12
    a = _direction(cfg.params.get("direction") or "1,0")
    nmax = cfg.params.get("nmax") or 150
    try:
        field_ = green_function(mass, radius=radius, tol=tol)
    except ValueError as exc:
        raise InputError(str(exc)) from exc
    out = cfg.output_path
    out.mkdir(parents=True, exist_ok=True)
    field_.write_csv(out / "green_field.csv", max_distance=cfg.params.get("field_radius") or 20)
    rows = [{"n": n, "rate_estimate": r} for n, r in field_.rate_series(a, range(1, nmax + 1))]
    path = write_table(out / "green_series", rows, cfg.format)
    cfg.write_manifest("green", {"resolved": {"radius": radius, "tol": tol, "direction": list(a), "nmax": nmax},
                                 "mass": mass, "tail_bound": field_.tail_bound,
                                 "iterations": field_.iterations, "defect": field_.defect})
    for n in (50, 100, 150):
        hit = [r for r in rows if r["n"] == n]
        if hit:
            print(f"n={n} -(1/n) ln G = {fmt(hit[0]['rate_estimate'])}")
    print(f"wrote {path}")
    return EXIT_OK


# ---------------------------------------------------------------------------
# strip


def _int_list(text) -> list[int]:
    if isinstance(text, (list, tuple)):
        return [int(v) for v in text]
    text = str(text)
    if "-" in text and "," not in text:
        lo, hi = (int(v) for v in text.split("-"))
        return list(range(lo, hi + 1))
    return [int(v) for v in text.split(",") if v]


def cmd_strip(cfg: RunConfig) -> int:
    from . import montecarlo as mc

    p = cfg.p_value()
    pr = params_from_p(p)
    try:
        lam = strip_contraction(pr)
    except ValueError as exc:
        raise InputError(str(exc)) from exc
    height = cfg.params.get("height") or 2
    halfwidths = _int_list(cfg.params.get("halfwidths") or "1,2,3")
    cap = cfg.params.get("cap") or CATALOG_CAP
    rows = []
    try:
        ex = strip_ratio_extrapolation(height, halfwidths, pr, cap)
        proj = strip_projection_check(pr, halfwidths, height, 1, cap) if len(halfwidths) >= 3 else None
    except (EnumerationCapError, ValueError) as exc:
        raise InputError(str(exc)) from exc
    for hw, ratios in zip(ex.halfwidths, ex.ratios):
        for k, r in enumerate(ratios, start=1):
            rows.append({"source": "exact", "halfwidth": hw, "k": k, "ratio": r, "std_error": 0.0, "lambda": lam})
    for k, r in enumerate(ex.extrapolated, start=1):
        rows.append({"source": "extrapolated", "halfwidth": "inf", "k": k, "ratio": r, "std_error": "",
                     "lambda": lam})
    samples = cfg.params.get("samples")
    if samples:
        hw = cfg.params.get("mc_halfwidth") or 64
        heights = _int_list(cfg.params.get("mc_heights") or "2-7")
        seed = cfg.params.get("seed") if cfg.params.get("seed") is not None else 2026
        est = {h: mc.estimate_strip_crossing(h, hw, p, samples, seed, workers=cfg.params.get("workers") or 1)
               for h in heights}
        for h in heights[:-1]:
            v, se = mc.ln_ratio(est[h], est[h + 1])
            rows.append({"source": "montecarlo", "halfwidth": hw, "k": h, "ratio": math.exp(v),
                         "std_error": se, "lambda": lam, "ln_ratio": v, "z": (v - math.log(lam)) / se})
    cols = ["source", "halfwidth", "k", "ratio", "std_error", "lambda", "ln_ratio", "z"]
    rows = [{c: r.get(c, "") for c in cols} for r in rows]
    path = write_table(cfg.output_path / "strip", rows, cfg.format)
    extra = {"lambda": lam, "resolved": {"height": height, "halfwidths": halfwidths, "cap": cap}}
    if proj is not None:
        extra["projection_check"] = {"predicted": fmt(proj.predicted), "extrapolated": fmt(proj.extrapolated),
                                     "residual": proj.residual}
    cfg.write_manifest("strip", extra)
    print(f"lambda={fmt(lam)} extrapolated={[fmt(v) for v in ex.extrapolated]}")
    print(f"wrote {path}")
    return EXIT_OK


# ---------------------------------------------------------------------------
# sample


def cmd_sample(cfg: RunConfig) -> int:
    from . import montecarlo as mc
    from .massive_walk import rate_for_p

    prm = dict(cfg.params)
    if prm.get("preset") == "desk":
        for k, v in DESK_PRESET.items():
            if prm.get(k) is None and not (k == "p" and prm.get("beta") is not None):
                prm[k] = v
        cfg.params = prm
    elif prm.get("preset") is not None:
        raise InputError(f"unknown preset {prm['preset']!r}; available: desk")
    p = cfg.p_value()
    box = prm.get("box") or 64
    samples = prm.get("samples") or 10_000
    seps = _int_list(prm.get("separations") or "4-14")
    seed = prm.get("seed") if prm.get("seed") is not None else 0
    chains = prm.get("chains") or 1
    workers = prm.get("workers") or 1
    try:
        est, meta = mc.two_point_profile(box, p, seps, samples, seed, burn_in=prm.get("burn_in"),
                                         n_chains=chains, workers=workers)
    except ValueError as exc:
        raise InputError(str(exc)) from exc
    rows = [{"quantity": "two_point", "p": p, "box": box, "n": n, "direction": "avg(1,0;0,1)",
             "mean": e.mean, "std_error": e.std_error, "n_samples": e.n_samples,
             "tau_int": e.autocorrelation_time_estimate} for n, e in est.items()]
    path = write_table(cfg.output_path / "estimates", rows, cfg.format)
    fits = []
    if p >= P_SD:
        print(f"warning: p={p} is not below p_sd={P_SD:.6f}; no exponential decay, rate fit skipped",
              file=sys.stderr)
    else:
        target = rate_for_p(p, (1, 0))
        for power in (0.0, 0.5):
            try:
                r, se = mc.fit_decay_rate([(n, est[n]) for n in seps], prefactor_power=power)
            except ValueError as exc:
                print(f"warning: fit with prefactor power {power} skipped: {exc}", file=sys.stderr)
                continue
            fits.append({"prefactor_power": power, "rate": r, "std_error": se, "target": target,
                         "relative_deviation": (r - target) / target})
        if fits:
            write_table(cfg.output_path / "fit", fits, cfg.format)
    cfg.write_manifest("sample", {"resolved": {"p": p, "box": box, "samples": samples, "separations": seps,
                                               "seed": seed}, "chains": chains, "burn_in": meta["burn_in"], "rng": meta["rng"],
                                  "pairs_per_separation": meta["pairs_per_separation"]})
    for f in fits:
        print(f"prefactor n^-{f['prefactor_power']}: rate={f['rate']:.6f} +- {f['std_error']:.6f} "
              f"(target {f['target']:.6f})")
    print(f"wrote {path}")
    return EXIT_OK


# ---------------------------------------------------------------------------
# report


def cmd_report(cfg: RunConfig) -> int:
    out = cfg.output_path
    files = sorted(out.glob("*.json"))
    reports = []
    for f in files:
        if f.name.endswith((".manifest.json", ".time.json")) or f.name == "verify_summary.json":
            continue
        try:
            data = json.loads(f.read_text())
        except json.JSONDecodeError as exc:
            raise InputError(f"{f} is not valid JSON: {exc}") from exc
        if isinstance(data, dict) and "check_name" in data:
            reports.append(data)
    if not reports:
        raise InputError(f"no residual reports found in {out}")
    rows = []
    failed = False
    for r in reports:
        gate = r.get("notes", {}).get("gate", GATES.get(r["check_name"], 1e-10))
        ok = r["max_abs_residual"] < gate
        failed |= not ok
        rows.append({"check": r["check_name"], "max_abs_residual": r["max_abs_residual"],
                     "count_checked": r["count_checked"], "count_excluded": r.get("count_excluded", 0),
                     "gate": gate, "status": "pass" if ok else "fail"})
    path = write_table(out / "report", rows, cfg.format)
    for r in rows:
        print(f"{r['status'].upper():4s} {r['check']:28s} {r['max_abs_residual']:.3e} (gate {r['gate']:.0e})")
    print(f"wrote {path}")
    return EXIT_FAIL if failed else EXIT_OK


# ---------------------------------------------------------------------------
# argument parsing


COMMANDS = {"verify": cmd_verify, "rate": cmd_rate, "green": cmd_green, "strip": cmd_strip,
            "sample": cmd_sample, "report": cmd_report}


def read_config_file(path) -> dict[str, str]:
    """Flat ``key = value`` lines; '#' starts a comment."""
    out = {}
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise InputError(f"cannot read config file {path}: {exc}") from exc
    for lineno, line in enumerate(text.splitlines(), start=1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise InputError(f"{path}:{lineno}: expected key = value")
        key, val = (s.strip() for s in line.split("=", 1))
        out[key.replace("-", "_")] = val
    return out


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    g = common.add_mutually_exclusive_group()
    g.add_argument("--p", type=float, help="bond parameter")
    g.add_argument("--beta", type=float, help="inverse temperature, p = 1 - exp(-2 beta)")
    common.add_argument("--seed", type=int)
    common.add_argument("--workers", type=int, default=1)
    common.add_argument("--out", default="fkising_out", help="output directory")
    common.add_argument("--format", choices=("csv", "json"), default="csv")
    common.add_argument("--cap", type=int, help="largest number of enumerated bonds")
    common.add_argument("--tol", type=float)
    common.add_argument("--config", help="flat key = value file; flags override it")

    parser = argparse.ArgumentParser(prog="fkising", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="subcommand", required=True)

    v = sub.add_parser("verify", parents=[common], help="exact-identity suite on the domain catalog")
    v.add_argument("--inject-fault", action="store_true", help=argparse.SUPPRESS)

    r = sub.add_parser("rate", parents=[common], help="large-deviation rate function")
    r.add_argument("--direction", action="append", help="a1,a2 (repeatable)")

    gr = sub.add_parser("green", parents=[common], help="massive Green function and rate series")
    gr.add_argument("--mass", type=float)
    gr.add_argument("--radius", type=int)
    gr.add_argument("--direction")
    gr.add_argument("--nmax", type=int)
    gr.add_argument("--field-radius", type=int)

    s = sub.add_parser("strip", parents=[common], help="strip ratios: exact, extrapolated, sampled")
    s.add_argument("--height", type=int)
    s.add_argument("--halfwidths", help="comma list, e.g. 1,2,3")
    s.add_argument("--samples", type=int, help="also estimate crossing probabilities by sampling")
    s.add_argument("--mc-halfwidth", type=int)
    s.add_argument("--mc-heights", help="range lo-hi or comma list")

    sa = sub.add_parser("sample", parents=[common], help="Monte Carlo two-point campaign")
    sa.add_argument("--preset", choices=("desk",))
    sa.add_argument("--box", type=int)
    sa.add_argument("--samples", type=int)
    sa.add_argument("--burn-in", type=int)
    sa.add_argument("--separations", help="range lo-hi or comma list")
    sa.add_argument("--chains", type=int)

    sub.add_parser("report", parents=[common], help="summarise residual reports in --out")
    return parser


def parse_config(argv=None) -> RunConfig:
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.config:
        file_vals = read_config_file(args.config)
        subparser = parser._subparsers._group_actions[0].choices[args.subcommand]
        dests = {a.dest: a for a in subparser._actions}
        defaults = {}
        for key, val in file_vals.items():
            if key not in dests or key in ("config", "help"):
                raise InputError(f"config key {key!r} is not an option of {args.subcommand}")
            act = dests[key]
            if act.const is True and act.nargs == 0:
                defaults[key] = val.lower() in ("1", "true", "yes", "on")
            elif isinstance(act, argparse._AppendAction):
                defaults[key] = [v.strip() for v in val.split(";")]
            else:
                try:
                    defaults[key] = act.type(val) if act.type else val
                except ValueError as exc:
                    raise InputError(f"config key {key!r}: {exc}") from exc
        # values given on the command line take precedence
        given = dict(vars(args))
        blank = vars(build_parser().parse_args([args.subcommand]))
        for key, val in defaults.items():
            if given.get(key) == blank.get(key):
                setattr(args, key, val)
        if args.p is not None and args.beta is not None:
            if given.get("beta") is not None and "p" in defaults:
                args.p = None
            elif given.get("p") is not None and "beta" in defaults:
                args.beta = None
    params = {k: v for k, v in vars(args).items() if k not in ("subcommand", "out", "format")}
    return RunConfig(args.subcommand, params, Path(args.out), args.format)


def main(argv=None) -> int:
    try:
        cfg = parse_config(argv)
        return COMMANDS[cfg.subcommand](cfg)
    except SystemExit as exc:
        return int(exc.code) if isinstance(exc.code, int) else EXIT_INPUT
    except (InputError, EnumerationCapError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
