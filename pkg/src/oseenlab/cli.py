"""Command-line front end.

Every run writes ``summary.json`` (schema "v1") into the output directory;
tabular commands add a CSV and solve paths add field dumps.  Exit status is 0
on success, 2 for invalid input and 3 when a numerical precondition fails.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import logging
import math
import os
import sys
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Dict, List, Optional, Sequence

import numpy as np

from . import counterexample as cx
from . import estimates as est
from . import resonance as res
from . import solver
from .core import Params, PhysicalBox, SpectralGrid, TPSeries, as_grid
from .errors import IrrationalRatio, OseenLabError, ValidationError
from .fieldio import atomic_write_bytes, read_field, write_field
from .profiles import axial_gaussian, gaussian_poly, swirl_gaussian

SCHEMA = "v1"
OUT_ENV = "OSEENLAB_OUT"

log = logging.getLogger("oseenlab")

# flag defaults; None in the parser means "not given" so config files can fill in
DEFAULTS: Dict[str, Any] = {
    "lam": 1.0,
    "omega": "1",
    "alpha": None,
    "ratio": None,
    "period": None,
    "s": 0.0,
    "q": 2.0,
    "theta": 1.0,
    "n": None,
    "n_max": 64,
    "grid_n": 21,
    "grid_l": 5.0,
    "time_nodes": None,
    "box": "reciprocal",
    "seed": 0,
    "variant": None,
    "window": "resonant",
    "rhs": "gaussian_poly",
    "degree": 2,
    "field": None,
    "modes": "-2,-1,0,1,2",
    "lambdas": "0.1,1,10",
    "steps": 6,
    "instances": 50,
    "epsilon": None,
}


@dataclass
class RunConfig:
    command: str
    options: Dict[str, Any]
    out_dir: Path

    def __getattr__(self, name):
        try:
            return self.options[name]
        except KeyError:
            raise AttributeError(name) from None


# --- output helpers -----------------------------------------------------------

def tag(obj, source: str):
    """Wrap every numeric leaf as {"value": x, "source": source}."""
    if isinstance(obj, dict):
        return {k: tag(v, source) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [tag(v, source) for v in obj]
    if isinstance(obj, (bool, np.bool_)) or obj is None or isinstance(obj, str):
        return bool(obj) if isinstance(obj, np.bool_) else obj
    if isinstance(obj, (int, np.integer)):
        return {"value": int(obj), "source": source}
    if isinstance(obj, (float, np.floating)):
        v = float(obj)
        return {"value": v if math.isfinite(v) else str(v), "source": source}
    return obj


def fmt(x) -> str:
    if x is None:
        return ""
    if isinstance(x, (bool, np.bool_)):
        return "true" if x else "false"
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    if isinstance(x, (float, np.floating)):
        return format(float(x), ".17g")
    return str(x)


def write_csv(path: Path, header: Sequence[str], rows: List[Sequence]):
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for r in rows:
        w.writerow([fmt(x) for x in r])
    atomic_write_bytes(path, buf.getvalue().encode())


def write_summary(cfg: RunConfig, results: dict, status: int = 0, error: Optional[str] = None):
    opts = {k: v for k, v in sorted(cfg.options.items()) if not k.startswith("_")}
    doc = {
        "schema": SCHEMA,
        "command": cfg.command,
        "status": status,
        "config": tag(opts, "cli.config"),
        "results": results,
    }
    if error is not None:
        doc["error"] = error
    text = json.dumps(doc, indent=2, sort_keys=True) + "\n"
    atomic_write_bytes(cfg.out_dir / "summary.json", text.encode())
    return doc


# --- config parsing -------------------------------------------------------------

def _float(name, value) -> float:
    try:
        return float(value)
    except (TypeError, ValueError) as exc:
        raise ValidationError(f"{name} must be a number, got {value!r}") from exc


def _int_list(text) -> List[int]:
    if isinstance(text, (list, tuple)):
        return [int(x) for x in text]
    try:
        return [int(x) for x in str(text).split(",") if x.strip()]
    except ValueError as exc:
        raise ValidationError(f"expected a comma-separated integer list, got {text!r}") from exc


def _float_list(text) -> List[float]:
    if isinstance(text, (list, tuple)):
        return [float(x) for x in text]
    try:
        return [float(x) for x in str(text).split(",") if x.strip()]
    except ValueError as exc:
        raise ValidationError(f"expected a comma-separated number list, got {text!r}") from exc


def grid_of(cfg: RunConfig) -> SpectralGrid:
    return SpectralGrid(_float("grid-l", cfg.grid_l), int(cfg.grid_n))


def box_of(cfg: RunConfig, grid: SpectralGrid) -> PhysicalBox:
    text = cfg.box
    if text in (None, "reciprocal"):
        return PhysicalBox.reciprocal(grid)
    try:
        hw, samples = str(text).split(",")
        return PhysicalBox(float(hw), int(samples))
    except ValueError as exc:
        raise ValidationError(f"--box expects 'reciprocal' or 'half_width,samples', got {text!r}") from exc


def params_of(cfg: RunConfig, s: Optional[float] = None) -> Params:
    omega = float(res.parse_number(cfg.omega))
    period = cfg.period if cfg.period is not None else 2 * math.pi
    return Params(_float("lambda", cfg.lam), omega, s=_float("s", cfg.s if s is None else s),
                  period=_float("period", period), q=_float("q", cfg.q))


def profile_of(cfg: RunConfig, seed_offset: int = 0):
    name = cfg.rhs
    if name == "gaussian_poly":
        return gaussian_poly(int(cfg.seed) + seed_offset, degree=int(cfg.degree), solenoidal=False)
    if name == "solenoidal_gaussian":
        return gaussian_poly(int(cfg.seed) + seed_offset, degree=int(cfg.degree), solenoidal=True)
    if name == "axial_gaussian":
        return axial_gaussian()
    if name == "swirl_gaussian":
        return swirl_gaussian()
    raise ValidationError(f"unknown right-hand side {name!r}")


def time_nodes_for(cfg: RunConfig, bandwidth: Optional[int]) -> int:
    if cfg.time_nodes is not None:
        return int(cfg.time_nodes)
    return 4 * ((bandwidth or 8) + 2)


# --- commands -------------------------------------------------------------------

def cmd_resonance(cfg: RunConfig) -> dict:
    src = "resonance.classify_ratio"
    if cfg.alpha is not None:
        alpha = res.parse_number(cfg.alpha)
    elif cfg.ratio is not None:
        alpha = res.parse_number(cfg.ratio) * res.parse_number(cfg.omega)
    elif cfg.period is not None:
        alpha = 2 * math.pi / _float("period", cfg.period)
    else:
        raise ValidationError("give --alpha, --ratio or --period")
    omega = res.parse_number(cfg.omega)
    ratio = res.classify_ratio(alpha, omega)
    out: Dict[str, Any] = {"ratio": tag(ratio.to_dict(), src)}
    if ratio.is_rational:
        mp = res.min_positive_element(ratio, float(omega))
        out["min_positive"] = tag(mp, "resonance.min_positive_element")
    else:
        out["witnesses"] = tag([[w.k, w.ell, w.value] for w in ratio.convergents], src)
        if cfg.epsilon is not None:
            k, ell, val = res.approx_below(alpha, omega, _float("epsilon", cfg.epsilon), 10**8)
            out["approx_below"] = tag({"k": k, "ell": ell, "value": val}, "resonance.approx_below")
    conds = []
    econf = res.EstimateConfig(theta=_float("theta", cfg.theta), omega_max=max(float(omega), 1.0))
    pr = Params(_float("lambda", cfg.lam), float(omega), s=_float("s", cfg.s),
                period=2 * math.pi / float(alpha))
    conds.extend(res.check_smallness(pr, econf, "resolvent").to_dict()["conditions"])
    if ratio.is_rational:
        conds.extend(res.check_smallness(pr, econf, "tp", ratio).to_dict()["conditions"])
    out["conditions"] = tag(conds, "resonance.check_smallness")
    return out


def cmd_solve(cfg: RunConfig) -> dict:
    grid = grid_of(cfg)
    pr = params_of(cfg)
    if cfg.field is not None:
        g = read_field(cfg.field)
        grid = g.grid
    else:
        g = profile_of(cfg)
    nodes = time_nodes_for(cfg, g.bandwidth)
    rep = solver.solve_resolvent_rotating(g, pr, nodes, grid)
    v = as_grid(rep.velocity, grid)
    p = as_grid(rep.pressure, grid)
    write_field(cfg.out_dir / "velocity.json", v)
    write_field(cfg.out_dir / "pressure.json", p)
    src = "solver.solve_resolvent_rotating"
    return {
        "flags": rep.flags,
        "residual_interior": tag(rep.residual_interior, src),
        "quadrature_error": tag(rep.quadrature_error, src),
        "n_time_nodes": tag(nodes, src),
        "fields": {"velocity": "velocity.json", "pressure": "pressure.json"},
    }


def cmd_tp_assemble(cfg: RunConfig) -> dict:
    if cfg.ratio is None:
        raise ValidationError("tp-assemble needs --ratio for (2 pi / T) / omega")
    ratio_expr = res.parse_number(cfg.ratio)
    omega = res.parse_number(cfg.omega)
    ratio = res.classify_ratio(ratio_expr * omega, omega)
    if not ratio.is_rational:
        raise IrrationalRatio(
            "time-periodic solutions require a rational ratio of the time frequency 2 pi / T "
            "to the angular speed omega; the per-mode constants have no common bound otherwise")
    alpha = float(ratio_expr * omega)
    pr = Params(_float("lambda", cfg.lam), float(omega), period=2 * math.pi / alpha, q=_float("q", cfg.q))
    grid = grid_of(cfg)
    modes = {k: profile_of(cfg, seed_offset=i) for i, k in enumerate(_int_list(cfg.modes))}
    f = TPSeries(pr.period, modes)
    bw = max(m.bandwidth or 0 for m in modes.values())
    result = solver.assemble_tp(f, pr, grid, time_nodes_for(cfg, bw), ratio=ratio,
                                box=None if pr.q == 2 else box_of(cfg, grid))
    u1, u2 = solver.split_modes(result.velocity, pr.omega, ratio)
    rows = [[k, pr.alpha * k, k in u1.modes, r.residual_interior] for k, r in result.mode_reports.items()]
    write_csv(cfg.out_dir / "tp_modes.csv", ["k", "s", "rotation_harmonic", "residual"], rows)
    return {
        "ratio": tag(ratio.to_dict(), "resonance.classify_ratio"),
        "max_residual": tag(result.max_residual, "solver.assemble_tp"),
        "split": {"harmonic": tag(u1.indices, "solver.split_modes"),
                  "other": tag(u2.indices, "solver.split_modes")},
        "report": tag(result.report.to_dict(), "estimates.tp_estimate_report"),
        "table": "tp_modes.csv",
    }


def _ratio_alpha(cfg: RunConfig):
    omega = res.parse_number(cfg.omega)
    return res.parse_number(cfg.ratio or "sqrt2") * omega, omega


def cmd_counterexample(cfg: RunConfig) -> dict:
    alpha, omega = _ratio_alpha(cfg)
    lam = _float("lambda", cfg.lam)
    ns = [int(cfg.n)] if cfg.n is not None else list(range(1, int(cfg.n_max) + 1))
    rows = []
    n_cert = n_pass = n_rej = 0
    for n in ns:
        try:
            item = cx.build_item(n, alpha, omega, lam, window=cfg.window)
        except cx.SmallS:
            rows.append([n, None, None, None, None, None, None, None, None, "rejected"])
            n_rej += 1
            continue
        b = cx.blowup_ratio(item)
        status = ("pass" if b.passed else "fail") if b.threshold_met else "uncertified"
        n_cert += b.threshold_met
        n_pass += b.passed
        rows.append([n, item.k_n, item.ell_n, item.sigma_n, item.s_n, b.lhs_norm, b.rhs_norm, b.ratio,
                     b.certified_lower if b.threshold_met else None, status])
    write_csv(cfg.out_dir / "counterexample.csv",
              ["n", "k_n", "ell_n", "sigma_n", "s_n", "lhs", "rhs", "ratio", "certified_lower", "pass"], rows)
    out = {
        "rows": tag(len(rows), "counterexample.build_item"),
        "certified_rows": tag(n_cert, "counterexample.blowup_ratio"),
        "passing_rows": tag(n_pass, "counterexample.blowup_ratio"),
        "rejected_rows": tag(n_rej, "counterexample.build_item"),
        "constant": tag(cx.certified_constant(lam), "counterexample.blowup_ratio"),
        "threshold": tag(cx.certification_threshold(lam), "counterexample.blowup_ratio"),
        "table": "counterexample.csv",
    }
    if cfg.variant is not None:
        tab = cx.divergence_probe(alpha, omega, lam, max(ns), cfg.variant, cfg.window)
        out["divergence"] = tag({"variant": tab.variant, "certified_sum": tab.certified_sum,
                                 "direct_sum": tab.direct_sum}, "counterexample.divergence_probe")
    if n_cert and n_pass < n_cert:
        raise _Failed(out, f"{n_cert - n_pass} certified rows fell below the lower bound")
    return out


def cmd_sweep(cfg: RunConfig) -> dict:
    pr = params_of(cfg)
    grid = grid_of(cfg)
    g = profile_of(cfg)
    s_list = [pr.omega * (1 - 2.0 ** -j) for j in range(1, int(cfg.steps) + 1)]
    rows = est.constant_sweep(g, pr.lam, pr.omega, s_list, grid, time_nodes_for(cfg, g.bandwidth),
                              q=pr.q, box=None if pr.q == 2 else box_of(cfg, grid))
    write_csv(cfg.out_dir / "sweep.csv", ["s", "dist", "observed_ratio", "predicted_ceiling"],
              [[r.s, r.dist, r.observed_ratio, r.predicted_ceiling] for r in rows])
    fam = est.counterexample_sweep([8, 16, 32, 64], pr.lam)
    write_csv(cfg.out_dir / "family.csv", ["n", "dist", "observed_ratio", "certified_lower", "predicted_ceiling"],
              [[r.n, r.dist, r.observed_ratio, r.certified_lower, r.predicted_ceiling] for r in fam])
    return {"rows": tag(len(rows), "estimates.constant_sweep"),
            "family_rows": tag(len(fam), "estimates.counterexample_sweep"),
            "tables": ["sweep.csv", "family.csv"]}


def cmd_embedding(cfg: RunConfig) -> dict:
    grid = grid_of(cfg)
    box = box_of(cfg, grid)
    # the embedding needs q < n = 3; default to 6/5 unless q was given
    q = cfg.q if cfg.options.get("_q_given") else "6/5"
    tab = est.embedding_probe(swirl_gaussian(), _float_list(cfg.lambdas), q, grid, box)
    write_csv(cfg.out_dir / "embedding.csv", ["lambda", "grad_lhs", "fct_lhs", "rhs", "grad_ratio", "fct_ratio"],
              [[r.lam, r.grad_lhs, r.fct_lhs, r.rhs, r.grad_ratio, r.fct_ratio] for r in tab.rows])
    src = "estimates.embedding_probe"
    return {"q": str(tab.q), "s1": str(tab.exponents.s1), "s2": str(tab.exponents.s2),
            "max_grad_ratio": tag(tab.max_grad_ratio, src),
            "max_fct_ratio": tag(tab.max_fct_ratio, src),
            "box": tag(box.to_dict(), src), "table": "embedding.csv"}


def cmd_report(cfg: RunConfig) -> dict:
    pr = params_of(cfg)
    grid = grid_of(cfg)
    box = None if pr.q == 2 else box_of(cfg, grid)
    g = profile_of(cfg)
    c0, _ = est.fit_c0(pr, grid, int(cfg.instances), int(cfg.seed), box)
    sol = solver.solve_resolvent_rotating(g, pr, time_nodes_for(cfg, g.bandwidth), grid)
    rep = est.resolvent_estimate_report(sol.velocity, sol.pressure, g, pr, grid, box, c0=c0)
    write_csv(cfg.out_dir / "report.csv", ["label", "exponent", "value"],
              [[e.label, e.exponent, e.value] for e in rep.terms.entries])
    return {"report": tag(rep.to_dict(), "estimates.resolvent_estimate_report"),
            "c0_fit": tag({"c0": c0, "instances": int(cfg.instances)}, "estimates.fit_c0"),
            "table": "report.csv"}


COMMANDS = {
    "resonance": cmd_resonance,
    "solve": cmd_solve,
    "tp-assemble": cmd_tp_assemble,
    "counterexample": cmd_counterexample,
    "sweep": cmd_sweep,
    "embedding": cmd_embedding,
    "report": cmd_report,
}


class _Failed(Exception):
    """A command finished but its own check failed (exit 3, summary kept)."""

    def __init__(self, results, message):
        super().__init__(message)
        self.results = results


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    a = common.add_argument
    a("--lambda", dest="lam", type=float, help="translation speed")
    a("--omega", help="angular speed (number or exact expression)")
    a("--alpha", help="time frequency for the lattice (resonance)")
    a("--ratio", help="ratio: c/d, sqrt2, golden, or an expression")
    a("--period", type=float)
    a("--s", type=float, help="resolvent parameter")
    a("--q", type=float, help="Lebesgue exponent")
    a("--theta", type=float)
    a("--n", type=int)
    a("--n-max", dest="n_max", type=int)
    a("--grid-n", dest="grid_n", type=int, help="odd points per axis")
    a("--grid-l", dest="grid_l", type=float, help="grid half-width")
    a("--time-nodes", dest="time_nodes", type=int)
    a("--box", help="physical box: reciprocal or half_width,samples")
    a("--seed", type=int)
    a("--variant", choices=["A_norm", "L2_norm"])
    a("--window", choices=list(cx.WINDOWS))
    a("--rhs", help="closed-form right-hand side")
    a("--degree", type=int)
    a("--field", help="field dump header to use as right-hand side")
    a("--modes", help="comma-separated time modes")
    a("--lambdas", help="comma-separated lambda sweep")
    a("--steps", type=int)
    a("--instances", type=int)
    a("--epsilon", type=float)
    a("--out", help=f"output directory (default ${OUT_ENV} or .)")
    a("--config", help="JSON file with option values; flags win")
    parser = argparse.ArgumentParser(prog="oseenlab", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        sub.add_parser(name, parents=[common])
    return parser


def make_config(ns: argparse.Namespace) -> RunConfig:
    given = {k: v for k, v in vars(ns).items() if v is not None and k not in ("command", "out", "config")}
    file_opts: Dict[str, Any] = {}
    if ns.config:
        try:
            file_opts = json.loads(Path(ns.config).read_text())
        except (OSError, ValueError) as exc:
            raise ValidationError(f"cannot read config {ns.config}: {exc}") from exc
        if not isinstance(file_opts, dict):
            raise ValidationError("config file must hold a JSON object")
        file_opts = {k.replace("-", "_"): v for k, v in file_opts.items()}
        if "lambda" in file_opts:
            file_opts["lam"] = file_opts.pop("lambda")
        unknown = set(file_opts) - set(DEFAULTS) - {"out"}
        if unknown:
            raise ValidationError(f"unknown config keys: {sorted(unknown)}")
    opts = dict(DEFAULTS)
    opts.update({k: v for k, v in file_opts.items() if k != "out"})
    opts.update(given)
    opts["_q_given"] = "q" in given or "q" in file_opts
    out = ns.out or file_opts.get("out") or os.environ.get(OUT_ENV) or "."
    out_dir = Path(out)
    try:
        out_dir.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise ValidationError(f"output directory {out_dir} is not writable: {exc}") from exc
    return RunConfig(ns.command, opts, out_dir)


def run(cfg: RunConfig) -> int:
    try:
        results = COMMANDS[cfg.command](cfg)
    except _Failed as exc:
        write_summary(cfg, exc.results, 3, str(exc))
        print(f"error: {exc}", file=sys.stderr)
        return 3
    except ValidationError as exc:
        write_summary(cfg, {}, 2, str(exc))
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except OseenLabError as exc:
        write_summary(cfg, {}, 3, f"{type(exc).__name__}: {exc}")
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 3
    write_summary(cfg, results)
    return 0


def main(argv: Optional[Sequence[str]] = None) -> int:
    logging.basicConfig(level=logging.WARNING, format="%(levelname)s %(name)s: %(message)s")
    parser = build_parser()
    ns = parser.parse_args(argv)
    try:
        cfg = make_config(ns)
    except ValidationError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    return run(cfg)


if __name__ == "__main__":
    sys.exit(main())
