"""Command-line surface: solve, verify, oracle, generate and batch."""

from __future__ import annotations

import argparse
import csv
import io
import json
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from fractions import Fraction
from pathlib import Path
from typing import Any, Sequence

from .diagnostics import (Constants, chain_sweep, distance_bound_audit, is_locally_optimal,
                          potential_sweep)
from .duals import verify_dual_feasible
from .families import FAMILIES, FamilyError, generate_family
from .growth import DEFAULT_DELTA, DEFAULT_EPS_PRIME, MODES, GrowthConfig, dual_value, run_growth
from .instance import Instance, InstanceError, metric_closure, parse_instance, render_instance
from .merge import build_merge_forest, terminal_mst
from .oracles import (LpSizeError, LpSpec, TooManyTerminalsError, dreyfus_wagner, expand_edges,
                      export_lp, import_lp, solve_model, solve_relaxation)
from .rationals import fmt, parse_rational
from .solver import DEFAULT_GAMMA, DEFAULT_H, scale_or_contract
from .ucr import audit_laminar_bound, grow_ucr_dual, restrict_rootless

RATIO_BOUND = Fraction(19988, 10000)
AUDITS = ("feasible", "distance", "potential", "chains", "laminar")
PREMISE_H = 4  # local-optimality bound checked before the analysis audits
PREMISE_TERMINALS = 12

EXIT_OK, EXIT_INPUT, EXIT_FAIL = 0, 1, 2


class InputError(Exception):
    """Bad user input; maps to exit code 1."""


@dataclass
class RunConfig:
    verb: str
    family: str | None = None
    file: str | None = None
    format: str = "native"
    params: dict[str, Any] = field(default_factory=dict)
    root: int | None = None  # 1-based as typed
    delta: Fraction = DEFAULT_DELTA
    gamma: Fraction = DEFAULT_GAMMA
    eps_prime: Fraction = DEFAULT_EPS_PRIME
    h: int = DEFAULT_H
    mode: str = "continuous"
    seed: int = 0
    audits: tuple[str, ...] = ("feasible",)
    trace_out: str | None = None
    out: str | None = None
    timing: bool = True

    def __post_init__(self) -> None:
        for name in ("delta", "gamma", "eps_prime"):
            value = getattr(self, name)
            try:
                value = parse_rational(value)
            except (TypeError, ValueError) as exc:
                raise InputError(f"--{name.replace('_', '-')}: {exc}") from None
            if value <= 0:
                raise InputError(f"--{name.replace('_', '-')} must be positive")
            setattr(self, name, value)
        if self.h < 2:
            raise InputError("--h must be at least 2")
        if self.mode not in MODES:
            raise InputError(f"unknown mode {self.mode!r}")
        unknown = set(self.audits) - set(AUDITS)
        if unknown:
            raise InputError(f"unknown audits: {', '.join(sorted(unknown))}")

    def growth(self, halt: bool = True) -> GrowthConfig:
        return GrowthConfig(self.delta, self.eps_prime, self.mode, halt_on_capture=halt)


def load_instance(cfg: RunConfig) -> Instance:
    if (cfg.family is None) == (cfg.file is None):
        raise InputError("give exactly one of --family or --file")
    try:
        if cfg.file is not None:
            try:
                text = Path(cfg.file).read_text()
            except OSError as exc:
                raise InputError(f"cannot read {cfg.file}: {exc.strerror}") from None
            inst = parse_instance(text, cfg.format)
        else:
            params = dict(cfg.params)
            if cfg.family == "random":
                params.setdefault("seed", cfg.seed)
            if cfg.family == "potential-gadget":
                params.setdefault("delta", fmt(cfg.delta))
            inst = generate_family(cfg.family, params)
    except (InstanceError, FamilyError) as exc:
        raise InputError(str(exc)) from None
    if cfg.root is not None:
        r = cfg.root - 1
        if r not in inst.terminals:
            raise InputError(f"root {cfg.root} is not a terminal")
        inst = inst.with_root(r)
    return inst


def dumps(obj: Any) -> str:
    return json.dumps(obj, sort_keys=True, indent=2)


# verbs --------------------------------------------------------------------

def cmd_solve(cfg: RunConfig) -> tuple[dict, int]:
    inst = load_instance(cfg)
    report = scale_or_contract(inst, cfg.growth(), cfg.gamma, cfg.h)
    out = report.to_json(timing=cfg.timing)
    out["verb"] = "solve"
    if cfg.trace_out:
        tr = report.failed_trace
        if tr is None and len(inst.terminals) > 1:
            tr = run_growth(metric_closure(inst), None, cfg.growth())
        Path(cfg.trace_out).write_text(dumps(tr.to_json() if tr else {}) + "\n")
    code = EXIT_OK if report.ok and report.ratio <= RATIO_BOUND else EXIT_FAIL
    return out, code


def _premise(m, f, cfg: RunConfig) -> bool | None:
    if len(m.terminals) > PREMISE_TERMINALS:
        return None
    return is_locally_optimal(m, f, cfg.gamma, PREMISE_H)


def cmd_verify(cfg: RunConfig) -> tuple[dict, int]:
    inst = load_instance(cfg)
    if len(inst.terminals) < 2:
        raise InputError("verify needs at least two terminals")
    m = metric_closure(inst)
    f = build_merge_forest(m)
    tr = run_growth(m, f, cfg.growth())
    dv = dual_value(tr)
    out: dict[str, Any] = {
        "verb": "verify", "instance": inst.name or "instance", "mode": cfg.mode,
        "delta": fmt(cfg.delta), "completed": tr.completed,
        "captures": [{"time": fmt(c.time), "set": c.set_id,
                      "terminals": sorted(v + 1 for v in f.sets[c.set_id].members)}
                     for c in tr.captures],
        "value": fmt(dv.value), "scaled_value": fmt(dv.scaled), "partial": dv.partial,
        "mst": fmt(terminal_mst(m, f)[1]),
    }
    if cfg.trace_out:
        Path(cfg.trace_out).write_text(dumps(tr.to_json()) + "\n")
    verdicts = []
    failed = False
    analysis = [a for a in cfg.audits if a in ("distance", "potential", "chains")]
    premise = None
    if analysis:
        if cfg.mode != "continuous":
            raise InputError("analysis audits read continuous-mode traces")
        premise = _premise(m, f, cfg)
        out["locally_optimal"] = premise
    consts = replace(Constants(), delta=cfg.delta, gamma=cfg.gamma)
    for name in cfg.audits:
        if name == "feasible":
            v = verify_dual_feasible(tr.z, m, 1 + cfg.delta)
            j = {"audit": "feasible", **v.to_json(), "value": fmt(dv.scaled)}
            failed |= not v.feasible
        elif name == "laminar":
            try:
                v = audit_laminar_bound(inst, restrict_rootless(grow_ucr_dual(m, f), m.root))
            except ValueError as exc:
                raise InputError(str(exc)) from None
            j = v.to_json()
            failed |= not v.passed
        else:
            audit = {"distance": distance_bound_audit, "potential": potential_sweep,
                     "chains": chain_sweep}[name]
            v = audit(tr, f, consts)
            j = v.to_json()
            j["instance"] = inst.name or "instance"
            # the bounds are only promised under local optimality
            failed |= not v.passed and premise is not False
        verdicts.append(j)
    out["audits"] = verdicts
    out["status"] = "FAIL" if failed else "PASS"
    return out, EXIT_FAIL if failed else EXIT_OK


def cmd_oracle(cfg: RunConfig, which: str, relaxation: str, method: str,
               lp_file: str | None) -> tuple[dict, int]:
    if which == "lp" and lp_file:
        try:
            model = import_lp(Path(lp_file).read_text())
        except OSError as exc:
            raise InputError(f"cannot read {lp_file}: {exc.strerror}") from None
        except ValueError as exc:
            raise InputError(str(exc)) from None
        return {"verb": "oracle", "oracle": "lp", "file": lp_file,
                "value": fmt(solve_model(model))}, EXIT_OK
    inst = load_instance(cfg)
    out: dict[str, Any] = {"verb": "oracle", "oracle": which, "instance": inst.name or "instance"}
    try:
        if which == "dw":
            m = metric_closure(inst)
            cost, closure = dreyfus_wagner(m)
            out["value"] = fmt(cost)
            out["tree"] = [[u + 1, v + 1] for u, v in expand_edges(m, closure)]
        elif which == "lp":
            stats = solve_relaxation(inst, LpSpec(relaxation), method)
            out.update(stats.to_json(), relaxation=relaxation, method=method)
        else:
            buf = io.StringIO()
            lines = export_lp(inst, LpSpec(relaxation), buf)
            if cfg.out:
                Path(cfg.out).write_text(buf.getvalue())
                return {**out, "relaxation": relaxation, "lines": lines, "path": cfg.out}, EXIT_OK
            sys.stdout.write(buf.getvalue())
            return {}, EXIT_OK
    except (TooManyTerminalsError, LpSizeError) as exc:
        raise InputError(str(exc)) from None
    return out, EXIT_OK


def cmd_generate(cfg: RunConfig) -> tuple[str, int]:
    return render_instance(load_instance(cfg), cfg.format), EXIT_OK


# batch ----------------------------------------------------------------------

BATCH_KEYS = {"verb", "family", "file", "format", "root", "delta", "gamma", "eps_prime",
              "h", "mode", "seed", "audits", "params"}
OPT_TERMINALS = 10  # batch reports the exact optimum up to this many terminals
LP_VERTICES = 10


def _entry_config(entry: dict) -> RunConfig:
    if not isinstance(entry, dict):
        raise InputError("manifest entries must be JSON objects")
    verb = entry.get("verb", "solve")
    if verb not in ("solve", "verify"):
        raise InputError(f"batch supports solve and verify, not {verb!r}")
    params = dict(entry.get("params", {}))
    for key in ("k", "q", "n"):
        if key in entry:
            params[key] = entry[key]
    extra = set(entry) - BATCH_KEYS - {"k", "q", "n"}
    if extra:
        raise InputError(f"unknown manifest keys: {', '.join(sorted(extra))}")
    kw = {k: entry[k] for k in ("family", "file", "format", "root", "h", "mode", "seed")
          if k in entry}
    for k in ("delta", "gamma", "eps_prime"):
        if k in entry:
            kw[k] = str(entry[k])
    if "audits" in entry:
        kw["audits"] = tuple(entry["audits"])
    return RunConfig(verb, params=params, timing=False, **kw)


def run_entry(args: tuple[int, Any]) -> dict:
    """One manifest line; errors become records so the batch continues."""
    index, entry = args
    try:
        cfg = _entry_config(entry)
        result, code = (cmd_solve if cfg.verb == "solve" else cmd_verify)(cfg)
        record = {"index": index, "exit": code, **result}
        if cfg.verb == "solve":
            inst = load_instance(cfg)
            m = metric_closure(inst)
            if 1 < len(inst.terminals) <= OPT_TERMINALS:
                record["opt"] = fmt(dreyfus_wagner(m)[0])
            if 1 < len(inst.terminals) and inst.vertex_count <= LP_VERTICES:
                record["lp"] = fmt(solve_relaxation(inst, LpSpec("BCR"), "separate").value)
    except (InputError, InstanceError) as exc:
        record = {"index": index, "exit": EXIT_INPUT, "error": str(exc)}
    except Exception as exc:  # a broken run must not stop the batch
        record = {"index": index, "exit": EXIT_FAIL, "error": f"{type(exc).__name__}: {exc}"}
    return record


CSV_COLUMNS = ["instance", "verb", "mst", "opt", "lp", "dual", "tree", "ratio", "status", "exit"]


def csv_row(rec: dict) -> dict:
    return {"instance": rec.get("instance", ""), "verb": rec.get("verb", ""),
            "mst": rec.get("mst", ""), "opt": rec.get("opt", ""), "lp": rec.get("lp", ""),
            "dual": rec.get("dual_bound", rec.get("scaled_value", "")),
            "tree": rec.get("tree_cost", ""), "ratio": rec.get("ratio", ""),
            "status": rec.get("status", "ERROR" if "error" in rec else ""), "exit": rec["exit"]}


def read_manifest(path: str) -> list[Any]:
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise InputError(f"cannot read {path}: {exc.strerror}") from None
    entries = []
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        try:
            entries.append(json.loads(line))
        except json.JSONDecodeError as exc:
            raise InputError(f"{path}:{lineno}: {exc.msg}") from None
    return entries


def cmd_batch(manifest: str, jobs: int, out: str | None, csv_out: str | None) -> int:
    entries = read_manifest(manifest)
    work = list(enumerate(entries))
    if jobs > 1 and len(work) > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            records = list(pool.map(run_entry, work))
    else:
        records = [run_entry(w) for w in work]
    lines = "".join(json.dumps(r, sort_keys=True) + "\n" for r in records)
    if out:
        Path(out).write_text(lines)
    else:
        sys.stdout.write(lines)
    if csv_out:
        with open(csv_out, "w", newline="") as fh:
            w = csv.DictWriter(fh, fieldnames=CSV_COLUMNS, lineterminator="\n")
            w.writeheader()
            for r in records:
                w.writerow(csv_row(r))
    return EXIT_OK


# argument parsing -------------------------------------------------------------

def _instance_args(p: argparse.ArgumentParser) -> None:
    src = p.add_argument_group("instance")
    src.add_argument("--family", choices=sorted(FAMILIES))
    src.add_argument("--file")
    src.add_argument("--format", choices=("native", "stp"), default="native")
    src.add_argument("--root", type=int, help="1-based terminal id used as root")
    src.add_argument("--k", type=int, help="family parameter")
    src.add_argument("--q", type=int, help="family parameter")
    src.add_argument("--n", type=int, help="family parameter")
    src.add_argument("--seed", type=int, default=0)


def _growth_args(p: argparse.ArgumentParser) -> None:
    g = p.add_argument_group("constants")
    g.add_argument("--delta", default=fmt(DEFAULT_DELTA), help="p/q or decimal")
    g.add_argument("--gamma", default=fmt(DEFAULT_GAMMA))
    g.add_argument("--eps-prime", default=fmt(DEFAULT_EPS_PRIME))
    g.add_argument("--h", type=int, default=DEFAULT_H)
    g.add_argument("--mode", choices=MODES, default="continuous")
    g.add_argument("--trace-out")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="moatforge",
                                     description="Steiner tree dual growth and audits")
    sub = parser.add_subparsers(dest="verb", required=True)
    p = sub.add_parser("solve", help="scale-or-contract on one instance")
    _instance_args(p)
    _growth_args(p)
    p.add_argument("--out")
    p.add_argument("--no-timing", action="store_true", help="omit runtime_ms for byte-stable output")

    p = sub.add_parser("verify", help="grow a dual and run audits")
    _instance_args(p)
    _growth_args(p)
    p.add_argument("--audits", default="feasible", help=f"comma list of {','.join(AUDITS)}")
    p.add_argument("--out")

    p = sub.add_parser("oracle", help="exact reference values")
    p.add_argument("which", choices=("dw", "lp", "export"))
    _instance_args(p)
    p.add_argument("--relaxation", choices=("BCR", "UCR"), default="BCR")
    p.add_argument("--method", choices=("enumerate", "separate"), default="separate")
    p.add_argument("--lp-file", help="solve an exported LP file instead of an instance")
    p.add_argument("--out")

    p = sub.add_parser("generate", help="write a family instance")
    _instance_args(p)
    p.add_argument("--delta", default=fmt(DEFAULT_DELTA), help="potential-gadget parameter")
    p.add_argument("--out")

    p = sub.add_parser("batch", help="run a JSON-lines manifest")
    p.add_argument("manifest")
    p.add_argument("--jobs", type=int, default=1)
    p.add_argument("--out", help="JSON-lines results (default stdout)")
    p.add_argument("--csv", help="CSV summary path")
    return parser


def config_from_args(ns: argparse.Namespace) -> RunConfig:
    params = {k: getattr(ns, k) for k in ("k", "q", "n") if getattr(ns, k, None) is not None}
    audits = tuple(a.strip() for a in getattr(ns, "audits", "feasible").split(",") if a.strip())
    return RunConfig(
        verb=ns.verb, family=ns.family, file=ns.file, format=ns.format, params=params,
        root=ns.root, delta=getattr(ns, "delta", DEFAULT_DELTA),
        gamma=getattr(ns, "gamma", DEFAULT_GAMMA),
        eps_prime=getattr(ns, "eps_prime", DEFAULT_EPS_PRIME),
        h=getattr(ns, "h", DEFAULT_H), mode=getattr(ns, "mode", "continuous"), seed=ns.seed,
        audits=audits, trace_out=getattr(ns, "trace_out", None), out=getattr(ns, "out", None),
        timing=not getattr(ns, "no_timing", False))


def _emit(text: str, out: str | None) -> None:
    if out:
        Path(out).write_text(text)
    sys.stdout.write(text)


def main(argv: Sequence[str] | None = None) -> int:
    try:
        ns = build_parser().parse_args(argv)
    except SystemExit as exc:  # usage errors are input errors; --help stays 0
        return EXIT_OK if exc.code in (0, None) else EXIT_INPUT
    try:
        if ns.verb == "batch":
            if ns.jobs < 1:
                raise InputError("--jobs must be at least 1")
            return cmd_batch(ns.manifest, ns.jobs, ns.out, ns.csv)
        cfg = config_from_args(ns)
        if ns.verb == "generate":
            text, code = cmd_generate(cfg)
            _emit(text, cfg.out)
            return code
        if ns.verb == "oracle":
            result, code = cmd_oracle(cfg, ns.which, ns.relaxation, ns.method, ns.lp_file)
            if result:
                sys.stdout.write(dumps(result) + "\n")
            return code
        result, code = (cmd_solve if ns.verb == "solve" else cmd_verify)(cfg)
        _emit(dumps(result) + "\n", cfg.out)
        return code
    except (InputError, InstanceError) as exc:
        print(f"moatforge: error: {exc}", file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
