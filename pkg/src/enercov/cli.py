"""Command-line frontend.

Every artifact is written twice: a human-facing file with floats rounded to six
significant digits, and a ``*.full.*`` sidecar carrying ``repr`` precision for
exact regression.  Later subcommands reuse artifacts found in ``--out`` and
compute whatever is missing.
"""

from __future__ import annotations

import argparse
import csv
import hashlib
import io
import json
import logging
import sys
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Optional

import numpy as np

from . import __version__, pipeline
from .energy import soc_chain, sufficient_feasibility_check
from .errors import ConstraintViolationError, ConvergenceError, EnercovError
from .formation import Formation
from .planner import CycleSchedule, phase_table
from .scenario import Scenario, load_scenario
from .simulator import MODES, SimTrace, metrics, sensing_off_intervals

log = logging.getLogger("enercov")

CONTROLLERS = ("centralized", "baseline")


@dataclass
class RunManifest:
    scenario: str
    subcommand: str
    out: str
    seed: int
    inputs: str = ""                                  # digest of scenario text and overrides
    artifacts: dict = field(default_factory=dict)     # file name -> sha256

    def record(self, path: Path) -> None:
        self.artifacts[path.name] = hashlib.sha256(path.read_bytes()).hexdigest()

    def to_dict(self) -> dict:
        return {"scenario": self.scenario, "subcommand": self.subcommand, "out": self.out,
                "seed": self.seed, "inputs": self.inputs, "version": __version__, "artifacts": dict(sorted(self.artifacts.items()))}


# -- formatting ---------------------------------------------------------------

def _g6(v: float) -> str:
    return f"{v:.6g}"


def _full(v: float) -> str:
    return repr(float(v))


def _round(obj, fmt: Callable[[float], str]):
    if isinstance(obj, dict):
        return {k: _round(v, fmt) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_round(v, fmt) for v in obj]
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        v = float(obj)
        return float(fmt(v)) if np.isfinite(v) else None
    return obj


def _json_text(obj, fmt) -> str:
    return json.dumps(_round(obj, fmt), indent=2, sort_keys=True) + "\n"


def _csv_text(header, rows, fmt) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for row in rows:
        w.writerow([fmt(v) if isinstance(v, (float, np.floating)) else v for v in row])
    return buf.getvalue()


def _sidecar(path: Path) -> Path:
    return path.with_name(f"{path.stem}.full{path.suffix}")


class Writer:
    def __init__(self, out: Path, manifest: RunManifest):
        self.out = out
        self.manifest = manifest
        out.mkdir(parents=True, exist_ok=True)

    def _put(self, path: Path, text: str) -> None:
        path.write_text(text)
        self.manifest.record(path)

    def json(self, name: str, obj) -> None:
        path = self.out / name
        self._put(path, _json_text(obj, _g6))
        self._put(_sidecar(path), _json_text(obj, _full))

    def csv(self, name: str, header, rows) -> None:
        rows = list(rows)
        path = self.out / name
        self._put(path, _csv_text(header, rows, _g6))
        self._put(_sidecar(path), _csv_text(header, rows, _full))

    def finish(self) -> None:
        path = self.out / f"manifest.{self.manifest.subcommand}.json"
        path.write_text(json.dumps(self.manifest.to_dict(), indent=2, sort_keys=True) + "\n")


def _load_full(w: Writer, name: str) -> Optional[dict]:
    """Sidecar ``name`` from a previous run on the same inputs, if its checksum still matches."""
    path = _sidecar(w.out / name)
    if not path.exists():
        return None
    digest = hashlib.sha256(path.read_bytes()).hexdigest()
    for mf in sorted(w.out.glob("manifest.*.json")):
        try:
            rec = json.loads(mf.read_text())
        except json.JSONDecodeError:
            continue
        if rec.get("inputs") == w.manifest.inputs and rec.get("artifacts", {}).get(path.name) == digest:
            return json.loads(path.read_text())
    return None


def input_digest(path: Path, seed, dt, grid) -> str:
    h = hashlib.sha256(Path(path).read_bytes())
    h.update(repr((seed, dt, grid)).encode())
    return h.hexdigest()


# -- pipeline stages ------------------------------------------------------------

def _formations(sc: Scenario, w: Writer, reuse: bool) -> pipeline.Formations:
    if reuse:
        ocv, och = _load_full(w, "ocv.json"), _load_full(w, "och.json")
        if ocv is not None and och is not None:
            return pipeline.Formations(Formation.from_dict(ocv), Formation.from_dict(och))
    forms = pipeline.formations(sc)
    w.json("ocv.json", forms.ocv.to_dict())
    w.json("och.json", forms.och.to_dict())
    return forms


def _plan(sc: Scenario, forms: pipeline.Formations, w: Writer, reuse: bool) -> CycleSchedule:
    if reuse:
        data = _load_full(w, "schedule.json")
        if data is not None:
            return CycleSchedule.from_dict(data)
    if not sufficient_feasibility_check(sc.energy, sc.n_agents):
        print("advisory: c < N*(alpha*vmax + beta); the conservative capacity condition fails, "
              "feasibility rests on the computed duty cycle", file=sys.stderr)
    schedule = pipeline.plan(sc, forms)
    tm = schedule.times
    chain = soc_chain(schedule.tour, sc.energy, schedule.duty.q_arrival, tm)
    w.json("tour.json", schedule.tour.to_dict())
    w.json("times.json", {"critical_times": tm.to_dict(), "duty_fraction": schedule.duty.duty_fraction,
                          "q_arrival": schedule.duty.q_arrival, "rule": schedule.duty.rule,
                          "soc_chain": chain.to_dict()})
    w.json("schedule.json", schedule.to_dict())
    rows = phase_table(schedule, sc.horizon)
    cols = ["agent", "t0", "t1", "kind", "tour_pos", "x0", "y0", "x1", "y1", "speed", "heading"]
    w.csv("phases.csv", cols, ([r[c] for c in cols] for r in rows))
    return schedule


def _trace_rows(trace: SimTrace):
    if trace.horizon <= 0:
        return
    for k, t in enumerate(trace.times):
        for a in range(trace.soc.shape[1]):
            x, y = trace.positions[k, a]
            yield (float(t), a, float(x), float(y), float(trace.soc[k, a]), MODES[trace.modes[k, a]],
                   int(trace.sensing[k, a]), int(trace.charging[k, a]))


def _coverage_rows(trace: SimTrace):
    if trace.horizon <= 0:
        return
    for t, h in zip(trace.times, trace.coverage):
        yield float(t), float(h)


def _emit_trace(w: Writer, trace: SimTrace, prefix: str = "") -> dict:
    w.csv(f"{prefix}trace.csv", ["t", "agent", "x", "y", "q", "mode", "b", "I"], _trace_rows(trace))
    w.csv(f"{prefix}coverage.csv", ["t", "H"], _coverage_rows(trace))
    summary = metrics(trace)
    summary["violations"] = [{"t": v.t, "kind": v.kind, "agents": list(v.agents)} for v in trace.violations]
    summary["sensing_off"] = [{"agent": a, "t0": s, "t1": e} for a, s, e in sensing_off_intervals(trace)]
    w.json(f"{prefix}summary.json", summary)
    return summary


def _check_formations(forms: pipeline.Formations) -> None:
    if not forms.converged:
        bad = [f.kind for f in (forms.ocv, forms.och) if not f.converged]
        raise ConvergenceError(f"formation solver did not converge for {', '.join(bad)}")


def _check_violations(summary: dict) -> None:
    if summary["battery_deaths"] or summary["outlet_violations"]:
        raise ConstraintViolationError(
            f"centralized run violated constraints: {summary['battery_deaths']} battery deaths, "
            f"{summary['outlet_violations']} outlet conflicts")


# -- subcommands ------------------------------------------------------------------

def cmd_formations(sc: Scenario, w: Writer) -> int:
    forms = _formations(sc, w, reuse=False)
    for f in (forms.ocv, forms.och):
        print(f"{f.kind}: H={_g6(f.achieved_h)} status={f.status} "
              + " ".join(f"({_g6(x)},{_g6(y)})" for x, y in f.positions))
    _check_formations(forms)
    return 0


def cmd_plan(sc: Scenario, w: Writer) -> int:
    forms = _formations(sc, w, reuse=True)
    schedule = _plan(sc, forms, w, reuse=False)
    tm = schedule.times
    print(f"tour length {_g6(schedule.tour.length)}; tau_c={_g6(tm.tau_c)} tau_d={_g6(tm.tau_d)} "
          f"tau_to_cov={_g6(tm.tau_to_cov)} tau_to_chg={_g6(tm.tau_to_chg)}")
    return 0


def cmd_simulate(sc: Scenario, w: Writer, controller: str) -> int:
    forms = _formations(sc, w, reuse=True)
    if controller == "centralized":
        schedule = _plan(sc, forms, w, reuse=True)
        trace = pipeline.simulate(sc, controller, schedule)
    else:
        trace = pipeline.simulate(sc, controller, ocv=forms.ocv)
    summary = _emit_trace(w, trace)
    avg = summary["time_average_h"]
    print(f"{controller}: time-average H={'n/a' if avg is None else _g6(avg)} "
          f"battery deaths={summary['battery_deaths']} outlet={summary['outlet_violations']} "
          f"sensing-off intervals={summary['sensing_off_intervals']}")
    if controller == "centralized":
        _check_violations(summary)
    return 0


def cmd_compare(sc: Scenario, w: Writer) -> int:
    forms = _formations(sc, w, reuse=True)
    schedule = _plan(sc, forms, w, reuse=True)
    cen = _emit_trace(w, pipeline.simulate(sc, "centralized", schedule), "centralized_")
    base = _emit_trace(w, pipeline.simulate(sc, "baseline", ocv=forms.ocv), "baseline_")
    report = pipeline.comparison_report(cen, base, schedule)
    w.json("comparison.json", report)
    print(f"{'':12s}{'centralized':>14s}{'baseline':>14s}")
    for key in ("time_average_h", "min_h", "max_h", "battery_deaths", "outlet_violations", "sensing_off_intervals"):
        a, b = cen[key], base[key]
        fa = "n/a" if a is None else _g6(a)
        fb = "n/a" if b is None else _g6(b)
        print(f"{key:22s}{fa:>14s}{fb:>14s}")
    pct = report["improvement_percent"]
    print(f"improvement: {'n/a' if pct is None else _g6(pct) + ' %'}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="enercov", description="Energy-aware persistent coverage planner and simulator")
    ap.add_argument("--version", action="version", version=__version__)
    sub = ap.add_subparsers(dest="command", required=True)
    for name, hlp in (("formations", "solve OCV and OCH formations"),
                      ("plan", "build tour, critical times and cyclic schedule"),
                      ("simulate", "run one controller in closed loop"),
                      ("compare", "run both controllers and report the difference")):
        p = sub.add_parser(name, help=hlp)
        p.add_argument("--scenario", required=True, type=Path, help="YAML or JSON scenario file")
        p.add_argument("--out", type=Path, default=Path("out"), help="output directory (default: out)")
        p.add_argument("--seed", type=int, default=None, help="override the scenario seed")
        p.add_argument("--dt", type=float, default=None, help="override the simulation step")
        p.add_argument("--grid", type=float, default=None, help="override the reward grid cell size")
        p.add_argument("-v", "--verbose", action="store_true")
        if name == "simulate":
            p.add_argument("--controller", choices=CONTROLLERS, default="centralized")
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        sc = load_scenario(args.scenario).with_overrides(args.seed, args.dt, args.grid)
        manifest = RunManifest(str(args.scenario), args.command, str(args.out), sc.seed,
                               input_digest(args.scenario, sc.seed, sc.dt, sc.field.cell))
        w = Writer(args.out, manifest)
        if args.command == "formations":
            code = cmd_formations(sc, w)
        elif args.command == "plan":
            code = cmd_plan(sc, w)
        elif args.command == "simulate":
            code = cmd_simulate(sc, w, args.controller)
        else:
            code = cmd_compare(sc, w)
        w.finish()
        return code
    except EnercovError as exc:
        if "w" in locals():
            w.finish()
        print(f"error: {exc}", file=sys.stderr)
        return exc.exit_code


if __name__ == "__main__":
    sys.exit(main())
