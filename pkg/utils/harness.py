"""Experiment orchestration: minimize, analyze the minimizer, check, report.

Same-order endpoints are expected to give a collision-free minimizer that
solves Newton's equations; different-order endpoints must collide at least
once and at most N! - 1 times, never repeating the order of a collision-free
section. A run that does not converge is reported as such and never counts
as a failed check.

Sweeps also summarize the collision counts they saw, per mass vector, so the
largest count over different-order pairs and its dependence on the masses can
be read off. The summary is data; it asserts nothing.
"""

import csv
import dataclasses
import itertools
import json
import math
import os
import time
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

import numpy as np

from extensions import log
from models.configuration import Configuration, OrderLabel, order_of, same_order
from models.experiment import Analysis, CheckTolerances, ExperimentReport, ExperimentSpec
from models.minimize_result import MinimizeConfig
from models.params import SystemParams
from models.path import path_to_json, to_gaps
from utils.collision import (
    analyze_event,
    detect_collisions,
    exponent_series,
    has_repeated_sections,
    section_orders,
    write_gap_csv,
)
from utils.dynamics import collision_free_segments, eom_residual
from utils.errors import BolzaError, SchemaError, ValidationError
from utils.minimize import minimize, write_trace_csv
from utils.surgery import normalize_order, plateau_deform

logger = log.getChild("harness")


def _section(data, key):
    value = data.get(key, {})
    if not isinstance(value, dict):
        raise SchemaError(key, "must be an object")
    return value


def _build(factory, fields, where):
    unknown = sorted(set(fields) - {f.name for f in dataclasses.fields(factory)})
    if unknown:
        raise SchemaError(f"{where}.{unknown[0]}", "unknown field")
    try:
        return factory(**fields)
    except ValidationError as e:
        raise SchemaError(where, str(e)) from e


def validate_input(data):
    """ExperimentSpec from a decoded JSON document; SchemaError names the offending field."""
    if not isinstance(data, dict):
        raise SchemaError("$", "the experiment document must be an object")
    if "problem" not in data:
        raise SchemaError("problem", "required field is missing")
    problem = _section(data, "problem")
    for key in ("masses", "q_i", "q_f"):
        if key not in problem:
            raise SchemaError(f"problem.{key}", "required field is missing")

    alpha = problem.get("alpha", 1.0)
    if not isinstance(alpha, (int, float)) or not 0 < alpha < 2:
        raise SchemaError("problem.alpha", f"must lie in the open range (0, 2), got {alpha}")
    try:
        params = SystemParams.from_dict(problem)
    except (ValidationError, TypeError, ValueError) as e:
        raise SchemaError("problem", str(e)) from e

    T1, T2 = float(problem.get("T1", 0.0)), float(problem.get("T2", 1.0))
    if not T2 > T1:
        raise SchemaError("problem.T2", f"must exceed T1={T1}")
    for key in ("q_i", "q_f"):
        try:
            Configuration(problem[key], params)
        except (ValidationError, TypeError, ValueError) as e:
            raise SchemaError(f"problem.{key}", str(e)) from e

    try:
        minimize_cfg = MinimizeConfig.from_dict(_section(data, "minimize"))
    except (ValidationError, TypeError, ValueError) as e:
        raise SchemaError("minimize", str(e)) from e
    analysis = _build(Analysis, _section(data, "analysis"), "analysis")
    tolerances = _build(CheckTolerances, _section(data, "tolerances"), "tolerances")

    seed = data.get("seed", 0)
    if not isinstance(seed, int) or isinstance(seed, bool):
        raise SchemaError("seed", "must be an integer")
    return ExperimentSpec(
        params=params,
        q_i=tuple(problem["q_i"]),
        q_f=tuple(problem["q_f"]),
        T1=T1,
        T2=T2,
        minimize=minimize_cfg,
        analysis=analysis,
        tolerances=tolerances,
        output_dir=data.get("output_dir"),
        seed=seed,
        name=str(data.get("name", "experiment")),
    )


def load_spec(path):
    text = Path(path).read_text()
    try:
        data = json.loads(text)
    except json.JSONDecodeError as e:
        raise SchemaError(f"line {e.lineno}", e.msg) from e
    return validate_input(data)


def dump_spec(spec, path):
    Path(path).write_text(json.dumps(spec.to_dict(), indent=2) + "\n")


def _surgery_probes(path, events):
    """Plateau deformation of every sub-delta gap at each collision of the order-normalized path."""
    if not path.params.equal_masses:
        return []
    normalized = normalize_order(path, events)
    g = to_gaps(normalized, order_of(normalized.node(0)))
    probes = []
    for event in events:
        at_collision = np.array([np.interp(event.t0, g.times, g.gaps[:, k]) for k in range(g.gaps.shape[1])])
        for k in np.nonzero(at_collision < 5 * path.params.collision_tol)[0]:
            try:
                outcome = plateau_deform(g, int(k), event.t0)
                probes.append({"t0": event.t0, **outcome.to_dict()})
            except BolzaError as e:
                probes.append({"t0": event.t0, "gap_index": int(k), "error": str(e)})
    return probes


def _collision_checks(report, spec):
    n = spec.params.n_bodies
    checks = {
        "collision_forced": report.collision_count >= 1,
        "collision_bound": report.collision_count <= math.factorial(n) - 1,
        "no_repeated_sections": not report.repeated_sections,
    }
    low, high = spec.tolerances.exponent_window(spec.params)
    exponents = [e for ev in report.events for e in (ev.exponent_fit or ()) if e is not None]
    residuals = [r for ev in report.events for r in (ev.cc_residual or ()) if r is not None]
    matches = [m for ev in report.events for m in (ev.order_matches or ()) if m is not None]
    if exponents:
        checks["exponent_window"] = all(low <= e <= high for e in exponents)
    if residuals:
        checks["limit_central_configuration"] = all(r < spec.tolerances.cc_residual for r in residuals)
    if matches:
        checks["limit_order"] = all(matches)
    return checks


def run_experiment(spec):
    """Minimize, detect and fit collisions, check the minimizer. Never raises BolzaError."""
    report = ExperimentReport(name=spec.name, output_dir=spec.output_dir)
    started = time.perf_counter()
    try:
        params = spec.params
        report.masses = list(params.masses)
        q_i, q_f = Configuration(spec.q_i, params), Configuration(spec.q_f, params)
        report.order_i, report.order_f = str(order_of(q_i)), str(order_of(q_f))
        report.same_order = same_order(q_i, q_f)

        cfg = dataclasses.replace(spec.minimize, seed=spec.seed)
        result = minimize(q_i, q_f, spec.T1, spec.T2, cfg)
        report.timings["minimize"] = time.perf_counter() - started
        report.result = result
        report.minimize = result.summary()
        path = result.path

        tick = time.perf_counter()
        detected = spec.analysis.collisions
        if detected:
            events = [e for e in detect_collisions(path) if path.T1 < e.t0 < path.T2]
            if spec.analysis.exponent_fits:
                events = [analyze_event(path, e) for e in events]
            report.events = events
            report.collision_count = len(events)
            orders = section_orders(path, events)
            report.sections = [str(o) for o in orders]
            report.repeated_sections = has_repeated_sections(orders)
        interior = np.sort(path.positions[1:-1], axis=1)
        report.min_gap = float(np.min(np.diff(interior, axis=1)))
        report.timings["analysis"] = time.perf_counter() - tick

        if spec.analysis.eom_residuals:
            residuals = [eom_residual(path, s) for s in collision_free_segments(path)]
            report.eom_residual = max(residuals) if residuals else None
        if spec.analysis.surgery_probes and report.events:
            report.surgery = _surgery_probes(path, report.events)

        tolerances = spec.tolerances
        if report.same_order:
            report.checks = {
                "min_gap": report.min_gap > tolerances.min_gap_factor * params.collision_tol,
            }
            if detected:
                report.checks["collision_free"] = report.collision_count == 0
            if report.eom_residual is not None:
                report.checks["eom_residual"] = report.eom_residual < tolerances.eom_residual
        elif detected:
            report.checks = _collision_checks(report, spec)
        else:
            logger.info("collision detection disabled; no checks apply to %s", spec.name)

        if not result.converged:
            report.status = "not_converged"
        else:
            report.status = "passed" if all(report.checks.values()) else "failed"
    except BolzaError as e:
        logger.error("experiment %s failed: %s", spec.name, e)
        report.status = "error"
        report.error = f"{type(e).__name__}: {e}"
    report.timings["total"] = time.perf_counter() - started
    logger.info("experiment %s: %s", spec.name, report.status)
    return report


def _run_recorded(spec):
    try:
        return run_experiment(spec)
    except Exception as e:
        logger.exception("experiment %s crashed", spec.name)
        return ExperimentReport(
            name=spec.name, status="error", error=f"{type(e).__name__}: {e}", output_dir=spec.output_dir
        )


def sweep(specs, parallelism=1):
    """Run specs independently and return their reports in input order."""
    specs = list(specs)
    if parallelism < 1:
        raise ValidationError("parallelism must be a positive integer")
    directories = [s.output_dir for s in specs if s.output_dir is not None]
    if len(set(directories)) != len(directories):
        raise ValidationError("every experiment in a sweep needs its own output directory")
    if not specs:
        return []
    if parallelism == 1:
        return [_run_recorded(s) for s in specs]
    with ProcessPoolExecutor(max_workers=parallelism) as pool:
        return list(pool.map(_run_recorded, specs))


def ordered_configuration(order, params, spacing=1.0):
    """Evenly spaced bodies listed left to right by `order`, center of mass at the origin."""
    slots = spacing * np.arange(params.n_bodies, dtype=float)
    positions = np.empty(params.n_bodies)
    positions[order.indices] = slots
    return Configuration.centered(positions, params)


def order_pair_specs(base, spacing_i=1.0, spacing_f=1.0):
    """One spec per (initial order, final order) pair, N!^2 in all."""
    n = base.params.n_bodies
    orders = [OrderLabel(p) for p in itertools.permutations(range(1, n + 1))]
    specs = []
    for index, (o_i, o_f) in enumerate(itertools.product(orders, orders)):
        output_dir = None if base.output_dir is None else os.path.join(base.output_dir, f"{index:03d}")
        specs.append(
            dataclasses.replace(
                base,
                q_i=tuple(ordered_configuration(o_i, base.params, spacing_i).positions),
                q_f=tuple(ordered_configuration(o_f, base.params, spacing_f).positions),
                output_dir=output_dir,
                name=f"{o_i}->{o_f}",
            )
        )
    return specs


def mass_sweep_specs(base, mass_sets, spacing_i=1.0, spacing_f=1.0):
    """Order-pair specs repeated for every mass vector in `mass_sets`."""
    specs = []
    for index, masses in enumerate(mass_sets):
        params = base.params.with_masses(masses)
        label = ",".join(f"{m:g}" for m in params.masses)
        output_dir = None if base.output_dir is None else os.path.join(base.output_dir, f"m{index:02d}")
        variant = dataclasses.replace(base, params=params, output_dir=output_dir)
        for spec in order_pair_specs(variant, spacing_i, spacing_f):
            specs.append(dataclasses.replace(spec, name=f"m={label} {spec.name}"))
    return specs


def collision_matrix(reports):
    """Collision counts indexed by (initial order, final order); None where unusable."""
    labels = sorted({r.order_i for r in reports if r.order_i} | {r.order_f for r in reports if r.order_f})
    position = {label: i for i, label in enumerate(labels)}
    matrix = [[None] * len(labels) for _ in labels]
    for r in reports:
        if r.status in ("passed", "failed") and r.order_i in position and r.order_f in position:
            matrix[position[r.order_i]][position[r.order_f]] = r.collision_count
    return labels, matrix


def collision_summary(reports):
    """Collision-count statistics of converged runs, per mass vector; data only, no verdict.

    Different-order runs give the largest count seen and its histogram;
    same-order runs give how many collided at all. Runs that did not
    converge or had collision detection off are listed as excluded.
    """
    groups = {}
    excluded = []
    for r in reports:
        if r.status not in ("passed", "failed") or r.collision_count is None:
            excluded.append(r.name)
            continue
        key = ",".join(f"{m:g}" for m in r.masses) if r.masses else ""
        group = groups.setdefault(
            key, {"different_order": [], "same_order_runs": 0, "same_order_colliding": 0}
        )
        if r.same_order:
            group["same_order_runs"] += 1
            group["same_order_colliding"] += int(r.collision_count > 0)
        else:
            group["different_order"].append(r.collision_count)

    by_masses = {}
    for key, group in sorted(groups.items()):
        counts = group.pop("different_order")
        histogram = {str(c): counts.count(c) for c in sorted(set(counts))}
        by_masses[key] = {
            **group,
            "different_order_runs": len(counts),
            "max_collisions": max(counts) if counts else None,
            "histogram": histogram,
        }
    return {"by_masses": by_masses, "excluded": excluded}


def format_report(report):
    lines = [f"experiment {report.name}: {report.status} (exit {report.exit_code})"]
    if report.error:
        lines.append(f"  error: {report.error}")
    if report.minimize:
        m = report.minimize
        lines.append(
            f"  action {m['action']:.12g}  converged={m['converged']}  "
            f"iterations={m['iterations']}  grad={m['gradient_norm']:.3e}"
        )
    if report.order_i:
        lines.append(f"  orders {report.order_i} -> {report.order_f} (same order: {report.same_order})")
    if report.collision_count is not None:
        lines.append(f"  collisions {report.collision_count}, sections {' '.join(report.sections)}")
    for event in report.events:
        lines.append(f"    t0={event.t0:.8g} clusters={event.clusters} exponents={event.exponent_fit}")
    if report.min_gap is not None:
        lines.append(f"  min gap {report.min_gap:.4e}")
    if report.eom_residual is not None:
        lines.append(f"  EOM residual {report.eom_residual:.3e}")
    for name, ok in report.checks.items():
        lines.append(f"  [{'pass' if ok else 'FAIL'}] {name}")
    return "\n".join(lines) + "\n"


def _write_exponent_csv(report, path):
    result = report.result
    with open(path, "w", newline="") as handle:
        writer = csv.writer(handle)
        writer.writerow(["t0", "cluster", "log_tau", "log_gap"])
        for event in report.events:
            for k in event.colliding_clusters:
                try:
                    log_tau, log_gap = exponent_series(result.path, event, k, side=event.side)
                except BolzaError:
                    continue
                cluster = "-".join(str(j) for j in event.clusters[k])
                for x, y in zip(log_tau, log_gap):
                    writer.writerow([repr(event.t0), cluster, repr(float(x)), repr(float(y))])


def emit_report(report, out_dir=None):
    """Write report.json, timings.json, report.txt and the CSV series; returns the directory."""
    out = Path(out_dir or report.output_dir or os.environ.get("BOLZA_OUT", "runs"))
    out.mkdir(parents=True, exist_ok=True)
    (out / "report.json").write_text(json.dumps(report.to_dict(), indent=2, sort_keys=True) + "\n")
    (out / "timings.json").write_text(json.dumps(report.timings, indent=2, sort_keys=True) + "\n")
    (out / "report.txt").write_text(format_report(report))
    if report.result is not None:
        (out / "path.json").write_text(path_to_json(report.result.path) + "\n")
        write_trace_csv(report.result, out / "trace.csv")
        write_gap_csv(report.result.path, out / "gaps.csv")
        if report.events:
            _write_exponent_csv(report, out / "exponents.csv")
    logger.info("wrote report for %s to %s", report.name, out)
    return out


def _write_matrix(reports, path):
    labels, matrix = collision_matrix(reports)
    with open(path, "w", newline="") as handle:
        writer = csv.writer(handle)
        writer.writerow(["order_i"] + labels)
        for label, row in zip(labels, matrix):
            writer.writerow([label] + ["" if c is None else c for c in row])


def emit_sweep(reports, out_dir):
    """Per-experiment reports, the collision-count matrix and sweep_summary.json.

    A sweep over several mass vectors gets one matrix per vector,
    collision_matrix_m00.csv onwards, in order of first appearance.
    """
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    for index, report in enumerate(reports):
        emit_report(report, report.output_dir or out / f"{index:03d}")

    by_masses = {}
    for report in reports:
        by_masses.setdefault(tuple(report.masses or ()), []).append(report)
    if len(by_masses) <= 1:
        _write_matrix(reports, out / "collision_matrix.csv")
    else:
        for index, group in enumerate(by_masses.values()):
            _write_matrix(group, out / f"collision_matrix_m{index:02d}.csv")
    summary = collision_summary(reports)
    (out / "sweep_summary.json").write_text(json.dumps(summary, indent=2, sort_keys=True) + "\n")
    return out
