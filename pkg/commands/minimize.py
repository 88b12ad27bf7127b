import dataclasses
import json
from pathlib import Path

import click

from commands.common import apply_overrides, default_out, echo_json, handle_errors, spec_options
from models.configuration import Configuration
from models.path import path_to_json
from utils.harness import load_spec
from utils.minimize import minimize, write_trace_csv


@click.command("minimize")
@spec_options
@handle_errors
def minimize_cmd(spec_file, **overrides):
    """Minimize the action for the problem in an experiment spec."""
    spec = apply_overrides(load_spec(spec_file), **overrides)
    q_i = Configuration(spec.q_i, spec.params)
    q_f = Configuration(spec.q_f, spec.params)
    cfg = dataclasses.replace(spec.minimize, seed=spec.seed)
    result = minimize(q_i, q_f, spec.T1, spec.T2, cfg)

    out = Path(default_out(spec.output_dir))
    out.mkdir(parents=True, exist_ok=True)
    (out / "path.json").write_text(path_to_json(result.path) + "\n")
    (out / "summary.json").write_text(json.dumps(result.summary(), indent=2) + "\n")
    write_trace_csv(result, out / "trace.csv")
    echo_json(result.summary())
    if not result.converged:
        raise SystemExit(2)
