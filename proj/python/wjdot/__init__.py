"""Multi-source domain adaptation by weighted joint optimal transport."""

import json as _json

from ._wjdot import (
    ConfigError,
    DimensionError,
    Error,
    Model,
    NumericError,
    ParseError,
    SolverError,
    SourceDomain,
    TargetDomain,
    adapt,
    average_cer,
    command_error_rate,
    detect_group,
    generate_scenario,
    group_scores,
    load_dataset,
    run_experiment_json,
    save_source,
    save_target,
    scenario_names,
    solve_exact,
    solve_sinkhorn,
    train_si,
)

__version__ = "0.1.0"


def run_experiment(config, base_dir=""):
    """Run an experiment from a config dict or JSON string; returns the report dict."""
    text = config if isinstance(config, str) else _json.dumps(config)
    return _json.loads(run_experiment_json(text, base_dir))
