"""Python front end for the rrfp simulator core.

Workloads, generator specs and TP settings are plain dicts with the same
fields as the JSON config. Traces are returned as JSON-lines strings.
"""

import json

from . import _core

__all__ = [
    "generate_workload",
    "run_rrfp",
    "run_1f1b",
    "run_live",
    "theorem_bound",
    "last_stage_work",
    "brute_force_makespan",
    "validate_trace",
    "breakdown",
    "validate_config",
    "trace_events",
    "BRUTE_FORCE_MAX_TASKS",
]

BRUTE_FORCE_MAX_TASKS = _core.BRUTE_FORCE_MAX_TASKS


def _dump(obj):
    return obj if isinstance(obj, str) else json.dumps(obj)


def generate_workload(spec, seed=0):
    return json.loads(_core.generate_workload(_dump(spec), seed))


def run_rrfp(workload, hint="bf", buffer_limit=32, seed=0, jitter="J0", tp=None):
    """Virtual-clock run. Returns {"trace": jsonl, "metrics": dict}."""
    out = _core.run_rrfp(_dump(workload), hint, buffer_limit, seed, jitter, _dump(tp) if tp else "")
    return json.loads(out)


def run_1f1b(workload, seed=0, jitter="J0"):
    return _core.run_1f1b(_dump(workload), seed, jitter)


def run_live(workload, hint="bf", buffer_limit=32, time_scale="1", seed=0, watchdog_secs=30.0, tp=None):
    out = _core.run_live(_dump(workload), hint, buffer_limit, str(time_scale), seed, watchdog_secs,
                         _dump(tp) if tp else "")
    return json.loads(out)


def theorem_bound(workload):
    return json.loads(_core.theorem_bound(_dump(workload)))


def last_stage_work(workload):
    return _core.last_stage_work(_dump(workload))


def brute_force_makespan(workload):
    return _core.brute_force_makespan(_dump(workload))


def validate_trace(trace, workload, duration_tolerance=0):
    """List of (kind, message) violations; empty when the trace is valid."""
    return _core.validate_trace(trace, _dump(workload), duration_tolerance)


def breakdown(trace):
    return json.loads(_core.breakdown(trace))


def validate_config(doc):
    """JSON path of the first invalid field, or None."""
    path = _core.validate_config(_dump(doc))
    return path or None


def trace_events(trace):
    lines = [json.loads(line) for line in trace.splitlines() if line.strip()]
    return lines[0], lines[1:]
