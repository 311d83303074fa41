"""Batch command line: ``solgeo <command> --config FILE [--seed] [--workers] [--out]``.

Exit status is 0 when every report passes, 1 when some report fails, 2 for
an invalid configuration and 3 for a numerical failure such as overflow.
"""

import argparse
import inspect
import os
import sys
import time

from solgeo import __version__, experiments
from solgeo.config import COMMANDS, load_config, with_overrides
from solgeo.errors import ConfigError, DomainError, NonFiniteError
from solgeo.geometry import SolParams
from solgeo.report import report_document, write_csv, write_report

__all__ = ["main", "run", "resolve"]

EXIT_OK, EXIT_FAIL, EXIT_CONFIG, EXIT_NUMERIC = 0, 1, 2, 3

_CLT = {"coordinates": experiments.coordinate_clt, "distance": experiments.distance_clt}
_GEOMETRY = {"sandwich": experiments.sandwich_suite, "preservation": experiments.preservation_checks}
_HARMONIC = {"eigen": experiments.eigen_suite, "identity": experiments.identity_suite}

# arguments filled from params/run rather than options
_FROM_RUN = {"params", "t", "T", "N", "n_paths", "n_points", "seed", "dt", "workers", "cutoff"}


def _option_names(fn):
    return {k: v.default for k, v in inspect.signature(fn).parameters.items()
            if k not in _FROM_RUN and v.default is not inspect.Parameter.empty}


def _targets(doc):
    """Runner functions selected by the command and its selector option."""
    cmd = doc["command"]
    opts = doc.get("options", {})
    if cmd == "clt":
        key = opts.get("functional", "coordinates")
        if key not in _CLT:
            raise ConfigError(f"must be one of {sorted(_CLT)}", path="options.functional")
        return [_CLT[key]], {"functional": key}
    if cmd == "geometry":
        key = opts.get("mode", "sandwich")
        if key not in _GEOMETRY:
            raise ConfigError(f"must be one of {sorted(_GEOMETRY)}", path="options.mode")
        return [_GEOMETRY[key]], {"mode": key}
    if cmd == "harmonic":
        key = opts.get("suite", "all")
        if key not in (*_HARMONIC, "all"):
            raise ConfigError(f"must be one of {sorted(_HARMONIC) + ['all']}", path="options.suite")
        fns = list(_HARMONIC.values()) if key == "all" else [_HARMONIC[key]]
        return fns, {"suite": key}
    fn = {
        "simulate": experiments.simulate_experiment,
        "escape": experiments.escape_experiment,
        "tails": experiments.tails_experiment,
        "deviation": experiments.deviation_experiment,
        "boundary": experiments.boundary_experiment,
    }[cmd]
    return [fn], {}


def resolve(doc):
    """Fill option defaults and reject unknown options.

    Returns ``(resolved_doc, calls)`` where ``calls`` is a list of
    ``(function, kwargs)`` pairs; the worker count is left out of the
    resolved document so that it is identical for any number of workers.
    """
    fns, selectors = _targets(doc)
    opts = dict(doc.get("options", {}))
    allowed = dict(selectors)
    for fn in fns:
        allowed.update(_option_names(fn))
    allowed.pop("workers", None)
    if doc["command"] == "tails":
        allowed["cutoff"] = None
    for key in opts:
        if key not in allowed:
            raise ConfigError(f"unknown option for {doc['command']!r}", path=f"options.{key}")
    resolved_opts = {**allowed, **opts}

    pr = doc["params"]
    try:
        params = SolParams(float(pr["p"]), float(pr["q"]), float(pr["a"]))
    except DomainError as exc:
        raise ConfigError(str(exc), path="params") from None
    run = doc.get("run", {})
    common = {
        "params": params,
        "t": run.get("T"),
        "T": run.get("T"),
        "N": run.get("N"),
        "n_paths": run.get("N"),
        "n_points": run.get("N", 1000),
        "seed": int(run.get("seed", 0)),
        "dt": run.get("dt"),
        "cutoff": resolved_opts.get("cutoff") or run.get("T"),
    }
    calls = []
    for fn in fns:
        sig = inspect.signature(fn).parameters
        kwargs = {}
        for name, par in sig.items():
            if name in selectors or name == "workers":
                continue
            if name in resolved_opts and name not in _FROM_RUN:
                kwargs[name] = resolved_opts[name]
            elif name in common and common[name] is not None:
                kwargs[name] = common[name]
            elif par.default is inspect.Parameter.empty:
                raise ConfigError(f"required by {doc['command']!r}", path=f"run.{name}")
        calls.append((fn, kwargs))

    # the output location and worker count do not affect results
    out = {k: v for k, v in doc.items() if k not in ("run", "options", "output")}
    if doc.get("output"):
        out["output"] = {k: v for k, v in doc["output"].items() if k != "dir"}
    if "run" in doc:
        out["run"] = {k: v for k, v in run.items() if k != "workers"}
    out["options"] = dict(sorted(resolved_opts.items()))
    return out, calls


def _default_workers(doc):
    env = os.environ.get("SOLGEO_WORKERS")
    run = doc.get("run", {})
    if "workers" in run:
        return int(run["workers"])
    if env:
        try:
            w = int(env)
        except ValueError:
            raise ConfigError("must be a positive integer", path="SOLGEO_WORKERS") from None
        if w < 1:
            raise ConfigError("must be a positive integer", path="SOLGEO_WORKERS")
        return w
    return 1


def run(doc, out_dir=None):
    """Execute a validated configuration; returns ``(report_doc, results)``."""
    resolved, calls = resolve(doc)
    workers = _default_workers(doc)
    t0 = time.perf_counter()
    results = []
    for fn, kwargs in calls:
        if "workers" in inspect.signature(fn).parameters:
            kwargs = dict(kwargs, workers=workers)
        results.append(fn(**kwargs))
    elapsed = time.perf_counter() - t0
    reports = [r for res in results for r in res.reports]
    rep = report_document(doc["command"], resolved, reports, __version__, elapsed, workers)

    out_dir = out_dir or doc.get("output", {}).get("dir")
    if out_dir:
        os.makedirs(out_dir, exist_ok=True)
        write_report(os.path.join(out_dir, "report.json"), rep)
        output = doc.get("output", {})
        samples = next((r.samples for r in results if r.samples is not None), None)
        if samples is not None and output.get("samples", True):
            write_csv(os.path.join(out_dir, "samples.csv"), samples)
        path = next((r.path for r in results if r.path is not None), None)
        if path is not None and output.get("path", True):
            write_csv(os.path.join(out_dir, "path.csv"), path)
    return rep, results


def _parser():
    ap = argparse.ArgumentParser(prog="solgeo", description=__doc__.splitlines()[0])
    ap.add_argument("command", choices=COMMANDS)
    ap.add_argument("--config", default="-", help="JSON config file, '-' for stdin (default)")
    ap.add_argument("--seed", type=int, help="override run.seed")
    ap.add_argument("--workers", type=int, help="override run.workers")
    ap.add_argument("--out", help="output directory (overrides output.dir)")
    ap.add_argument("-q", "--quiet", action="store_true", help="do not print report lines")
    ap.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    return ap


def main(argv=None):
    args = _parser().parse_args(argv)
    try:
        if args.config == "-":
            text = sys.stdin.read()
        else:
            with open(args.config) as fh:
                text = fh.read()
        doc = load_config(text)
        if doc["command"] != args.command:
            raise ConfigError(f"config is for {doc['command']!r}, not {args.command!r}",
                              path="command")
        doc = with_overrides(doc, seed=args.seed, workers=args.workers, out=args.out)
        rep, _ = run(doc)
    except OSError as exc:
        print(f"solgeo: cannot read config: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except ConfigError as exc:
        print(f"solgeo: invalid config: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except NonFiniteError as exc:
        print(f"solgeo: numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except DomainError as exc:
        print(f"solgeo: invalid parameters: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    if not args.quiet:
        for r in rep["reports"]:
            verdict = "PASS" if r["pass"] else "FAIL"
            print(f"{verdict}  {r['name']}: {r['statistic']:.6g} <= {r['threshold']:.6g}")
    return EXIT_OK if rep["pass"] else EXIT_FAIL


if __name__ == "__main__":
    sys.exit(main())
