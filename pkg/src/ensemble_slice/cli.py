"""Command-line harness: single runs, evaluation-matched comparisons, marginals.

Exit codes: 0 success, 2 invalid configuration, 3 sampler failure,
4 I/O failure. Failures print a one-line JSON error record to stderr.
"""

import argparse
import csv
from dataclasses import replace
import json
import os
import sys

import numpy as np

from .baselines import run_baseline
from .chainio import git_blob_sha1, histogram, read_chain, write_chain
from .config import ConfigError, RunConfig
from .ensemble import SamplerError, run
from .slice import SliceError
from .targets import make_target

__all__ = ["main", "run_experiment", "compare", "export_marginal", "build_config",
           "format_table", "EXIT_OK", "EXIT_CONFIG", "EXIT_SAMPLER", "EXIT_IO"]

EXIT_OK, EXIT_CONFIG, EXIT_SAMPLER, EXIT_IO = 0, 2, 3, 4

SUMMARY_FIELDS = ["label", "target", "sampler", "move", "dim", "n_walkers", "n_samples",
                  "iat_mean", "iat_reliable", "n_eff", "efficiency", "n_evaluations",
                  "acceptance_rate", "mu_final", "status", "chain_sha1", "message"]


class _Failure(Exception):
    def __init__(self, code, kind, message):
        super().__init__(message)
        self.code, self.kind = code, kind


def _error_record(code, kind, message):
    return {"status": "error", "exit_code": code, "error": kind, "message": message}


def _report_error(record, out=None):
    print(json.dumps(record), file=sys.stderr)
    if out:
        try:
            os.makedirs(out, exist_ok=True)
            with open(os.path.join(out, "error.json"), "w") as fh:
                json.dump(record, fh, indent=2)
        except OSError:
            pass


def _build_target(config):
    try:
        target = make_target(config.target, **config.target_params)
    except (KeyError, TypeError, ValueError) as exc:
        raise ConfigError(exc.args[0] if exc.args else str(exc)) from None
    config.validate(target.dim)
    return target


def _execute(target, config):
    if config.sampler == "ess":
        return run(target, config)
    return run_baseline(target, config)


def _summary_row(config, report, target, sha=None):
    return {
        "label": config.label or _label(config),
        "target": config.target,
        "sampler": config.sampler,
        "move": config.move if config.sampler == "ess" else "",
        "dim": target.dim,
        "n_walkers": config.n_walkers if config.sampler in ("ess", "stretch", "demc")
        else config.n_chains,
        "n_samples": report.n_samples,
        "iat_mean": report.iat_mean,
        "iat_reliable": report.iat_reliable,
        "n_eff": report.n_eff,
        "efficiency": report.efficiency,
        "n_evaluations": report.n_evaluations,
        "acceptance_rate": report.acceptance_rate,
        "mu_final": report.mu_final,
        "status": report.status,
        "chain_sha1": sha,
        "message": "; ".join(report.notes),
    }


def _label(config):
    return f"ess-{config.move}" if config.sampler == "ess" else config.sampler


def _write_outputs(out, config, chain, report, target):
    os.makedirs(out, exist_ok=True)
    chain_path = os.path.join(out, "chain.bin")
    write_chain(chain_path, chain.samples, seed=config.seed,
                move=config.move if config.sampler == "ess" else config.sampler,
                target_id=config.target, mu_final=report.mu_final,
                extra={"failure": chain.failure} if chain.failure else None)
    sha = git_blob_sha1(chain_path)
    doc = {"config": config.to_dict(), "chain_file": "chain.bin", "chain_sha1": sha,
           "report": report.to_dict()}
    with open(os.path.join(out, "report.json"), "w") as fh:
        fh.write(json.dumps(doc, indent=2, sort_keys=True, default=_jsonable) + "\n")
    with open(os.path.join(out, "summary.csv"), "w", newline="") as fh:
        w = csv.DictWriter(fh, fieldnames=SUMMARY_FIELDS)
        w.writeheader()
        w.writerow(_summary_row(config, report, target, sha))
    return sha


def _jsonable(obj):
    if isinstance(obj, np.generic):
        return obj.item()
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    return str(obj)


def run_experiment(config):
    """Run one configuration and write chain, report and summary to ``config.out``.

    Returns the process exit status.
    """
    out = config.out or "."
    try:
        target = _build_target(config)
    except ConfigError as exc:
        _report_error(_error_record(EXIT_CONFIG, "config", str(exc)), config.out)
        return EXIT_CONFIG
    try:
        chain, report = _execute(target, config)
    except (SamplerError, SliceError) as exc:
        record = _error_record(EXIT_SAMPLER, "sampler", str(exc))
        partial = getattr(exc, "chain", None)
        if partial is not None:
            try:
                os.makedirs(out, exist_ok=True)
                write_chain(os.path.join(out, "chain.bin"), partial.samples, seed=config.seed,
                            move=config.move, target_id=config.target,
                            extra={"failure": str(exc)})
                record["partial_chain"] = "chain.bin"
            except OSError:
                pass
        _report_error(record, config.out)
        return EXIT_SAMPLER
    except ValueError as exc:
        _report_error(_error_record(EXIT_CONFIG, "config", str(exc)), config.out)
        return EXIT_CONFIG
    try:
        _write_outputs(out, config, chain, report, target)
    except OSError as exc:
        _report_error(_error_record(EXIT_IO, "io", str(exc)))
        return EXIT_IO
    return EXIT_OK


def compare(configs, out=None, stream=None):
    """Run configurations on a common evaluation budget and tabulate them.

    Ensemble slice runs go first; every baseline without an explicit
    ``budget`` is granted the evaluation count of the first of them. A
    failing run yields a row with status ``"failed"``.

    Returns the list of row dicts (see ``SUMMARY_FIELDS``).
    """
    configs = list(configs)
    order = sorted(range(len(configs)), key=lambda i: configs[i].sampler != "ess")
    rows = [None] * len(configs)
    budget = None
    for i in order:
        cfg = configs[i]
        if cfg.sampler != "ess" and cfg.budget is None and budget is not None:
            cfg = replace(cfg, budget=budget)
        try:
            target = _build_target(cfg)
            chain, report = _execute(target, cfg)
        except (ConfigError, SamplerError, SliceError, ValueError, RuntimeError) as exc:
            rows[i] = {k: None for k in SUMMARY_FIELDS}
            rows[i].update(label=cfg.label or _label(cfg), target=cfg.target,
                           sampler=cfg.sampler, status="failed", message=str(exc))
            continue
        if cfg.sampler == "ess" and budget is None:
            budget = chain.n_density_evaluations - chain.n_init_evaluations
        rows[i] = _summary_row(cfg, report, target)
    if out:
        os.makedirs(out, exist_ok=True)
        with open(os.path.join(out, "comparison.csv"), "w", newline="") as fh:
            w = csv.DictWriter(fh, fieldnames=SUMMARY_FIELDS)
            w.writeheader()
            w.writerows(rows)
    if stream is not None:
        stream.write(format_table(rows) + "\n")
    return rows


def format_table(rows):
    """Plain-text table of IAT and efficiency per run."""
    lines = [f"{'run':<24} {'IAT':>12} {'efficiency':>14} {'evaluations':>12}  status"]
    for r in rows:
        iat = "-" if r["iat_mean"] is None else f"{r['iat_mean']:.1f}"
        if r["iat_mean"] is not None and not r["iat_reliable"]:
            iat += "*"
        eff = "-" if r["efficiency"] is None else f"{r['efficiency']:.3e}"
        ev = "-" if r["n_evaluations"] is None else str(r["n_evaluations"])
        lines.append(f"{str(r['label']):<24} {iat:>12} {eff:>14} {ev:>12}  {r['status']}")
    if any(r["iat_mean"] is not None and not r["iat_reliable"] for r in rows):
        lines.append("* chain too short for a 10% IAT estimate; best estimate shown")
    return "\n".join(lines)


def export_marginal(chain_path, parameter=0, n_bins=50, burn_in=0.5, value_range=None,
                    out=None):
    """Histogram of one parameter over the post-burn-in samples of a chain file.

    Writes ``left,right,mass`` rows to ``out`` (if given) and returns
    ``(edges, masses)``.
    """
    header, samples = read_chain(chain_path)
    if not 0 <= parameter < header["dim"]:
        raise IndexError(f"parameter index {parameter} out of range for dim {header['dim']}")
    kept = samples[int(burn_in * samples.shape[0]):, :, parameter]
    edges, masses = histogram(kept, n_bins, value_range)
    if out:
        with open(out, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["left", "right", "mass"])
            for lo, hi, m in zip(edges[:-1], edges[1:], masses):
                w.writerow([repr(float(lo)), repr(float(hi)), repr(float(m))])
    return edges, masses


_FLAG_FIELDS = {
    "target": "target", "sampler": "sampler", "move": "move", "walkers": "n_walkers",
    "iterations": "n_iterations", "burn_in": "burn_in", "seed": "seed", "workers": "workers",
    "gamma": "gamma", "adapt_max": "adapt_max", "adapt_tol": "adapt_tol", "out": "out",
    "budget": "budget", "chains": "n_chains", "thin": "thin", "init": "init",
    "label": "label", "max_expansions": "max_expansions",
}


def _add_run_flags(p):
    p.add_argument("--config", help="JSON config file; flags override its values")
    p.add_argument("--target")
    p.add_argument("--dim", type=int)
    p.add_argument("--sampler")
    p.add_argument("--move")
    p.add_argument("--walkers", type=int)
    p.add_argument("--iterations", type=int)
    p.add_argument("--burn-in", type=float)
    p.add_argument("--seed", type=int)
    p.add_argument("--workers", type=int)
    p.add_argument("--gamma", type=float)
    p.add_argument("--adapt-max", type=int)
    p.add_argument("--adapt-tol", type=float)
    p.add_argument("--budget", type=int)
    p.add_argument("--chains", type=int)
    p.add_argument("--thin", type=int)
    p.add_argument("--max-expansions", type=int)
    p.add_argument("--init")
    p.add_argument("--label")
    p.add_argument("--param", action="append", default=[], metavar="KEY=VALUE",
                   help="extra target parameter (JSON value), repeatable")
    p.add_argument("--out")


def _load_json(path):
    try:
        with open(path) as fh:
            return json.load(fh)
    except OSError as exc:
        raise _Failure(EXIT_IO, "io", str(exc)) from None
    except json.JSONDecodeError as exc:
        raise _Failure(EXIT_CONFIG, "config", f"{path}: {exc}") from None


def build_config(args, base=None):
    """Merge a config dict (e.g. from ``--config``) with command-line flags."""
    data = dict(base or {})
    for flag, key in _FLAG_FIELDS.items():
        value = getattr(args, flag, None)
        if value is not None:
            data[key] = value
    params = dict(data.get("target_params") or {})
    if getattr(args, "dim", None) is not None:
        params["dim"] = args.dim
    for item in getattr(args, "param", []) or []:
        key, sep, raw = item.partition("=")
        if not sep:
            raise ConfigError(f"--param expects KEY=VALUE, got {item!r}")
        try:
            params[key] = json.loads(raw)
        except json.JSONDecodeError:
            params[key] = raw
    data["target_params"] = params
    return RunConfig.from_dict(data).validate()


def _extra_params(extra):
    """Turn leftover ``--name value`` pairs into target parameters."""
    out = []
    it = iter(extra)
    for flag in it:
        if not flag.startswith("--"):
            raise ConfigError(f"unexpected argument {flag!r}")
        key, sep, value = flag[2:].partition("=")
        if not sep:
            value = next(it, None)
            if value is None:
                raise ConfigError(f"target parameter {flag} needs a value")
        out.append(f"{key.replace('-', '_')}={value}")
    return out


def _cmd_run(args):
    base = _load_json(args.config) if args.config else None
    config = build_config(args, base)
    return run_experiment(config)


def _cmd_compare(args):
    doc = _load_json(args.config)
    entries = doc.get("runs", []) if isinstance(doc, dict) else doc
    shared = doc.get("shared", {}) if isinstance(doc, dict) else {}
    configs = [build_config(argparse.Namespace(), {**shared, **entry}) for entry in entries]
    rows = compare(configs, out=args.out, stream=sys.stdout)
    return EXIT_OK if all(r["status"] != "failed" for r in rows) else EXIT_SAMPLER


def _cmd_marginal(args):
    rng = tuple(args.range) if args.range else None
    try:
        export_marginal(args.chain, args.parameter, args.bins, args.burn_in, rng, args.out)
    except IndexError as exc:
        raise _Failure(EXIT_CONFIG, "config", str(exc)) from None
    except (OSError, ValueError) as exc:
        raise _Failure(EXIT_IO, "io", str(exc)) from None
    return EXIT_OK


def make_parser():
    parser = argparse.ArgumentParser(prog="ensemble-slice",
                                     description="Ensemble slice sampling experiments")
    sub = parser.add_subparsers(dest="command", required=True)
    p_run = sub.add_parser("run", help="run one sampler configuration")
    _add_run_flags(p_run)
    p_run.set_defaults(func=_cmd_run)
    p_cmp = sub.add_parser("compare", help="evaluation-matched comparison of several runs")
    p_cmp.add_argument("--config", required=True,
                       help='JSON file: {"shared": {...}, "runs": [{...}, ...]} or a list')
    p_cmp.add_argument("--out")
    p_cmp.set_defaults(func=_cmd_compare)
    p_marg = sub.add_parser("marginal", help="histogram of one parameter from a chain file")
    p_marg.add_argument("chain")
    p_marg.add_argument("--parameter", type=int, default=0)
    p_marg.add_argument("--bins", type=int, default=50)
    p_marg.add_argument("--burn-in", type=float, default=0.5)
    p_marg.add_argument("--range", type=float, nargs=2, metavar=("LO", "HI"))
    p_marg.add_argument("--out", required=True)
    p_marg.set_defaults(func=_cmd_marginal)
    return parser


def main(argv=None):
    parser = make_parser()
    try:
        args, extra = parser.parse_known_args(argv)
    except SystemExit as exc:
        return EXIT_CONFIG if exc.code else EXIT_OK
    try:
        if extra:
            if args.command != "run":
                raise ConfigError(f"unrecognized arguments: {' '.join(extra)}")
            args.param = list(args.param) + _extra_params(extra)
        return args.func(args)
    except ConfigError as exc:
        _report_error(_error_record(EXIT_CONFIG, "config", str(exc)), getattr(args, "out", None))
        return EXIT_CONFIG
    except _Failure as exc:
        _report_error(_error_record(exc.code, exc.kind, str(exc)))
        return exc.code
    except TypeError as exc:
        _report_error(_error_record(EXIT_CONFIG, "config", str(exc)))
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
