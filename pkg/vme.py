import argparse
import copy
import os
import sys
import traceback

import pandas as pd

import dns
import integrate
import mesh as msh
import results
import run_config as rc
import scenario
import solver_base as sb

def __version__():
    return "1.0"

EXIT_OK = 0
EXIT_VALIDATION = 2
EXIT_SOLVER = 3

SUMMARY_COLUMNS = ["name", "contrast", "scheme", "n_ef", "cfl", "wall_seconds", "relative_error", "error_time", "status"]

def config_args(argv=None):
    parser = argparse.ArgumentParser(description='Multiscale (VME) and single-scale (DNS) solver for 1-D Neo-Hookean wave propagation.')
    parser.add_argument('--defaults', action='store_true', default=True, help='Load config/*.yml before the run description. (default=true)')
    parser.add_argument('--no-defaults', dest='defaults', action='store_false', help='Do not load the default configuration; the run description must give every key.')
    parser.add_argument('--traceback', action='store_true', default=False, help='Give traceback information when an error is thrown (default=False)')
    parser.add_argument('-v', '--verbose', action='store_true', default=True, help='Print progress to standard output as it occurs. Does not affect stderr. (default=True)')
    parser.add_argument('--no-verbose', dest='verbose', action='store_false', help='Turn off --verbose')
    parser.add_argument('--version', action='version', help='Print the version', version=f'vme {__version__()}')

    subparsers = parser.add_subparsers(dest='command', required=True)
    _solve = subparsers.add_parser('solve', help='Run one configuration.')
    _solve.add_argument('config', nargs='+', help='Run description file(s) in YML or JSON, merged in order. These are globbable.')
    _solve.add_argument('--workers', type=int, default=None, help='Worker threads for the subdomain solves (overrides output.workers).')
    _solve.add_argument('--out', default=None, help='Output directory (overrides output.directory).')

    _matrix = subparsers.add_parser('matrix', help='Run every row of an experiment manifest and write a summary table.')
    _matrix.add_argument('manifest', help='Manifest file: a base run description plus a list of per-run overrides.')
    _matrix.add_argument('--workers', type=int, default=None, help='Worker threads for every run.')
    _matrix.add_argument('--out', default=None, help='Output directory for the summary and the per-run directories.')

    _args = parser.parse_args(argv)

    _err_list = []
    if (_args.workers is not None) and (_args.workers < 1): _err_list.append("ERROR: The --workers option must be >= 1.")
    if _err_list:
        parser.error("\n".join(_err_list))

    return _args

### Problem construction ###

def build_vme_problem(run_config):
    mesh = msh.build_mesh(run_config.n_es, run_config.n_ecp, run_config.n_ef, run_config.boundary)
    material = scenario.build_modulus_field(run_config.microstructure, mesh)
    d0 = scenario.build_initial_condition(run_config.pulse, mesh)
    return integrate.MultiscaleProblem(mesh, material, d0, run_config.end_time, run_config.snapshot_times)

def build_dns_problem(run_config):
    mesh = msh.build_line_mesh(run_config.n_el, run_config.boundary)
    material = scenario.build_modulus_field(run_config.microstructure, mesh, run_config.n_es)
    d0 = scenario.build_initial_condition(run_config.pulse, mesh)
    _p = run_config.integrator_config().p
    return dns.DnsProblem(mesh, material, d0, run_config.end_time, run_config.dns_cfl, run_config.dns_scheme, _p,
                          run_config.snapshot_times, run_config.dt_floor)

def error_rows(vme_result, dns_result, times, denom_floor):
    '''Relative L-infinity error of the VME total field against DNS at each requested time.'''
    rows = []
    for t in times:
        err, t_vme, t_dns = scenario.compare_at(vme_result, dns_result, t, denom_floor)
        rows.append({"time": float(t), "time_vme": float(t_vme), "time_dns": float(t_dns), "relative_error": err})
    return rows

def run_experiment(run_config, out_dir=None):
    '''Run the configured solver(s) and write snapshots.csv, steps.log and metrics.json. Returns the metrics dict.'''
    out_dir = out_dir or run_config.output_dir
    os.makedirs(out_dir, exist_ok=True)
    verbose = run_config.verbose
    metrics = {"version": __version__(), "solver": run_config.solver, "config": run_config.echo()}

    vme_result, dns_result = None, None
    if run_config.solver in ("vme", "both"):
        if (verbose): print(f'Running VME {run_config.scheme} n_es={run_config.n_es} n_ecp={run_config.n_ecp} n_ef={run_config.n_ef} ...')
        vme_result = integrate.run(build_vme_problem(run_config), run_config.integrator_config(), run_config, run_config.stepper())
        metrics["vme"] = vme_result.metrics()
    if run_config.solver in ("dns", "both"):
        if (verbose): print(f'Running DNS {run_config.dns_scheme} n_el={run_config.n_el} ...')
        dns_result = dns.dns_run(build_dns_problem(run_config), run_config, run_config.dns_stepper())
        metrics["dns"] = dns_result.metrics()

    primary = vme_result if vme_result is not None else dns_result
    primary.write_csv(os.path.join(out_dir, "snapshots.csv"))
    primary.write_steps(os.path.join(out_dir, "steps.log"))
    if vme_result is not None and dns_result is not None:
        dns_result.write_csv(os.path.join(out_dir, "dns_snapshots.csv"))
        dns_result.write_steps(os.path.join(out_dir, "dns_steps.log"))
        _times = run_config.snapshot_times or (run_config.end_time,)
        metrics["errors"] = error_rows(vme_result, dns_result, _times, run_config.denom_floor)
        vme_result.errors = metrics["errors"]
        if (verbose):
            for row in metrics["errors"]: print(f'relative error at t={row["time_vme"]:.4f}: {row["relative_error"]:.5g}')

    results.write_metrics(os.path.join(out_dir, "metrics.json"), metrics)
    if (verbose): print(f'Results written to {out_dir}')
    return metrics

### Experiment matrix ###

def _row_error(metrics, report_time):
    _rows = metrics.get("errors") or []
    if not _rows: return None, None
    _row = min(_rows, key=lambda r: abs(r["time"] - report_time))
    return _row["relative_error"], _row["time_vme"]

def load_manifest(path):
    with open(sb.absolute_path(path), "r") as stream:
        _doc = rc.parse_document(stream.read(), path)
    _runs = _doc.get("runs") or []
    if not isinstance(_runs, list): raise rc.ValidationError([f'ERROR: {path}: runs must be a list.'])
    return _doc.get("base") or {}, _runs, _doc.get("output_dir", None)

def run_matrix(manifest_path, out_dir=None, workers=None, verbose=True, defaults=True):
    '''Run every manifest row on top of its base description; failures are recorded per row and the remaining rows still run.'''
    base, runs, _manifest_out = load_manifest(manifest_path)
    out_dir = sb.absolute_path(out_dir or _manifest_out or "matrix-output")
    os.makedirs(out_dir, exist_ok=True)

    rows = []
    for ix, run in enumerate(runs):
        run = copy.deepcopy(run)
        name = str(run.pop("name", f'run-{ix + 1}'))
        row = {"name": name, "contrast": None, "scheme": None, "n_ef": None, "cfl": None,
               "wall_seconds": None, "relative_error": None, "error_time": None, "status": "ok"}
        try:
            run_config = rc.RunConfig(verbose)
            if defaults: run_config.load_defaults()
            run_config.merge_config(copy.deepcopy(base))
            run_config.merge_config(run)
            if workers is not None: run_config.set_workers(workers)
            _cfg = run_config.config
            row.update({"contrast": _cfg.get("material", {}).get("contrast"), "scheme": _cfg.get("integrator", {}).get("scheme"),
                        "n_ef": _cfg.get("mesh", {}).get("n_ef"), "cfl": _cfg.get("integrator", {}).get("cfl")})
            run_config.validate()
            metrics = run_experiment(run_config, os.path.join(out_dir, name))
            row["wall_seconds"] = metrics.get("vme", metrics.get("dns", {})).get("wall_seconds")
            row["relative_error"], row["error_time"] = _row_error(metrics, run_config.report_time)
        except Exception as e:
            print(f'ERROR. Run {name} failed: {e}', file=sys.stderr)
            row["status"] = f'failed: {type(e).__name__}: {e}'
        rows.append(row)

    summary = pd.DataFrame(rows, columns=SUMMARY_COLUMNS)
    summary.to_csv(os.path.join(out_dir, "summary.csv"), index=False, float_format="%.6g")
    with open(os.path.join(out_dir, "summary.txt"), "w") as a_file:
        a_file.write(summary.to_string(index=False) + "\n")
    if (verbose): print(summary.to_string(index=False))
    return summary

def main(args):
    if args.command == "solve":
        run_config = rc.load_run_config(args.config, args.verbose, args.defaults)
        if args.workers is not None: run_config.set_workers(args.workers)
        run_experiment(run_config, sb.absolute_path(args.out) if args.out else None)
    elif args.command == "matrix":
        run_matrix(args.manifest, args.out, args.workers, args.verbose, args.defaults)
    if (args.verbose): print("Done.")
    return EXIT_OK

def exit_code(error):
    if isinstance(error, (rc.ParseError, rc.ValidationError)): return EXIT_VALIDATION
    return EXIT_SOLVER

if __name__ == "__main__":
    # get command line params.
    args = config_args()
    try:
        sys.exit(main(args))
    except Exception as e:
        print(f"ERROR. Terminating vme with error: {e}", file=sys.stderr)
        if args.traceback:
            traceback.print_exc(file=sys.stderr)
        sys.exit(exit_code(e))
