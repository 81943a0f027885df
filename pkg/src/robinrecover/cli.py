"""Command-line pipeline: data synthesis, reconstruction, verification.

Every command writes a ``manifest.json`` into its output directory
recording the command line, parameters, file paths, seed, version, and
wall clock, so a run can be reproduced exactly.  Exit codes: 0 success,
2 parameter error, 3 solver failure, 4 non-convergence (outputs are
still written), 5 verification failure.
"""

import argparse
import json
import os
import sys
import time

import numpy as np

from . import __version__
from .exceptions import ParameterError, RobinRecoverError, SolverError
from .fields import RobinField
from .inverse import (
    BOUNDARY_L2,
    DISCRETE_C1,
    ReconstructionConfig,
    reconstruct,
)
from .mesh import GAMMA, boundary_arc_parameterization, build_annulus_mesh, load_mesh, save_mesh
from .spectral import (
    add_noise,
    load_spectral_data,
    save_spectral_data,
    synthesize_data,
)
from .targets import resolve_target
from .verify import SUITES, run_suites

_ENV_SEED = "ROBIN_RECOVER_SEED"

_NORM_FLAGS = {"l2": BOUNDARY_L2, "c1": DISCRETE_C1}


def _default_seed():
    raw = os.environ.get(_ENV_SEED)
    if raw is None:
        return 0
    try:
        return int(raw)
    except ValueError:
        raise ParameterError("%s must be an integer, got %r" % (_ENV_SEED, raw))


def _add_mesh_arguments(parser):
    group = parser.add_mutually_exclusive_group(required=True)
    group.add_argument(
        "--annulus",
        nargs=4,
        metavar=("R_INNER", "R_OUTER", "N_CIRCUM", "N_RADIAL"),
        help="structured annulus mesh parameters",
    )
    group.add_argument("--mesh", help="path to a mesh file")


def _resolve_mesh(args):
    if args.annulus is not None:
        try:
            r_inner = float(args.annulus[0])
            r_outer = float(args.annulus[1])
            n_circum = int(args.annulus[2])
            n_radial = int(args.annulus[3])
        except ValueError:
            raise ParameterError("--annulus expects two reals and two integers")
        return build_annulus_mesh(r_inner, r_outer, n_circum, n_radial), {
            "annulus": [r_inner, r_outer, n_circum, n_radial]
        }
    return load_mesh(args.mesh), {"mesh_file": os.path.abspath(args.mesh)}


def _write_manifest(out_dir, command, parameters, inputs, outputs, seed, wall_clock):
    manifest = {
        "command": command,
        "argv": sys.argv[1:],
        "parameters": parameters,
        "inputs": inputs,
        "outputs": outputs,
        "seed": seed,
        "version": __version__,
        "wall_clock_s": wall_clock,
    }
    path = os.path.join(out_dir, "manifest.json")
    with open(path, "w", newline="\n") as fh:
        json.dump(manifest, fh, indent=2, sort_keys=True)
        fh.write("\n")
    return path


def cmd_synth(args):
    start = time.monotonic()
    mesh, mesh_params = _resolve_mesh(args)
    target = resolve_target(args.target)
    h_true = RobinField.from_function(mesh, target)
    data = synthesize_data(mesh, h_true)
    seed = args.seed if args.seed is not None else _default_seed()
    if args.noise is not None:
        data = add_noise(data, args.noise, seed)

    os.makedirs(args.out, exist_ok=True)
    mesh_path = os.path.join(args.out, "mesh.txt")
    data_path = os.path.join(args.out, "data.csv")
    save_mesh(mesh, mesh_path)
    save_spectral_data(data, data_path)
    parameters = dict(mesh_params)
    parameters.update(
        {
            "target": args.target,
            "noise": args.noise,
            "deterministic": args.deterministic,
        }
    )
    _write_manifest(
        args.out,
        "synth",
        parameters,
        [],
        [mesh_path, data_path],
        seed,
        time.monotonic() - start,
    )
    print("wrote %s and %s" % (mesh_path, data_path))
    return 0


def _same_mesh(a, b):
    return (
        a.n_vertices == b.n_vertices
        and a.n_triangles == b.n_triangles
        and np.array_equal(a.vertices, b.vertices)
        and np.array_equal(a.triangles, b.triangles)
    )


def _load_h0(spec, mesh):
    try:
        return RobinField.constant(mesh, float(spec))
    except ValueError:
        pass
    if not os.path.exists(spec):
        raise ParameterError("--h0 must be a constant or a theta,h CSV path")
    fn = resolve_target(spec)
    return RobinField.from_function(mesh, fn)


def cmd_reconstruct(args):
    start = time.monotonic()
    data_path = os.path.join(args.data, "data.csv")
    if not os.path.exists(data_path):
        raise ParameterError("no data.csv under %s" % args.data)
    data = load_spectral_data(data_path)
    mesh, mesh_params = _resolve_mesh(args)

    gen_mesh_path = os.path.join(args.data, "mesh.txt")
    if os.path.exists(gen_mesh_path) and not args.allow_inverse_crime:
        gen_mesh = load_mesh(gen_mesh_path)
        if _same_mesh(gen_mesh, mesh):
            raise ParameterError(
                "reconstruction mesh equals the generation mesh (inverse crime); "
                "choose a different resolution or pass --allow-inverse-crime"
            )

    h0 = _load_h0(args.h0, mesh)
    config = ReconstructionConfig(
        tau=args.tau,
        tol=args.tol,
        eta=args.eta,
        max_iter=args.max_iter,
        gradient_norm=_NORM_FLAGS[args.gradient_norm],
    )
    h_true_fn = resolve_target(args.true_target) if args.true_target else None
    coefficient, trace = reconstruct(mesh, data, h0, config, h_true_fn=h_true_fn)

    os.makedirs(args.out, exist_ok=True)
    trace_path = os.path.join(args.out, "trace.csv")
    trace.write_csv(trace_path)
    h_path = os.path.join(args.out, "h_final.csv")
    param = boundary_arc_parameterization(mesh, GAMMA)
    full = coefficient.as_full_vector()
    with open(h_path, "w", newline="\n") as fh:
        fh.write("theta,h\n")
        for node, theta in param:
            fh.write("%s,%s\n" % (repr(float(theta)), repr(float(full[node]))))

    seed = args.seed if args.seed is not None else _default_seed()
    parameters = dict(mesh_params)
    parameters.update(
        {
            "tau": args.tau,
            "eta": args.eta,
            "tol": args.tol,
            "max_iter": args.max_iter,
            "gradient_norm": args.gradient_norm,
            "h0": args.h0,
            "true_target": args.true_target,
            "deterministic": args.deterministic,
            "converged": trace.converged,
            "iterations": trace.iterations,
        }
    )
    _write_manifest(
        args.out,
        "reconstruct",
        parameters,
        [data_path],
        [trace_path, h_path],
        seed,
        time.monotonic() - start,
    )
    print(
        "finished after %d iterations (converged=%s); wrote %s"
        % (trace.iterations, trace.converged, trace_path)
    )
    return 0 if trace.converged else 4


def cmd_verify(args):
    names = list(SUITES) if args.suite == "all" else [args.suite]
    if args.jobs > 1 and len(names) > 1:
        from concurrent.futures import ThreadPoolExecutor

        def one(name):
            return run_suites([name], seed=args.seed)

        with ThreadPoolExecutor(max_workers=args.jobs) as pool:
            chunks = list(pool.map(one, names))
        results = [row for chunk in chunks for row in chunk]
    else:
        results = run_suites(names, seed=args.seed)

    width = max(len(r.name) for r in results)
    for r in results:
        print(
            "%-8s %-*s  value=%-12.4e bound=%-10.3e %s"
            % (r.suite, width, r.name, r.value, r.bound, "PASS" if r.passed else "FAIL")
        )
    if args.out:
        os.makedirs(os.path.dirname(args.out) or ".", exist_ok=True)
        with open(args.out, "w", newline="\n") as fh:
            fh.write("suite,check,value,bound,status\n")
            for r in results:
                fh.write(r.row() + "\n")
    failed = [r for r in results if not r.passed]
    print("%d checks, %d failed" % (len(results), len(failed)))
    return 5 if failed else 0


def build_parser():
    parser = argparse.ArgumentParser(
        prog="robinrecover",
        description="Robin coefficient recovery from boundary spectral data",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_synth = sub.add_parser("synth", help="generate a mesh and spectral data")
    _add_mesh_arguments(p_synth)
    p_synth.add_argument("--target", required=True, help="builtin name or theta,h CSV")
    p_synth.add_argument("--out", required=True, help="output directory")
    p_synth.add_argument("--noise", type=float, help="uniform noise half-width eps0")
    p_synth.add_argument("--seed", type=int, help="noise seed (default %s or 0)" % _ENV_SEED)
    p_synth.add_argument(
        "--deterministic", action="store_true", help="record single-threaded mode"
    )
    p_synth.set_defaults(func=cmd_synth)

    p_rec = sub.add_parser("reconstruct", help="run the gradient-descent recovery")
    p_rec.add_argument("--data", required=True, help="directory produced by synth")
    _add_mesh_arguments(p_rec)
    p_rec.add_argument("--out", default="reconstruction", help="output directory")
    p_rec.add_argument("--h0", default="1", help="initial guess: constant or CSV path")
    p_rec.add_argument("--tau", type=float, default=0.25, help="fixed step size")
    p_rec.add_argument("--eta", type=float, default=0.0, help="regularization weight")
    p_rec.add_argument("--tol", type=float, default=1e-5, help="stopping tolerance")
    p_rec.add_argument("--max-iter", type=int, default=500, dest="max_iter")
    p_rec.add_argument(
        "--gradient-norm",
        choices=sorted(_NORM_FLAGS),
        default="c1",
        dest="gradient_norm",
        help="stopping norm for the descent direction",
    )
    p_rec.add_argument(
        "--true-target",
        dest="true_target",
        help="ground truth (builtin name or CSV) for the rel_err trace column",
    )
    p_rec.add_argument(
        "--allow-inverse-crime",
        action="store_true",
        help="permit reconstructing on the generation mesh",
    )
    p_rec.add_argument("--seed", type=int, help="recorded seed")
    p_rec.add_argument("--deterministic", action="store_true")
    p_rec.set_defaults(func=cmd_reconstruct)

    p_ver = sub.add_parser("verify", help="run the verification suites")
    p_ver.add_argument(
        "--suite", choices=sorted(SUITES) + ["all"], default="all"
    )
    p_ver.add_argument("--seed", type=int, default=None)
    p_ver.add_argument("--out", help="also write the report as CSV")
    p_ver.add_argument("--jobs", type=int, default=1, help="parallel independent suites")
    p_ver.add_argument("--deterministic", action="store_true", help="forces --jobs 1")
    p_ver.set_defaults(func=cmd_verify)

    return parser


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    if getattr(args, "deterministic", False):
        if getattr(args, "jobs", 1) != 1:
            args.jobs = 1
    try:
        return args.func(args)
    except ParameterError as exc:
        print("error: %s" % exc, file=sys.stderr)
        return 2
    except SolverError as exc:
        print("solver error: %s" % exc, file=sys.stderr)
        return 3
    except RobinRecoverError as exc:
        print("error: %s" % exc, file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
