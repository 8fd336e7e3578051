"""Command-line interface.

Subcommands mirror the pipeline stages: sample, train, compress, build,
solve, verify-schedule, experiment, report. All heavy lifting lives in
the library modules; this file only parses arguments and moves files.
"""

import argparse
import json
import sys

import numpy as np

from . import case_ingest, grid_model, jacobian
from .ac_solver import slp_acopf, mtp_acopf_check, make_dispatch_spec
from .data_factory import (SamplerConfig, LoadScheme, collect_dataset,
                           dump_dataset, load_dataset)
from .pwl_learner import (TrainConfig, train_compact, sparsify_retrain,
                          model_to_json, model_from_json)
from .milp_encode import (bound_box_from_network, interval_bounds,
                          tighten_bounds, prune)
from .milp_solve import solve_milp, export_mps, import_solution
from .uc_builder import (build_nn_ac_uc, build_l_ac_uc, build_dc_uc,
                         extract_schedule, schedule_to_json,
                         schedule_from_json)
from . import harness

INTERNAL_BINARY_LIMIT = 100


def _add_system_args(p):
    p.add_argument("--case", required=True, help="MATPOWER case file")
    p.add_argument("--uc", required=True, help="UC instance JSON")
    p.add_argument("--derate", type=float, default=0.0,
                   help="thermal limit derate factor in [0, 1)")


def _load_system(args):
    with open(args.case) as fh:
        case = case_ingest.parse_matpower(fh.read())
    case_ingest.validate_case(case)
    if args.derate:
        case = case_ingest.derate_thermal_limits(case, args.derate)
    net = grid_model.build_network(case)
    with open(args.uc) as fh:
        inst = case_ingest.load_uc_instance(fh.read(), case)
    return case, net, inst


def _linearization(net, inst):
    spec0 = make_dispatch_spec(net, inst, 0)
    op0, _ = slp_acopf(net, spec0, objective="min-cost")
    return op0, jacobian.linearize(net, op0)


def cmd_sample(args):
    _, net, inst = _load_system(args)
    cfg = SamplerConfig(combos_per_gen=args.combos_per_gen,
                        min_samples=args.min_samples)
    ds = collect_dataset(net, inst, cfg, seed=args.seed)
    dump_dataset(ds, args.out)
    print(f"wrote {ds.size} samples to {args.out}")
    return 0


def cmd_train(args):
    _, net, inst = _load_system(args)
    ds = load_dataset(args.dataset)
    op0, lin = _linearization(net, inst)
    if args.dump_jacobian:
        with open(args.dump_jacobian, "w") as fh:
            fh.write(jacobian.dump_jacobian(lin.Jstar, header="Jstar"))
    cfg = TrainConfig(lr=args.lr, batch=args.batch, steps=args.steps,
                      seed=args.seed)
    Xtr, Ytr = ds.train
    model = train_compact(Xtr, Ytr, lin, args.rho, cfg)
    with open(args.out, "w") as fh:
        fh.write(model_to_json(model))
    print(f"trained rho={args.rho} model -> {args.out}")
    return 0


def cmd_compress(args):
    _, net, inst = _load_system(args)
    with open(args.model) as fh:
        model, _ = model_from_json(fh.read())
    ds = load_dataset(args.dataset)
    cfg = TrainConfig(lr=args.lr, batch=args.batch, steps=args.steps,
                      seed=args.seed)
    Xtr, Ytr = ds.train
    for target in args.target:
        model = sparsify_retrain(model, Xtr, Ytr, target, cfg)
    box = bound_box_from_network(net, inst)
    bounds = interval_bounds(model, box)
    if args.bound_mode in ("lp", "milp"):
        bounds = tighten_bounds(model, box, mode=args.bound_mode,
                                start=bounds)
    bounds = prune(model, bounds)
    kept = int(model.mask1.sum() + model.mask2.sum())
    total = model.mask1.size + model.mask2.size
    with open(args.out, "w") as fh:
        fh.write(model_to_json(model, bounds))
    print(f"compressed model ({kept}/{total} weights kept, "
          f"{bounds.free_count()}/{model.rho} ReLUs free) -> {args.out}")
    return 0


def _build_formulation(args, net, inst):
    if args.formulation == "nn":
        if not args.model:
            raise SystemExit("--model is required for the nn formulation")
        with open(args.model) as fh:
            model, bounds = model_from_json(fh.read())
        box = bound_box_from_network(net, inst)
        if bounds is None:
            bounds = interval_bounds(model, box)
            if args.bound_mode in ("lp", "milp"):
                bounds = tighten_bounds(model, box, mode=args.bound_mode,
                                        start=bounds)
            bounds = prune(model, bounds)
        return build_nn_ac_uc(inst, net, model, bounds, box=box)
    if args.formulation == "linear":
        _, lin = _linearization(net, inst)
        return build_l_ac_uc(inst, net, lin)
    return build_dc_uc(inst, net)


def cmd_build(args):
    _, net, inst = _load_system(args)
    milp, _ = _build_formulation(args, net, inst)
    if args.stats:
        for key, val in milp.stats().items():
            print(f"{key}: {val}")
    with open(args.out, "w") as fh:
        fh.write(export_mps(milp))
    print(f"wrote MPS model to {args.out}")
    return 0


def cmd_solve(args):
    _, net, inst = _load_system(args)
    milp, ucv = _build_formulation(args, net, inst)
    nbin = len(milp.binary_indices())
    if args.engine == "export":
        with open(args.out, "w") as fh:
            fh.write(export_mps(milp))
        print(f"exported MPS to {args.out}; solve externally and use "
              "import on the solution file")
        return 0
    if nbin > INTERNAL_BINARY_LIMIT:
        print(f"warning: {nbin} binaries exceed the internal engine's "
              f"comfort zone (~{INTERNAL_BINARY_LIMIT}); consider "
              "--engine export", file=sys.stderr)
    sol = solve_milp(milp, gap_target=args.gap, time_budget=args.time_budget,
                     node_budget=args.node_budget)
    print(f"status: {sol.status}  objective: {sol.objective}  "
          f"gap: {sol.gap:.4%}  nodes: {sol.nodes}")
    if sol.x is None:
        return 1
    sched = extract_schedule(milp, sol, inst, ucv, net=net)
    with open(args.out, "w") as fh:
        fh.write(schedule_to_json(sched))
    print(f"wrote schedule to {args.out}")
    return 0


def cmd_verify_schedule(args):
    _, net, inst = _load_system(args)
    with open(args.schedule) as fh:
        sched = schedule_from_json(fh.read())
    report = mtp_acopf_check(net, inst, sched)
    print(f"verdict: {report.verdict}")
    print(f"max violation: {report.max_violation:.3e}")
    if report.verdict == "feasible":
        print(f"dispatch cost: {report.objective:.6g}")
        return 0
    return 2 if report.verdict == "infeasible" else 3


def _generate_schemes(per_kind, seed):
    rng = np.random.default_rng(seed)
    schemes = []
    for i in range(per_kind):
        schemes.append(LoadScheme("uniform",
                                  scale=float(rng.uniform(0.85, 1.15))))
        schemes.append(LoadScheme("per-bus-random", spread=0.15,
                                  seed=int(rng.integers(0, 2 ** 31))))
        schemes.append(LoadScheme("sinusoidal",
                                  amplitude=float(rng.uniform(0.0, 0.15))))
    return tuple(schemes)


def cmd_experiment(args):
    cfg = harness.ExperimentConfig(
        case_path=args.case, uc_path=args.uc,
        sample_uc_path=args.sample_uc, derate=args.derate,
        rho=args.rho,
        sampler=SamplerConfig(combos_per_gen=args.combos_per_gen),
        train=TrainConfig(steps=args.steps, seed=args.seed),
        schemes=_generate_schemes(args.scenarios_per_scheme, args.seed),
        formulations=tuple(args.formulations.split(",")),
        bound_mode=args.bound_mode, gap_target=args.gap,
        time_budget=args.time_budget, seed=args.seed)
    report = harness.run_experiment(cfg)
    files = harness.emit_reports(report, args.out)
    import os
    with open(os.path.join(args.out, "report.json"), "w") as fh:
        fh.write(harness.report_to_json(report))
    print(harness.format_tally(report))
    for f in files:
        print(f"wrote {f}")
    return 0


def cmd_report(args):
    with open(args.report) as fh:
        report = harness.report_from_json(fh.read())
    files = harness.emit_reports(report, args.out)
    print(harness.format_tally(report))
    for f in files:
        print(f"wrote {f}")
    return 0


def _add_train_flags(p):
    p.add_argument("--lr", type=float, default=2.5e-4)
    p.add_argument("--batch", type=int, default=75)
    p.add_argument("--steps", type=int, default=75000)
    p.add_argument("--seed", type=int, default=0)


def main(argv=None):
    parser = argparse.ArgumentParser(
        prog="compactpf",
        description="Compact piecewise-linear power flow surrogates for "
                    "unit commitment")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("sample", help="generate a feasible power-flow dataset")
    _add_system_args(p)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--combos-per-gen", type=int, default=2)
    p.add_argument("--min-samples", type=int, default=1)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_sample)

    p = sub.add_parser("train", help="train the compact PWL surrogate")
    _add_system_args(p)
    p.add_argument("--dataset", required=True)
    p.add_argument("--rho", type=int, default=8)
    _add_train_flags(p)
    p.add_argument("--dump-jacobian", metavar="FILE",
                   help="write the linearization Jacobian as text")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("compress", help="sparsify-retrain a trained model")
    _add_system_args(p)
    p.add_argument("--model", required=True)
    p.add_argument("--dataset", required=True)
    p.add_argument("--target", type=float, action="append", required=True,
                   help="sparsity fraction; repeat for a schedule")
    p.add_argument("--bound-mode", choices=("interval", "lp", "milp"),
                   default="lp")
    _add_train_flags(p)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_compress)

    for name, fn in (("build", cmd_build), ("solve", cmd_solve)):
        p = sub.add_parser(name, help=f"{name} a UC formulation")
        _add_system_args(p)
        p.add_argument("--formulation", choices=("nn", "linear", "dc"),
                       required=True)
        p.add_argument("--model", help="trained model JSON (nn formulation)")
        p.add_argument("--bound-mode", choices=("interval", "lp", "milp"),
                       default="lp")
        p.add_argument("--out", required=True)
        if name == "build":
            p.add_argument("--stats", action="store_true",
                           help="print model size statistics")
        else:
            p.add_argument("--engine", choices=("internal", "export"),
                           default="internal")
            p.add_argument("--gap", type=float, default=0.01)
            p.add_argument("--time-budget", type=float, default=600.0)
            p.add_argument("--node-budget", type=int, default=200000)
        p.set_defaults(func=fn)

    p = sub.add_parser("verify-schedule",
                       help="run the MTP AC-OPF feasibility oracle")
    _add_system_args(p)
    p.add_argument("--schedule", required=True)
    p.set_defaults(func=cmd_verify_schedule)

    p = sub.add_parser("experiment", help="run the full scenario sweep")
    _add_system_args(p)
    p.add_argument("--sample-uc", default=None,
                   help="richer UC instance used only for sampling/training")
    p.add_argument("--rho", type=int, default=8)
    p.add_argument("--steps", type=int, default=75000)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--combos-per-gen", type=int, default=2)
    p.add_argument("--scenarios-per-scheme", type=int, default=1)
    p.add_argument("--formulations", default="nn,linear,dc")
    p.add_argument("--bound-mode", choices=("interval", "lp", "milp"),
                   default="lp")
    p.add_argument("--gap", type=float, default=0.01)
    p.add_argument("--time-budget", type=float, default=600.0)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_experiment)

    p = sub.add_parser("report", help="re-emit reports from a saved sweep")
    p.add_argument("--report", required=True, help="report.json path")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_report)

    args = parser.parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
