"""Command-line entry point: ``tsmin generate | reduce | oracle | evaluate | validate``.

Exit codes: 0 success, 2 usage, 3 invalid or infeasible instance,
4 solver failure or fallback result, 5 internal error.

``TSMIN_OUTPUT_DIR`` resolves relative output paths; ``TSMIN_THREADS`` sets the
default for ``--threads``.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import logging
import os
import sys
import time
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from . import __version__
from .agent import TrainConfig, save_checkpoint, train
from .embed import DEFAULT_K, compute_embeddings, compute_similarity, parse_similarity_mode
from .errors import (
    InfeasibleInstanceError,
    InstanceFormatError,
    InstanceValidationError,
    OracleLimitError,
    SolverError,
)
from .evalkit import compute_metrics, write_metrics_csv, write_metrics_report
from .graph import build_graph
from .instance import generate_synthetic, instance_from_dict, load_instance, save_instance, validate
from .model import (
    ORACLE_LIMIT,
    Selection,
    bicriteria_objective,
    evaluate_objective,
    is_feasible,
    load_solution_ids,
    save_solution,
    solve_greedy,
    solve_oracle,
    trip_objective,
)

EXIT_OK, EXIT_USAGE, EXIT_INVALID, EXIT_SOLVER, EXIT_INTERNAL = 0, 2, 3, 4, 5

log = logging.getLogger("tsmin")


@dataclass
class RunConfig:
    subcommand: str
    instance_sha256: str = ""
    seed: int = 0
    k: int = DEFAULT_K
    similarity: str = "cosine"
    objective: str = "trip"
    solver: str = "rl"
    bonus: str = "intent"
    train: dict = field(default_factory=dict)
    oracle_limit: int = ORACLE_LIMIT
    force_bnb: bool = False


class UsageError(Exception):
    pass


def _out_path(p):
    p = Path(p)
    base = os.environ.get("TSMIN_OUTPUT_DIR")
    if base and not p.is_absolute():
        p = Path(base) / p
    p.parent.mkdir(parents=True, exist_ok=True)
    return p


def _sha256(path):
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()


def _similarity_arg(text):
    try:
        parse_similarity_mode(text)
    except ValueError as exc:
        raise argparse.ArgumentTypeError(str(exc)) from None
    return text


def _density_arg(text):
    v = float(text)
    if not 0.0 < v <= 1.0:
        raise argparse.ArgumentTypeError(f"density must lie in (0, 1], got {v}")
    return v


def _component_seeds(root_seed):
    """Independent per-component seeds derived from one root seed."""
    embed_ss, train_ss = np.random.SeedSequence(root_seed).spawn(2)
    return int(embed_ss.generate_state(1)[0]), int(train_ss.generate_state(1)[0])


def _prepare(args, inst):
    embed_seed, train_seed = _component_seeds(args.seed)
    emb = compute_embeddings(build_graph(inst), args.k, seed=embed_seed)
    sim = compute_similarity(emb, args.similarity)
    cfg = trip_objective(sim) if args.objective == "trip" else bicriteria_objective(inst)
    return emb, sim, cfg, train_seed


def _train_config(args, seed):
    return TrainConfig(
        total_timesteps=args.steps,
        n_envs=args.n_envs,
        n_steps=args.n_steps,
        learning_rate=args.lr,
        minibatch_size=args.minibatch,
        seed=seed,
        bonus=args.bonus,
    )


def cmd_generate(args):
    inst = generate_synthetic(args.tests, args.stmts, args.faults, args.density, args.seed)
    out = _out_path(args.output)
    save_instance(inst, out)
    print(f"wrote {out}: {inst.num_tests} tests, {inst.num_stmts} statements, {inst.num_faults} faults")
    return EXIT_OK


def cmd_validate(args):
    try:
        doc = json.loads(Path(args.instance).read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise InstanceFormatError(f"{args.instance}: not valid JSON ({exc})") from None
    rep = validate(instance_from_dict(doc))
    print(json.dumps(asdict(rep), indent=2, default=str))
    return EXIT_OK if rep.ok else EXIT_INVALID


def cmd_reduce(args):
    if args.solver == "rl" and args.objective != "trip":
        raise UsageError("the rl solver optimizes the trip objective only")
    inst = load_instance(args.instance)
    t0 = time.perf_counter()
    emb, sim, cfg, train_seed = _prepare(args, inst)
    run = RunConfig(
        subcommand="reduce", instance_sha256=_sha256(args.instance), seed=args.seed, k=args.k,
        similarity=sim.label, objective=args.objective, solver=args.solver, bonus=args.bonus,
        oracle_limit=args.limit, force_bnb=args.force_bnb,
    )
    training = None
    if args.solver == "rl":
        tcfg = _train_config(args, train_seed)
        run.train = asdict(tcfg)
        log_fh = open(_out_path(args.log), "w", encoding="utf-8") if args.log else None
        trace_fh = open(_out_path(args.trace), "w", encoding="utf-8") if args.trace else None
        try:
            training = train(inst, emb, sim, tcfg, log_stream=log_fh, trace_stream=trace_fh)
        finally:
            for fh in (log_fh, trace_fh):
                if fh:
                    fh.close()
        sol = training.solution
        if args.checkpoint:
            save_checkpoint(training.agent, _out_path(args.checkpoint))
    elif args.solver == "oracle":
        sol = solve_oracle(inst, cfg, limit=args.limit, method="bnb" if args.force_bnb else "exhaustive")
    else:
        sol = solve_greedy(inst, cfg)
    wall = time.perf_counter() - t0

    out = _out_path(args.output)
    provenance = {"config": asdict(run), "similarity_mode": sim.label, "tool_version": __version__}
    save_solution(sol, inst, out, extra=provenance)
    metrics = compute_metrics(sol.selection, inst, sim, wall_time_s=wall)
    report = _out_path(args.report) if args.report else out.with_suffix(".report.json")
    write_metrics_report(
        metrics, report, config=asdict(run), similarity_mode=sim.label,
        ablation=sim.mode == "constant", instance=str(args.instance), solution=str(out),
        fallback=sol.fallback, threads=args.threads,
        training_log=training.log if training else None,
    )
    print(f"{sol.solver}: {len(sol.indices)}/{inst.num_tests} tests, objective {sol.objective:.6f}, "
          f"statement coverage {metrics.stmt_coverage_pct:.1f}%, FDR {metrics.fault_detection_rate_pct:.1f}%, "
          f"similarity {sim.label}")
    if sol.fallback or not sol.feasible:
        print("no feasible trajectory found; wrote greedy fallback", file=sys.stderr)
        return EXIT_SOLVER
    return EXIT_OK


def cmd_oracle(args):
    inst = load_instance(args.instance)
    _, sim, cfg, _ = _prepare(args, inst)
    sol = solve_oracle(inst, cfg, limit=args.limit, method="bnb" if args.force_bnb else "exhaustive",
                       node_budget=args.node_budget)
    ids = [inst.test_ids[i] for i in sol.indices]
    status = "optimal" if sol.proven_optimal else "best found (node budget exhausted)"
    print(f"{status}: {ids} objective {sol.objective:.6f}")
    if args.output:
        run = RunConfig(subcommand="oracle", instance_sha256=_sha256(args.instance), seed=args.seed,
                        k=args.k, similarity=sim.label, objective=args.objective, solver="oracle",
                        oracle_limit=args.limit, force_bnb=args.force_bnb)
        save_solution(sol, inst, _out_path(args.output), extra={"config": asdict(run), "similarity_mode": sim.label})
    return EXIT_OK


def cmd_evaluate(args):
    inst = load_instance(args.instance)
    ids = load_solution_ids(args.solution)
    known = set(inst.test_ids)
    missing = [t for t in ids if t not in known]
    if missing:
        raise InstanceValidationError(f"solution names tests not in the instance: {missing}")
    sel = Selection(inst.num_tests, [inst.index_of(t) for t in ids])
    emb, sim, cfg, _ = _prepare(args, inst)
    metrics = compute_metrics(sel, inst, sim)
    feas = is_feasible(sel, inst, args.objective)
    doc = {
        "metrics": asdict(metrics),
        "feasible": feas.feasible,
        "uncovered": feas.labels(),
        "objective_kind": args.objective,
        "objective_value": evaluate_objective(sel, cfg),
        "similarity_mode": sim.label,
    }
    print(json.dumps(doc, indent=2))
    if args.report:
        write_metrics_report(metrics, _out_path(args.report), feasible=feas.feasible, uncovered=feas.labels())
    if args.csv:
        write_metrics_csv([{"instance": str(args.instance), **asdict(metrics)}], _out_path(args.csv))
    return EXIT_OK


def _add_model_flags(p):
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--k", type=int, default=DEFAULT_K, help="embedding dimension")
    p.add_argument("--similarity", type=_similarity_arg, default="cosine", help="cosine | constant:<value>")
    p.add_argument("--objective", choices=("trip", "bicriteria"), default="trip")


def build_parser():
    parser = argparse.ArgumentParser(prog="tsmin", description="Similarity-aware test suite minimization.")
    parser.add_argument("--version", action="version", version=__version__)
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    g = sub.add_parser("generate", help="write a random synthetic instance")
    g.add_argument("--tests", type=int, required=True)
    g.add_argument("--stmts", type=int, required=True)
    g.add_argument("--faults", type=int, required=True)
    g.add_argument("--density", type=_density_arg, required=True)
    g.add_argument("--seed", type=int, required=True)
    g.add_argument("-o", "--output", required=True)
    g.set_defaults(func=cmd_generate)

    v = sub.add_parser("validate", help="report instance problems")
    v.add_argument("instance")
    v.set_defaults(func=cmd_validate)

    r = sub.add_parser("reduce", help="embed, solve and report")
    r.add_argument("instance")
    r.add_argument("-o", "--output", required=True, help="solution file")
    r.add_argument("--report", help="metrics report (default: <output>.report.json)")
    _add_model_flags(r)
    r.add_argument("--solver", choices=("rl", "oracle", "greedy"), default="rl")
    r.add_argument("--steps", type=int, default=10_000, help="total training timesteps")
    r.add_argument("--n-envs", type=int, default=5)
    r.add_argument("--n-steps", type=int, default=500)
    r.add_argument("--lr", type=float, default=3e-4)
    r.add_argument("--minibatch", type=int, default=32)
    r.add_argument("--bonus", choices=("intent", "literal"), default="intent")
    r.add_argument("--limit", type=int, default=ORACLE_LIMIT)
    r.add_argument("--force-bnb", action="store_true")
    r.add_argument("--threads", type=int, default=int(os.environ.get("TSMIN_THREADS", "5")))
    r.add_argument("--log", help="line-delimited training log")
    r.add_argument("--trace", help="line-delimited rollout trace")
    r.add_argument("--checkpoint", help="policy checkpoint (.npz)")
    r.set_defaults(func=cmd_reduce)

    o = sub.add_parser("oracle", help="exact optimum (exhaustive or branch and bound)")
    o.add_argument("instance")
    _add_model_flags(o)
    o.add_argument("--limit", type=int, default=ORACLE_LIMIT)
    o.add_argument("--force-bnb", action="store_true")
    o.add_argument("--node-budget", type=int, default=2_000_000)
    o.add_argument("-o", "--output")
    o.set_defaults(func=cmd_oracle)

    e = sub.add_parser("evaluate", help="metrics of a solution file against an instance")
    e.add_argument("instance")
    e.add_argument("solution")
    _add_model_flags(e)
    e.add_argument("--report")
    e.add_argument("--csv")
    e.set_defaults(func=cmd_evaluate)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code) if exc.code is not None else EXIT_OK
    logging.basicConfig(level=logging.INFO if args.verbose else logging.ERROR, format="%(levelname)s %(message)s")
    try:
        return args.func(args)
    except UsageError as exc:
        print(f"tsmin: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except ValueError as exc:
        print(f"tsmin: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (InstanceFormatError, InstanceValidationError, InfeasibleInstanceError, FileNotFoundError) as exc:
        print(f"tsmin: invalid instance: {exc}", file=sys.stderr)
        return EXIT_INVALID
    except (OracleLimitError, SolverError) as exc:
        print(f"tsmin: solver failure: {exc}", file=sys.stderr)
        return EXIT_SOLVER
    except Exception as exc:  # noqa: BLE001
        log.exception("internal error")
        print(f"tsmin: internal error: {exc}", file=sys.stderr)
        return EXIT_INTERNAL


if __name__ == "__main__":
    sys.exit(main())
