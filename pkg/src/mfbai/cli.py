"""Command-line entry point: oracle, run, demo and gen subcommands."""

from __future__ import annotations

import argparse
import json
import sys
from dataclasses import asdict, replace
from pathlib import Path

from .harness import (
    ALGORITHMS,
    ExperimentSpec,
    demo_presets,
    random_instance_gen,
    run_batch,
    write_records_csv,
    write_trajectory_csv,
)
from .model import load_instance, save_instance
from .oracle import solve_oracle, zero_weight_mask
from .transport import pair_costs


def _oracle(args) -> int:
    inst = load_instance(args.instance)
    sol = solve_oracle(inst, iters=args.iters, seed=args.seed)
    try:
        mask = zero_weight_mask(inst).tolist()
    except ValueError:
        mask = None
    out = {
        "omega_star": sol.omega_star.tolist(),
        "f_star": sol.f_star,
        "c_star": sol.c_star,
        "per_pair_costs": pair_costs(sol.omega_star, inst.mu, inst.schedule, inst.family).tolist(),
        "mask": mask,
    }
    text = json.dumps(out, indent=2)
    if args.out:
        Path(args.out).write_text(text)
    else:
        print(text)
    return 0


def _write_batch(spec: ExperimentSpec, out: Path, workers: int, tag: str) -> None:
    records, summary = run_batch(spec, workers=workers)
    write_records_csv(records, out / f"{tag}.csv")
    if spec.trajectory_stride:
        for r in records:
            write_trajectory_csv(r, out / f"{tag}_trajectory_{r.trial}.csv")
    (out / f"{tag}_summary.json").write_text(json.dumps(asdict(summary), indent=2))
    print(f"{tag}: " + ", ".join(f"{k}={v:.6g}" for k, v in asdict(summary).items()))


def _run(args) -> int:
    inst = load_instance(args.instance)
    spec = ExperimentSpec(
        inst, args.algo, args.trials, args.delta, args.seed, args.max_steps,
        trajectory_stride=args.trajectory_stride,
        target_fidelities=tuple(args.fidelities) if args.fidelities else None)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    _write_batch(spec, out, args.workers, args.algo)
    return 0


def _demo(args) -> int:
    presets = demo_presets(trials=args.trials, seed=args.seed)
    demo = presets[args.name]
    out = Path(args.out or f"demo-{args.name}")
    out.mkdir(parents=True, exist_ok=True)
    print(demo.description)
    for spec in demo.specs:
        if args.max_steps:
            spec = replace(spec, max_steps=args.max_steps)
        _write_batch(spec, out, args.workers, spec.algo)
    return 0


def _gen(args) -> int:
    inst = random_instance_gen(args.K, args.M, args.a, args.b, args.min_gap, args.seed,
                               lam=args.lam)
    if args.out:
        save_instance(inst, args.out)
    else:
        print(json.dumps(inst.to_dict(), indent=2))
    return 0


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="mfbai", description=__doc__)
    sub = p.add_subparsers(dest="command", required=True)

    o = sub.add_parser("oracle", help="optimal cost proportions of an instance")
    o.add_argument("--instance", "--preset", dest="instance", required=True,
                   help="JSON path or preset name")
    o.add_argument("--iters", type=int, default=200_000)
    o.add_argument("--seed", type=int, default=0)
    o.add_argument("--out")
    o.set_defaults(func=_oracle)

    r = sub.add_parser("run", help="run seeded trials of one algorithm")
    r.add_argument("--instance", "--preset", dest="instance", required=True)
    r.add_argument("--algo", choices=ALGORITHMS, default="mfgrad")
    r.add_argument("--delta", type=float, default=0.01)
    r.add_argument("--trials", type=int, default=100)
    r.add_argument("--seed", type=int, default=0)
    r.add_argument("--max-steps", type=int, default=10_000_000)
    r.add_argument("--trajectory-stride", type=int, default=0)
    r.add_argument("--fidelities", type=int, nargs="+",
                   help="per-arm target fidelities (0-based) for lucb-oracle")
    r.add_argument("--workers", type=int, default=1)
    r.add_argument("--out", required=True)
    r.set_defaults(func=_run)

    d = sub.add_parser("demo", help="run a shipped figure preset")
    d.add_argument("name", choices=sorted(demo_presets(trials=1)))
    d.add_argument("--trials", type=int)
    d.add_argument("--seed", type=int, default=0)
    d.add_argument("--max-steps", type=int)
    d.add_argument("--workers", type=int, default=1)
    d.add_argument("--out")
    d.set_defaults(func=_demo)

    g = sub.add_parser("gen", help="draw a random multi-fidelity instance")
    g.add_argument("--K", type=int, required=True)
    g.add_argument("--M", type=int, required=True)
    g.add_argument("--a", type=float, nargs="+", required=True)
    g.add_argument("--b", type=float, nargs="+", required=True)
    g.add_argument("--lam", type=float, nargs="+")
    g.add_argument("--min-gap", type=float, default=0.1)
    g.add_argument("--seed", type=int, default=0)
    g.add_argument("--out")
    g.set_defaults(func=_gen)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (ValueError, NotImplementedError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
