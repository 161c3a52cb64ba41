"""Command-line entry point: ``sprec <subcommand> [options]``.

Every subcommand accepts ``--config file.json``; its keys are option names
(dashes or underscores) and act as defaults that explicit flags override.
"""

from __future__ import annotations

import argparse
import json
import math
import sys
from pathlib import Path

import numpy as np

from . import bench
from .block import BlockHeader, pack_block, unpack_block
from .diagnostics import (
    codelength_bound,
    epsilon_cost,
    mmd_permutation_test,
    mmd_rbf,
    tv_bounds,
)
from .distributions import FactorizedDistribution, RecTask, dimwise_kl_bits, kl_bits
from .index_codec import fit_zeta, nll_bits
from .partition import allocate_intervals, build_partition, trivial_partition
from .rec import decode, encode_orc, encode_pfr, encode_sp_orc, encode_sp_pfr

ALGORITHMS = ("pfr", "sp-pfr", "orc", "sp-orc")


def _emit(obj, out: str | None) -> None:
    text = json.dumps(obj, indent=2)
    if out:
        Path(out).write_text(text + "\n")
    else:
        print(text)


def _load_json(path: str):
    return json.loads(Path(path).read_text())


def _load_task(path: str) -> RecTask:
    obj = _load_json(path)
    if "sigma" in obj:
        return bench.ToyTaskSpec.from_json(obj).task
    return RecTask.from_json(obj)


def _load_prior(path: str) -> FactorizedDistribution:
    obj = _load_json(path)
    if "sigma" in obj:
        return bench.ToyTaskSpec.from_json(obj).task.prior
    if "prior" in obj:
        return FactorizedDistribution.from_json(obj["prior"])
    return FactorizedDistribution.from_json(obj)


def _parse_counts(text: str | None, task: RecTask) -> list[int]:
    if text:
        return [int(c) for c in text.split(",")]
    return allocate_intervals(dimwise_kl_bits(task), math.floor(kl_bits(task)))


def _load_tasks(args) -> list[bench.ToyTaskSpec]:
    if args.tasks:
        return [bench.ToyTaskSpec.from_json(o) for o in _load_json(args.tasks)]
    return bench.gen_tasks(args.count, args.dim, args.seed)


def _load_points(path: str) -> np.ndarray:
    if path.endswith(".npy"):
        return np.load(path)
    return np.loadtxt(path, delimiter=",", ndmin=2)


# ---------------------------------------------------------------------------
# Subcommands
# ---------------------------------------------------------------------------
def cmd_gen_tasks(args) -> int:
    tasks = bench.gen_tasks(args.count, args.dim, args.seed)
    out = []
    for t in tasks:
        obj = t.to_json()
        obj.update(mi_bits=t.mi_bits, kl_bits=kl_bits(t.task), layout=t.layout())
        out.append(obj)
    _emit(out, args.out)
    return 0


def cmd_encode(args) -> int:
    task = _load_task(args.task)
    if args.algorithm in ("pfr", "orc"):
        part = trivial_partition(task.prior)
    else:
        part = build_partition(task.prior, _parse_counts(args.counts, task))
    if args.algorithm == "pfr":
        rep = encode_pfr(task, args.seed, step_ceiling=args.step_ceiling)
    elif args.algorithm == "sp-pfr":
        rep = encode_sp_pfr(task, part, args.seed, step_ceiling=args.step_ceiling)
    elif args.algorithm == "orc":
        rep = encode_orc(task, args.n_candidates, args.seed)
    else:
        rep = encode_sp_orc(task, part, args.n_candidates, args.seed)
    header = BlockHeader(part.counts, args.seed, args.zeta)
    data = pack_block(header, rep.code)
    if args.out:
        Path(args.out).write_bytes(data)
    print(json.dumps({
        "algorithm": rep.algorithm, "bin": rep.code.bin, "local_index": rep.code.local_index,
        "counts": list(part.counts), "steps": rep.steps, "censored": rep.censored,
        "tau_star": rep.tau_star, "kl_bits": rep.kl_bits_used,
        "heuristic_kl_bits": rep.heuristic_kl_bits, "block_bytes": len(data),
        "sample": rep.sample.tolist()}, indent=2))
    return 0


def cmd_decode(args) -> int:
    prior = _load_prior(args.prior)
    header, code = unpack_block(Path(args.block).read_bytes())
    if len(header.counts) != prior.D:
        raise SystemExit(f"block has {len(header.counts)} axes but the prior has {prior.D}")
    part = build_partition(prior, header.counts)
    z = decode(prior, part, code, header.base_seed)
    _emit({"bin": code.bin, "local_index": code.local_index, "counts": list(header.counts),
           "base_seed": header.base_seed, "zeta": header.zeta, "sample": z.tolist()}, args.out)
    return 0


def _write_records(records, args) -> None:
    if args.out:
        bench.write_csv(records, args.out)
    else:
        w = sys.stdout
        w.write(",".join(bench.CSV_COLUMNS) + "\n")
        for r in records:
            w.write(",".join(str(getattr(r, c)) for c in bench.CSV_COLUMNS) + "\n")


def cmd_sweep_pfr(args) -> int:
    records = bench.run_pfr_sweep(_load_tasks(args), args.repeats, args.seed,
                                  args.step_ceiling, args.threads)
    _write_records(records, args)
    if args.summary:
        bench.dump_json({"steps": bench.summarize(records, "dinf_bits", "steps"),
                         "code_bits": bench.summarize(records, "kl_bits", "code_bits")},
                        args.summary)
    return 0


def cmd_sweep_orc(args) -> int:
    sizes = [int(s) for s in args.sizes.split(",")]
    records = bench.run_orc_sweep(_load_tasks(args), sizes, args.repeats, args.seed,
                                  args.threads)
    _write_records(records, args)
    if args.summary:
        bench.dump_json(bench.summarize(records, "kl_bits", "mmd2"), args.summary)
    return 0


def cmd_fit_zipf(args) -> int:
    if args.indices.endswith(".csv"):
        idx = [r.local_index for r in bench.read_csv(args.indices)]
    else:
        idx = [int(v) for v in Path(args.indices).read_text().split()]
    model = fit_zeta(idx)
    nll = np.asarray(nll_bits(model, np.asarray(idx)))
    _emit({"zeta": model.zeta, "exponent": model.exponent, "count": len(idx),
           "mean_nll_bits": float(nll.mean()), "entropy_bits": model.entropy_bits()}, args.out)
    return 0


def cmd_bounds(args) -> int:
    task = _load_task(args.task)
    J = args.J if args.J else 2 ** math.floor(kl_bits(task))
    eps = epsilon_cost(task, J, args.n_mc, args.seed)
    records = [eps.record("epsilon_cost"),
               {"name": "codelength_bound", **codelength_bound(task, J, eps.value).to_json()},
               {"name": "codelength_bound_standard",
                **codelength_bound(task, 1, 0.0).to_json()}]
    if args.t is not None:
        records.append({"name": "tv_bounds", **tv_bounds(task, args.t, args.n_mc, args.seed).to_json()})
    _emit(records, args.out)
    return 0


def cmd_mmd(args) -> int:
    a, b = _load_points(args.a), _load_points(args.b)
    out = {"name": "mmd2", "value": mmd_rbf(a, b, args.bandwidth)}
    if args.permutations:
        test = mmd_permutation_test(a, b, args.permutations, args.bandwidth, args.seed)
        out.update(p_value=test.p_value, bandwidth=test.bandwidth,
                   n_permutations=test.n_permutations)
    _emit(out, args.out)
    return 0


# ---------------------------------------------------------------------------
# Parser
# ---------------------------------------------------------------------------
def build_parser() -> tuple[argparse.ArgumentParser, dict]:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--seed", type=int, default=0)
    common.add_argument("--config", help="JSON file of option defaults")
    common.add_argument("--out", help="output path (CSV, JSON or block file)")
    common.add_argument("--threads", type=int, default=1)

    parser = argparse.ArgumentParser(prog="sprec", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)
    subs = {}

    def add(name, fn, help_text):
        p = sub.add_parser(name, parents=[common], help=help_text)
        p.set_defaults(func=fn)
        subs[name] = p
        return p

    def task_source(p):
        p.add_argument("--tasks", help="JSON task list from gen-tasks")
        p.add_argument("--count", type=int, default=20)
        p.add_argument("--dim", type=int, default=5)
        p.add_argument("--repeats", type=int, default=50)
        p.add_argument("--summary", help="write a per-bucket JSON summary here")

    p = add("gen-tasks", cmd_gen_tasks, "generate toy Gaussian tasks")
    p.add_argument("--count", type=int, default=200)
    p.add_argument("--dim", type=int, default=5)

    p = add("encode", cmd_encode, "encode one sample into a block")
    p.add_argument("--task", required=True, help="task JSON (target and prior, or a toy task)")
    p.add_argument("--algorithm", choices=ALGORITHMS, default="sp-pfr")
    p.add_argument("--counts", help="comma-separated intervals per axis")
    p.add_argument("--n-candidates", type=int, default=256)
    p.add_argument("--zeta", type=float, default=1.0, help="Zipf parameter for the index")
    p.add_argument("--step-ceiling", type=int, default=2 ** 24)

    p = add("decode", cmd_decode, "decode a block to its sample")
    p.add_argument("--prior", required=True, help="prior (or task) JSON")
    p.add_argument("--block", required=True)

    p = add("sweep-pfr", cmd_sweep_pfr, "PFR vs SP-PFR sweep (CSV)")
    task_source(p)
    p.add_argument("--step-ceiling", type=int, default=2 ** 24)

    p = add("sweep-orc", cmd_sweep_orc, "ORC vs SP-ORC sweep (CSV)")
    task_source(p)
    p.add_argument("--sizes", default=",".join(str(2 ** k) for k in range(1, 11)))

    p = add("fit-zipf", cmd_fit_zipf, "fit the Zipf index model")
    p.add_argument("--indices", required=True, help="whitespace-separated integers or sweep CSV")

    p = add("bounds", cmd_bounds, "epsilon cost, codelength and bias bounds")
    p.add_argument("--task", required=True)
    p.add_argument("--J", type=int, help="number of bins (default 2^floor(KL))")
    p.add_argument("--n-mc", type=int, default=10_000)
    p.add_argument("--t", type=float, help="also report ORC bias bounds at this slack")

    p = add("mmd", cmd_mmd, "squared MMD between two point sets")
    p.add_argument("--a", required=True, help=".npy or CSV")
    p.add_argument("--b", required=True)
    p.add_argument("--bandwidth", type=float)
    p.add_argument("--permutations", type=int, default=0)
    return parser, subs


def main(argv=None) -> int:
    argv = sys.argv[1:] if argv is None else list(argv)
    parser, subs = build_parser()
    first, _ = parser.parse_known_args(argv)
    if first.config:
        cfg = {k.replace("-", "_"): v for k, v in _load_json(first.config).items()}
        subs[first.command].set_defaults(**cfg)
    args = parser.parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    raise SystemExit(main())
