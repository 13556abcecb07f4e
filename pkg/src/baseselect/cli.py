"""Command line entry point: ``baseselect <subcommand> [options]``.

Exit status is 0 on success, 1 on a domain error (bad ids, infeasible
parameters, malformed files) and 2 on a usage error.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
import time
from dataclasses import asdict, dataclass
from pathlib import Path

from .baselines import SyntheticWorldConfig, generate_synthetic_world
from .continuous import DEFAULT_STEPS
from .core import (
    SelectionProblem,
    build_similarity_matrix,
    similarity_ratio,
)
from .engines import ALGORITHMS, run_algorithm
from .errors import InvalidProblemError, SelectionError
from .greedy import DEFAULT_GAMMA, choose_algorithm
from .io import (
    RunReport,
    atomic_write_text,
    fmt,
    parse_embeddings_csv,
    parse_id_list,
    parse_matrix_csv,
    parse_samples_csv,
    write_chosen_csv,
    write_embeddings_csv,
)
from .regression import fit_sr_regression
from .verification import (
    DEFAULT_ENUM_CAP,
    average_similarity_Q,
    brute_force_optimum,
    certify_bounds,
    check_monotonicity,
    check_submodularity,
)

log = logging.getLogger("baseselect")


@dataclass
class ProblemConfig:
    embeddings: str | None = None
    novel_embeddings: str | None = None
    matrix: str | None = None
    candidates: tuple[str, ...] | None = None
    preselected: tuple[str, ...] = ()
    novel: tuple[str, ...] | None = None
    m: int = 1
    k: int = 1
    lam: float = 0.0
    gamma: float = DEFAULT_GAMMA
    steps: int = DEFAULT_STEPS
    seed: int = 0
    algorithm: str = "auto"

    @classmethod
    def from_args(cls, args) -> "ProblemConfig":
        return cls(
            embeddings=args.embeddings,
            novel_embeddings=args.novel_embeddings,
            matrix=args.matrix,
            candidates=parse_id_list(args.candidates),
            preselected=parse_id_list(args.preselected) or (),
            novel=parse_id_list(args.novel),
            m=args.m, k=args.k, lam=args.lam, gamma=args.gamma,
            steps=args.steps, seed=args.seed,
            algorithm="auto" if getattr(args, "auto", False) else getattr(args, "algorithm", "auto"),
        )

    def assemble(self):
        """Load inputs and build ``(problem, base_table, novel_table)``."""
        if (self.embeddings is None) == (self.matrix is None):
            raise InvalidProblemError("give exactly one of --embeddings or --matrix")
        pre = tuple(self.preselected)
        if self.matrix is not None:
            matrix = parse_matrix_csv(self.matrix)
            problem = SelectionProblem(
                matrix, m=self.m, k=self.k, lam=self.lam,
                candidate_ids=self.candidates, preselected_ids=pre, novel_ids=self.novel,
            )
            return problem, None, None
        base_tab = parse_embeddings_csv(self.embeddings)
        if self.novel_embeddings is not None:
            novel_tab = parse_embeddings_csv(self.novel_embeddings)
            novel_ids = self.novel if self.novel is not None else novel_tab.ids
            default_cands = [c for c in base_tab.ids if c not in pre]
        else:
            if self.novel is None:
                raise InvalidProblemError(
                    "--novel is required when novel classes come from the --embeddings file"
                )
            novel_tab = base_tab
            novel_ids = self.novel
            default_cands = [c for c in base_tab.ids if c not in pre and c not in set(novel_ids)]
        cands = self.candidates if self.candidates is not None else tuple(default_cands)
        base_sub = base_tab.subset(list(dict.fromkeys(list(cands) + list(pre))))
        novel_sub = novel_tab.subset(novel_ids)
        matrix = build_similarity_matrix(base_sub, novel_sub)
        problem = SelectionProblem(
            matrix, m=self.m, k=self.k, lam=self.lam,
            candidate_ids=cands, preselected_ids=pre, novel_ids=novel_ids,
        )
        return problem, base_tab, novel_tab

    def echo(self, problem: SelectionProblem) -> dict:
        d = asdict(self)
        d.update(
            candidates=list(problem.candidate_ids),
            preselected=list(problem.preselected_ids),
            novel=list(problem.novel_ids),
        )
        return d


def _add_problem_args(p: argparse.ArgumentParser, m_required: bool = True) -> None:
    src = p.add_argument_group("inputs")
    src.add_argument("--embeddings", help="CSV of class centroids (id,v1,...,vd)")
    src.add_argument("--novel-embeddings", help="separate CSV of novel-class centroids")
    src.add_argument("--matrix", help="CSV similarity matrix (novel ids in header, base ids in first column)")
    src.add_argument("--candidates", help="candidate ids: comma list or @file")
    src.add_argument("--preselected", help="preselected ids: comma list or @file")
    src.add_argument("--novel", help="novel ids: comma list or @file")
    par = p.add_argument_group("parameters")
    par.add_argument("--m", type=int, required=m_required, help="number of classes to select")
    par.add_argument("--k", type=int, default=1, help="top-K width (default 1)")
    par.add_argument("--lambda", dest="lam", type=float, default=0.0, help="diversity weight (default 0)")
    par.add_argument("--gamma", type=float, default=DEFAULT_GAMMA, help="algorithm-choice margin (default 1.2)")
    par.add_argument("--steps", type=int, default=DEFAULT_STEPS, help="continuous greedy steps T (default 100)")
    par.add_argument("--seed", type=int, default=0)
    par.add_argument("--enum-cap", type=int, default=DEFAULT_ENUM_CAP,
                     help="largest number of subsets the exhaustive oracle may enumerate")
    p.add_argument("--out", help="output directory (JSON on stdout when omitted)")


def _add_algorithm_args(p: argparse.ArgumentParser) -> None:
    p.add_argument("--algorithm", choices=("auto",) + ALGORITHMS, default="auto")
    p.add_argument("--auto", action="store_true", help="shorthand for --algorithm auto")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="baseselect", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True, metavar="COMMAND")

    p = sub.add_parser("simgen", help="write a clustered synthetic world as embedding CSVs")
    p.add_argument("--clusters", type=int, default=5)
    p.add_argument("--classes-per-cluster", type=int, default=20)
    p.add_argument("--novel-classes", type=int, default=10)
    p.add_argument("--dim", type=int, default=16)
    p.add_argument("--intra", type=float, default=0.3, help="within-cluster spread")
    p.add_argument("--inter", type=float, default=1.0, help="between-cluster spread")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True, help="directory for base.csv and novel.csv")

    p = sub.add_parser("select", help="run a selection engine and write a report")
    _add_problem_args(p)
    _add_algorithm_args(p)

    p = sub.add_parser("oracle", help="exhaustive optimum")
    _add_problem_args(p)

    p = sub.add_parser("verify", help="sample submodularity and monotonicity inequalities")
    _add_problem_args(p)
    p.add_argument("--trials", type=int, default=1000)

    p = sub.add_parser("certify", help="run an engine and check its approximation bound")
    _add_problem_args(p)
    _add_algorithm_args(p)
    p.add_argument("--trials", type=int, default=200, help="seeds averaged for randomized engines")

    p = sub.add_parser("regress", help="fit acc ~ x1 + x2 on a CSV of acc,x1,x2")
    p.add_argument("--data", required=True)
    p.add_argument("--out", help="output directory (JSON on stdout when omitted)")

    p = sub.add_parser("bench", help="sweep m (and optionally K, lambda) over engines")
    _add_problem_args(p, m_required=False)
    p.add_argument("--m-values", required=True, help="comma list of budgets")
    p.add_argument("--k-values", help="comma list of K (default: --k)")
    p.add_argument("--lambda-values", help="comma list of lambda (default: --lambda)")
    p.add_argument("--algorithms", default="greedy-target,random-greedy,random,domsim",
                   help="comma list of engines, or 'auto' entries")
    p.add_argument("--seeds", type=int, default=1, help="seeds per randomized engine")
    return parser


def _emit(payload: dict, out: str | None, name: str) -> None:
    text = json.dumps(payload, indent=2, sort_keys=True) + "\n"
    if out:
        atomic_write_text(Path(out) / name, text)
    sys.stdout.write(text)


def _resolve(cfg: ProblemConfig, problem: SelectionProblem) -> tuple[str, str | None]:
    if cfg.algorithm != "auto":
        return cfg.algorithm, None
    choice = choose_algorithm(problem, cfg.gamma)
    return choice.kind.value, choice.rationale


def _diagnostics(problem: SelectionProblem, chosen) -> dict:
    return {
        "Q": average_similarity_Q(problem),
        "similarity_ratio": [sr._asdict() for sr in similarity_ratio(problem, chosen)],
    }


def _run_report(cfg, problem, base, novel, certify_trials=None, enum_cap=DEFAULT_ENUM_CAP):
    started = time.perf_counter()
    name, why = _resolve(cfg, problem)
    result = run_algorithm(name, problem, seed=cfg.seed, steps=cfg.steps, base=base, novel=novel)
    timings = {"select": time.perf_counter() - started}
    cert = None
    if certify_trials is not None:
        t0 = time.perf_counter()
        cert = certify_bounds(problem, result, certify_trials, cap=enum_cap, steps=cfg.steps)
        timings["certify"] = time.perf_counter() - t0
    diag = _diagnostics(problem, result.chosen)
    if why is not None:
        diag["algorithm_choice"] = why
    return RunReport(cfg.echo(problem), result, cert, diag, timings)


def cmd_simgen(args) -> int:
    cfg = SyntheticWorldConfig(
        clusters=args.clusters, classes_per_cluster=args.classes_per_cluster, dim=args.dim,
        intra_spread=args.intra, inter_spread=args.inter, seed=args.seed,
        novel_classes=args.novel_classes,
    )
    base, novel = generate_synthetic_world(cfg)
    out = Path(args.out)
    write_embeddings_csv(base, out / "base.csv")
    write_embeddings_csv(novel, out / "novel.csv")
    _emit({"config": asdict(cfg), "base": str(out / "base.csv"), "novel": str(out / "novel.csv")}, None, "")
    return 0


def cmd_select(args) -> int:
    cfg = ProblemConfig.from_args(args)
    problem, base, novel = cfg.assemble()
    report = _run_report(cfg, problem, base, novel)
    _write_report(report, args.out)
    return 0


def _write_report(report: RunReport, out: str | None, name: str = "report.json") -> None:
    if out:
        report.write(Path(out) / name)
        write_chosen_csv(report.result, Path(out) / "chosen.csv")
    sys.stdout.write(report.to_json())


def cmd_oracle(args) -> int:
    cfg = ProblemConfig.from_args(args)
    cfg.algorithm = "brute-force"
    problem, _, _ = cfg.assemble()
    started = time.perf_counter()
    result = brute_force_optimum(problem, cap=args.enum_cap)
    report = RunReport(cfg.echo(problem), result, None, _diagnostics(problem, result.chosen),
                       {"oracle": time.perf_counter() - started})
    _write_report(report, args.out)
    return 0


def cmd_verify(args) -> int:
    cfg = ProblemConfig.from_args(args)
    problem, _, _ = cfg.assemble()
    rep = check_submodularity(problem, trials=args.trials, seed=cfg.seed)
    payload = {"problem": cfg.echo(problem), "submodularity": asdict(rep), "ok": rep.ok}
    if problem.lam == 0:
        count, worst = check_monotonicity(problem, trials=args.trials, seed=cfg.seed)
        payload["monotonicity"] = {"violations": count, "worst_margin": worst}
        payload["ok"] = rep.ok and count == 0
    _emit(payload, args.out, "verify.json")
    return 0


def cmd_certify(args) -> int:
    cfg = ProblemConfig.from_args(args)
    problem, base, novel = cfg.assemble()
    report = _run_report(cfg, problem, base, novel, certify_trials=args.trials, enum_cap=args.enum_cap)
    _write_report(report, args.out, "certificate.json")
    return 0


def cmd_regress(args) -> int:
    fit = fit_sr_regression(parse_samples_csv(args.data))
    _emit(fit.to_dict(), args.out, "regression.json")
    return 0


def _floats(spec: str | None, default, cast=float) -> list:
    if spec is None:
        return [default]
    try:
        return [cast(s) for s in spec.split(",") if s.strip()]
    except ValueError:
        raise InvalidProblemError(f"bad number list {spec!r}") from None


def cmd_bench(args) -> int:
    cfg = ProblemConfig.from_args(args)
    m_values = _floats(args.m_values, None, int)
    k_values = _floats(args.k_values, cfg.k, int)
    lam_values = _floats(args.lambda_values, cfg.lam)
    algorithms = [a.strip() for a in args.algorithms.split(",") if a.strip()]
    for a in algorithms:
        if a != "auto" and a not in ALGORITHMS:
            raise InvalidProblemError(f"unknown algorithm {a!r}")
    randomized = {"random-greedy", "random", "kmedoids"}
    lines = ["m,k,lambda,algorithm,seed,objective,elapsed"]
    cfg.m = m_values[0]
    problem, base, novel = cfg.assemble()
    for k in k_values:
        for lam in lam_values:
            for m in m_values:
                inst = problem.replace(m=m, k=k, lam=lam)
                for name in algorithms:
                    resolved = choose_algorithm(inst, cfg.gamma).kind.value if name == "auto" else name
                    seeds = range(cfg.seed, cfg.seed + args.seeds) if resolved in randomized else [cfg.seed]
                    for seed in seeds:
                        res = run_algorithm(resolved, inst, seed=seed, steps=cfg.steps, base=base, novel=novel)
                        lines.append(",".join([
                            str(m), str(k), fmt(lam), resolved, str(seed),
                            fmt(res.objective), fmt(res.elapsed),
                        ]))
    text = "\n".join(lines) + "\n"
    if args.out:
        atomic_write_text(Path(args.out) / "bench.csv", text)
    sys.stdout.write(text)
    return 0


COMMANDS = {
    "simgen": cmd_simgen,
    "select": cmd_select,
    "oracle": cmd_oracle,
    "verify": cmd_verify,
    "certify": cmd_certify,
    "regress": cmd_regress,
    "bench": cmd_bench,
}


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code) if exc.code is not None else 0
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return COMMANDS[args.command](args)
    except SelectionError as exc:
        print(f"baseselect {args.command}: error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
