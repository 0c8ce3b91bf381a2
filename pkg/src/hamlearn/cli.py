"""Command-line entry point: ``hamlearn {expand,simulate,learn,verify,bounds}``."""

from __future__ import annotations

import argparse
import sys
import warnings
from typing import List, Optional

import numpy as np

from .analysis import kl_grid
from .checks import SUITES, run_suites
from .clusters import enumerate_clusters
from .estimators import (DynamicsHamiltonianLearner, GibbsHamiltonianLearner, MRFParameterLearner,
                         choose_truncation)
from .hamiltonian import SpecParseError, build_dual_graph, greedy_coloring, parse_hamiltonian
from .mrf import format_samples, parse_mrf, parse_samples, sample_mrf
from .qsim import DEFAULT_CAP, CapExceededError, exact_expectations, sample_pauli_estimates
from .realtime import (DynamicsSpec, choose_probe, default_critical_time, exact_dynamics_values,
                       sample_dynamics_estimates)
from .series import RegimeError, build_all_series, dump_series
from .solver import NumericError

EXIT_OK, EXIT_VERIFY, EXIT_PARSE, EXIT_REGIME, EXIT_UNGUARANTEED, EXIT_NUMERIC = range(6)


def _read(path: str) -> str:
    if path == "-":
        return sys.stdin.read()
    with open(path) as fh:
        return fh.read()


def _write(path: Optional[str], text: str) -> None:
    if path in (None, "-"):
        sys.stdout.write(text)
    else:
        with open(path, "w") as fh:
            fh.write(text)


def _seed(args) -> int:
    if args.seed is not None:
        return args.seed
    seed = int(np.random.SeedSequence().entropy % (1 << 63))
    print(f"seed: {seed}", file=sys.stderr)
    return seed


def _estimates_text(term_ids, values, shots: Optional[int], seed: Optional[int]) -> str:
    lines = [f"#S\t{'' if shots is None else shots}", f"#seed\t{'' if seed is None else seed}",
             "term_id\testimate"]
    lines += [f"{a}\t{v:.17g}" for a, v in zip(term_ids, values)]
    return "\n".join(lines) + "\n"


def _parse_estimates(text: str, term_ids) -> np.ndarray:
    values = {}
    for lineno, line in enumerate(text.splitlines(), start=1):
        if not line or line.startswith("#") or line == "term_id\testimate":
            continue
        parts = line.split("\t")
        if len(parts) != 2:
            raise SpecParseError("expected term_id<TAB>estimate", lineno)
        try:
            values[parts[0]] = float(parts[1])
        except ValueError:
            raise SpecParseError(f"bad number {parts[1]!r}", lineno) from None
    missing = [a for a in term_ids if a not in values]
    if missing:
        raise SpecParseError("missing estimates for " + ", ".join(missing))
    return np.array([values[a] for a in term_ids])


def cmd_expand(args) -> int:
    h = parse_hamiltonian(_read(args.spec))
    g = build_dual_graph(h)
    m_hat, guaranteed, note = choose_truncation(h.beta, args.epsilon, g.max_degree, args.order,
                                                args.allow_unguaranteed)
    out = []
    if args.list_clusters:
        for a in h.term_ids:
            for w in range(2, m_hat + 2):
                for c in enumerate_clusters(g, a, w):
                    body = " ".join(f"{b}^{mu}" for b, mu in sorted(c.items, key=lambda it: h.index(it[0])))
                    out.append(f"cluster\t{a}\t{w}\t{body}\n")
    out.append(dump_series(build_all_series(h, g, m_hat, jobs=args.jobs)))
    _write(args.output, "".join(out))
    if note:
        print(f"warning: {note}", file=sys.stderr)
    return EXIT_OK if guaranteed else EXIT_UNGUARANTEED


def cmd_simulate(args) -> int:
    if args.model == "mrf":
        spec = parse_mrf(_read(args.spec))
        seed = _seed(args)
        _write(args.output, format_samples(sample_mrf(spec, args.shots, seed)))
        return EXIT_OK
    h = parse_hamiltonian(_read(args.spec))
    seed = _seed(args)
    coloring = greedy_coloring(build_dual_graph(h))
    if args.model == "gibbs":
        est = sample_pauli_estimates(h, coloring, args.shots, seed, args.cap)
    else:
        probes = [choose_probe(h, a) for a in h.term_ids]
        est = sample_dynamics_estimates(h, probes, args.shots, seed, args.time, coloring, cap=args.cap)
    _write(args.output, _estimates_text(est.term_ids, est.values, args.shots, seed))
    return EXIT_OK


def _finish(report, args) -> int:
    _write(args.output, report.to_text())
    for msg in report.warnings:
        print(f"warning: {msg}", file=sys.stderr)
    return EXIT_OK if report.guaranteed else EXIT_UNGUARANTEED


def _learn_gibbs(args) -> int:
    h = parse_hamiltonian(_read(args.spec))
    shots = seed = None
    if args.exact_expectations:
        values = exact_expectations(h, args.cap)
    elif args.estimates:
        values = _parse_estimates(_read(args.estimates), h.term_ids)
    else:
        seed = _seed(args)
        shots = args.shots
        values = sample_pauli_estimates(h, greedy_coloring(build_dual_graph(h)), shots, seed, args.cap).values
    learner = GibbsHamiltonianLearner(h, epsilon=args.epsilon, truncation=args.order,
                                      allow_unguaranteed=args.allow_unguaranteed, jobs=args.jobs)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", RuntimeWarning)
        learner.fit(values, sample_count=shots, seed=seed)
    return _finish(learner.report_, args)


def _learn_dynamics(args) -> int:
    h = parse_hamiltonian(_read(args.spec))
    t = args.time
    reps = 1
    if args.amplify and t > 0:
        tc = args.critical_time or default_critical_time(build_dual_graph(h).max_degree)
        reps = DynamicsSpec(t, tc).repetitions
    probes = [choose_probe(h, a) for a in h.term_ids]
    shots = seed = None
    if args.exact_expectations:
        values = exact_dynamics_values(h, t * reps, probes, args.cap)
    elif args.estimates:
        values = _parse_estimates(_read(args.estimates), h.term_ids)
    else:
        seed = _seed(args)
        shots = args.shots
        values = sample_dynamics_estimates(h, probes, shots, seed, t, repetitions=reps, cap=args.cap).values
    learner = DynamicsHamiltonianLearner(h, time=t * reps, epsilon=args.epsilon, truncation=args.order,
                                         allow_unguaranteed=args.allow_unguaranteed, jobs=args.jobs)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", RuntimeWarning)
        learner.fit(values, sample_count=shots, seed=seed)
    return _finish(learner.report_, args)


def _learn_mrf(args) -> int:
    spec = parse_mrf(_read(args.spec))
    if args.samples:
        batch = parse_samples(_read(args.samples))
        seed = None
    else:
        seed = _seed(args)
        batch = sample_mrf(spec, args.shots, seed)
    learner = MRFParameterLearner(spec).fit(batch.samples, seed=seed)
    report = learner.report_
    _write(args.output, report.to_text())
    for msg in report.warnings:
        print(f"warning: {msg}", file=sys.stderr)
    return EXIT_UNGUARANTEED if report.insufficient else EXIT_OK


def cmd_learn(args) -> int:
    if args.mode != "mrf" and not (args.exact_expectations or args.estimates or args.shots):
        raise SpecParseError("one of --exact-expectations, --estimates or --shots is required")
    if args.mode == "mrf" and not (args.samples or args.shots):
        raise SpecParseError("one of --samples or --shots is required")
    return {"gibbs": _learn_gibbs, "dynamics": _learn_dynamics, "mrf": _learn_mrf}[args.mode](args)


def cmd_verify(args) -> int:
    results = run_suites(args.suite, args.inject_fault)
    _write(args.output, "".join(r.line() + "\n" for r in results))
    return EXIT_OK if all(r.passed for r in results) else EXIT_VERIFY


def cmd_bounds(args) -> int:
    lines = ["beta\tepsilon\tkl\tbound\tresult"]
    ok = True
    for b, e, kl, bound, passed in kl_grid(args.betas, args.epsilons):
        ok &= passed
        lines.append(f"{b:g}\t{e:g}\t{kl:.10g}\t{bound:.10g}\t{'pass' if passed else 'fail'}")
    _write(args.output, "\n".join(lines) + "\n")
    return EXIT_OK if ok else EXIT_VERIFY


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="hamlearn", description=__doc__)
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp, spec=True):
        if spec:
            sp.add_argument("spec", help="spec file, or - for stdin")
        sp.add_argument("-o", "--output", help="output path (default stdout)")
        sp.add_argument("--jobs", type=int, default=1, help="worker processes")

    def learning(sp):
        sp.add_argument("--epsilon", type=float, default=0.1)
        sp.add_argument("--order", type=int, help="series truncation order")
        sp.add_argument("--allow-unguaranteed", action="store_true",
                        help="run outside the convergent regime; exit code 4 marks the report")

    sp = sub.add_parser("expand", help="dump the truncated series")
    common(sp)
    learning(sp)
    sp.add_argument("--list-clusters", action="store_true")
    sp.set_defaults(func=cmd_expand)

    sp = sub.add_parser("simulate", help="sample estimates or MRF configurations")
    common(sp)
    sp.add_argument("--model", choices=["gibbs", "dynamics", "mrf"], default="gibbs")
    sp.add_argument("--shots", type=int, required=True)
    sp.add_argument("--seed", type=int)
    sp.add_argument("--cap", type=int, default=DEFAULT_CAP)
    sp.add_argument("--time", type=float, default=0.01)
    sp.set_defaults(func=cmd_simulate)

    sp = sub.add_parser("learn", help="learn coefficients")
    sp.add_argument("mode", choices=["gibbs", "dynamics", "mrf"])
    common(sp)
    learning(sp)
    src = sp.add_mutually_exclusive_group()
    src.add_argument("--exact-expectations", action="store_true", help="use dense oracle values")
    src.add_argument("--estimates", help="estimate file from 'simulate'")
    src.add_argument("--samples", help="MRF samples file")
    src.add_argument("--shots", type=int)
    sp.add_argument("--seed", type=int)
    sp.add_argument("--cap", type=int, default=DEFAULT_CAP)
    sp.add_argument("--time", type=float, default=0.01)
    sp.add_argument("--amplify", action="store_true", help="repeat the evolution up to the critical time")
    sp.add_argument("--critical-time", type=float)
    sp.set_defaults(func=cmd_learn)

    sp = sub.add_parser("verify", help="run oracle self-checks")
    common(sp, spec=False)
    sp.add_argument("--suite", action="append", choices=sorted(SUITES))
    sp.add_argument("--inject-fault", choices=sorted(SUITES), help="perturb one suite (negative control)")
    sp.set_defaults(func=cmd_verify)

    sp = sub.add_parser("bounds", help="KL divergence against its bound on a grid")
    common(sp, spec=False)
    sp.add_argument("--betas", type=float, nargs="+", default=[0.1, 0.5, 1, 2, 4])
    sp.add_argument("--epsilons", type=float, nargs="+", default=[0.05, 0.25, 0.5])
    sp.set_defaults(func=cmd_bounds)
    return p


def main(argv: Optional[List[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except SpecParseError as exc:
        print(f"parse error: {exc}", file=sys.stderr)
        return EXIT_PARSE
    except RegimeError as exc:
        print(f"regime error: {exc}", file=sys.stderr)
        return EXIT_REGIME
    except NumericError as exc:
        print(f"numeric error: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except (CapExceededError, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_PARSE


if __name__ == "__main__":
    sys.exit(main())
