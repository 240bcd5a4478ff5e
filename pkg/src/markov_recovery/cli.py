"""Command-line front end: verification campaigns with CSV/JSON output.

Exit codes: 0 success, 1 a checked property was violated, 2 usage or configuration error.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import math
import sys
from typing import Optional, Sequence

import numpy as np

from . import __version__
from .definetti import definetti_witness, mixed_extension_witness
from .entropies import EntropyReport, marginal_entropy
from .errors import MarkovRecoveryError
from .oneshot import aep_trace, hypothesis_divergence, max_divergence
from .recovery import optimize_recovery
from .squashed import squashed_campaign
from .states import build_qcq, random_density, random_qcq_spec, read_state
from .typicality import distinct_eigenvalue_count, rank_bound, typical_mass_report

HEADER = "# markov-recovery v1"
VERIFY_FR_MAX_DIM = 64
SLACK_TOL = 1e-6
MARKOV_TOL = 1e-7
WITNESS_TOL = 1e-8


class ConfigError(Exception):
    pass


def fmt(x) -> str:
    if isinstance(x, (bool, np.bool_)):
        return "true" if x else "false"
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    if isinstance(x, (float, np.floating)):
        x = float(x)
        if math.isnan(x):
            return "nan"
        if math.isinf(x):
            return "inf" if x > 0 else "-inf"
        return f"{x:.12g}"
    return str(x)


def _json_value(x):
    if isinstance(x, (bool, np.bool_)):
        return bool(x)
    if isinstance(x, (int, np.integer)):
        return int(x)
    if isinstance(x, (float, np.floating)):
        x = float(x)
        if not math.isfinite(x):
            return fmt(x)
        return float(f"{x:.12g}")
    return x


def render(command: str, columns: Sequence[str], rows: Sequence[Sequence], fmt_name: str) -> str:
    if fmt_name == "json":
        payload = {
            "format": HEADER.lstrip("# "),
            "command": command,
            "rows": [{c: _json_value(v) for c, v in zip(columns, row)} for row in rows],
        }
        return json.dumps(payload, indent=2) + "\n"
    buf = io.StringIO()
    buf.write(HEADER + "\n")
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(columns)
    for row in rows:
        writer.writerow([fmt(v) for v in row])
    return buf.getvalue()


def emit(text: str, out: Optional[str]) -> None:
    if out:
        with open(out, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


# -- argument parsing helpers ------------------------------------------------------------


def int_list(s: str) -> list[int]:
    try:
        vals = [int(x) for x in s.split(",") if x.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {s!r}") from None
    if not vals or any(v <= 0 for v in vals):
        raise argparse.ArgumentTypeError(f"expected positive integers, got {s!r}")
    return vals


def float_list(s: str) -> list[float]:
    try:
        return [float(x) for x in s.split(",") if x.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {s!r}") from None


def positive_int(s: str) -> int:
    try:
        v = int(s)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected an integer, got {s!r}") from None
    if v <= 0:
        raise argparse.ArgumentTypeError(f"expected a positive integer, got {s!r}")
    return v


def positive_float(s: str) -> float:
    try:
        v = float(s)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected a number, got {s!r}") from None
    if not v > 0:
        raise argparse.ArgumentTypeError(f"expected a positive number, got {s!r}")
    return v


def budget(s: str) -> tuple[int, int]:
    vals = int_list(s)
    if len(vals) != 2:
        raise argparse.ArgumentTypeError("budget is RESTARTS,ITERATIONS")
    return vals[0], vals[1]


def parse_operator(text: str) -> np.ndarray:
    """``diag:a,b,...`` for a diagonal operator, otherwise a state file path."""
    if text.startswith("diag:"):
        vals = float_list(text[5:])
        if not vals:
            raise ConfigError("empty diagonal")
        return np.diag(np.array(vals, dtype=complex))
    return read_state(text).matrix


def _vector(text: str) -> np.ndarray:
    vals = float_list(text)
    if not vals:
        raise ConfigError("empty vector")
    return np.array(vals)


# -- commands -----------------------------------------------------------------------------


def cmd_cmi(args) -> tuple[str, list[str], list[list], int]:
    s = read_state(args.state)
    if len(s.dims) < 3:
        raise ConfigError(f"need at least three subsystems, got {len(s.dims)}")
    labels = list(s.dims.labels)
    a = args.a.split(",") if args.a else labels[:1]
    b = args.b.split(",") if args.b else labels[1:2]
    c = args.c.split(",") if args.c else labels[2:]
    ia, ib, ic = (s.dims.indices(x) for x in (a, b, c))
    if len(set(ia + ib + ic)) != len(ia + ib + ic):
        raise ConfigError("subsystem groups overlap")
    rep = EntropyReport(
        H_ABC=marginal_entropy(s.matrix, s.dims, ia + ib + ic),
        H_AB=marginal_entropy(s.matrix, s.dims, ia + ib),
        H_BC=marginal_entropy(s.matrix, s.dims, ib + ic),
        H_B=marginal_entropy(s.matrix, s.dims, ib),
    )
    d = rep.as_dict()
    cols = list(d)
    return "cmi", cols, [[d[c] for c in cols]], 0


def _trial_seeds(seed: int, trials: int) -> list[int]:
    return [int(c.generate_state(1)[0]) for c in np.random.SeedSequence(seed).spawn(trials)]


def verify_fr_rows(trials: int, dims, seed: int, restarts: int, iterations: int, markov: bool = False):
    d_a, d_b, d_c = dims
    rows = []
    for t, s in enumerate(_trial_seeds(seed, trials)):
        if markov:
            spec = random_qcq_spec(d_b, d_a, d_c, seed=s, markov=True)
            state = build_qcq(spec)
        else:
            state = random_density([d_a, d_b, d_c], seed=s)
        res = optimize_recovery(state, restarts=restarts, iterations=iterations, seed=s)
        c = res.certificate
        rows.append([t, s, c.cmi_bits, c.target_fidelity, res.petz_fidelity, c.achieved_fidelity, c.slack])
    return rows


VERIFY_FR_COLUMNS = ["trial", "seed", "cmi", "target", "petz_fidelity", "optimized_fidelity", "slack"]


def cmd_verify_fr(args):
    dims = args.dims
    if len(dims) != 3:
        raise ConfigError("--dims needs three values dA,dB,dC")
    if math.prod(dims) > VERIFY_FR_MAX_DIM:
        raise ConfigError(f"dA*dB*dC = {math.prod(dims)} exceeds the cap of {VERIFY_FR_MAX_DIM}")
    restarts, iterations = args.budget
    rows = verify_fr_rows(args.trials, dims, args.seed, restarts, iterations, args.markov)
    bad = any(r[6] < -SLACK_TOL for r in rows)
    if args.markov:
        bad = bad or any(r[5] < 1 - MARKOV_TOL for r in rows)
    return "verify-fr", VERIFY_FR_COLUMNS, rows, 1 if bad else 0


def cmd_oneshot(args):
    rho, sigma = parse_operator(args.rho), parse_operator(args.sigma)
    if rho.shape != sigma.shape:
        raise ConfigError("rho and sigma have different dimensions")
    rows = []
    for eps in args.eps:
        r = hypothesis_divergence(rho, sigma, eps)
        rows.append([eps, r.value_bits, r.primal, r.dual, r.duality_gap, max_divergence(rho, sigma)])
    bad = any(abs(r[4]) > 1e-6 for r in rows)
    return "oneshot", ["epsilon", "dh_bits", "primal", "dual", "duality_gap", "dmax_bits"], rows, 1 if bad else 0


def cmd_aep(args):
    p, q = _vector(args.p), _vector(args.q)
    if p.shape != q.shape:
        raise ConfigError("p and q have different lengths")
    table = aep_trace(np.diag(p), np.diag(q), args.eps, args.n)
    rows = [[r.n, r.epsilon, r.value_bits, r.d_limit, r.value_bits - r.d_limit] for r in table]
    return "aep", ["n", "epsilon", "dh_per_n", "relative_entropy", "difference"], rows, 0


def cmd_typical(args):
    rho = parse_operator(args.rho)
    rows = []
    for n in args.n:
        rep = typical_mass_report(rho, n, args.delta)
        count = distinct_eigenvalue_count(rho, n)
        bound = rank_bound(rho, n)
        rows.append([n, args.delta, rep.mass, rep.complement_log2, count, bound, count <= bound])
    bad = not all(r[6] for r in rows)
    cols = ["n", "delta", "mass", "complement_log2", "distinct_eigenvalues", "rank_bound", "count_ok"]
    return "typical", cols, rows, 1 if bad else 0


def cmd_definetti(args):
    rows = []
    for t, s in enumerate(_trial_seeds(args.seed, args.trials)):
        sigma = random_density(args.d, seed=s).matrix
        if args.mixed:
            rep = mixed_extension_witness(sigma, args.n, seed=s, trials=1)
        else:
            rep = definetti_witness(sigma, args.n, seed=s, trials=1, entangle=args.entangle)
        r = rep.rows[0]
        rows.append([t, r.min_eigenvalue, r.bound_constant, r.n, r.d])
    bad = any(r[1] < -WITNESS_TOL for r in rows)
    return "definetti", ["trial", "min_eigenvalue", "bound_constant", "n", "d"], rows, 1 if bad else 0


SQUASHED_COLUMNS = ["seed", "k", "cmi_bits", "delta", "ladder_max_step", "final_distance", "bound", "holds"]


def cmd_squashed(args):
    restarts, iterations = args.budget
    if len(args.dims) != 3:
        raise ConfigError("--dims needs three values dA,dC,dE")
    if args.dims[0] * args.dims[1] ** max(args.k) * args.dims[2] > 4096:
        raise ConfigError("ladder dimension exceeds 4096")
    result = squashed_campaign(args.trials, args.k, args.seed, args.dims, restarts, iterations)
    rows = [[r.seed, r.k, r.cmi_bits, r.delta, r.ladder_max_step, r.final_distance, r.bound, r.holds] for r in result]
    bad = not all(r[7] for r in rows)
    return "squashed", SQUASHED_COLUMNS, rows, 1 if bad else 0


# -- parser ---------------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="markov-recovery", description="Recovery-map verification campaigns.")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--out", help="output file (default stdout)")
        p.add_argument("--format", choices=["csv", "json"], default="csv")

    p = sub.add_parser("cmi", help="entropies and I(A:C|B) of a state file")
    p.add_argument("state")
    p.add_argument("--a", help="labels of A (comma separated)")
    p.add_argument("--b", help="labels of B")
    p.add_argument("--c", help="labels of C")
    common(p)
    p.set_defaults(func=cmd_cmi)

    p = sub.add_parser("verify-fr", help="fidelity of recovery versus 2^{-I/2} on random states")
    p.add_argument("--trials", type=positive_int, default=10)
    p.add_argument("--dims", type=int_list, default=[2, 2, 2])
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--budget", type=budget, default=(20, 500), help="RESTARTS,ITERATIONS")
    p.add_argument("--markov", action="store_true", help="sample classical-B Markov chains")
    common(p)
    p.set_defaults(func=cmd_verify_fr)

    p = sub.add_parser("oneshot", help="hypothesis-testing and max divergence")
    p.add_argument("--rho", required=True)
    p.add_argument("--sigma", required=True)
    p.add_argument("--eps", type=float_list, default=[0.5])
    common(p)
    p.set_defaults(func=cmd_oneshot)

    p = sub.add_parser("aep", help="D_H^eps(p^n || q^n)/n through type classes")
    p.add_argument("--p", required=True)
    p.add_argument("--q", required=True)
    p.add_argument("--eps", type=positive_float, default=0.5)
    p.add_argument("--n", type=int_list, default=[100, 1000, 10000])
    common(p)
    p.set_defaults(func=cmd_aep)

    p = sub.add_parser("typical", help="typical-subspace mass of rho^n")
    p.add_argument("--rho", required=True)
    p.add_argument("--n", type=int_list, required=True)
    p.add_argument("--delta", type=positive_float, required=True)
    common(p)
    p.set_defaults(func=cmd_typical)

    p = sub.add_parser("definetti", help="de Finetti reduction witnesses")
    p.add_argument("--d", type=positive_int, default=2)
    p.add_argument("--n", type=positive_int, default=2)
    p.add_argument("--trials", type=positive_int, default=100)
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--mixed", action="store_true", help="mixed extensions with the larger constant")
    p.add_argument("--entangle", action="store_true", help="symmetric entangling unitary on E^n")
    common(p)
    p.set_defaults(func=cmd_definetti)

    p = sub.add_parser("squashed", help="k-extendible approximations from iterated recovery")
    p.add_argument("--k", type=int_list, default=[2, 3])
    p.add_argument("--trials", type=positive_int, default=50)
    p.add_argument("--dims", type=int_list, default=[2, 2, 2])
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--budget", type=budget, default=(20, 500), help="RESTARTS,ITERATIONS")
    common(p)
    p.set_defaults(func=cmd_squashed)
    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code) if exc.code is not None else 0
    try:
        command, cols, rows, code = args.func(args)
        emit(render(command, cols, rows, args.format), args.out)
    except (ConfigError, MarkovRecoveryError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    return code


if __name__ == "__main__":
    sys.exit(main())
