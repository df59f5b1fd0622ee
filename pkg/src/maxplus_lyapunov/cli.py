"""Command-line front end.

Examples::

    maxplus-lyapunov --preset open_tandem --method all
    maxplus-lyapunov --preset fork_join_5 --format json
    maxplus-lyapunov --matrix a.txt --method spectral_radius
    maxplus-lyapunov --preset closed_tandem --convergence 100,1000,10000

Exit status: 0 on success, 2 on unparsable input, 3 when the network breaks a
model assumption, 4 when existence of the exponent is unverified and
``--override-existence`` was not given.
"""

from __future__ import annotations

import argparse
import json
import logging
import math
import sys
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Optional, Sequence

from scipy import stats

from .lyapunov import (
    DependencyViolationError,
    ExistenceUnverifiedError,
    LyapunovEstimate,
    estimate_monte_carlo,
    evaluate_by_decomposition,
    evaluate_closed_form,
    records_to_csv,
)
from .matrix import TropicalMatrix, parse_matrix_text, spectral_radius
from .network import ModelInvalidError, compile_network, load_spec, preset
from .stochastic import DEFAULT_SEED, RandomMatrixProcess, expected_matrix, kingman_check

log = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_PARSE = 2
EXIT_MODEL = 3
EXIT_EXISTENCE = 4

METHODS = ("mc", "closed", "decomp", "all", "spectral_radius")


@dataclass
class RunConfig:
    spec: Optional[str] = None
    preset: Optional[str] = None
    preset_args: dict = field(default_factory=dict)
    matrix: Optional[str] = None
    seed: int = DEFAULT_SEED
    k: int = 10_000
    replications: int = 20
    expectation_samples: int = 100_000
    methods: tuple = ("all",)
    output_format: str = "table"
    out: Optional[str] = None
    override_existence: bool = False
    burn_in: Optional[int] = None
    max_depth: int = 3
    workers: int = 1

    def validate(self) -> None:
        sources = [x for x in (self.spec, self.preset, self.matrix) if x is not None]
        if len(sources) != 1:
            raise ValueError("give exactly one of spec, preset or matrix")
        if self.k < 1:
            raise ValueError("k must be at least 1")
        if self.replications < 2:
            raise ValueError("Monte Carlo needs at least two replications")
        if self.expectation_samples < 2:
            raise ValueError("expectation samples must be at least 2")
        bad = [m for m in self.methods if m not in METHODS]
        if bad:
            raise ValueError(f"unknown method(s) {bad}")
        if self.output_format not in ("table", "csv", "json"):
            raise ValueError(f"unknown format {self.output_format!r}")


def _read_matrix(path: str) -> TropicalMatrix:
    text = Path(path).read_text()
    if text.lstrip().startswith("["):
        rows = json.loads(text)
        return TropicalMatrix.from_rows(rows)
    return parse_matrix_text(text)


def load_process(config: RunConfig) -> RandomMatrixProcess:
    if config.matrix is not None:
        return RandomMatrixProcess.fixed(_read_matrix(config.matrix), config.seed, Path(config.matrix).stem)
    spec = load_spec(config.spec) if config.spec is not None else preset(config.preset, **config.preset_args)
    return compile_network(spec, seed=config.seed).lifted


def _wanted(config: RunConfig) -> list[str]:
    methods = set(config.methods)
    if "all" in methods:
        methods |= {"closed", "decomp", "mc"}
        if config.matrix is not None:
            methods.add("spectral_radius")
    return [m for m in ("spectral_radius", "closed", "decomp", "mc") if m in methods]


def _spectral(process: RandomMatrixProcess, samples: int) -> LyapunovEstimate:
    if process.exprs.is_constant:
        rho = spectral_radius(TropicalMatrix(process.exprs.constant_values())).canonical
        return LyapunovEstimate(rho, 0.0, (rho, rho), "SpectralRadius", seed=process.seed)
    rho = spectral_radius(expected_matrix(process, samples)).canonical
    return LyapunovEstimate(rho, 0.0, (rho, rho), "SpectralRadiusOfMean", seed=process.seed,
                            detail="rho(E A) is a lower bound for a random process")


def _discrepancies(estimates: list[LyapunovEstimate]) -> tuple[list, list]:
    mc = next((e for e in estimates if e.method == "MonteCarlo"), None)
    rows, warnings = [], []
    if mc is None or not math.isfinite(mc.lambda_):
        return rows, warnings
    q99 = float(stats.t.ppf(0.995, mc.replications - 1))
    for e in estimates:
        if e is mc or e.method.startswith("SpectralRadiusOf"):
            continue
        diff = mc.lambda_ - e.lambda_
        rel = abs(diff) / abs(e.lambda_) if e.lambda_ not in (0.0,) and math.isfinite(e.lambda_) else None
        tol = q99 * math.hypot(mc.stderr, e.stderr)
        flagged = abs(diff) > tol
        rows.append({"method": e.method, "abs": abs(diff), "rel": rel, "beyond_99ci": flagged})
        if flagged:
            warnings.append(f"Monte Carlo differs from {e.method} by {abs(diff):.6g}, beyond the 99% interval")
    return rows, warnings


def run(config: RunConfig) -> dict:
    """Evaluate the requested methods; raises on invalid input or unverified existence."""
    config.validate()
    process = load_process(config)
    kingman = kingman_check(process, config.expectation_samples)
    if not kingman.ok and not config.override_existence:
        raise ExistenceUnverifiedError(kingman)
    estimates, notes = [], []
    for method in _wanted(config):
        if method == "spectral_radius":
            estimates.append(_spectral(process, config.expectation_samples))
        elif method == "closed":
            est = evaluate_closed_form(process, config.expectation_samples)
            if est is None:
                notes.append("closed form: matrix is of general type")
            else:
                estimates.append(est)
        elif method == "decomp":
            try:
                est = evaluate_by_decomposition(process, config.max_depth, config.expectation_samples)
            except DependencyViolationError as exc:
                notes.append(f"decomposition: {exc}")
                est = None
            if est is None:
                notes.append("decomposition: no chain ended in a closed form")
            else:
                estimates.append(est)
        else:
            estimates.append(estimate_monte_carlo(
                process, config.k, config.replications, burn_in=config.burn_in,
                override_existence=True, existence_samples=config.expectation_samples,
                workers=config.workers))
    discrepancy, warnings = _discrepancies(estimates)
    for w in warnings:
        log.warning(w)
    return {
        "config": asdict(config),
        "kingman": {"ok": kingman.ok, "e_norm_finite": kingman.e_norm_finite, "e_norm": kingman.e_norm,
                    "e_norm_stderr": kingman.e_norm_stderr, "rho_of_mean": kingman.rho_of_mean.canonical,
                    "notes": list(kingman.notes)},
        "estimates": estimates,
        "discrepancy": discrepancy,
        "warnings": warnings,
        "notes": notes,
    }


def convergence_table(config: RunConfig, ks: Sequence[int]) -> list[dict]:
    """Plain ``||A_k|| / k`` estimates at each ``k`` with the drift from the last row."""
    ks = list(ks)
    if not ks or any(b <= a for a, b in zip(ks, ks[1:])) or ks[0] < 1:
        raise ValueError("ks must be a non-empty ascending list of positive counts")
    config.validate()
    process = load_process(config)
    kingman = kingman_check(process, config.expectation_samples)
    if not kingman.ok and not config.override_existence:
        raise ExistenceUnverifiedError(kingman)
    rows = []
    for k in ks:
        est = estimate_monte_carlo(process, k, config.replications, burn_in=0, override_existence=True,
                                   existence_samples=config.expectation_samples, workers=config.workers)
        rows.append({"k": k, "lambda": est.lambda_, "stderr": est.stderr})
    final = rows[-1]["lambda"]
    for row in rows:
        row["drift"] = row["lambda"] - final
    return rows


# rendering -----------------------------------------------------------------


def _fmt(x) -> str:
    if x is None:
        return "-"
    if isinstance(x, float):
        return f"{x:.6g}"
    return str(x)


def _table(header: Sequence[str], rows: Sequence[Sequence]) -> str:
    cells = [list(header)] + [[_fmt(x) for x in row] for row in rows]
    widths = [max(len(r[i]) for r in cells) for i in range(len(header))]
    return "\n".join("  ".join(c.ljust(w) for c, w in zip(r, widths)).rstrip() for r in cells)


def render_report(report: dict, fmt: str) -> str:
    estimates = report["estimates"]
    if fmt == "csv":
        return records_to_csv(estimates)
    if fmt == "json":
        payload = dict(report)
        payload["estimates"] = [e.to_record() | {"detail": e.detail, "throughput": e.throughput}
                                for e in estimates]
        return json.dumps(payload, indent=2, sort_keys=True, default=str) + "\n"
    rows = [(e.method, e.lambda_, e.stderr, e.ci95[0], e.ci95[1], e.k_used or None, e.replications or None,
             e.detail) for e in estimates]
    out = [_table(("method", "lambda", "stderr", "ci_lo", "ci_hi", "k", "reps", "detail"), rows)]
    kg = report["kingman"]
    out.append(f"existence check: {'ok' if kg['ok'] else 'FAILED'} "
               f"(E||A|| = {_fmt(kg['e_norm'])}, rho(E A) = {_fmt(kg['rho_of_mean'])})")
    for d in report["discrepancy"]:
        out.append(f"MC vs {d['method']}: abs {_fmt(d['abs'])}, rel {_fmt(d['rel'])}")
    out.extend(f"warning: {w}" for w in report["warnings"])
    out.extend(f"note: {n}" for n in report["notes"])
    return "\n".join(out) + "\n"


def render_convergence(rows: list[dict], fmt: str) -> str:
    if fmt == "json":
        return json.dumps(rows, indent=2) + "\n"
    if fmt == "csv":
        lines = ["k,lambda,stderr,drift"]
        lines += [f"{r['k']},{r['lambda']!r},{r['stderr']!r},{r['drift']!r}" for r in rows]
        return "\n".join(lines) + "\n"
    return _table(("k", "lambda", "stderr", "drift"),
                  [(r["k"], r["lambda"], r["stderr"], r["drift"]) for r in rows]) + "\n"


# argument parsing ------------------------------------------------------------


def _int_list(text: str) -> list[int]:
    return [int(x) for x in text.split(",") if x.strip()]


def _str_list(text: str) -> list[str]:
    # split on commas outside parentheses: "exp(1),unif(0,2)"
    out, depth, cur = [], 0, ""
    for ch in text:
        if ch == "," and depth == 0:
            out.append(cur.strip())
            cur = ""
            continue
        depth += ch == "("
        depth -= ch == ")"
        cur += ch
    if cur.strip():
        out.append(cur.strip())
    return out


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="maxplus-lyapunov",
                                description="Lyapunov exponent (mean cycle time) of max-plus queueing models.")
    src = p.add_mutually_exclusive_group(required=True)
    src.add_argument("--spec", metavar="PATH", help="network spec file (JSON)")
    src.add_argument("--preset", metavar="NAME", help="built-in scenario")
    src.add_argument("--matrix", metavar="PATH", help="fixed matrix literal (rows of numbers or JSON)")
    g = p.add_argument_group("preset arguments")
    g.add_argument("--n", type=int, help="number of nodes (tandem presets)")
    g.add_argument("--services", help="comma-separated service laws, e.g. exp(1),exp(2)")
    g.add_argument("--arrival", help="arrival law (round_robin)")
    g.add_argument("--queues", type=int, help="number of queues (round_robin)")
    g.add_argument("--buffers", help="comma-separated buffer capacities, inf allowed")
    g.add_argument("--customers", help="initial customers per node (closed_tandem)")
    p.add_argument("--seed", type=int, default=DEFAULT_SEED)
    p.add_argument("--k", type=int, default=10_000, help="product length")
    p.add_argument("--reps", type=int, default=20, help="Monte Carlo replications")
    p.add_argument("--esamples", type=int, default=100_000, help="samples per Monte Carlo expectation")
    p.add_argument("--method", action="append", choices=METHODS, help="repeatable; default all")
    p.add_argument("--format", choices=("table", "csv", "json"), default="table")
    p.add_argument("--out", metavar="PATH")
    p.add_argument("--override-existence", action="store_true")
    p.add_argument("--burn-in", type=int, help="Monte Carlo burn-in (default k // 10)")
    p.add_argument("--max-depth", type=int, default=3, help="decomposition chain depth")
    p.add_argument("--workers", type=int, default=1)
    p.add_argument("--convergence", type=_int_list, metavar="K1,K2,...",
                   help="print a convergence table instead of the method report")
    p.add_argument("-v", "--verbose", action="store_true")
    return p


def _preset_args(ns: argparse.Namespace) -> dict:
    args = {}
    if ns.n is not None:
        args["n"] = ns.n
    if ns.services is not None:
        laws = _str_list(ns.services)
        args["services"] = laws[0] if len(laws) == 1 else laws
    if ns.arrival is not None:
        args["arrival"] = ns.arrival
    if ns.queues is not None:
        args["l"] = ns.queues
    if ns.buffers is not None:
        args["buffers"] = [math.inf if b.lower() == "inf" else float(b) for b in _str_list(ns.buffers)]
    if ns.customers is not None:
        vals = [int(x) for x in _str_list(ns.customers)]
        args["customers"] = vals[0] if len(vals) == 1 else vals
    return args


def config_from_args(ns: argparse.Namespace) -> RunConfig:
    return RunConfig(
        spec=ns.spec, preset=ns.preset, preset_args=_preset_args(ns) if ns.preset else {}, matrix=ns.matrix,
        seed=ns.seed, k=ns.k, replications=ns.reps, expectation_samples=ns.esamples,
        methods=tuple(ns.method or ("all",)), output_format=ns.format, out=ns.out,
        override_existence=ns.override_existence, burn_in=ns.burn_in, max_depth=ns.max_depth,
        workers=ns.workers)


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    ns = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if ns.verbose else logging.WARNING, format="%(levelname)s: %(message)s")
    try:
        config = config_from_args(ns)
        if ns.convergence:
            text = render_convergence(convergence_table(config, ns.convergence), config.output_format)
        else:
            text = render_report(run(config), config.output_format)
    except ModelInvalidError as exc:
        print(f"error: invalid model: {exc}", file=sys.stderr)
        return EXIT_MODEL
    except ExistenceUnverifiedError as exc:
        print(f"error: {exc} (use --override-existence to estimate anyway)", file=sys.stderr)
        return EXIT_EXISTENCE
    except (ValueError, TypeError, OSError, json.JSONDecodeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_PARSE
    if config.out:
        Path(config.out).write_text(text)
    else:
        sys.stdout.write(text)
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
