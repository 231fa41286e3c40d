"""Command-line front end.

Exit codes
----------
0  success
1  a verification identity or simulation check failed
2  malformed input (CSV, matrix file, dimensions, bad arguments)
3  empty cell in a two-factor layout
4  degenerate factor (fewer than two levels)
5  hypothesis not estimable
6  degenerate hypothesis (zero numerator degrees of freedom)
"""

from __future__ import annotations

import argparse
import csv
import json
import math
import sys
from collections.abc import Sequence
from dataclasses import dataclass
from pathlib import Path
from typing import TextIO

import numpy as np

from . import anova, glm, hypothesis, matlib, montecarlo, mwsm, verification
from .errors import (
    DegenerateFactorError,
    DegenerateHypothesisError,
    EmptyCellError,
    InvalidInputError,
    NotEstimableError,
    SaturatedModelError,
)

EXIT_OK = 0
EXIT_CHECK_FAILED = 1
EXIT_MALFORMED = 2
EXIT_EMPTY_CELL = 3
EXIT_DEGENERATE_FACTOR = 4
EXIT_NOT_ESTIMABLE = 5
EXIT_DEGENERATE_HYPOTHESIS = 6

# unbalanced 3x3 used by `simulate` when no design is given
DEFAULT_COUNTS = ((1, 2, 3), (2, 1, 2), (3, 2, 1))


class InputFormatError(Exception):
    pass


@dataclass
class RunConfig:
    command: str
    input_path: str | None = None
    response_column: str | None = None
    factor_a_column: str | None = None
    factor_b_column: str | None = None
    design_path: str | None = None
    g_path: str | None = None
    y_path: str | None = None
    beta_path: str | None = None
    effect: str = "A"
    delta2: float | None = None
    sigma2: float = 1.0
    seed: int = 0
    replicates: int = 100_000
    workers: int = 1
    alpha: float = 0.05
    output_format: str = "text"
    tolerance: float = 1e-8
    single: bool = False


# ------------------------------------------------------------------ #
# Input readers
# ------------------------------------------------------------------ #


def read_matrix(path: str | Path) -> np.ndarray:
    """Whitespace-delimited numeric grid, one row per line, ``#`` comments."""
    rows: list[list[float]] = []
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise InputFormatError(f"{path}: {exc.strerror}") from exc
    for lineno, line in enumerate(text.splitlines(), start=1):
        stripped = line.strip()
        if not stripped or stripped.startswith("#"):
            continue
        try:
            row = [float(tok) for tok in stripped.split()]
        except ValueError as exc:
            raise InputFormatError(f"{path}: line {lineno}: non-numeric entry") from exc
        if not all(math.isfinite(v) for v in row):
            raise InputFormatError(f"{path}: line {lineno}: non-finite entry")
        if rows and len(row) != len(rows[0]):
            raise InputFormatError(f"{path}: line {lineno}: expected {len(rows[0])} columns, got {len(row)}")
        rows.append(row)
    if not rows:
        raise InputFormatError(f"{path}: no matrix rows")
    return np.array(rows, dtype=np.float64)


def read_vector(path: str | Path) -> np.ndarray:
    m = read_matrix(path)
    if m.shape[0] != 1 and m.shape[1] != 1:
        raise InputFormatError(f"{path}: expected a single row or column, got {m.shape[0]}x{m.shape[1]}")
    return m.ravel()


def read_records(
    path: str | Path,
    factor_a: str,
    factor_b: str,
    response: str | None,
) -> list[tuple[str, str, float]]:
    """Parse the CSV into ``(level_a, level_b, response)`` triples.

    With ``response=None`` the response is reported as 0.0 (design only).
    """
    try:
        handle = open(path, newline="", encoding="utf-8-sig")
    except OSError as exc:
        raise InputFormatError(f"{path}: {exc.strerror}") from exc
    with handle:
        reader = csv.reader(handle)
        try:
            header = next(reader)
        except StopIteration:
            raise InputFormatError(f"{path}: line 1: missing header") from None
        except csv.Error as exc:
            raise InputFormatError(f"{path}: line {reader.line_num}: {exc}") from exc
        names = [h.strip() for h in header]
        wanted = [factor_a, factor_b] + ([response] if response is not None else [])
        missing = [w for w in wanted if w not in names]
        if missing:
            raise InputFormatError(f"{path}: line 1: missing column(s): {', '.join(missing)}")
        ia, ib = names.index(factor_a), names.index(factor_b)
        iy = names.index(response) if response is not None else None
        records = []
        try:
            for row in reader:
                if not row or all(not f.strip() for f in row):
                    continue
                line = reader.line_num
                if len(row) != len(names):
                    raise InputFormatError(f"{path}: line {line}: expected {len(names)} fields, got {len(row)}")
                value = 0.0
                if iy is not None:
                    try:
                        value = float(row[iy])
                    except ValueError:
                        raise InputFormatError(f"{path}: line {line}: response {row[iy]!r} is not numeric") from None
                    if not math.isfinite(value):
                        raise InputFormatError(f"{path}: line {line}: response is not finite")
                if not row[ia].strip() or not row[ib].strip():
                    raise InputFormatError(f"{path}: line {line}: empty factor level")
                records.append((row[ia], row[ib], value))
        except csv.Error as exc:
            raise InputFormatError(f"{path}: line {reader.line_num}: {exc}") from exc
    if not records:
        raise InputFormatError(f"{path}: no data rows")
    return records


# ------------------------------------------------------------------ #
# Formatting
# ------------------------------------------------------------------ #


def _g6(x: float | None) -> str:
    return "" if x is None else f"{x:.6g}"


def format_table_text(table: anova.AnovaTable) -> str:
    """Fixed-width table; the Source column widens to fit the longest label.

    Level lists are printed as JSON string arrays so labels containing
    commas stay unambiguous.
    """
    width = max(12, max(len(r.source) for r in table.rows) + 2)
    header = f"{'Source':<{width}}{'SS':>14}{'df':>6}{'F':>14}{'p':>14}"
    lines = [header, "-" * len(header)]
    for row in table.rows:
        lines.append(f"{row.source:<{width}}{_g6(row.ss):>14}{row.df:>6}{_g6(row.f):>14}{_g6(row.p):>14}".rstrip())
    lines.append("")
    lines.append(f"n = {table.n}, rank = {table.rank}, df_error = {table.df_error}, mse = {_g6(table.mse) or 'NA'}")
    lines.append(f"A levels: {json.dumps(list(table.levels_a), ensure_ascii=False)}")
    lines.append(f"B levels: {json.dumps(list(table.levels_b), ensure_ascii=False)}")
    if table.saturated:
        lines.append("saturated model: no error degrees of freedom; F and p suppressed")
    return "\n".join(lines) + "\n"


def table_to_json(table: anova.AnovaTable) -> dict:
    return {
        "table": [{"source": r.source, "ss": r.ss, "df": r.df, "f": r.f, "p": r.p} for r in table.rows],
        "meta": {
            "n": table.n,
            "rank": table.rank,
            "df_error": table.df_error,
            "mse": table.mse,
            "saturated": table.saturated,
            "levels_a": list(table.levels_a),
            "levels_b": list(table.levels_b),
        },
    }


def _emit_json(obj: dict, out: TextIO) -> None:
    out.write(json.dumps(obj, indent=2) + "\n")


# ------------------------------------------------------------------ #
# Commands
# ------------------------------------------------------------------ #


def cmd_anova2(cfg: RunConfig, out: TextIO, err: TextIO) -> int:
    records = read_records(cfg.input_path, cfg.factor_a_column, cfg.factor_b_column, cfg.response_column)
    layout = anova.build_layout(records)
    table = anova.anova_table(layout, names=(cfg.factor_a_column, cfg.factor_b_column))
    if cfg.output_format == "json":
        _emit_json(table_to_json(table), out)
    else:
        out.write(format_table_text(table))
    return EXIT_OK


def cmd_test(cfg: RunConfig, out: TextIO, err: TextIO) -> int:
    x = read_matrix(cfg.design_path)
    g = read_matrix(cfg.g_path)
    y = read_vector(cfg.y_path)
    if y.shape[0] != x.shape[0]:
        raise InputFormatError(f"y has {y.shape[0]} entries but X has {x.shape[0]} rows")
    if g.shape[0] != x.shape[1]:
        raise InputFormatError(f"G has {g.shape[0]} rows but X has {x.shape[1]} columns")
    model, fit = glm.fit(x, y)
    hyp = hypothesis.build_hypothesis(model, g)
    num = hypothesis.numerator_ss(model, hyp, y)
    f_stat = p_value = None
    if not fit.saturated:
        res = hypothesis.rmfm_ss(model, hyp, y)
        f_stat, p_value = res.f_stat, res.p_value
    eq3 = float(mwsm.ss_eq3(mwsm.default_construction(model, hyp), y))
    delta = matlib.relative_difference(eq3, num.ss)
    report = {
        "estimable": True,
        "ss": num.ss,
        "df": num.df,
        "f": f_stat,
        "p": p_value,
        "df_error": fit.df_error,
        "mse": fit.mse,
        "rank_x": model.rank_x,
        "mwsm_ss": eq3,
        "mwsm_delta": delta,
    }
    if cfg.output_format == "json":
        _emit_json(report, out)
    else:
        out.write("estimable: yes\n")
        out.write(f"SS = {_g6(num.ss)}, df = {num.df}, F = {_g6(f_stat) or 'NA'}, p = {_g6(p_value) or 'NA'}\n")
        out.write(f"rank(X) = {model.rank_x}, df_error = {fit.df_error}, mse = {_g6(fit.mse) or 'NA'}\n")
        out.write(f"MWSM cross-check: SS = {_g6(eq3)}, |delta|/SS = {delta:.3e}\n")
        if fit.saturated:
            out.write("saturated model: no error degrees of freedom; F and p suppressed\n")
    return EXIT_OK


def _simulation_problem(cfg: RunConfig):
    if cfg.design_path or cfg.g_path:
        if not (cfg.design_path and cfg.g_path):
            raise InputFormatError("simulate needs both --design and --g")
        x = read_matrix(cfg.design_path)
        g = read_matrix(cfg.g_path)
        if g.shape[0] != x.shape[1]:
            raise InputFormatError(f"G has {g.shape[0]} rows but X has {x.shape[1]} columns")
        model, _ = glm.fit(x, np.zeros(x.shape[0]))
        return model, hypothesis.build_hypothesis(model, g), "user design"
    if cfg.input_path:
        if not (cfg.factor_a_column and cfg.factor_b_column):
            raise InputFormatError("simulate with --input needs --factor-a and --factor-b")
        layout = anova.build_layout(read_records(cfg.input_path, cfg.factor_a_column, cfg.factor_b_column, None))
        source = f"layout from {cfg.input_path}"
    else:
        counts = np.array(DEFAULT_COUNTS)
        layout = anova.layout_from_counts(counts, np.zeros(int(counts.sum())))
        source = "built-in 3x3 layout, counts " + ";".join(",".join(map(str, r)) for r in DEFAULT_COUNTS)
    if cfg.effect == "AB":
        g = anova.interaction_G(layout)
    else:
        g = anova.main_effect_G(layout, cfg.effect)
    model, _ = glm.fit(layout.K, layout.y)
    return model, hypothesis.build_hypothesis(model, g), f"{source}, effect {cfg.effect}"


def cmd_simulate(cfg: RunConfig, out: TextIO, err: TextIO) -> int:
    if cfg.replicates < 1:
        raise InputFormatError("--replicates must be at least 1")
    if not 0 < cfg.alpha < 1:
        raise InputFormatError("--alpha must lie in (0, 1)")
    if not cfg.sigma2 > 0:
        raise InputFormatError("--sigma2 must be positive")
    model, hyp, source = _simulation_problem(cfg)
    if cfg.beta_path and cfg.delta2 is not None:
        raise InputFormatError("give at most one of --beta and --delta2")
    if cfg.beta_path:
        beta = read_vector(cfg.beta_path)
        if beta.shape[0] != model.k:
            raise InputFormatError(f"beta must have {model.k} entries")
    else:
        beta = montecarlo.plant_beta(model, hyp, cfg.delta2 or 0.0, cfg.sigma2)
    s = montecarlo.simulate(
        model,
        hyp,
        beta,
        sigma2=cfg.sigma2,
        replicates=cfg.replicates,
        seed=cfg.seed,
        alpha=cfg.alpha,
        workers=cfg.workers,
    )

    def verdict(v: bool | None) -> str:
        return "n/a" if v is None else ("pass" if v else "FAIL")

    if cfg.output_format == "json":
        _emit_json(
            {
                "source": source,
                "replicates": s.replicates,
                "seed": s.seed,
                "alpha": s.alpha,
                "sigma2": s.sigma2,
                "df": s.df,
                "df_error": s.df_error,
                "delta2": s.delta2,
                "mean_ss_over_sigma2": s.mean_ss,
                "se": s.se_ss,
                "target": s.target,
                "mean_mse": s.mean_mse,
                "rejection_rate": s.rejection_rate,
                "mean_check": s.mean_check,
                "band_check": s.band_check,
                "passed": s.passed,
            },
            out,
        )
    else:
        lo, hi = montecarlo.calibration_band(s.alpha)
        out.write(f"design: {source}\n")
        out.write(f"replicates = {s.replicates}, seed = {s.seed}, sigma2 = {_g6(s.sigma2)}\n")
        out.write(f"df = {s.df}, df_error = {s.df_error}, delta2 = {_g6(s.delta2)}\n")
        out.write(f"mean(SS/sigma2) = {s.mean_ss:.6f} (SE {s.se_ss:.6f}), target nu + delta2 = {s.target:.6f}\n")
        out.write(f"mean(MSE) = {s.mean_mse:.6f}\n")
        out.write(f"rejection rate at alpha = {s.alpha:g}: {s.rejection_rate:.5f}\n")
        out.write(f"mean within 4 SE of target: {verdict(s.mean_check)}\n")
        out.write(f"rejection rate in [{lo:g}, {hi:g}]: {verdict(s.band_check)}\n")
    return EXIT_OK if s.passed else EXIT_CHECK_FAILED


def _single_instance(out: TextIO) -> None:
    layout = anova.layout_from_counts([[1, 2], [1, 1]], [2.0, 1.0, 3.0, 4.0, 8.0])
    model, full = glm.fit(layout.K, layout.y)
    hyp = hypothesis.build_hypothesis(model, anova.main_effect_G(layout, "A"))
    cons = mwsm.yates_construction(layout)
    stats = anova.cell_stats(layout)
    _, restricted = glm.fit(hyp.XN, layout.y)

    def show(name: str, m: np.ndarray) -> None:
        out.write(f"{name} ({m.shape[0]}x{m.shape[1] if m.ndim == 2 else 1}):\n")
        for row in np.atleast_2d(m if m.ndim == 2 else m[:, None]):
            out.write("  " + " ".join(f"{v:10.6f}" for v in row) + "\n")

    out.write("single instance: 2x2 layout, counts [[1,2],[1,1]], y = (2, 1, 3, 4, 8)\n")
    show("K", layout.K)
    show("G", hyp.G)
    show("N", hyp.N)
    show("H", hyp.H)
    show("P_X - P_XN", hypothesis.rmfm_projector(model, hyp))
    show("A", cons.A)
    show("C", cons.C)
    show("D", cons.D)
    show("M", cons.M)
    show("u", cons.U)
    out.write(f"weights w = {', '.join(f'{w:.6f}' for w in stats.weights_A)}\n")
    out.write(f"Yates Q            = {anova.compute_q(stats):.12f}\n")
    out.write(f"generalized (u)    = {float(mwsm.ss_eq3(cons, layout.y)):.12f}\n")
    out.write(f"generalized (z)    = {float(mwsm.ss_eq3_via_z(cons, layout.y)):.12f}\n")
    out.write(f"Wald form          = {hypothesis.wald_ss(model, hyp, layout.y):.12f}\n")
    out.write(f"SSE(XN) - SSE(X)   = {restricted.sse - full.sse:.12f}\n")


def cmd_verify(cfg: RunConfig, out: TextIO, err: TextIO) -> int:
    if not cfg.tolerance > 0:
        raise InputFormatError("--tolerance must be positive")
    if cfg.single:
        _single_instance(out)
        out.write("\n")
    failed = False
    out.write(f"seed = {cfg.seed}, tolerance = {cfg.tolerance:.3e}\n")
    for res in verification.run_all(cfg.seed, cfg.tolerance):
        status = "ok" if not res.failures else "FAIL"
        out.write(f"{res.name:<14}instances = {res.instances:>4}  max residual = {res.max_residual:.3e}  {status}\n")
        for index, residual in res.failures[:5]:
            out.write(f"  failing instance: seed {cfg.seed}, suite {res.name}, index {index}, residual {residual:.3e}\n")
        if len(res.failures) > 5:
            out.write(f"  ... {len(res.failures) - 5} more failing instances\n")
        failed = failed or bool(res.failures)
    out.write("all identities hold\n" if not failed else "identity check FAILED\n")
    return EXIT_CHECK_FAILED if failed else EXIT_OK


COMMANDS = {
    "anova2": cmd_anova2,
    "test": cmd_test,
    "simulate": cmd_simulate,
    "verify": cmd_verify,
}


# ------------------------------------------------------------------ #
# Argument parsing
# ------------------------------------------------------------------ #


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="yatesglm",
        description="Weighted-squares-of-means and restricted-minus-full SS for linear hypotheses.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def fmt(p: argparse.ArgumentParser) -> None:
        p.add_argument("--format", dest="output_format", choices=("text", "json"), default="text")

    p = sub.add_parser("anova2", help="two-factor ANOVA table from a CSV file")
    p.add_argument("--input", dest="input_path", required=True)
    p.add_argument("--response", dest="response_column", required=True)
    p.add_argument("--factor-a", dest="factor_a_column", required=True)
    p.add_argument("--factor-b", dest="factor_b_column", required=True)
    fmt(p)

    p = sub.add_parser("test", help="test G'beta = 0 for user-supplied X, G and y")
    p.add_argument("--design", dest="design_path", required=True)
    p.add_argument("--g", dest="g_path", required=True)
    p.add_argument("--y", dest="y_path", required=True)
    fmt(p)

    p = sub.add_parser("simulate", help="Monte Carlo calibration of the F-test")
    p.add_argument("--input", dest="input_path")
    p.add_argument("--factor-a", dest="factor_a_column")
    p.add_argument("--factor-b", dest="factor_b_column")
    p.add_argument("--response", dest="response_column", help="ignored; the design alone is used")
    p.add_argument("--effect", choices=("A", "B", "AB"), default="A")
    p.add_argument("--design", dest="design_path")
    p.add_argument("--g", dest="g_path")
    p.add_argument("--beta", dest="beta_path")
    p.add_argument("--delta2", type=float)
    p.add_argument("--sigma2", type=float, default=1.0)
    p.add_argument("--replicates", type=int, default=100_000)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--alpha", type=float, default=0.05)
    p.add_argument("--workers", type=int, default=1)
    fmt(p)

    p = sub.add_parser("verify", help="run the randomized identity suites")
    p.add_argument("--tolerance", type=float, default=1e-8)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--single", action="store_true", help="also print every matrix for one 2x2 instance")
    return parser


def main(argv: Sequence[str] | None = None, out: TextIO | None = None, err: TextIO | None = None) -> int:
    out = sys.stdout if out is None else out
    err = sys.stderr if err is None else err
    parser = build_parser()
    try:
        ns = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code) if exc.code is not None else EXIT_OK
    cfg = RunConfig(**vars(ns))
    try:
        return COMMANDS[cfg.command](cfg, out, err)
    except InputFormatError as exc:
        err.write(f"error: {exc}\n")
        return EXIT_MALFORMED
    except EmptyCellError as exc:
        err.write(f"error: {exc}\n")
        return EXIT_EMPTY_CELL
    except DegenerateFactorError as exc:
        err.write(f"error: {exc}\n")
        return EXIT_DEGENERATE_FACTOR
    except NotEstimableError as exc:
        cols = ", ".join(str(c + 1) for c in exc.columns)
        err.write(f"error: hypothesis not estimable; offending G column(s) (1-based): {cols}\n")
        return EXIT_NOT_ESTIMABLE
    except DegenerateHypothesisError as exc:
        err.write(f"error: {exc}\n")
        return EXIT_DEGENERATE_HYPOTHESIS
    except SaturatedModelError as exc:
        err.write(f"error: {exc}\n")
        return EXIT_MALFORMED
    except InvalidInputError as exc:
        err.write(f"error: {exc}\n")
        return EXIT_MALFORMED


if __name__ == "__main__":
    sys.exit(main())
