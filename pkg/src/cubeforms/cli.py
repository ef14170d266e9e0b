"""Command-line driver.

    cubeforms tables dim --n 2 --r 1
    cubeforms verify {algebra,unisolvency,conditions,locality} [flags]
    cubeforms solve --n 2 --k 2 --r 1 --cells 8 --mode lumped --case sinsin
    cubeforms convergence --n 2 --k 2 --r 2 --mode standard --out results/

Every subcommand accepts ``--config file.json``; keys in the file override
command-line flags. Reports are JSON with sorted keys (stdout, or
``report.json`` under ``--out``); numeric tables are also written as CSV.
Exit status: 0 success, 1 a check failed, 2 invalid usage or configuration.
"""

from __future__ import annotations

import argparse
import json
import math
import sys
from pathlib import Path
from typing import Any, Literal, Optional, Sequence, Union

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, ValidationError, model_validator

from . import verify as V
from .assembly import CoefficientField
from .combinatorics import DomainError
from .mesh import StructuredCubicalMesh, build_mesh, unit_grid
from .refelem import dof_count_by_dim, moment_dofs
from .solver import (CASES, BoundaryGateError, SolverError, convergence_study, default_levels,
                     manufactured_case, solve_harmonic_load, solve_hodge)
from .spaces import basis_tildeQ, expected_dim

SUITES = ("algebra", "unisolvency", "conditions", "locality")
COMMANDS = ("tables", "verify", "solve", "convergence")


class UsageError(Exception):
    pass


class RunConfig(BaseModel):
    model_config = ConfigDict(extra="forbid")

    command: Literal["tables", "verify", "solve", "convergence"]
    target: Optional[str] = None
    n: Optional[int] = Field(None, ge=1, le=5)
    k: Optional[int] = Field(None, ge=0, le=5)
    r: Optional[int] = Field(None, ge=1, le=8)
    cells: Optional[Union[int, list[int]]] = None
    mesh: Optional[dict[str, Any]] = None
    mask_file: Optional[str] = None
    mode: Literal["standard", "lumped"] = "lumped"
    coeff: Optional[Union[float, list]] = None
    case: str = "sinsin"
    levels: Optional[list[int]] = None
    out: Optional[str] = None
    seed: int = 0

    @model_validator(mode="after")
    def _consistent(self):
        if self.command == "tables" and self.target != "dim":
            raise ValueError("tables supports only 'dim'")
        if self.command == "verify" and self.target not in SUITES:
            raise ValueError(f"verify needs one of {SUITES}")
        if self.n is not None and self.k is not None and self.k > self.n:
            raise ValueError("k must not exceed n")
        if self.case not in CASES + ("harmonic",):
            raise ValueError(f"unknown case {self.case!r}")
        cells = [self.cells] if isinstance(self.cells, int) else (self.cells or [])
        if any(c < 1 for c in cells) or any(c < 1 for c in self.levels or []):
            raise ValueError("cell counts must be positive")
        return self


# --- argument handling ----------------------------------------------------


def _parse_coeff(text: str):
    if text in ("identity", "none"):
        return None
    try:
        return json.loads(text)
    except json.JSONDecodeError as exc:
        raise argparse.ArgumentTypeError(f"--coeff must be a number or JSON array: {exc}") from exc


def _parse_cells(text: str):
    parts = [int(p) for p in text.replace("x", ",").split(",") if p]
    return parts[0] if len(parts) == 1 else parts


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--n", type=int)
    common.add_argument("--k", type=int)
    common.add_argument("--r", type=int)
    common.add_argument("--cells", type=_parse_cells, help="cells per axis, e.g. 4 or 4,2")
    common.add_argument("--mask-file", help="JSON mesh document or bare mask array")
    common.add_argument("--mode", choices=("standard", "lumped"))
    common.add_argument("--coeff", type=_parse_coeff, help="'identity', a scalar, or a JSON matrix")
    common.add_argument("--case")
    common.add_argument("--levels", type=lambda s: [int(p) for p in s.split(",") if p])
    common.add_argument("--out", help="directory for report.json and CSV tables")
    common.add_argument("--seed", type=int)
    common.add_argument("--config", help="JSON file whose keys override the flags")

    p = argparse.ArgumentParser(prog="cubeforms", description=__doc__.split("\n")[0])
    sub = p.add_subparsers(dest="command", required=True)
    t = sub.add_parser("tables", parents=[common], help="dimension tables")
    t.add_argument("target", choices=("dim",))
    v = sub.add_parser("verify", parents=[common], help="verification suites")
    v.add_argument("target", choices=SUITES)
    sub.add_parser("solve", parents=[common], help="one mixed Hodge-Laplace solve")
    sub.add_parser("convergence", parents=[common], help="convergence study on refined grids")
    return p


def make_config(argv: Sequence[str] | None) -> RunConfig:
    ns = build_parser().parse_args(argv)
    raw = {key: val for key, val in vars(ns).items() if val is not None and key != "config"}
    if ns.config:
        try:
            doc = json.loads(Path(ns.config).read_text())
        except (OSError, json.JSONDecodeError) as exc:
            raise UsageError(f"cannot read config {ns.config}: {exc}") from exc
        if not isinstance(doc, dict):
            raise UsageError("config file must hold a JSON object")
        raw.update({key.replace("-", "_"): val for key, val in doc.items()})
    try:
        return RunConfig(**raw)
    except ValidationError as exc:
        raise UsageError(str(exc)) from exc


def mesh_from_config(cfg: RunConfig, n: int, default_cells: int) -> StructuredCubicalMesh:
    if cfg.mesh is not None:
        mesh = build_mesh(cfg.mesh)
    elif cfg.mask_file:
        try:
            doc = json.loads(Path(cfg.mask_file).read_text())
        except (OSError, json.JSONDecodeError) as exc:
            raise UsageError(f"cannot read mask file {cfg.mask_file}: {exc}") from exc
        if isinstance(doc, dict):
            mesh = build_mesh(doc)
        else:
            mask = np.asarray(doc, dtype=bool)
            mesh = unit_grid(mask.ndim, list(mask.shape), mask)
    else:
        mesh = unit_grid(n, cfg.cells if cfg.cells is not None else default_cells)
    if mesh.n != n:
        raise UsageError(f"mesh dimension {mesh.n} differs from n={n}")
    return mesh


# --- reports ----------------------------------------------------------------


def _clean(obj):
    """JSON-safe copy: numpy scalars to Python, NaN/inf to None, tuples to lists."""
    if isinstance(obj, dict):
        return {str(k): _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _clean(obj.tolist())
    if isinstance(obj, (np.bool_, bool)):
        return bool(obj)
    if isinstance(obj, (np.integer, int)):
        return int(obj)
    if isinstance(obj, (np.floating, float)):
        v = float(obj)
        return v if math.isfinite(v) else None
    if obj is None or isinstance(obj, str):
        return obj
    return str(obj)


def dumps(report: dict) -> str:
    return json.dumps(_clean(report), sort_keys=True, indent=2) + "\n"


def _csv(header: Sequence[str], rows: Sequence[Sequence]) -> str:
    lines = [",".join(header)]
    lines += [",".join("" if v is None else str(v) for v in row) for row in rows]
    return "\n".join(lines) + "\n"


# --- commands ---------------------------------------------------------------


DIM_COLUMNS = ("n", "k", "r", "dim_Q", "dim_Qminus", "dim_B", "dim_Qtilde", "rank_Qtilde", "formula", "dofs_by_entity_dim")


def cmd_tables(cfg: RunConfig) -> tuple[dict, dict[str, str]]:
    ns = [cfg.n] if cfg.n else [1, 2, 3]
    rs = [cfg.r] if cfg.r else [1, 2, 3]
    rows = []
    for n in ns:
        for r in rs:
            for k in ([cfg.k] if cfg.k is not None else range(n + 1)):
                formula = math.comb(n, k) * (r + 1) ** n
                rank = basis_tildeQ(n, k, r).dim
                by_dim = dof_count_by_dim(moment_dofs(n, k, r, "Qtilde"))
                rows.append({"n": n, "k": k, "r": r, "dim_Q": expected_dim("Q", n, k, r),
                             "dim_Qminus": expected_dim("Qminus", n, k, r), "dim_B": expected_dim("B", n, k, r),
                             "dim_Qtilde": formula, "rank_Qtilde": rank, "formula": rank == formula,
                             "dofs_by_entity_dim": " ".join(f"{l}:{c}" for l, c in sorted(by_dim.items()))})
    report = {"command": "tables dim", "passed": all(r["formula"] for r in rows), "rows": rows}
    return report, {"dim.csv": _csv(DIM_COLUMNS, [[row[c] for c in DIM_COLUMNS] for row in rows])}


def cmd_verify(cfg: RunConfig) -> tuple[dict, dict[str, str]]:
    suite = cfg.target
    if suite == "algebra":
        checks = V.algebra_suite(cfg.seed)
    elif suite == "unisolvency":
        checks = V.unisolvency_suite(cfg.n, cfg.k, cfg.r)
    elif suite == "conditions":
        n = cfg.n or 2
        checks = V.conditions_suite(n, cfg.k if cfg.k is not None else 1, cfg.r or 2, cfg.seed,
                                    tuple(cfg.levels or (2, 4, 8)))
    else:
        n, k = cfg.n or 2, cfg.k if cfg.k is not None else 2
        cells = cfg.cells if isinstance(cfg.cells, int) else 4
        checks = []
        for r in ([cfg.r] if cfg.r else [1, 2]):
            checks += V.locality_suite(n, k, r, cells)
    report = {"command": f"verify {suite}", "seed": cfg.seed, **V.summarize(checks)}
    rows = [[c["name"], "pass" if c["passed"] else "FAIL"] for c in checks]
    return report, {f"{suite}.csv": _csv(("check", "result"), rows)}


def _coefficient(cfg: RunConfig, mesh, k: int):
    return None if cfg.coeff is None else CoefficientField.make(mesh, k - 1, cfg.coeff)


def cmd_solve(cfg: RunConfig) -> tuple[dict, dict[str, str]]:
    n = cfg.n or 2
    k = cfg.k if cfg.k is not None else n
    r = cfg.r or 1
    mesh = mesh_from_config(cfg, n, 4)
    base = {"command": "solve", "n": n, "k": k, "r": r, "mode": cfg.mode, "case": cfg.case,
            "mesh": mesh.to_json(), "betti": list(mesh.betti)}
    if cfg.case == "harmonic":
        sol, q = solve_harmonic_load(mesh, k, r, cfg.mode)
        dev = {"max_abs_sigma": float(np.abs(sol.sigma).max(initial=0.0)),
               "max_abs_u": float(np.abs(sol.u).max(initial=0.0)),
               "max_abs_p_minus_q": float(np.abs(sol.p - q).max(initial=0.0))}
        passed = max(dev.values()) <= 1e-9
        return {**base, **dev, "passed": passed, "residual": sol.residual, "dofs": sol.dofs}, {}
    case = manufactured_case(cfg.case, n, k)
    K = _coefficient(cfg, mesh, k)
    sol = solve_hodge(mesh, k, r, case, cfg.mode, K)
    report = {**base, "dofs": sol.dofs, "residual": sol.residual,
              "first_row_residual": sol.first_row_residual, "harmonic_constraint": sol.harmonic_constraint,
              "harmonic_dim": int(sol.p_coords.size), "errors": sol.errors,
              "max_abs_sigma": float(np.abs(sol.sigma).max(initial=0.0)),
              "max_abs_u": float(np.abs(sol.u).max(initial=0.0))}
    report["passed"] = sol.residual <= 1e-9 and sol.first_row_residual <= 1e-9
    if cfg.case == "zero":
        report["passed"] &= report["max_abs_sigma"] == 0.0 and report["max_abs_u"] == 0.0
    return report, {}


def cmd_convergence(cfg: RunConfig) -> tuple[dict, dict[str, str]]:
    n = cfg.n or 2
    k = cfg.k if cfg.k is not None else n
    r = cfg.r or 1
    levels = tuple(cfg.levels or default_levels(n))
    K = None if cfg.coeff is None else cfg.coeff
    table = convergence_study(n, k, r, cfg.case, cfg.mode, levels, K, compare_modes=cfg.case != "zero")
    target = r - 0.15
    if cfg.case == "zero":
        passed = all(row[f"err_{c}"] == 0 for row in table.rows for c in ("sigma", "u"))
    else:
        passed = (table.rates["sigma"] >= target and table.rates["u"] >= target
                  and table.mode_gap_rate >= target)
    report = {"command": "convergence", "n": n, "k": k, "r": r, "mode": cfg.mode, "case": cfg.case,
              "levels": list(levels), "rows": table.rows, "rates": table.rates, "mode_gap": table.mode_gap,
              "mode_gap_rate": table.mode_gap_rate, "rate_target": target, "passed": passed}
    return report, {f"convergence_{cfg.case}_n{n}k{k}r{r}_{cfg.mode}.csv": table.to_csv()}


HANDLERS = {"tables": cmd_tables, "verify": cmd_verify, "solve": cmd_solve, "convergence": cmd_convergence}


def run(argv: Sequence[str] | None = None, stdout=None) -> int:
    stdout = stdout or sys.stdout
    try:
        cfg = make_config(argv)
    except UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return 2
    except SystemExit as exc:  # argparse
        return int(exc.code or 0)
    try:
        report, tables = HANDLERS[cfg.command](cfg)
    except BoundaryGateError as exc:
        report, tables = {"command": cfg.command, "passed": False, "error": str(exc)}, {}
    except SolverError as exc:
        report, tables = {"command": cfg.command, "passed": False, "error": str(exc)}, {}
    except (UsageError, DomainError, ValueError) as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return 2
    text = dumps(report)
    if cfg.out:
        out = Path(cfg.out)
        out.mkdir(parents=True, exist_ok=True)
        (out / "report.json").write_text(text)
        for name, body in tables.items():
            (out / name).write_text(body)
        print(f"{'PASS' if report.get('passed') else 'FAIL'}: wrote {out / 'report.json'}", file=stdout)
    else:
        stdout.write(text)
    return 0 if report.get("passed") else 1


def main() -> None:
    sys.exit(run())


if __name__ == "__main__":
    main()
