"""Self-check suite on a small built-in three-level scenario."""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from .errors import MonotonicityError
from .liouville import hs_norm
from .models import HF_ENERGIES, MorseModel, build_dipole, build_h0, ground_state, thermal_state
from .optimizer import (
    ControlField,
    OptimizerConfig,
    check_deltaW_identity,
    identity_contract,
    run,
    uniform_bound,
)
from .propagator import TimeGrid, build_tables
from .purestate import PureState, compare_pure_mixed, compare_W_components, pure_penalty

BUILTIN_STEPS = 512
BUILTIN_SPAN = 60.0


@dataclass(frozen=True)
class Check:
    name: str
    ok: bool
    detail: str

    def line(self) -> str:
        return f"[{'PASS' if self.ok else 'FAIL'}] {self.name}: {self.detail}"


def _monotone_runs(cfg, scenarios, H0, tables, grid):
    results, detail = {}, []
    for label, rho0 in scenarios.items():
        try:
            results[label] = run(cfg, rho0, H0, tables, grid)
            detail.append(f"{label} ok ({len(results[label].records) - 1} iterations)")
        except MonotonicityError as exc:
            detail.append(f"{label} failed at iteration {exc.iteration} (deltaW={exc.delta:.2e})")
    return results, "; ".join(detail)


def run_validation(max_iters: int = 60) -> list[Check]:
    """Run every contract check; the list contains one entry per check.

    The production (``exact``) field rule is checked against all contracts.
    The first-order ``midpoint`` rule only satisfies the objective-increment
    identity approximately, so it is checked for monotonicity alone.
    """
    model = MorseModel(np.array(HF_ENERGIES[:3]))
    H0, V = build_h0(model), build_dipole(model)
    tables = build_tables(H0, V)
    grid = TimeGrid(0.0, BUILTIN_SPAN, BUILTIN_STEPS)
    cfg = OptimizerConfig(lam=4.0, max_iters=max_iters, tol_deltaW=1e-12, seed=7,
                          seed_amplitude=1e-2, scheme="exact")
    psi0 = PureState.basis(model.dim)
    checks = []

    zero = ControlField(grid, np.zeros(grid.steps), cfg.lam)
    d0 = compare_pure_mixed(psi0, zero, tables)
    checks.append(Check("pure_mixed_zero_field", d0 <= 1e-12, f"max distance {d0:.2e} (<= 1e-12)"))

    scenarios = {
        "ground": ground_state(model.dim),
        "thermal": thermal_state(model.energies, float(model.energies[-1] - model.energies[0])),
    }
    _, detail = _monotone_runs(replace(cfg, scheme="midpoint"), scenarios, H0, tables, grid)
    checks.append(Check("monotonicity_midpoint", "failed" not in detail, detail))
    results, detail = _monotone_runs(cfg, scenarios, H0, tables, grid)
    checks.append(Check("monotonicity", len(results) == len(scenarios), detail))
    if len(results) != len(scenarios):
        return checks

    bound = uniform_bound(H0, grid, cfg.lam, tables)
    id_ok, id_worst, ub_ok, w2_worst, w2_ok = True, 0.0, True, 0.0, True
    for label, res in results.items():
        resid = check_deltaW_identity(res.records, res.history, cfg.lam, grid.dt)
        id_ok &= bool(np.all(identity_contract(res.records, resid)))
        id_worst = max(id_worst, float(resid.max()))
        ub_ok &= all(r.W <= bound for r in res.records)
        sc = hs_norm(H0) * hs_norm(scenarios[label])
        w2 = max(r.W2_residual for r in res.records)
        w2_worst = max(w2_worst, w2)
        w2_ok &= w2 <= 1e-8 * sc
    checks.append(Check("deltaW_identity", id_ok, f"max residual {id_worst:.2e}"))
    checks.append(Check("uniform_bound", ub_ok, f"W <= {bound:.4g} at every iteration"))
    checks.append(Check("W2_residual", w2_ok, f"max {w2_worst:.2e}"))

    res = results["ground"]
    d = compare_pure_mixed(psi0, res.field, tables)
    checks.append(Check("pure_mixed_optimized", d <= 1e-9, f"max distance {d:.2e} (<= 1e-9)"))
    sc = hs_norm(H0)
    dw1, dw2 = compare_W_components(psi0, H0, res.field, tables, res.A_traj)
    checks.append(Check("W_components", dw1 <= 1e-8 * sc and dw2 <= 1e-8 * sc,
                        f"dW1={dw1:.2e} dW2={dw2:.2e} (<= {1e-8 * sc:.2e})"))
    pen = pure_penalty(res.field)
    checks.append(Check("fluence_correspondence", pen == res.field.fluence,
                        f"alpha0 penalty {pen:.12g} vs W3 {res.field.fluence:.12g}"))
    return checks
