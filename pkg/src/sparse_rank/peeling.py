"""2-core of a Tanner graph by peeling variables of degree at most one."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import _backend
from .sampler import TannerGraph


@dataclass(frozen=True)
class CoreResult:
    n_vars: int
    n_checks: int
    core_vars: int
    core_checks: int
    rounds: int
    peel_order: list  # (variable, check or None) in removal order
    var_alive: np.ndarray
    check_alive: np.ndarray

    @property
    def var_fraction(self) -> float:
        return self.core_vars / self.n_vars if self.n_vars else 0.0

    @property
    def check_fraction(self) -> float:
        return self.core_checks / self.n_vars if self.n_vars else 0.0


def two_core(g: TannerGraph, kernels=None) -> CoreResult:
    """Remove variables of degree <= 1 together with their check until none remain.

    Checks that end up with no variables stay in the core, as do checks that
    had degree zero from the start.
    """
    k = kernels or _backend.kernels
    col_ptr, col_rows = g.csc()
    row_ptr, row_cols = g.csr()
    check_alive, var_alive, order_vars, order_checks, rounds = k.peel(
        g.n_checks, g.n_vars, col_ptr, col_rows, row_ptr, row_cols
    )
    order = [(v, c if c >= 0 else None) for v, c in zip(order_vars.tolist(), order_checks.tolist())]
    return CoreResult(
        n_vars=g.n_vars,
        n_checks=g.n_checks,
        core_vars=int(var_alive.sum()),
        core_checks=int(check_alive.sum()),
        rounds=int(rounds),
        peel_order=order,
        var_alive=var_alive,
        check_alive=check_alive,
    )


def core_nullity_bound(g: TannerGraph, m: int | None = None, core: CoreResult | None = None) -> float:
    """Lower bound ``(n - n* - (m - m*)) / n`` on the nullity fraction.

    Each peeled variable either had no check or took one check with it, so
    outside the core there are at least ``(n - n*) - (m - m*)`` free coordinates.
    """
    core = core or two_core(g)
    m = g.n_checks if m is None else m
    n = g.n_vars
    return (n - core.core_vars - (m - core.core_checks)) / n


def residual_min_degree(g: TannerGraph, core: CoreResult) -> int:
    """Smallest variable degree inside the core (counting only live checks); 0 if empty."""
    if core.core_vars == 0:
        return 0
    live = core.check_alive[g.checks] & core.var_alive[g.vars]
    deg = np.bincount(g.vars[live], minlength=g.n_vars)
    return int(deg[core.var_alive].min())
