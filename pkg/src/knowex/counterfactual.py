"""Rewired-network ensemble for the knowledge-exchange effect.

The exercise asks how much of the estimated elasticity survives when
each inventor's collaborators are replaced by randomly drawn inventors
from the same firms.  Every draw preserves the inventor's collaborator
count within each firm exactly, and the replacement pool excludes the
inventor, their collaborators, and everyone within three collaboration
steps, so a drawn stand-in is never someone whose knowledge already
reaches the inventor through a short path.

Each draw rebuilds the differential-knowledge regressor as the mean
measured gross output of the drawn stand-ins, re-runs the
first-differenced least-squares fit, and records the slope.  The
headline statistic is the ensemble mean slope divided by the baseline
instrumented estimate: near one when output tracks firm membership
rather than the realized network, near zero when it tracks the
realized exchange partners.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ConfigError, DataError
from .graph import CollaborationGraph, hop_frontiers

EXCLUSION_ORDER = 2


@dataclass(frozen=True)
class RewireConstraint:
    """Collaborator counts of one inventor, broken down by firm."""

    inventor: str
    firm_counts: tuple[tuple[str, int], ...]

    @property
    def total(self) -> int:
        return sum(c for _, c in self.firm_counts)


def build_constraints(
    graph: CollaborationGraph, firm_of: dict[str, str], inventors: list[str]
) -> list[RewireConstraint]:
    """Per-firm collaborator counts for each listed inventor."""
    out = []
    for inv in inventors:
        row = graph.index_of(inv)
        counts: dict[str, int] = {}
        for j in graph.neighbors(row):
            nid = graph.node_ids[j]
            firm = firm_of.get(nid)
            if firm is None:
                raise DataError(f"collaborator {nid!r} of {inv!r} has no firm affiliation")
            counts[firm] = counts.get(firm, 0) + 1
        out.append(RewireConstraint(inv, tuple(sorted(counts.items()))))
    return out


def _exclusion_set(graph: CollaborationGraph, inv: str, order: int) -> set[str]:
    shells = hop_frontiers(graph, graph.index_of(inv), order)
    out: set[str] = {inv}
    for shell in shells:
        out.update(graph.node_ids[j] for j in shell)
    return out


def _firm_pools(firm_of: dict[str, str], ybar: dict[str, float]) -> dict[str, list[str]]:
    pools: dict[str, list[str]] = {}
    for inv, firm in firm_of.items():
        if inv in ybar:
            pools.setdefault(firm, []).append(inv)
    for members in pools.values():
        members.sort()
    return pools


def draw_replacements(
    rng: np.random.Generator,
    constraint: RewireConstraint,
    pools: dict[str, list[str]],
    excluded: set[str],
) -> list[str] | None:
    """One rewired collaborator set, or None when a firm pool runs dry."""
    drawn: list[str] = []
    for firm, count in constraint.firm_counts:
        eligible = [m for m in pools.get(firm, ()) if m not in excluded]
        if len(eligible) < count:
            return None
        idx = rng.choice(len(eligible), size=count, replace=False)
        drawn.extend(eligible[j] for j in idx)
    return drawn


@dataclass
class RewireResult:
    betas: np.ndarray
    mean_beta: float
    baseline_beta: float
    ratio: float
    n_draws: int
    kept_inventors: np.ndarray
    dropped_infeasible: int


def _fd_slope(dy: np.ndarray, dx: np.ndarray, dz: np.ndarray | None) -> float:
    cols = [np.ones_like(dx), dx]
    if dz is not None:
        cols.append(dz)
    design = np.column_stack(cols)
    coef, *_ = np.linalg.lstsq(design, dy, rcond=None)
    return float(coef[1])


def run_ensemble(
    graphs: dict[int, CollaborationGraph],
    ybar: dict[int, dict[str, float]],
    firm_of: dict[int, dict[str, str]],
    panel: list[str],
    outcome: np.ndarray,
    baseline_beta: float,
    controls: np.ndarray | None = None,
    n_draws: int = 200,
    seed: int = 0,
    redraw_per_period: bool = True,
    exclusion_order: int = EXCLUSION_ORDER,
) -> RewireResult:
    """Ensemble of rewired fits over a balanced two-period panel.

    ``outcome`` is (n_panel, 2) log output for the two estimation
    periods in column order; ``controls``, if given, is
    (n_panel, 2, n_controls) and enters the first-differenced fit.
    With ``redraw_per_period`` false the period-1 draw is reused in
    period 2 (stand-ins keep their own period-2 output), which holds
    the counterfactual network fixed over time.
    """
    periods = sorted(graphs)
    if len(periods) != 2:
        raise ConfigError("rewiring expects exactly two estimation periods")
    if outcome.shape != (len(panel), 2):
        raise ConfigError("outcome must be (n_panel, 2)")
    if abs(baseline_beta) < 1e-12:
        raise ConfigError("baseline elasticity is zero; ratio undefined")

    constraints = {t: build_constraints(graphs[t], firm_of[t], panel) for t in periods}
    pools = {t: _firm_pools(firm_of[t], ybar[t]) for t in periods}
    exclusions = {
        t: {inv: _exclusion_set(graphs[t], inv, exclusion_order) for inv in panel}
        for t in periods
    }

    betas = np.empty(n_draws)
    kept = np.empty(n_draws, dtype=np.int64)
    dropped_total = 0
    children = np.random.SeedSequence(seed).spawn(n_draws)
    for d in range(n_draws):
        rng = np.random.default_rng(children[d])
        if redraw_per_period:
            draws_by_period = {
                t: [
                    draw_replacements(rng, constraints[t][k], pools[t], exclusions[t][panel[k]])
                    for k in range(len(panel))
                ]
                for t in periods
            }
        else:
            t0 = periods[0]
            first = [
                draw_replacements(rng, constraints[t0][k], pools[t0], exclusions[t0][panel[k]])
                for k in range(len(panel))
            ]
            draws_by_period = {t: first for t in periods}
        ln_kt = np.full((len(panel), 2), np.nan)
        for col, t in enumerate(periods):
            values = ybar[t]
            for k, drawn in enumerate(draws_by_period[t]):
                if drawn is None:
                    continue
                vals = [values[m] for m in drawn if m in values]
                if len(vals) != len(drawn):
                    continue
                mean = float(np.mean(vals))
                if mean > 0:
                    ln_kt[k, col] = np.log(mean)
        ok = np.isfinite(ln_kt).all(axis=1)
        dropped_total += int((~ok).sum())
        if ok.sum() < 5:
            raise DataError("rewiring infeasible for nearly all inventors; check firm pools")
        dy = outcome[ok, 1] - outcome[ok, 0]
        dx = ln_kt[ok, 1] - ln_kt[ok, 0]
        dz = None
        if controls is not None:
            dz = controls[ok, 1, :] - controls[ok, 0, :]
        betas[d] = _fd_slope(dy, dx, dz)
        kept[d] = int(ok.sum())

    mean_beta = float(betas.mean())
    return RewireResult(
        betas=betas,
        mean_beta=mean_beta,
        baseline_beta=float(baseline_beta),
        ratio=mean_beta / float(baseline_beta),
        n_draws=n_draws,
        kept_inventors=kept,
        dropped_infeasible=dropped_total,
    )
