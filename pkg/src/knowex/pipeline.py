"""End-to-end runs: corpus in, estimates and reports out.

The pipeline stages are fixed: read and validate the corpus, attach a
patent value metric, build one collaboration graph and measure table
per estimation period, accumulate research scopes into knowledge
breadth, select the balanced panel (counting every exclusion against
the first rule it trips), attach urban-area cluster labels and any
geographic covariates, first-difference the two periods, and estimate
the knowledge-exchange elasticity by OLS and by 2SLS on far-shell
instruments.  Reports land in ``out_dir`` as TSV tables plus a
manifest that hashes the configuration and every output.

Sample-selection rules, applied in order per inventor seen in both
period graphs: membership row present, at least one collaborator,
positive output, positive differential knowledge, positive prior
breadth, and a finite instrument for every requested shell order.
"""

from __future__ import annotations

from dataclasses import dataclass, field, fields
from pathlib import Path

import numpy as np

from .counterfactual import run_ensemble
from .dataio import (
    Corpus,
    config_hash,
    fmt_float,
    kv_get,
    read_citations,
    read_geo_tables,
    read_membership,
    read_patents,
    reject_unknown_keys,
    write_manifest,
    write_table,
)
from .errors import ConfigError, DataError
from .estimator import DecompositionResult, FitResult, decompose_fit, ols_fit, tsls_fit
from .geo import RURAL, assign_urban_area, delineate_urban_areas, local_activity, local_inventors, local_rnd
from .graph import CollaborationGraph, shell_overlap_profile, shell_value_means
from .measures import (
    MeasureTable,
    ScopeTable,
    build_vocab,
    cumulative_breadth,
    novelty_values,
    period_measures,
    quality_values,
    scope_table,
)

_EXCLUSION_RULES = (
    "no_membership",
    "no_collaborators",
    "nonpositive_output",
    "nonpositive_exchange",
    "no_prior_breadth",
    "missing_instrument",
)


@dataclass
class PipelineConfig:
    patents: str = ""
    inventors: str = ""
    citations: str = ""
    cells: str = ""
    establishments: str = ""
    rnd: str = ""
    out_dir: str = "out"
    period_breaks: tuple[int, ...] = (2000, 2005, 2010, 2020)
    metric: str = "given"
    citation_window_years: float = 5.0
    category_level: str = "subgroup"
    instrument_orders: tuple[int, ...] = (3, 4, 5)
    profile_max_order: int = 5
    include_focal_overlap: bool = False
    cluster_level: str = "ua"
    first_stage_vce: str = "cluster"
    small_sample: bool = True
    geo_covariates: bool = False
    inventor_radius_km: float = 1.0
    rnd_radius_km: float = 10.0
    pop_radius_km: float = 20.0
    ua_buffer_km: float = 10.0
    counterfactual: bool = False
    counterfactual_draws: int = 200
    counterfactual_seed: int = 0
    counterfactual_redraw: bool = True
    seed: int = 0

    def __post_init__(self) -> None:
        if self.metric not in ("given", "novelty", "citations"):
            raise ConfigError(f"unknown metric {self.metric!r}")
        if self.cluster_level not in ("ua", "firm"):
            raise ConfigError(f"unknown cluster_level {self.cluster_level!r}")
        if self.first_stage_vce not in ("cluster", "robust", "classical"):
            raise ConfigError(f"unknown first_stage_vce {self.first_stage_vce!r}")
        if len(self.period_breaks) < 3 or list(self.period_breaks) != sorted(set(self.period_breaks)):
            raise ConfigError("period_breaks must be at least three increasing years")
        if not self.instrument_orders or min(self.instrument_orders) < 1:
            raise ConfigError("instrument_orders must be shell orders >= 1")

    @classmethod
    def from_mapping(cls, mapping: dict[str, str]) -> "PipelineConfig":
        known = {f.name for f in fields(cls)}
        reject_unknown_keys(mapping, known)
        kwargs = {}
        casts = {"int": int, "float": float, "bool": bool, "str": str}
        for f in fields(cls):
            if f.name not in mapping:
                continue
            if f.name in ("period_breaks", "instrument_orders"):
                raw = mapping[f.name]
                try:
                    kwargs[f.name] = tuple(int(part) for part in raw.split(",") if part.strip())
                except ValueError:
                    raise ConfigError(f"config key {f.name!r}: cannot parse {raw!r}") from None
            else:
                kwargs[f.name] = kv_get(mapping, f.name, casts.get(str(f.type), str), None)
        return cls(**kwargs)

    def to_mapping(self) -> dict[str, str]:
        out = {}
        for f in fields(self):
            v = getattr(self, f.name)
            if isinstance(v, tuple):
                out[f.name] = ",".join(str(p) for p in v)
            elif isinstance(v, float):
                out[f.name] = fmt_float(v)
            else:
                out[f.name] = str(v)
        return out


def load_corpus(config: PipelineConfig) -> Corpus:
    if not config.patents or not config.inventors:
        raise ConfigError("patents and inventors input paths are required")
    breaks = list(config.period_breaks)

    def period_of(date):
        if date.year < breaks[0]:
            return 0
        for k in range(len(breaks) - 1):
            if breaks[k] <= date.year < breaks[k + 1]:
                return k + 1
        raise DataError(f"date {date.isoformat()} falls outside the configured periods")

    patents = read_patents(config.patents, period_of, require_value=(config.metric == "given"))
    membership = read_membership(config.inventors)
    citations = read_citations(config.citations) if config.citations else []
    geo = read_geo_tables(
        config.cells or None, config.establishments or None, config.rnd or None
    )
    corpus = Corpus(
        period_breaks=breaks,
        patents=patents,
        membership=membership,
        citations=citations,
        geo=geo,
    )
    corpus.validate()
    return corpus


def corpus_values(corpus: Corpus, config: PipelineConfig) -> dict[str, float]:
    """Patent value map under the configured metric, corpus-wide."""
    if config.metric == "given":
        out = {}
        for p in corpus.patents:
            if p.value is None:
                raise DataError(f"patent {p.patent_id!r} has no value under metric=given")
            out[p.patent_id] = p.value
        return out
    if config.metric == "novelty":
        return novelty_values([(p.patent_id, p.subgroup, p.app_date) for p in corpus.patents])
    values, _ = quality_values(
        [(p.patent_id, p.team, p.app_date) for p in corpus.patents],
        corpus.citations,
        corpus.inventor_firms(),
        window_years=config.citation_window_years,
    )
    return values


@dataclass
class PeriodData:
    period: int
    graph: CollaborationGraph
    measures: MeasureTable
    scopes: ScopeTable


def period_data(
    corpus: Corpus, period: int, values: dict[str, float], vocab: dict[str, int], level: str
) -> PeriodData:
    ids, teams, subs, _, _ = corpus.slice(period)
    if not ids:
        raise DataError(f"no patents in estimation period {period}")
    graph = CollaborationGraph.from_teams(dict(zip(ids, teams)))
    measures = period_measures(ids, teams, values, graph, period)
    scopes = scope_table(ids, teams, subs, vocab, graph.node_ids, level=level, period=period)
    return PeriodData(period=period, graph=graph, measures=measures, scopes=scopes)


@dataclass
class Panel:
    """Balanced two-period estimation sample in column form."""

    inventors: list[str]
    clusters: list[str]
    firms: list[str]
    periods: tuple[int, int]
    ln_y: np.ndarray
    ln_y_count: np.ndarray
    ln_y_quality: np.ndarray
    ln_kd: np.ndarray
    ln_breadth: np.ndarray
    ln_collab: np.ndarray
    instruments: np.ndarray  # (n, 2, m) shell means, ln scale
    instrument_orders: tuple[int, ...]
    geo_controls: dict[str, np.ndarray] = field(default_factory=dict)
    exclusions: dict[str, int] = field(default_factory=dict)

    @property
    def n(self) -> int:
        return len(self.inventors)

    def diff(self, arr: np.ndarray) -> np.ndarray:
        return arr[..., 1] - arr[..., 0] if arr.ndim == 2 else arr[:, 1, :] - arr[:, 0, :]


def _geo_columns(
    corpus: Corpus, data: dict[int, PeriodData], config: PipelineConfig
) -> dict[str, dict[int, dict[str, float]]]:
    """Per-period location aggregates for every inventor with a membership row."""
    out: dict[str, dict[int, dict[str, float]]] = {
        "local_inventors": {},
        "local_rnd": {},
        "local_employment": {},
    }
    geo = corpus.geo
    for t, pdata in data.items():
        ids = [inv for inv in pdata.graph.node_ids if (inv, t) in corpus.membership]
        lat = np.array([corpus.membership[(inv, t)].lat for inv in ids])
        lon = np.array([corpus.membership[(inv, t)].lon for inv in ids])
        row_of = {inv: k for k, inv in enumerate(ids)}
        neighbor_lists = []
        for inv in ids:
            i = pdata.graph.index_of(inv)
            neigh = [
                row_of[pdata.graph.node_ids[int(j)]]
                for j in pdata.graph.neighbors(i)
                if pdata.graph.node_ids[int(j)] in row_of
            ]
            neighbor_lists.append(np.array(neigh, dtype=np.int64))
        inv_counts = local_inventors(lat, lon, neighbor_lists, config.inventor_radius_km)
        out["local_inventors"][t] = dict(zip(ids, inv_counts.tolist()))

        prev = [e for e in geo.establishments if e[1] == t - 1]
        if not prev:
            raise DataError(f"no establishment census for period {t - 1} (needed for R&D lags)")
        rnd_prev = {ind: v for (ind, tt), v in geo.rnd.items() if tt == t - 1}
        rnd_vals = local_rnd(
            lat,
            lon,
            np.array([e[3] for e in prev]),
            np.array([e[4] for e in prev]),
            np.array([e[5] for e in prev]),
            [e[2] for e in prev],
            rnd_prev,
            config.rnd_radius_km,
        )
        out["local_rnd"][t] = dict(zip(ids, rnd_vals.tolist()))

        # the population grid is a single census snapshot, so a local
        # population sum would difference out; employment varies by period
        now = [e for e in geo.establishments if e[1] == t]
        emp = local_activity(
            lat,
            lon,
            np.array([e[3] for e in now]),
            np.array([e[4] for e in now]),
            np.array([e[5] for e in now]),
            config.pop_radius_km,
        )
        out["local_employment"][t] = dict(zip(ids, emp.tolist()))
    return out


def build_panel(corpus: Corpus, config: PipelineConfig) -> tuple[Panel, dict[int, PeriodData]]:
    values = corpus_values(corpus, config)
    vocab = build_vocab([p.subgroup for p in corpus.patents], config.category_level)
    t1, t2 = corpus.estimation_periods()
    slices = corpus.slices()

    # knowledge breadth accumulates over every period before the current
    # one; the per-period scope tables reuse rows of the universe tables
    universe = tuple(sorted({m for p in corpus.patents for m in p.team}))
    tables = {}
    for period in sorted(slices):
        ids, teams, subs, _, _ = slices[period]
        tables[period] = scope_table(ids, teams, subs, vocab, universe,
                                     level=config.category_level, period=period)
    breadth = cumulative_breadth([tables[p] for p in sorted(tables)], universe)
    u_index = {inv: k for k, inv in enumerate(universe)}

    data = {}
    for t in (t1, t2):
        if t not in slices or not slices[t][0]:
            raise DataError(f"no patents in estimation period {t}")
        ids, teams, subs, _, _ = slices[t]
        graph = CollaborationGraph.from_teams(dict(zip(ids, teams)))
        measures = period_measures(ids, teams, values, graph, t)
        rows = np.array([u_index[inv] for inv in graph.node_ids], dtype=np.int64)
        scopes = ScopeTable(period=t, inventor_ids=graph.node_ids, vocab=vocab,
                            words=tables[t].words[rows])
        data[t] = PeriodData(period=t, graph=graph, measures=measures, scopes=scopes)

    candidates = sorted(set(data[t1].graph.node_ids) & set(data[t2].graph.node_ids))
    orders = tuple(config.instrument_orders)
    shells = {}
    for t in (t1, t2):
        rows = np.array([data[t].graph.index_of(inv) for inv in candidates], dtype=np.int64)
        shells[t] = shell_value_means(data[t].graph, rows, data[t].measures.kd, list(orders))

    geo_cols: dict[str, dict[int, dict[str, float]]] = {}
    if config.geo_covariates:
        if not corpus.geo.has_cells:
            raise ConfigError("geo_covariates requires population cells")
        geo_cols = _geo_columns(corpus, data, config)

    exclusions = {rule: 0 for rule in _EXCLUSION_RULES}
    kept: list[int] = []
    for k, inv in enumerate(candidates):
        rule = None
        for t in (t1, t2):
            if (inv, t) not in corpus.membership:
                rule = "no_membership"
                break
        if rule is None:
            for t in (t1, t2):
                i = data[t].graph.index_of(inv)
                meas = data[t].measures
                if meas.n_collab[i] == 0:
                    rule = "no_collaborators"
                    break
                if not np.isfinite(meas.y[i]) or meas.y[i] <= 0:
                    rule = "nonpositive_output"
                    break
                if not np.isfinite(meas.kd[i]) or meas.kd[i] <= 0:
                    rule = "nonpositive_exchange"
                    break
                if breadth[t][u_index[inv]] <= 0:
                    rule = "no_prior_breadth"
                    break
                if any(not np.isfinite(shells[t][o][0][k]) or shells[t][o][0][k] <= 0
                       for o in orders):
                    rule = "missing_instrument"
                    break
        if rule is None:
            kept.append(k)
        else:
            exclusions[rule] += 1

    if len(kept) < 10:
        raise DataError(f"only {len(kept)} inventors survive sample selection")

    n = len(kept)
    m = len(orders)
    ln_y = np.empty((n, 2))
    ln_yp = np.empty((n, 2))
    ln_yq = np.empty((n, 2))
    ln_kd = np.empty((n, 2))
    ln_b = np.empty((n, 2))
    ln_n = np.empty((n, 2))
    z = np.empty((n, 2, m))
    inventors = [candidates[k] for k in kept]
    for col, t in enumerate((t1, t2)):
        meas = data[t].measures
        rows = np.array([data[t].graph.index_of(inv) for inv in inventors], dtype=np.int64)
        ln_y[:, col] = np.log(meas.y[rows])
        ln_yp[:, col] = np.log(meas.y_count[rows])
        ln_yq[:, col] = np.log(meas.y_quality[rows])
        ln_kd[:, col] = np.log(meas.kd[rows])
        ln_b[:, col] = np.log(breadth[t][[u_index[i] for i in inventors]])
        ln_n[:, col] = np.log(meas.n_collab[rows])
        for j, o in enumerate(orders):
            z[:, col, j] = np.log(shells[t][o][0][kept])

    geo_controls: dict[str, np.ndarray] = {}
    for name, per_period in geo_cols.items():
        arr = np.empty((n, 2))
        for col, t in enumerate((t1, t2)):
            table = per_period[t]
            arr[:, col] = np.log1p([table[inv] for inv in inventors])
        geo_controls[name] = arr

    clusters, firms = _cluster_labels(corpus, config, inventors, t1)
    panel = Panel(
        inventors=inventors,
        clusters=clusters,
        firms=firms,
        periods=(t1, t2),
        ln_y=ln_y,
        ln_y_count=ln_yp,
        ln_y_quality=ln_yq,
        ln_kd=ln_kd,
        ln_breadth=ln_b,
        ln_collab=ln_n,
        instruments=z,
        instrument_orders=orders,
        geo_controls=geo_controls,
        exclusions=exclusions,
    )
    return panel, data


def _cluster_labels(
    corpus: Corpus, config: PipelineConfig, inventors: list[str], period: int
) -> tuple[list[str], list[str]]:
    firms = [corpus.membership[(inv, period)].firm_id for inv in inventors]
    if config.cluster_level == "firm":
        return list(firms), firms
    if not corpus.geo.has_cells:
        raise ConfigError("cluster_level=ua requires population cells; use cluster_level=firm")
    geo = corpus.geo
    uas = delineate_urban_areas(
        np.asarray(geo.cell_x),
        np.asarray(geo.cell_y),
        np.asarray(geo.cell_lat),
        np.asarray(geo.cell_lon),
        np.asarray(geo.cell_pop),
    )
    lat = np.array([corpus.membership[(inv, period)].lat for inv in inventors])
    lon = np.array([corpus.membership[(inv, period)].lon for inv in inventors])
    labels = assign_urban_area(uas, lat, lon, config.ua_buffer_km)
    return labels, firms


# ---------------------------------------------------------------------------
# estimation on the assembled panel


@dataclass
class PanelEstimates:
    fits: dict[str, FitResult]
    decomposition: DecompositionResult
    design_names: list[str]


def _design(panel: Panel) -> tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray, list[str]]:
    dy = panel.diff(panel.ln_y)
    dx = panel.diff(panel.ln_kd)
    controls = [
        panel.diff(panel.ln_breadth),
        panel.diff(panel.ln_breadth**2),
        panel.diff(panel.ln_collab),
    ]
    names = ["d_ln_breadth", "d_ln_breadth_sq", "d_ln_collab"]
    for cname in sorted(panel.geo_controls):
        controls.append(panel.diff(panel.geo_controls[cname]))
        names.append(f"d_log1p_{cname}")
    exog = np.column_stack([np.ones(panel.n)] + controls)
    z = panel.diff(panel.instruments)
    return dy, dx, exog, z, ["const"] + names


def estimate_panel(panel: Panel, config: PipelineConfig) -> PanelEstimates:
    """OLS, joint 2SLS, and per-shell 2SLS fits plus the margin split."""
    dy, dx, exog, z, exog_names = _design(panel)
    clusters = np.array(panel.clusters)
    names = exog_names + ["d_ln_kd"]
    fits: dict[str, FitResult] = {}
    fits["ols"] = ols_fit(
        dy, np.column_stack([exog, dx]), names, clusters, small_sample=config.small_sample
    )
    label_all = "iv_" + "".join(str(o) for o in panel.instrument_orders)
    fits[label_all] = tsls_fit(
        dy, exog, dx, z, names, ["d_ln_kd"], clusters,
        small_sample=config.small_sample, first_stage_vce=config.first_stage_vce,
    )
    for j, order in enumerate(panel.instrument_orders):
        fits[f"iv_{order}"] = tsls_fit(
            dy, exog, dx, z[:, [j]], names, ["d_ln_kd"], clusters,
            small_sample=config.small_sample, first_stage_vce=config.first_stage_vce,
        )
    dyp = panel.diff(panel.ln_y_count)
    dyq = panel.diff(panel.ln_y_quality)
    decomp = decompose_fit(
        dy, dyp, dyq, exog, dx, z, names, clusters, small_sample=config.small_sample
    )
    return PanelEstimates(fits=fits, decomposition=decomp, design_names=names)


def overlap_profile_table(
    panel: Panel, data: dict[int, PeriodData], config: PipelineConfig
) -> list[tuple[int, int, float, float, int]]:
    """Rows (period, order, mean Jaccard, mean common, contributing pairs)."""
    rows = []
    for t in panel.periods:
        graph = data[t].graph
        sources = np.array([graph.index_of(inv) for inv in panel.inventors], dtype=np.int64)
        jacc, common, counts = shell_overlap_profile(
            graph, sources, data[t].scopes.words, config.profile_max_order,
            include_focal=config.include_focal_overlap,
        )
        for order in range(config.profile_max_order + 1):
            col = jacc[:, order]
            ok = np.isfinite(col)
            rows.append(
                (
                    t,
                    order,
                    float(col[ok].mean()) if ok.any() else float("nan"),
                    float(common[ok, order].mean()) if ok.any() else float("nan"),
                    int(counts[:, order].sum()),
                )
            )
    return rows


def counterfactual_inputs(
    corpus: Corpus, panel: Panel, data: dict[int, PeriodData]
) -> tuple[dict[int, CollaborationGraph], dict[int, dict[str, float]], dict[int, dict[str, str]]]:
    graphs = {t: data[t].graph for t in panel.periods}
    ybar = {}
    firm_of = {}
    for t in panel.periods:
        meas = data[t].measures
        ybar[t] = {
            inv: float(meas.ybar[i])
            for i, inv in enumerate(meas.node_ids)
            if np.isfinite(meas.ybar[i]) and meas.ybar[i] > 0
        }
        firm_of[t] = {
            inv: corpus.membership[(inv, t)].firm_id
            for inv in meas.node_ids
            if (inv, t) in corpus.membership
        }
    return graphs, ybar, firm_of


# ---------------------------------------------------------------------------
# report writing


def _write_estimates(out: Path, est: PanelEstimates) -> list[str]:
    rows = []
    for label, fit in est.fits.items():
        ci = fit.conf_int()
        tvals = fit.tvalues()
        pvals = fit.pvalues()
        for k, name in enumerate(fit.names):
            rows.append(
                [
                    label,
                    name,
                    fmt_float(fit.coef[k]),
                    fmt_float(fit.se[k]),
                    fmt_float(tvals[k]),
                    fmt_float(pvals[k]),
                    fmt_float(ci[k, 0]),
                    fmt_float(ci[k, 1]),
                    str(fit.n_obs),
                    str(fit.n_clusters),
                    fmt_float(fit.hansen_j) if fit.hansen_j is not None else "",
                    fmt_float(fit.hansen_p) if fit.hansen_p is not None else "",
                ]
            )
    write_table(
        out / "estimates.tsv",
        ["fit", "term", "coef", "se", "t", "p", "ci_lo", "ci_hi", "n_obs", "n_clusters",
         "hansen_j", "hansen_p"],
        rows,
    )

    fs_rows = []
    for label, fit in est.fits.items():
        for stage in fit.first_stages:
            for k, name in enumerate(stage.names):
                fs_rows.append(
                    [
                        label,
                        stage.endog_name,
                        name,
                        fmt_float(stage.coef[k]),
                        fmt_float(stage.se[k]),
                        fmt_float(stage.effective_f),
                        fmt_float(stage.critical_value),
                        str(stage.n_instruments),
                    ]
                )
    write_table(
        out / "first_stage.tsv",
        ["fit", "endogenous", "term", "coef", "se", "effective_f", "critical_value",
         "n_instruments"],
        fs_rows,
    )
    return ["estimates.tsv", "first_stage.tsv"]


def _write_decomposition(out: Path, decomp: DecompositionResult) -> list[str]:
    rows = [
        ["total", fmt_float(decomp.beta), fmt_float(decomp.se_beta), "", ""],
        ["count", fmt_float(decomp.beta_count), fmt_float(decomp.se_count), "", ""],
        ["quality", fmt_float(decomp.beta_quality), fmt_float(decomp.se_quality), "", ""],
        [
            "quality_share",
            fmt_float(decomp.ratio),
            fmt_float(decomp.ratio_se),
            fmt_float(decomp.ratio_ci[0]),
            fmt_float(decomp.ratio_ci[1]),
        ],
    ]
    write_table(out / "decomposition.tsv", ["margin", "coef", "se", "ci_lo", "ci_hi"], rows)
    return ["decomposition.tsv"]


def run_pipeline(config: PipelineConfig) -> dict[str, object]:
    """Execute every stage and write reports; returns a summary mapping."""
    out = Path(config.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    corpus = load_corpus(config)
    counts = corpus.validate()
    panel, data = build_panel(corpus, config)
    est = estimate_panel(panel, config)

    files: list[str] = []

    rows = []
    for k, inv in enumerate(panel.inventors):
        for col, t in enumerate(panel.periods):
            rows.append(
                [
                    inv,
                    str(t),
                    panel.clusters[k],
                    panel.firms[k],
                    fmt_float(panel.ln_y[k, col]),
                    fmt_float(panel.ln_y_count[k, col]),
                    fmt_float(panel.ln_y_quality[k, col]),
                    fmt_float(panel.ln_kd[k, col]),
                    fmt_float(panel.ln_breadth[k, col]),
                    fmt_float(panel.ln_collab[k, col]),
                ]
                + [fmt_float(panel.instruments[k, col, j]) for j in range(len(panel.instrument_orders))]
            )
    write_table(
        out / "panel.tsv",
        ["inventor", "period", "cluster", "firm", "ln_y", "ln_y_count", "ln_y_quality",
         "ln_kd", "ln_breadth", "ln_collab"]
        + [f"ln_shell_{o}" for o in panel.instrument_orders],
        rows,
    )
    files.append("panel.tsv")

    write_table(
        out / "exclusions.tsv",
        ["rule", "count"],
        [[rule, str(panel.exclusions[rule])] for rule in _EXCLUSION_RULES],
    )
    files.append("exclusions.tsv")

    files += _write_estimates(out, est)
    files += _write_decomposition(out, est.decomposition)

    profile = overlap_profile_table(panel, data, config)
    write_table(
        out / "overlap.tsv",
        ["period", "order", "mean_jaccard", "mean_common", "pairs"],
        [
            [str(t), str(o), fmt_float(j), fmt_float(c), str(p)]
            for t, o, j, c, p in profile
        ],
    )
    files.append("overlap.tsv")

    summary: dict[str, object] = {
        "panel_inventors": panel.n,
        "clusters": len(set(panel.clusters)),
        "exclusions": panel.exclusions,
        "corpus": counts,
        "fits": est.fits,
        "decomposition": est.decomposition,
    }

    if config.counterfactual:
        label_all = "iv_" + "".join(str(o) for o in panel.instrument_orders)
        baseline = float(est.fits[label_all].coef[-1])
        graphs, ybar, firm_of = counterfactual_inputs(corpus, panel, data)
        controls = None
        result = run_ensemble(
            graphs,
            ybar,
            firm_of,
            panel.inventors,
            panel.ln_y,
            baseline,
            controls=controls,
            n_draws=config.counterfactual_draws,
            seed=config.counterfactual_seed,
            redraw_per_period=config.counterfactual_redraw,
        )
        rows = [[str(d), fmt_float(b)] for d, b in enumerate(result.betas)]
        rows.append(["mean", fmt_float(result.mean_beta)])
        rows.append(["baseline", fmt_float(result.baseline_beta)])
        rows.append(["ratio", fmt_float(result.ratio)])
        rows.append(["dropped_infeasible", str(result.dropped_infeasible)])
        write_table(out / "counterfactual.tsv", ["draw", "beta"], rows)
        files.append("counterfactual.tsv")
        summary["counterfactual"] = result

    log_lines = [f"config_hash = {config_hash(config.to_mapping())}"]
    for key, val in counts.items():
        log_lines.append(f"corpus_{key} = {val}")
    log_lines.append(f"panel_inventors = {panel.n}")
    log_lines.append(f"clusters = {len(set(panel.clusters))}")
    for rule in _EXCLUSION_RULES:
        log_lines.append(f"excluded_{rule} = {panel.exclusions[rule]}")
    (out / "run.log").write_text("\n".join(log_lines) + "\n")
    files.append("run.log")

    write_manifest(out, config_hash(config.to_mapping()), config.seed, sorted(files))
    return summary
