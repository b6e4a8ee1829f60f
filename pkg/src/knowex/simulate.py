"""Synthetic two-period economies with known structural coefficients.

The generator lays out urban areas, firms, and inventors, wires a
collaboration network, and then works backwards from the structural
output equation to a patent corpus that reproduces it exactly: running
the measurement pipeline on the exported patents recovers the intended
productivity and differential-knowledge values to rounding error.

Construction notes, in dependency order:

* Panel inventors (the estimation sample) collaborate only with
  non-panel staff inventors.  Staff output enters a panel inventor's
  differential-knowledge measure, but panel output never feeds back
  into another panel inventor's measure, so the structural equation is
  not simultaneous and the generated coefficients are the estimands.
* Each staff inventor's period productivity ``w`` is log-normal with an
  urban-area-period component, a firm-period component, and an
  idiosyncratic shock.  Collaboration stays inside the firm with high
  probability and otherwise favors co-located firms, so the area and
  firm components are shared along multi-step collaboration paths:
  far-shell averages of the differential-knowledge measure remain
  correlated with the focal regressor after the within transformation,
  which is what makes them usable instruments.  The area-period shock
  also makes outcomes dependent within an urban area, which is the
  dependence the clustered covariance has to absorb.
* The focal error adds ``shock_correlation`` times the mean
  idiosyncratic shock of the inventor's collaborators, so ordinary
  least squares is biased (sign follows the weight) while far shells
  stay clean: a shell at distance four or more shares no collaborator
  with the focal inventor.
* To turn targets into patents, every edge carries one joint patent of
  tiny fixed value and every inventor solo patents: a staff inventor's
  solo value tops their outside contribution up to ``w``; a panel
  inventor's solo total tops their output up to the structural target.
  The solo-patent count carries the count margin: its target follows
  the structural equation with coefficients scaled by
  ``1 - quality_share``, so the count and quality margins split the
  knowledge elasticity in a known ratio (integer rounding adds noise
  to the count margin only; productivity itself is exact).  The
  transitory output shock lands on the quality margin alone: counts
  feed next-period knowledge breadth through the categories they add,
  and a count that moved with the shock would make breadth growth
  correlate with the differenced error, contaminating the breadth
  controls downstream.

Randomness comes from one seed: a ``numpy.random.SeedSequence`` is
spawned into one child stream per generation stage, in the fixed order
listed in ``_STREAMS``.  Regenerating with the same configuration is
reproducible bit for bit.
"""

from __future__ import annotations

import datetime as dt
from dataclasses import dataclass, field, fields

from pathlib import Path

import numpy as np

from .dataio import (
    Corpus,
    GeoTables,
    MemberRecord,
    PatentRecord,
    fmt_float,
    kv_get,
    reject_unknown_keys,
    write_table,
)
from .errors import ConfigError
from ._kernels import EARTH_RADIUS_KM

_KM_PER_DEG_LAT = np.pi * EARTH_RADIUS_KM / 180.0
_REF_LAT = 34.0
_REF_LON = 132.0

_STREAMS = (
    "geography",
    "firms",
    "membership",
    "presample",
    "graph_1",
    "graph_2",
    "latents_1",
    "latents_2",
    "patents_1",
    "patents_2",
    "citations",
    "census",
)


@dataclass
class SimConfig:
    """Economy size, structural coefficients, and noise scales."""

    n_inventors: int = 2000
    staff_ratio: float = 2.5
    n_firms: int = 100
    n_uas: int = 30
    true_beta: float = 0.4
    gamma1: float = 0.10
    gamma2: float = -0.02
    alpha: float = 0.5
    tau2: float = 0.1
    quality_share: float = 0.5
    firm_output_loading: float = 0.0
    sigma_inventor: float = 0.3
    sigma_area_period: float = 0.35
    sigma_firm_period: float = 0.2
    sigma_shock: float = 0.4
    sigma_noise: float = 0.25
    sigma_count: float = 0.10
    shock_correlation: float = -0.5
    within_firm_share: float = 0.85
    same_ua_share: float = 0.8
    mean_collaborators: float = 4.0
    staff_degree: float = 3.0
    mean_solo: float = 6.0
    joint_value: float = 1e-6
    presample_mean: float = 2.0
    categories_per_firm: int = 6
    category_pool: int = 400
    scope_noise: float = 0.1
    citation_rate: float = 0.3
    period1_start: int = 2000
    period2_start: int = 2005
    period3_start: int = 2010
    export_geo: bool = True
    seed: int = 12345

    def __post_init__(self) -> None:
        if self.n_inventors < 10 or self.n_firms < 2 or self.n_uas < 1:
            raise ConfigError("economy too small: need >=10 inventors, >=2 firms, >=1 urban area")
        if not 0 < self.quality_share < 1:
            raise ConfigError("quality_share must lie in (0, 1)")
        if not 0 <= self.within_firm_share <= 1:
            raise ConfigError("within_firm_share must lie in [0, 1]")
        if self.joint_value <= 0 or self.joint_value > 1e-3:
            raise ConfigError("joint_value must be a small positive number")
        if not self.period1_start < self.period2_start < self.period3_start:
            raise ConfigError("period start years must increase")
        if self.mean_collaborators < 1:
            raise ConfigError("mean_collaborators must be at least 1")

    @classmethod
    def from_mapping(cls, mapping: dict[str, str]) -> "SimConfig":
        known = {f.name for f in fields(cls)}
        reject_unknown_keys(mapping, known)
        kwargs = {}
        for f in fields(cls):
            if f.name in mapping:
                kwargs[f.name] = kv_get(mapping, f.name, _cast_of(f.type), None)
        return cls(**kwargs)

    def to_mapping(self) -> dict[str, str]:
        out = {}
        for f in fields(self):
            v = getattr(self, f.name)
            out[f.name] = fmt_float(v) if isinstance(v, float) else str(v)
        return out


def _cast_of(type_name) -> type:
    name = type_name if isinstance(type_name, str) else getattr(type_name, "__name__", "str")
    return {"int": int, "float": float, "bool": bool, "str": str}.get(name, str)


@dataclass
class TruthTable:
    """Structural quantities for every panel inventor-period."""

    inventor_ids: list[str]
    periods: np.ndarray
    ln_y: np.ndarray
    ln_kd: np.ndarray
    breadth: np.ndarray
    n_collab: np.ndarray
    solo_count: np.ndarray
    ua: list[str]
    firm: list[str]
    epsilon: np.ndarray


@dataclass
class SyntheticEconomy:
    config: SimConfig
    corpus: Corpus
    truth: TruthTable
    panel_ids: list[str]
    staff_ids: list[str]
    ua_of_firm: dict[str, str] = field(default_factory=dict)


def _grid_latlon(x: np.ndarray, y: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    km_per_deg_lon = _KM_PER_DEG_LAT * np.cos(np.radians(36.0))
    return _REF_LAT + np.asarray(y) / _KM_PER_DEG_LAT, _REF_LON + np.asarray(x) / km_per_deg_lon


def _sample_ua_centers(rng: np.random.Generator, n: int) -> np.ndarray:
    """Integer grid centers at least 25 km apart (rejection sampling)."""
    centers: list[tuple[int, int]] = []
    tries = 0
    while len(centers) < n:
        tries += 1
        if tries > 20000:
            raise ConfigError("cannot place urban areas 25 km apart; lower n_uas")
        x = int(rng.integers(10, 460))
        y = int(rng.integers(10, 320))
        if all((x - cx) ** 2 + (y - cy) ** 2 >= 25**2 for cx, cy in centers):
            centers.append((x, y))
    return np.array(centers, dtype=np.int64)


def _draw_degrees(rng: np.random.Generator, n: int, mean: float, minimum: int) -> np.ndarray:
    lam = max(mean - minimum, 1e-9)
    return minimum + rng.poisson(lam, size=n)


def _group_slices(keys: np.ndarray, n_groups: int) -> tuple[np.ndarray, np.ndarray]:
    """Stable sort of slot indices by group plus per-group boundaries."""
    order = np.argsort(keys, kind="stable")
    bounds = np.searchsorted(keys[order], np.arange(n_groups + 1))
    return order, bounds


def _draw_partners(
    rng: np.random.Generator,
    slot_firm: np.ndarray,
    firm_staff: list[np.ndarray],
    same_ua_firms: list[np.ndarray],
    n_f: int,
    p_within: float,
    p_same_ua: float,
) -> np.ndarray:
    """Staff partner per slot: own firm w.p. ``p_within``, else another
    firm (same urban area w.p. ``p_same_ua``), uniform within the pool."""
    total = slot_firm.size
    out = np.empty(total, dtype=np.int64)
    order, bounds = _group_slices(slot_firm, n_f)
    for f in range(n_f):
        block = order[bounds[f] : bounds[f + 1]]
        if block.size == 0:
            continue
        within = rng.random(block.size) < p_within
        pool = firm_staff[f]
        wslots = block[within]
        if wslots.size:
            out[wslots] = pool[rng.integers(pool.size, size=wslots.size)]
        cslots = block[~within]
        if cslots.size == 0:
            continue
        neighbors = same_ua_firms[f]
        target = np.empty(cslots.size, dtype=np.int64)
        if neighbors.size:
            use_same = rng.random(cslots.size) < p_same_ua
        else:
            use_same = np.zeros(cslots.size, dtype=bool)
        k = int(use_same.sum())
        if k:
            target[use_same] = neighbors[rng.integers(neighbors.size, size=k)]
        k = int((~use_same).sum())
        if k:
            other = rng.integers(n_f - 1, size=k)
            target[~use_same] = np.where(other >= f, other + 1, other)
        for g in np.unique(target):
            gslots = cslots[target == g]
            pool_g = firm_staff[g]
            out[gslots] = pool_g[rng.integers(pool_g.size, size=gslots.size)]
    return out


def _draw_categories(
    rng: np.random.Generator,
    pat_firm: np.ndarray,
    firm_cats: list[np.ndarray],
    pool_size: int,
    noise: float,
    n_f: int,
) -> np.ndarray:
    """Category per patent: the firm's home set, polluted at rate ``noise``."""
    total = pat_firm.size
    out = np.empty(total, dtype=np.int64)
    order, bounds = _group_slices(pat_firm, n_f)
    for f in range(n_f):
        block = order[bounds[f] : bounds[f + 1]]
        if block.size:
            home = firm_cats[f]
            out[block] = home[rng.integers(home.size, size=block.size)]
    stray = rng.random(total) < noise
    k = int(stray.sum())
    if k:
        out[stray] = rng.integers(pool_size, size=k)
    return out


def _make_subgroup(k: int) -> str:
    section = "ABCDEFGH"[k % 8]
    cls = (k // 8) % 90 + 10
    sub = "FGHKLMNP"[(k // 720) % 8]
    return f"{section}{cls:02d}{sub}{k % 97 + 1}/{k % 43 + 1:02d}"


def generate(config: SimConfig) -> SyntheticEconomy:
    """Generate an economy; see the module docstring for the construction."""
    streams = {
        name: np.random.default_rng(child)
        for name, child in zip(_STREAMS, np.random.SeedSequence(config.seed).spawn(len(_STREAMS)))
    }
    n_p = config.n_inventors
    n_s = int(round(config.staff_ratio * n_p))
    n_f = config.n_firms
    if n_s < n_f:
        raise ConfigError("need at least one staff inventor per firm; raise staff_ratio")
    periods = (1, 2)
    period_breaks = [config.period1_start, config.period2_start, config.period3_start,
                     config.period3_start + 10]

    # --- geography ----------------------------------------------------
    rng = streams["geography"]
    centers = _sample_ua_centers(rng, config.n_uas)
    cell_rows: list[tuple[int, int, float]] = []
    ua_radius = rng.integers(2, 5, size=config.n_uas)
    for (cx, cy), r in zip(centers, ua_radius):
        for dx in range(-int(r), int(r) + 1):
            for dy in range(-int(r), int(r) + 1):
                d2 = dx * dx + dy * dy
                if d2 <= r * r:
                    pop = 1500.0 + 3000.0 * float(np.exp(-d2 / 8.0))
                    cell_rows.append((cx + dx, cy + dy, round(pop, 1)))
    # sparse sub-threshold countryside cells
    for _ in range(config.n_uas * 4):
        x = int(rng.integers(0, 470))
        y = int(rng.integers(0, 330))
        if all(abs(x - cx) + abs(y - cy) > 12 for cx, cy in centers):
            cell_rows.append((x, y, float(rng.integers(50, 900))))
    cell_rows.sort()
    cell_x = np.array([r[0] for r in cell_rows], dtype=np.int64)
    cell_y = np.array([r[1] for r in cell_rows], dtype=np.int64)
    cell_lat, cell_lon = _grid_latlon(cell_x, cell_y)
    cell_pop = np.array([r[2] for r in cell_rows])

    # --- firms, establishments, categories ----------------------------
    rng = streams["firms"]
    firm_ua = rng.integers(0, config.n_uas, size=n_f)
    center_lat, center_lon = _grid_latlon(centers[:, 0], centers[:, 1])
    firm_lat = center_lat[firm_ua] + rng.normal(0.0, 1.2 / _KM_PER_DEG_LAT, size=n_f)
    firm_lon = center_lon[firm_ua] + rng.normal(0.0, 1.6 / _KM_PER_DEG_LAT, size=n_f)
    industries = [f"IND{k}" for k in range(8)]
    firm_industry = rng.integers(0, len(industries), size=n_f)
    est_per_firm = rng.integers(1, 3, size=n_f)
    est_ids: list[str] = []
    est_firm: list[int] = []
    est_lat: list[float] = []
    est_lon: list[float] = []
    for f in range(n_f):
        for e in range(int(est_per_firm[f])):
            est_ids.append(f"F{f:04d}E{e}")
            est_firm.append(f)
            est_lat.append(float(firm_lat[f] + rng.normal(0.0, 0.4 / _KM_PER_DEG_LAT)))
            est_lon.append(float(firm_lon[f] + rng.normal(0.0, 0.5 / _KM_PER_DEG_LAT)))
    pool = [_make_subgroup(k) for k in range(config.category_pool)]
    if len(set(pool)) != len(pool):
        raise AssertionError("category pool collision")
    firm_cats = [
        rng.choice(config.category_pool, size=min(config.categories_per_firm, config.category_pool),
                   replace=False)
        for _ in range(n_f)
    ]
    same_ua_firms = [
        np.flatnonzero((firm_ua == firm_ua[f]) & (np.arange(n_f) != f)) for f in range(n_f)
    ]

    # --- inventors ----------------------------------------------------
    rng = streams["membership"]
    panel_ids = [f"I{k:06d}" for k in range(n_p)]
    staff_ids = [f"W{k:06d}" for k in range(n_s)]
    # round-robin base assignment guarantees staff in every firm, then shuffle
    staff_firm = np.arange(n_s) % n_f
    rng.shuffle(staff_firm)
    panel_firm = rng.integers(0, n_f, size=n_p)
    firm_est_rows = [np.flatnonzero(np.array(est_firm) == f) for f in range(n_f)]
    panel_est = np.array([int(rng.choice(firm_est_rows[f])) for f in panel_firm])
    staff_est = np.array([int(rng.choice(firm_est_rows[f])) for f in staff_firm])
    est_lat_a = np.array(est_lat)
    est_lon_a = np.array(est_lon)
    panel_lat = est_lat_a[panel_est] + rng.normal(0.0, 0.3 / _KM_PER_DEG_LAT, size=n_p)
    panel_lon = est_lon_a[panel_est] + rng.normal(0.0, 0.4 / _KM_PER_DEG_LAT, size=n_p)
    staff_lat = est_lat_a[staff_est] + rng.normal(0.0, 0.3 / _KM_PER_DEG_LAT, size=n_s)
    staff_lon = est_lon_a[staff_est] + rng.normal(0.0, 0.4 / _KM_PER_DEG_LAT, size=n_s)
    firm_staff = [np.flatnonzero(staff_firm == f) for f in range(n_f)]

    lam = streams["latents_1"].normal(0.0, config.sigma_inventor, size=n_p)

    # --- pre-sample patents (knowledge breadth baseline) ---------------
    rng = streams["presample"]
    patents: list[PatentRecord] = []
    panel_scope: list[set[int]] = [set() for _ in range(n_p)]
    pre_counts = _draw_degrees(rng, n_p, config.presample_mean, 1)
    day0 = dt.date(period_breaks[0] - 7, 1, 1)
    span0 = (dt.date(period_breaks[0], 1, 1) - day0).days
    pre_inv = np.repeat(np.arange(n_p), pre_counts)
    pre_cats = _draw_categories(rng, panel_firm[pre_inv], firm_cats, config.category_pool,
                                config.scope_noise, n_f)
    pre_offs = rng.integers(span0, size=pre_inv.size)
    days0 = [day0 + dt.timedelta(days=d) for d in range(span0)]
    for k, (i, c, off) in enumerate(zip(pre_inv.tolist(), pre_cats.tolist(), pre_offs.tolist())):
        panel_scope[i].add(c)
        patents.append(
            PatentRecord(f"P0{k:07d}", days0[off], pool[c], (panel_ids[i],), 0, 1.0)
        )

    # --- per-period generation ----------------------------------------
    membership: dict[tuple[str, int], MemberRecord] = {}
    truth_rows: dict[str, list] = {
        "ids": [], "period": [], "ln_y": [], "ln_kd": [], "breadth": [],
        "n": [], "solo": [], "ua": [], "firm": [], "eps": [],
    }
    breadth_prev = np.array([len(s) for s in panel_scope], dtype=np.int64)
    firm_labels = [f"F{f:04d}" for f in range(n_f)]
    ua_labels = [f"UA{k:04d}" for k in range(config.n_uas)]

    for t in periods:
        grng = streams[f"graph_{t}"]
        lrng = streams[f"latents_{t}"]
        prng = streams[f"patents_{t}"]

        # membership rows (fixed employer and location across periods)
        for ids, firms_of, ests_of, lats, lons in (
            (panel_ids, panel_firm, panel_est, panel_lat, panel_lon),
            (staff_ids, staff_firm, staff_est, staff_lat, staff_lon),
        ):
            for inv, f, est, la, lo in zip(
                ids, firms_of.tolist(), ests_of.tolist(), lats.tolist(), lons.tolist()
            ):
                membership[(inv, t)] = MemberRecord(
                    inv, t, firm_labels[f], est_ids[est], la, lo
                )

        # collaboration edges: panel-staff slots, then staff-staff extras
        want = _draw_degrees(grng, n_p, config.mean_collaborators, 1)
        slot_src = np.repeat(np.arange(n_p), want)
        partners = _draw_partners(grng, panel_firm[slot_src], firm_staff, same_ua_firms,
                                  n_f, config.within_firm_share, config.same_ua_share)
        keys = np.unique(slot_src * n_s + partners)
        edge_i = keys // n_s
        edge_o = keys % n_s
        panel_deg = np.bincount(edge_i, minlength=n_p)

        extra = _draw_degrees(grng, n_s, config.staff_degree / 2.0, 0)
        src_o = np.repeat(np.arange(n_s), extra)
        partners_o = _draw_partners(grng, staff_firm[src_o], firm_staff, same_ua_firms,
                                    n_f, config.within_firm_share, config.same_ua_share)
        lo = np.minimum(src_o, partners_o)
        hi = np.maximum(src_o, partners_o)
        ok = lo != hi
        skeys = np.unique(lo[ok] * n_s + hi[ok])
        sedge_a = skeys // n_s
        sedge_b = skeys % n_s

        staff_deg = (
            np.bincount(edge_o, minlength=n_s)
            + np.bincount(sedge_a, minlength=n_s)
            + np.bincount(sedge_b, minlength=n_s)
        )

        # latent productivity and shocks; the firm-period component adds
        # an urban-area-period piece shared by co-located firms, which is
        # what far collaboration shells can still see after differencing
        area = lrng.normal(0.0, config.sigma_area_period, size=config.n_uas)
        phi = area[firm_ua] + lrng.normal(0.0, config.sigma_firm_period, size=n_f)
        u = lrng.normal(0.0, config.sigma_shock, size=n_s)
        e = lrng.normal(0.0, config.sigma_noise, size=n_p)
        nu = lrng.normal(0.0, config.sigma_count, size=n_p)
        w = np.exp(phi[staff_firm] + u)

        kd = np.bincount(edge_i, weights=w[edge_o], minlength=n_p) / panel_deg
        ubar = np.bincount(edge_i, weights=u[edge_o], minlength=n_p) / panel_deg
        eps = e + config.shock_correlation * ubar
        ln_k = np.log(np.maximum(breadth_prev, 1))
        tau = 0.0 if t == 1 else config.tau2
        ln_y = (
            config.alpha
            + config.true_beta * np.log(kd)
            + config.gamma1 * ln_k
            + config.gamma2 * ln_k**2
            + config.firm_output_loading * phi[panel_firm]
            + lam
            + tau
            + eps
        )

        # count-margin target, centered so counts hover near mean_solo
        scale = 1.0 - config.quality_share
        drivers = (
            config.true_beta * (np.log(kd) - np.log(kd).mean())
            + config.gamma1 * (ln_k - ln_k.mean())
            + config.gamma2 * (ln_k**2 - (ln_k**2).mean())
            + config.firm_output_loading * (phi[panel_firm] - phi[panel_firm].mean())
        )
        ln_count = (
            np.log(config.mean_solo)
            + scale * drivers
            + 0.5 * (lam + tau)
            + nu
        )
        solo_counts = np.maximum(1, np.rint(np.exp(ln_count) - panel_deg / 2.0).astype(np.int64))

        # patents: joint per edge, solo for everyone
        t0 = dt.date(period_breaks[t - 1], 1, 1)
        span = (dt.date(period_breaks[t], 1, 1) - t0).days
        days = [t0 + dt.timedelta(days=d) for d in range(span)]
        c_half = config.joint_value / 2.0
        scope_inv: list[np.ndarray] = []
        scope_cat: list[np.ndarray] = []

        n_e = edge_i.size
        coin = prng.random(n_e) < 0.5
        pat_firm = np.where(coin, panel_firm[edge_i], staff_firm[edge_o])
        cats = _draw_categories(prng, pat_firm, firm_cats, config.category_pool,
                                config.scope_noise, n_f)
        offs = prng.integers(span, size=n_e)
        scope_inv.append(edge_i)
        scope_cat.append(cats)
        jv = config.joint_value
        for k, (i, o, c, off) in enumerate(
            zip(edge_i.tolist(), edge_o.tolist(), cats.tolist(), offs.tolist())
        ):
            # panel ids sort before staff ids, so the pair is ordered
            patents.append(
                PatentRecord(f"J{t}{k:07d}", days[off], pool[c],
                             (panel_ids[i], staff_ids[o]), t, jv)
            )

        n_se = sedge_a.size
        coin = prng.random(n_se) < 0.5
        pat_firm = np.where(coin, staff_firm[sedge_a], staff_firm[sedge_b])
        cats = _draw_categories(prng, pat_firm, firm_cats, config.category_pool,
                                config.scope_noise, n_f)
        offs = prng.integers(span, size=n_se) if n_se else np.empty(0, dtype=np.int64)
        for k, (a, b, c, off) in enumerate(
            zip(sedge_a.tolist(), sedge_b.tolist(), cats.tolist(), offs.tolist())
        ):
            patents.append(
                PatentRecord(f"J{t}{n_e + k:07d}", days[off], pool[c],
                             (staff_ids[a], staff_ids[b]), t, jv)
            )

        y = np.exp(ln_y)
        solo_total = panel_deg * y - c_half * panel_deg
        if (solo_total <= 0).any():
            raise ConfigError(
                "joint_value too large relative to generated outputs; lower joint_value"
            )
        solo_inv = np.repeat(np.arange(n_p), solo_counts)
        share = np.repeat(solo_total / solo_counts, solo_counts)
        cats = _draw_categories(prng, panel_firm[solo_inv], firm_cats, config.category_pool,
                                config.scope_noise, n_f)
        offs = prng.integers(span, size=solo_inv.size)
        scope_inv.append(solo_inv)
        scope_cat.append(cats)
        for k, (i, c, off, g) in enumerate(
            zip(solo_inv.tolist(), cats.tolist(), offs.tolist(), share.tolist())
        ):
            patents.append(
                PatentRecord(f"S{t}{k:07d}", days[off], pool[c], (panel_ids[i],), t, g)
            )

        staff_solo = w - c_half * np.maximum(staff_deg - 1, 0)
        if (staff_solo <= 0).any():
            raise ConfigError("joint_value too large for staff productivity; lower joint_value")
        cats = _draw_categories(prng, staff_firm, firm_cats, config.category_pool,
                                config.scope_noise, n_f)
        offs = prng.integers(span, size=n_s)
        for o, (c, off, g) in enumerate(
            zip(cats.tolist(), offs.tolist(), staff_solo.tolist())
        ):
            patents.append(
                PatentRecord(f"V{t}{o:07d}", days[off], pool[c], (staff_ids[o],), t, g)
            )

        # truth rows, then roll panel scopes forward for the next period
        truth_rows["ids"].extend(panel_ids)
        truth_rows["period"].extend([t] * n_p)
        truth_rows["ln_y"].extend(ln_y.tolist())
        truth_rows["ln_kd"].extend(np.log(kd).tolist())
        truth_rows["breadth"].extend(breadth_prev.tolist())
        truth_rows["n"].extend(panel_deg.tolist())
        truth_rows["solo"].extend(solo_counts.tolist())
        truth_rows["ua"].extend(ua_labels[int(k)] for k in firm_ua[panel_firm])
        truth_rows["firm"].extend(firm_labels[int(k)] for k in panel_firm)
        truth_rows["eps"].extend(eps.tolist())
        for inv_arr, cat_arr in zip(scope_inv, scope_cat):
            for i, c in zip(inv_arr.tolist(), cat_arr.tolist()):
                panel_scope[i].add(c)
        breadth_prev = np.array([len(s) for s in panel_scope], dtype=np.int64)

    # --- citations ------------------------------------------------------
    rng = streams["citations"]
    by_period = {1: [], 2: []}
    for k, rec in enumerate(patents):
        if rec.period in by_period:
            by_period[rec.period].append(k)
    citations: list[tuple[str, str]] = []
    late = by_period[2]
    if late:
        for k in by_period[1]:
            if rng.random() < config.citation_rate:
                for _ in range(int(rng.integers(1, 3))):
                    citer = patents[late[int(rng.integers(len(late)))]]
                    citations.append((citer.patent_id, patents[k].patent_id))

    # --- establishment census and R&D spending --------------------------
    rng = streams["census"]
    geo = GeoTables()
    if config.export_geo:
        geo.cell_x = cell_x.tolist()
        geo.cell_y = cell_y.tolist()
        geo.cell_lat = [float(v) for v in cell_lat]
        geo.cell_lon = [float(v) for v in cell_lon]
        geo.cell_pop = [float(v) for v in cell_pop]
        base_emp = rng.lognormal(4.0, 0.6, size=len(est_ids))
        for t in (0, 1, 2):
            factor = rng.lognormal(0.0, 0.05, size=len(est_ids))
            for k, eid in enumerate(est_ids):
                emp = float(base_emp[k] * factor[k])
                geo.establishments.append(
                    (eid, t, industries[int(firm_industry[est_firm[k]])],
                     float(est_lat[k]), float(est_lon[k]), round(emp, 2), round(emp * 3.1, 2))
                )
            for ind in industries:
                geo.rnd[(ind, t)] = round(float(rng.lognormal(4.5, 0.3)), 2)

    corpus = Corpus(
        period_breaks=period_breaks,
        patents=patents,
        membership=membership,
        citations=citations,
        geo=geo,
    )
    truth = TruthTable(
        inventor_ids=truth_rows["ids"],
        periods=np.array(truth_rows["period"], dtype=np.int64),
        ln_y=np.array(truth_rows["ln_y"]),
        ln_kd=np.array(truth_rows["ln_kd"]),
        breadth=np.array(truth_rows["breadth"], dtype=np.int64),
        n_collab=np.array(truth_rows["n"], dtype=np.int64),
        solo_count=np.array(truth_rows["solo"], dtype=np.int64),
        ua=truth_rows["ua"],
        firm=truth_rows["firm"],
        epsilon=np.array(truth_rows["eps"]),
    )
    ua_of_firm = {firm_labels[f]: ua_labels[int(firm_ua[f])] for f in range(n_f)}
    return SyntheticEconomy(
        config=config,
        corpus=corpus,
        truth=truth,
        panel_ids=panel_ids,
        staff_ids=staff_ids,
        ua_of_firm=ua_of_firm,
    )


# ---------------------------------------------------------------------------
# export


def export_economy(economy: SyntheticEconomy, out_dir: str | Path) -> list[str]:
    """Write the corpus tables; returns the file names written."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    files = []

    rows = [
        [p.patent_id, p.app_date.isoformat(), p.subgroup, ";".join(p.team), fmt_float(p.value)]
        for p in economy.corpus.patents
    ]
    write_table(out / "patents.tsv", ["patent", "date", "subgroup", "inventors", "value"], rows)
    files.append("patents.tsv")

    rows = [
        [m.inventor_id, str(m.period), m.firm_id, m.establishment_id,
         fmt_float(m.lat), fmt_float(m.lon)]
        for m in sorted(economy.corpus.membership.values(), key=lambda m: (m.inventor_id, m.period))
    ]
    write_table(out / "inventors.tsv", ["inventor", "period", "firm", "establishment", "lat", "lon"], rows)
    files.append("inventors.tsv")

    write_table(out / "citations.tsv", ["citing", "cited"],
                [[a, b] for a, b in economy.corpus.citations])
    files.append("citations.tsv")

    geo = economy.corpus.geo
    if geo.has_cells:
        rows = [
            [str(x), str(y), fmt_float(la), fmt_float(lo), fmt_float(p)]
            for x, y, la, lo, p in zip(geo.cell_x, geo.cell_y, geo.cell_lat, geo.cell_lon, geo.cell_pop)
        ]
        write_table(out / "cells.tsv", ["x", "y", "lat", "lon", "population"], rows)
        files.append("cells.tsv")
        rows = [
            [eid, str(t), ind, fmt_float(la), fmt_float(lo), fmt_float(emp), fmt_float(outp)]
            for eid, t, ind, la, lo, emp, outp in geo.establishments
        ]
        write_table(out / "establishments.tsv",
                    ["establishment", "period", "industry", "lat", "lon", "employment", "output"], rows)
        files.append("establishments.tsv")
        rows = [
            [ind, str(t), fmt_float(v)] for (ind, t), v in sorted(geo.rnd.items())
        ]
        write_table(out / "rnd.tsv", ["industry", "period", "spending"], rows)
        files.append("rnd.tsv")

    tr = economy.truth
    rows = [
        [tr.inventor_ids[k], str(int(tr.periods[k])), fmt_float(tr.ln_y[k]), fmt_float(tr.ln_kd[k]),
         str(int(tr.breadth[k])), str(int(tr.n_collab[k])), tr.ua[k], tr.firm[k]]
        for k in range(len(tr.inventor_ids))
    ]
    write_table(out / "truth.tsv",
                ["inventor", "period", "ln_y", "ln_kd", "breadth", "n_collab", "ua", "firm"], rows)
    files.append("truth.tsv")
    return files
