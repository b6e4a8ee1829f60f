"""Geographic aggregation: urban areas and local activity measures.

Distances are great-circle kilometers on a sphere of mean radius
6371.0088 km, and every radius comparison is strict (d < r).  Radius
queries go through a latitude-band index: points are sorted by
latitude, a band of width 2r selects candidates with searchsorted, and
the exact haversine filter runs inside the scan kernel.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ._kernels import EARTH_RADIUS_KM, _haversine_np, nearest_in_band, radius_weight_sums
from .errors import DataError

_KM_PER_DEG_LAT = np.pi * EARTH_RADIUS_KM / 180.0


def great_circle(lat1, lon1, lat2, lon2):
    """Great-circle distance in km (haversine; scalars or arrays)."""
    return _haversine_np(
        np.asarray(lat1, dtype=np.float64),
        np.asarray(lon1, dtype=np.float64),
        np.asarray(lat2, dtype=np.float64),
        np.asarray(lon2, dtype=np.float64),
    )


@dataclass
class PointIndex:
    """Points sorted by latitude for banded radius and nearest queries."""

    lat: np.ndarray
    lon: np.ndarray
    order: np.ndarray

    @classmethod
    def build(cls, lat: np.ndarray, lon: np.ndarray) -> "PointIndex":
        lat = np.asarray(lat, dtype=np.float64)
        lon = np.asarray(lon, dtype=np.float64)
        if lat.shape != lon.shape:
            raise DataError("latitude and longitude arrays differ in length")
        if lat.size and (np.abs(lat).max() > 90.0 or np.abs(lon).max() > 360.0):
            raise DataError("coordinates out of range")
        order = np.argsort(lat, kind="stable")
        return cls(lat=lat[order], lon=lon[order], order=order)

    def _band(self, qlat: np.ndarray, radius_km: float) -> tuple[np.ndarray, np.ndarray]:
        half = radius_km / _KM_PER_DEG_LAT
        lo = np.searchsorted(self.lat, qlat - half, side="left")
        hi = np.searchsorted(self.lat, qlat + half, side="right")
        return lo.astype(np.int64), hi.astype(np.int64)

    def radius_sum(
        self, qlat: np.ndarray, qlon: np.ndarray, weights: np.ndarray, radius_km: float
    ) -> np.ndarray:
        """Sum of point weights strictly within radius of each query."""
        qlat = np.asarray(qlat, dtype=np.float64)
        qlon = np.asarray(qlon, dtype=np.float64)
        w = np.asarray(weights, dtype=np.float64)[self.order]
        lo, hi = self._band(qlat, radius_km)
        return radius_weight_sums(qlat, qlon, self.lat, self.lon, w, lo, hi, radius_km)

    def radius_count(self, qlat, qlon, radius_km: float) -> np.ndarray:
        ones = np.ones_like(self.lat)
        qlat = np.asarray(qlat, dtype=np.float64)
        qlon = np.asarray(qlon, dtype=np.float64)
        lo, hi = self._band(qlat, radius_km)
        return radius_weight_sums(qlat, qlon, self.lat, self.lon, ones, lo, hi, radius_km)

    def nearest(self, qlat, qlon, within_km: float) -> tuple[np.ndarray, np.ndarray]:
        """Index (into the original point order) and distance of the nearest
        point not farther than ``within_km``; -1 where none qualifies."""
        qlat = np.asarray(qlat, dtype=np.float64)
        qlon = np.asarray(qlon, dtype=np.float64)
        lo, hi = self._band(qlat, within_km)
        pos, dist = nearest_in_band(qlat, qlon, self.lat, self.lon, lo, hi)
        ok = (pos >= 0) & (dist < within_km)
        out = np.full(qlat.shape, -1, dtype=np.int64)
        out[ok] = self.order[pos[ok]]
        dist = np.where(ok, dist, np.inf)
        return out, dist


# ---------------------------------------------------------------------------
# urban areas from 1 km population cells

RURAL = "rural"


@dataclass
class UrbanAreas:
    """Delineated urban areas over an integer 1 km cell grid."""

    ua_ids: tuple[str, ...]
    cell_ua: np.ndarray  # per input cell: index into ua_ids, or -1
    cell_lat: np.ndarray
    cell_lon: np.ndarray


def delineate_urban_areas(
    cell_x: np.ndarray,
    cell_y: np.ndarray,
    cell_lat: np.ndarray,
    cell_lon: np.ndarray,
    population: np.ndarray,
    min_density: float = 1000.0,
    min_population: float = 10000.0,
) -> UrbanAreas:
    """Group dense cells into urban areas.

    A cell qualifies when its population is at least ``min_density``
    (cells are 1 km^2, so population equals density); qualifying cells
    that share a grid edge are contiguous; a contiguous block is an
    urban area when its total population reaches ``min_population``.
    Area ids are assigned in order of each block's smallest (x, y)
    cell, which makes the labeling independent of input row order.
    """
    cx = np.asarray(cell_x, dtype=np.int64)
    cy = np.asarray(cell_y, dtype=np.int64)
    pop = np.asarray(population, dtype=np.float64)
    n = cx.shape[0]
    dense = np.flatnonzero(pop >= min_density)
    coord_to_row = {}
    for r in dense:
        key = (int(cx[r]), int(cy[r]))
        if key in coord_to_row:
            raise DataError(f"duplicate grid cell at {key}")
        coord_to_row[key] = int(r)

    parent = {int(r): int(r) for r in dense}

    def find(a: int) -> int:
        while parent[a] != a:
            parent[a] = parent[parent[a]]
            a = parent[a]
        return a

    for r in dense:
        x, y = int(cx[r]), int(cy[r])
        for nb in ((x + 1, y), (x, y + 1)):
            other = coord_to_row.get(nb)
            if other is not None:
                ra, rb = find(int(r)), find(other)
                if ra != rb:
                    parent[ra] = rb

    blocks: dict[int, list[int]] = {}
    for r in dense:
        blocks.setdefault(find(int(r)), []).append(int(r))

    qualified = []
    for rows in blocks.values():
        if pop[rows].sum() >= min_population:
            anchor = min((int(cx[r]), int(cy[r])) for r in rows)
            qualified.append((anchor, sorted(rows)))
    qualified.sort()

    cell_ua = np.full(n, -1, dtype=np.int64)
    ua_ids = []
    for k, (_, rows) in enumerate(qualified):
        ua_ids.append(f"UA{k:04d}")
        cell_ua[rows] = k
    return UrbanAreas(
        ua_ids=tuple(ua_ids),
        cell_ua=cell_ua,
        cell_lat=np.asarray(cell_lat, dtype=np.float64),
        cell_lon=np.asarray(cell_lon, dtype=np.float64),
    )


def assign_urban_area(
    uas: UrbanAreas, lat: np.ndarray, lon: np.ndarray, buffer_km: float = 10.0
) -> list[str]:
    """Label each location with the urban area of the nearest member
    cell within ``buffer_km``, or ``"rural"`` when none is close."""
    member = np.flatnonzero(uas.cell_ua >= 0)
    labels = [RURAL] * len(np.asarray(lat))
    if member.size == 0:
        return labels
    idx = PointIndex.build(uas.cell_lat[member], uas.cell_lon[member])
    pos, _ = idx.nearest(lat, lon, buffer_km)
    for q, p in enumerate(pos):
        if p >= 0:
            labels[q] = uas.ua_ids[int(uas.cell_ua[member[p]])]
    return labels


# ---------------------------------------------------------------------------
# neighborhood activity aggregates


def local_inventors(
    lat: np.ndarray,
    lon: np.ndarray,
    neighbor_lists: list[np.ndarray],
    radius_km: float = 1.0,
) -> np.ndarray:
    """Inventors strictly within radius, excluding self and collaborators.

    ``neighbor_lists[q]`` holds the point indices of inventor q's
    collaborators; the count removes them (and q itself, distance 0)
    from the raw radius count so the aggregate reflects inventors one
    is *not* already working with.
    """
    lat = np.asarray(lat, dtype=np.float64)
    lon = np.asarray(lon, dtype=np.float64)
    idx = PointIndex.build(lat, lon)
    total = idx.radius_count(lat, lon, radius_km)
    out = total - 1.0  # self always sits at distance zero
    for q, neigh in enumerate(neighbor_lists):
        if len(neigh):
            d = great_circle(lat[q], lon[q], lat[neigh], lon[neigh])
            out[q] -= int((d < radius_km).sum())
    if (out < 0).any():
        raise DataError("inventor exclusion produced a negative local count")
    return out


def local_rnd(
    qlat: np.ndarray,
    qlon: np.ndarray,
    est_lat: np.ndarray,
    est_lon: np.ndarray,
    est_employment_prev: np.ndarray,
    est_industry: list[str],
    industry_rnd_prev: dict[str, float],
    radius_km: float = 1.0,
) -> np.ndarray:
    """Local R&D exposure: previous-period industry R&D spending times
    previous-period establishment employment, summed within radius."""
    try:
        v = np.array([industry_rnd_prev[m] for m in est_industry], dtype=np.float64)
    except KeyError as exc:
        raise DataError(f"no prior-period R&D value for industry {exc.args[0]!r}") from None
    w = v * np.asarray(est_employment_prev, dtype=np.float64)
    idx = PointIndex.build(est_lat, est_lon)
    return idx.radius_sum(qlat, qlon, w, radius_km)


def local_activity(
    qlat: np.ndarray,
    qlon: np.ndarray,
    plat: np.ndarray,
    plon: np.ndarray,
    weights: np.ndarray,
    radius_km: float,
) -> np.ndarray:
    """Weighted activity (employment, output, population) within radius."""
    idx = PointIndex.build(plat, plon)
    return idx.radius_sum(qlat, qlon, weights, radius_km)
