"""Delimited-text corpus files, key-value configs, and run manifests.

All tables are tab-separated with a single header line naming the
columns.  Multi-valued fields (patent inventor lists) join entries
with ``;``.  Floats are written with ``%.12g`` so that re-running a
deterministic computation reproduces files byte for byte; manifests
record a hash of the canonicalized configuration, the seed, and the
hash of every output file, and contain no timestamps for the same
reason.

Period boundaries come from the configuration as a list of calendar
years: ``period_breaks = 2000,2005,2010,2020`` makes everything before
2000 the pre-sample period 0, the two five-year windows periods 1 and
2 (the estimation panel), and 2010-2019 the post-sample period 3.
"""

from __future__ import annotations

import csv
import datetime as dt
import hashlib
from dataclasses import dataclass, field
from pathlib import Path
from typing import NamedTuple

from .errors import ConfigError, DataError

DELIM = "\t"
LIST_SEP = ";"


def fmt_float(x: float) -> str:
    return "%.12g" % float(x)


# ---------------------------------------------------------------------------
# generic table reading/writing


def read_table(path: str | Path, required: list[str]) -> list[tuple[int, dict[str, str]]]:
    """Read a TSV with a header line.

    Returns (line number, row dict) pairs so that callers can report
    errors with the file position; blank lines are skipped.
    """
    path = Path(path)
    if not path.exists():
        raise DataError(f"{path}: file not found")
    rows = []
    with open(path, newline="") as fh:
        reader = csv.reader(fh, delimiter=DELIM)
        try:
            header = next(reader)
        except StopIteration:
            raise DataError(f"{path}:1: empty file, expected a header line") from None
        missing = [c for c in required if c not in header]
        if missing:
            raise DataError(f"{path}:1: missing columns: {', '.join(missing)}")
        for lineno, rec in enumerate(reader, start=2):
            if not rec or (len(rec) == 1 and not rec[0].strip()):
                continue
            if len(rec) != len(header):
                raise DataError(
                    f"{path}:{lineno}: expected {len(header)} fields, found {len(rec)}"
                )
            rows.append((lineno, {h: v for h, v in zip(header, rec)}))
    return rows


def write_table(path: str | Path, header: list[str], rows: list[list[str]]) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, delimiter=DELIM, lineterminator="\n")
        writer.writerow(header)
        writer.writerows(rows)


def _parse_float(path: Path, lineno: int, col: str, raw: str) -> float:
    try:
        return float(raw)
    except ValueError:
        raise DataError(f"{path}:{lineno}: col {col}: not a number: {raw!r}") from None


def _parse_int(path: Path, lineno: int, col: str, raw: str) -> int:
    try:
        return int(raw)
    except ValueError:
        raise DataError(f"{path}:{lineno}: col {col}: not an integer: {raw!r}") from None


def _parse_date(path: Path, lineno: int, col: str, raw: str) -> dt.date:
    try:
        return dt.date.fromisoformat(raw)
    except ValueError:
        raise DataError(f"{path}:{lineno}: col {col}: not an ISO date: {raw!r}") from None


# ---------------------------------------------------------------------------
# corpus records


class PatentRecord(NamedTuple):
    patent_id: str
    app_date: dt.date
    subgroup: str
    team: tuple[str, ...]
    period: int
    value: float | None = None


class MemberRecord(NamedTuple):
    inventor_id: str
    period: int
    firm_id: str
    establishment_id: str
    lat: float
    lon: float


@dataclass
class GeoTables:
    cell_x: list[int] = field(default_factory=list)
    cell_y: list[int] = field(default_factory=list)
    cell_lat: list[float] = field(default_factory=list)
    cell_lon: list[float] = field(default_factory=list)
    cell_pop: list[float] = field(default_factory=list)
    # establishment census rows: (id, period, industry, lat, lon, employment, output)
    establishments: list[tuple[str, int, str, float, float, float, float]] = field(
        default_factory=list
    )
    # industry R&D spending per period
    rnd: dict[tuple[str, int], float] = field(default_factory=dict)

    @property
    def has_cells(self) -> bool:
        return bool(self.cell_x)


@dataclass
class Corpus:
    """Everything ingested for one run."""

    period_breaks: list[int]
    patents: list[PatentRecord]
    membership: dict[tuple[str, int], MemberRecord]
    citations: list[tuple[str, str]]
    geo: GeoTables = field(default_factory=GeoTables)

    def period_of(self, date: dt.date) -> int:
        if date.year < self.period_breaks[0]:
            return 0
        for k in range(len(self.period_breaks) - 1):
            if self.period_breaks[k] <= date.year < self.period_breaks[k + 1]:
                return k + 1
        raise DataError(f"date {date.isoformat()} falls outside the configured periods")

    def estimation_periods(self) -> tuple[int, int]:
        return (1, 2)

    def slice(self, period: int):
        """Patent columns for one period: ids, teams, subgroups, dates, values."""
        ids, teams, subs, dates = [], [], [], []
        values: dict[str, float] = {}
        for p in self.patents:
            if p.period == period:
                ids.append(p.patent_id)
                teams.append(p.team)
                subs.append(p.subgroup)
                dates.append(p.app_date)
                if p.value is not None:
                    values[p.patent_id] = p.value
        return ids, teams, subs, dates, values

    def slices(self) -> dict[int, tuple[list, list, list, list, dict]]:
        """One pass over the corpus: ``slice`` columns for every period."""
        out: dict[int, tuple[list, list, list, list, dict]] = {}
        for p in self.patents:
            cols = out.setdefault(p.period, ([], [], [], [], {}))
            cols[0].append(p.patent_id)
            cols[1].append(p.team)
            cols[2].append(p.subgroup)
            cols[3].append(p.app_date)
            if p.value is not None:
                cols[4][p.patent_id] = p.value
        return out

    def inventor_firms(self) -> dict[str, set[str]]:
        """Firm affiliations of each inventor across all periods."""
        out: dict[str, set[str]] = {}
        for (inv, _), rec in self.membership.items():
            out.setdefault(inv, set()).add(rec.firm_id)
        return out

    def validate(self) -> dict[str, int]:
        """Cross-file consistency checks; returns summary counts.

        Patents in the estimation periods must have a membership row
        for every team member in the patent's period.  Citations to
        patents outside the corpus are tolerated (counted here, logged
        by the caller); citing patents outside the corpus likewise.
        """
        est = set(self.estimation_periods())
        for p in self.patents:
            if p.period in est:
                for inv in p.team:
                    if (inv, p.period) not in self.membership:
                        raise DataError(
                            f"patent {p.patent_id!r}: inventor {inv!r} has no membership row"
                            f" for period {p.period}"
                        )
        known = {p.patent_id for p in self.patents}
        ext_citing = sum(1 for c, _ in self.citations if c not in known)
        ext_cited = sum(1 for _, c in self.citations if c not in known)
        return {
            "patents": len(self.patents),
            "membership_rows": len(self.membership),
            "citations": len(self.citations),
            "external_citing": ext_citing,
            "external_cited": ext_cited,
        }


# ---------------------------------------------------------------------------
# readers


def read_patents(path: str | Path, period_of, require_value: bool = False) -> list[PatentRecord]:
    path = Path(path)
    cols = ["patent", "date", "subgroup", "inventors"]
    out = []
    seen: set[str] = set()
    for lineno, row in read_table(path, cols):
        pid = row["patent"]
        if pid in seen:
            raise DataError(f"{path}:{lineno}: col patent: duplicate id {pid!r}")
        seen.add(pid)
        date = _parse_date(path, lineno, "date", row["date"])
        team = tuple(sorted({s for s in row["inventors"].split(LIST_SEP) if s}))
        if not team:
            raise DataError(f"{path}:{lineno}: col inventors: empty inventor list")
        value = None
        if "value" in row and row["value"] != "":
            value = _parse_float(path, lineno, "value", row["value"])
            if value < 0:
                raise DataError(f"{path}:{lineno}: col value: negative value")
        if require_value and value is None:
            raise DataError(f"{path}:{lineno}: col value: required but missing")
        out.append(
            PatentRecord(
                patent_id=pid,
                app_date=date,
                subgroup=row["subgroup"],
                team=team,
                period=period_of(date),
                value=value,
            )
        )
    return out


def read_membership(path: str | Path) -> dict[tuple[str, int], MemberRecord]:
    path = Path(path)
    out: dict[tuple[str, int], MemberRecord] = {}
    for lineno, row in read_table(path, ["inventor", "period", "firm", "establishment", "lat", "lon"]):
        key = (row["inventor"], _parse_int(path, lineno, "period", row["period"]))
        if key in out:
            raise DataError(
                f"{path}:{lineno}: duplicate membership row for inventor {key[0]!r}"
                f" period {key[1]}"
            )
        out[key] = MemberRecord(
            inventor_id=key[0],
            period=key[1],
            firm_id=row["firm"],
            establishment_id=row["establishment"],
            lat=_parse_float(path, lineno, "lat", row["lat"]),
            lon=_parse_float(path, lineno, "lon", row["lon"]),
        )
    return out


def read_citations(path: str | Path) -> list[tuple[str, str]]:
    path = Path(path)
    return [(r["citing"], r["cited"]) for _, r in read_table(path, ["citing", "cited"])]


def read_geo_tables(
    cells_path: str | Path | None,
    establishments_path: str | Path | None,
    rnd_path: str | Path | None,
) -> GeoTables:
    geo = GeoTables()
    if cells_path is not None:
        path = Path(cells_path)
        for lineno, row in read_table(path, ["x", "y", "lat", "lon", "population"]):
            geo.cell_x.append(_parse_int(path, lineno, "x", row["x"]))
            geo.cell_y.append(_parse_int(path, lineno, "y", row["y"]))
            geo.cell_lat.append(_parse_float(path, lineno, "lat", row["lat"]))
            geo.cell_lon.append(_parse_float(path, lineno, "lon", row["lon"]))
            geo.cell_pop.append(_parse_float(path, lineno, "population", row["population"]))
    if establishments_path is not None:
        path = Path(establishments_path)
        cols = ["establishment", "period", "industry", "lat", "lon", "employment", "output"]
        for lineno, row in read_table(path, cols):
            geo.establishments.append(
                (
                    row["establishment"],
                    _parse_int(path, lineno, "period", row["period"]),
                    row["industry"],
                    _parse_float(path, lineno, "lat", row["lat"]),
                    _parse_float(path, lineno, "lon", row["lon"]),
                    _parse_float(path, lineno, "employment", row["employment"]),
                    _parse_float(path, lineno, "output", row["output"]),
                )
            )
    if rnd_path is not None:
        path = Path(rnd_path)
        for lineno, row in read_table(path, ["industry", "period", "spending"]):
            key = (row["industry"], _parse_int(path, lineno, "period", row["period"]))
            if key in geo.rnd:
                raise DataError(f"{path}:{lineno}: duplicate R&D row for {key}")
            geo.rnd[key] = _parse_float(path, lineno, "spending", row["spending"])
    return geo


# ---------------------------------------------------------------------------
# key = value configuration files


def parse_kv_text(text: str, source: str = "<config>") -> dict[str, str]:
    out: dict[str, str] = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"{source}:{lineno}: expected 'key = value', got {raw!r}")
        key, value = (part.strip() for part in line.split("=", 1))
        if not key:
            raise ConfigError(f"{source}:{lineno}: empty key")
        if key in out:
            raise ConfigError(f"{source}:{lineno}: duplicate key {key!r}")
        out[key] = value
    return out


def parse_kv_file(path: str | Path) -> dict[str, str]:
    path = Path(path)
    if not path.exists():
        raise ConfigError(f"{path}: config file not found")
    return parse_kv_text(path.read_text(), source=str(path))


def kv_get(mapping: dict[str, str], key: str, cast, default):
    if key not in mapping:
        return default
    raw = mapping[key]
    try:
        if cast is bool:
            if raw.lower() in ("1", "true", "yes", "on"):
                return True
            if raw.lower() in ("0", "false", "no", "off"):
                return False
            raise ValueError(raw)
        return cast(raw)
    except (TypeError, ValueError):
        raise ConfigError(f"config key {key!r}: cannot parse {raw!r}") from None


def reject_unknown_keys(mapping: dict[str, str], known: set[str]) -> None:
    unknown = sorted(set(mapping) - known)
    if unknown:
        raise ConfigError("unknown config keys: " + ", ".join(unknown))


def config_hash(mapping: dict[str, str]) -> str:
    canon = "\n".join(f"{k} = {mapping[k]}" for k in sorted(mapping))
    return hashlib.sha256(canon.encode()).hexdigest()


# ---------------------------------------------------------------------------
# manifests


def file_sha256(path: str | Path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 16), b""):
            h.update(chunk)
    return h.hexdigest()


def write_manifest(out_dir: str | Path, cfg_hash: str, seed: int, files: list[str]) -> Path:
    """Record config hash, seed, and output hashes; no timestamps."""
    out_dir = Path(out_dir)
    lines = [f"config_hash = {cfg_hash}", f"seed = {seed}"]
    for name in sorted(files):
        lines.append(f"sha256 {name} = {file_sha256(out_dir / name)}")
    path = out_dir / "manifest.txt"
    path.write_text("\n".join(lines) + "\n")
    return path
