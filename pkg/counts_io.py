"""
Counts files: CSV with header `link,basis,intensity,n,m` behind a metadata preamble

    # distance_km=103
    # n_pulses=2000000000000
"""
import logging
from dataclasses import dataclass

import pandas as pd
from pydantic import ValidationError

from channel_model import Basis, Intensity, Link, ObservedCounts
from errors import CountsFormatError

logger = logging.getLogger(__name__)

COLUMNS = ["link", "basis", "intensity", "n", "m"]


@dataclass(frozen=True)
class CountsFile:
    counts: dict
    distance_km: float = 0.0
    n_pulses: int = 0

    def to_frame(self):
        rows = []
        for link in Link:
            for basis, intensity, n, m in self.counts[link].cells():
                rows.append({"link": link.value, "basis": basis.value, "intensity": intensity.value, "n": n, "m": m})
        df = pd.DataFrame(rows, columns=COLUMNS)
        for col in ("n", "m"):
            if (df[col] % 1 == 0).all():
                df[col] = df[col].astype("int64")
        return df


def _read_preamble(path):
    meta = {}
    with open(path) as f:
        for line in f:
            if not line.startswith("#"):
                break
            body = line[1:].strip()
            if "=" in body:
                key, value = (part.strip() for part in body.split("=", 1))
                meta[key] = value
    return meta


def _enum(kind, value, source, row):
    try:
        return kind(value)
    except ValueError:
        allowed = ", ".join(member.value for member in kind)
        raise CountsFormatError(f"{source} row {row}: {kind.__name__.lower()} {value!r} not in ({allowed})") from None


def read_counts(path):
    source = str(path)
    meta = _read_preamble(path)
    try:
        distance = float(meta.get("distance_km", 0.0))
        n_pulses = int(float(meta["n_pulses"]))
    except KeyError:
        raise CountsFormatError(f"{source}: preamble lacks '# n_pulses=...'") from None
    except ValueError as exc:
        raise CountsFormatError(f"{source}: bad preamble value ({exc})") from None
    try:
        df = pd.read_csv(path, comment="#", skipinitialspace=True)
    except (pd.errors.ParserError, pd.errors.EmptyDataError) as exc:
        raise CountsFormatError(f"{source}: {exc}") from None
    missing = [col for col in COLUMNS if col not in df.columns]
    if missing:
        raise CountsFormatError(f"{source}: missing columns {', '.join(missing)}")
    cells = {link: {} for link in Link}
    for row, record in enumerate(df.to_dict("records"), start=1):
        link = _enum(Link, str(record["link"]).strip(), source, row)
        basis = _enum(Basis, str(record["basis"]).strip(), source, row)
        intensity = _enum(Intensity, str(record["intensity"]).strip(), source, row)
        cell = f"{link.value}/{basis.value}/{intensity.value}"
        n, m = pd.to_numeric(record["n"], errors="coerce"), pd.to_numeric(record["m"], errors="coerce")
        if pd.isna(n) or pd.isna(m):
            raise CountsFormatError(f"{source} row {row}: cell {cell} has a non-numeric count")
        if n < 0 or m < 0:
            raise CountsFormatError(f"{source} row {row}: cell {cell} has a negative count")
        if m > n:
            raise CountsFormatError(f"{source} row {row}: cell {cell} has m={m} > n={n}")
        if (basis, intensity) in cells[link]:
            raise CountsFormatError(f"{source} row {row}: cell {cell} appears twice")
        cells[link][(basis, intensity)] = (float(n), float(m))
    counts = {}
    for link, link_cells in cells.items():
        if len(link_cells) != 4:
            raise CountsFormatError(f"{source}: link {link.value} needs 4 basis/intensity rows, found {len(link_cells)}")
        try:
            counts[link] = ObservedCounts.from_cells(link_cells)
        except ValidationError as exc:
            raise CountsFormatError(f"{source}: {link.value}: {exc.errors()[0]['msg']}") from None
    logger.debug("read counts for %d links from %s", len(counts), source)
    return CountsFile(counts=counts, distance_km=distance, n_pulses=n_pulses)


def write_counts(path, counts_file):
    with open(path, "w", newline="") as f:
        f.write(f"# distance_km={counts_file.distance_km:.15g}\n")
        f.write(f"# n_pulses={counts_file.n_pulses}\n")
        counts_file.to_frame().to_csv(f, index=False)
    logger.info("counts written to %s", path)
