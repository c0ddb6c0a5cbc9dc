"""
Instance Service - generation, CSV ingestion and tour evaluation
"""

from pathlib import Path
from typing import List, Optional, Sequence, Union
import csv
import io
import logging
import math

from pydantic import BaseModel, Field, ValidationError

from peelbound.core.config import get_settings
from peelbound.core.errors import InstanceError, InstanceParseError
from peelbound.schemas.instance import Body, Instance
from peelbound.schemas.orbital import OrbitalElements
from peelbound.services.memo import BoundMemo
from peelbound.services.orbital import AU_KM, TWO_PI


logger = logging.getLogger(__name__)

CSV_COLUMNS = ["name", "a_km", "e", "i_rad", "raan_rad", "argp_rad", "M0_rad", "epoch_day"]
EARTH_NAME = "Earth"
EARTH_ELEMENTS = OrbitalElements(
    semi_major_axis=AU_KM,
    eccentricity=0.0167,
    inclination=0.0,
    raan=0.0,
    arg_periapsis=math.radians(102.9),
    mean_anomaly_at_epoch=0.0,
    epoch=0.0,
)

MASK64 = (1 << 64) - 1


# ==================== SYNTHETIC GENERATION ====================

class SplitMix64:
    """splitmix64 stream; uniforms use the top 53 bits of each output"""

    def __init__(self, seed: int):
        self.state = seed & MASK64

    def next_u64(self) -> int:
        self.state = (self.state + 0x9E3779B97F4A7C15) & MASK64
        z = self.state
        z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & MASK64
        z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & MASK64
        return z ^ (z >> 31)

    def uniform(self, lo: float = 0.0, hi: float = 1.0) -> float:
        return lo + (hi - lo) * ((self.next_u64() >> 11) * 2.0 ** -53)


def generate(n: int, seed: int) -> Instance:
    """
    Deterministic main-belt-like instance

    Each asteroid draws six uniforms in order: a in [2, 3.5] AU, e in [0, 0.25],
    i in [0, 10] degrees, then RAAN, argument of periapsis and mean anomaly in [0, 2pi).

    Args:
        n: Number of asteroids (>= 1)
        seed: Generator seed

    Returns:
        Instance with Earth at index 0 and asteroids A0001..Annnn

    Raises:
        InstanceError: n < 1
    """
    if n < 1:
        raise InstanceError(f"an instance needs at least one asteroid (got n={n})")
    settings = get_settings()
    rng = SplitMix64(seed)
    bodies = [Body(name=EARTH_NAME, elements=EARTH_ELEMENTS)]
    for k in range(1, n + 1):
        elements = OrbitalElements(
            semi_major_axis=rng.uniform(2.0, 3.5) * AU_KM,
            eccentricity=rng.uniform(0.0, 0.25),
            inclination=rng.uniform(0.0, math.radians(10.0)),
            raan=rng.uniform(0.0, TWO_PI),
            arg_periapsis=rng.uniform(0.0, TWO_PI),
            mean_anomaly_at_epoch=rng.uniform(0.0, TWO_PI),
            epoch=0.0,
        )
        bodies.append(Body(name=f"A{k:04d}", elements=elements))
    logger.debug(f"Generated instance n={n} seed={seed}")
    return Instance(
        bodies=bodies,
        seed=seed,
        tau_max=settings.TAU_MAX_DAYS,
        t_max=settings.T_MAX_DAYS,
    )


# ==================== CSV ====================

class ElementsRow(BaseModel):
    """One CSV row"""
    name: str = Field(..., min_length=1)
    a_km: float
    e: float
    i_rad: float
    raan_rad: float
    argp_rad: float
    M0_rad: float
    epoch_day: float = 0.0


def parse_csv(text: str, mission_epoch: Optional[float] = None) -> Instance:
    """
    Parse instance CSV text

    Epochs are normalized to days since mission start. The mission epoch is the
    Earth row's epoch when an Earth row exists, otherwise the earliest row epoch.
    Without an Earth row the default Earth elements are used.

    Raises:
        InstanceParseError: Missing column, malformed value (with line and column)
            or invalid elements
    """
    reader = csv.DictReader(io.StringIO(text))
    header = reader.fieldnames or []
    for column in CSV_COLUMNS:
        if column not in header:
            raise InstanceParseError("missing column", line=1, column=column)

    rows: List[ElementsRow] = []
    lines: List[int] = []
    for record in reader:
        line = reader.line_num
        if any(record.get(c) is None for c in CSV_COLUMNS):
            raise InstanceParseError("row has too few fields", line=line)
        try:
            rows.append(ElementsRow(**{c: record[c].strip() for c in CSV_COLUMNS}))
        except ValidationError as e:
            error = e.errors()[0]
            column = str(error["loc"][0]) if error.get("loc") else None
            raise InstanceParseError(error["msg"], line=line, column=column) from e
        lines.append(line)

    earth = [k for k, row in enumerate(rows) if row.name == EARTH_NAME]
    if len(earth) > 1:
        raise InstanceParseError("more than one Earth row", line=lines[earth[1]])
    if mission_epoch is None:
        if earth:
            mission_epoch = rows[earth[0]].epoch_day
        else:
            mission_epoch = min((row.epoch_day for row in rows), default=0.0)

    bodies: List[Body] = []
    for row, line in zip(rows, lines):
        try:
            elements = OrbitalElements(
                semi_major_axis=row.a_km,
                eccentricity=row.e,
                inclination=row.i_rad,
                raan=row.raan_rad,
                arg_periapsis=row.argp_rad,
                mean_anomaly_at_epoch=row.M0_rad,
                epoch=row.epoch_day - mission_epoch,
            )
        except ValidationError as e:
            error = e.errors()[0]
            raise InstanceParseError(error["msg"], line=line, column=_column_of(error)) from e
        body = Body(name=row.name, elements=elements)
        if row.name == EARTH_NAME:
            bodies.insert(0, body)
        else:
            bodies.append(body)
    if not earth:
        bodies.insert(0, Body(name=EARTH_NAME, elements=EARTH_ELEMENTS))

    settings = get_settings()
    try:
        return Instance(bodies=bodies, tau_max=settings.TAU_MAX_DAYS, t_max=settings.T_MAX_DAYS)
    except ValidationError as e:
        raise InstanceParseError(e.errors()[0]["msg"]) from e


_ELEMENT_COLUMNS = {
    "semi_major_axis": "a_km",
    "eccentricity": "e",
    "inclination": "i_rad",
    "raan": "raan_rad",
    "arg_periapsis": "argp_rad",
    "mean_anomaly_at_epoch": "M0_rad",
    "epoch": "epoch_day",
}


def _column_of(error: dict) -> Optional[str]:
    loc = error.get("loc") or ()
    return _ELEMENT_COLUMNS.get(str(loc[0])) if loc else None


def load_csv(path: Union[str, Path], mission_epoch: Optional[float] = None) -> Instance:
    """
    Read an instance CSV file

    Raises:
        InstanceParseError: see parse_csv
        OSError: unreadable file
    """
    text = Path(path).read_text(encoding="utf-8")
    instance = parse_csv(text, mission_epoch)
    logger.info(f"Loaded instance with {instance.n} asteroids from {path}")
    return instance


def write_csv(instance: Instance, path: Optional[Union[str, Path]] = None) -> str:
    """
    Serialize an instance; floats use repr so reading back is lossless

    Returns:
        The CSV text (also written to path when given)
    """
    buffer = io.StringIO()
    writer = csv.writer(buffer, lineterminator="\n")
    writer.writerow(CSV_COLUMNS)
    for body in instance.bodies:
        el = body.elements
        writer.writerow([body.name] + [repr(float(v)) for v in (
            el.semi_major_axis, el.eccentricity, el.inclination, el.raan,
            el.arg_periapsis, el.mean_anomaly_at_epoch, el.epoch,
        )])
    text = buffer.getvalue()
    if path is not None:
        Path(path).write_text(text, encoding="utf-8")
    return text


# ==================== TOURS ====================

def parse_tour(text: str) -> List[int]:
    """'0,3,1,2' -> [0, 3, 1, 2]"""
    try:
        return [int(part) for part in text.split(",") if part.strip()]
    except ValueError as e:
        raise InstanceError(f"tour must be comma-separated integers: {text!r}") from e


def validate_tour(instance: Instance, tour: Sequence[int]) -> List[int]:
    """
    Check that a tour starts at Earth and visits every asteroid once

    Raises:
        InstanceError: Not a permutation of 1..n after Earth
    """
    tour = list(tour)
    if not tour or tour[0] != 0:
        raise InstanceError("tour must start at Earth (0)")
    if sorted(tour[1:]) != list(range(1, instance.n + 1)):
        raise InstanceError(f"tour must visit each of the asteroids 1..{instance.n} exactly once")
    return tour


def evaluate_tour(instance: Instance, tour: Sequence[int], memo: BoundMemo) -> float:
    """
    Objective value of a complete tour via the solution trie

    Returns:
        Sum of the exact leg costs with chained departure epochs; +inf when a leg is infeasible
    """
    tour = validate_tour(instance, tour)
    cost, _ = memo.trie_evaluate(tour)
    return cost
