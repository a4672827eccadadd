"""Problem instances: Solomon VRPTW parsing, random BDSP generation,
truncation and the canonical ``FORMAT v1`` text serialization."""

from __future__ import annotations

import re
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Union

import numpy as np

FORMAT_HEADER = "FORMAT v1"

# Percent of trips starting in each hour of the day, 0:00 through 23:00.
START_HOUR_PERCENT = (
    0, 0, 0, 0, 3, 3, 5, 9, 10, 8, 5, 4,
    3, 3, 4, 5, 9, 10, 8, 5, 3, 3, 0, 0,
)
START_HOUR_PROBS = np.asarray(START_HOUR_PERCENT, dtype=float) / 100.0
MIN_TRIP_DURATION = 60
MAX_TRIP_DURATION = 90


class InstanceError(ValueError):
    """Raised for invalid instance data or malformed instance files."""

    def __init__(self, message: str, line: int | None = None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


class FormatVersionError(InstanceError):
    pass


@dataclass(frozen=True)
class Node:
    id: int
    x: float
    y: float
    demand: float
    ready: float
    due: float
    service: float


@dataclass(frozen=True)
class VrptwInstance:
    name: str
    depot: Node
    customers: tuple[Node, ...]
    capacity: float
    fixed_cost: float = 0.0
    vehicles: int = 0

    kind = "VRPTW"

    def __post_init__(self):
        if self.depot.demand != 0 or self.depot.service != 0:
            raise InstanceError("depot must have zero demand and zero service time")
        if not self.customers:
            raise InstanceError("instance has no customers")
        for c in self.customers:
            if c.ready > c.due:
                raise InstanceError(f"customer {c.id}: ready time {c.ready} > due date {c.due}")
            if c.demand < 0 or c.service < 0:
                raise InstanceError(f"customer {c.id}: negative demand or service time")
        max_demand = max(c.demand for c in self.customers)
        if self.capacity < max_demand:
            raise InstanceError(f"capacity {self.capacity} below max demand {max_demand}")

    @property
    def n(self) -> int:
        return len(self.customers)


@dataclass(frozen=True)
class Trip:
    id: int
    start: int
    end: int

    @property
    def duration(self) -> int:
        return self.end - self.start


@dataclass(frozen=True)
class BdspInstance:
    name: str
    trips: tuple[Trip, ...]
    min_changeover: float = 10.0
    max_driving: float = 540.0
    max_working: float = 720.0
    max_continuous: float = 240.0
    break_threshold: float = 30.0
    fixed_cost: float = 500.0

    kind = "BDSP"

    def __post_init__(self):
        if not self.trips:
            raise InstanceError("instance has no trips")
        if self.min_changeover < 0:
            raise InstanceError("min changeover must be non-negative")
        for t in self.trips:
            if t.end <= t.start:
                raise InstanceError(f"trip {t.id}: end {t.end} not after start {t.start}")

    @property
    def n(self) -> int:
        return len(self.trips)


Instance = Union[VrptwInstance, BdspInstance]


@dataclass(frozen=True)
class InstanceRef:
    kind: str
    name: str
    n: int
    source: str = field(default="")

    def __post_init__(self):
        if self.n < 1:
            raise ValueError("instance ref needs n >= 1")

    @classmethod
    def of(cls, inst: Instance, source: str = "") -> "InstanceRef":
        return cls(inst.kind, inst.name, inst.n, source)


# --------------------------------------------------------------------------
# Solomon format
# --------------------------------------------------------------------------

def parse_solomon(text: str, name: str | None = None) -> VrptwInstance:
    """Parse a Solomon benchmark file.

    The layout is: an instance name line, a ``VEHICLE`` block whose data row
    holds ``NUMBER CAPACITY``, then a ``CUSTOMER`` block with one row of seven
    numbers per node. Node 0 is the depot.
    """
    lines = text.splitlines()
    vehicles = capacity = None
    rows: list[tuple[int, list[float]]] = []
    in_customers = False
    first_nonblank = None

    i = 0
    while i < len(lines):
        stripped = lines[i].strip()
        lineno = i + 1
        i += 1
        if not stripped:
            continue
        if first_nonblank is None:
            first_nonblank = stripped
        upper = stripped.upper()
        if upper.startswith("VEHICLE"):
            # skip to the first numeric row after the column titles
            while i < len(lines):
                parts = lines[i].split()
                i += 1
                if parts and all(re.fullmatch(r"[-+0-9.eE]+", p) for p in parts):
                    if len(parts) < 2:
                        raise InstanceError("vehicle row needs NUMBER and CAPACITY", i)
                    try:
                        vehicles = int(float(parts[0]))
                        capacity = float(parts[1])
                    except ValueError:
                        raise InstanceError("bad vehicle row", i) from None
                    break
            continue
        if upper.startswith("CUSTOMER"):
            in_customers = True
            continue
        if upper.startswith("CUST") or upper.startswith("NUMBER"):
            continue
        if in_customers:
            parts = stripped.split()
            if len(parts) != 7:
                raise InstanceError(f"expected 7 fields, got {len(parts)}", lineno)
            try:
                values = [float(p) for p in parts]
            except ValueError:
                raise InstanceError("non-numeric field", lineno) from None
            rows.append((lineno, values))

    if capacity is None:
        raise InstanceError("missing VEHICLE header with capacity")
    if not rows:
        raise InstanceError("no customer rows")

    nodes = []
    for lineno, (cid, x, y, demand, ready, due, service) in rows:
        if ready > due:
            raise InstanceError(f"node {int(cid)}: ready time {ready} > due date {due}", lineno)
        if demand < 0 or service < 0:
            raise InstanceError(f"node {int(cid)}: negative demand or service", lineno)
        if demand > capacity:
            raise InstanceError(f"node {int(cid)}: demand {demand} exceeds capacity {capacity}", lineno)
        nodes.append(Node(int(cid), x, y, demand, ready, due, service))

    depot, customers = nodes[0], tuple(nodes[1:])
    if depot.id != 0:
        raise InstanceError("first customer row must be the depot (node 0)", rows[0][0])
    if depot.demand != 0 or depot.service != 0:
        raise InstanceError("depot must have zero demand and service time", rows[0][0])
    if name is None:
        name = (first_nonblank or "solomon").split()[0].lower()
    return VrptwInstance(name, depot, customers, capacity, vehicles=vehicles or 0)


def load_solomon(path: str | Path) -> VrptwInstance:
    path = Path(path)
    return parse_solomon(path.read_text(), name=path.stem.lower())


def truncate(inst: Instance, n: int) -> Instance:
    """First ``n`` customers or trips in original order."""
    if not 1 <= n <= inst.n:
        raise ValueError(f"n must be in [1, {inst.n}], got {n}")
    if n == inst.n:
        return inst
    if isinstance(inst, VrptwInstance):
        return replace(inst, customers=inst.customers[:n])
    return replace(inst, trips=inst.trips[:n])


# --------------------------------------------------------------------------
# Generators
# --------------------------------------------------------------------------

def generate_bdsp(n: int, seed: int, name: str | None = None, **params) -> BdspInstance:
    """Random timetable of ``n`` trips with peak-hour weighted start times.

    Start hour follows ``START_HOUR_PROBS``, start minute is uniform on
    0..59 and the duration is an integer uniform on [60, 90] minutes.
    """
    if n < 1:
        raise ValueError("n must be >= 1")
    rng = np.random.default_rng(seed)
    hours = rng.choice(24, size=n, p=START_HOUR_PROBS)
    minutes = rng.integers(0, 60, size=n)
    durations = rng.integers(MIN_TRIP_DURATION, MAX_TRIP_DURATION + 1, size=n)
    trips = tuple(
        Trip(k + 1, int(h * 60 + m), int(h * 60 + m + d))
        for k, (h, m, d) in enumerate(zip(hours, minutes, durations))
    )
    return BdspInstance(name or f"bdsp_{n}_{seed}", trips, **params)


def generate_vrptw(n: int, seed: int, name: str | None = None, *, horizon: float = 230.0,
                   window: tuple[float, float] = (10.0, 60.0), capacity: float = 200.0,
                   service: float = 10.0, grid: float = 100.0, fixed_cost: float = 0.0) -> VrptwInstance:
    """Solomon-like random instance (R-type layout: uniform coordinates).

    Windows are centred on a time reachable from the depot so every singleton
    route is feasible.
    """
    if n < 1:
        raise ValueError("n must be >= 1")
    rng = np.random.default_rng(seed)
    depot = Node(0, grid / 2, grid / 2, 0.0, 0.0, horizon, 0.0)
    customers = []
    for k in range(1, n + 1):
        x, y = (float(v) for v in rng.integers(0, int(grid) + 1, size=2))
        d = float(np.hypot(x - depot.x, y - depot.y))
        latest = horizon - d - service
        width = float(rng.uniform(*window))
        center = float(rng.uniform(d, max(d, latest)))
        ready = float(np.floor(max(d, center - width / 2)))
        due = float(np.floor(min(latest, center + width / 2)))
        if due < ready:
            ready = due = float(np.floor(d + (latest - d) / 2))
        demand = float(rng.integers(1, 41))
        customers.append(Node(k, x, y, demand, ready, due, service))
    return VrptwInstance(name or f"rand_{n}_{seed}", depot, tuple(customers),
                         max(capacity, max(c.demand for c in customers)), fixed_cost=fixed_cost,
                         vehicles=n)


# --------------------------------------------------------------------------
# Canonical serialization
# --------------------------------------------------------------------------

def _num(v: float) -> str:
    return repr(float(v))


def dumps_instance(inst: Instance) -> str:
    out = [FORMAT_HEADER, f"KIND {inst.kind}", f"NAME {inst.name}"]
    if isinstance(inst, VrptwInstance):
        out += [
            f"CAPACITY {_num(inst.capacity)}",
            f"FIXED_COST {_num(inst.fixed_cost)}",
            f"VEHICLES {inst.vehicles}",
            f"NODES {inst.n + 1}",
        ]
        for nd in (inst.depot, *inst.customers):
            out.append("NODE " + " ".join(
                [str(nd.id)] + [_num(v) for v in (nd.x, nd.y, nd.demand, nd.ready, nd.due, nd.service)]))
    else:
        out += [
            f"MIN_CHANGEOVER {_num(inst.min_changeover)}",
            f"MAX_DRIVING {_num(inst.max_driving)}",
            f"MAX_WORKING {_num(inst.max_working)}",
            f"MAX_CONTINUOUS {_num(inst.max_continuous)}",
            f"BREAK_THRESHOLD {_num(inst.break_threshold)}",
            f"FIXED_COST {_num(inst.fixed_cost)}",
            f"TRIPS {inst.n}",
        ]
        out += [f"TRIP {t.id} {t.start} {t.end}" for t in inst.trips]
    out.append("END")
    return "\n".join(out) + "\n"


def loads_instance(text: str) -> Instance:
    lines = [ln.strip() for ln in text.splitlines()]
    if not lines or not lines[0].startswith("FORMAT"):
        raise InstanceError("missing FORMAT header", 1)
    if lines[0] != FORMAT_HEADER:
        raise FormatVersionError(f"unsupported format version {lines[0]!r}", 1)

    header: dict[str, tuple[int, str]] = {}
    records: list[tuple[int, list[str]]] = []
    ended = False
    for lineno, ln in enumerate(lines[1:], start=2):
        if not ln:
            continue
        if ended:
            raise InstanceError("content after END", lineno)
        key, _, rest = ln.partition(" ")
        if key == "END":
            ended = True
        elif key in ("NODE", "TRIP"):
            records.append((lineno, rest.split()))
        else:
            header[key] = (lineno, rest)
    if not ended:
        raise InstanceError("schema violation: missing END (truncated file?)")

    def get(key, conv=float):
        if key not in header:
            raise InstanceError(f"schema violation: missing {key}")
        lineno, raw = header[key]
        try:
            return conv(raw)
        except ValueError:
            raise InstanceError(f"schema violation: bad {key} value {raw!r}", lineno) from None

    kind = get("KIND", str)
    name = get("NAME", str)
    try:
        if kind == "VRPTW":
            count = get("NODES", int)
            if len(records) != count:
                raise InstanceError(f"schema violation: NODES {count} but {len(records)} rows")
            nodes = []
            for lineno, parts in records:
                if len(parts) != 7:
                    raise InstanceError("schema violation: NODE needs 7 fields", lineno)
                nodes.append(Node(int(parts[0]), *(float(p) for p in parts[1:])))
            return VrptwInstance(name, nodes[0], tuple(nodes[1:]), get("CAPACITY"),
                                 get("FIXED_COST"), get("VEHICLES", int))
        if kind == "BDSP":
            count = get("TRIPS", int)
            if len(records) != count:
                raise InstanceError(f"schema violation: TRIPS {count} but {len(records)} rows")
            trips = []
            for lineno, parts in records:
                if len(parts) != 3:
                    raise InstanceError("schema violation: TRIP needs 3 fields", lineno)
                trips.append(Trip(*(int(p) for p in parts)))
            return BdspInstance(name, tuple(trips), get("MIN_CHANGEOVER"), get("MAX_DRIVING"),
                                get("MAX_WORKING"), get("MAX_CONTINUOUS"), get("BREAK_THRESHOLD"),
                                get("FIXED_COST"))
    except (ValueError, IndexError) as exc:
        if isinstance(exc, InstanceError):
            raise
        raise InstanceError(f"schema violation: {exc}") from None
    raise InstanceError(f"schema violation: unknown KIND {kind!r}")


def save_instance(inst: Instance, path: str | Path) -> Path:
    path = Path(path)
    path.write_text(dumps_instance(inst))
    return path


def load_instance(path: str | Path) -> Instance:
    """Load a canonical instance file, or a raw Solomon file as a fallback."""
    path = Path(path)
    text = path.read_text()
    if text.lstrip().startswith("FORMAT"):
        return loads_instance(text)
    return parse_solomon(text, name=path.stem.lower())
