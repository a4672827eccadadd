import os
from pathlib import Path

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy import stats

from rlhh.instances import (
    START_HOUR_PROBS, BdspInstance, FormatVersionError, InstanceError, VrptwInstance,
    dumps_instance, generate_bdsp, generate_vrptw, load_instance, loads_instance, parse_solomon,
    save_instance, truncate,
)

SOLOMON_SNIPPET = """R2_SAMPLE

VEHICLE
NUMBER     CAPACITY
  25         1000

CUSTOMER
CUST NO.  XCOORD.   YCOORD.    DEMAND   READY TIME  DUE DATE   SERVICE   TIME

    0      35         35          0          0       1000          0
    1      41         49         10        707        848         10
    2      35         17          7        143        282         10
    3      55         45         13        527        584         10
"""


def solomon_r201_path() -> Path | None:
    for d in (os.environ.get("RLHH_SOLOMON_DIR"), Path(__file__).parent / "data" / "solomon"):
        if d and (Path(d) / "r201.txt").is_file():
            return Path(d) / "r201.txt"
    return None


def test_parse_snippet():
    inst = parse_solomon(SOLOMON_SNIPPET)
    assert inst.name == "r2_sample"
    assert inst.capacity == 1000 and inst.vehicles == 25
    assert inst.n == 3
    assert inst.depot.demand == 0 and inst.depot.service == 0
    c1 = inst.customers[0]
    assert (c1.id, c1.x, c1.y, c1.demand, c1.ready, c1.due, c1.service) == (1, 41, 49, 10, 707, 848, 10)


def test_parse_rejects_inverted_window():
    bad = SOLOMON_SNIPPET.replace("143        282", "300        282")
    with pytest.raises(InstanceError, match="line 12"):
        parse_solomon(bad)


def test_parse_rejects_malformed_row():
    bad = SOLOMON_SNIPPET.replace("    3      55         45         13        527        584         10",
                                  "    3      55         45         13        527")
    with pytest.raises(InstanceError, match="line 13"):
        parse_solomon(bad)


def test_parse_requires_header():
    body = SOLOMON_SNIPPET.split("CUSTOMER", 1)[1]
    with pytest.raises(InstanceError, match="VEHICLE"):
        parse_solomon("CUSTOMER" + body)


def test_parse_rejects_capacity_below_demand():
    with pytest.raises(InstanceError, match="exceeds capacity"):
        parse_solomon(SOLOMON_SNIPPET.replace("  25         1000", "  25         12"))


@pytest.mark.skipif(solomon_r201_path() is None,
                    reason="Solomon r201.txt not available (set RLHH_SOLOMON_DIR)")
def test_r201_benchmark_file():
    inst = load_instance(solomon_r201_path())
    assert inst.n == 100
    assert inst.capacity == 1000
    assert truncate(inst, 100) == inst
    assert [c.id for c in truncate(inst, 25).customers] == list(range(1, 26))


def test_truncate_prefix_and_errors():
    inst = generate_vrptw(10, 3)
    assert truncate(inst, 10) == inst
    t = truncate(inst, 4)
    assert [c.id for c in t.customers] == [1, 2, 3, 4]
    assert t.depot == inst.depot and t.capacity == inst.capacity
    for bad in (0, 11):
        with pytest.raises(ValueError):
            truncate(inst, bad)


@given(st.integers(1, 30), st.integers(1, 30), st.integers(0, 2**31))
@settings(max_examples=40, deadline=None)
def test_truncation_monotone(m, n, seed):
    m, n = min(m, n), max(m, n)
    inst = generate_bdsp(30, seed)
    assert truncate(inst, n).trips[:m] == truncate(inst, m).trips


def test_generate_bdsp_deterministic():
    assert generate_bdsp(5, 42) == generate_bdsp(5, 42)
    assert generate_bdsp(5, 42) != generate_bdsp(5, 43)


def test_generate_bdsp_durations_and_hours():
    inst = generate_bdsp(20_000, 1)
    durations = np.array([t.duration for t in inst.trips])
    assert durations.min() >= 60 and durations.max() <= 90
    assert set(np.unique(durations)) == set(range(60, 91))
    hours = np.array([t.start // 60 for t in inst.trips])
    assert not np.isin(hours, [0, 1, 2, 3, 22, 23]).any()


def test_start_hour_table():
    assert START_HOUR_PROBS.sum() == pytest.approx(1.0)
    assert START_HOUR_PROBS[8] == pytest.approx(0.10)
    assert START_HOUR_PROBS[17] == pytest.approx(0.10)
    assert START_HOUR_PROBS[:4].sum() == 0


def test_start_hour_frequency_8am():
    inst = generate_bdsp(100_000, 2024)
    hours = np.array([t.start // 60 for t in inst.trips])
    assert abs(np.mean(hours == 8) - 0.10) <= 0.01


def test_start_hour_chi_square():
    inst = generate_bdsp(100_000, 7)
    counts = np.bincount([t.start // 60 for t in inst.trips], minlength=24)
    support = START_HOUR_PROBS > 0
    assert counts[~support].sum() == 0
    expected = START_HOUR_PROBS[support] * len(inst.trips)
    _, p = stats.chisquare(counts[support], expected)
    assert p > 0.01


def test_bdsp_invariants():
    with pytest.raises(InstanceError):
        BdspInstance("x", ())
    from rlhh.instances import Trip
    with pytest.raises(InstanceError):
        BdspInstance("x", (Trip(1, 100, 100),))
    with pytest.raises(InstanceError):
        BdspInstance("x", (Trip(1, 100, 160),), min_changeover=-1)


def test_roundtrip_bdsp(tmp_path):
    inst = generate_bdsp(25, 11)
    path = save_instance(inst, tmp_path / "a.bdsp.txt")
    assert path.read_text().startswith("FORMAT v1\n")
    assert load_instance(path) == inst


@given(st.integers(1, 15), st.integers(0, 10_000))
@settings(max_examples=30, deadline=None)
def test_roundtrip_vrptw_property(n, seed):
    inst = generate_vrptw(n, seed)
    assert loads_instance(dumps_instance(inst)) == inst


def test_load_rejects_unknown_version(tmp_path):
    text = dumps_instance(generate_bdsp(3, 1)).replace("FORMAT v1", "FORMAT v9")
    with pytest.raises(FormatVersionError):
        loads_instance(text)


def test_load_rejects_truncated_file():
    text = dumps_instance(generate_vrptw(6, 1))
    cut = "\n".join(text.splitlines()[:-3])
    with pytest.raises(InstanceError, match="schema violation"):
        loads_instance(cut)


def test_load_rejects_row_count_mismatch():
    text = dumps_instance(generate_bdsp(4, 1)).replace("TRIPS 4", "TRIPS 5")
    with pytest.raises(InstanceError, match="schema violation"):
        loads_instance(text)


def test_vrptw_invariants():
    from rlhh.instances import Node
    depot = Node(0, 0, 0, 0, 0, 100, 0)
    with pytest.raises(InstanceError):
        VrptwInstance("x", depot, (Node(1, 1, 1, 50, 0, 10, 1),), capacity=10)
    with pytest.raises(InstanceError):
        VrptwInstance("x", Node(0, 0, 0, 5, 0, 100, 0), (Node(1, 1, 1, 5, 0, 10, 1),), capacity=10)
