import csv
import io
import json

import numpy as np
import pytest

from app.core.exceptions import InstanceFormatError, InvalidParameterError
from app.core.metric import build_metric
from app.services.generator_service import make_rng, realworld_standin
from app.services.instance_service import (
    load_instance,
    load_realworld,
    make_instance,
    normalize_to_unit_window,
    save_instance,
    save_solution,
)
from app.services.solver_service import solve_optimal

THREE_LOCATIONS = (
    '{"version":1,"metric":{"kind":"euclidean-2d","points":[[0.0,0.0],[3.0,4.0],[0.5,0.25]]},'
    '"facility_costs":[0.1,0.2,0.30000000000000004],"clients":[1,2,0]}\n'
)


def test_load_minimal_document():
    inst = load_instance(b'{"version":1,"metric":{"kind":"euclidean-2d","points":[[0.5,0.5]]},"facility_costs":[2.0],"clients":[3]}')
    assert inst.n == 1
    assert inst.clients.tolist() == [3]


def test_round_trip_of_canonical_document():
    inst = load_instance(THREE_LOCATIONS)
    assert inst.distances[0, 1] == 5.0
    assert save_instance(inst).decode("utf-8") == THREE_LOCATIONS


def test_round_trip_preserves_floats_bit_exactly():
    rng = make_rng(9)
    inst = make_instance(build_metric(rng.random((25, 2))), rng.random(25), rng.integers(0, 9, 25))
    again = load_instance(save_instance(inst))
    assert np.array_equal(again.metric.points, inst.metric.points)
    assert np.array_equal(again.facility_costs, inst.facility_costs)
    assert np.array_equal(again.clients, inst.clients)
    assert np.array_equal(again.distances, inst.distances)


def test_matrix_document_round_trip():
    doc = {
        "version": 1,
        "metric": {"kind": "matrix", "distances": [[0.0, 1.0], [1.0, 0.0]]},
        "facility_costs": [1.0, 3.0],
        "clients": [1, 1],
    }
    inst = load_instance(json.dumps(doc))
    assert inst.metric.kind == "matrix"
    assert json.loads(save_instance(inst)) == doc


def test_asymmetric_matrix_is_rejected_with_location():
    doc = {
        "version": 1,
        "metric": {"kind": "matrix", "distances": [[0.0, 1.0], [2.0, 0.0]]},
        "facility_costs": [1.0, 1.0],
        "clients": [1, 1],
    }
    with pytest.raises(InstanceFormatError) as exc:
        load_instance(json.dumps(doc))
    assert exc.value.diagnostics[0]["loc"] == ["metric", "distances", 0, 1]


@pytest.mark.parametrize(
    "field, value",
    [("facility_costs", [-1.0]), ("clients", [-2]), ("clients", [1, 2]), ("version", 2)],
)
def test_schema_violations_produce_field_diagnostics(field, value):
    doc = {"version": 1, "metric": {"kind": "euclidean-2d", "points": [[0.0, 0.0]]}, "facility_costs": [1.0], "clients": [1]}
    doc[field] = value
    with pytest.raises(InstanceFormatError) as exc:
        load_instance(json.dumps(doc))
    assert exc.value.diagnostics
    assert all("loc" in d and "msg" in d for d in exc.value.diagnostics)


def test_malformed_json_is_rejected():
    with pytest.raises(InstanceFormatError):
        load_instance(b"{not json")


def test_make_instance_checks_lengths():
    with pytest.raises(InvalidParameterError):
        make_instance(build_metric([(0, 0), (1, 0)]), [1.0], [1, 1])


def test_save_solution_document(line_instance):
    inst = line_instance([0.0, 1.0], [1.0, 3.0], [1, 1])
    doc = json.loads(save_solution(solve_optimal(inst)))
    assert doc["algorithm"] == "optimal"
    assert doc["assignment"] == [0, 0]
    assert doc["capacities"] == {"0": 2.0}
    assert doc["trace"][0]["connected"] == 2
    assert "independent_set" not in doc


def test_normalize_two_points_to_unit_corners():
    out = normalize_to_unit_window(np.array([[0.0, 0.0], [10.0, 10.0]]))
    assert out.tolist() == [[0.0, 0.0], [1.0, 1.0]]


def test_normalize_preserves_aspect_and_centers():
    out = normalize_to_unit_window(np.array([[0.0, 0.0], [10.0, 5.0]]))
    assert out.tolist() == [[0.0, 0.25], [1.0, 0.75]]


def test_normalize_degenerate_box():
    out = normalize_to_unit_window(np.array([[3.0, 3.0], [3.0, 3.0], [3.0, 3.0]]))
    assert np.all(out == 0.5)


def test_load_realworld_table():
    table = "id,x,y,clients\n0,0,0,3\n1,10,10,0\n"
    inst = load_realworld(table, cost_range=(0.1, 0.3), seed=4)
    assert inst.n == 2
    assert inst.metric.points.tolist() == [[0.0, 0.0], [1.0, 1.0]]
    assert inst.clients.tolist() == [3, 0]
    assert np.all((inst.facility_costs >= 0.1) & (inst.facility_costs <= 0.3))
    again = load_realworld(table, cost_range=(0.1, 0.3), seed=4)
    assert np.array_equal(again.facility_costs, inst.facility_costs)


def test_load_realworld_standin_has_431_locations():
    data = realworld_standin(seed=0)
    rows = list(csv.DictReader(io.StringIO(data.decode("utf-8"))))
    assert len(rows) == 431
    inst = load_realworld(data)
    assert inst.n == 431
    assert inst.metric.points.min() >= 0.0
    assert inst.metric.points.max() <= 1.0


@pytest.mark.parametrize(
    "table",
    ["id,x,y,clients\n", "id,x,y\n0,1,2\n", "id,x,y,clients\n0,abc,1,2\n", "id,x,y,clients\n0,1,1,-3\n"],
)
def test_load_realworld_rejects_bad_tables(table):
    with pytest.raises(InstanceFormatError):
        load_realworld(table)
