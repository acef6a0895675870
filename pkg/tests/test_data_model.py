import json

import pytest
from hypothesis import given, settings, strategies as st

from condgen.data_model import (
    ConditionAttribute, Direction, EmptyDatasetError, InspectionDataset, InspectionRecord, Kind, SchemaError,
    ValidationError, ingest_csv, load_schema, normalize_direction, parse_csv, schema_to_dict, to_csv_text,
)

SCHEMA = [ConditionAttribute("PD"), ConditionAttribute("VC", Kind.RATING, 5)]


def write(tmp_path, text, name="data.csv"):
    p = tmp_path / name
    p.write_text(text, encoding="utf-8")
    return p


def test_three_row_file(tmp_path):
    p = write(tmp_path, "asset_id,inspection_year,age_years,PD,VC\n"
                        "A,2010,5,1.5,2\nA,2013,8,2.0,3\nB,2010,12,4.25,5\n")
    ds = ingest_csv(p, SCHEMA, 3)
    assert len(ds) == 3
    assert ds.records[2].values == {"PD": 4.25, "VC": 5}
    assert ds.pairs() == [(ds.records[0], ds.records[1])]


def test_rating_out_of_range_names_row(tmp_path):
    p = write(tmp_path, "asset_id,inspection_year,age_years,PD,VC\nA,2010,5,1.5,2\nB,2010,6,1.0,7\n")
    with pytest.raises(ValidationError) as info:
        ingest_csv(p, SCHEMA, 3)
    assert info.value.problems[0][0] == 3
    assert "VC" in info.value.problems[0][1]


def test_header_only_is_empty(tmp_path):
    p = write(tmp_path, "asset_id,inspection_year,age_years,PD,VC\n")
    with pytest.raises(EmptyDatasetError):
        ingest_csv(p, SCHEMA, 3)


def test_blank_file_is_empty(tmp_path):
    with pytest.raises(EmptyDatasetError):
        ingest_csv(write(tmp_path, ""), SCHEMA, 3)


def test_missing_column_is_named(tmp_path):
    p = write(tmp_path, "asset_id,inspection_year,age_years,PD\nA,2010,1,1\n")
    with pytest.raises(SchemaError, match="VC"):
        ingest_csv(p, SCHEMA, 3)


def test_every_bad_row_reported():
    text = "asset_id,inspection_year,age_years,PD,VC\nA,2010,-1,1,1\nB,20x0,1,1,1\nC,2010,1,abc,1\nD,2010,1,1,2.5\n"
    with pytest.raises(ValidationError) as info:
        parse_csv(text, SCHEMA, 3)
    assert sorted({row for row, _ in info.value.problems}) == [2, 3, 4, 5]
    assert all(reason for _, reason in info.value.problems)


def test_interval_violation():
    text = "asset_id,inspection_year,age_years,PD,VC\nA,2010,1,1,1\nA,2012,3,1,1\n"
    with pytest.raises(ValidationError, match="2 years apart"):
        parse_csv(text, SCHEMA, 3)


def test_missing_cells_stay_absent():
    ds = parse_csv("asset_id,inspection_year,age_years,PD,VC\nA,2010,1,,3\n", SCHEMA, 3)
    assert ds.records[0].values == {"VC": 3}


def test_rating_attribute_needs_levels():
    with pytest.raises(SchemaError):
        ConditionAttribute("X", Kind.RATING, 1)
    with pytest.raises(SchemaError):
        ConditionAttribute("X", Kind.NUMERICAL, 3)


def test_duplicate_attribute_names():
    with pytest.raises(SchemaError):
        InspectionDataset((ConditionAttribute("A"), ConditionAttribute("A")), (), 1)


def test_schema_file_round_trip(tmp_path):
    schema = [ConditionAttribute("T", direction=Direction.DECREASING), ConditionAttribute("R", Kind.RATING, 4)]
    p = tmp_path / "schema.json"
    p.write_text(json.dumps(schema_to_dict(schema, 3)))
    attrs, interval = load_schema(p)
    assert attrs == schema and interval == 3


def dataset(values, direction=Direction.DECREASING, kind=Kind.NUMERICAL, levels=None):
    attr = ConditionAttribute("S", kind, levels, direction)
    recs = [InspectionRecord(f"A{i}", 2010, 1.0, {"S": v}) for i, v in enumerate(values)]
    return InspectionDataset((attr,), tuple(recs), 1)


def test_increasing_attribute_untouched():
    ds, t = normalize_direction(dataset([1.0, 2.0, 3.0], Direction.INCREASING))
    assert ds.column("S") == [1.0, 2.0, 3.0]
    assert not t.pivots


def test_decreasing_attribute_reflected():
    ds, t = normalize_direction(dataset([10.0, 8.0, 5.0]))
    assert ds.column("S") == [0.0, 2.0, 5.0]
    assert t.invert(ds).column("S") == [10.0, 8.0, 5.0]


def test_decreasing_rating_reverses_levels():
    ds, t = normalize_direction(dataset([1, 2, 5], kind=Kind.RATING, levels=5))
    assert ds.column("S") == [5, 4, 1]
    assert t.invert(ds).column("S") == [1, 2, 5]


finite = st.floats(-1e6, 1e6, allow_nan=False, allow_infinity=False)


@given(st.lists(finite, min_size=1, max_size=30))
def test_normalize_round_trip(values):
    ds = dataset(values)
    flipped, t = normalize_direction(ds)
    assert t.invert(flipped).column("S") == pytest.approx(values, abs=1e-9, rel=1e-12)
    assert min(flipped.column("S")) >= 0.0


records = st.lists(
    st.tuples(st.floats(0, 80, allow_nan=False), st.one_of(st.none(), finite), st.integers(1, 5)),
    min_size=1, max_size=20,
)


@settings(max_examples=60)
@given(records)
def test_csv_round_trip_is_exact(rows):
    recs = tuple(InspectionRecord(f"A{i}", 2000 + i, age, {**({} if pd is None else {"PD": pd}), "VC": vc})
                 for i, (age, pd, vc) in enumerate(rows))
    ds = InspectionDataset(tuple(SCHEMA), recs, 1)
    text = to_csv_text(ds)
    again = parse_csv(text, SCHEMA, 1)
    assert again == ds
    assert to_csv_text(again) == text
