import json

import pytest

import tbx


def test_levenshtein_counts_code_points():
    assert tbx.levenshtein("kitten", "sitting") == 3
    assert tbx.levenshtein("café", "cafe") == 1
    assert tbx.levenshtein("", "abc") == 3


def test_fuzzy_gates():
    assert tbx.fuzzy_value_match("ISSUED FOR CONSTRUCTON", "ISSUED FOR CONSTRUCTION")
    assert not tbx.fuzzy_key_match("Scle", "Scale")


def test_iou():
    assert tbx.iou((0, 0, 10, 10), (0, 0, 10, 10)) == 1.0
    assert tbx.iou((0, 0, 10, 10), (20, 20, 5, 5)) == 0.0


def test_canonicalize_key():
    assert tbx.canonicalize_key("Drawing No.") == "drawing_number"
    assert tbx.canonicalize_key("Drg. No.") == "drawing_number"
    assert tbx.canonicalize_key("zzzz qqqq") is None


def test_parse_date():
    assert tbx.parse_date("May 1973") == "1973-05"
    assert tbx.parse_date("28.03.22") == "2022-03-28"
    assert tbx.parse_date("not a date") is None


def test_tolerant_pairs_and_merge():
    pairs = tbx.parse_tolerant_pairs('{"Scale": "1:10", "SCALE": "1:10", "Drawn by": "JB"}')
    assert ("Scale", "1:10") in pairs
    rec = json.loads(tbx.merge_pairs("d1", pairs))
    assert rec["drawing_id"] == "d1"
    assert rec["fields"]["scale"] == ["1:10"]


def test_parse_query_and_errors():
    assert "drawing_description" in tbx.parse_query('["cinema"] in "description"')
    with pytest.raises(tbx.TbxError):
        tbx.parse_query('"date" <')


def test_record_store_search(tmp_path):
    store = tbx.RecordStore(tmp_path)
    store.upsert(json.dumps({"drawing_id": "a", "fields": {"scale": ["1:10"]}}))
    store.upsert(json.dumps({"drawing_id": "b", "fields": {"scale": ["1:50"]}}))
    assert len(store) == 2
    assert store.search('"scale" = "1:10"') == ["a"]
    assert store.get("missing") is None
    reopened = tbx.RecordStore(tmp_path)
    assert reopened.ids() == ["a", "b"]


def test_markup_to_coco_validates():
    docs = [{"file_name": "sheet.pdf", "pages": [
        {"page_index": 0, "width_pt": 842, "height_pt": 595,
         "shapes": [{"rect": [600, 450, 230, 130], "label": "Title Block"}]}]}]
    coco = tbx.markup_to_coco(json.dumps(docs))
    assert tbx.validate_coco(coco) == []
    parsed = json.loads(coco)
    assert len(parsed["annotations"]) == 1
