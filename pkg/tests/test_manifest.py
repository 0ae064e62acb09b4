from __future__ import annotations

import json

import pytest

from segfuse import ManifestEntry, Split, Status, ValidationError, filter_entries, split_dataset
from segfuse.errors import FormatError
from segfuse.manifest import (
    dump_manifest,
    entry_replace,
    load_manifest,
    parse_manifest,
    save_manifest,
    weather_counts,
)


def entry(i, **kw):
    return ManifestEntry(image_id=f"img{i:04d}", image_ref=f"images/img{i:04d}.png", **kw)


class TestEntry:
    def test_unknown_weather_tag_names_tag(self):
        with pytest.raises(ValidationError, match="blizzard"):
            entry(1, weather={"rainy", "blizzard"})

    def test_finalized_requires_semantic_ref(self):
        with pytest.raises(ValidationError):
            entry(1, status=Status.FINALIZED)
        entry(1, status=Status.FINALIZED, semantic_ref="masks/img0001.png")


class TestSplitDataset:
    def test_ten_entries_split_7_1_2(self):
        out = split_dataset([entry(i) for i in range(10)], (7, 1, 2), seed=42)
        counts = {s: sum(1 for e in out if e.split is s) for s in Split}
        assert counts[Split.TRAIN] == 7
        assert counts[Split.VAL] == 1
        assert counts[Split.TEST] == 2

    def test_eleven_entries_remainder_to_train(self):
        out = split_dataset([entry(i) for i in range(11)], (7, 1, 2), seed=42)
        counts = {s: sum(1 for e in out if e.split is s) for s in Split}
        assert counts[Split.TRAIN] == 8
        assert counts[Split.VAL] == 1
        assert counts[Split.TEST] == 2

    def test_same_seed_same_assignment(self):
        entries = [entry(i) for i in range(37)]
        a = split_dataset(entries, (7, 1, 2), seed=7)
        b = split_dataset(entries, (7, 1, 2), seed=7)
        assert [e.split for e in a] == [e.split for e in b]

    def test_different_seed_differs(self):
        entries = [entry(i) for i in range(50)]
        a = split_dataset(entries, (7, 1, 2), seed=1)
        b = split_dataset(entries, (7, 1, 2), seed=2)
        assert [e.split for e in a] != [e.split for e in b]

    def test_partition_preserves_input_order(self):
        entries = [entry(i) for i in range(10)]
        out = split_dataset(entries, (7, 1, 2), seed=0)
        assert [e.image_id for e in out] == [e.image_id for e in entries]
        assert all(e.split is not Split.UNASSIGNED for e in out)

    def test_empty_rejected(self):
        with pytest.raises(ValidationError):
            split_dataset([], (7, 1, 2), seed=0)

    def test_bad_ratios_rejected(self):
        with pytest.raises(ValidationError):
            split_dataset([entry(0)], (7, 0, 2), seed=0)


class TestRoundTrip:
    def test_save_load_structurally_equal(self, tmp_path):
        entries = [
            entry(0, weather={"rainy", "night"}, status=Status.FUSED),
            entry(1, semantic_ref="masks/img0001.png", status=Status.FINALIZED),
            entry(2, extras={"camera": "roof", "route": 7}),
        ]
        path = tmp_path / "manifest.jsonl"
        save_manifest(entries, path)
        loaded = load_manifest(path)
        assert loaded == entries

    def test_unknown_fields_preserved(self, tmp_path):
        path = tmp_path / "m.jsonl"
        line = json.dumps(
            {
                "image_id": "a",
                "image": "images/a.png",
                "weather": [],
                "split": "unassigned",
                "semantic": None,
                "instance": None,
                "status": "raw",
                "exposure": 0.8,
            }
        )
        path.write_text(line + "\n")
        loaded = load_manifest(path)
        assert loaded[0].extras == {"exposure": 0.8}
        save_manifest(loaded, tmp_path / "out.jsonl")
        assert json.loads((tmp_path / "out.jsonl").read_text())["exposure"] == 0.8

    def test_untouched_records_preserved_byte_for_byte(self, tmp_path):
        # deliberately unusual key order and spacing in the raw line
        raw = '{"status": "raw",   "image": "i.png", "image_id": "x", "weather": ["fog"]}'
        (tmp_path / "m.jsonl").write_text(raw + "\n")
        loaded = load_manifest(tmp_path / "m.jsonl")
        filtered = filter_entries(loaded, weather={"fog"})
        assert dump_manifest(filtered) == raw + "\n"

    def test_modified_records_reserialized(self, tmp_path):
        raw = '{"image_id": "x", "image": "i.png"}'
        (tmp_path / "m.jsonl").write_text(raw + "\n")
        loaded = load_manifest(tmp_path / "m.jsonl")
        changed = [entry_replace(loaded[0], status=Status.FUSED)]
        assert json.loads(dump_manifest(changed))["status"] == "fused"


class TestLoadErrors:
    def test_duplicate_image_id(self):
        line = json.dumps({"image_id": "a", "image": "i.png"})
        with pytest.raises(FormatError, match="duplicate"):
            parse_manifest(line + "\n" + line + "\n")

    def test_malformed_json_names_line(self):
        good = json.dumps({"image_id": "a", "image": "i.png"})
        with pytest.raises(FormatError, match="line 2"):
            parse_manifest(good + "\nnot json\n")

    def test_unknown_weather_tag_names_tag_and_line(self):
        bad = json.dumps({"image_id": "a", "image": "i.png", "weather": ["hail"]})
        with pytest.raises(FormatError, match=r"line 1.*hail"):
            parse_manifest(bad + "\n")

    def test_missing_image_id(self):
        with pytest.raises(FormatError):
            parse_manifest(json.dumps({"image": "i.png"}) + "\n")


class TestFilter:
    def test_weather_conjunction(self):
        entries = [
            entry(0, weather={"rainy", "night"}),
            entry(1, weather={"rainy"}),
            entry(2, weather={"night"}),
        ]
        out = filter_entries(entries, weather={"rainy", "night"})
        assert [e.image_id for e in out] == ["img0000"]

    def test_empty_predicate_returns_all(self):
        entries = [entry(i) for i in range(3)]
        assert filter_entries(entries) == entries

    def test_contradictory_predicate_empty(self):
        entries = [entry(i, status=Status.RAW) for i in range(3)]
        assert filter_entries(entries, status=Status.FINALIZED) == []

    def test_callable_predicate(self):
        entries = [entry(i) for i in range(5)]
        out = filter_entries(entries, predicate=lambda e: e.image_id.endswith("3"))
        assert [e.image_id for e in out] == ["img0003"]


def test_weather_counts():
    entries = [entry(0, weather={"rainy", "droplet"}), entry(1, weather={"rainy"})]
    counts = weather_counts(entries)
    assert counts["rainy"] == 2
    assert counts["droplet"] == 1
    assert counts["sunny"] == 0
