import json

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from pcb3dcnn import pcb
from pcb3dcnn.synth import synth_dataset
from pcb3dcnn.tensor import RngStream


def test_segment_example():
    ann = pcb.PcbAnnotation(20, 150, 240)
    seg = pcb.segment_video(300, ann)
    assert seg.pre_crime == (20, 150)
    assert seg.suspicious == (150, 240)
    assert seg.evidence == (240, 300)


def test_segment_ccm_equals_scm():
    seg = pcb.segment_video(100, pcb.PcbAnnotation(0, 50, 50))
    assert seg.suspicious == (50, 50)
    assert seg.pre_crime == (0, 50)
    assert seg.evidence == (50, 100)


def test_segment_minimal():
    seg = pcb.segment_video(3, pcb.PcbAnnotation(0, 1, 2))
    assert seg.pre_crime == (0, 1)
    assert seg.suspicious == (1, 2)
    assert seg.evidence == (2, 3)


@pytest.mark.parametrize("first,ccm,scm,t", [
    (10, 5, 20, 30),   # ccm before first
    (0, 10, 5, 30),    # scm before ccm
    (0, 10, 30, 30),   # scm out of range
    (-1, 5, 10, 30),   # negative first
    (5, 5, 10, 30),    # first == ccm
])
def test_segment_invalid_orderings(first, ccm, scm, t):
    with pytest.raises(pcb.AnnotationError):
        pcb.segment_video(t, pcb.PcbAnnotation(first, ccm, scm))


@given(st.integers(3, 500), st.data())
@settings(max_examples=100, deadline=None)
def test_partition_property(t, data):
    first = data.draw(st.integers(0, t - 3))
    ccm = data.draw(st.integers(first + 1, t - 2))
    scm = data.draw(st.integers(ccm, t - 1))
    seg = pcb.segment_video(t, pcb.PcbAnnotation(first, ccm, scm))
    ranges = [seg.pre_crime, seg.suspicious, seg.evidence]
    # contiguous, ordered, disjoint; union is [first, t)
    assert ranges[0][0] == first
    assert ranges[0][1] == ranges[1][0]
    assert ranges[1][1] == ranges[2][0]
    assert ranges[2][1] == t
    assert all(a <= b for a, b in ranges)


def test_training_frames_policy():
    ann = pcb.PcbAnnotation(20, 150, 240)
    assert pcb.pcb_training_frames(300, ann) == (20, 150)
    assert pcb.pcb_training_frames(100, None) == (0, 100)


def test_training_frames_requires_annotation_order():
    with pytest.raises(pcb.AnnotationError):
        pcb.pcb_training_frames(100, pcb.PcbAnnotation(50, 40, 60))


def test_extract_clips_counts():
    frames = RngStream(0).uniform((1, 100, 60, 80))
    clips = pcb.extract_clips(frames, (0, 100), 16, 16, "v", "normal")
    assert len(clips) == 6  # floor((100-16)/16)+1
    for c in clips:
        assert c.tensor.shape == (1, 16, 60, 80)


def test_extract_clips_exact_fit():
    frames = RngStream(1).uniform((1, 16, 60, 80))
    assert len(pcb.extract_clips(frames, (0, 16), 16, 1)) == 1


def test_extract_clips_too_short_warns(caplog):
    frames = RngStream(2).uniform((1, 10, 60, 80))
    with caplog.at_level("WARNING"):
        clips = pcb.extract_clips(frames, (0, 10), 16, 16, "shorty")
    assert clips == []
    assert any("shorty" in rec.message for rec in caplog.records)


def test_extract_clips_content_matches_source():
    frames = RngStream(3).uniform((1, 40, 60, 80))
    clips = pcb.extract_clips(frames, (5, 40), 16, 8)
    assert np.array_equal(clips[0].tensor, frames[:, 5:21])
    assert np.array_equal(clips[1].tensor, frames[:, 13:29])


# ---------------------------------------------------------------------------
# manifest


def test_manifest_empty(tmp_path):
    p = tmp_path / "m.json"
    p.write_text(json.dumps({"version": 1, "entries": []}))
    m = pcb.load_manifest(p)
    assert m.entries == []
    assert sum(m.class_counts.values()) == 0


def test_manifest_parse_error_has_line(tmp_path):
    p = tmp_path / "m.json"
    p.write_text('{"version": 1,\n "entries": [}')
    with pytest.raises(pcb.ManifestError, match=r":2"):
        pcb.load_manifest(p)


def test_manifest_rejects_bad_annotation_order(tmp_path):
    manifest = synth_dataset(tmp_path, {"normal": 1, "arson": 1}, seed=0)
    ann_file = next(tmp_path.glob("arson_*.annotation.json"))
    obj = json.loads(ann_file.read_text())
    obj["scm"] = obj["ccm"] - 1
    ann_file.write_text(json.dumps(obj))
    with pytest.raises(pcb.ManifestError, match="arson"):
        pcb.load_manifest(manifest)


def test_manifest_rejects_missing_annotation_for_crime(tmp_path):
    p = tmp_path / "m.json"
    p.write_text(json.dumps({"version": 1, "entries": [
        {"path": "x.pcv", "label": "stealing", "annotation": None}]}))
    with pytest.raises(pcb.ManifestError, match="missing annotation"):
        pcb.load_manifest(p)


def test_manifest_rejects_dangling_paths(tmp_path):
    p = tmp_path / "m.json"
    p.write_text(json.dumps({"version": 1, "entries": [
        {"path": "nope.pcv", "label": "normal", "annotation": None}]}))
    with pytest.raises(pcb.ManifestError, match="missing"):
        pcb.load_manifest(p)


def test_manifest_round_trip(tmp_path):
    manifest_path = synth_dataset(tmp_path, {"normal": 2, "abuse": 2}, seed=1)
    m = pcb.load_manifest(manifest_path)
    out = tmp_path / "copy.json"
    pcb.save_manifest(m, out)
    m2 = pcb.load_manifest(out)
    assert m.entries == m2.entries


def test_manifest_counts_from_generator(tmp_path):
    manifest_path = synth_dataset(tmp_path, 3, seed=2)
    m = pcb.load_manifest(manifest_path)
    assert m.class_counts == {label: 3 for label in pcb.CLASS_LABELS}


def test_annotation_json_round_trip(tmp_path):
    ann = pcb.PcbAnnotation(5, 10, 12, annotator="me")
    path = tmp_path / "a.json"
    pcb.save_annotation(path, ann, "vid1")
    obj = json.loads(path.read_text())
    assert obj["video_id"] == "vid1"
    back = pcb.load_annotation(path)
    assert (back.first_appearance, back.ccm, back.scm) == (5, 10, 12)
    assert back.annotator == "me"


def test_load_entry_clips_geometry(tmp_path):
    manifest_path = synth_dataset(tmp_path, {"normal": 1, "shoplifting": 1},
                                  seed=3, frames=48)
    m = pcb.load_manifest(manifest_path)
    for entry in m.entries:
        clips = pcb.load_entry_clips(m, entry, 16, 16)
        assert clips, entry.path
        for c in clips:
            assert c.tensor.shape == (1, 16, 60, 80)
            assert c.label == entry.label
    # crime video uses pre-crime range only: ccm=32 -> 2 clips; normal: 3
    crime = [e for e in m.entries if e.label == "shoplifting"][0]
    normal = [e for e in m.entries if e.label == "normal"][0]
    assert len(pcb.load_entry_clips(m, crime, 16, 16)) == 2
    assert len(pcb.load_entry_clips(m, normal, 16, 16)) == 3
