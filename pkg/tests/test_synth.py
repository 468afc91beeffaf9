import hashlib
from pathlib import Path

import pytest

from pcb3dcnn import pcb
from pcb3dcnn.synth import synth_dataset, default_annotation


def tree_hash(root: Path) -> dict:
    return {p.name: hashlib.sha256(p.read_bytes()).hexdigest()
            for p in sorted(root.rglob("*")) if p.is_file()}


def test_same_seed_byte_identical(tmp_path):
    synth_dataset(tmp_path / "a", 2, similarity=0.3, seed=9)
    synth_dataset(tmp_path / "b", 2, similarity=0.3, seed=9)
    assert tree_hash(tmp_path / "a") == tree_hash(tmp_path / "b")


def test_different_seed_differs(tmp_path):
    synth_dataset(tmp_path / "a", 1, seed=1)
    synth_dataset(tmp_path / "b", 1, seed=2)
    ha, hb = tree_hash(tmp_path / "a"), tree_hash(tmp_path / "b")
    assert any(ha[k] != hb[k] for k in ha if k.endswith(".pcv"))


def test_manifest_is_valid_and_counts_match(tmp_path):
    manifest_path = synth_dataset(tmp_path, {"normal": 4, "stealing": 2}, seed=5)
    m = pcb.load_manifest(manifest_path)
    assert m.class_counts["normal"] == 4
    assert m.class_counts["stealing"] == 2
    assert sum(m.class_counts.values()) == 6


def test_crime_videos_have_valid_annotations(tmp_path):
    manifest_path = synth_dataset(tmp_path, 2, seed=6, frames=40)
    m = pcb.load_manifest(manifest_path)
    for entry in m.entries:
        if entry.label == "normal":
            assert entry.annotation is None
        else:
            ann = pcb.load_annotation(m.annotation_path(entry))
            ann.validate(40, entry.path)
            # pre-crime segment long enough for at least one clip
            assert ann.ccm - ann.first_appearance >= 16


def test_default_annotation_too_short_video():
    with pytest.raises(ValueError):
        default_annotation(frames=17, clip_length=16)


def test_rejects_bad_args(tmp_path):
    with pytest.raises(ValueError):
        synth_dataset(tmp_path, {"normal": 0}, seed=0)
    with pytest.raises(ValueError):
        synth_dataset(tmp_path, {"dancing": 1}, seed=0)
    with pytest.raises(ValueError):
        synth_dataset(tmp_path, 1, similarity=1.5, seed=0)
