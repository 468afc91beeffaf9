import io
import json
import threading
import urllib.error
import urllib.request

import pytest
from PIL import Image

from pcb3dcnn.server import create_server
from pcb3dcnn.synth import synth_dataset


@pytest.fixture(scope="module")
def api(tmp_path_factory):
    root = tmp_path_factory.mktemp("annds")
    manifest = synth_dataset(root, {"normal": 1, "shoplifting": 1}, seed=0, frames=300)
    server = create_server(manifest, port=0)
    thread = threading.Thread(target=server.serve_forever, daemon=True)
    thread.start()
    base = f"http://127.0.0.1:{server.server_address[1]}"
    yield base
    server.shutdown()
    server.server_close()


def get(base, path):
    with urllib.request.urlopen(base + path) as resp:
        return resp.status, resp.read(), resp.headers.get("Content-Type")


def put(base, path, obj):
    req = urllib.request.Request(base + path, data=json.dumps(obj).encode(),
                                 method="PUT")
    try:
        with urllib.request.urlopen(req) as resp:
            return resp.status, json.loads(resp.read())
    except urllib.error.HTTPError as err:
        return err.code, json.loads(err.read())


def test_list_videos(api):
    status, body, ctype = get(api, "/api/videos")
    assert status == 200 and ctype.startswith("application/json")
    videos = json.loads(body)
    assert [v["id"] for v in videos] == ["normal_0000", "shoplifting_0000"]
    assert all(v["frame_count"] == 300 for v in videos)
    # synthetic crime videos ship annotated; normal ones are not
    assert [v["annotated"] for v in videos] == [False, True]


def test_video_detail_and_404(api):
    status, body, _ = get(api, "/api/videos/normal_0000")
    assert status == 200
    assert json.loads(body)["label"] == "normal"
    with pytest.raises(urllib.error.HTTPError) as err:
        get(api, "/api/videos/ghost")
    assert err.value.code == 404


def test_frame_png(api):
    status, body, ctype = get(api, "/api/videos/normal_0000/frames/0")
    assert status == 200 and ctype == "image/png"
    img = Image.open(io.BytesIO(body))
    assert img.size == (80, 60)


def test_frame_past_end_404(api):
    with pytest.raises(urllib.error.HTTPError) as err:
        get(api, "/api/videos/normal_0000/frames/300")
    assert err.value.code == 404


def test_annotation_round_trip(api):
    draft = {"video_id": "normal_0000", "first_appearance": 20, "ccm": 150,
             "scm": 240, "annotator": "tester"}
    status, saved = put(api, "/api/videos/normal_0000/annotation", draft)
    assert status == 200
    status, body, _ = get(api, "/api/videos/normal_0000/annotation")
    reread = json.loads(body)
    assert (reread["first_appearance"], reread["ccm"], reread["scm"]) == (20, 150, 240)
    assert reread["annotator"] == "tester"
    # list now shows the badge
    _, body, _ = get(api, "/api/videos")
    flags = {v["id"]: v["annotated"] for v in json.loads(body)}
    assert flags["normal_0000"] is True


def test_put_invalid_ordering_422_and_nothing_written(api):
    bad = {"video_id": "shoplifting_0000", "first_appearance": 10, "ccm": 150,
           "scm": 140, "annotator": "tester"}
    status, body = put(api, "/api/videos/shoplifting_0000/annotation", bad)
    assert status == 422
    assert "scm" in body["error"] or "ccm" in body["error"]
    # stored annotation still the generator's one
    _, stored, _ = get(api, "/api/videos/shoplifting_0000/annotation")
    ann = json.loads(stored)
    assert ann["scm"] >= ann["ccm"]
    assert ann["annotator"] == "synth"


def test_put_out_of_range_422(api):
    bad = {"video_id": "normal_0000", "first_appearance": 0, "ccm": 10, "scm": 300}
    status, _ = put(api, "/api/videos/normal_0000/annotation", bad)
    assert status == 422


def test_put_malformed_json_400(api):
    req = urllib.request.Request(api + "/api/videos/normal_0000/annotation",
                                 data=b"{not json", method="PUT")
    with pytest.raises(urllib.error.HTTPError) as err:
        urllib.request.urlopen(req)
    assert err.value.code == 400


def test_unknown_video_put_404(api):
    status, _ = put(api, "/api/videos/ghost/annotation",
                    {"first_appearance": 0, "ccm": 1, "scm": 2})
    assert status == 404
