"""HTTP service backing the annotation UI.

REST API (JSON over HTTP):
  GET /api/videos                      list videos with annotation status
  GET /api/videos/{id}                 one video's details
  GET /api/videos/{id}/frames/{n}      single frame as PNG
  GET /api/videos/{id}/annotation      stored annotation JSON
  PUT /api/videos/{id}/annotation      validate and persist an annotation

Static UI assets are served at /.  All ordering-invariant validation happens
server-side; writes are atomic and serialized per video id.
"""

from __future__ import annotations

import io
import json
import logging
import re
import threading
from functools import lru_cache
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer
from pathlib import Path

from PIL import Image

from .pcb import (AnnotationError, DatasetManifest, annotation_from_json,
                  load_annotation, load_manifest, save_annotation)
from .video import load_video_frames

log = logging.getLogger(__name__)

_STATIC_TYPES = {
    ".html": "text/html; charset=utf-8",
    ".js": "text/javascript; charset=utf-8",
    ".css": "text/css; charset=utf-8",
    ".map": "application/json",
    ".png": "image/png",
    ".svg": "image/svg+xml",
}


class AnnotationService:
    """Manifest-backed video store shared by all request handler threads."""

    def __init__(self, manifest_path):
        self.manifest_path = Path(manifest_path)
        self.manifest: DatasetManifest = load_manifest(self.manifest_path)
        self.entries = {Path(e.path).stem: e for e in self.manifest.entries}
        self._locks: dict[str, threading.Lock] = {}
        self._locks_guard = threading.Lock()

    def _lock(self, video_id: str) -> threading.Lock:
        with self._locks_guard:
            return self._locks.setdefault(video_id, threading.Lock())

    @lru_cache(maxsize=8)
    def _frames(self, video_id: str):
        entry = self.entries[video_id]
        frames, _fps = load_video_frames(self.manifest.video_path(entry))
        return frames

    def annotation_path(self, video_id: str) -> Path:
        entry = self.entries[video_id]
        p = self.manifest.annotation_path(entry)
        if p is None:
            p = self.manifest.video_path(entry).with_suffix(".annotation.json")
        return p

    def video_info(self, video_id: str) -> dict:
        entry = self.entries[video_id]
        frames = self._frames(video_id)
        return {
            "id": video_id,
            "label": entry.label,
            "frame_count": int(frames.shape[0]),
            "height": int(frames.shape[1]),
            "width": int(frames.shape[2]),
            "annotated": self.annotation_path(video_id).exists(),
        }

    def list_videos(self) -> list[dict]:
        return [self.video_info(vid) for vid in sorted(self.entries)]

    def frame_png(self, video_id: str, n: int) -> bytes | None:
        frames = self._frames(video_id)
        if not 0 <= n < frames.shape[0]:
            return None
        arr = frames[n]
        img = Image.fromarray(arr[:, :, 0] if arr.shape[2] == 1 else arr)
        buf = io.BytesIO()
        img.save(buf, format="PNG")
        return buf.getvalue()

    def get_annotation(self, video_id: str) -> dict | None:
        path = self.annotation_path(video_id)
        if not path.exists():
            return None
        return load_annotation(path).to_json(video_id)

    def put_annotation(self, video_id: str, body: dict) -> dict:
        """Raises AnnotationError on invariant violation; nothing is written."""
        ann = annotation_from_json(body)
        frame_count = int(self._frames(video_id).shape[0])
        ann.validate(frame_count, video_id)
        with self._lock(video_id):
            save_annotation(self.annotation_path(video_id), ann, video_id)
        return ann.to_json(video_id)


_ROUTES = [
    (re.compile(r"^/api/videos/?$"), "videos"),
    (re.compile(r"^/api/videos/([^/]+)/?$"), "video"),
    (re.compile(r"^/api/videos/([^/]+)/frames/(\d+)$"), "frame"),
    (re.compile(r"^/api/videos/([^/]+)/annotation$"), "annotation"),
]


class _Handler(BaseHTTPRequestHandler):
    service: AnnotationService = None
    ui_dir: Path | None = None

    def log_message(self, fmt, *args):
        log.debug("%s " + fmt, self.client_address[0], *args)

    def _send(self, status: int, body: bytes, content_type: str) -> None:
        self.send_response(status)
        self.send_header("Content-Type", content_type)
        self.send_header("Content-Length", str(len(body)))
        self.end_headers()
        self.wfile.write(body)

    def _json(self, status: int, obj) -> None:
        self._send(status, json.dumps(obj).encode(), "application/json")

    def _match(self):
        path = self.path.split("?", 1)[0]
        for pattern, name in _ROUTES:
            m = pattern.match(path)
            if m:
                return name, m.groups()
        return None, ()

    def do_GET(self):
        name, groups = self._match()
        try:
            if name == "videos":
                return self._json(200, self.service.list_videos())
            if name and groups and groups[0] not in self.service.entries:
                return self._json(404, {"error": f"unknown video {groups[0]!r}"})
            if name == "video":
                return self._json(200, self.service.video_info(groups[0]))
            if name == "frame":
                png = self.service.frame_png(groups[0], int(groups[1]))
                if png is None:
                    return self._json(404, {"error": "frame index past end"})
                return self._send(200, png, "image/png")
            if name == "annotation":
                ann = self.service.get_annotation(groups[0])
                if ann is None:
                    return self._json(404, {"error": "not annotated"})
                return self._json(200, ann)
        except Exception as exc:  # pragma: no cover - defensive
            log.exception("request failed")
            return self._json(500, {"error": str(exc)})
        self._serve_static(self.path.split("?", 1)[0])

    def do_PUT(self):
        name, groups = self._match()
        if name != "annotation":
            return self._json(404, {"error": "no such endpoint"})
        if groups[0] not in self.service.entries:
            return self._json(404, {"error": f"unknown video {groups[0]!r}"})
        try:
            length = int(self.headers.get("Content-Length", 0))
            body = json.loads(self.rfile.read(length) or b"{}")
        except json.JSONDecodeError as exc:
            return self._json(400, {"error": f"bad JSON: {exc}"})
        try:
            saved = self.service.put_annotation(groups[0], body)
        except AnnotationError as exc:
            return self._json(422, {"error": str(exc)})
        self._json(200, saved)

    def _serve_static(self, path: str) -> None:
        if self.ui_dir is None:
            return self._json(404, {"error": "no UI assets configured"})
        rel = path.lstrip("/") or "index.html"
        target = (self.ui_dir / rel).resolve()
        if not str(target).startswith(str(self.ui_dir.resolve())) or not target.is_file():
            return self._json(404, {"error": f"no such asset {rel!r}"})
        ctype = _STATIC_TYPES.get(target.suffix, "application/octet-stream")
        self._send(200, target.read_bytes(), ctype)


def create_server(manifest_path, port: int, ui_dir=None,
                  host: str = "127.0.0.1") -> ThreadingHTTPServer:
    service = AnnotationService(manifest_path)
    handler = type("Handler", (_Handler,), {
        "service": service,
        "ui_dir": Path(ui_dir) if ui_dir else None,
    })
    return ThreadingHTTPServer((host, port), handler)


def serve(manifest_path, port: int, ui_dir=None, host: str = "127.0.0.1") -> None:
    server = create_server(manifest_path, port, ui_dir, host)
    log.info("annotation server on http://%s:%d", host, server.server_address[1])
    try:
        server.serve_forever()
    except KeyboardInterrupt:
        pass
    finally:
        server.server_close()
