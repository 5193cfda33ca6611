"""Read-only artifact server for rendered documents and bundles.

Serves a root directory laid out as one subdirectory per document id,
each holding ``aug.html``, ``base.html``, ``bundle.json``, and an
optional ``assets/`` directory. Every endpoint is a GET over immutable
files; nothing on disk is ever written by a request.
"""

from __future__ import annotations

import errno
import json
import mimetypes
import posixpath
import threading
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer
from pathlib import Path
from urllib.parse import parse_qs, urlparse

from .errors import MissingArtifacts, PortInUse

REQUIRED_FILES = ("aug.html", "base.html", "bundle.json")
VARIANT_FILES = {"aug": "aug.html", "base": "base.html"}


def discover_docs(root: Path) -> dict[str, Path]:
    """Document directories under the root, keyed by doc id."""
    if not root.is_dir():
        raise MissingArtifacts(f"serving root {root} is not a directory")
    docs = {}
    missing: list[str] = []
    for child in sorted(root.iterdir()):
        if not child.is_dir():
            continue
        absent = [name for name in REQUIRED_FILES if not (child / name).is_file()]
        if absent:
            missing.extend(f"{child.name}/{name}" for name in absent)
        else:
            docs[child.name] = child
    if missing:
        raise MissingArtifacts(
            f"artifacts missing under {root}: {', '.join(missing)}",
            missing=missing,
        )
    if not docs:
        raise MissingArtifacts(f"no document directories under {root}")
    return docs


class _Handler(BaseHTTPRequestHandler):
    server_version = "crossdoc"
    docs: dict[str, Path] = {}
    cors_origins: list[str] = []

    def log_message(self, fmt, *args):  # quiet by default
        pass

    def _cors(self) -> dict[str, str]:
        origin = self.headers.get("Origin")
        if origin and origin in self.cors_origins:
            return {"Access-Control-Allow-Origin": origin}
        return {}

    def _send(self, status: int, content_type: str, body: bytes) -> None:
        self.send_response(status)
        self.send_header("Content-Type", content_type)
        self.send_header("Content-Length", str(len(body)))
        for key, value in self._cors().items():
            self.send_header(key, value)
        self.end_headers()
        if self.command != "HEAD":
            self.wfile.write(body)

    def _send_json(self, status: int, payload: dict) -> None:
        body = (json.dumps(payload, ensure_ascii=False) + "\n").encode("utf-8")
        self._send(status, "application/json; charset=utf-8", body)

    def _error(self, status: int, code: str, message: str) -> None:
        self._send_json(status, {"error": {"code": code, "message": message}})

    def do_HEAD(self):  # noqa: N802
        self.do_GET()

    def do_GET(self):  # noqa: N802
        parsed = urlparse(self.path)
        parts = [p for p in parsed.path.split("/") if p]
        try:
            if parsed.path == "/healthz":
                self._send_json(200, {"status": "ok"})
            elif parsed.path == "/docs":
                self._send_json(200, {
                    "docs": [
                        {"doc_id": doc_id, "variants": sorted(VARIANT_FILES)}
                        for doc_id in sorted(self.docs)
                    ]
                })
            elif parts and parts[0] == "doc" and len(parts) >= 2:
                self._serve_doc(parts[1:], parse_qs(parsed.query))
            else:
                self._error(404, "not_found", f"no route for {parsed.path}")
        except BrokenPipeError:
            pass

    def _serve_doc(self, parts: list[str], query: dict) -> None:
        doc_id = parts[0]
        doc_dir = self.docs.get(doc_id)
        if doc_dir is None:
            self._error(404, "not_found", f"unknown document {doc_id!r}")
            return
        rest = parts[1:]
        if not rest:
            variant = query.get("variant", ["aug"])[0]
            filename = VARIANT_FILES.get(variant)
            if filename is None:
                self._error(400, "bad_variant",
                            f"variant must be one of {sorted(VARIANT_FILES)}")
                return
            body = (doc_dir / filename).read_bytes()
            self._send(200, "text/html; charset=utf-8", body)
        elif rest == ["bundle"]:
            body = (doc_dir / "bundle.json").read_bytes()
            self._send(200, "application/json; charset=utf-8", body)
        elif rest[0] == "assets" and len(rest) > 1:
            name = posixpath.normpath("/".join(rest[1:]))
            if name.startswith(("..", "/")):
                self._error(404, "not_found", "asset path escapes the root")
                return
            asset = doc_dir / "assets" / name
            if not asset.is_file():
                self._error(404, "not_found", f"no asset {name!r}")
                return
            content_type = mimetypes.guess_type(name)[0] or "application/octet-stream"
            self._send(200, content_type, asset.read_bytes())
        else:
            self._error(404, "not_found", f"no route under document {doc_id!r}")

    def _method_not_allowed(self):
        self.send_response(405)
        self.send_header("Allow", "GET, HEAD")
        self.send_header("Content-Length", "0")
        self.end_headers()

    do_POST = _method_not_allowed       # noqa: N815
    do_PUT = _method_not_allowed        # noqa: N815
    do_DELETE = _method_not_allowed     # noqa: N815
    do_PATCH = _method_not_allowed      # noqa: N815


class ArtifactServer:
    """Running HTTP service over a directory of rendered artifacts."""

    def __init__(self, root: str | Path, port: int = 0,
                 cors_origins: list[str] | None = None):
        root = Path(root)
        docs = discover_docs(root)
        handler = type("BoundHandler", (_Handler,), {
            "docs": docs,
            "cors_origins": list(cors_origins or []),
        })
        try:
            self._httpd = ThreadingHTTPServer(("127.0.0.1", port), handler)
        except OSError as exc:
            if exc.errno == errno.EADDRINUSE:
                raise PortInUse(f"port {port} is already bound") from exc
            raise
        self._httpd.daemon_threads = True
        self.root = root
        self.port = self._httpd.server_address[1]
        self._thread: threading.Thread | None = None

    @property
    def base_url(self) -> str:
        return f"http://127.0.0.1:{self.port}"

    def start(self) -> "ArtifactServer":
        self._thread = threading.Thread(
            target=self._httpd.serve_forever, name="crossdoc-server", daemon=True
        )
        self._thread.start()
        return self

    def close(self) -> None:
        self._httpd.shutdown()
        self._httpd.server_close()
        if self._thread is not None:
            self._thread.join(timeout=5)

    def serve_forever(self) -> None:
        self._httpd.serve_forever()


def serve(root: str | Path, port: int = 0,
          cors_origins: list[str] | None = None) -> ArtifactServer:
    """Validate artifacts and return a started server."""
    return ArtifactServer(root, port=port, cors_origins=cors_origins).start()
