"""Network front-end hosting a master workbook.

One store directory holds one workbook as a chain of revision files plus a
``current`` pointer; the pointer is flipped only after the revision file is
fully on disk (write + fsync + rename), so a crash at any point leaves the
store at some committed revision.

Transports: length-prefixed UTF-8 JSON over TCP (4-byte big-endian length),
or one HTTP POST per message at ``/api``. Both carry the same messages; see
PROTOCOL.md. All mutations of the workbook are serialized under one lock,
giving a single total order; readers see only committed revisions.
"""

from __future__ import annotations

import json
import os
import secrets
import socketserver
import struct
import threading
import time
from dataclasses import dataclass
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer
from pathlib import Path

from .access import (
    MasterStore,
    Role,
    apply_edit,
    export_local,
    grant,
    render_view,
    revoke,
)
from .addresses import parse_a1, parse_rect
from .audit import audit_protection
from .errors import (
    BadCredentials,
    BindFailure,
    CorruptStore,
    NotAuthenticated,
    PwsError,
    Throttled,
)
from .fileformat import load_users, parse_workbook, serialize_workbook
from .passwords import verify_open_file
from .workbook import Workbook

PROTOCOL_KINDS = (
    "login",
    "get_view",
    "edit",
    "copy",
    "export",
    "grant",
    "revoke",
    "publish",
    "audit",
)

_FAILURE_WINDOW_SECONDS = 60.0
_FAILURE_LIMIT = 5


DEFAULT_SESSION_TTL_SECONDS = 24 * 3600.0


@dataclass(slots=True)
class Session:
    session_id: str
    user: str
    workbook_id: str
    role: Role | None  # snapshot at login; re-checked on every request
    created_at: float = 0.0


# --- Persistence ------------------------------------------------------------------

def _atomic_write(path: Path, data: bytes) -> None:
    tmp = path.with_name(path.name + ".tmp")
    with open(tmp, "wb") as fh:
        fh.write(data)
        fh.flush()
        os.fsync(fh.fileno())
    os.replace(tmp, path)


class RevisionStore:
    """File-per-revision persistence with an atomically updated pointer."""

    def __init__(self, directory: str | Path):
        self.directory = Path(directory)
        self.directory.mkdir(parents=True, exist_ok=True)

    def _revision_path(self, revision: int) -> Path:
        return self.directory / f"rev-{revision:08d}.pws"

    @property
    def pointer_path(self) -> Path:
        return self.directory / "current"

    def is_empty(self) -> bool:
        return not self.pointer_path.exists()

    def initialize(self, workbook: Workbook) -> int:
        if not self.is_empty():
            raise CorruptStore("store is already initialized")
        self.commit(workbook, 1)
        return 1

    def commit(self, workbook: Workbook, revision: int) -> None:
        _atomic_write(self._revision_path(revision), serialize_workbook(workbook))
        _atomic_write(self.pointer_path, str(revision).encode("ascii"))

    def load(self) -> tuple[Workbook, int]:
        try:
            revision = int(self.pointer_path.read_text("ascii").strip())
        except FileNotFoundError:
            raise CorruptStore(f"store {self.directory} has no current pointer") from None
        except ValueError:
            raise CorruptStore("current pointer is not a revision number") from None
        path = self._revision_path(revision)
        try:
            data = path.read_bytes()
        except FileNotFoundError:
            raise CorruptStore(f"missing revision file {path.name}") from None
        return parse_workbook(data), revision

    def load_revision(self, revision: int) -> Workbook:
        return parse_workbook(self._revision_path(revision).read_bytes())


# --- The service ------------------------------------------------------------------

class PwsService:
    """Transport-agnostic message dispatcher for one hosted workbook."""

    def __init__(self, store_dir: str | Path, users_path: str | Path):
        self.revision_store = RevisionStore(store_dir)
        self.users = load_users(users_path)
        workbook, revision = self.revision_store.load()
        if workbook.acl is None:
            raise CorruptStore("hosted workbook carries no ACL")
        self.master = MasterStore(workbook)
        self.revision = revision
        self.workbook_id = Path(store_dir).name or "workbook"
        self.sessions: dict[str, Session] = {}
        self.session_ttl = DEFAULT_SESSION_TTL_SECONDS
        self._failures: dict[str, list[float]] = {}
        self._lock = threading.Lock()

    # -- message entry point --

    def handle_message(self, message) -> dict:
        if not isinstance(message, dict) or "kind" not in message:
            return {"ok": False, "error": "BadRequest"}
        kind = message["kind"]
        if kind not in PROTOCOL_KINDS:
            return {"ok": False, "error": "BadRequest"}
        handler = getattr(self, f"_handle_{kind}")
        try:
            return handler(message)
        except PwsError as exc:
            return {"ok": False, "error": exc.code}
        except (KeyError, TypeError, ValueError):
            return {"ok": False, "error": "BadRequest"}

    # -- helpers --

    def _session_for(self, message: dict) -> Session:
        token = message.get("session")
        session = self.sessions.get(token) if isinstance(token, str) else None
        if session is None:
            raise NotAuthenticated("unknown or expired session")
        if time.monotonic() - session.created_at > self.session_ttl:
            del self.sessions[session.session_id]
            raise NotAuthenticated("session expired")
        return session

    def _check_throttle(self, user: str, now: float) -> None:
        window = [t for t in self._failures.get(user, []) if now - t < _FAILURE_WINDOW_SECONDS]
        self._failures[user] = window
        if len(window) >= _FAILURE_LIMIT:
            raise Throttled("too many login failures; wait a minute")

    # -- handlers --

    def _handle_login(self, message: dict) -> dict:
        user = message["user"]
        password = message["password"]
        now = time.monotonic()
        with self._lock:
            self._check_throttle(user, now)
            record = self.users.get(user)
            ok = record is not None and verify_open_file(record, password)
            if not ok:
                self._failures.setdefault(user, []).append(now)
                raise BadCredentials("bad user or password")
            role = self.master.workbook.acl.role_of(user)
            session = Session(
                session_id=secrets.token_hex(16),
                user=user,
                workbook_id=self.workbook_id,
                role=role,
                created_at=time.monotonic(),
            )
            self.sessions[session.session_id] = session
            return {
                "ok": True,
                "revision": self.revision,
                "session": session.session_id,
                "role": role.value if role is not None else None,
                "version": self.master.version,
            }

    def _handle_get_view(self, message: dict) -> dict:
        session = self._session_for(message)
        with self._lock:
            since = message.get("since")
            if isinstance(since, int) and since == self.revision:
                return {"ok": True, "revision": self.revision, "unchanged": True}
            workbook = self.master.workbook
            view = render_view(workbook, workbook.acl, session.user)
            return {"ok": True, "revision": self.revision, "view": view.to_json()}

    def _handle_edit(self, message: dict) -> dict:
        session = self._session_for(message)
        with self._lock:
            workbook = self.master.workbook
            deltas = apply_edit(
                workbook, workbook.acl, session.user, message["addr"], message["content"]
            )
            self.revision += 1
            self.revision_store.commit(workbook, self.revision)
            return {
                "ok": True,
                "revision": self.revision,
                "deltas": [{"addr": str(addr), "display": display} for addr, display in deltas],
            }

    def _handle_copy(self, message: dict) -> dict:
        session = self._session_for(message)
        with self._lock:
            workbook = self.master.workbook
            view = render_view(workbook, workbook.acl, session.user)
            sheet_name = message["sheet"]
            (c1, r1), (c2, r2) = parse_rect(message["rect"])
            cells = []
            for sheet_view in view.sheets:
                if sheet_view.name != sheet_name:
                    continue
                for cell_view in sheet_view.cells:
                    col, row = parse_a1(cell_view.addr)
                    if min(c1, c2) <= col <= max(c1, c2) and min(r1, r2) <= row <= max(r1, r2):
                        text = (
                            cell_view.contents
                            if cell_view.contents is not None
                            else cell_view.display
                        )
                        cells.append({"addr": cell_view.addr, "text": text})
            return {"ok": True, "revision": self.revision, "cells": cells}

    def _handle_export(self, message: dict) -> dict:
        session = self._session_for(message)
        with self._lock:
            workbook = self.master.workbook
            data = export_local(workbook, workbook.acl, session.user)
            return {"ok": True, "revision": self.revision, "file": data.decode("utf-8")}

    def _handle_grant(self, message: dict) -> dict:
        session = self._session_for(message)
        with self._lock:
            workbook = self.master.workbook
            grant(workbook.acl, session.user, message["user"], Role(message["role"]))
            self.revision += 1
            self.revision_store.commit(workbook, self.revision)
            return {"ok": True, "revision": self.revision}

    def _handle_revoke(self, message: dict) -> dict:
        session = self._session_for(message)
        with self._lock:
            workbook = self.master.workbook
            revoke(workbook.acl, session.user, message["user"])
            self.revision += 1
            self.revision_store.commit(workbook, self.revision)
            return {"ok": True, "revision": self.revision}

    def _handle_publish(self, message: dict) -> dict:
        session = self._session_for(message)
        with self._lock:
            new_workbook = parse_workbook(message["workbook"])
            try:
                version = self.master.publish(
                    session.user, new_workbook, force=bool(message.get("force", False))
                )
            except PwsError as exc:
                if hasattr(exc, "findings"):
                    return {
                        "ok": False,
                        "error": exc.code,
                        "findings": [f.machine_line() for f in exc.findings],
                    }
                raise
            self.revision += 1
            self.revision_store.commit(self.master.workbook, self.revision)
            return {"ok": True, "revision": self.revision, "version": version}

    def _handle_audit(self, message: dict) -> dict:
        self._session_for(message)
        with self._lock:
            findings = audit_protection(self.master.workbook)
            return {
                "ok": True,
                "revision": self.revision,
                "findings": [f.machine_line() for f in findings],
            }


# --- Transports -------------------------------------------------------------------

def read_frame(sock) -> dict | None:
    header = _read_exact(sock, 4)
    if header is None:
        return None
    (length,) = struct.unpack(">I", header)
    payload = _read_exact(sock, length)
    if payload is None:
        return None
    return json.loads(payload.decode("utf-8"))


def write_frame(sock, message: dict) -> None:
    payload = json.dumps(message, ensure_ascii=False, sort_keys=True).encode("utf-8")
    sock.sendall(struct.pack(">I", len(payload)) + payload)


def _read_exact(sock, n: int) -> bytes | None:
    buf = b""
    while len(buf) < n:
        chunk = sock.recv(n - len(buf))
        if not chunk:
            return None
        buf += chunk
    return buf


class _TcpHandler(socketserver.BaseRequestHandler):
    def handle(self):
        service: PwsService = self.server.service  # type: ignore[attr-defined]
        while True:
            try:
                message = read_frame(self.request)
            except (json.JSONDecodeError, ConnectionError):
                break
            if message is None:
                break
            response = service.handle_message(message)
            try:
                write_frame(self.request, response)
            except ConnectionError:
                break


class _ThreadingTCPServer(socketserver.ThreadingTCPServer):
    allow_reuse_address = True
    daemon_threads = True


def _make_http_handler(service: PwsService, web_root: Path | None):
    class Handler(BaseHTTPRequestHandler):
        def log_message(self, *args):  # quiet
            pass

        def _send_json(self, obj: dict, status: int = 200) -> None:
            payload = json.dumps(obj, ensure_ascii=False, sort_keys=True).encode("utf-8")
            self.send_response(status)
            self.send_header("Content-Type", "application/json; charset=utf-8")
            self.send_header("Content-Length", str(len(payload)))
            self.send_header("Access-Control-Allow-Origin", "*")
            self.end_headers()
            self.wfile.write(payload)

        def do_POST(self):
            if self.path.rstrip("/") != "/api":
                self._send_json({"ok": False, "error": "BadRequest"}, 404)
                return
            length = int(self.headers.get("Content-Length", "0"))
            body = self.rfile.read(length)
            try:
                message = json.loads(body.decode("utf-8"))
            except (json.JSONDecodeError, UnicodeDecodeError):
                self._send_json({"ok": False, "error": "BadRequest"}, 400)
                return
            self._send_json(service.handle_message(message))

        def do_OPTIONS(self):
            self.send_response(204)
            self.send_header("Access-Control-Allow-Origin", "*")
            self.send_header("Access-Control-Allow-Methods", "POST, GET, OPTIONS")
            self.send_header("Access-Control-Allow-Headers", "Content-Type")
            self.end_headers()

        def do_GET(self):
            if web_root is None:
                self._send_json({"ok": False, "error": "BadRequest"}, 404)
                return
            rel = self.path.split("?", 1)[0].lstrip("/") or "index.html"
            target = (web_root / rel).resolve()
            if not str(target).startswith(str(web_root.resolve())) or not target.is_file():
                self._send_json({"ok": False, "error": "BadRequest"}, 404)
                return
            data = target.read_bytes()
            ctype = {
                ".html": "text/html; charset=utf-8",
                ".js": "text/javascript; charset=utf-8",
                ".css": "text/css; charset=utf-8",
            }.get(target.suffix, "application/octet-stream")
            self.send_response(200)
            self.send_header("Content-Type", ctype)
            self.send_header("Content-Length", str(len(data)))
            self.end_headers()
            self.wfile.write(data)

    return Handler


@dataclass(slots=True)
class ServerHandle:
    server: object
    thread: threading.Thread
    host: str
    port: int

    def shutdown(self) -> None:
        self.server.shutdown()  # type: ignore[attr-defined]
        self.server.server_close()  # type: ignore[attr-defined]
        self.thread.join(timeout=5)


def serve(
    service: PwsService,
    host: str = "127.0.0.1",
    port: int = 0,
    *,
    transport: str = "tcp",
    web_root: str | Path | None = None,
    background: bool = False,
) -> ServerHandle:
    """Bind and run; with ``background=True`` returns a handle immediately."""
    try:
        if transport == "tcp":
            server = _ThreadingTCPServer((host, port), _TcpHandler)
            server.service = service  # type: ignore[attr-defined]
        elif transport == "http":
            root = Path(web_root) if web_root is not None else None
            server = ThreadingHTTPServer((host, port), _make_http_handler(service, root))
            server.daemon_threads = True
        else:
            raise ValueError(f"unknown transport {transport!r}")
    except OSError as exc:
        raise BindFailure(f"cannot bind {host}:{port}: {exc}") from None
    bound_host, bound_port = server.server_address[:2]
    thread = threading.Thread(target=server.serve_forever, daemon=True)
    thread.start()
    handle = ServerHandle(server=server, thread=thread, host=str(bound_host), port=bound_port)
    if not background:
        try:
            thread.join()
        except KeyboardInterrupt:
            handle.shutdown()
    return handle


class WireClient:
    """Small TCP client for tests and scripts: one framed request/response."""

    def __init__(self, host: str, port: int):
        import socket

        self.sock = socket.create_connection((host, port))

    def request(self, message: dict) -> dict:
        write_frame(self.sock, message)
        response = read_frame(self.sock)
        if response is None:
            raise ConnectionError("server closed the connection")
        return response

    def close(self) -> None:
        self.sock.close()

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.close()
