import json
import threading
import time

import pytest

from conftest import shared_workbook
from pws.access import Role
from pws.errors import CorruptStore
from pws.fileformat import save_users, serialize_workbook
from pws.passwords import make_open_file_record
from pws.protection import apply_recommended_protection
from pws.passwords import make_element_record
from pws.server import PwsService, RevisionStore, WireClient, serve

USERS = {"alice": "owner-pass", "bob": "limited-pass", "carol": "collab-pass", "vera": "view-pass"}

SECRET_FORMULA = "=A1*73+1294577"


def seeded_workbook():
    return shared_workbook(
        {"A1": "5", "A2": SECRET_FORMULA},
        {"bob": Role.LIMITED_USER, "carol": Role.COLLABORATOR, "vera": Role.VIEWER},
    )


@pytest.fixture()
def service(tmp_path):
    store_dir = tmp_path / "store"
    RevisionStore(store_dir).initialize(seeded_workbook())
    users = {
        name: make_open_file_record(password, iterations=1_000)
        for name, password in USERS.items()
    }
    users["eve"] = make_open_file_record("eve-pass", iterations=1_000)
    users_path = tmp_path / "users.json"
    save_users(users, users_path)
    return PwsService(store_dir, users_path)


def login(service, user):
    response = service.handle_message({"kind": "login", "user": user, "password": USERS[user]})
    assert response["ok"], response
    return response["session"]


# --- login ------------------------------------------------------------------------


def test_login_returns_session_with_role(service):
    response = service.handle_message(
        {"kind": "login", "user": "bob", "password": USERS["bob"]}
    )
    assert response["ok"]
    assert response["role"] == "limited_user"
    assert response["revision"] == 1
    assert len(response["session"]) == 32  # 128-bit hex token


def test_login_bad_credentials(service):
    response = service.handle_message({"kind": "login", "user": "bob", "password": "nope"})
    assert response == {"ok": False, "error": "BadCredentials"}
    response = service.handle_message({"kind": "login", "user": "ghost", "password": "x"})
    assert response == {"ok": False, "error": "BadCredentials"}


def test_sixth_rapid_failure_is_throttled(service):
    for _ in range(5):
        r = service.handle_message({"kind": "login", "user": "bob", "password": "bad"})
        assert r["error"] == "BadCredentials"
    r = service.handle_message({"kind": "login", "user": "bob", "password": "bad"})
    assert r == {"ok": False, "error": "Throttled"}
    # even the correct password is throttled out
    r = service.handle_message({"kind": "login", "user": "bob", "password": USERS["bob"]})
    assert r == {"ok": False, "error": "Throttled"}
    # other users are unaffected
    assert service.handle_message(
        {"kind": "login", "user": "carol", "password": USERS["carol"]}
    )["ok"]


def test_expired_session_rejected(service):
    session = login(service, "bob")
    service.session_ttl = 0.0
    time.sleep(0.01)
    r = service.handle_message({"kind": "get_view", "session": session})
    assert r == {"ok": False, "error": "NotAuthenticated"}


def test_bind_failure_surfaces(service):
    import socket

    from pws.errors import BindFailure

    blocker = socket.socket()
    blocker.bind(("127.0.0.1", 0))
    blocker.listen(1)
    port = blocker.getsockname()[1]
    try:
        with pytest.raises(BindFailure):
            serve(service, "127.0.0.1", port, transport="tcp", background=True)
    finally:
        blocker.close()


def test_requests_without_session_rejected(service):
    for kind in ("get_view", "edit", "copy", "export", "grant", "revoke", "publish", "audit"):
        response = service.handle_message({"kind": kind, "session": "bogus"})
        assert response == {"ok": False, "error": "NotAuthenticated"}, kind
    assert service.handle_message({"kind": "hack"}) == {"ok": False, "error": "BadRequest"}
    assert service.handle_message("not a dict") == {"ok": False, "error": "BadRequest"}


# --- views and edits ------------------------------------------------------------------


def test_get_view_redacts_for_limited_user(service):
    session = login(service, "bob")
    response = service.handle_message({"kind": "get_view", "session": session})
    assert response["ok"]
    blob = json.dumps(response)
    assert SECRET_FORMULA not in blob
    cells = {c["addr"]: c for c in response["view"]["sheets"][0]["cells"]}
    assert cells["A2"]["display"] == "1294942"
    assert "contents" not in cells["A2"]


def test_get_view_since_unchanged(service):
    session = login(service, "bob")
    first = service.handle_message({"kind": "get_view", "session": session})
    again = service.handle_message(
        {"kind": "get_view", "session": session, "since": first["revision"]}
    )
    assert again == {"ok": True, "revision": first["revision"], "unchanged": True}


def test_edit_bumps_revision_and_returns_deltas(service):
    session = login(service, "bob")
    response = service.handle_message(
        {"kind": "edit", "session": session, "addr": "Sheet1!A1", "content": "7"}
    )
    assert response["ok"]
    assert response["revision"] == 2
    deltas = {d["addr"]: d["display"] for d in response["deltas"]}
    assert deltas["Sheet1!A1"] == "7"
    assert deltas["Sheet1!A2"] == str(7 * 73 + 1294577)


def test_edit_denials_surface_error_codes(service):
    bob = login(service, "bob")
    vera = login(service, "vera")
    r = service.handle_message(
        {"kind": "edit", "session": bob, "addr": "Sheet1!A1", "content": "=B1"}
    )
    assert r == {"ok": False, "error": "FormulaForbidden"}
    r = service.handle_message(
        {"kind": "edit", "session": bob, "addr": "Sheet1!A2", "content": "3"}
    )
    assert r == {"ok": False, "error": "EditDenied"}
    r = service.handle_message(
        {"kind": "edit", "session": vera, "addr": "Sheet1!A1", "content": "3"}
    )
    assert r == {"ok": False, "error": "EditDenied"}


def test_concurrent_edits_to_different_cells_both_commit(service):
    carol = login(service, "carol")
    bob = login(service, "bob")
    results = {}

    def run(name, session, addr, content):
        results[name] = service.handle_message(
            {"kind": "edit", "session": session, "addr": addr, "content": content}
        )

    t1 = threading.Thread(target=run, args=("carol", carol, "Sheet1!B1", "11"))
    t2 = threading.Thread(target=run, args=("bob", bob, "Sheet1!A1", "22"))
    t1.start(), t2.start(), t1.join(), t2.join()
    assert results["carol"]["ok"] and results["bob"]["ok"]
    assert {results["carol"]["revision"], results["bob"]["revision"]} == {2, 3}
    view = service.handle_message({"kind": "get_view", "session": carol})
    cells = {c["addr"]: c["display"] for c in view["view"]["sheets"][0]["cells"]}
    assert cells["B1"] == "11"
    assert cells["A1"] == "22"


def test_same_cell_conflict_last_writer_wins(service):
    carol = login(service, "carol")
    alice = login(service, "alice")
    r1 = service.handle_message(
        {"kind": "edit", "session": carol, "addr": "Sheet1!A1", "content": "100"}
    )
    r2 = service.handle_message(
        {"kind": "edit", "session": alice, "addr": "Sheet1!A1", "content": "200"}
    )
    assert r1["revision"] < r2["revision"]
    for session in (carol, alice):
        view = service.handle_message({"kind": "get_view", "session": session})
        cells = {c["addr"]: c["display"] for c in view["view"]["sheets"][0]["cells"]}
        assert cells["A1"] == "200"


def test_revision_monotonicity_across_messages(service):
    session = login(service, "carol")
    last = 0
    for i in range(5):
        r = service.handle_message(
            {"kind": "edit", "session": session, "addr": "Sheet1!C1", "content": str(i)}
        )
        assert r["revision"] > last
        last = r["revision"]
        v = service.handle_message({"kind": "get_view", "session": session})
        assert v["revision"] >= last


# --- grants / publish / audit over the wire ----------------------------------------------


def test_revoked_user_gets_revoked_access(service):
    alice = login(service, "alice")
    bob = login(service, "bob")
    r = service.handle_message({"kind": "revoke", "session": alice, "user": "bob"})
    assert r["ok"]
    r = service.handle_message({"kind": "get_view", "session": bob})
    assert r == {"ok": False, "error": "RevokedAccess"}


def test_grant_requires_owner(service):
    carol = login(service, "carol")
    r = service.handle_message(
        {"kind": "grant", "session": carol, "user": "eve", "role": "viewer"}
    )
    assert r == {"ok": False, "error": "NotOwner"}


def test_grant_lets_new_user_in(service):
    alice = login(service, "alice")
    r = service.handle_message(
        {"kind": "grant", "session": alice, "user": "eve", "role": "viewer"}
    )
    assert r["ok"]
    eve_session = PwsService.handle_message(
        service, {"kind": "login", "user": "eve", "password": "eve-pass"}
    )
    assert eve_session["role"] == "viewer"


def test_publish_flow_and_audit_gate(service):
    alice = login(service, "alice")
    dirty = seeded_workbook()
    r = service.handle_message(
        {
            "kind": "publish",
            "session": alice,
            "workbook": serialize_workbook(dirty).decode(),
        }
    )
    assert not r["ok"] and r["error"] == "AuditFailed"
    assert any(line.startswith("R") for line in r["findings"])

    hardened = seeded_workbook()
    apply_recommended_protection(hardened, password_record=make_element_record("pw"))
    r = service.handle_message(
        {
            "kind": "publish",
            "session": alice,
            "workbook": serialize_workbook(hardened).decode(),
        }
    )
    assert r["ok"] and r["version"] == 2
    bob = login(service, "bob")
    view = service.handle_message({"kind": "get_view", "session": bob})
    assert view["view"]["workbook_version"] == 2


def test_publish_requires_owner(service):
    carol = login(service, "carol")
    r = service.handle_message(
        {
            "kind": "publish",
            "session": carol,
            "workbook": serialize_workbook(seeded_workbook()).decode(),
        }
    )
    assert r == {"ok": False, "error": "NotOwner"}


def test_audit_message(service):
    session = login(service, "bob")
    r = service.handle_message({"kind": "audit", "session": session})
    assert r["ok"]
    assert any(line.startswith("R6\t") for line in r["findings"])
    assert not any(SECRET_FORMULA in line for line in r["findings"])


def test_copy_message_respects_redaction(service):
    bob = login(service, "bob")
    carol = login(service, "carol")
    r = service.handle_message(
        {"kind": "copy", "session": bob, "sheet": "Sheet1", "rect": "A1:A2"}
    )
    texts = {c["addr"]: c["text"] for c in r["cells"]}
    assert texts["A1"] == "5"
    assert texts["A2"] == "1294942"  # value only
    r = service.handle_message(
        {"kind": "copy", "session": carol, "sheet": "Sheet1", "rect": "A1:A2"}
    )
    texts = {c["addr"]: c["text"] for c in r["cells"]}
    assert texts["A2"] == SECRET_FORMULA


def test_export_message_leak_free(service):
    bob = login(service, "bob")
    r = service.handle_message({"kind": "export", "session": bob})
    assert r["ok"]
    assert SECRET_FORMULA not in r["file"]
    assert SECRET_FORMULA not in json.dumps(r)


# --- persistence / crash-restart -----------------------------------------------------------


def test_restart_resumes_at_committed_revision(tmp_path):
    store_dir = tmp_path / "store"
    RevisionStore(store_dir).initialize(seeded_workbook())
    users_path = tmp_path / "users.json"
    save_users(
        {n: make_open_file_record(p, iterations=1_000) for n, p in USERS.items()}, users_path
    )
    service = PwsService(store_dir, users_path)
    session = login(service, "carol")
    for i in range(3):
        service.handle_message(
            {"kind": "edit", "session": session, "addr": "Sheet1!D1", "content": str(i)}
        )
    reborn = PwsService(store_dir, users_path)
    assert reborn.revision == 4
    assert reborn.master.workbook.value("Sheet1!D1") == 2.0


def test_torn_revision_file_does_not_corrupt_store(tmp_path):
    store_dir = tmp_path / "store"
    store = RevisionStore(store_dir)
    store.initialize(seeded_workbook())
    wb = seeded_workbook()
    wb.set_input("A1", "999")
    store.commit(wb, 2)
    # a crash mid-write leaves a torn next revision without the pointer flip
    (store_dir / "rev-00000003.pws").write_bytes(b'{"version": 1, "sheets": [')
    loaded, revision = store.load()
    assert revision == 2
    assert loaded.value("Sheet1!A1") == 999.0


def test_pointer_to_missing_revision_is_corrupt_store(tmp_path):
    store_dir = tmp_path / "store"
    store = RevisionStore(store_dir)
    store.initialize(seeded_workbook())
    (store_dir / "current").write_text("9")
    with pytest.raises(CorruptStore):
        store.load()


def test_empty_store_is_corrupt(tmp_path):
    with pytest.raises(CorruptStore):
        RevisionStore(tmp_path / "void").load()


# --- TCP transport ---------------------------------------------------------------------


def test_tcp_round_trip_and_wire_leak_freedom(service):
    handle = serve(service, "127.0.0.1", 0, transport="tcp", background=True)
    try:
        with WireClient(handle.host, handle.port) as client:
            r = client.request({"kind": "login", "user": "bob", "password": USERS["bob"]})
            assert r["ok"]
            session = r["session"]
            view = client.request({"kind": "get_view", "session": session})
            assert view["ok"]
            assert SECRET_FORMULA not in json.dumps(view)
            edit = client.request(
                {"kind": "edit", "session": session, "addr": "Sheet1!A1", "content": "9"}
            )
            assert edit["ok"] and edit["revision"] == 2
            export = client.request({"kind": "export", "session": session})
            assert SECRET_FORMULA not in json.dumps(export)
        with WireClient(handle.host, handle.port) as carol_client:
            r = carol_client.request(
                {"kind": "login", "user": "carol", "password": USERS["carol"]}
            )
            view = carol_client.request({"kind": "get_view", "session": r["session"]})
            assert SECRET_FORMULA in json.dumps(view)  # full access sees contents
    finally:
        handle.shutdown()


def test_protocol_golden_transcript(service, tmp_path):
    """Replays the committed transcript script and pins exact field shapes."""
    handle = serve(service, "127.0.0.1", 0, transport="tcp", background=True)
    try:
        with WireClient(handle.host, handle.port) as client:
            login_r = client.request(
                {"kind": "login", "user": "bob", "password": USERS["bob"]}
            )
            session = login_r["session"]
            exchanges = [
                ({"kind": "get_view", "session": session, "since": 1},
                 {"ok": True, "revision": 1, "unchanged": True}),
                ({"kind": "edit", "session": session, "addr": "Sheet1!A1", "content": "6"},
                 {"deltas": [{"addr": "Sheet1!A1", "display": "6"},
                             {"addr": "Sheet1!A2", "display": "1295015"}],
                  "ok": True, "revision": 2}),
                ({"kind": "edit", "session": session, "addr": "Sheet1!A2", "content": "1"},
                 {"error": "EditDenied", "ok": False}),
                ({"kind": "grant", "session": session, "user": "x", "role": "viewer"},
                 {"error": "NotOwner", "ok": False}),
            ]
            for request, expected in exchanges:
                assert client.request(request) == expected
    finally:
        handle.shutdown()
