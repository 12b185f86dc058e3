"""The ``.pws`` workbook file format and the users file. UTF-8 JSON, strict:
unknown fields are rejected so a redacted file cannot smuggle anything.

Top level:
    {"version": 1,
     "sheets": [{"name", "visibility", "protection": {...}, "cells": [...]}],
     "workbook_protection": {"structure", "windows"},
     "acl": null | {"owner", "grants", "allow_external_links", "overrides"},
     "passwords": {"open_file", "workbook", "sheets"}}

Cells are {"addr", "content", "format"?, "flattened"?}; password records are
{"kind": "element", "class": N} or {"kind": "open", "salt", "digest",
"iterations"}.
"""

from __future__ import annotations

import json
import math

from .access import AccessClass, Role, SharingAcl
from .addresses import CellAddress, parse_a1, parse_address
from .errors import WorkbookFormatError
from .passwords import (
    ElementPasswordRecord,
    OpenFilePasswordRecord,
    PasswordRecord,
)
from .workbook import (
    Cell,
    CellProtectionFormat,
    Empty,
    Formula,
    Literal,
    Sheet,
    SheetProtection,
    SheetVisibility,
    Workbook,
    WorkbookProtection,
)

FORMAT_VERSION = 1


def _check_keys(obj: dict, allowed: set[str], where: str) -> None:
    unknown = set(obj) - allowed
    if unknown:
        raise WorkbookFormatError(f"unknown field(s) {sorted(unknown)} in {where}")


def _require(obj: dict, key: str, where: str):
    if key not in obj:
        raise WorkbookFormatError(f"missing field {key!r} in {where}")
    return obj[key]


# --- Password records ----------------------------------------------------------

def record_to_json(record: PasswordRecord | None):
    if record is None:
        return None
    if isinstance(record, ElementPasswordRecord):
        return {"kind": "element", "class": record.class_index}
    return {
        "kind": "open",
        "salt": record.salt.hex(),
        "digest": record.digest.hex(),
        "iterations": record.iterations,
    }


def record_from_json(obj, where: str) -> PasswordRecord | None:
    if obj is None:
        return None
    if not isinstance(obj, dict):
        raise WorkbookFormatError(f"password record in {where} must be an object")
    kind = _require(obj, "kind", where)
    if kind == "element":
        _check_keys(obj, {"kind", "class"}, where)
        class_index = _require(obj, "class", where)
        if not isinstance(class_index, int):
            raise WorkbookFormatError(f"element class in {where} must be an integer")
        try:
            return ElementPasswordRecord(class_index)
        except ValueError as exc:
            raise WorkbookFormatError(str(exc)) from None
    if kind == "open":
        _check_keys(obj, {"kind", "salt", "digest", "iterations"}, where)
        try:
            return OpenFilePasswordRecord(
                salt=bytes.fromhex(_require(obj, "salt", where)),
                digest=bytes.fromhex(_require(obj, "digest", where)),
                iterations=int(_require(obj, "iterations", where)),
            )
        except ValueError as exc:
            raise WorkbookFormatError(f"bad open record in {where}: {exc}") from None
    raise WorkbookFormatError(f"unknown password record kind {kind!r} in {where}")


# --- Serialization ---------------------------------------------------------------

def _content_to_json(content) -> dict:
    if isinstance(content, Empty):
        return {"kind": "empty"}
    if isinstance(content, Literal):
        return {"kind": "literal", "value": content.value}
    return {"kind": "formula", "source": content.source}


def _format_to_json(fmt: CellProtectionFormat) -> dict:
    return {"locked": fmt.locked, "hidden": fmt.hidden}


def workbook_to_json(workbook: Workbook) -> dict:
    sheets = []
    sheet_passwords = {}
    for sheet in workbook.sheets:
        cells = []
        for (col, row) in sorted(sheet.cells, key=lambda p: (p[1], p[0])):
            cell = sheet.cells[(col, row)]
            entry: dict = {
                "addr": CellAddress(sheet.name, col, row).a1,
                "content": _content_to_json(cell.content),
            }
            if cell.format is not None:
                entry["format"] = _format_to_json(cell.format)
            if cell.flattened:
                entry["flattened"] = True
            cells.append(entry)
        sheets.append(
            {
                "name": sheet.name,
                "visibility": sheet.visibility.value,
                "protection": {
                    "enabled": sheet.protection.enabled,
                    "allow_select_locked": sheet.protection.allow_select_locked,
                    "allow_select_unlocked": sheet.protection.allow_select_unlocked,
                    "allow_format_cells": sheet.protection.allow_format_cells,
                    "default_format": _format_to_json(sheet.default_format),
                },
                "cells": cells,
            }
        )
        if sheet.protection.element_password is not None:
            sheet_passwords[sheet.name] = record_to_json(sheet.protection.element_password)
    acl = None
    if workbook.acl is not None:
        acl = {
            "owner": workbook.acl.owner,
            "grants": {user: role.value for user, role in sorted(workbook.acl.grants.items())},
            "allow_external_links": workbook.acl.allow_external_links,
            "overrides": {
                str(addr): cls.value
                for addr, cls in sorted(workbook.acl.overrides.items(), key=lambda kv: str(kv[0]))
            },
        }
    return {
        "version": FORMAT_VERSION,
        "sheets": sheets,
        "workbook_protection": {
            "structure": workbook.protection.structure,
            "windows": workbook.protection.windows,
        },
        "acl": acl,
        "passwords": {
            "open_file": record_to_json(workbook.open_file_password),
            "workbook": record_to_json(workbook.protection.element_password),
            "sheets": sheet_passwords,
        },
    }


def serialize_workbook(workbook: Workbook) -> bytes:
    return (
        json.dumps(workbook_to_json(workbook), ensure_ascii=False, indent=2, allow_nan=False)
        + "\n"
    ).encode("utf-8")


# --- Parsing ---------------------------------------------------------------------

def _parse_content(obj: dict, where: str):
    _check_keys(obj, {"kind", "value", "source"}, where)
    kind = _require(obj, "kind", where)
    if kind == "empty":
        return Empty()
    if kind == "literal":
        value = _require(obj, "value", where)
        if isinstance(value, bool) or not isinstance(value, (int, float, str)):
            raise WorkbookFormatError(f"literal value in {where} must be number or text")
        if isinstance(value, float) and not math.isfinite(value):
            raise WorkbookFormatError(f"literal value in {where} must be finite")
        return Literal(float(value) if isinstance(value, (int, float)) else value)
    if kind == "formula":
        source = _require(obj, "source", where)
        if not isinstance(source, str) or not source.startswith("="):
            raise WorkbookFormatError(f"formula source in {where} must begin with '='")
        return Formula(source)
    raise WorkbookFormatError(f"unknown content kind {kind!r} in {where}")


def _parse_format(obj, where: str) -> CellProtectionFormat:
    if not isinstance(obj, dict):
        raise WorkbookFormatError(f"format in {where} must be an object")
    _check_keys(obj, {"locked", "hidden"}, where)
    return CellProtectionFormat(
        locked=bool(_require(obj, "locked", where)),
        hidden=bool(_require(obj, "hidden", where)),
    )


def _parse_sheet(obj: dict, index: int) -> Sheet:
    where = f"sheets[{index}]"
    _check_keys(obj, {"name", "visibility", "protection", "cells"}, where)
    name = _require(obj, "name", where)
    try:
        visibility = SheetVisibility(_require(obj, "visibility", where))
    except ValueError:
        raise WorkbookFormatError(f"unknown visibility in {where}") from None
    prot_obj = _require(obj, "protection", where)
    _check_keys(
        prot_obj,
        {"enabled", "allow_select_locked", "allow_select_unlocked", "allow_format_cells", "default_format"},
        f"{where}.protection",
    )
    protection = SheetProtection(
        enabled=bool(prot_obj.get("enabled", False)),
        allow_select_locked=bool(prot_obj.get("allow_select_locked", True)),
        allow_select_unlocked=bool(prot_obj.get("allow_select_unlocked", True)),
        allow_format_cells=bool(prot_obj.get("allow_format_cells", False)),
    )
    sheet = Sheet(name=name, visibility=visibility, protection=protection)
    if "default_format" in prot_obj:
        sheet.default_format = _parse_format(prot_obj["default_format"], f"{where}.protection")
    for i, cell_obj in enumerate(_require(obj, "cells", where)):
        cell_where = f"{where}.cells[{i}]"
        _check_keys(cell_obj, {"addr", "content", "format", "flattened"}, cell_where)
        try:
            col, row = parse_a1(_require(cell_obj, "addr", cell_where))
        except Exception:
            raise WorkbookFormatError(f"bad addr in {cell_where}") from None
        cell = Cell(content=_parse_content(_require(cell_obj, "content", cell_where), cell_where))
        if "format" in cell_obj:
            cell.format = _parse_format(cell_obj["format"], cell_where)
        if "flattened" in cell_obj:
            cell.flattened = bool(cell_obj["flattened"])
        if (col, row) in sheet.cells:
            raise WorkbookFormatError(f"duplicate cell {cell_obj['addr']} in {where}")
        sheet.cells[(col, row)] = cell
    return sheet


def _parse_acl(obj, sheet_names: set[str]) -> SharingAcl | None:
    if obj is None:
        return None
    _check_keys(obj, {"owner", "grants", "allow_external_links", "overrides"}, "acl")
    owner = _require(obj, "owner", "acl")
    acl = SharingAcl(owner=owner)
    for user, role_text in _require(obj, "grants", "acl").items():
        try:
            role = Role(role_text)
        except ValueError:
            raise WorkbookFormatError(f"unknown role {role_text!r} in acl.grants") from None
        acl.grants[user] = role
    acl.allow_external_links = bool(obj.get("allow_external_links", True))
    for addr_text, class_text in obj.get("overrides", {}).items():
        try:
            addr = parse_address(addr_text)
            cls = AccessClass(class_text)
        except Exception:
            raise WorkbookFormatError(f"bad override {addr_text!r} in acl.overrides") from None
        if addr.sheet not in sheet_names:
            raise WorkbookFormatError(f"override {addr_text!r} names an unknown sheet")
        acl.overrides[addr] = cls
    return acl


def workbook_from_json(obj) -> Workbook:
    if not isinstance(obj, dict):
        raise WorkbookFormatError("workbook file must be a JSON object")
    _check_keys(obj, {"version", "sheets", "workbook_protection", "acl", "passwords"}, "workbook")
    version = _require(obj, "version", "workbook")
    if version != FORMAT_VERSION:
        raise WorkbookFormatError(f"unsupported format version {version!r}")
    workbook = Workbook()
    names: set[str] = set()
    for i, sheet_obj in enumerate(_require(obj, "sheets", "workbook")):
        sheet = _parse_sheet(sheet_obj, i)
        if sheet.name in names:
            raise WorkbookFormatError(f"duplicate sheet name {sheet.name!r}")
        names.add(sheet.name)
        workbook.sheets.append(sheet)
    wp = obj.get("workbook_protection", {})
    _check_keys(wp, {"structure", "windows"}, "workbook_protection")
    workbook.protection = WorkbookProtection(
        structure=bool(wp.get("structure", False)),
        windows=bool(wp.get("windows", False)),
    )
    workbook.acl = _parse_acl(obj.get("acl"), names)
    passwords = obj.get("passwords", {})
    _check_keys(passwords, {"open_file", "workbook", "sheets"}, "passwords")
    workbook.open_file_password = record_from_json(passwords.get("open_file"), "passwords.open_file")
    workbook.protection.element_password = record_from_json(
        passwords.get("workbook"), "passwords.workbook"
    )
    for sheet_name, record_obj in passwords.get("sheets", {}).items():
        if sheet_name not in names:
            raise WorkbookFormatError(f"password for unknown sheet {sheet_name!r}")
        workbook.sheet(sheet_name).protection.element_password = record_from_json(
            record_obj, f"passwords.sheets[{sheet_name}]"
        )
    return workbook


def parse_workbook(data: bytes | str) -> Workbook:
    if isinstance(data, bytes):
        data = data.decode("utf-8")
    try:
        obj = json.loads(data)
    except json.JSONDecodeError as exc:
        raise WorkbookFormatError(f"not valid JSON: {exc}") from None
    return workbook_from_json(obj)


def load_workbook(path) -> Workbook:
    with open(path, "rb") as fh:
        return parse_workbook(fh.read())


def save_workbook(workbook: Workbook, path) -> None:
    with open(path, "wb") as fh:
        fh.write(serialize_workbook(workbook))


# --- Users file ------------------------------------------------------------------

def users_to_json(users: dict[str, OpenFilePasswordRecord]) -> list:
    return [
        {"user": name, "password": record_to_json(record)}
        for name, record in sorted(users.items())
    ]


def parse_users(data: bytes | str) -> dict[str, OpenFilePasswordRecord]:
    if isinstance(data, bytes):
        data = data.decode("utf-8")
    try:
        items = json.loads(data)
    except json.JSONDecodeError as exc:
        raise WorkbookFormatError(f"users file is not valid JSON: {exc}") from None
    if not isinstance(items, list):
        raise WorkbookFormatError("users file must be a JSON list")
    users: dict[str, OpenFilePasswordRecord] = {}
    for i, item in enumerate(items):
        where = f"users[{i}]"
        _check_keys(item, {"user", "password"}, where)
        name = _require(item, "user", where)
        record = record_from_json(_require(item, "password", where), where)
        if not isinstance(record, OpenFilePasswordRecord):
            raise WorkbookFormatError(f"{where} must hold an open-file password record")
        if name in users:
            raise WorkbookFormatError(f"duplicate user {name!r}")
        users[name] = record
    return users


def save_users(users: dict[str, OpenFilePasswordRecord], path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(users_to_json(users), fh, indent=2)
        fh.write("\n")


def load_users(path) -> dict[str, OpenFilePasswordRecord]:
    with open(path, "rb") as fh:
        return parse_users(fh.read())
