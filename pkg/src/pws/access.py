"""Sharing roles and per-cell access classes, with leak-free projections.

An owner or collaborator has full control. A viewer sees displayed values
only and can copy nothing else. A limited user gets full access to data
cells (unless individually overridden) but display access to every formula
cell: the formula text never enters any payload built for such a session,
because redaction happens before serialization.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum

from .addresses import CellAddress
from .engine import recalculate
from .errors import (
    AuditFailed,
    CannotDemoteOwner,
    EditDenied,
    ExternalLinkForbidden,
    FormulaForbidden,
    InvalidOverride,
    NotOwner,
    RevokedAccess,
    SheetNotVisibleToRole,
)
from .formula import has_external_ref
from .values import display_value
from .workbook import (
    Empty,
    Formula,
    Literal,
    SheetVisibility,
    Workbook,
    content_from_input,
    content_source,
)


class Role(Enum):
    OWNER = "owner"
    COLLABORATOR = "collaborator"
    VIEWER = "viewer"
    LIMITED_USER = "limited_user"


class AccessClass(Enum):
    FULL_ACCESS = "full_access"
    DISPLAY_ACCESS = "display_access"
    NO_ACCESS = "no_access"

    @property
    def rank(self) -> int:
        return {"full_access": 2, "display_access": 1, "no_access": 0}[self.value]

    def __lt__(self, other: "AccessClass") -> bool:
        return self.rank < other.rank

    def __le__(self, other: "AccessClass") -> bool:
        return self.rank <= other.rank


@dataclass
class SharingAcl:
    owner: str
    grants: dict[str, Role] = field(default_factory=dict)
    allow_external_links: bool = True
    overrides: dict[CellAddress, AccessClass] = field(default_factory=dict)

    def role_of(self, user: str) -> Role | None:
        if user == self.owner:
            return Role.OWNER
        return self.grants.get(user)

    def set_override(self, workbook: Workbook, addr: CellAddress | str, cls: AccessClass) -> None:
        """Overrides restrict or relax data cells; formula cells can never be
        relaxed to full access for a limited user."""
        addr = workbook.resolve(addr)
        content = workbook.content(addr)
        if isinstance(content, Formula) and cls is AccessClass.FULL_ACCESS:
            raise InvalidOverride(f"{addr} holds a formula; full access cannot be granted")
        self.overrides[addr] = cls

    def clear_override(self, addr: CellAddress) -> None:
        self.overrides.pop(addr, None)

    def clone(self) -> "SharingAcl":
        return SharingAcl(
            owner=self.owner,
            grants=dict(self.grants),
            allow_external_links=self.allow_external_links,
            overrides=dict(self.overrides),
        )


def sheet_visible_to_role(sheet_visibility: SheetVisibility, role: Role) -> bool:
    if role is Role.OWNER:
        return True
    return sheet_visibility is SheetVisibility.VISIBLE


def derive_access_class(
    workbook: Workbook, acl: SharingAcl, role: Role, addr: CellAddress | str
) -> AccessClass:
    addr = workbook.resolve(addr)
    sheet = workbook.sheet(addr.sheet)
    if not sheet_visible_to_role(sheet.visibility, role):
        raise SheetNotVisibleToRole(f"sheet {addr.sheet!r} is not visible to {role.value}")
    if role in (Role.OWNER, Role.COLLABORATOR):
        return AccessClass.FULL_ACCESS
    if role is Role.VIEWER:
        return AccessClass.DISPLAY_ACCESS
    content = workbook.content(addr)
    override = acl.overrides.get(addr)
    if isinstance(content, Formula):
        if override is AccessClass.NO_ACCESS:
            return AccessClass.NO_ACCESS
        # Defense in depth: even a corrupted override never yields FULL here.
        return AccessClass.DISPLAY_ACCESS
    return override if override is not None else AccessClass.FULL_ACCESS


# --- Redacted views ---------------------------------------------------------------

@dataclass(frozen=True, slots=True)
class CellView:
    addr: str
    display: str
    editable: bool
    contents: str | None  # present (not None) only for full-access cells


@dataclass(frozen=True, slots=True)
class SheetView:
    name: str
    cells: tuple[CellView, ...]


@dataclass(frozen=True, slots=True)
class RedactedView:
    workbook_version: int
    sheets: tuple[SheetView, ...]

    def to_json(self) -> dict:
        return {
            "workbook_version": self.workbook_version,
            "sheets": [
                {
                    "name": sv.name,
                    "cells": [
                        {"addr": cv.addr, "display": cv.display, "editable": cv.editable}
                        | ({"contents": cv.contents} if cv.contents is not None else {})
                        for cv in sv.cells
                    ],
                }
                for sv in self.sheets
            ],
        }

    def serialize(self) -> bytes:
        import json

        return json.dumps(self.to_json(), ensure_ascii=False, sort_keys=True).encode("utf-8")


def _require_role(acl: SharingAcl | None, user: str) -> Role:
    if acl is None:
        raise RevokedAccess("workbook is not shared")
    role = acl.role_of(user)
    if role is None:
        raise RevokedAccess(f"user {user!r} has no access")
    return role


def render_view(workbook: Workbook, acl: SharingAcl, user: str) -> RedactedView:
    """Project the workbook for one user; redaction happens here, before any
    serialization, so protected contents never enter the payload."""
    role = _require_role(acl, user)
    values = workbook.values()
    sheets = []
    for sheet in workbook.sheets:
        if not sheet_visible_to_role(sheet.visibility, role):
            continue
        cells = []
        for (col, row) in sorted(sheet.cells, key=lambda p: (p[1], p[0])):
            addr = CellAddress(sheet.name, col, row)
            cls = derive_access_class(workbook, acl, role, addr)
            if cls is AccessClass.NO_ACCESS:
                continue
            cell = sheet.cells[(col, row)]
            full = cls is AccessClass.FULL_ACCESS
            cells.append(
                CellView(
                    addr=addr.a1,
                    display=display_value(values.get(addr)),
                    editable=full and role is not Role.VIEWER,
                    contents=content_source(cell.content) if full else None,
                )
            )
        sheets.append(SheetView(name=sheet.name, cells=tuple(cells)))
    return RedactedView(workbook_version=workbook.version, sheets=tuple(sheets))


# --- Editing ------------------------------------------------------------------------

def apply_edit(
    workbook: Workbook,
    acl: SharingAcl,
    user: str,
    addr: CellAddress | str,
    new_content: str,
) -> list[tuple[CellAddress, str]]:
    """Apply one cell edit under the session's privileges.

    Returns the (address, display value) pairs that changed and are visible
    to the editing session.
    """
    role = _require_role(acl, user)
    addr = workbook.resolve(addr)
    cls = derive_access_class(workbook, acl, role, addr)  # raises on hidden sheet
    if role is Role.VIEWER:
        raise EditDenied("viewers cannot edit")
    if role is Role.LIMITED_USER:
        if cls is not AccessClass.FULL_ACCESS:
            raise EditDenied(f"cell {addr} is {cls.value} for this session")
        if new_content.startswith("="):
            raise FormulaForbidden("limited users cannot write cell formulas")
    content = content_from_input(new_content)
    if (
        isinstance(content, Formula)
        and has_external_ref(content.ast)
        and not acl.allow_external_links
    ):
        raise ExternalLinkForbidden("external links are disabled for this workbook")

    before = dict(workbook.values())
    workbook.set_content(addr, content)
    after = recalculate(workbook)
    workbook._values = after

    deltas: list[tuple[CellAddress, str]] = []
    for changed in sorted(set(before) | set(after), key=lambda a: (a.sheet, a.row, a.col)):
        if before.get(changed) == after.get(changed) and changed != addr:
            continue
        sheet = workbook.sheet(changed.sheet)
        if not sheet_visible_to_role(sheet.visibility, role):
            continue
        if derive_access_class(workbook, acl, role, changed) is AccessClass.NO_ACCESS:
            continue
        deltas.append((changed, display_value(after.get(changed))))
    return deltas


# --- Export -------------------------------------------------------------------------

def export_local(workbook: Workbook, acl: SharingAcl, user: str) -> bytes:
    """A local copy: full privilege exports the master content model; any
    lower privilege gets values in place of protected contents."""
    from .fileformat import serialize_workbook

    role = _require_role(acl, user)
    if role is Role.OWNER:
        return serialize_workbook(workbook)
    values = workbook.values()
    out = workbook.clone()
    out.acl = None
    out.open_file_password = None
    out.protection.element_password = None
    out.sheets = [s for s in out.sheets if sheet_visible_to_role(s.visibility, role)]
    for sheet in out.sheets:
        sheet.protection.element_password = None
        for (col, row) in sorted(sheet.cells):
            addr = CellAddress(sheet.name, col, row)
            cls = derive_access_class(workbook, acl, role, addr)
            if cls is AccessClass.NO_ACCESS:
                del sheet.cells[(col, row)]
                continue
            if cls is AccessClass.FULL_ACCESS:
                continue
            cell = sheet.cells[(col, row)]
            if isinstance(cell.content, Empty):
                continue
            value = values.get(addr)
            if isinstance(value, float) and not isinstance(value, bool):
                cell.content = Literal(value)
            else:
                cell.content = Literal(display_value(value))
            cell.flattened = True
    return serialize_workbook(out)


# --- Grants -------------------------------------------------------------------------

def grant(acl: SharingAcl, session_user: str, user: str, role: Role) -> None:
    """Invitation-only: only the owner may share, and ownership never moves
    through a grant."""
    if session_user != acl.owner:
        raise NotOwner("only the owner may grant access")
    if user == acl.owner or role is Role.OWNER:
        raise CannotDemoteOwner("ownership cannot be granted or reassigned")
    acl.grants[user] = role


def revoke(acl: SharingAcl, session_user: str, user: str) -> None:
    if session_user != acl.owner:
        raise NotOwner("only the owner may revoke access")
    if user == acl.owner:
        raise CannotDemoteOwner("the owner cannot be revoked")
    acl.grants.pop(user, None)


# --- Version store ---------------------------------------------------------------

class MasterStore:
    """The master copy plus every prior published version, owner-retrievable."""

    def __init__(self, workbook: Workbook):
        if workbook.acl is None:
            raise ValueError("a master workbook must carry an ACL")
        self.workbook = workbook
        self.history: dict[int, Workbook] = {}

    @property
    def version(self) -> int:
        return self.workbook.version

    def publish(self, session_user: str, new_workbook: Workbook, *, force: bool = False) -> int:
        from .audit import Severity, audit_protection

        if session_user != self.workbook.acl.owner:
            raise NotOwner("only the owner may publish")
        if not force:
            blocking = [
                f for f in audit_protection(new_workbook) if f.severity is Severity.ERROR
            ]
            if blocking:
                raise AuditFailed(blocking)
        if new_workbook.acl is None:
            new_workbook.acl = self.workbook.acl.clone()
        old = self.workbook
        self.history[old.version] = old
        new_workbook.version = old.version + 1
        self.workbook = new_workbook
        return new_workbook.version

    def get_version(self, session_user: str, version: int) -> Workbook:
        if version == self.workbook.version:
            return self.workbook
        if session_user != self.workbook.acl.owner:
            raise NotOwner("prior versions are owner-retrievable only")
        try:
            return self.history[version]
        except KeyError:
            raise ValueError(f"no version {version}") from None
