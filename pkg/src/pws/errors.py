"""Exception hierarchy for the whole toolkit.

Every exception carries a stable ``code`` string; the wire protocol and the
CLI report that code, so renaming a class must not change its code.
"""

from __future__ import annotations


class PwsError(Exception):
    """Base class; ``code`` is the stable machine-readable identifier."""

    code = "Error"

    def __init__(self, message: str = ""):
        super().__init__(message or self.code)


class FormulaSyntaxError(PwsError):
    code = "SyntaxError"

    def __init__(self, message: str, offset: int):
        super().__init__(f"{message} (at offset {offset})")
        self.offset = offset


class ArityError(FormulaSyntaxError):
    code = "ArityError"


class UnknownAddress(PwsError):
    code = "UnknownAddress"


class SheetNotVisible(PwsError):
    code = "SheetNotVisible"


class ProtectionNotEnabled(PwsError):
    code = "ProtectionNotEnabled"


class ProtectionTabUnavailable(PwsError):
    code = "ProtectionTabUnavailable"


class NoUnlockedCells(PwsError):
    code = "NoUnlockedCells"


class CornerNotSelectable(PwsError):
    code = "CornerNotSelectable"


class StructureProtected(PwsError):
    code = "StructureProtected"


class VeryHiddenNotListable(PwsError):
    code = "VeryHiddenNotListable"


class WrongPassword(PwsError):
    code = "WrongPassword"


class SheetNotVisibleToRole(PwsError):
    code = "SheetNotVisibleToRole"


class NotAuthenticated(PwsError):
    code = "NotAuthenticated"


class RevokedAccess(PwsError):
    code = "RevokedAccess"


class EditDenied(PwsError):
    code = "EditDenied"


class FormulaForbidden(PwsError):
    code = "FormulaForbidden"


class ExternalLinkForbidden(PwsError):
    code = "ExternalLinkForbidden"


class NotOwner(PwsError):
    code = "NotOwner"


class CannotDemoteOwner(PwsError):
    code = "CannotDemoteOwner"


class InvalidOverride(PwsError):
    code = "InvalidOverride"


class AuditFailed(PwsError):
    code = "AuditFailed"

    def __init__(self, findings):
        super().__init__(f"audit reported {len(findings)} blocking finding(s)")
        self.findings = list(findings)


class BadCredentials(PwsError):
    code = "BadCredentials"


class Throttled(PwsError):
    code = "Throttled"


class BindFailure(PwsError):
    code = "BindFailure"


class CorruptStore(PwsError):
    code = "CorruptStore"


class WorkbookFormatError(CorruptStore):
    """Strict-parse failure of a workbook/users file; reported as CorruptStore."""


class NoPassword(PwsError):
    code = "NoPassword"


class Infeasible(PwsError):
    code = "Infeasible"
