"""Protected spreadsheet toolkit.

A formula engine with cell-level protection semantics, weak/strong password
modeling with a crack demonstrator, role-based sharing with leak-free view
redaction, a protection auditor, a wire server, and a CLI.
"""

from .access import (
    AccessClass,
    MasterStore,
    RedactedView,
    Role,
    SharingAcl,
    apply_edit,
    derive_access_class,
    export_local,
    grant,
    render_view,
    revoke,
)
from .addresses import CellAddress, parse_address
from .audit import Finding, Severity, audit_protection, evasion_scan
from .engine import dependents_of, recalculate
from .errors import PwsError
from .fileformat import load_workbook, parse_workbook, save_workbook, serialize_workbook
from .formula import parse_formula, unparse
from .passwords import (
    ElementPasswordRecord,
    OpenFilePasswordRecord,
    crack_element,
    element_hash,
    make_element_record,
    make_open_file_record,
    verify_element,
    verify_open_file,
)
from .protection import (
    Actor,
    ClipboardPayload,
    Direction,
    ProtectionCapability,
    apply_recommended_protection,
    copy_range,
    effective_capability,
    navigate_next,
    set_protection_format,
)
from .values import CellError, ErrorKind, display_value
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

__all__ = [name for name in dir() if not name.startswith("_")]
__version__ = "0.1.0"
