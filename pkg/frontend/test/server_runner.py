#!/usr/bin/env python3
"""Run the HTTP server on an ephemeral port for the client tests.

Usage: server_runner.py <store-dir> <users-file>
Prints ``PORT <n>`` once bound, then serves until killed.
"""

import sys
from pathlib import Path

sys.path.insert(0, str(Path(__file__).resolve().parents[2] / "src"))

from pws.server import PwsService, serve


def main() -> int:
    store_dir, users_path = sys.argv[1], sys.argv[2]
    service = PwsService(store_dir, users_path)
    handle = serve(service, "127.0.0.1", 0, transport="http", background=True)
    print(f"PORT {handle.port}", flush=True)
    handle.thread.join()
    return 0


if __name__ == "__main__":
    sys.exit(main())
