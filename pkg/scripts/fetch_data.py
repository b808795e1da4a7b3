"""Download the IHDP / Jobs data repository archive.

    python scripts/fetch_data.py DEST

Then point ``DFW_DATA_DIR`` at the directory holding ``ihdp_npci_*.csv``
and the Jobs CSV to enable the real-data tests.
"""

import sys
import urllib.error

from dfw.datasets import ARCHIVE_URL, fetch_repository_archive

if __name__ == "__main__":
    if len(sys.argv) != 2:
        raise SystemExit(__doc__)
    print(f"fetching {ARCHIVE_URL}")
    try:
        print(fetch_repository_archive(sys.argv[1]))
    except urllib.error.URLError as exc:
        raise SystemExit(f"download failed: {exc.reason}")
