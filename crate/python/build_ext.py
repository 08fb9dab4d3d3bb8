"""Builds the extension with cargo and copies it next to this script."""

import pathlib
import shutil
import subprocess
import sys
import sysconfig

root = pathlib.Path(__file__).resolve().parent.parent
subprocess.run(["cargo", "build", "--release", "-p", "otfs-py"], cwd=root, check=True)
lib = {"darwin": "libotfs_pilot.dylib", "win32": "otfs_pilot.dll"}.get(sys.platform, "libotfs_pilot.so")
suffix = sysconfig.get_config_var("EXT_SUFFIX") or ".so"
dest = pathlib.Path(__file__).resolve().parent / f"otfs_pilot{suffix}"
shutil.copy(root / "target" / "release" / lib, dest)
print(dest)
