"""Client for the external ``bpgenc`` / ``bpgdec`` reference binaries.

Each call works inside its own temporary directory, so concurrent calls never
share files and nothing is left behind on failure.  ``LICOMP_BPG_PATH`` (a
directory, or the path of ``bpgenc`` itself) takes precedence over ``PATH``.
"""

import os
import shutil
import subprocess
import tempfile
from pathlib import Path

from licomp.errors import ExternalToolError

ENV_VAR = "LICOMP_BPG_PATH"


def find_tool(name):
    override = os.environ.get(ENV_VAR)
    if override:
        root = Path(override)
        if root.is_file():
            root = root.parent
        candidate = root / name
        if candidate.is_file() and os.access(candidate, os.X_OK):
            return str(candidate)
        raise ExternalToolError(f"{name} not found under {ENV_VAR}={override}")
    found = shutil.which(name)
    if found is None:
        raise ExternalToolError(f"{name} not found on PATH (set {ENV_VAR} to its directory)")
    return found


def bpg_available():
    try:
        find_tool("bpgenc")
        find_tool("bpgdec")
    except ExternalToolError:
        return False
    return True


def _run(cmd):
    try:
        proc = subprocess.run(cmd, capture_output=True, text=True, check=False)
    except OSError as exc:
        raise ExternalToolError(f"could not run {cmd[0]}: {exc}") from None
    if proc.returncode != 0:
        raise ExternalToolError(
            f"{Path(cmd[0]).name} exited with status {proc.returncode}",
            output=(proc.stdout + proc.stderr).strip(),
        )


def bpg_encode(img, qp):
    """Encode an 8-bit :class:`Image` with ``bpgenc -q qp``; returns the .bpg bytes."""
    from licomp.io import save_image

    if not 0 <= qp <= 51:
        raise ValueError(f"BPG qp must be in [0, 51], got {qp}")
    enc = find_tool("bpgenc")
    with tempfile.TemporaryDirectory(prefix="licomp-bpg-") as tmp:
        src, dst = Path(tmp) / "in.png", Path(tmp) / "out.bpg"
        save_image(img.to_u8(), src)
        _run([enc, "-q", str(qp), "-o", str(dst), str(src)])
        return dst.read_bytes()


def bpg_decode(data, gray=False):
    """Decode .bpg bytes with ``bpgdec`` into an 8-bit :class:`Image`."""
    from licomp.codec.image import convert_colorspace
    from licomp.io import load_image

    dec = find_tool("bpgdec")
    with tempfile.TemporaryDirectory(prefix="licomp-bpg-") as tmp:
        src, dst = Path(tmp) / "in.bpg", Path(tmp) / "out.png"
        src.write_bytes(data)
        _run([dec, "-o", str(dst), str(src)])
        img = load_image(dst)
    if gray and img.colorspace == "RGB":
        img = convert_colorspace(img, "Gray")
    return img
