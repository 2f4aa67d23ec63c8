"""
HCGL Core Container - Report directories with hashed side files.

A report directory holds:
- bundle.json (ReportBundle, written last)
- side files such as sweep.csv, trace.csv, state_space.json
The bundle's file_manifest records the SHA-256 of every side file.
"""

import hashlib
import json
import threading
from pathlib import Path
from typing import Dict, Optional, Union

from hcgl_core.schemas import ReportBundle
from hcgl_core.serialize import get_canonical_hash, to_json

BUNDLE_NAME = "bundle.json"

# Fields that vary between otherwise identical runs
FINGERPRINT_EXCLUDE = {"created_at", "environment", "file_manifest", "fingerprint"}

_write_lock = threading.Lock()


def compute_fingerprint(bundle: ReportBundle) -> str:
    return get_canonical_hash(bundle, FINGERPRINT_EXCLUDE)


class ReportContainer:
    """
    Manages report directory creation and verification.

    Side files are hashed into ``file_manifest`` before bundle.json is written,
    so a bundle always describes the files next to it.
    """

    @staticmethod
    def _compute_file_hash(file_path: Path) -> str:
        sha256 = hashlib.sha256()
        with open(file_path, "rb") as f:
            while chunk := f.read(8192):
                sha256.update(chunk)
        return sha256.hexdigest()

    @staticmethod
    def pack(
        out_dir: Path,
        bundle: ReportBundle,
        side_files: Optional[Dict[str, Union[str, bytes]]] = None,
    ) -> Path:
        """
        Write side files and the bundle into ``out_dir``.

        Args:
            out_dir: Report directory (created if missing)
            bundle: Bundle to write; file_manifest and fingerprint are filled in
            side_files: File name -> content

        Returns:
            Path: Location of bundle.json
        """
        with _write_lock:
            out_dir.mkdir(parents=True, exist_ok=True)
            manifest = {}
            for name, content in sorted((side_files or {}).items()):
                path = out_dir / name
                if isinstance(content, bytes):
                    path.write_bytes(content)
                else:
                    path.write_text(content, encoding="utf-8", newline="")
                manifest[name] = ReportContainer._compute_file_hash(path)

            bundle.file_manifest = manifest
            bundle.fingerprint = compute_fingerprint(bundle)
            bundle_path = out_dir / BUNDLE_NAME
            bundle_path.write_text(to_json(bundle), encoding="utf-8")
        return bundle_path

    @staticmethod
    def read_bundle(out_dir: Path) -> ReportBundle:
        """
        Read and validate bundle.json from a report directory.

        Raises:
            FileNotFoundError: If the directory has no bundle.json
            ValueError: If bundle.json is not valid JSON
        """
        bundle_path = out_dir / BUNDLE_NAME if out_dir.is_dir() else out_dir
        if not bundle_path.exists():
            raise FileNotFoundError(f"Report bundle not found: {bundle_path}")
        try:
            data = json.loads(bundle_path.read_text(encoding="utf-8"))
        except json.JSONDecodeError as e:
            raise ValueError(f"Invalid JSON in {bundle_path.name}: {e}")
        return ReportBundle.model_validate(data, context={"readback": True})

    @staticmethod
    def verify_integrity(out_dir: Path) -> tuple[bool, dict[str, str]]:
        """
        Re-hash side files and recompute the bundle fingerprint.

        Returns:
            tuple: (all_valid, mismatches: name -> reason)
        """
        bundle = ReportContainer.read_bundle(out_dir)
        root = out_dir if out_dir.is_dir() else out_dir.parent
        mismatches = {}

        for name, expected in bundle.file_manifest.items():
            path = root / name
            if not path.exists():
                mismatches[name] = "File missing"
                continue
            actual = ReportContainer._compute_file_hash(path)
            if actual != expected:
                mismatches[name] = f"Hash mismatch: expected {expected}, got {actual}"

        recomputed = compute_fingerprint(bundle)
        if bundle.fingerprint != recomputed:
            mismatches[BUNDLE_NAME] = (
                f"Fingerprint mismatch: expected {bundle.fingerprint}, got {recomputed}"
            )
        return (len(mismatches) == 0, mismatches)
