"""
HCGL Recorder Environment - Capture the execution environment of a run.

Records OS, Python version, the versions of the numerical stack and the
HCGL_* variables, so a bundle says where its numbers were produced.
"""

import importlib.metadata
import os
import platform
import sys
from typing import Any, Dict

# Distributions whose versions can change results
TRACKED_PACKAGES = ("numpy", "scipy", "joblib", "pydantic", "cbor2", "typer", "rich")


def capture_os_info() -> Dict[str, str]:
    """
    Capture operating system information.

    Returns:
        dict: OS details
    """
    return {
        "system": platform.system(),
        "release": platform.release(),
        "machine": platform.machine(),
        "platform": platform.platform(),
    }


def capture_python_info() -> Dict[str, str]:
    return {
        "version": platform.python_version(),
        "implementation": platform.python_implementation(),
        "executable": sys.executable,
    }


def capture_package_versions() -> Dict[str, str]:
    """
    Versions of the tracked distributions; missing ones are reported as such.

    Returns:
        dict: Distribution name -> version
    """
    versions = {}
    for name in TRACKED_PACKAGES:
        try:
            versions[name] = importlib.metadata.version(name)
        except importlib.metadata.PackageNotFoundError:
            versions[name] = "not installed"
    return versions


def capture_hcgl_variables() -> Dict[str, str]:
    return {k: v for k, v in sorted(os.environ.items()) if k.startswith("HCGL_")}


def capture_environment() -> Dict[str, Any]:
    """
    Capture the complete environment snapshot stamped into report bundles.

    Returns:
        dict: Complete environment snapshot
    """
    return {
        "os": capture_os_info(),
        "python": capture_python_info(),
        "packages": capture_package_versions(),
        "environment_variables": capture_hcgl_variables(),
        "cpu_count": os.cpu_count(),
    }


def get_environment_summary() -> str:
    env = capture_environment()
    lines = [
        f"OS: {env['os']['system']} {env['os']['release']}",
        f"Python: {env['python']['version']} ({env['python']['implementation']})",
        "Stack: " + ", ".join(f"{k} {v}" for k, v in env["packages"].items()),
    ]
    return "\n".join(lines)
