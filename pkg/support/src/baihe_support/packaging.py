"""Package a trained model as a worker directory the engine can register.

A packaged directory holds: `manifest` (protocol v1), an executable
`worker.py` entry that speaks newline-delimited JSON on its standard
streams, the pickled model in `params.pkl`, and `deps.txt` pinning the
runtime dependencies.
"""

from __future__ import annotations

import importlib.metadata
import json
import pickle
import stat
import sys
from dataclasses import dataclass
from pathlib import Path

PROTOCOL_VERSION = 1

_WORKER_TEMPLATE = '''#!/usr/bin/env python3
"""Protocol-v1 inference worker; loads params.pkl from its own directory."""
import json
import os
import pickle
import sys

NAME = {name!r}
TASK = {task!r}


def main():
    here = os.path.dirname(os.path.abspath(__file__))
    with open(os.path.join(here, "params.pkl"), "rb") as fh:
        model = pickle.load(fh)
    sys.stdout.write(
        json.dumps({{"hello": NAME, "protocol_version": 1, "tasks": [TASK]}}) + "\\n"
    )
    sys.stdout.flush()
    for line in sys.stdin:
        if not line.strip():
            continue
        request = json.loads(line)
        if request.get("shutdown"):
            return
        try:
            response = {{
                "id": request["id"],
                "ok": True,
                "result": model.serve(request["payload"]),
            }}
        except Exception as exc:
            response = {{"id": request.get("id"), "ok": False, "error": str(exc)}}
        sys.stdout.write(json.dumps(response) + "\\n")
        sys.stdout.flush()


if __name__ == "__main__":
    main()
'''

_PINNED_PACKAGES = ("numpy", "scikit-learn")


@dataclass(frozen=True)
class PackagedModel:
    path: Path
    manifest: dict


def package_model(model, task: str, out_dir: str | Path, name: str | None = None) -> PackagedModel:
    """Write a model directory registrable via REGISTER_MODEL and runnable by
    START_MODEL."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    name = name or out_dir.name
    task = task.upper()
    model_task = getattr(model, "task", task)
    if model_task != task:
        raise ValueError(f"model serves task {model_task}, asked to package as {task}")
    with open(out_dir / "params.pkl", "wb") as fh:
        pickle.dump(model, fh)
    entry = out_dir / "worker.py"
    entry.write_text(_WORKER_TEMPLATE.format(name=name, task=task))
    entry.chmod(entry.stat().st_mode | stat.S_IXUSR | stat.S_IXGRP | stat.S_IXOTH)
    manifest = {
        "name": name,
        "task": task,
        "entry": "worker.py",
        "protocol_version": PROTOCOL_VERSION,
    }
    (out_dir / "manifest").write_text(json.dumps(manifest, indent=2) + "\n")
    pins = [f"python=={sys.version_info.major}.{sys.version_info.minor}"]
    for package in _PINNED_PACKAGES:
        try:
            pins.append(f"{package}=={importlib.metadata.version(package)}")
        except importlib.metadata.PackageNotFoundError:
            continue
    (out_dir / "deps.txt").write_text("\n".join(pins) + "\n")
    return PackagedModel(path=out_dir, manifest=manifest)
