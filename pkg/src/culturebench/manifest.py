"""Run manifest: per-stage input/output digests, counts, and staleness checking."""

from __future__ import annotations

import hashlib
import json
import uuid
from datetime import datetime, timezone
from pathlib import Path


class MissingInput(FileNotFoundError):
    """A stage input that an earlier stage should have produced."""

    def __init__(self, path: Path | str, producing_stage: str):
        super().__init__(f"missing input {path}; run `{producing_stage}` first")
        self.path = str(path)
        self.producing_stage = producing_stage


def file_digest(path: Path | str) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(65536), b""):
            h.update(chunk)
    return h.hexdigest()


def require_input(path: Path | str, producing_stage: str) -> Path:
    path = Path(path)
    if not path.exists():
        raise MissingInput(path, producing_stage)
    return path


class Manifest:
    """manifest.json beside the stage outputs; one entry per stage, newest wins."""

    def __init__(self, out_dir: Path | str, config_snapshot: dict | None = None):
        self.path = Path(out_dir) / "manifest.json"
        if self.path.exists():
            self.data = json.loads(self.path.read_text(encoding="utf-8"))
        else:
            self.data = {
                "run_id": uuid.uuid4().hex,
                "config": config_snapshot or {},
                "stages": {},
            }
        if config_snapshot is not None:
            self.data["config"] = config_snapshot

    def record_stage(
        self,
        stage: str,
        inputs: dict[str, Path | str],
        outputs: dict[str, Path | str],
        counts: dict[str, int],
        seed: int,
        started: str,
    ) -> None:
        self.data["stages"][stage] = {
            "inputs": {name: {"path": str(p), "sha256": file_digest(p)} for name, p in inputs.items()},
            "outputs": {name: {"path": str(p), "sha256": file_digest(p)} for name, p in outputs.items()},
            "counts": counts,
            "seed": seed,
            "started": started,
            "finished": datetime.now(timezone.utc).isoformat(),
        }
        self.save()

    def save(self) -> None:
        self.path.parent.mkdir(parents=True, exist_ok=True)
        self.path.write_text(json.dumps(self.data, ensure_ascii=False, indent=2, sort_keys=True), encoding="utf-8")

    def check(self) -> list[str]:
        """Detects stale or missing artifacts across the recorded chain."""
        issues: list[str] = []
        produced: dict[str, str] = {}
        for stage, entry in self.data["stages"].items():
            for name, meta in entry["outputs"].items():
                produced[meta["path"]] = meta["sha256"]
        for stage, entry in self.data["stages"].items():
            for name, meta in {**entry["inputs"], **entry["outputs"]}.items():
                path = Path(meta["path"])
                if not path.exists():
                    issues.append(f"{stage}: {name} missing at {path}")
                    continue
                digest = file_digest(path)
                if digest != meta["sha256"]:
                    issues.append(f"{stage}: {name} changed since recorded ({path})")
            for name, meta in entry["inputs"].items():
                recorded = produced.get(meta["path"])
                if recorded is not None and recorded != meta["sha256"]:
                    issues.append(f"{stage}: consumed stale {name} ({meta['path']})")
        return issues
