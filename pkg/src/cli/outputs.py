"""
Artifact writers: CSV tables with a provenance header and JSON summaries
"""
import json
import logging
from pathlib import Path
from typing import Any, Dict, List, Union

import numpy as np
import pandas as pd

logger = logging.getLogger(__name__)


def to_jsonable(value: Any) -> Any:
    """Recursively convert numpy containers and scalars for json.dumps."""
    if isinstance(value, dict):
        return {str(k): to_jsonable(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [to_jsonable(v) for v in value]
    if isinstance(value, np.ndarray):
        return to_jsonable(value.tolist())
    if isinstance(value, np.bool_):
        return bool(value)
    if isinstance(value, np.integer):
        return int(value)
    if isinstance(value, (float, np.floating)):
        f = float(value)
        return f if np.isfinite(f) else None
    return value


def dumps(payload: Dict[str, Any]) -> str:
    return json.dumps(to_jsonable(payload), indent=2, sort_keys=True)


class ArtifactWriter:
    """
    Writes every artifact of one command run under `out_dir`.

    CSV files start with "# config_hash=<hash> seed=<seed>"; no artifact
    carries timestamps or host information, so reruns are byte-identical.
    """

    def __init__(self, out_dir: Union[str, Path], config_hash: str, seed: int):
        self.out_dir = Path(out_dir)
        self.config_hash = config_hash
        self.seed = seed
        self.written: List[str] = []

    @property
    def header(self) -> str:
        return f"# config_hash={self.config_hash} seed={self.seed}\n"

    def _path(self, name: str) -> Path:
        self.out_dir.mkdir(parents=True, exist_ok=True)
        self.written.append(name)
        return self.out_dir / name

    def write_csv(self, name: str, frame: Union[pd.DataFrame, List[Dict[str, Any]]]) -> Path:
        if not isinstance(frame, pd.DataFrame):
            frame = pd.DataFrame(frame)
        path = self._path(name)
        with open(path, "w", encoding="utf-8", newline="") as f:
            f.write(self.header)
            frame.to_csv(f, index=False, float_format="%.17g", lineterminator="\n")
        logger.info("Wrote %s rows=%d", path, len(frame))
        return path

    def write_json(self, name: str, payload: Dict[str, Any]) -> Path:
        path = self._path(name)
        body = {"config_hash": self.config_hash, "seed": self.seed, **payload}
        path.write_text(dumps(body) + "\n", encoding="utf-8")
        logger.info("Wrote %s", path)
        return path


def read_csv(path: Union[str, Path]) -> pd.DataFrame:
    """Read back a CSV artifact, skipping the provenance header."""
    return pd.read_csv(path, comment="#")
