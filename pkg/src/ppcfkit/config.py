# src/ppcfkit/config.py
from __future__ import annotations

import dataclasses
import re
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Callable, Dict, Final, Mapping, Optional

from .errors import ConfigError
from .scalar import FLOAT, ScalarKind
from .semantics import SemParams

__all__ = ["RunConfig", "read_config_file", "parse_config_text", "build_config", "CONFIG_KEYS"]

_LINE_RE: Final = re.compile(r"^\s*([A-Za-z][A-Za-z0-9_-]*)\s*=\s*(.*?)\s*$")


@dataclass(frozen=True)
class RunConfig:
    fuel: int = 10_000
    max_tape: int = 64
    seed: int = 0
    samples: int = 10_000
    trunc: int = 64
    fix_tol: float = 1e-12
    fix_iters: int = 100_000
    tangent_tol: float = 1e-9

    def sem_params(self, scalar: ScalarKind = FLOAT) -> SemParams:
        return SemParams(
            K=self.trunc,
            fix_tol=self.fix_tol,
            fix_max_iters=self.fix_iters,
            tangent_tol=self.tangent_tol,
            scalar=scalar,
        )


def _nonneg_int(text: str) -> int:
    v = int(text)
    if v < 0:
        raise ValueError("must be >= 0")
    return v


def _pos_float(text: str) -> float:
    v = float(text)
    if not v > 0:
        raise ValueError("must be > 0")
    return v


# config key -> (RunConfig field, parser)
CONFIG_KEYS: Final[Dict[str, tuple[str, Callable[[str], Any]]]] = {
    "fuel": ("fuel", _nonneg_int),
    "max-tape": ("max_tape", _nonneg_int),
    "seed": ("seed", int),
    "samples": ("samples", _nonneg_int),
    "trunc": ("trunc", _nonneg_int),
    "fix-tol": ("fix_tol", _pos_float),
    "fix-iters": ("fix_iters", _nonneg_int),
    "tangent-tol": ("tangent_tol", _pos_float),
}


def parse_config_text(text: str, source: str = "<config>") -> Dict[str, Any]:
    """key = value lines; '#' starts a comment. Returns RunConfig field values."""
    out: Dict[str, Any] = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0]
        if not line.strip():
            continue
        m = _LINE_RE.match(line)
        if not m:
            raise ConfigError(f"{source}:{lineno}: expected 'key = value', got {raw.strip()!r}")
        key = m.group(1).lower().replace("_", "-")
        if key not in CONFIG_KEYS:
            raise ConfigError(f"{source}:{lineno}: unknown key {m.group(1)!r}", key=key)
        name, conv = CONFIG_KEYS[key]
        try:
            out[name] = conv(m.group(2))
        except ValueError as e:
            raise ConfigError(f"{source}:{lineno}: bad value for {key}: {m.group(2)!r} ({e})", key=key) from None
    return out


def read_config_file(path: Path) -> Dict[str, Any]:
    path = Path(path)
    return parse_config_text(path.read_text(encoding="utf-8"), str(path))


def build_config(file_values: Optional[Mapping[str, Any]] = None, flags: Optional[Mapping[str, Any]] = None) -> RunConfig:
    """Defaults, then the config file, then flags that were given (not None)."""
    merged: Dict[str, Any] = dict(file_values or {})
    for k, v in (flags or {}).items():
        if v is not None:
            merged[k] = v
    fields = {f.name for f in dataclasses.fields(RunConfig)}
    unknown = set(merged) - fields
    if unknown:
        raise ConfigError(f"unknown settings: {sorted(unknown)}")
    return RunConfig(**merged)
