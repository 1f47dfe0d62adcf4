"""Run configuration: JSON documents validated with pydantic."""

from __future__ import annotations

import hashlib
import json
import math
from typing import List, Literal, Optional, Tuple

from pydantic import BaseModel, ConfigDict, Field, ValidationError, model_validator

from .cft import SleParams
from .errors import ConfigError

SCHEMA_VERSION = 1

COMMANDS = ("weights", "simulate", "trace", "lpp", "martingale", "virasoro-check", "strip-compare")


class _Strict(BaseModel):
    model_config = ConfigDict(extra="forbid")


class ParamsModel(_Strict):
    kappa: float = Field(gt=0, le=1e3)
    rho: List[float] = []
    x: List[float] = []
    xi0: float = 0.0

    @model_validator(mode="after")
    def _lengths(self):
        if len(self.rho) != len(self.x):
            raise ValueError(
                f"params.rho has {len(self.rho)} entries but params.x has {len(self.x)}; "
                "they must match"
            )
        if self.xi0 in self.x:
            raise ValueError("params.x entries must differ from params.xi0")
        if len(set(self.x)) != len(self.x):
            raise ValueError("params.x entries must be distinct")
        return self

    def to_params(self) -> SleParams:
        return SleParams(self.kappa, tuple(self.rho), tuple(self.x), self.xi0)


class Numerics(_Strict):
    dt: float = Field(1e-3, gt=0, le=1.0)
    guard: Optional[float] = Field(None, gt=0)
    strip_guard: float = Field(1e-8, gt=0, lt=1.0)
    horizon: Optional[float] = Field(None, gt=0, le=1e5)
    L: float = Field(30.0, gt=1.0, le=700.0)
    rel_tol: float = Field(1e-9, ge=1e-14, le=1e-2)
    tip_offset: Optional[float] = Field(None, ge=0)
    fd_step: float = Field(1e-6, gt=0, le=1e-2)
    n_samples: int = Field(101, ge=2, le=100_000)


class MonteCarlo(_Strict):
    n_paths: int = Field(100, ge=0, le=10_000_000)
    slice_times: List[float] = []
    seed: Optional[int] = Field(None, ge=0, lt=2**63)
    threads: Optional[int] = Field(None, ge=1, le=1024)


class Output(_Strict):
    directory: str = "sle-rho-out"
    formats: List[Literal["json", "csv", "svg"]] = ["json", "csv"]


class LppOptions(_Strict):
    points: List[Tuple[float, float]] = [(0.0, math.pi / 2)]
    n_se: float = Field(3.0, gt=0)


class MartingaleOptions(_Strict):
    observable: Literal["F_re", "F_im", "h_re", "h_im", "one", "tilted"] = "F_im"
    mode: Literal["strip", "chordal"] = "strip"
    point: Tuple[float, float] = (0.0, math.pi / 2)
    policy: Literal["freeze", "exclude"] = "freeze"
    threshold: float = Field(3.5, gt=0)
    y: float = 1.0
    rho_y: float = 1.0


class StripCompareOptions(_Strict):
    points: List[Tuple[float, float]] = [(0.0, math.pi / 2)]
    C: float = Field(8.0, gt=0)


class RunConfig(_Strict):
    schema_version: Literal[1] = SCHEMA_VERSION
    command: Literal[COMMANDS] = "simulate"
    params: ParamsModel
    numerics: Numerics = Numerics()
    mc: MonteCarlo = MonteCarlo()
    output: Output = Output()
    lpp: LppOptions = LppOptions()
    martingale: MartingaleOptions = MartingaleOptions()
    strip_compare: StripCompareOptions = StripCompareOptions()


def _format_error(err: ValidationError) -> str:
    lines = []
    for e in err.errors():
        loc = ".".join(str(p) for p in e["loc"]) or "<root>"
        lines.append(f"{loc}: {e['msg']}")
    return "; ".join(lines)


def parse_config(text: str) -> RunConfig:
    """Validate a JSON config (or a manifest, whose ``config`` entry is used)."""
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"malformed JSON: {exc}") from exc
    if isinstance(doc, dict) and "manifest" in doc and "config" in doc:
        doc = doc["config"]
    return config_from_dict(doc)


def config_from_dict(doc) -> RunConfig:
    try:
        return RunConfig.model_validate(doc)
    except ValidationError as exc:
        raise ConfigError(_format_error(exc)) from exc


def dump_config(cfg: RunConfig) -> str:
    return json.dumps(cfg.model_dump(mode="json"), sort_keys=True, separators=(",", ":"))


def content_hash(cfg: RunConfig) -> str:
    """Git-style blob hash (sha256) of the canonical config serialization.

    The output directory is left out: it does not affect any computed value.
    """
    doc = cfg.model_dump(mode="json")
    doc["output"].pop("directory")
    body = json.dumps(doc, sort_keys=True, separators=(",", ":")).encode()
    return hashlib.sha256(b"blob %d\0" % len(body) + body).hexdigest()
