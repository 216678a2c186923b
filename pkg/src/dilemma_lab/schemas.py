"""Pydantic request/response models for the experiment service."""

from __future__ import annotations

from typing import Literal

from pydantic import BaseModel, ConfigDict, Field

ALL_CONDITIONS = ["full_curriculum", "scrambled", "direct_precursor", "control"]


class RunRequest(BaseModel):
    model_config = ConfigDict(extra="forbid")

    conditions: list[str] = Field(default_factory=lambda: list(ALL_CONDITIONS))
    trials: int = Field(default=30, ge=1)
    seed: int | None = None
    mode: Literal["mock", "live"] = "mock"
    out_dir: str
    config: dict | None = None
    precursor_rounds: int = Field(default=3, ge=1)
    max_workers: int | None = Field(default=None, ge=1)


class RunResponse(BaseModel):
    out_dir: str
    summary_path: str
    summary: dict


class PilotRequest(BaseModel):
    model_config = ConfigDict(extra="forbid")

    comm: bool
    grouping: Literal["hetero", "coalition"]
    trials: int = Field(default=30, ge=1)
    rounds: int = Field(default=3, ge=1)
    seed: int | None = None
    mode: Literal["mock", "live"] = "mock"
    out_dir: str
    config: dict | None = None
    max_workers: int | None = Field(default=None, ge=1)


class AnalyzeRequest(BaseModel):
    model_config = ConfigDict(extra="forbid")

    in_dir: str
    out_dir: str


class AnalyzeResponse(BaseModel):
    out_dir: str
    csv_files: dict[str, str]
    conditions: list[dict]


class ValidateRequest(BaseModel):
    model_config = ConfigDict(extra="forbid")

    in_dir: str
    max_violations: int = Field(default=10, ge=1)


class ValidateResponse(BaseModel):
    ok: bool
    checked_files: int
    total_violations: int
    violations: list[str]  # first max_violations, formatted


class ExportRequest(BaseModel):
    model_config = ConfigDict(extra="forbid")

    analysis_path: str
    out_dir: str


class ExportResponse(BaseModel):
    out_dir: str
    csv_files: dict[str, str]


class ErrorDetail(BaseModel):
    kind: Literal["config", "auth", "io", "internal"]
    message: str
