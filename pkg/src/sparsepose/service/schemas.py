"""Request/response models for the posing service JSON API (schema v1)."""

from __future__ import annotations

from pydantic import BaseModel, Field, field_validator


class MaskJoints(BaseModel):
    joints: list[int]


class MaskCoords(BaseModel):
    coords: list[int]

    @field_validator("coords")
    @classmethod
    def _binary(cls, v):
        if any(c not in (0, 1) for c in v):
            raise ValueError("mask coords must be 0 or 1")
        return v


class SynthesizeRequest(BaseModel):
    v: int = 1
    pose: list[float] | None = None
    joints: dict[str, list[float]] | None = None
    mask: str | MaskJoints | MaskCoords = "identity"
    kappa: int | None = Field(default=None, ge=1, le=64)
    tau0: tuple[float, float, float] | None = None
    w: tuple[float, float, float] | None = None

    @field_validator("mask")
    @classmethod
    def _known_keyword(cls, v):
        if isinstance(v, str) and v != "identity":
            raise ValueError("mask keyword must be 'identity'")
        return v


class SynthesizeResponse(BaseModel):
    v: int = 1
    pose: list[float]
    angles: list[float]
    support: list[int]
    coefficients: list[float]
    tau: tuple[float, float, float]
    coding_residual: float
    ik_residual: float
    outer_iterations: int
    warnings: list[str]
    timings_ms: dict[str, float]


class Label2D(BaseModel):
    joint: int = Field(ge=1)
    u: float
    v: float


class Complete2DRequest(BaseModel):
    v: int = 1
    labels: list[Label2D]
    kappa: int | None = Field(default=None, ge=1, le=64)
    tau0: tuple[float, float, float] | None = None
    w: tuple[float, float, float] | None = None


class Complete2DResponse(BaseModel):
    v: int = 1
    pose: list[float]
    angles: list[float]
    support: list[int]
    tau: tuple[float, float, float]
    reprojection_residual: float
    under_determined: bool
    warnings: list[str]
    timings_ms: dict[str, float]


class JointMeta(BaseModel):
    id: int
    name: str
    parent: int
    bone_length: float


class MetaResponse(BaseModel):
    v: int = 1
    dim: int
    atoms: int
    kappa_train: int
    default_kappa: int
    kappa_max: int
    joint_count: int
    joints: list[JointMeta]
    chains: list[list[int]]


class ErrorResponse(BaseModel):
    v: int = 1
    error: str
    detail: str | list | dict | None = None
    diagnostic_id: str | None = None
