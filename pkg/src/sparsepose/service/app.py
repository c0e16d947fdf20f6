"""HTTP service exposing pose synthesis, 2D completion, and model metadata.

The loaded dictionary and skeleton are immutable for the lifetime of the
process; request handling shares them without locks. Synthesis runs on a
bounded worker pool; overflow returns 429 instead of queuing unboundedly.
"""

from __future__ import annotations

import hashlib
import threading
from dataclasses import dataclass
from pathlib import Path

import anyio.to_thread
import numpy as np
from fastapi import FastAPI, Request
from fastapi.exceptions import RequestValidationError
from fastapi.responses import JSONResponse
from fastapi.staticfiles import StaticFiles

from ..dataset import mask_from_joints, mask_identity
from ..errors import DataError, InvalidInputError, SparsePoseError
from ..skeleton import Skeleton, default_skeleton, load_skeleton
from ..sparse import PoseDictionary
from ..synthesis import (
    DEFAULT_WEIGHTS,
    SynthesisRequest,
    complete_pose,
    reprojection_residual,
    synthesize,
)
from .schemas import (
    Complete2DRequest,
    Complete2DResponse,
    ErrorResponse,
    JointMeta,
    MaskCoords,
    MaskJoints,
    MetaResponse,
    SynthesizeRequest,
    SynthesizeResponse,
)


@dataclass
class ServiceSettings:
    dictionary_path: str | None = None
    skeleton_path: str | None = None
    default_kappa: int = 3
    kappa_max: int = 16
    workers: int = 2
    queue_factor: int = 4
    ui_dist: str | None = None


class Engine:
    """Loaded models plus per-session defaults and counters."""

    def __init__(self, dictionary: PoseDictionary, skeleton: Skeleton,
                 settings: ServiceSettings):
        skeleton.require_standard()
        if dictionary.dim != skeleton.pose_dim:
            raise InvalidInputError("dictionary and skeleton dimensions differ")
        self.dictionary = dictionary
        self.skeleton = skeleton
        self.settings = settings
        self.request_count = 0
        self._count_lock = threading.Lock()

    def bump(self):
        with self._count_lock:
            self.request_count += 1

    def kappa(self, requested: int | None) -> int:
        k = self.settings.default_kappa if requested is None else requested
        return max(1, min(k, self.settings.kappa_max))


def _error(status: int, error: str, detail=None, diagnostic_id=None) -> JSONResponse:
    body = ErrorResponse(error=error, detail=detail, diagnostic_id=diagnostic_id)
    return JSONResponse(status_code=status, content=body.model_dump())


def _diagnostic_id(payload: bytes) -> str:
    return hashlib.sha256(payload).hexdigest()[:12]


def _resolve_mask(spec, engine: Engine) -> np.ndarray:
    dim = engine.skeleton.pose_dim
    if spec == "identity":
        return mask_identity(dim)
    if isinstance(spec, MaskJoints):
        return mask_from_joints(spec.joints, engine.skeleton.joint_count)
    if isinstance(spec, MaskCoords):
        if len(spec.coords) != dim:
            raise InvalidInputError(
                f"mask has {len(spec.coords)} entries, expected {dim}")
        return np.asarray(spec.coords, dtype=bool)
    raise InvalidInputError("unrecognized mask spec")


def _resolve_pose(req: SynthesizeRequest, engine: Engine, mask: np.ndarray):
    dim = engine.skeleton.pose_dim
    if req.pose is not None:
        if len(req.pose) != dim:
            raise InvalidInputError(f"pose has {len(req.pose)} entries, expected {dim}")
        return np.asarray(req.pose, dtype=float), mask
    if req.joints:
        y0 = np.zeros(dim)
        seen = np.zeros(dim, dtype=bool)
        for key, coords in req.joints.items():
            jid = int(key)
            if not 1 <= jid <= engine.skeleton.joint_count:
                raise InvalidInputError(f"joint id {jid} out of range")
            if len(coords) != 3:
                raise InvalidInputError(f"joint {jid} needs 3 coordinates")
            y0[3 * (jid - 1):3 * jid] = coords
            seen[3 * (jid - 1):3 * jid] = True
        return y0, seen
    raise InvalidInputError("request needs either 'pose' or 'joints'")


def create_app(settings: ServiceSettings | None = None,
               dictionary: PoseDictionary | None = None,
               skeleton: Skeleton | None = None) -> FastAPI:
    settings = settings or ServiceSettings()

    from contextlib import asynccontextmanager

    @asynccontextmanager
    async def lifespan(app: FastAPI):
        load_models()
        yield

    app = FastAPI(title="sparsepose", version="1", lifespan=lifespan)
    app.state.engine = None
    capacity = max(1, settings.workers * settings.queue_factor)
    slots = threading.BoundedSemaphore(capacity)

    @app.exception_handler(RequestValidationError)
    async def _validation_handler(request: Request, exc: RequestValidationError):
        # malformed payloads are the caller's bug: 400 with field detail
        detail = [{"loc": list(map(str, e["loc"])), "msg": e["msg"]}
                  for e in exc.errors()]
        return _error(400, "malformed request", detail)

    def load_models():
        nonlocal dictionary, skeleton
        if skeleton is None:
            skeleton = load_skeleton(settings.skeleton_path) \
                if settings.skeleton_path else default_skeleton()
        if dictionary is None and settings.dictionary_path:
            dictionary = PoseDictionary.load(settings.dictionary_path)
        if dictionary is not None:
            app.state.engine = Engine(dictionary, skeleton, settings)

    def engine_or_none() -> Engine | None:
        return app.state.engine

    @app.get("/meta")
    async def meta():
        engine = engine_or_none()
        if engine is None:
            return _error(503, "service is still initializing")
        skel = engine.skeleton
        payload = MetaResponse(
            dim=engine.dictionary.dim, atoms=engine.dictionary.n,
            kappa_train=engine.dictionary.kappa_train,
            default_kappa=engine.settings.default_kappa,
            kappa_max=engine.settings.kappa_max,
            joint_count=skel.joint_count,
            joints=[JointMeta(id=j.id, name=j.name, parent=j.parent,
                              bone_length=float(skel.bone_lengths[j.id]))
                    for j in skel.joints],
            chains=[list(c) for c in skel.chains])
        return JSONResponse(payload.model_dump())

    @app.post("/synthesize")
    async def synthesize_endpoint(request: Request, body: SynthesizeRequest):
        engine = engine_or_none()
        if engine is None:
            return _error(503, "service is still initializing")
        if not slots.acquire(blocking=False):
            return _error(429, "worker queue full; retry shortly")
        try:
            mask = _resolve_mask(body.mask, engine)
            y0, mask = _resolve_pose(body, engine, mask)
            sr = SynthesisRequest(
                y0=y0, mask=mask, kappa=engine.kappa(body.kappa),
                tau0=np.zeros(3) if body.tau0 is None else np.asarray(body.tau0),
                weights=np.asarray(DEFAULT_WEIGHTS) if body.w is None
                else np.asarray(body.w, dtype=float))
            if not sr.mask.any():
                return _error(422, "infeasible constraints: mask excludes everything")
            result = await anyio.to_thread.run_sync(
                synthesize, engine.dictionary, engine.skeleton, sr)
            engine.bump()
            return JSONResponse(SynthesizeResponse(
                pose=[float(x) for x in result.pose],
                angles=[float(x) for x in result.q],
                support=[int(i) for i in result.code.support],
                coefficients=[float(x) for x in result.code.values],
                tau=tuple(float(t) for t in result.tau),
                coding_residual=float(result.code.residual),
                ik_residual=float(result.ik_residual),
                outer_iterations=result.outer_iterations,
                warnings=result.warnings,
                timings_ms={k: float(v) for k, v in result.timings_ms.items()},
            ).model_dump())
        except InvalidInputError as e:
            msg = str(e)
            if "mask excludes every coordinate" in msg:
                return _error(422, "infeasible constraints", msg)
            return _error(400, "invalid request", msg)
        except (DataError, np.linalg.LinAlgError, SparsePoseError) as e:
            diag = _diagnostic_id(await request.body())
            return _error(500, "solver failure", str(e), diagnostic_id=diag)
        finally:
            slots.release()

    @app.post("/complete2d")
    async def complete2d_endpoint(request: Request, body: Complete2DRequest):
        engine = engine_or_none()
        if engine is None:
            return _error(503, "service is still initializing")
        if len(body.labels) < 2:
            return _error(400, "need at least 2 labeled joints")
        joint_ids = [lbl.joint for lbl in body.labels]
        if len(set(joint_ids)) != len(joint_ids):
            return _error(400, "duplicate joint ids in labels")
        if not slots.acquire(blocking=False):
            return _error(429, "worker queue full; retry shortly")
        try:
            observed = [(lbl.joint, (lbl.u, lbl.v)) for lbl in body.labels]
            kappa = engine.kappa(body.kappa)

            def run():
                return complete_pose(
                    engine.dictionary, engine.skeleton, observed, kappa=kappa,
                    tau0=np.zeros(3) if body.tau0 is None else np.asarray(body.tau0),
                    weights=np.asarray(DEFAULT_WEIGHTS) if body.w is None
                    else np.asarray(body.w, dtype=float))

            result = await anyio.to_thread.run_sync(run)
            engine.bump()
            under = any("under-determined" in w for w in result.warnings)
            return JSONResponse(Complete2DResponse(
                pose=[float(x) for x in result.pose],
                angles=[float(x) for x in result.q],
                support=[int(i) for i in result.code.support],
                tau=tuple(float(t) for t in result.tau),
                reprojection_residual=float(reprojection_residual(result, observed)),
                under_determined=under,
                warnings=result.warnings,
                timings_ms={k: float(v) for k, v in result.timings_ms.items()},
            ).model_dump())
        except InvalidInputError as e:
            return _error(400, "invalid request", str(e))
        except (DataError, np.linalg.LinAlgError, SparsePoseError) as e:
            diag = _diagnostic_id(await request.body())
            return _error(500, "solver failure", str(e), diagnostic_id=diag)
        finally:
            slots.release()

    if settings.ui_dist and Path(settings.ui_dist).is_dir():
        app.mount("/ui", StaticFiles(directory=settings.ui_dist, html=True),
                  name="ui")

    return app
