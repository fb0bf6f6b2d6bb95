"""
app/main.py
───────────
FastAPI service around the qLR emulator.
Entry point: python run.py  →  http://HOST:PORT/docs (127.0.0.1:8000 by default)
"""

import time
import uuid
from contextlib import asynccontextmanager

from fastapi import FastAPI, Request
from fastapi.middleware.cors import CORSMiddleware
from fastapi.responses import JSONResponse

from app.api.routes import router, to_http
from app.core.config import settings
from app.core.errors import QLRError
from app.utils.logger import bind_context, get_logger

logger = get_logger(__name__)


@asynccontextmanager
async def lifespan(app: FastAPI):
    logger.info(
        "qLR emulator starting",
        version=settings.APP_VERSION,
        env=settings.ENV,
        max_determinants=settings.MAX_DETERMINANTS,
    )
    yield
    logger.info("qLR emulator shutting down")


app = FastAPI(
    title="qLR emulator",
    description="Classical emulation of quantum linear response on an orbital-optimized UCC ground state.",
    version=settings.APP_VERSION,
    docs_url="/docs",
    redoc_url="/redoc",
    lifespan=lifespan,
)

app.add_middleware(
    CORSMiddleware,
    allow_origins=settings.CORS_ORIGINS,
    allow_credentials=False,
    allow_methods=["GET", "POST"],
    allow_headers=["*"],
)


# ── Request timing
@app.middleware("http")
async def log_requests(request: Request, call_next):
    started = time.perf_counter()
    with bind_context(request_id=uuid.uuid4().hex[:8]):
        response = await call_next(request)
        logger.info(
            "Request handled",
            method=request.method,
            path=request.url.path,
            status=response.status_code,
            seconds=round(time.perf_counter() - started, 3),
        )
    return response


app.include_router(router, prefix="/api/v1")


# ── Domain errors outside a route use the route status mapping
@app.exception_handler(QLRError)
async def qlr_exception_handler(request: Request, exc: QLRError):
    http = to_http(exc)
    logger.error("Domain error", error=str(exc), module=exc.module, path=request.url.path)
    return JSONResponse(status_code=http.status_code, content={"detail": http.detail})


@app.exception_handler(Exception)
async def global_exception_handler(request: Request, exc: Exception):
    logger.error("Unhandled exception", error=str(exc), path=str(request.url))
    return JSONResponse(status_code=500, content={"detail": "Internal server error"})


@app.get("/health", tags=["Health"])
async def health_check():
    return {"status": "ok", "version": settings.APP_VERSION}
