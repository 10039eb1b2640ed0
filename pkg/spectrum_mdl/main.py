"""
Spectrum MDL API - Main Application
FastAPI application serving pipeline runs, dataset uploads and dominant ratios
"""

from fastapi import FastAPI
from fastapi.middleware.cors import CORSMiddleware

from . import __version__
from .api import router

app = FastAPI(
    title="Spectrum MDL API",
    description="Train Spectrum VAEs, certify their codes and report achieved description lengths",
    version=__version__
)

# CORS configuration for web access
app.add_middleware(
    CORSMiddleware,
    allow_origins=["*"],
    allow_credentials=True,
    allow_methods=["*"],
    allow_headers=["*"],
)

# Include API routes
app.include_router(router)


@app.get("/")
async def root():
    """
    Root endpoint with API information
    """
    return {
        "service": "Spectrum MDL API",
        "version": __version__,
        "status": "running",
        "endpoints": {
            "runs": "/api/v1/runs",
            "datasets": "/api/v1/datasets",
            "dominant_ratio": "/api/v1/dominant-ratio",
            "docs": "/docs"
        }
    }


@app.get("/health")
async def health_check():
    """
    Health check endpoint
    """
    return {
        "status": "healthy",
        "service": "spectrum-mdl-api"
    }


if __name__ == "__main__":
    import uvicorn

    uvicorn.run(
        "spectrum_mdl.main:app",
        host="0.0.0.0",
        port=8000,
        reload=True
    )
