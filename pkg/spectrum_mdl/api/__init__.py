"""
API package for Spectrum MDL
Handles HTTP request/response routing
"""

from .endpoints import router

__all__ = ["router"]
