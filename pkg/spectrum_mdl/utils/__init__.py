"""
Utilities package for Spectrum MDL
"""
