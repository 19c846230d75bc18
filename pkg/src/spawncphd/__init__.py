"""Gaussian-mixture CPHD multi-target tracking with target spawning."""

__version__ = "0.1.0"
