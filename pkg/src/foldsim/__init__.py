"""Simulated-to-real fold segmentation toolkit for colonoscopy."""

__version__ = "0.1.0"
