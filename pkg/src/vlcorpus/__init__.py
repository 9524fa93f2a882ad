"""Bilingual multimodal medical corpus construction pipeline."""

__version__ = "0.1.0"
