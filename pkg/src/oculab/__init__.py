"""Desk-scale pipeline for predicting glycemic control and retinal disease
from synthetic external eye photographs: data generation, model training,
statistical evaluation, explainability, and pupil geometry analysis."""

__version__ = "0.1.0"
