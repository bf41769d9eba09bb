"""Counterfactual data augmentation for debiasing opinion-summarization corpora."""

__version__ = "0.1.0"
