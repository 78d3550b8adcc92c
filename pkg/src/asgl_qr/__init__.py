"""Adaptive sparse group LASSO for quantile regression."""
