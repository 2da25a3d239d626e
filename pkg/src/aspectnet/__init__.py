"""Multi-aspect sentiment toolkit: autodiff core, encoders, weighted ensemble, explanations, transfer."""

__version__ = "0.1.0"
