"""
This package contains repository implementations for experiment output.

Repositories keep file formats (CSV trajectories, SVG plots, run summaries)
out of the solver and experiment code.
"""
