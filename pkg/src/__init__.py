"""
Discrete vakonomic variational integrators and the cart-pole benchmark.

Subpackages: ``models`` (value types and problems), ``schemas`` (pydantic
settings and parameters), ``services`` (solvers and experiments),
``repositories`` (CSV, summary and SVG output) and ``utils``.
"""
