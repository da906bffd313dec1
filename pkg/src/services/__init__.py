"""
Solvers and models: finite differences, discrete vakonomic flows, the
optimal-control reduction, the cart-pole benchmark, the direct-transcription
oracle and the experiment drivers.
"""
