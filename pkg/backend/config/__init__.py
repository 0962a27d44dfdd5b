"""
Benchmark and backend settings.
"""
