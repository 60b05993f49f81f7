"""Benchmark harness for hidden household item storage prediction."""

__version__ = "0.1.0"
