"""Benchmark encodings shipped as .lp files."""
