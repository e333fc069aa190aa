"""Certified instances shipped as .lp files."""
