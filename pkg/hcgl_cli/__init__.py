"""
HCGL CLI - Command-line interface for HCGL experiments.
"""
