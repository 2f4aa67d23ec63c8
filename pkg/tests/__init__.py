"""
HCGL Tests - Test suite for the hcgl packages.
"""
