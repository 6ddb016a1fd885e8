"""
Test suite for the semiperfect rings toolkit.
"""
