"""
Semiperfect rings toolkit package.
"""
