"""
Utility functions and helpers
"""

