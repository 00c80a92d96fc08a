"""
Tests for dialogue attention.
"""
