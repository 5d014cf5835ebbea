"""Test cases, error norms and experiment drivers."""
