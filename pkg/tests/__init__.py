"""Test package for mechkit."""
