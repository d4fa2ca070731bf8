"""Tests for the flagcheck toolkit."""
