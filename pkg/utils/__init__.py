"""Shared utilities for the AS-G1 surface analysis tool."""
