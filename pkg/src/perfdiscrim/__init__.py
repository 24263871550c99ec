"""Discriminant regression trees for differential performance debugging."""
