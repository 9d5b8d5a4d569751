"""Lexical semantic recognition toolkit."""
