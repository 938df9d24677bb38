"""Formatting of stored records."""
from a.m import load


def render(name):
    record = load(name)
    return f"<{record['name']}>"
