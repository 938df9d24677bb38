"""Storage helpers for the mini application."""


def load(name):
    return {'name': name}


def save(record):
    return dict(record)
