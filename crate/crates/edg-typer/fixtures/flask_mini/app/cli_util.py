from app.config import SECRET_KEY


def banner(width=40):
    line = "=" * width
    return line


def describe():
    return SECRET_KEY
