DEBUG = False
SECRET_KEY = "dev"
MAX_CONTENT_LENGTH = 1024


def load_defaults():
    return {"debug": DEBUG, "secret": SECRET_KEY}
