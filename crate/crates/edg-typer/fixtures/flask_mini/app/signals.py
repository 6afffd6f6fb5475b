from app.helpers import after_this_request
from app.hooks import ResponseHook


def register_default_hook():
    hook = ResponseHook()
    return after_this_request(hook)
