from app.globals import _cv_request


def after_this_request(f):
    ctx = _cv_request.get()
    ctx._after_request_functions.append(f)
    return f
