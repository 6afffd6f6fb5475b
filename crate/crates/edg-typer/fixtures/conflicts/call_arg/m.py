def make_processor():
    return None


process = make_processor()


def dispatch(data="x", flags=True):
    return process(data, flags)
