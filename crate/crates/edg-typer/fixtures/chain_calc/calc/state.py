REGISTRY = {"runs": 0}
COUNTER = 0


def bump():
    global COUNTER
    COUNTER = COUNTER + 1
    return COUNTER
