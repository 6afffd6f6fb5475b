LABELS = {"info": 1, "warn": 2}


def label_code(name="info"):
    return LABELS
