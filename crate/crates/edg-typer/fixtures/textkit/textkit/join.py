from textkit.labels import LABELS


def join_labels(sep=", "):
    names = sorted(LABELS)
    return sep.join(names)
