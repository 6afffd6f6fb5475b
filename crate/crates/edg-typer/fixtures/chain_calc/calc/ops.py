def add(a=1, b=2):
    return a + b


def scale(factor=2):
    return factor
