def scale(factor=2):
    return factor


def use():
    return scale(3)
