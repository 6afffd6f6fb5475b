from calc.ops import scale
from calc.state import bump


def run():
    bump()
    return scale(3)
