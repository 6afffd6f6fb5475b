def total():
    return 41
