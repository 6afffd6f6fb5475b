def lookup():
    return unknown_helper()
