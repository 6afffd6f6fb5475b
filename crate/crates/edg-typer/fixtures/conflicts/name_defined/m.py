def configure(mode="fast"):
    return mode
