def render(value, precise=False):
    if precise:
        return "precise"
    return "plain"


def pick(flag=True):
    if flag:
        return 1
    return "one"
