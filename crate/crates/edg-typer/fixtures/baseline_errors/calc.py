def greet(name):
    return "hello " + name


total = 1 + "one"
message = "abc".reverse()
