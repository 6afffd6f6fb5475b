STOPWORDS: list[str] = ["a", "an", "the"]


def is_stopword(word):
    return word in STOPWORDS
