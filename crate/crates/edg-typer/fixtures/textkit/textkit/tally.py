from textkit.words import STOPWORDS


def stopword_count():
    total = len(STOPWORDS)
    return total
