def normalize(sentence):
    words = sentence.strip().lower().split()
    words.sort()
    return words
