def count_words(sentence):
    words = 0
    space_mode = True
    for i in range(1, len(sentence)):  # Line 4
        if sentence[i] == ' ':
            if not space_mode:
                words += 1
            space_mode = True
        else:
            space_mode = False
    if not space_mode:
        words += 1
    return words
