def is_mirror(s):
    return s[::-1] == s and s[-1] == s[0]
