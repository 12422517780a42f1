def top_k(lst, k):
    result = []
    for i in range(k):
        result.append(max(lst))
        lst.pop(max(lst))  # Line 5
    return result
