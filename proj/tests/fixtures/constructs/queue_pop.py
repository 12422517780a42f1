def drain(queue):
    out = []
    while queue:
        out.append(queue.pop(0))
    return out
