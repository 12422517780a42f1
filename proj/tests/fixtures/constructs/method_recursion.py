class Counter:
    def countdown(self, n):
        if n == 0:
            return []
        return [n] + self.countdown(n - 1)
