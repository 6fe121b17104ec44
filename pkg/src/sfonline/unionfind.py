"""Disjoint-set forest with path compression, keyed by arbitrary hashables."""


class UnionFind:
    def __init__(self, items=()):
        self.parent = {}
        for x in items:
            self.parent[x] = x

    def add(self, x):
        if x not in self.parent:
            self.parent[x] = x

    def find(self, x):
        if x not in self.parent:
            self.parent[x] = x
        root = x
        while self.parent[root] != root:
            root = self.parent[root]
        while self.parent[x] != root:
            self.parent[x], x = root, self.parent[x]
        return root

    def union(self, a, b):
        """Merge the sets of a and b; the smaller root id wins (canonical)."""
        ra, rb = self.find(a), self.find(b)
        if ra == rb:
            return False
        if rb < ra:
            ra, rb = rb, ra
        self.parent[rb] = ra
        return True

    def connected(self, a, b):
        return self.find(a) == self.find(b)

    def groups(self):
        """Map root -> sorted members, roots canonical (minimum member)."""
        out = {}
        for x in self.parent:
            out.setdefault(self.find(x), []).append(x)
        return {r: sorted(ms) for r, ms in out.items()}
