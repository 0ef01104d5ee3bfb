"""Writes the grid maps under scenarios/maps in MovingAI format.

The maze and the cave map are procedural stand-ins with the benchmark
dimensions; drop the original files in their place to use those instead.
"""

import random
from collections import deque
from pathlib import Path

OUT = Path(__file__).resolve().parent.parent / "scenarios" / "maps"


def write(name, rows):
    h, w = len(rows), len(rows[0])
    body = "\n".join("".join(r) for r in rows)
    (OUT / f"{name}.map").write_text(f"type octile\nheight {h}\nwidth {w}\nmap\n{body}\n")


def empty(w, h):
    return [["."] * w for _ in range(h)]


def maze(side, corridor, seed):
    """Perfect maze with `corridor`-wide passages and unit walls."""
    rng = random.Random(seed)
    n = (side - 1) // (corridor + 1)
    rows = [["@"] * side for _ in range(side)]

    def carve(r0, c0, hh, ww):
        for r in range(r0, r0 + hh):
            for c in range(c0, c0 + ww):
                rows[r][c] = "."

    def origin(i):
        return 1 + i * (corridor + 1)

    seen = {(0, 0)}
    stack = [(0, 0)]
    carve(origin(0), origin(0), corridor, corridor)
    while stack:
        r, c = stack[-1]
        nbrs = [(r + dr, c + dc) for dr, dc in ((0, 1), (1, 0), (0, -1), (-1, 0))
                if 0 <= r + dr < n and 0 <= c + dc < n and (r + dr, c + dc) not in seen]
        if not nbrs:
            stack.pop()
            continue
        nr, nc = rng.choice(nbrs)
        carve(origin(nr), origin(nc), corridor, corridor)
        if nr != r:
            carve(origin(min(r, nr)) + corridor, origin(c), 1, corridor)
        else:
            carve(origin(r), origin(min(c, nc)) + corridor, corridor, 1)
        seen.add((nr, nc))
        stack.append((nr, nc))
    return rows


def cave(w, h, seed, fill=0.45, rounds=5):
    """Cellular-automaton caves, reduced to the largest connected region."""
    rng = random.Random(seed)
    open_ = [[rng.random() > fill for _ in range(w)] for _ in range(h)]
    for _ in range(rounds):
        nxt = [[False] * w for _ in range(h)]
        for r in range(h):
            for c in range(w):
                walls = sum(
                    1
                    for dr in (-1, 0, 1)
                    for dc in (-1, 0, 1)
                    if (dr or dc) and not (0 <= r + dr < h and 0 <= c + dc < w and open_[r + dr][c + dc])
                )
                nxt[r][c] = walls < 5
        open_ = nxt
    best = set()
    seen = set()
    for r in range(h):
        for c in range(w):
            if open_[r][c] and (r, c) not in seen:
                comp = {(r, c)}
                q = deque([(r, c)])
                seen.add((r, c))
                while q:
                    y, x = q.popleft()
                    for dy, dx in ((0, 1), (1, 0), (0, -1), (-1, 0)):
                        p = (y + dy, x + dx)
                        if 0 <= p[0] < h and 0 <= p[1] < w and open_[p[0]][p[1]] and p not in seen:
                            seen.add(p)
                            comp.add(p)
                            q.append(p)
                if len(comp) > len(best):
                    best = comp
    return [["." if (r, c) in best else "@" for c in range(w)] for r in range(h)]


def main():
    OUT.mkdir(parents=True, exist_ok=True)
    write("empty-16-16", empty(16, 16))
    write("empty-32-32", empty(32, 32))
    write("maze-32-32-4", maze(32, 4, seed=4))
    write("den312d", cave(81, 65, seed=312, fill=0.55))


if __name__ == "__main__":
    main()
