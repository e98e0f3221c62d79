#!/usr/bin/env python3
"""Regenerate the synthetic fixtures under data/fixtures (fixed seed)."""
import json
import pathlib
import random

SHAPES = [(3, 3), (3, 3), (3, 3), (3, 4), (4, 3), (2, 5), (4, 2), (3, 3), (4, 3), (3, 4)]


def job_shop(rng, n, m, low, high):
    jobs = []
    for _ in range(n):
        order = list(range(m))
        rng.shuffle(order)
        jobs.append([[k, rng.randint(low, high)] for k in order])
    return {"machines": m, "jobs": jobs}


def write(path, inst):
    rows = ",\n".join("  " + json.dumps(job) for job in inst["jobs"])
    path.write_text(f'{{"machines": {inst["machines"]}, "jobs": [\n{rows}\n]}}\n')


def main():
    out = pathlib.Path(__file__).resolve().parent.parent / "data" / "fixtures"
    out.mkdir(parents=True, exist_ok=True)
    rng = random.Random(20240917)
    for i, (n, m) in enumerate(SHAPES, start=1):
        write(out / f"small_{i:02d}.json", job_shop(rng, n, m, 1, 9))
    write(out / "medium_6x4.json", job_shop(rng, 6, 4, 1, 9))
    write(out / "toy_1x1.json", {"machines": 1, "jobs": [[[0, 5]]]})


if __name__ == "__main__":
    main()
