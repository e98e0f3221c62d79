#!/usr/bin/env python3
"""Regenerate Taillard job-shop instances from their published generator seeds.

Taillard (1993) defines each instance by a time seed and a machine seed fed to
a Lehmer generator (a=16807, m=2^31-1, Schrage decomposition). Processing
times are unif(1, 99); machine orders are built by random swaps.

    python3 tools/taillard_gen.py ta01 ta02 ta03 --out data/instances
"""
import argparse
import pathlib

# name -> (jobs, machines, time seed, machine seed)
INSTANCES = {
    "ta01": (15, 15, 840612802, 398197754),
    "ta02": (15, 15, 1314640371, 386720536),
    "ta03": (15, 15, 1227221349, 316176388),
}


class Lehmer:
    M, A, B, C = 2147483647, 16807, 127773, 2836

    def __init__(self, seed):
        self.seed = seed

    def unif(self, low, high):
        k = self.seed // self.B
        self.seed = self.A * (self.seed % self.B) - k * self.C
        if self.seed < 0:
            self.seed += self.M
        return low + int(self.seed / self.M * (high - low + 1))


def generate(n, m, time_seed, machine_seed):
    t = Lehmer(time_seed)
    times = [[t.unif(1, 99) for _ in range(m)] for _ in range(n)]
    g = Lehmer(machine_seed)
    machines = [[k + 1 for k in range(m)] for _ in range(n)]
    for row in machines:
        for k in range(m):
            r = g.unif(k, m - 1)
            row[k], row[r] = row[r], row[k]
    return times, machines


def render(n, m, times, machines):
    lines = [f"{n} {m}"]
    lines += [" ".join(map(str, row)) for row in times]
    lines += [" ".join(map(str, row)) for row in machines]
    return "\n".join(lines) + "\n"


def main():
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("names", nargs="+", choices=sorted(INSTANCES))
    parser.add_argument("--out", default="data/instances")
    args = parser.parse_args()
    out = pathlib.Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    for name in args.names:
        n, m, ts, ms = INSTANCES[name]
        (out / f"{name}.txt").write_text(render(n, m, *generate(n, m, ts, ms)))
        print(f"wrote {out / f'{name}.txt'}")


if __name__ == "__main__":
    main()
