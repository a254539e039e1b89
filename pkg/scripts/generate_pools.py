"""Regenerate the frozen simulation pools under tests/artifacts/.

The configurations are the frozen manifests in bbmfluct.harness
(tail_pool_config, fluctuation_pool_config); the chunk partition below is
part of the shipped layout, so a full rerun reproduces every chunk file
byte-for-byte.  Finished chunks are skipped, which makes the run resumable.

    python3 scripts/generate_pools.py tail   [--out tests/artifacts/tail]
    python3 scripts/generate_pools.py fluct  [--out tests/artifacts/fluct]

The tail pool (100k replicates to horizon 30) takes a few core-hours; the
fluctuation pool (10k replicates to horizon 64 under the receding prune
barrier) takes about two.
"""

from __future__ import annotations

import argparse
import time
from pathlib import Path

from bbmfluct import harness
from bbmfluct.engine import simulate, write_martingale_csv

POOLS = {
    # name: (config factory, replicates per chunk, chunk count)
    "tail": (harness.tail_pool_config, 1000, 100),
    "fluct": (harness.fluctuation_pool_config, 250, 40),
}


def main() -> int:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("pool", choices=sorted(POOLS))
    ap.add_argument("--out", default=None, help="output directory (default: tests/artifacts/<pool>)")
    args = ap.parse_args()

    factory, chunk, n_chunks = POOLS[args.pool]
    cfg = factory()
    assert cfg.replicates == chunk * n_chunks

    out = Path(args.out) if args.out else Path(__file__).parent.parent / "tests" / "artifacts" / args.pool
    out.mkdir(parents=True, exist_ok=True)

    t00 = time.time()
    for c in range(n_chunks):
        path = out / f"chunk_{c:03d}.csv"
        if path.exists():
            continue
        t0 = time.time()
        results = simulate(cfg, range(c * chunk, (c + 1) * chunk))
        tmp = path.with_suffix(".csv.tmp")
        with open(tmp, "w") as fh:
            write_martingale_csv(fh, results)
        tmp.replace(path)
        print(f"chunk {c:03d} done in {time.time() - t0:.0f}s "
              f"(elapsed {time.time() - t00:.0f}s)", flush=True)
    print("all chunks present", flush=True)
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
