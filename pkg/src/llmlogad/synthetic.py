"""BGL-shaped synthetic logs for tests, throughput checks and demos."""

from __future__ import annotations

import random
from typing import Callable, Iterator

# Each pattern has its own literal words so Drain keeps them apart; "{}"
# slots are filled with numbers, hex or addresses that the mask rules catch.
PATTERNS = (
    "instruction cache parity error corrected",
    "generating core.{}",
    "data TLB error interrupt",
    "ciod: failed to read message prefix on control stream CioStream socket to {}",
    "total of {} ddr error(s) detected and corrected",
    "machine check interrupt (bit={}): L2 dcache unit data parity error",
    "CE sym {}, at {}, mask {}",
    "ciod: LOGIN chdir({}) failed: No such file or directory",
    "rts: kernel terminated for reason {}",
    "program interrupt: fp cr update field",
    "idoproxydb hit ASSERT condition: ASSERT expression={}",
    "NFS Mount failed on bglio{} slept {} seconds, retrying",
    "fpr{}={} {} {} {}",
    "shutdown complete",
    "Node card VPD check: missing U{} node, VPD ecid {} in processor card slot J{}",
    "critical input interrupt (unit={} bit={}): warning for torus z+ wire",
    "MidplaneSwitchController performing bit sparing on R{} bit {}",
    "Lustre mount FAILED : bglio{} : block_id : location",
    "BglIdoChip table has {} IDOs with the same IP address ({})",
    "external input interrupt (unit={} bit={}): uncorrectable torus error",
)

ANOMALY_TAGS = ("KERNDTLB", "KERNSTOR", "APPSEV", "KERNMNTF", "KERNTERM")


def _slot(rng: random.Random) -> str:
    kind = rng.randrange(4)
    if kind == 0:
        return str(rng.randrange(100000))
    if kind == 1:
        return f"0x{rng.randrange(16**8):08x}"
    if kind == 2:
        return f"10.{rng.randrange(256)}.{rng.randrange(256)}.{rng.randrange(256)}:{rng.randrange(1, 65536)}"
    return str(rng.randrange(64))


def fill(pattern: str, rng: random.Random) -> str:
    return pattern.format(*(_slot(rng) for _ in range(pattern.count("{}"))))


def bgl_line(anomalous: bool, seconds: int, node: str, content: str, tag: str = "KERNDTLB") -> str:
    """One line in the nine-header-field BGL layout."""
    label = tag if anomalous else "-"
    ts = 1117838570 + seconds
    return (
        f"{label} {ts} 2005.06.03 {node} 2005-06-03-15.42.50.{seconds % 1000000:06d} "
        f"{node} RAS KERNEL {'FATAL' if anomalous else 'INFO'} {content}"
    )


def generate(
    n: int,
    *,
    seed: int = 0,
    anomaly_rate: float = 0.05,
    patterns: tuple[str, ...] = PATTERNS,
    label_of: Callable[[int], bool] | None = None,
    node_of: Callable[[int], str] | None = None,
) -> Iterator[str]:
    """Yield ``n`` lines. ``label_of(i)`` and ``node_of(i)`` override the
    random label and node name of line ``i``."""
    rng = random.Random(seed)
    for i in range(n):
        bad = label_of(i) if label_of else rng.random() < anomaly_rate
        node = node_of(i) if node_of else f"R{rng.randrange(64):02d}-M{rng.randrange(2)}-N{rng.randrange(16)}"
        content = fill(rng.choice(patterns), rng)
        yield bgl_line(bad, i, node, content, rng.choice(ANOMALY_TAGS))


def write(path, lines) -> int:
    count = 0
    with open(path, "w", encoding="utf-8") as fh:
        for line in lines:
            fh.write(line + "\n")
            count += 1
    return count
