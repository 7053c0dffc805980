# Shared constants, gadget texts and oracles for the test suite. The
# brute-force interpreter here does not use srv_sim.isa, so it can serve as
# an independent oracle for the indirect update loop a[x[z]] = a[z] + 2.
from pathlib import Path

import numpy as np

from srv_sim.attacks.scenario import load_scenario
from srv_sim.isa.gadget_parser import parse_gadget
from srv_sim.isa.memory import MemoryImage
from srv_sim.memhier.cache import CacheConfig, CacheLevelConfig


def setup():
    # Tests should be repeatable
    np.random.seed(2)

    # Check if we can write to /tmp/; if not, write to test directory
    dump_path = Path('/tmp/srv_sim_test')
    try:
        dump_path.mkdir(parents=True, exist_ok=True)
        open(dump_path / 'probe', 'w').close()
    except IOError:
        dump_path = Path('test/dump_path')
        dump_path.mkdir(parents=True, exist_ok=True)
    return dump_path


REPO_ROOT = Path(__file__).resolve().parents[1]
GADGET_DIR = REPO_ROOT / 'gadgets'
SCENARIO_DIR = REPO_ROOT / 'scenarios'

SEED = 2
POC_SECRET = b'XXThe Magic Words are Squeamish Ossifrage.'
SCATTER_UPDATE_INDICES = [3, 0, 1, 2, 7, 4, 5, 6, 11, 8, 9, 10, 15, 12, 13, 14]
SCATTER_UPDATE_TAINT = [3, 7, 11, 15]
SCATTER_UPDATE_GROUPS = [[0, 1, 2], [3, 4, 5, 6], [7, 8, 9, 10],
                         [11, 12, 13, 14], [15]]

SCATTER_UPDATE_TEXT = """
array x 4 16
array a 4 16
for z in 0..16 { a[x[z]] = a[z] + 2 }
"""

IDENTITY_TEXT = """
array a 4 16
loop 16:
  a[z] = a[z]
"""

TWO_STATEMENT_TEXT = """
array a 4 16
array b 4 16
loop 16:
  a[z] = b[z] + 1
  b[z] = a[z] * 2
"""

DESK_CACHE = CacheConfig(levels=(
    CacheLevelConfig(size=32 << 10, assoc=8, hit_latency=40),
    CacheLevelConfig(size=1 << 20, assoc=16, hit_latency=150)),
    memory_latency=400)

SMALL_CACHE = CacheConfig(levels=(
    CacheLevelConfig(size=4 << 10, assoc=4, hit_latency=40),
    CacheLevelConfig(size=64 << 10, assoc=8, hit_latency=150)),
    memory_latency=400)


def scatter_update_program():
    return parse_gadget(SCATTER_UPDATE_TEXT)


def scatter_update_memory(indices=None, values=None, program=None):
    program = scatter_update_program() if program is None else program
    memory = MemoryImage.for_program(program)
    indices = SCATTER_UPDATE_INDICES if indices is None else indices
    values = range(16) if values is None else values
    for i, (target, value) in enumerate(zip(indices, values)):
        memory.write_element('x', i, target)
        memory.write_element('a', i, value)
    return memory


def brute_force_scatter_update(indices, values, increment=2):
    """a[x[i]] = a[i] + increment for i = 0..n-1, in iteration order."""
    a = [int(v) & 0xffffffff for v in values]
    for i, target in enumerate(indices):
        a[target] = (a[i] + increment) & 0xffffffff
    return a


def random_index_vectors(n, width=16, seed=SEED):
    """Index vectors mixing identity lanes with random in-range targets."""
    rng = np.random.default_rng(seed)
    vectors = []
    for _ in range(n):
        targets = rng.integers(0, width, size=width)
        keep = rng.random(width) < 0.5
        vectors.append([int(t) if k else i
                        for i, (t, k) in enumerate(zip(targets, keep))])
    return vectors


def shipped(name):
    return load_scenario(SCENARIO_DIR / '{}.yaml'.format(name))


RANDOM_ARRAY_LENGTH = 24


def random_gadget(rng, length=RANDOM_ARRAY_LENGTH, trip_count=None):
    """A random loop of one or two statements mixing scatters, gathers and
    offset accesses over the value arrays a and b, with its memory image.

    The index arrays x and y hold in-range targets, so every iteration stays
    in bounds and cross-iteration dependences come from the data alone.
    """
    def index():
        kind = int(rng.integers(0, 4))
        if kind == 0:
            return 'z'
        if kind == 1:
            return 'z + {}'.format(int(rng.integers(1, 4)))
        return '{}[z]'.format('xy'[kind - 2])

    if trip_count is None:
        trip_count = int(rng.integers(1, length - 3))
    lines = ['array {0} 4 {1}'.format(name, length) for name in 'xyab']
    lines.append('loop {}:'.format(trip_count))
    for _ in range(int(rng.integers(1, 3))):
        dst, src = (str(name) for name in rng.choice(['a', 'b'], size=2))
        op = str(rng.choice(['+', '*', '^']))
        lines.append('  {0}[{1}] = {2}[{3}] {4} {5}'.format(
            dst, index(), src, index(), op, int(rng.integers(1, 9))))
    program = parse_gadget('\n'.join(lines) + '\n')
    memory = MemoryImage.for_program(program)
    for i in range(length):
        for name in 'xy':
            memory.write_element(name, i, int(rng.integers(0, length)))
        for name in 'ab':
            memory.write_element(name, i, int(rng.integers(0, 1000)))
    return program, memory
