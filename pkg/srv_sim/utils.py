"""
Some basic helper functions for formatting, config files and running jobs in
parallel.
"""

import math
import os
import shutil
import time
from dataclasses import fields
from pathlib import Path

import numpy as np
import yaml
from joblib import Parallel, delayed

from srv_sim.errors import ConfigError

SEED_ENV_VAR = 'SRV_SIM_SEED'


def pretify_dict(d, padding=5):
    max_key_len = max([len(key) for key in d.keys()])
    line_len = max_key_len + padding
    s = ''
    for key, value in d.items():
        spaces = ' ' * (line_len - len(key))
        s += '{0}:{1}{2}\n'.format(
            key, spaces, value
        )
    return s[:-1]


def save_yaml(d, fname):
    """Save a dictionary in yaml format."""
    with open(Path(fname).expanduser(), 'w') as f:
        yaml.safe_dump(d, stream=f, sort_keys=True)


def load_yaml(fname):
    """Load a yaml dictionary"""
    with open(Path(fname).expanduser(), 'r') as f:
        return yaml.safe_load(f)


def default_seed(fallback=0):
    """Seed named by the SRV_SIM_SEED environment variable, else fallback."""
    value = os.environ.get(SEED_ENV_VAR)
    if value is None or not value.strip():
        return fallback
    return int(value)


def parse_size(s):
    """Parse sizes such as '4KB', '32MB', '64' (bytes) into an int."""
    s = str(s).strip().upper()
    multipliers = {'KB': 1 << 10, 'MB': 1 << 20, 'GB': 1 << 30, 'B': 1}
    for suffix, mult in multipliers.items():
        if s.endswith(suffix):
            return int(s[:-len(suffix)]) * mult
    return int(s)


def format_size(n):
    """Inverse of parse_size for exact multiples."""
    for suffix, mult in (('GB', 1 << 30), ('MB', 1 << 20), ('KB', 1 << 10)):
        if n >= mult and n % mult == 0:
            return '{0}{1}'.format(n // mult, suffix)
    return '{}B'.format(n)


def hex_mask(bits, width):
    """Hex string of a width-bit mask, zero padded."""
    return '0x{0:0{1}x}'.format(bits, max(1, width // 4))


def ensure_writable(path):
    mkdir(Path(path).parent)


def parallelise(func, items, n_jobs=1, verbose=0):
    """Apply func to every item, in parallel when n_jobs != 1.

    Arguments:
        func: picklable callable taking a single argument
        items: iterable of arguments
        n_jobs: number of joblib workers (-1 for all cpus)
        verbose: joblib verbosity

    Returns:
        List of results in the order of items.
    """
    items = list(items)
    if n_jobs == 1:
        return [func(item) for item in items]
    return Parallel(n_jobs=n_jobs, verbose=verbose)(
        delayed(func)(item) for item in items)


def mkdir(path):
    """Make a new directory, including parents."""
    path = Path(path).expanduser().resolve()
    path.mkdir(exist_ok=True, parents=True)
    return path


def rng_from_seed(seed):
    """Seeded numpy Generator; every random stream in srv_sim comes from here."""
    return np.random.default_rng(seed)


def get_eta(start_time, iters_completed, total_iters):
    """Format time in seconds to hh:mm:ss."""
    time_elapsed = time.time() - start_time
    time_per_iter = time_elapsed / (iters_completed + 1)
    time_remaining = max(0, time_per_iter * (total_iters - iters_completed - 1))
    formatted_eta = format_time(time_remaining)
    return formatted_eta


def format_time(t):
    """Returns string continaing time in hh:mm:ss format.

    Arguments:
        t: time in seconds

    Raises:
        ValueError if t < 0
    """
    if t < 0:
        raise ValueError('Time must be positive.')

    t = int(math.floor(t))
    h = t // 3600
    m = (t - (h * 3600)) // 60
    s = t - ((h * 3600) + (m * 60))
    return '{0:02d}:{1:02d}:{2:02d}'.format(h, m, s)


def print_with_overwrite(*s, spacer=' '):
    """Prints to console, but overwrites previous output, rather than creating
    a newline.

    Arguments:
        s: string (possibly with multiple lines) to print
        spacer: whitespace character to use between words on each line
    """
    s = '\n'.join(
        [spacer.join([str(word) for word in substring]) for substring in s])
    erase = '\x1b[2K'
    up_one = '\x1b[1A'
    lines = s.split('\n')
    n_lines = len(lines)
    console_width = shutil.get_terminal_size((0, 20)).columns
    for idx in range(n_lines):
        lines[idx] += ' ' * max(0, console_width - len(lines[idx]))
    print((erase + up_one) * (n_lines - 1) + s, end='\r', flush=True)


def dataclass_from_dict(cls, d, section):
    """Build dataclass cls from a mapping, type checking every key.

    Arguments:
        cls: dataclass type whose fields all have defaults
        d: mapping of field name to value (None means all defaults)
        section: name used in error messages

    Returns:
        Instance of cls.

    Raises:
        ConfigError for unknown keys or values of the wrong type.
    """
    if d is None:
        return cls()
    if not isinstance(d, dict):
        raise ConfigError('section {} must be a mapping'.format(section))
    known = {f.name: f for f in fields(cls) if f.init}
    unknown = sorted(set(d) - set(known))
    if unknown:
        raise ConfigError('unknown key(s) in {0}: {1}'.format(
            section, ', '.join(unknown)))
    kwargs = {}
    for key, value in d.items():
        expected = known[key].type
        if expected in (int, 'int'):
            if isinstance(value, bool) or not isinstance(value, int):
                raise ConfigError('{0}.{1} must be an integer, got {2!r}'.format(
                    section, key, value))
        elif expected in (float, 'float'):
            if isinstance(value, bool) or not isinstance(value, (int, float)):
                raise ConfigError('{0}.{1} must be a number, got {2!r}'.format(
                    section, key, value))
            value = float(value)
        elif expected in (str, 'str'):
            if not isinstance(value, str):
                raise ConfigError('{0}.{1} must be a string, got {2!r}'.format(
                    section, key, value))
        elif expected in (bool, 'bool'):
            if not isinstance(value, bool):
                raise ConfigError('{0}.{1} must be true or false, got '
                                  '{2!r}'.format(section, key, value))
        kwargs[key] = value
    try:
        return cls(**kwargs)
    except (TypeError, ValueError) as e:
        raise ConfigError('invalid {0}: {1}'.format(section, e))
