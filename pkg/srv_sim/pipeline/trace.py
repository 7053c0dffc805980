"""
Microarchitectural events and the versioned line-delimited trace format.
"""

import json
from dataclasses import dataclass, field
from typing import Optional

from srv_sim.utils import ensure_writable

TRACE_VERSION = 'trace_v1'


@dataclass
class Event:
    tick: int
    kind: str
    instr_seq: int = -1
    lane: int = -1
    address: Optional[int] = None
    size: int = 0
    value: Optional[int] = None
    level: Optional[int] = None
    latency: int = 0
    transient: bool = False
    detail: dict = field(default_factory=dict)

    def to_record(self, n_levels=None):
        record = {'tick': self.tick, 'kind': self.kind,
                  'instr_seq': self.instr_seq, 'lane': self.lane}
        if self.address is not None:
            record['address'] = hex(self.address)
            record['size'] = self.size
        if self.level is not None:
            if n_levels is not None and self.level > n_levels:
                record['level_hit'] = 'MEM'
            else:
                record['level_hit'] = 'L{}'.format(self.level)
            record['latency'] = self.latency
        if self.value is not None:
            record['value'] = self.value
        if self.transient:
            record['transient'] = True
        record.update(self.detail)
        return record


def write_records(path, version, records):
    """Write a version header line followed by one JSON record per line."""
    ensure_writable(path)
    with open(path, 'w') as f:
        f.write('# {}\n'.format(version))
        for record in records:
            f.write(json.dumps(record, sort_keys=True) + '\n')


def read_records(path):
    """Inverse of write_records: (version, list of records)."""
    with open(path, 'r') as f:
        version = f.readline().strip().lstrip('#').strip()
        return version, [json.loads(line) for line in f if line.strip()]


def write_trace(path, events, n_levels=None, extra=None):
    records = []
    for event in events:
        record = event.to_record(n_levels)
        if extra:
            record.update(extra)
        records.append(record)
    write_records(path, TRACE_VERSION, records)
